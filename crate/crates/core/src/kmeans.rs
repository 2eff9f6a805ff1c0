//! Lloyd's k-means and its δ variant.
//!
//! Both loops share one driver and one stopping rule: stop when the labels
//! repeat, when no centroid moves more than `tol`, or after `max_iters`
//! rounds. With `delta = 0` and `noise_var = 0` the δ variant draws no random
//! numbers outside empty-cluster reseeding, so it matches Lloyd bit for bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::delta_em::{add_noise, pick_uniform};
use crate::distance::{delta_neighbor_set, squared_euclidean, DistanceOracle};
use crate::em::random_assignment;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::{argmin, Dataset, HardAssignment};
use crate::rng::{rng_from_seed, LabRng};
use crate::scalar::Scalar;

/// Centroid-shift threshold used when none is given.
pub const DEFAULT_KMEANS_TOL: f64 = 1e-9;

/// `K` cluster centres in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", transparent)]
pub struct Centroids<T>(Vec<Vec<T>>);

impl<T: Scalar> Centroids<T> {
    pub fn new(centres: Vec<Vec<T>>) -> Result<Self> {
        let d = centres.first().ok_or(Error::EmptyInput)?.len();
        for c in &centres {
            if c.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.len() });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self(centres))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn dim(&self) -> usize {
        self.0[0].len()
    }

    pub fn get(&self, k: usize) -> &[T] {
        &self.0[k]
    }

    pub fn as_slice(&self) -> &[Vec<T>] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Vec<T>> {
        self.0
    }

    fn max_shift(&self, other: &Self) -> T {
        self.0.iter().zip(&other.0).map(|(a, b)| norm(&crate::linalg::sub(a, b))).fold(T::zero(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KMeansResult<T> {
    pub centroids: Centroids<T>,
    /// Final labels, 0-based.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment.
    pub wcss_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
}

impl<T> KMeansResult<T> {
    pub fn assignment(&self) -> HardAssignment {
        HardAssignment::from_labels(self.labels.clone())
    }
}

fn check_dim<T: Scalar>(data: &Dataset<T>, centroids: &Centroids<T>) -> Result<()> {
    if data.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch { expected: centroids.dim(), found: data.dim() });
    }
    Ok(())
}

/// Nearest centroid by square Euclidean distance; ties go to the lower index.
pub fn kmeans_assign<T: Scalar>(data: &Dataset<T>, centroids: &Centroids<T>) -> Result<HardAssignment> {
    check_dim(data, centroids)?;
    let oracle = DistanceOracle::euclidean(centroids.as_slice());
    Ok(HardAssignment::from_labels(data.iter().map(|y| argmin(&oracle.row(y).values)).collect()))
}

/// Cluster means. An empty cluster is moved to a uniformly drawn data point.
pub fn kmeans_update<T: Scalar>(
    data: &Dataset<T>,
    assign: &HardAssignment,
    k: usize,
    rng: &mut LabRng,
) -> Result<Centroids<T>> {
    Ok(update_counted(data, assign, k, rng)?.0)
}

fn update_counted<T: Scalar>(
    data: &Dataset<T>,
    assign: &HardAssignment,
    k: usize,
    rng: &mut LabRng,
) -> Result<(Centroids<T>, usize)> {
    if assign.len() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), found: assign.len() });
    }
    let d = data.dim();
    let mut sums = vec![vec![T::zero(); d]; k];
    let counts = assign.counts(k);
    for (y, l) in data.iter().zip(assign.labels()) {
        if let Some(l) = *l {
            for (s, &v) in sums[l].iter_mut().zip(y) {
                *s += v;
            }
        }
    }
    let mut reseeds = 0;
    for (c, sum) in sums.iter_mut().enumerate() {
        if counts[c] == 0 {
            reseeds += 1;
            let pick = rng.random_range(0..data.n());
            log::debug!("cluster {c} is empty; reseeding at point {pick}");
            sum.copy_from_slice(data.point(pick));
        } else {
            let n = T::of_usize(counts[c]);
            for s in sum.iter_mut() {
                *s /= n;
            }
        }
    }
    Ok((Centroids(sums), reseeds))
}

/// Within-cluster sum of squares of `assign` around `centroids`.
pub fn wcss<T: Scalar>(data: &Dataset<T>, centroids: &Centroids<T>, assign: &HardAssignment) -> Result<T> {
    let mut total = T::zero();
    for (y, l) in data.iter().zip(assign.labels()) {
        if let Some(l) = *l {
            total += squared_euclidean(y, centroids.get(l))?;
        }
    }
    Ok(total)
}

/// Centroids of a random hard assignment with no empty cluster.
pub fn random_centroids<T: Scalar>(data: &Dataset<T>, k: usize, rng: &mut LabRng) -> Result<Centroids<T>> {
    let assign = random_assignment(data.n(), k, rng)?;
    kmeans_update(data, &assign, k, rng)
}

pub fn run_kmeans<T: Scalar>(
    data: &Dataset<T>,
    init: &Centroids<T>,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<KMeansResult<T>> {
    lloyd(data, init, 0.0, 0.0, max_iters, tol, seed)
}

/// δ-k-means: labels drawn uniformly from `{k : d_E^k − d_E^* ≤ δ}` and
/// `N(0, noise_var)` added to every centroid entry after each update.
pub fn run_delta_kmeans<T: Scalar>(
    data: &Dataset<T>,
    init: &Centroids<T>,
    delta: f64,
    noise_var: f64,
    max_iters: usize,
    seed: u64,
) -> Result<KMeansResult<T>> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeDelta(delta));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::config("noise_var must be a finite non-negative number"));
    }
    lloyd(data, init, delta, noise_var, max_iters, DEFAULT_KMEANS_TOL, seed)
}

fn lloyd<T: Scalar>(
    data: &Dataset<T>,
    init: &Centroids<T>,
    delta: f64,
    noise_var: f64,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<KMeansResult<T>> {
    check_dim(data, init)?;
    if max_iters == 0 {
        return Err(Error::config("max_iters must be at least 1"));
    }
    let k = init.k();
    let delta = T::of(delta);
    let tol = T::of(tol);
    let mut rng = rng_from_seed(seed);
    let mut centroids = init.clone();
    let mut labels: Option<HardAssignment> = None;
    let mut trace = Vec::new();
    let mut reseeds = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        let oracle = DistanceOracle::euclidean(centroids.as_slice());
        let mut next = Vec::with_capacity(data.n());
        for y in data.iter() {
            let set = delta_neighbor_set(&oracle.row(y), delta)?;
            next.push(pick_uniform(&set, &mut rng));
        }
        let assign = HardAssignment::from_labels(next);
        trace.push(wcss(data, &centroids, &assign)?);
        if labels.as_ref() == Some(&assign) {
            converged = true;
            break;
        }
        let (mut updated, r) = update_counted(data, &assign, k, &mut rng)?;
        reseeds += r;
        for c in &mut updated.0 {
            add_noise(c, noise_var, &mut rng);
        }
        let shift = updated.max_shift(&centroids);
        centroids = updated;
        labels = Some(assign);
        if shift <= tol {
            converged = true;
            break;
        }
    }
    let labels = labels.map(|a| a.dense()).unwrap_or_default();
    Ok(KMeansResult { centroids, labels, iterations: trace.len(), wcss_trace: trace, converged, reseeds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let shift = (i % 3) as f64 * 3.0;
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                vec![shift + a, b]
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    fn cents(c: &[[f64; 2]]) -> Centroids<f64> {
        Centroids::new(c.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn point_on_centroid_and_ties() {
        let data = Dataset::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let c = cents(&[[-1.0, 0.0], [1.0, 1.0], [1.0, 0.0]]);
        let a = kmeans_assign(&data, &c).unwrap();
        assert_eq!(a.label(0), Some(1));
        assert_eq!(a.label(1), Some(0));
    }

    #[test]
    fn assign_matches_scan() {
        let data = cloud(100, 1);
        let c = cents(&[[0.0, 0.0], [3.0, 0.5], [6.0, -0.5]]);
        let a = kmeans_assign(&data, &c).unwrap();
        for (i, y) in data.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for k in 0..3 {
                let d = (y[0] - c.get(k)[0]).powi(2) + (y[1] - c.get(k)[1]).powi(2);
                if d < best.0 {
                    best = (d, k);
                }
            }
            assert_eq!(a.label(i), Some(best.1));
        }
    }

    #[test]
    fn update_is_cluster_mean() {
        let data = cloud(30, 2);
        let assign = HardAssignment::from_labels((0..30).map(|i| i % 3).collect());
        let c = kmeans_update(&data, &assign, 3, &mut rng_from_seed(0)).unwrap();
        for k in 0..3 {
            let members: Vec<&[f64]> = data.iter().enumerate().filter(|(i, _)| i % 3 == k).map(|(_, y)| y).collect();
            for j in 0..2 {
                let m = members.iter().map(|y| y[j]).sum::<f64>() / members.len() as f64;
                assert!((c.get(k)[j] - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_cluster_is_reseeded_on_a_point() {
        let data = cloud(10, 3);
        let assign = HardAssignment::from_labels(vec![0; 10]);
        let c = kmeans_update(&data, &assign, 2, &mut rng_from_seed(0)).unwrap();
        assert!(data.iter().any(|y| y == c.get(1)));
    }

    #[test]
    fn converged_init_stops_after_one_round() {
        let data = cloud(60, 4);
        let first =
            run_kmeans(&data, &random_centroids(&data, 3, &mut rng_from_seed(1)).unwrap(), 100, 0.0, 0).unwrap();
        assert!(first.converged);
        let again = run_kmeans(&data, &first.centroids, 100, 0.0, 0).unwrap();
        assert_eq!(again.iterations, 1);
        assert_eq!(again.labels, first.labels);
    }

    #[test]
    fn delta_kmeans_reduces_to_lloyd() {
        let data = cloud(90, 5);
        for seed in 0..10 {
            let init = random_centroids(&data, 3, &mut rng_from_seed(seed)).unwrap();
            let a = run_kmeans(&data, &init, 50, DEFAULT_KMEANS_TOL, seed).unwrap();
            let b = run_delta_kmeans(&data, &init, 0.0, 0.0, 50, seed).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn result_json_has_wcss_trace() {
        let data = cloud(30, 6);
        let init = random_centroids(&data, 2, &mut rng_from_seed(0)).unwrap();
        let v = serde_json::to_value(run_kmeans(&data, &init, 20, 1e-9, 0).unwrap()).unwrap();
        assert!(v["wcss_trace"].is_array());
        assert!(v["centroids"].is_array());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn lloyd_wcss_is_nonincreasing(seed in 0u64..10_000, k in 1usize..5) {
            let data = cloud(40, seed);
            let init = random_centroids(&data, k, &mut rng_from_seed(seed)).unwrap();
            let fit = run_kmeans(&data, &init, 100, 0.0, seed).unwrap();
            for w in fit.wcss_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
            }
        }
    }
}
