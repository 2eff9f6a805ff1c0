//! Synthetic two-component datasets.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{Dataset, GmmParams};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// Points per dataset in both reference experiments.
pub const DEFAULT_N: usize = 1000;

/// Equal weights, means `(±0.3, 0)` and strongly correlated covariances of
/// opposite sign, so the clusters cross in an X.
pub fn example1_params<T: Scalar>() -> GmmParams<T> {
    GmmParams::new(
        vec![T::of(0.5), T::of(0.5)],
        vec![vec![T::of(0.3), T::zero()], vec![T::of(-0.3), T::zero()]],
        vec![Matrix::from_f64_rows(&[[1.0, 0.98], [0.98, 1.0]]), Matrix::from_f64_rows(&[[1.0, -0.98], [-0.98, 1.0]])],
    )
    .expect("valid example parameters")
}

/// Weights `0.7/0.3`: a unit-covariance blob and a flat, wide one through it.
pub fn example2_params<T: Scalar>() -> GmmParams<T> {
    GmmParams::new(
        vec![T::of(0.7), T::of(0.3)],
        vec![vec![T::zero(), T::of(-0.5)], vec![T::zero(), T::zero()]],
        vec![Matrix::identity(2), Matrix::from_f64_rows(&[[10.0, 0.0], [0.0, 0.1]])],
    )
    .expect("valid example parameters")
}

/// `n` draws from the mixture, with the generating component recorded as the true label.
pub fn sample_mixture<T: Scalar>(params: &GmmParams<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = rng_from_seed(seed);
    let d = params.dim();
    let factors = params.covariances.iter().map(Cholesky::new).collect::<Result<Vec<_>>>()?;
    let cumulative: Vec<f64> = params
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w.f64();
            Some(*acc)
        })
        .collect();
    let mut points = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        let k = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
        let z: Vec<T> = (0..d).map(|_| T::of(StandardNormal.sample(&mut rng))).collect();
        let l = factors[k].factor();
        let row = points.row_mut(i);
        for a in 0..d {
            let mut v = params.means[k][a];
            for b in 0..=a {
                v += l[(a, b)] * z[b];
            }
            row[a] = v;
        }
        labels.push(k);
    }
    Dataset::new(points, Some(labels))
}

pub fn generate_example1<T: Scalar>(n: usize, seed: u64) -> Result<Dataset<T>> {
    sample_mixture(&example1_params(), n, seed)
}

pub fn generate_example2<T: Scalar>(n: usize, seed: u64) -> Result<Dataset<T>> {
    sample_mixture(&example2_params(), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let a: Dataset<f64> = generate_example1(200, 7).unwrap();
        let b: Dataset<f64> = generate_example1(200, 7).unwrap();
        assert_eq!(a, b);
        let c: Dataset<f64> = generate_example1(200, 8).unwrap();
        assert_ne!(a, c);
    }

    fn component_mean(d: &Dataset<f64>, k: usize) -> (Vec<f64>, usize) {
        let labels = d.true_labels().unwrap();
        let mut s = [0.0; 2];
        let mut n = 0;
        for (y, &l) in d.iter().zip(labels) {
            if l == k {
                s[0] += y[0];
                s[1] += y[1];
                n += 1;
            }
        }
        (s.iter().map(|v| v / n as f64).collect(), n)
    }

    #[test]
    fn example1_moments() {
        let d: Dataset<f64> = generate_example1(100_000, 1).unwrap();
        let (m, n) = component_mean(&d, 0);
        // 3σ/√n with unit marginal variances and n ≈ 5·10⁴.
        let tol = 3.0 / (n as f64).sqrt();
        assert!((m[0] - 0.3).abs() < tol && m[1].abs() < tol, "{m:?}");
        assert!(tol < 0.02);
        let small: Dataset<f64> = generate_example1(DEFAULT_N, 2).unwrap();
        let ones = small.true_labels().unwrap().iter().filter(|&&l| l == 0).count();
        assert!((ones as f64 / 1000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn example2_moments() {
        let d: Dataset<f64> = generate_example2(100_000, 3).unwrap();
        let (m, n) = component_mean(&d, 1);
        let tol = 3.0 * (10.0 / n as f64).sqrt();
        assert!(m[0].abs() < tol && m[1].abs() < tol, "{m:?}");
        let (m, n) = component_mean(&d, 0);
        let tol = 3.0 / (n as f64).sqrt();
        assert!(m[0].abs() < tol && (m[1] + 0.5).abs() < tol, "{m:?}");
        let small: Dataset<f64> = generate_example2(DEFAULT_N, 4).unwrap();
        let first = small.true_labels().unwrap().iter().filter(|&&l| l == 0).count();
        assert!((first as f64 / 1000.0 - 0.7).abs() < 0.05);
    }
}
