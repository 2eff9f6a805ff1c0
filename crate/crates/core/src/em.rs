//! Expectation-maximisation for Gaussian mixtures.
//!
//! The loop starts with an E-step, so initial parameters come from a random
//! hard assignment ([`random_init`]). The log-likelihood recorded at step `t`
//! is that of the parameters entering step `t`; the fit stops once two
//! consecutive values differ by less than `tol`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{DistanceOracle, Metric};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{
    check_dims, log_sum_exp, normalize_weights, repair_covariance, weighted_log_densities, Dataset, GmmParams,
    HardAssignment, Responsibilities, DEFAULT_JITTER,
};
use crate::rng::{rng_from_seed, LabRng};
use crate::scalar::Scalar;

/// Column mass below which a component counts as empty.
pub const EMPTY_MASS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Absolute log-likelihood improvement threshold.
    pub tol: f64,
    /// Jitter passed to [`repair_covariance`].
    pub cov_floor: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { k: 2, max_iters: 100, tol: 1e-6, cov_floor: DEFAULT_JITTER, seed: 0 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol must be positive"));
        }
        if !(self.cov_floor >= 0.0) {
            return Err(Error::config("cov_floor must be non-negative"));
        }
        Ok(())
    }
}

/// Outcome of any of the mixture fitting loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitResult<T> {
    pub params: GmmParams<T>,
    pub loglik_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
    /// Points dropped by the 2δ rule, per iteration (quantum emulation only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discards: Vec<usize>,
    /// Last hard assignment produced by the loop, when it has one.
    #[serde(skip)]
    pub assignment: Option<HardAssignment>,
}

/// Window of the moving average used by the randomised loops.
pub const MOVING_AVERAGE_WINDOW: usize = 5;

/// Stopping rule for noisy loops: stop once the mean of the last
/// [`MOVING_AVERAGE_WINDOW`] log-likelihoods moves by less than `tol`.
#[derive(Clone, Debug)]
pub struct MovingAverageStop {
    tol: f64,
    values: Vec<f64>,
    prev_mean: Option<f64>,
}

impl MovingAverageStop {
    pub fn new(tol: f64) -> Self {
        Self { tol, values: Vec::new(), prev_mean: None }
    }

    /// Records a value and reports whether the loop should stop.
    pub fn push(&mut self, ll: f64) -> bool {
        self.values.push(ll);
        if self.values.len() < MOVING_AVERAGE_WINDOW {
            return false;
        }
        let tail = &self.values[self.values.len() - MOVING_AVERAGE_WINDOW..];
        let mean = tail.iter().sum::<f64>() / MOVING_AVERAGE_WINDOW as f64;
        let done = self.prev_mean.is_some_and(|p| (mean - p).abs() < self.tol);
        self.prev_mean = Some(mean);
        done
    }
}

/// Parameters from an M-step plus the number of components that had to be reseeded.
#[derive(Clone, Debug, PartialEq)]
pub struct MStep<T> {
    pub params: GmmParams<T>,
    pub reseeds: usize,
}

/// Posterior responsibilities, computed in the log domain.
pub fn e_step<T: Scalar>(data: &Dataset<T>, params: &GmmParams<T>) -> Result<Responsibilities<T>> {
    e_step_with_loglik(data, params).map(|(r, _)| r)
}

/// Responsibilities together with the log-likelihood of `params`.
pub fn e_step_with_loglik<T: Scalar>(data: &Dataset<T>, params: &GmmParams<T>) -> Result<(Responsibilities<T>, T)> {
    check_dims(data, params)?;
    let k = params.k();
    let comps = params.components()?;
    let mut r = Matrix::zeros(data.n(), k);
    let mut buf = Vec::with_capacity(k);
    let mut loglik = T::zero();
    for (i, y) in data.iter().enumerate() {
        weighted_log_densities(y, &params.weights, &comps, &mut buf);
        let lse = log_sum_exp(&buf);
        loglik += lse;
        let row = r.row_mut(i);
        for (dst, &lw) in row.iter_mut().zip(&buf) {
            *dst = (lw - lse).exp();
        }
    }
    Ok((Responsibilities::from_matrix_unchecked(r), loglik))
}

/// Maximum-likelihood update from responsibilities.
///
/// Each covariance uses the freshly updated mean and is passed through
/// [`repair_covariance`]. A component whose total responsibility is at most
/// [`EMPTY_MASS`] is reseeded at a uniformly drawn data point with identity
/// covariance and weight `1/N`; weights are renormalised afterwards.
pub fn m_step<T: Scalar>(
    data: &Dataset<T>,
    resp: &Responsibilities<T>,
    cov_floor: T,
    rng: &mut LabRng,
) -> Result<MStep<T>> {
    if resp.n() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), found: resp.n() });
    }
    let (n, d, k) = (data.n(), data.dim(), resp.k());
    let n_t = T::of_usize(n);
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    let mut reseeds = 0;
    for c in 0..k {
        let mass: T = (0..n).map(|i| resp.row(i)[c]).sum();
        if !(mass > T::of(EMPTY_MASS)) {
            reseeds += 1;
            let pick = rng.random_range(0..n);
            log::debug!("component {c} is empty; reseeding at point {pick}");
            weights.push(T::one() / n_t);
            means.push(data.point(pick).to_vec());
            covariances.push(Matrix::identity(d));
            continue;
        }
        let mut mean = vec![T::zero(); d];
        for (i, y) in data.iter().enumerate() {
            let r = resp.row(i)[c];
            for (m, &v) in mean.iter_mut().zip(y) {
                *m += r * v;
            }
        }
        for m in &mut mean {
            *m /= mass;
        }
        let mut cov = Matrix::zeros(d, d);
        for (i, y) in data.iter().enumerate() {
            let r = resp.row(i)[c];
            for a in 0..d {
                let da = y[a] - mean[a];
                for b in 0..d {
                    cov[(a, b)] += r * da * (y[b] - mean[b]);
                }
            }
        }
        weights.push(mass / n_t);
        means.push(mean);
        covariances.push(repair_covariance(&cov.scaled(T::one() / mass), cov_floor));
    }
    if reseeds > 0 {
        weights = normalize_weights(&weights)?;
    }
    Ok(MStep { params: GmmParams::new(weights, means, covariances)?, reseeds })
}

/// Uniformly random labels with every one of the `k` clusters non-empty:
/// a random permutation seeds one point per cluster, the rest are i.i.d.
pub fn random_assignment(n: usize, k: usize, rng: &mut LabRng) -> Result<HardAssignment> {
    if k == 0 || n < k {
        return Err(Error::config(format!("need at least k={k} points, have {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    Ok(HardAssignment::from_labels(labels))
}

/// Parameters estimated from a random hard assignment.
pub fn random_init<T: Scalar>(data: &Dataset<T>, k: usize, cov_floor: T, rng: &mut LabRng) -> Result<GmmParams<T>> {
    let assign = random_assignment(data.n(), k, rng)?;
    Ok(m_step(data, &Responsibilities::one_hot(&assign, k), cov_floor, rng)?.params)
}

/// Same as [`random_init`] seeded directly.
pub fn random_init_seeded<T: Scalar>(data: &Dataset<T>, k: usize, seed: u64) -> Result<GmmParams<T>> {
    random_init(data, k, T::of(DEFAULT_JITTER), &mut rng_from_seed(seed))
}

fn check_init<T: Scalar>(data: &Dataset<T>, init: &GmmParams<T>, k: usize) -> Result<()> {
    check_dims(data, init)?;
    if init.k() != k {
        return Err(Error::config(format!("init has {} components, config expects {k}", init.k())));
    }
    Ok(())
}

/// Classic soft EM.
pub fn run_em<T: Scalar>(data: &Dataset<T>, init: &GmmParams<T>, config: &EmConfig) -> Result<FitResult<T>> {
    config.validate()?;
    check_init(data, init, config.k)?;
    let mut rng = rng_from_seed(config.seed);
    let cov_floor = T::of(config.cov_floor);
    let tol = T::of(config.tol);
    let mut params = init.clone();
    let mut trace: Vec<T> = Vec::new();
    let mut reseeds = 0;
    let mut converged = false;
    for _ in 0..config.max_iters {
        let (resp, ll) = e_step_with_loglik(data, &params)?;
        if !ll.is_finite() {
            return Err(Error::NonFinite);
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if prev.is_some_and(|p| (ll - p).abs() < tol) {
            converged = true;
            break;
        }
        let step = m_step(data, &resp, cov_floor, &mut rng)?;
        reseeds += step.reseeds;
        params = step.params;
    }
    let assignment = Some(e_step(data, &params)?.argmax());
    Ok(FitResult {
        params,
        iterations: trace.len(),
        loglik_trace: trace,
        converged,
        reseeds,
        discards: Vec::new(),
        assignment,
    })
}

/// Hard-assignment ("classification") EM: each point goes wholly to its
/// nearest component under the GMM distance.
pub fn run_classification_em<T: Scalar>(
    data: &Dataset<T>,
    init: &GmmParams<T>,
    config: &EmConfig,
) -> Result<FitResult<T>> {
    run_classification_em_observed(data, init, config, |_, _| {})
}

/// [`run_classification_em`] reporting each iteration's labels to `observer`.
pub fn run_classification_em_observed<T: Scalar>(
    data: &Dataset<T>,
    init: &GmmParams<T>,
    config: &EmConfig,
    mut observer: impl FnMut(usize, &HardAssignment),
) -> Result<FitResult<T>> {
    config.validate()?;
    check_init(data, init, config.k)?;
    let mut rng = rng_from_seed(config.seed);
    let cov_floor = T::of(config.cov_floor);
    let tol = T::of(config.tol);
    let mut params = init.clone();
    let mut trace: Vec<T> = Vec::new();
    let mut reseeds = 0;
    let mut converged = false;
    let mut last = None;
    for t in 0..config.max_iters {
        let ll = crate::model::gmm_log_likelihood(data, &params)?;
        let prev = trace.last().copied();
        trace.push(ll);
        if prev.is_some_and(|p| (ll - p).abs() < tol) {
            converged = true;
            break;
        }
        let oracle = DistanceOracle::new(&params, Metric::Gmm)?;
        let assign = HardAssignment::from_labels(data.iter().map(|y| oracle.row(y).argmin()).collect());
        observer(t, &assign);
        let step = hard_m_step(data, &assign, config.k, cov_floor, &mut rng)?;
        reseeds += step.reseeds;
        params = step.params;
        last = Some(assign);
    }
    Ok(FitResult {
        params,
        iterations: trace.len(),
        loglik_trace: trace,
        converged,
        reseeds,
        discards: Vec::new(),
        assignment: last,
    })
}

/// Hard-assignment ML estimates `π^k = N^k/N`, cluster means and
/// covariances. Discarded points contribute nothing; weights are renormalised
/// over the labelled points.
pub fn hard_m_step<T: Scalar>(
    data: &Dataset<T>,
    assign: &HardAssignment,
    k: usize,
    cov_floor: T,
    rng: &mut LabRng,
) -> Result<MStep<T>> {
    let mut step = m_step(data, &Responsibilities::one_hot(assign, k), cov_floor, rng)?;
    if assign.n_discarded() > 0 {
        step.params.weights = normalize_weights(&step.params.weights)?;
    }
    Ok(step)
}
