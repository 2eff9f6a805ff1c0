//! δ-EM: a randomised EM in which each point's label is drawn uniformly from
//! its δ-neighbour set under the square GMM distance, and the hard-assignment
//! estimates are perturbed by Gaussian noise before the next round.
//!
//! With `delta = 0` and every noise variance zero no random numbers are drawn
//! beyond those of the reseeding rule, so the run reproduces
//! [`run_classification_em`](crate::em::run_classification_em) step for step.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distance::{delta_neighbor_set, DistanceOracle, Metric};
use crate::em::{hard_m_step, FitResult, MovingAverageStop};
use crate::error::{Error, Result};
use crate::model::{
    check_dims, gmm_log_likelihood, normalize_weights, repair_covariance, Dataset, GmmParams, HardAssignment,
    DEFAULT_JITTER,
};
use crate::rng::{rng_from_seed, LabRng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaEmConfig {
    #[serde(alias = "K")]
    pub k: usize,
    pub delta: f64,
    pub noise_pi_var: f64,
    pub noise_mu_var: f64,
    pub noise_sigma_var: f64,
    pub max_iters: usize,
    /// Threshold on the change of the 5-step moving average of the log-likelihood.
    pub tol: f64,
    pub cov_floor: f64,
    pub seed: u64,
}

impl Default for DeltaEmConfig {
    fn default() -> Self {
        Self {
            k: 2,
            delta: 0.2,
            noise_pi_var: 0.01,
            noise_mu_var: 0.01,
            noise_sigma_var: 0.001,
            max_iters: 100,
            tol: 1e-6,
            cov_floor: DEFAULT_JITTER,
            seed: 0,
        }
    }
}

impl DeltaEmConfig {
    /// The noiseless δ=0 configuration, equivalent to classification EM.
    pub fn noiseless(k: usize) -> Self {
        Self { k, delta: 0.0, noise_pi_var: 0.0, noise_mu_var: 0.0, noise_sigma_var: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::NegativeDelta(self.delta));
        }
        for (name, v) in [
            ("noise_pi_var", self.noise_pi_var),
            ("noise_mu_var", self.noise_mu_var),
            ("noise_sigma_var", self.noise_sigma_var),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be a finite non-negative number")));
            }
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

/// Uniform pick from `set`; a singleton consumes no randomness.
pub(crate) fn pick_uniform(set: &[usize], rng: &mut LabRng) -> usize {
    if set.len() == 1 {
        set[0]
    } else {
        set[rng.random_range(0..set.len())]
    }
}

/// Labels drawn uniformly from each point's δ-neighbour set. Never discards.
pub fn delta_e_step<T: Scalar>(
    data: &Dataset<T>,
    params: &GmmParams<T>,
    delta: T,
    rng: &mut LabRng,
) -> Result<HardAssignment> {
    check_dims(data, params)?;
    let oracle = DistanceOracle::new(params, Metric::Gmm)?;
    let mut labels = Vec::with_capacity(data.n());
    for y in data.iter() {
        let set = delta_neighbor_set(&oracle.row(y), delta)?;
        labels.push(pick_uniform(&set, rng));
    }
    Ok(HardAssignment::from_labels(labels))
}

/// Adds `N(0, var)` to every entry; zero variance leaves the values and the RNG untouched.
pub(crate) fn add_noise<T: Scalar>(values: &mut [T], var: f64, rng: &mut LabRng) {
    if var == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, var.sqrt()).expect("finite std");
    for v in values {
        *v += T::of(normal.sample(rng));
    }
}

/// Hard-assignment estimates followed by element-wise Gaussian noise, weight
/// normalisation and covariance symmetrisation/repair.
pub fn noisy_m_step<T: Scalar>(
    data: &Dataset<T>,
    assign: &HardAssignment,
    config: &DeltaEmConfig,
    rng: &mut LabRng,
) -> Result<GmmParams<T>> {
    Ok(noisy_m_step_counted(data, assign, config, rng)?.0)
}

fn noisy_m_step_counted<T: Scalar>(
    data: &Dataset<T>,
    assign: &HardAssignment,
    config: &DeltaEmConfig,
    rng: &mut LabRng,
) -> Result<(GmmParams<T>, usize)> {
    let cov_floor = T::of(config.cov_floor);
    let step = hard_m_step(data, assign, config.k, cov_floor, rng)?;
    let mut p = step.params;
    add_noise(&mut p.weights, config.noise_pi_var, rng);
    for m in &mut p.means {
        add_noise(m, config.noise_mu_var, rng);
    }
    let noisy_sigma = config.noise_sigma_var != 0.0;
    for s in &mut p.covariances {
        add_noise(s.as_mut_slice(), config.noise_sigma_var, rng);
    }
    // Noise can push a weight to or below zero, which the GMM distance cannot
    // take; floor at one point's worth of mass as in the quantum read-out.
    let weights = if config.noise_pi_var != 0.0 {
        let floor = T::one() / T::of_usize(data.n());
        normalize_weights(&p.weights.iter().map(|w| w.max(floor)).collect::<Vec<_>>())?
    } else {
        p.weights
    };
    let covariances = if noisy_sigma {
        // A shift to just above zero leaves an eigenvalue far below the noise
        // scale and the component collapses onto a line; shift to the noise
        // standard deviation instead.
        let jitter = cov_floor.max(T::of(config.noise_sigma_var.sqrt()));
        p.covariances.iter().map(|s| repair_covariance(&s.symmetrized(), jitter)).collect()
    } else {
        p.covariances
    };
    Ok((GmmParams::new(weights, p.means, covariances)?, step.reseeds))
}

pub fn run_delta_em<T: Scalar>(data: &Dataset<T>, init: &GmmParams<T>, config: &DeltaEmConfig) -> Result<FitResult<T>> {
    run_delta_em_observed(data, init, config, |_, _| {})
}

/// [`run_delta_em`] reporting each iteration's sampled labels to `observer`.
pub fn run_delta_em_observed<T: Scalar>(
    data: &Dataset<T>,
    init: &GmmParams<T>,
    config: &DeltaEmConfig,
    mut observer: impl FnMut(usize, &HardAssignment),
) -> Result<FitResult<T>> {
    config.validate()?;
    check_dims(data, init)?;
    if init.k() != config.k {
        return Err(Error::config(format!("init has {} components, config expects {}", init.k(), config.k)));
    }
    let mut rng = rng_from_seed(config.seed);
    let delta = T::of(config.delta);
    let mut stop = MovingAverageStop::new(config.tol);
    let mut params = init.clone();
    let mut trace = Vec::new();
    let mut reseeds = 0;
    let mut converged = false;
    let mut last = None;
    for t in 0..config.max_iters {
        let ll = gmm_log_likelihood(data, &params)?;
        if !ll.is_finite() {
            return Err(Error::NonFinite);
        }
        trace.push(ll);
        if stop.push(ll.f64()) {
            converged = true;
            break;
        }
        let assign = delta_e_step(data, &params, delta, &mut rng)?;
        observer(t, &assign);
        let (next, r) = noisy_m_step_counted(data, &assign, config, &mut rng)?;
        reseeds += r;
        params = next;
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
