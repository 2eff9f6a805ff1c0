//! Noisy GMM distances and the emulated quantum EM loop.
//!
//! Each distance is rebuilt from an estimated inner product. With
//! `G = Σ^{−1/2}`, `a = ‖Gy‖`, `b = ‖Gμ‖` and `p = (1 − cos∠(Gy, Gμ))/2`,
//! the quadratic form is `a² + b² − 2ab + 4ab·p`. Amplitude estimation and
//! mode evaluation replace `p` by `p̃`, so the distance moves by
//! `4ab(p̃ − p)`; the offset `ln|Σ| − 2 ln(Kπ)` is added exactly.

use serde::{Deserialize, Serialize};

use crate::cost::EpsilonBudget;
use crate::distance::{deterministic_label, DistanceOracle, DistanceRow, Metric};
use crate::em::{hard_m_step, FitResult, MovingAverageStop};
use crate::error::{Error, Result};
use crate::linalg::{dot, inv_sqrt_spd, norm, Matrix};
use crate::model::{
    check_dims, gmm_log_likelihood, normalize_weights, repair_covariance, Dataset, GmmParams, HardAssignment,
    DEFAULT_JITTER,
};
use crate::quantum::ae::{mode_of, AeChannel, AeSampler, ModeEvalSpec};
use crate::quantum::tomography::{estimate_weights, hoeffding_samples, tomography_apply, TomographyChannel};
use crate::rng::{rng_from_seed, LabRng};
use crate::scalar::Scalar;

/// Largest amplitude-estimation grid the oracle will use.
pub const MAX_GRID: u64 = 1 << 40;

/// Clusters smaller than this fraction of `N/K` are logged.
const SMALL_CLUSTER_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QemConfig {
    pub k: usize,
    pub delta: f64,
    /// Distance precision `ε₁`; zero turns the distance channel off.
    pub eps1: f64,
    /// Linear-algebra precision. Carried for completeness; it only enters logarithms.
    pub eps2: f64,
    pub mu_channel: TomographyChannel,
    pub sigma_channel: TomographyChannel,
    /// Weight precision `ε₄^π`.
    pub eps4_pi: f64,
    /// Joint failure probability `Δ^π` of the weight estimate.
    pub delta_pi: f64,
    /// Label samples per weight estimate; `None` uses exact cluster fractions.
    pub n_pi_samples: Option<usize>,
    pub mode: ModeEvalSpec,
    pub max_iters: usize,
    pub tol: f64,
    pub cov_floor: f64,
    pub seed: u64,
}

impl Default for QemConfig {
    fn default() -> Self {
        Self {
            k: 2,
            delta: 0.2,
            eps1: 0.0,
            eps2: 1e-8,
            mu_channel: TomographyChannel::EXACT,
            sigma_channel: TomographyChannel::EXACT,
            eps4_pi: 0.0,
            delta_pi: 0.05,
            n_pi_samples: None,
            mode: ModeEvalSpec::default(),
            max_iters: 100,
            tol: 1e-6,
            cov_floor: DEFAULT_JITTER,
            seed: 0,
        }
    }
}

impl QemConfig {
    /// Every channel switched off and `δ = 0`.
    pub fn noiseless(k: usize) -> Self {
        Self { k, delta: 0.0, ..Self::default() }
    }

    /// Channels set from an error budget; the weight sample count follows from
    /// `ε₄^π` and `Δ^π`.
    pub fn from_budget(k: usize, delta: f64, budget: &EpsilonBudget) -> Result<Self> {
        let base = Self::default();
        let n_pi = hoeffding_samples(k, budget.eps4_pi, base.delta_pi)?;
        Ok(Self {
            k,
            delta,
            eps1: budget.eps1,
            mu_channel: TomographyChannel::new(budget.eps4_mu, budget.eps3_mu)?,
            sigma_channel: TomographyChannel::new(budget.eps4_sigma, budget.eps3_sigma)?,
            eps4_pi: budget.eps4_pi,
            n_pi_samples: Some(n_pi),
            ..base
        })
    }

    /// Checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::NegativeDelta(self.delta));
        }
        if !(self.eps1 >= 0.0) {
            return Err(Error::config("eps1 must be non-negative"));
        }
        if self.eps1 > 0.0 && self.eps1 >= self.delta / 2.0 {
            return Err(Error::config(format!("eps1 = {} must be below delta/2 = {}", self.eps1, self.delta / 2.0)));
        }
        self.mu_channel.validate()?;
        self.sigma_channel.validate()?;
        self.mode.validate()?;
        if self.n_pi_samples == Some(0) {
            return Err(Error::config("n_pi_samples must be at least 1"));
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

    /// Tomography bounds `ε < δ/(4√η)` for the data's `η^μ`, `η^Σ`; zero is always accepted.
    pub fn validate_for(&self, eta_mu: f64, eta_sigma: f64) -> Result<()> {
        self.validate()?;
        for (name, eps, eta) in [
            ("mu eps_dir", self.mu_channel.eps_dir, eta_mu),
            ("mu eps_norm", self.mu_channel.eps_norm, eta_mu),
            ("sigma eps_dir", self.sigma_channel.eps_dir, eta_sigma),
            ("sigma eps_norm", self.sigma_channel.eps_norm, eta_sigma),
        ] {
            let bound = self.delta / (4.0 * eta.sqrt());
            if eps > 0.0 && eps >= bound {
                return Err(Error::config(format!("{name} = {eps} must be below {bound}")));
            }
        }
        Ok(())
    }
}

/// `(1 − ŷᵀG²μ̂)/2` clamped to `[0, 1]`, for unit `ŷ`, `μ̂` and symmetric `G`.
pub fn inner_product_probability<T: Scalar>(y_hat: &[T], mu_hat: &[T], g: &Matrix<T>) -> Result<T> {
    for v in [y_hat, mu_hat] {
        let n = norm(v).f64();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitVector(n));
        }
    }
    let gy = g.mul_vec(y_hat)?;
    let gm = g.mul_vec(mu_hat)?;
    let p = (T::one() - dot(&gy, &gm)) / T::of(2.0);
    Ok(p.max(T::zero()).min(T::one()))
}

/// Smallest power-of-two grid with `4ab(π/P + π²/P²) ≤ ε₁`, the worst case of
/// the amplitude-estimation bound over `p`, capped at [`MAX_GRID`].
pub fn grid_for(a: f64, b: f64, eps1: f64) -> u64 {
    let pi = std::f64::consts::PI;
    let mut big_p: u64 = 2;
    while big_p < MAX_GRID {
        let pf = big_p as f64;
        if 4.0 * a * b * (pi / pf + pi * pi / (pf * pf)) <= eps1 {
            break;
        }
        big_p *= 2;
    }
    big_p
}

/// A distance row from the noisy oracle with, per entry, whether it landed within `ε₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyRow<T> {
    pub row: DistanceRow<T>,
    pub within_eps1: Vec<bool>,
}

/// Per-iteration state of the noisy oracle: whitened means and exact offsets.
pub struct NoisyOracle<T> {
    exact: DistanceOracle<T>,
    whiteners: Vec<Matrix<T>>,
    whitened_means: Vec<Vec<T>>,
    eps1: f64,
    mode: ModeEvalSpec,
}

impl<T: Scalar> NoisyOracle<T> {
    pub fn new(params: &GmmParams<T>, eps1: f64, mode: ModeEvalSpec) -> Result<Self> {
        let exact = DistanceOracle::new(params, Metric::Gmm)?;
        let whiteners = params.covariances.iter().map(inv_sqrt_spd).collect::<Result<Vec<_>>>()?;
        let whitened_means =
            whiteners.iter().zip(&params.means).map(|(g, m)| g.mul_vec(m)).collect::<Result<Vec<_>>>()?;
        Ok(Self { exact, whiteners, whitened_means, eps1, mode })
    }

    pub fn row(&self, y: &[T], rng: &mut LabRng) -> Result<NoisyRow<T>> {
        let exact = self.exact.row(y);
        let k = exact.len();
        if self.eps1 == 0.0 {
            return Ok(NoisyRow { row: exact, within_eps1: vec![true; k] });
        }
        let mut values = exact.values.clone();
        let mut within = vec![true; k];
        let ident = Matrix::identity(y.len());
        for c in 0..k {
            let gy = self.whiteners[c].mul_vec(y)?;
            let gm = &self.whitened_means[c];
            let (a, b) = (norm(&gy), norm(gm));
            if a == T::zero() || b == T::zero() {
                continue;
            }
            let u: Vec<T> = gy.iter().map(|&v| v / a).collect();
            let v: Vec<T> = gm.iter().map(|&v| v / b).collect();
            let p = inner_product_probability(&u, &v, &ident)?.f64();
            let (af, bf) = (a.f64(), b.f64());
            let sampler = AeSampler::new(p, AeChannel::new(grid_for(af, bf, self.eps1))?)?;
            let draws: Vec<f64> = (0..self.mode.copies).map(|_| sampler.sample(rng)).collect();
            let shift = 4.0 * af * bf * (mode_of(&draws) - p);
            values[c] += T::of(shift);
            within[c] = shift.abs() <= self.eps1;
        }
        Ok(NoisyRow { row: DistanceRow::new(values, Metric::Gmm), within_eps1: within })
    }
}

/// One noisy distance row; builds the per-parameter state on every call.
pub fn noisy_distance_row<T: Scalar>(
    y: &[T],
    params: &GmmParams<T>,
    config: &QemConfig,
    rng: &mut LabRng,
) -> Result<NoisyRow<T>> {
    config.validate()?;
    if y.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: y.len() });
    }
    NoisyOracle::new(params, config.eps1, config.mode)?.row(y, rng)
}

/// What the emulation loop exposes to an observer after labelling.
pub struct QemIteration<'a, T> {
    pub iteration: usize,
    /// Parameters the distances were computed from.
    pub params: &'a GmmParams<T>,
    pub assignment: &'a HardAssignment,
    /// Per point: every distance entry was within `ε₁` of the exact value.
    pub within_eps1: &'a [bool],
}

pub fn run_qem_emulation<T: Scalar>(
    data: &Dataset<T>,
    init: &GmmParams<T>,
    config: &QemConfig,
) -> Result<FitResult<T>> {
    run_qem_emulation_observed(data, init, config, |_| {})
}

/// Algorithm loop: noisy distances, 2δ labelling with discards, hard
/// estimates from labelled points, then tomography on every mean and
/// vectorised covariance and sampled weights.
pub fn run_qem_emulation_observed<T: Scalar>(
    data: &Dataset<T>,
    init: &GmmParams<T>,
    config: &QemConfig,
    mut observer: impl FnMut(&QemIteration<'_, T>),
) -> Result<FitResult<T>> {
    let (eta_mu, eta_sigma) = crate::cost::eta_values(data)?;
    config.validate_for(eta_mu.f64(), eta_sigma.f64())?;
    check_dims(data, init)?;
    if init.k() != config.k {
        return Err(Error::config(format!("init has {} components, config expects {}", init.k(), config.k)));
    }
    let mut rng = rng_from_seed(config.seed);
    let delta = T::of(config.delta);
    let cov_floor = T::of(config.cov_floor);
    let mut stop = MovingAverageStop::new(config.tol);
    let mut params = init.clone();
    let mut trace = Vec::new();
    let mut discards = Vec::new();
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
        let oracle = NoisyOracle::new(&params, config.eps1, config.mode)?;
        let mut labels = Vec::with_capacity(data.n());
        let mut within = Vec::with_capacity(data.n());
        for y in data.iter() {
            let r = oracle.row(y, &mut rng)?;
            labels.push(deterministic_label(&r.row, delta));
            within.push(r.within_eps1.iter().all(|&w| w));
        }
        let assign = HardAssignment::new(labels);
        discards.push(assign.n_discarded());
        observer(&QemIteration { iteration: t, params: &params, assignment: &assign, within_eps1: &within });
        log_small_clusters(&assign, data.n(), config.k);

        let step = hard_m_step(data, &assign, config.k, cov_floor, &mut rng)?;
        reseeds += step.reseeds;
        params = read_out(step.params, config, data.n(), cov_floor, &mut rng)?;
        last = Some(assign);
    }
    Ok(FitResult {
        params,
        iterations: trace.len(),
        loglik_trace: trace,
        converged,
        reseeds,
        discards,
        assignment: last,
    })
}

fn log_small_clusters(assign: &HardAssignment, n: usize, k: usize) {
    let floor = SMALL_CLUSTER_FRACTION * n as f64 / k as f64;
    for (c, &size) in assign.counts(k).iter().enumerate() {
        if (size as f64) < floor {
            log::debug!("cluster {c} has {size} points, below {floor:.0}");
        }
    }
}

/// Passes freshly estimated parameters through the tomography and weight channels.
fn read_out<T: Scalar>(
    params: GmmParams<T>,
    config: &QemConfig,
    n: usize,
    cov_floor: T,
    rng: &mut LabRng,
) -> Result<GmmParams<T>> {
    let mut means = params.means;
    if !config.mu_channel.is_exact() {
        for m in &mut means {
            if norm(m) > T::zero() {
                *m = tomography_apply(m, &config.mu_channel, rng)?;
            }
        }
    }
    let mut covariances = params.covariances;
    if !config.sigma_channel.is_exact() {
        for s in &mut covariances {
            let noisy = tomography_apply(s.as_slice(), &config.sigma_channel, rng)?;
            let m = Matrix::from_vec(s.rows(), s.cols(), noisy)?;
            *s = repair_covariance(&m.symmetrized(), cov_floor);
        }
    }
    let weights = match config.n_pi_samples {
        None => params.weights,
        Some(samples) => {
            let probs: Vec<f64> = params.weights.iter().map(|w| w.f64()).collect();
            let floor = T::one() / T::of_usize(n);
            let est: Vec<T> = estimate_weights(&probs, samples, rng)?;
            normalize_weights(&est.into_iter().map(|w| w.max(floor)).collect::<Vec<_>>())?
        }
    };
    GmmParams::new(weights, means, covariances)
}
