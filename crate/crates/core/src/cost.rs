//! Per-iteration runtime of quantum EM evaluated on concrete data.
//!
//! Every figure here is a dimensionless count with constants and
//! polylogarithmic factors dropped; only the shape of the expression is
//! meaningful. Note that `N` enters only through `κ`, `μ` and `η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, singular_values, Matrix};
use crate::model::Dataset;
use crate::scalar::Scalar;

/// Safety factor that turns the strict budget inequalities into values.
pub const BUDGET_MARGIN: f64 = 0.1;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Uniform grid points used to minimise over `p` in [`mu_coherence`].
const MU_GRID: usize = 201;

/// The two data matrices: points as rows, and the vectorised outer products `vec(y yᵀ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrices<T> {
    pub v1: Matrix<T>,
    pub v2: Matrix<T>,
}

impl<T: Scalar> DataMatrices<T> {
    pub fn from_dataset(data: &Dataset<T>) -> Self {
        let d = data.dim();
        let mut v2 = Matrix::zeros(data.n(), d * d);
        for (i, y) in data.iter().enumerate() {
            let row = v2.row_mut(i);
            for a in 0..d {
                for b in 0..d {
                    row[a * d + b] = y[a] * y[b];
                }
            }
        }
        Self { v1: data.points().clone(), v2 }
    }
}

/// `max_i Σ_j |M_ij|^p`; zero entries contribute nothing for every `p`.
pub fn s_p<T: Scalar>(m: &Matrix<T>, p: f64) -> T {
    let p = T::of(p);
    m.row_iter()
        .map(|row| row.iter().filter(|v| **v != T::zero()).map(|v| v.abs().powf(p)).sum::<T>())
        .fold(T::zero(), T::max)
}

fn mu_objective<T: Scalar>(m: &Matrix<T>, mt: &Matrix<T>, p: f64) -> T {
    (s_p(m, 2.0 * p) * s_p(mt, 1.0 - 2.0 * p)).sqrt()
}

/// `min(‖M‖_F, min_{p∈[0,1]} √(s_{2p}(M)·s_{1−2p}(Mᵀ)))`, minimised on a
/// uniform grid and then refined by golden-section search around the best
/// grid point.
pub fn mu_coherence<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    if m.as_slice().iter().all(|v| *v == T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let mt = m.transpose();
    let h = 1.0 / (MU_GRID - 1) as f64;
    let (mut best_p, mut best) = (0.0, T::infinity());
    for i in 0..MU_GRID {
        let p = i as f64 * h;
        let v = mu_objective(m, &mt, p);
        if v < best {
            best = v;
            best_p = p;
        }
    }
    let (mut lo, mut hi) = ((best_p - h).max(0.0), (best_p + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if mu_objective(m, &mt, a) < mu_objective(m, &mt, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let refined = mu_objective(m, &mt, 0.5 * (lo + hi));
    Ok(m.frobenius_norm().min(best).min(refined))
}

/// `σ_max/σ_min` over singular values above `RANK_TOL·σ_max`.
pub fn condition_number<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(T::zero());
    if !(max > T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let cut = max * T::of(RANK_TOL);
    let min = sv.iter().copied().filter(|&s| s > cut).fold(max, T::min);
    Ok(max / min)
}

/// `(η^μ, η^Σ) = (max_i ‖y_i‖², max_i ‖y_i ⊗ y_i‖²)`; since
/// `‖y ⊗ y‖ = ‖y‖²`, the second is the square of the first.
pub fn eta_values<T: Scalar>(data: &Dataset<T>) -> Result<(T, T)> {
    if data.n() == 0 {
        return Err(Error::EmptyInput);
    }
    let eta_mu = data.iter().map(|y| norm(y).powi(2)).fold(T::zero(), T::max);
    Ok((eta_mu, eta_mu * eta_mu))
}

/// Precision targets consistent with a label margin `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    pub eps1: f64,
    pub eps3_mu: f64,
    pub eps4_mu: f64,
    pub eps3_sigma: f64,
    pub eps4_sigma: f64,
    pub eps4_pi: f64,
}

impl EpsilonBudget {
    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eps1: self.eps1 * factor,
            eps3_mu: self.eps3_mu * factor,
            eps4_mu: self.eps4_mu * factor,
            eps3_sigma: self.eps3_sigma * factor,
            eps4_sigma: self.eps4_sigma * factor,
            eps4_pi: self.eps4_pi * factor,
        }
    }

    fn all(&self) -> [f64; 6] {
        [self.eps1, self.eps3_mu, self.eps4_mu, self.eps3_sigma, self.eps4_sigma, self.eps4_pi]
    }
}

/// `ε₁ = δ/2`, `ε₃^μ = ε₄^μ = δ/(4√η^μ)`, `ε₃^Σ = ε₄^Σ = δ/(4√η^Σ)`, each
/// shrunk by [`BUDGET_MARGIN`]; `ε₄^π = ε₁`.
pub fn epsilon_budget(delta: f64, eta_mu: f64, eta_sigma: f64) -> Result<EpsilonBudget> {
    if !(delta > 0.0) {
        return Err(Error::config(format!("delta must be positive, got {delta}")));
    }
    if !(eta_mu > 0.0 && eta_sigma > 0.0) {
        return Err(Error::config("eta values must be positive"));
    }
    let keep = 1.0 - BUDGET_MARGIN;
    let eps1 = delta / 2.0 * keep;
    let mu = delta / (4.0 * eta_mu.sqrt()) * keep;
    let sigma = delta / (4.0 * eta_sigma.sqrt()) * keep;
    Ok(EpsilonBudget { eps1, eps3_mu: mu, eps4_mu: mu, eps3_sigma: sigma, eps4_sigma: sigma, eps4_pi: eps1 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub kappa_v1: f64,
    pub kappa_v2: f64,
    pub mu_v1: f64,
    pub mu_v2: f64,
    pub eta_mu: f64,
    pub eta_sigma: f64,
    /// Weight term entering the total; equals `term_pi_itemized`.
    pub term_pi: f64,
    /// `K²/(ε₁(ε₄^π)²)` as it appears in the headline expression.
    pub term_pi_main: f64,
    /// `K³/(ε₁(ε₄^π)²)` as it appears in the itemised derivation.
    pub term_pi_itemized: f64,
    pub term_mu_tomo: f64,
    pub term_mu_norm: f64,
    pub term_sigma_tomo: f64,
    pub term_sigma_norm: f64,
    pub total: f64,
}

/// Evaluates the five terms of the per-iteration runtime.
pub fn qem_runtime_estimate<T: Scalar>(m: &DataMatrices<T>, k: usize, budget: &EpsilonBudget) -> Result<CostReport> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if budget.all().iter().any(|&e| !(e > 0.0)) {
        return Err(Error::config("every budget entry must be positive"));
    }
    let kappa_v1 = condition_number(&m.v1)?.f64();
    let kappa_v2 = condition_number(&m.v2)?.f64();
    let mu_v1 = mu_coherence(&m.v1)?.f64();
    let mu_v2 = mu_coherence(&m.v2)?.f64();
    let eta_mu = m.v1.row_iter().map(|y| norm(y).f64().powi(2)).fold(0.0, f64::max);
    let eta_sigma = eta_mu * eta_mu;
    let kf = k as f64;
    let d = m.v1.cols() as f64;
    let b = budget;
    let term_pi_main = kf * kf / (b.eps1 * b.eps4_pi * b.eps4_pi);
    let term_pi_itemized = kf * term_pi_main;
    let term_mu_tomo = kf * d * kappa_v1 / (b.eps4_mu * b.eps4_mu) * (mu_v1 + kf * eta_mu / b.eps1);
    let term_mu_norm = kf * kf / b.eps1 * eta_mu * kappa_v1 * mu_v1 / b.eps3_mu;
    let term_sigma_tomo = kf * d * d * kappa_v2 / (b.eps4_sigma * b.eps4_sigma) * (mu_v2 + kf * eta_sigma / b.eps1);
    let term_sigma_norm = kf * kf / b.eps1 * eta_sigma * kappa_v2 * mu_v2 / b.eps3_sigma;
    let term_pi = term_pi_itemized;
    let total = term_pi + term_mu_tomo + term_mu_norm + term_sigma_tomo + term_sigma_norm;
    Ok(CostReport {
        kappa_v1,
        kappa_v2,
        mu_v1,
        mu_v2,
        eta_mu,
        eta_sigma,
        term_pi,
        term_pi_main,
        term_pi_itemized,
        term_mu_tomo,
        term_mu_norm,
        term_sigma_tomo,
        term_sigma_norm,
        total,
    })
}
