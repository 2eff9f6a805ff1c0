//! Data and mixture-parameter types, Gaussian densities and the repair rules
//! applied to noisy parameter estimates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sub, Cholesky, Matrix, SymEigen};
use crate::scalar::Scalar;

/// Default diagonal jitter added when repairing a covariance.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// `N` points in `d` dimensions with optional ground-truth labels.
///
/// Labels are stored zero-based (`0..K`); file formats use `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: Matrix<T>,
    true_labels: Option<Vec<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(points: Matrix<T>, true_labels: Option<Vec<usize>>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::Dataset("no points".into()));
        }
        if points.cols() == 0 {
            return Err(Error::Dataset("zero dimension".into()));
        }
        if !points.is_finite() {
            return Err(Error::Dataset("non-finite coordinate".into()));
        }
        if let Some(labels) = &true_labels {
            if labels.len() != points.rows() {
                return Err(Error::LengthMismatch { expected: points.rows(), found: labels.len() });
            }
        }
        Ok(Self { points, true_labels })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, None)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.points.row_iter()
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    /// Number of distinct ground-truth classes (`max label + 1`).
    pub fn true_k(&self) -> Option<usize> {
        self.true_labels.as_ref().and_then(|l| l.iter().max().map(|&m| m + 1))
    }
}

/// Mixture parameters `{π^k, μ^k, Σ^k}` for `K` components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmParams<T> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<Matrix<T>>,
}

impl<T: Scalar> GmmParams<T> {
    /// Checks that the three blocks agree on `K` and `d`; numerical validity is
    /// [`validate_params`]'s job.
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covariances: Vec<Matrix<T>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::config("mixture needs at least one component"));
        }
        if means.len() != k {
            return Err(Error::LengthMismatch { expected: k, found: means.len() });
        }
        if covariances.len() != k {
            return Err(Error::LengthMismatch { expected: k, found: covariances.len() });
        }
        let d = means[0].len();
        for m in &means {
            if m.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.len() });
            }
        }
        for c in &covariances {
            if c.rows() != d || c.cols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.rows().max(c.cols()) });
            }
        }
        Ok(Self { weights, means, covariances })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Reorders components; `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            means: perm.iter().map(|&i| self.means[i].clone()).collect(),
            covariances: perm.iter().map(|&i| self.covariances[i].clone()).collect(),
        }
    }

    /// Factorises every covariance once.
    pub fn components(&self) -> Result<Vec<GaussianComponent<T>>> {
        self.means.iter().zip(&self.covariances).map(|(m, s)| GaussianComponent::new(m, s)).collect()
    }
}

/// `N×K` row-stochastic matrix of posterior component memberships.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities<T> {
    r: Matrix<T>,
}

impl<T: Scalar> Responsibilities<T> {
    pub fn new(r: Matrix<T>) -> Result<Self> {
        let tol = T::check_tol();
        for (i, row) in r.row_iter().enumerate() {
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol || row.iter().any(|&v| v < -tol || v > T::one() + tol) {
                return Err(Error::Dataset(format!("responsibility row {i} is not a distribution")));
            }
        }
        Ok(Self { r })
    }

    /// One-hot rows from a hard assignment; discarded points get an all-zero row.
    pub fn one_hot(assign: &HardAssignment, k: usize) -> Self {
        let mut r = Matrix::zeros(assign.len(), k);
        for (i, l) in assign.labels().iter().enumerate() {
            if let Some(c) = l {
                r[(i, *c)] = T::one();
            }
        }
        Self { r }
    }

    pub(crate) fn from_matrix_unchecked(r: Matrix<T>) -> Self {
        Self { r }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.r.rows()
    }

    pub fn k(&self) -> usize {
        self.r.cols()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.r.row(i)
    }

    /// MAP decoding; ties go to the lowest index.
    pub fn argmax(&self) -> HardAssignment {
        HardAssignment::from_labels(self.r.row_iter().map(argmax).collect())
    }
}

/// Hard labels; `None` marks a point that was discarded.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HardAssignment {
    labels: Vec<Option<usize>>,
}

impl HardAssignment {
    pub fn new(labels: Vec<Option<usize>>) -> Self {
        Self { labels }
    }

    pub fn from_labels(labels: Vec<usize>) -> Self {
        Self { labels: labels.into_iter().map(Some).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn discarded(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, l)| l.is_none()).map(|(i, _)| i).collect()
    }

    pub fn n_discarded(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Per-component sizes `N^k`.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for l in self.labels.iter().flatten() {
            c[*l] += 1;
        }
        c
    }

    /// Labels with discarded points mapped to `usize::MAX`; handy for equality checks.
    pub fn dense(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect()
    }
}

/// A Gaussian with its covariance already factorised.
#[derive(Clone, Debug)]
pub struct GaussianComponent<T> {
    mean: Vec<T>,
    chol: Cholesky<T>,
    log_det: T,
}

impl<T: Scalar> GaussianComponent<T> {
    pub fn new(mean: &[T], sigma: &Matrix<T>) -> Result<Self> {
        if sigma.rows() != mean.len() || !sigma.is_square() {
            return Err(Error::DimensionMismatch { expected: mean.len(), found: sigma.rows() });
        }
        if sigma.max_asymmetry() > T::check_tol() * (T::one() + sigma.frobenius_norm()) {
            return Err(Error::CovarianceNotPd);
        }
        let chol = Cholesky::new(sigma)?;
        let log_det = chol.log_det();
        Ok(Self { mean: mean.to_vec(), chol, log_det })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// `(y−μ)ᵀ Σ⁻¹ (y−μ)`
    pub fn mahalanobis_sq(&self, y: &[T]) -> T {
        self.chol.quad_form(&sub(y, &self.mean))
    }

    pub fn log_pdf(&self, y: &[T]) -> T {
        let half = T::of(0.5);
        let d = T::of_usize(self.mean.len());
        -(half * d) * (T::PI() + T::PI()).ln() - half * self.log_det - half * self.mahalanobis_sq(y)
    }
}

/// `ln N(y; μ, Σ)`.
pub fn gaussian_logpdf<T: Scalar>(y: &[T], mu: &[T], sigma: &Matrix<T>) -> Result<T> {
    if y.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), found: y.len() });
    }
    Ok(GaussianComponent::new(mu, sigma)?.log_pdf(y))
}

/// Max-shifted `ln Σ exp(v)`. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

/// `ln π^k + ln N(y; μ^k, Σ^k)` for every component.
pub(crate) fn weighted_log_densities<T: Scalar>(
    y: &[T],
    weights: &[T],
    comps: &[GaussianComponent<T>],
    out: &mut Vec<T>,
) {
    out.clear();
    out.extend(weights.iter().zip(comps).map(|(&w, c)| w.ln() + c.log_pdf(y)));
}

/// `Σ_i ln Σ_k π^k N(y_i; μ^k, Σ^k)`
pub fn gmm_log_likelihood<T: Scalar>(data: &Dataset<T>, params: &GmmParams<T>) -> Result<T> {
    check_dims(data, params)?;
    let comps = params.components()?;
    let mut buf = Vec::with_capacity(params.k());
    let mut total = T::zero();
    for y in data.iter() {
        weighted_log_densities(y, &params.weights, &comps, &mut buf);
        total += log_sum_exp(&buf);
    }
    Ok(total)
}

pub(crate) fn check_dims<T: Scalar>(data: &Dataset<T>, params: &GmmParams<T>) -> Result<()> {
    if data.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: data.dim() });
    }
    Ok(())
}

/// One broken [`GmmParams`] invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Zero-based component, `None` for mixture-wide rules.
    pub component: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    WeightsSum,
    NegativeWeight,
    NonFinite,
    Asymmetric,
    NotPositiveDefinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detail)
    }
}

/// Empty iff the weights form a distribution and every covariance is symmetric PD.
pub fn validate_params<T: Scalar>(params: &GmmParams<T>) -> Vec<Violation> {
    let tol = T::check_tol();
    let mut out = Vec::new();
    let sum: T = params.weights.iter().copied().sum();
    if !sum.is_finite() || (sum - T::one()).abs() > tol {
        out.push(Violation {
            component: None,
            rule: Rule::WeightsSum,
            detail: format!("weights sum {} ≠ 1", round_for_display(sum.f64())),
        });
    }
    for (k, &w) in params.weights.iter().enumerate() {
        if w < T::zero() {
            out.push(Violation {
                component: Some(k),
                rule: Rule::NegativeWeight,
                detail: format!("π{} = {} < 0", k + 1, w),
            });
        }
    }
    for (k, (m, s)) in params.means.iter().zip(&params.covariances).enumerate() {
        if m.iter().any(|v| !v.is_finite()) || !s.is_finite() {
            out.push(Violation {
                component: Some(k),
                rule: Rule::NonFinite,
                detail: format!("component {} has non-finite entries", k + 1),
            });
            continue;
        }
        if s.max_asymmetry() > tol * (T::one() + s.frobenius_norm()) {
            out.push(Violation {
                component: Some(k),
                rule: Rule::Asymmetric,
                detail: format!("Σ{} not symmetric", k + 1),
            });
        }
        if !(SymEigen::new(s).min_value() > T::zero()) || Cholesky::new(s).is_err() {
            out.push(Violation {
                component: Some(k),
                rule: Rule::NotPositiveDefinite,
                detail: format!("Σ{} not PD", k + 1),
            });
        }
    }
    out
}

fn round_for_display(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Symmetrises `sigma` and, when its smallest eigenvalue `σ*` is not positive,
/// shifts the spectrum by `|σ*| + jitter`.
///
/// Eigenvalues within rounding distance of zero count as zero, so an exactly
/// singular input is always shifted.
pub fn repair_covariance<T: Scalar>(sigma: &Matrix<T>, jitter: T) -> Matrix<T> {
    let sym = sigma.symmetrized();
    let eig = SymEigen::new(&sym);
    let smallest = eig.min_value();
    let largest = eig.values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let rounding = T::epsilon() * T::of_usize(sym.rows().max(1)) * largest;
    if smallest <= rounding {
        sym.add_identity(smallest.abs() + jitter)
    } else {
        sym
    }
}

/// Clamps negative entries to zero and rescales to sum one.
pub fn normalize_weights<T: Scalar>(pi: &[T]) -> Result<Vec<T>> {
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let clamped: Vec<T> = pi.iter().map(|&v| v.max(T::zero())).collect();
    let sum: T = clamped.iter().copied().sum();
    if !(sum > T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    Ok(clamped.into_iter().map(|v| v / sum).collect())
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub(crate) fn argmin<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v < row[best] {
            best = k;
        }
    }
    best
}
