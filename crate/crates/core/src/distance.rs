//! Square Euclidean and square GMM distances, δ-neighbourhoods and the
//! deterministic 2δ labelling rule.
//!
//! The GMM distance of `y` to component `k` is
//! `(y−μ^k)ᵀ (Σ^k)⁻¹ (y−μ^k) + ln|Σ^k| − 2 ln(K π^k)`, which equals
//! `−2 ln(K π^k N(y; μ^k, Σ^k)) − d ln 2π`. Minimising it over `k` therefore
//! picks the component with the largest posterior responsibility, and it
//! collapses to the square Euclidean distance when `π^k = 1/K`, `Σ^k = I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{argmin, check_dims, Dataset, GaussianComponent, GmmParams};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Gmm,
}

/// Square distances from one point to every component.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRow<T> {
    pub values: Vec<T>,
    pub metric: Metric,
}

impl<T: Scalar> DistanceRow<T> {
    pub fn new(values: Vec<T>, metric: Metric) -> Self {
        Self { values, metric }
    }

    /// `d^*`, the smallest distance.
    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Lowest index attaining the minimum.
    pub fn argmin(&self) -> usize {
        argmin(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(y−μ)ᵀ(y−μ)`
pub fn squared_euclidean<T: Scalar>(y: &[T], mu: &[T]) -> Result<T> {
    if y.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), found: y.len() });
    }
    Ok(y.iter().zip(mu).map(|(&a, &b)| (a - b) * (a - b)).sum())
}

/// Square GMM distance of `y` to one component of a `k_total`-component mixture.
pub fn squared_gmm_distance<T: Scalar>(y: &[T], weight: T, mean: &[T], sigma: &Matrix<T>, k_total: usize) -> Result<T> {
    if y.len() != mean.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), found: y.len() });
    }
    if !(weight > T::zero()) {
        return Err(Error::NonPositiveWeight(weight.f64()));
    }
    let comp = GaussianComponent::new(mean, sigma)?;
    Ok(gmm_distance_from(&comp, weight, k_total, y))
}

#[inline]
fn gmm_distance_from<T: Scalar>(comp: &GaussianComponent<T>, weight: T, k_total: usize, y: &[T]) -> T {
    comp.mahalanobis_sq(y) + comp.log_det() - T::of(2.0) * (T::of_usize(k_total) * weight).ln()
}

/// `ln|Σ^k| − 2 ln(K π^k)`: the part of the GMM distance that does not depend on `y`.
pub fn gmm_offset<T: Scalar>(comp: &GaussianComponent<T>, weight: T, k_total: usize) -> T {
    comp.log_det() - T::of(2.0) * (T::of_usize(k_total) * weight).ln()
}

/// Distance rows for many points against one parameter set, with every
/// covariance factorised once.
#[derive(Clone, Debug)]
pub struct DistanceOracle<T> {
    metric: Metric,
    means: Vec<Vec<T>>,
    comps: Vec<GaussianComponent<T>>,
    offsets: Vec<T>,
}

impl<T: Scalar> DistanceOracle<T> {
    pub fn new(params: &GmmParams<T>, metric: Metric) -> Result<Self> {
        let k = params.k();
        let (comps, offsets) = match metric {
            Metric::Euclidean => (Vec::new(), Vec::new()),
            Metric::Gmm => {
                if let Some(&w) = params.weights.iter().find(|&&w| !(w > T::zero())) {
                    return Err(Error::NonPositiveWeight(w.f64()));
                }
                let comps = params.components()?;
                let offsets = comps.iter().zip(&params.weights).map(|(c, &w)| gmm_offset(c, w, k)).collect();
                (comps, offsets)
            }
        };
        Ok(Self { metric, means: params.means.clone(), comps, offsets })
    }

    /// Euclidean distances to bare centroids.
    pub fn euclidean(centroids: &[Vec<T>]) -> Self {
        Self { metric: Metric::Euclidean, means: centroids.to_vec(), comps: Vec::new(), offsets: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn row(&self, y: &[T]) -> DistanceRow<T> {
        let values = match self.metric {
            Metric::Euclidean => {
                self.means.iter().map(|m| y.iter().zip(m).map(|(&a, &b)| (a - b) * (a - b)).sum()).collect()
            }
            Metric::Gmm => self.comps.iter().zip(&self.offsets).map(|(c, &o)| c.mahalanobis_sq(y) + o).collect(),
        };
        DistanceRow { values, metric: self.metric }
    }

    pub fn rows(&self, data: &Dataset<T>) -> Vec<DistanceRow<T>> {
        data.iter().map(|y| self.row(y)).collect()
    }
}

/// Applies the chosen per-component distance for every `k`.
pub fn distance_row<T: Scalar>(y: &[T], params: &GmmParams<T>, metric: Metric) -> Result<DistanceRow<T>> {
    if y.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: y.len() });
    }
    Ok(DistanceOracle::new(params, metric)?.row(y))
}

pub fn distance_rows<T: Scalar>(
    data: &Dataset<T>,
    params: &GmmParams<T>,
    metric: Metric,
) -> Result<Vec<DistanceRow<T>>> {
    check_dims(data, params)?;
    Ok(DistanceOracle::new(params, metric)?.rows(data))
}

/// `{k : row[k] − min(row) ≤ δ}` (closed at the boundary). Never empty.
pub fn delta_neighbor_set<T: Scalar>(row: &DistanceRow<T>, delta: T) -> Result<Vec<usize>> {
    if delta < T::zero() || delta.is_nan() {
        return Err(Error::NegativeDelta(delta.f64()));
    }
    if row.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let best = row.min();
    Ok(row.values.iter().enumerate().filter(|(_, &v)| v - best <= delta).map(|(k, _)| k).collect())
}

/// `Some(k)` when `row[k] < row[k'] − 2δ` for every `k' ≠ k`, otherwise the
/// point is discarded.
pub fn deterministic_label<T: Scalar>(row: &DistanceRow<T>, delta: T) -> Option<usize> {
    let k = row.argmin();
    let margin = T::of(2.0) * delta;
    let best = row.values[k];
    row.values.iter().enumerate().all(|(j, &v)| j == k || best < v - margin).then_some(k)
}
