//! Read-out channels: vector tomography with bounded direction and norm
//! errors, and Hoeffding-style estimation of mixture weights by sampling labels.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::LabRng;
use crate::scalar::Scalar;

/// Error bounds of a vector read-out: `eps_dir` bounds the distance between
/// true and estimated unit vectors (`ε₄` in the runtime formula), `eps_norm`
/// the relative norm error (`ε₃`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TomographyChannel {
    pub eps_dir: f64,
    pub eps_norm: f64,
}

impl TomographyChannel {
    pub const EXACT: Self = Self { eps_dir: 0.0, eps_norm: 0.0 };

    pub fn new(eps_dir: f64, eps_norm: f64) -> Result<Self> {
        let c = Self { eps_dir, eps_norm };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_dir >= 0.0 && self.eps_norm >= 0.0) {
            return Err(Error::config("tomography error bounds must be non-negative"));
        }
        if self.eps_dir > 2.0 {
            return Err(Error::config("direction error above 2 is meaningless for unit vectors"));
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.eps_dir == 0.0 && self.eps_norm == 0.0
    }
}

/// `ṽ = ‖v‖(1+ξ)·û'`: the unit direction is rotated by a chord of length
/// `c ~ U[0, eps_dir]` towards a random orthogonal direction and the norm is
/// scaled by `1+ξ`, `ξ ~ U[−eps_norm, eps_norm]`. Hence `‖û' − û‖ ≤ eps_dir`
/// and `‖ṽ − v‖ ≤ ‖v‖(eps_dir + eps_norm)`.
pub fn tomography_apply<T: Scalar>(v: &[T], channel: &TomographyChannel, rng: &mut LabRng) -> Result<Vec<T>> {
    let len = norm(v);
    if !(len > T::zero()) {
        return Err(Error::ZeroVector);
    }
    if channel.is_exact() {
        return Ok(v.to_vec());
    }
    let unit: Vec<f64> = v.iter().map(|x| (*x / len).f64()).collect();
    let mut dir = unit.clone();
    if channel.eps_dir > 0.0 && unit.len() > 1 {
        let chord = rng.random::<f64>() * channel.eps_dir;
        let phi = 2.0 * (chord / 2.0).asin();
        let w = random_orthogonal(&unit, rng);
        for ((d, u), w) in dir.iter_mut().zip(&unit).zip(&w) {
            *d = phi.cos() * u + phi.sin() * w;
        }
    }
    let xi = if channel.eps_norm > 0.0 { rng.random_range(-channel.eps_norm..=channel.eps_norm) } else { 0.0 };
    let scale = len.f64() * (1.0 + xi);
    Ok(dir.iter().map(|d| T::of(scale * d)).collect())
}

/// A unit vector orthogonal to the unit vector `u` (needs `u.len() ≥ 2`).
fn random_orthogonal(u: &[f64], rng: &mut LabRng) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..u.len()).map(|_| StandardNormal.sample(rng)).collect();
        let proj = dot(&g, u);
        for (x, y) in g.iter_mut().zip(u) {
            *x -= proj * y;
        }
        let n = norm(&g);
        if n > 1e-8 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Both sides of `‖‖a‖â − ‖b‖b̂‖ ≤ ‖a‖·‖â − b̂‖ + |‖a‖ − ‖b‖|`, the split
/// behind the error bound on tomographically read vectors.
pub fn norm_split_bound<T: Scalar>(a: &[T], b: &[T]) -> Result<(T, T)> {
    let (na, nb) = (norm(a), norm(b));
    if !(na > T::zero() && nb > T::zero()) {
        return Err(Error::ZeroVector);
    }
    let lhs = norm(&crate::linalg::sub(a, b));
    let unit_gap: T = a.iter().zip(b).map(|(&x, &y)| (x / na - y / nb).powi(2)).sum::<T>().sqrt();
    Ok((lhs, na * unit_gap + (na - nb).abs()))
}

/// `⌈(2K/ε²)·ln(2/(1 − (1−Δ)^{1/K}))⌉` label samples give every weight to
/// within `ε` with joint probability at least `1 − Δ`.
pub fn hoeffding_samples(k: usize, eps: f64, delta_fail: f64) -> Result<usize> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::config("weight precision must be positive"));
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(Error::config(format!("failure probability {delta_fail} outside (0, 1)")));
    }
    let kf = k as f64;
    let each = 1.0 - (1.0 - delta_fail).powf(1.0 / kf);
    Ok((2.0 * kf / (eps * eps) * (2.0 / each).ln()).ceil() as usize)
}

/// Empirical label frequencies from `n_samples` i.i.d. draws of the label
/// distribution `probs` (any non-negative weights).
pub fn estimate_weights<T: Scalar>(probs: &[f64], n_samples: usize, rng: &mut LabRng) -> Result<Vec<T>> {
    if n_samples == 0 {
        return Err(Error::config("need at least one weight sample"));
    }
    let dist = WeightedIndex::new(probs).map_err(|_| Error::DegenerateWeights)?;
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..n_samples {
        counts[dist.sample(rng)] += 1;
    }
    let n = T::of_usize(n_samples);
    Ok(counts.into_iter().map(|c| T::of_usize(c) / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn exact_channel_is_identity() {
        let v = vec![1.5, -2.0, 0.25];
        let out = tomography_apply(&v, &TomographyChannel::EXACT, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn direction_only_keeps_norm() {
        let ch = TomographyChannel::new(0.1, 0.0).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let v = vec![0.6f64, 0.8];
            let out = tomography_apply(&v, &ch, &mut rng).unwrap();
            assert!((norm(&out) - 1.0f64).abs() < 1e-12);
            assert!(norm(&crate::linalg::sub(&out, &v)) <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn error_within_budget_and_split_bound_holds() {
        let ch = TomographyChannel::new(0.05, 0.03).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..10_000 {
            let v: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
            let out = tomography_apply(&v, &ch, &mut rng).unwrap();
            let err = norm(&crate::linalg::sub(&out, &v));
            assert!(err <= norm(&v) * 0.08 + 1e-12);
            let (lhs, rhs) = norm_split_bound(&out, &v).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(tomography_apply(&[0.0, 0.0], &TomographyChannel::EXACT, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn hoeffding_count() {
        let oracle = (400.0 * (2.0 / (1.0 - 0.95f64.sqrt())).ln()).ceil() as usize;
        assert_eq!(hoeffding_samples(2, 0.1, 0.05).unwrap(), oracle);
        assert_eq!(oracle, 1748);
    }

    #[test]
    fn point_mass_and_uniform_weights() {
        let mut rng = rng_from_seed(3);
        let w: Vec<f64> = estimate_weights(&[0.0, 1.0, 0.0], 50, &mut rng).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
        let w: Vec<f64> = estimate_weights(&[1.0; 4], 100_000, &mut rng).unwrap();
        for x in w {
            assert!((x - 0.25).abs() < 0.01);
        }
    }
}
