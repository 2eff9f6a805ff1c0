//! Amplitude-estimation outcome statistics.
//!
//! With `θ = arcsin(√p)/π` and grid size `P`, outcome `m ∈ {0..P−1}` has
//! probability `½F(m − Pθ) + ½F(m + Pθ)`, where
//! `F(x) = sin²(πx) / (P² sin²(πx/P))` is the Fejér kernel. Each kernel sums
//! to one over the grid, so sampling first picks a branch and then draws from
//! a single kernel. The estimate is `p̃ = sin²(πm/P)`.
//!
//! A kernel is sampled exactly in `O(W)` time regardless of `P`: the `2W`
//! outcomes nearest the peak are tabulated, and the remaining mass is drawn
//! by rejection from the envelope `s / (4t(t−1))`, where `t` is the distance
//! to the peak and `s = sin²(πPθ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::LabRng;

/// Half-width of the tabulated core of each kernel.
const CORE_HALF_WIDTH: i64 = 32;

/// Peak positions this close to an integer are snapped onto the grid.
const GRID_SNAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeChannel {
    grid_size: u64,
}

impl AeChannel {
    pub fn new(grid_size: u64) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::config(format!("grid size must be at least 2, got {grid_size}")));
        }
        Ok(Self { grid_size })
    }

    pub fn grid_size(&self) -> u64 {
        self.grid_size
    }

    /// `sin²(πm/P)`, evaluated on the folded index so that `m` and `P − m`
    /// give bit-identical values.
    pub fn grid_value(&self, m: u64) -> f64 {
        let m = m % self.grid_size;
        let folded = m.min(self.grid_size - m);
        (std::f64::consts::PI * folded as f64 / self.grid_size as f64).sin().powi(2)
    }

    /// `2π√(p(1−p))/P + (π/P)²`, the error bound met with probability at least `8/π²`.
    pub fn error_bound(&self, p: f64) -> f64 {
        let pp = std::f64::consts::PI / self.grid_size as f64;
        2.0 * pp * (p * (1.0 - p)).max(0.0).sqrt() + pp * pp
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// The full outcome distribution, normalised by explicit summation.
pub fn outcome_distribution(p: f64, channel: &AeChannel) -> Result<Vec<f64>> {
    check_probability(p)?;
    let big_p = channel.grid_size;
    let theta = p.sqrt().asin() / std::f64::consts::PI;
    let mut probs = vec![0.0; big_p as usize];
    for centre in [theta * big_p as f64, -theta * big_p as f64] {
        let k = Kernel::new(centre, big_p);
        for (m, slot) in probs.iter_mut().enumerate() {
            *slot += k.prob_of_index(m as u64);
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v /= total);
    Ok(probs)
}

/// One Fejér kernel with peak at `floor + frac` (mod `P`).
#[derive(Clone, Debug)]
struct Kernel {
    big_p: u64,
    floor: i64,
    frac: f64,
    s: f64,
}

impl Kernel {
    fn new(centre: f64, big_p: u64) -> Self {
        let pf = big_p as f64;
        let mut c = centre.rem_euclid(pf);
        if (c - c.round()).abs() < GRID_SNAP {
            c = c.round();
        }
        let floor = c.floor();
        let frac = c - floor;
        Self { big_p, floor: floor as i64, frac, s: (std::f64::consts::PI * frac).sin().powi(2) }
    }

    /// Probability of the outcome at offset `j` from the floor of the peak.
    fn prob_at_offset(&self, j: i64) -> f64 {
        let x = j as f64 - self.frac;
        if x == 0.0 {
            return 1.0;
        }
        let pf = self.big_p as f64;
        let den = (std::f64::consts::PI * x / pf).sin();
        if den == 0.0 {
            return 1.0;
        }
        self.s / (pf * pf * den * den)
    }

    fn prob_of_index(&self, m: u64) -> f64 {
        let pf = self.big_p as i64;
        let mut j = (m as i64 - self.floor).rem_euclid(pf);
        if j as f64 - self.frac > pf as f64 / 2.0 {
            j -= pf;
        }
        self.prob_at_offset(j)
    }

    fn index(&self, j: i64) -> u64 {
        (self.floor + j).rem_euclid(self.big_p as i64) as u64
    }

    /// Offsets `j` covering the grid once with `j − frac ∈ (−P/2, P/2]`.
    fn offset_range(&self) -> (i64, i64) {
        let lo = (self.frac - self.big_p as f64 / 2.0).floor() as i64 + 1;
        (lo, lo + self.big_p as i64 - 1)
    }
}

/// Precomputed sampler for one `(p, P)` pair.
#[derive(Clone, Debug)]
pub struct AeSampler {
    channel: AeChannel,
    branches: [KernelSampler; 2],
}

#[derive(Clone, Debug)]
struct KernelSampler {
    kernel: Kernel,
    core: Vec<(i64, f64)>,
    core_mass: f64,
    /// Envelope masses (without the `s/4` factor) of the right and left tails,
    /// with the smallest and largest tail distances on each side.
    right: Option<Tail>,
    left: Option<Tail>,
}

#[derive(Clone, Copy, Debug)]
struct Tail {
    t_min: f64,
    t_max: f64,
    weight: f64,
}

impl Tail {
    fn new(t_min: f64, t_max: f64) -> Option<Self> {
        (t_max >= t_min).then(|| Self { t_min, t_max, weight: 1.0 / (t_min - 1.0) - 1.0 / t_max })
    }

    /// Draws a tail distance `t` with probability `∝ 1/(t(t−1))`.
    fn draw(&self, rng: &mut LabRng) -> f64 {
        let a = self.t_min - 1.0;
        let u: f64 = rng.random();
        let x = 1.0 / (1.0 / a - u * self.weight);
        let steps = (x - a).floor().min(self.t_max - self.t_min);
        self.t_min + steps.max(0.0)
    }
}

impl KernelSampler {
    fn new(kernel: Kernel) -> Self {
        let (lo, hi) = kernel.offset_range();
        let (core_lo, core_hi) = if hi - lo < 2 * CORE_HALF_WIDTH {
            (lo, hi)
        } else {
            (lo.max(1 - CORE_HALF_WIDTH), hi.min(CORE_HALF_WIDTH))
        };
        let core: Vec<(i64, f64)> = (core_lo..=core_hi).map(|j| (j, kernel.prob_at_offset(j))).collect();
        let core_mass = core.iter().map(|c| c.1).sum::<f64>().min(1.0);
        let f = kernel.frac;
        let right = Tail::new((core_hi + 1) as f64 - f, hi as f64 - f);
        let left = Tail::new(f - (core_lo - 1) as f64, f - lo as f64);
        Self { kernel, core, core_mass, right, left }
    }

    fn draw(&self, rng: &mut LabRng) -> u64 {
        let tail_mass = 1.0 - self.core_mass;
        let has_tail = self.right.is_some() || self.left.is_some();
        let in_tail = has_tail && tail_mass > 0.0 && self.kernel.s > 0.0 && rng.random::<f64>() < tail_mass;
        if !in_tail {
            let mut u = rng.random::<f64>() * self.core_mass;
            for &(j, w) in &self.core {
                if u < w {
                    return self.kernel.index(j);
                }
                u -= w;
            }
            return self.kernel.index(self.core.last().expect("core is never empty").0);
        }
        let pf = self.kernel.big_p as f64;
        let rw = self.right.map_or(0.0, |t| t.weight);
        let lw = self.left.map_or(0.0, |t| t.weight);
        loop {
            let go_right = rng.random::<f64>() * (rw + lw) < rw;
            let tail = if go_right { self.right } else { self.left }.expect("chosen tail has weight");
            let t = tail.draw(rng);
            let den = (std::f64::consts::PI * t / pf).sin();
            let accept = 4.0 * t * (t - 1.0) / (pf * pf * den * den);
            if rng.random::<f64>() < accept {
                let j = if go_right { (t + self.kernel.frac).round() } else { (self.kernel.frac - t).round() };
                return self.kernel.index(j as i64);
            }
        }
    }
}

impl AeSampler {
    pub fn new(p: f64, channel: AeChannel) -> Result<Self> {
        check_probability(p)?;
        let theta = p.sqrt().asin() / std::f64::consts::PI;
        let pf = channel.grid_size as f64;
        let branches = [
            KernelSampler::new(Kernel::new(theta * pf, channel.grid_size)),
            KernelSampler::new(Kernel::new(-theta * pf, channel.grid_size)),
        ];
        Ok(Self { channel, branches })
    }

    /// Grid index of one measurement outcome.
    pub fn sample_index(&self, rng: &mut LabRng) -> u64 {
        let b = usize::from(rng.random::<bool>());
        self.branches[b].draw(rng)
    }

    /// One estimate `p̃`.
    pub fn sample(&self, rng: &mut LabRng) -> f64 {
        self.channel.grid_value(self.sample_index(rng))
    }
}

/// A single amplitude-estimation draw. Prefer [`AeSampler`] for repeated draws at the same `p`.
pub fn ae_sample(p: f64, channel: &AeChannel, rng: &mut LabRng) -> Result<f64> {
    Ok(AeSampler::new(p, *channel)?.sample(rng))
}

/// Copies `L` fed to majority voting, with the failure target they were derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEvalSpec {
    pub copies: usize,
    pub delta_fail: f64,
    pub a0: f64,
}

/// Per-copy success probability of amplitude estimation.
pub const AE_SUCCESS: f64 = 8.0 / (std::f64::consts::PI * std::f64::consts::PI);

impl ModeEvalSpec {
    /// `⌈ln(1/Δ) / (2(a₀ − ½)²)⌉`
    pub fn required_copies(delta_fail: f64, a0: f64) -> Result<usize> {
        if !(delta_fail > 0.0 && delta_fail < 1.0) {
            return Err(Error::config(format!("failure probability {delta_fail} outside (0, 1)")));
        }
        if !(a0 > 0.5 && a0 <= 1.0) {
            return Err(Error::config(format!("a0 = {a0} outside (1/2, 1]")));
        }
        Ok(((1.0 / delta_fail).ln() / (2.0 * (a0 - 0.5).powi(2))).ceil().max(1.0) as usize)
    }

    pub fn from_delta(delta_fail: f64, a0: f64) -> Result<Self> {
        Ok(Self { copies: Self::required_copies(delta_fail, a0)?, delta_fail, a0 })
    }

    pub fn validate(&self) -> Result<()> {
        let need = Self::required_copies(self.delta_fail, self.a0)?;
        if self.copies < need {
            return Err(Error::config(format!("{} copies is below the {need} required", self.copies)));
        }
        Ok(())
    }
}

impl Default for ModeEvalSpec {
    fn default() -> Self {
        Self::from_delta(0.01, AE_SUCCESS).expect("valid defaults")
    }
}

/// Most frequent value; ties go to the smaller value.
pub fn mode_evaluate(samples: &[f64], spec: &ModeEvalSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if samples.len() != spec.copies {
        return Err(Error::LengthMismatch { expected: spec.copies, found: samples.len() });
    }
    Ok(mode_of(samples))
}

pub(crate) fn mode_of(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_n {
            best = sorted[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use std::f64::consts::PI;

    /// Direct evaluation of the two-branch Fejér mixture, no shortcuts.
    fn oracle(p: f64, big_p: u64) -> Vec<f64> {
        let theta = p.sqrt().asin() / PI;
        let pf = big_p as f64;
        let fejer = |phi: f64| {
            let den = (PI * phi).sin();
            if den.abs() < 1e-15 {
                1.0
            } else {
                (pf * PI * phi).sin().powi(2) / (pf * pf * den * den)
            }
        };
        let raw: Vec<f64> = (0..big_p).map(|m| fejer(m as f64 / pf - theta) + fejer(m as f64 / pf + theta)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    #[test]
    fn distribution_matches_oracle_and_sums_to_one() {
        for &big_p in &[2u64, 7, 16, 64, 100] {
            for &p in &[0.0, 0.1, 0.3, 0.5, 0.77, 1.0] {
                let ch = AeChannel::new(big_p).unwrap();
                let got = outcome_distribution(p, &ch).unwrap();
                assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (a, b) in got.iter().zip(oracle(p, big_p)) {
                    assert!((a - b).abs() < 1e-9, "P={big_p} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let ch = AeChannel::new(64).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            assert_eq!(ae_sample(0.0, &ch, &mut rng).unwrap(), 0.0);
            assert_eq!(ae_sample(1.0, &ch, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn on_grid_value_is_returned_exactly() {
        let ch = AeChannel::new(16).unwrap();
        let p = ch.grid_value(3);
        let s = AeSampler::new(p, ch).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..1000 {
            assert_eq!(s.sample(&mut rng), p);
        }
    }

    #[test]
    fn support_is_the_grid() {
        let ch = AeChannel::new(32).unwrap();
        let grid: Vec<f64> = (0..32).map(|m| ch.grid_value(m)).collect();
        let s = AeSampler::new(0.37, ch).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..2000 {
            let v = s.sample(&mut rng);
            assert!(grid.contains(&v));
        }
    }

    /// Chi-square style check of the tail sampler against the explicit
    /// distribution on a grid large enough to exercise rejection sampling.
    #[test]
    fn sampler_matches_explicit_distribution() {
        let big_p = 512;
        let ch = AeChannel::new(big_p).unwrap();
        for &p in &[0.013, 0.3, 0.6180339] {
            let probs = outcome_distribution(p, &ch).unwrap();
            let s = AeSampler::new(p, ch).unwrap();
            let mut rng = rng_from_seed(11);
            let n = 400_000;
            let mut counts = vec![0usize; big_p as usize];
            for _ in 0..n {
                counts[s.sample_index(&mut rng) as usize] += 1;
            }
            let mut far_expected = 0.0;
            let mut far_seen = 0usize;
            for m in 0..big_p as usize {
                let e = probs[m] * n as f64;
                if e > 50.0 {
                    let z = (counts[m] as f64 - e) / e.sqrt();
                    assert!(z.abs() < 5.0, "p={p} m={m}: {} vs {e}", counts[m]);
                } else {
                    far_expected += e;
                    far_seen += counts[m];
                }
            }
            let z = (far_seen as f64 - far_expected) / far_expected.max(1.0).sqrt();
            assert!(z.abs() < 5.0, "tail {far_seen} vs {far_expected}");
        }
    }

    #[test]
    fn coverage_meets_the_bound() {
        let mut rng = rng_from_seed(4);
        for &big_p in &[16u64, 64] {
            let ch = AeChannel::new(big_p).unwrap();
            for &p in &[0.1, 0.3, 0.5, 0.9] {
                let s = AeSampler::new(p, ch).unwrap();
                let bound = ch.error_bound(p);
                let n = 20_000;
                let hits = (0..n).filter(|_| (s.sample(&mut rng) - p).abs() <= bound).count();
                assert!(hits as f64 / n as f64 >= AE_SUCCESS - 0.02, "P={big_p} p={p}");
            }
        }
    }

    #[test]
    fn copies_formula() {
        assert_eq!(ModeEvalSpec::required_copies(0.01, AE_SUCCESS).unwrap(), 24);
        assert_eq!(ModeEvalSpec::default().copies, 24);
        assert!(ModeEvalSpec { copies: 3, delta_fail: 0.01, a0: AE_SUCCESS }.validate().is_err());
        assert!(ModeEvalSpec::required_copies(0.01, 0.5).is_err());
    }

    #[test]
    fn mode_examples() {
        let spec = |n| ModeEvalSpec { copies: n, delta_fail: 0.5, a0: 1.0 };
        assert_eq!(mode_evaluate(&[0.3, 0.3, 0.3], &spec(3)).unwrap(), 0.3);
        assert_eq!(mode_evaluate(&[1.0, 1.0, 2.0], &spec(3)).unwrap(), 1.0);
        assert_eq!(mode_evaluate(&[2.0, 1.0, 2.0, 1.0], &spec(4)).unwrap(), 1.0);
        assert!(mode_evaluate(&[], &spec(0)).is_err());
        assert!(mode_evaluate(&[1.0], &spec(2)).is_err());
    }

    #[test]
    fn mode_of_corrupted_copies_rarely_fails() {
        let spec = ModeEvalSpec::default();
        let ch = AeChannel::new(64).unwrap();
        let truth = ch.grid_value(19);
        let mut rng = rng_from_seed(12);
        let repeats = 10_000;
        let mut failures = 0;
        for _ in 0..repeats {
            // Each copy is correct with probability a₀, otherwise a uniformly chosen other grid value.
            let samples: Vec<f64> = (0..spec.copies)
                .map(|_| {
                    if rng.random::<f64>() < spec.a0 {
                        truth
                    } else {
                        let m = rng.random_range(0..63u64);
                        ch.grid_value(if m >= 19 { m + 1 } else { m })
                    }
                })
                .collect();
            if mode_evaluate(&samples, &spec).unwrap() != truth {
                failures += 1;
            }
        }
        let rate = failures as f64 / repeats as f64;
        let limit = spec.delta_fail + 3.0 * (spec.delta_fail * (1.0 - spec.delta_fail) / repeats as f64).sqrt();
        assert!(rate <= limit, "{rate} > {limit}");
    }
}
