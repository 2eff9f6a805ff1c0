//! Multi-trial experiments: every trial fits the same dataset from its own
//! random hard-assignment start, and the best success rate is reported.
//!
//! Trial `i` uses the seed `derive_seed(seed, i)` for both its
//! initialisation and the fit, so results do not depend on scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::data::{generate_example1, generate_example2, DEFAULT_N};
use crate::bench::score::success_rate;
use crate::cost::{epsilon_budget, eta_values};
use crate::delta_em::{run_delta_em, DeltaEmConfig};
use crate::em::{e_step, random_init, run_em, EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::io::read_dataset_csv;
use crate::kmeans::{random_centroids, run_delta_kmeans, run_kmeans, KMeansResult, DEFAULT_KMEANS_TOL};
use crate::linalg::Matrix;
use crate::model::{gmm_log_likelihood, Dataset, GmmParams, HardAssignment};
use crate::quantum::{run_qem_emulation, QemConfig};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    #[serde(alias = "1", alias = "i")]
    I,
    #[serde(alias = "2", alias = "ii")]
    II,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Em,
    #[serde(alias = "delta-em")]
    DeltaEm,
    Kmeans,
    #[serde(alias = "delta-kmeans")]
    DeltaKmeans,
    #[serde(alias = "qem", alias = "qem-emulation")]
    QemEmulation,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansSettings {
    pub max_iters: usize,
    pub tol: f64,
    /// Used by δ-k-means only.
    pub delta: f64,
    /// Used by δ-k-means only.
    pub noise_var: f64,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        Self { max_iters: 100, tol: DEFAULT_KMEANS_TOL, delta: 0.2, noise_var: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub example: Example,
    /// Points to draw for the built-in examples.
    pub n: usize,
    /// Seed of the dataset; defaults to `seed`.
    pub data_seed: Option<u64>,
    /// CSV file for `example = "custom"`.
    pub data_path: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub em: EmConfig,
    pub delta_em: DeltaEmConfig,
    pub kmeans: KMeansSettings,
    /// Quantum emulation settings; derived from the δ-EM `delta` and the data when absent.
    pub qem: Option<QemConfig>,
    /// Where to write the JSON report; the per-trial CSV goes next to it.
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: Example::I,
            n: DEFAULT_N,
            data_seed: None,
            data_path: None,
            algorithm: Algorithm::DeltaEm,
            trials: 100,
            seed: 0,
            k: 2,
            em: EmConfig::default(),
            delta_em: DeltaEmConfig::default(),
            kmeans: KMeansSettings::default(),
            qem: None,
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.example == Example::Custom && self.data_path.is_none() {
            return Err(Error::config("custom example needs data_path"));
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset<f64>> {
        let seed = self.data_seed.unwrap_or(self.seed);
        let data = match self.example {
            Example::I => generate_example1(self.n, seed)?,
            Example::II => generate_example2(self.n, seed)?,
            Example::Custom => read_dataset_csv(self.data_path.as_deref().expect("validated"))?,
        };
        if data.true_labels().is_none() {
            return Err(Error::Dataset("benchmarks need ground-truth labels".into()));
        }
        Ok(data)
    }

    /// The quantum emulation settings actually used on `data`.
    pub fn qem_config(&self, data: &Dataset<f64>) -> Result<QemConfig> {
        if let Some(q) = &self.qem {
            return Ok(QemConfig { k: self.k, ..q.clone() });
        }
        let (eta_mu, eta_sigma) = eta_values(data)?;
        let delta = self.delta_em.delta;
        let budget = epsilon_budget(delta, eta_mu, eta_sigma)?;
        Ok(QemConfig { max_iters: self.delta_em.max_iters, ..QemConfig::from_budget(self.k, delta, &budget)? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed_used: u64,
    pub success_rate: f64,
    /// For k-means, the likelihood of the equal-weight, identity-covariance mixture at the centroids.
    pub final_loglik: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub best: TrialOutcome,
    pub trials: Vec<TrialOutcome>,
}

fn map_labels(params: &GmmParams<f64>, data: &Dataset<f64>) -> Result<HardAssignment> {
    Ok(e_step(data, params)?.argmax())
}

fn em_outcome(
    trial: usize,
    seed: u64,
    data: &Dataset<f64>,
    fit: &FitResult<f64>,
    labels: &HardAssignment,
    k: usize,
) -> Result<TrialOutcome> {
    Ok(TrialOutcome {
        trial,
        seed_used: seed,
        success_rate: success_rate(labels, data.true_labels().expect("checked on load"), k)?,
        final_loglik: gmm_log_likelihood(data, &fit.params)?,
        iterations: fit.iterations,
    })
}

fn kmeans_outcome(
    trial: usize,
    seed: u64,
    data: &Dataset<f64>,
    fit: &KMeansResult<f64>,
    k: usize,
) -> Result<TrialOutcome> {
    let d = data.dim();
    let as_mixture =
        GmmParams::new(vec![1.0 / k as f64; k], fit.centroids.as_slice().to_vec(), vec![Matrix::identity(d); k])?;
    Ok(TrialOutcome {
        trial,
        seed_used: seed,
        success_rate: success_rate(&fit.assignment(), data.true_labels().expect("checked on load"), k)?,
        final_loglik: gmm_log_likelihood(data, &as_mixture)?,
        iterations: fit.iterations,
    })
}

/// One trial of `config` on `data`.
pub fn run_trial(data: &Dataset<f64>, config: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let seed = derive_seed(config.seed, trial as u64);
    let mut rng = rng_from_seed(seed);
    let k = config.k;
    match config.algorithm {
        Algorithm::Em => {
            let cfg = EmConfig { k, seed, ..config.em.clone() };
            let init = random_init(data, k, cfg.cov_floor, &mut rng)?;
            let fit = run_em(data, &init, &cfg)?;
            em_outcome(trial, seed, data, &fit, &map_labels(&fit.params, data)?, k)
        }
        Algorithm::DeltaEm => {
            let cfg = DeltaEmConfig { k, seed, ..config.delta_em.clone() };
            let init = random_init(data, k, cfg.cov_floor, &mut rng)?;
            let fit = run_delta_em(data, &init, &cfg)?;
            let labels = match &fit.assignment {
                Some(a) => a.clone(),
                None => map_labels(&fit.params, data)?,
            };
            em_outcome(trial, seed, data, &fit, &labels, k)
        }
        Algorithm::QemEmulation => {
            let cfg = QemConfig { seed, ..config.qem_config(data)? };
            let init = random_init(data, k, cfg.cov_floor, &mut rng)?;
            let fit = run_qem_emulation(data, &init, &cfg)?;
            let labels = fit.assignment.clone().unwrap_or_else(|| HardAssignment::new(vec![None; data.n()]));
            em_outcome(trial, seed, data, &fit, &labels, k)
        }
        Algorithm::Kmeans => {
            let s = &config.kmeans;
            let init = random_centroids(data, k, &mut rng)?;
            let fit = run_kmeans(data, &init, s.max_iters, s.tol, seed)?;
            kmeans_outcome(trial, seed, data, &fit, k)
        }
        Algorithm::DeltaKmeans => {
            let s = &config.kmeans;
            let init = random_centroids(data, k, &mut rng)?;
            let fit = run_delta_kmeans(data, &init, s.delta, s.noise_var, s.max_iters, seed)?;
            kmeans_outcome(trial, seed, data, &fit, k)
        }
    }
}

/// Runs every trial in parallel on the configured dataset and keeps the best
/// (lowest trial index among ties). Writes the report when `output_path` is set.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let data = config.load_dataset()?;
    let report = run_benchmark_on(&data, config)?;
    if let Some(path) = &config.output_path {
        write_report(&report, path)?;
    }
    Ok(report)
}

/// [`run_benchmark`] on an already loaded dataset, without writing anything.
pub fn run_benchmark_on(data: &Dataset<f64>, config: &ExperimentConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    if data.true_labels().is_none() {
        return Err(Error::Dataset("benchmarks need ground-truth labels".into()));
    }
    let trials: Vec<TrialOutcome> =
        (0..config.trials).into_par_iter().map(|i| run_trial(data, config, i)).collect::<Result<_>>()?;
    let best = trials
        .iter()
        .fold(None::<&TrialOutcome>, |b, t| match b {
            Some(b) if b.success_rate >= t.success_rate => Some(b),
            _ => Some(t),
        })
        .expect("at least one trial")
        .clone();
    Ok(BenchmarkReport { config: config.clone(), best, trials })
}

/// JSON report at `path`, per-trial CSV at `path` with extension `.csv`.
pub fn write_report(report: &BenchmarkReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    let mut w = csv::Writer::from_path(path.with_extension("csv"))?;
    for t in &report.trials {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub best_success_rate: f64,
}

/// Best success rate for each `δ`. The δ of every δ-dependent algorithm is overridden.
pub fn delta_sweep(deltas: &[f64], base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let data = base.load_dataset()?;
    delta_sweep_on(&data, deltas, base)
}

/// [`delta_sweep`] on an already loaded dataset.
pub fn delta_sweep_on(data: &Dataset<f64>, deltas: &[f64], base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    deltas
        .iter()
        .map(|&delta| {
            if !(delta >= 0.0) {
                return Err(Error::NegativeDelta(delta));
            }
            let mut cfg = base.clone();
            cfg.delta_em.delta = delta;
            cfg.kmeans.delta = delta;
            if let Some(q) = &mut cfg.qem {
                q.delta = delta;
            }
            let report = run_benchmark_on(data, &cfg)?;
            Ok(SweepRow { delta, best_success_rate: report.best.success_rate })
        })
        .collect()
}
