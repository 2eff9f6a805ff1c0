use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qem_lab::bench::{
    delta_sweep, emit_plot_data, emit_scatter, generate_example1, generate_example2, run_benchmark, success_rate,
    ChartKind, ExperimentConfig, KMeansSettings, Table,
};
use qem_lab::cost::{epsilon_budget, eta_values, qem_runtime_estimate, DataMatrices};
use qem_lab::delta_em::{run_delta_em, DeltaEmConfig};
use qem_lab::em::{e_step, random_init, run_em, EmConfig, FitResult};
use qem_lab::io::{read_dataset_csv, write_dataset_csv, write_json};
use qem_lab::kmeans::{random_centroids, run_delta_kmeans, run_kmeans};
use qem_lab::quantum::{run_qem_emulation, QemConfig};
use qem_lab::rng::rng_from_seed;
use qem_lab::{Dataset64, GmmParams64, HardAssignment};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "lab", version, about = "Gaussian mixture clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one of the two reference datasets to CSV.
    Generate {
        #[arg(long, value_parser = ["1", "2"])]
        example: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one algorithm to a CSV dataset from a random hard-assignment start.
    Fit {
        #[arg(long, value_enum)]
        algo: Algo,
        /// JSON settings for the chosen algorithm.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Result JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the objective trace and, for 2-D data, a labelled scatter with this prefix.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Best-of-trials benchmark from an experiment config.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best success rate as a function of δ.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV of (delta, best rate) plus an SVG line chart.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runtime estimate of quantum EM on a dataset.
    Cost {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        json: bool,
        /// Accepted for a uniform interface; the estimate is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Em,
    DeltaEm,
    Kmeans,
    DeltaKmeans,
    Qem,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn read_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> qem_lab::Result<C> {
    match path {
        Some(p) => Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(p)?))?),
        None => Ok(C::default()),
    }
}

fn run(command: Command) -> qem_lab::Result<()> {
    match command {
        Command::Generate { example, n, seed, out } => {
            let data: Dataset64 =
                if example == "1" { generate_example1(n, seed)? } else { generate_example2(n, seed)? };
            write_dataset_csv(&data, &out)?;
            eprintln!("wrote {n} points to {}", out.display());
        }
        Command::Fit { algo, config, data, k, seed, out, plot } => {
            let data: Dataset64 = read_dataset_csv(&data)?;
            fit(algo, config.as_deref(), &data, k, seed, out.as_deref(), plot.as_deref())?;
        }
        Command::Bench { config, seed, out } => {
            let mut cfg: ExperimentConfig = read_config(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.output_path = out.or(cfg.output_path);
            let report = run_benchmark(&cfg)?;
            let rates: Vec<f64> = report.trials.iter().map(|t| t.success_rate).collect();
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            println!(
                "{:?} on {:?}: best {:.1}% (trial {}), mean {:.1}% over {} trials",
                cfg.algorithm,
                cfg.example,
                100.0 * report.best.success_rate,
                report.best.trial,
                100.0 * mean,
                rates.len()
            );
        }
        Command::Sweep { deltas, config, seed, out } => {
            let mut cfg: ExperimentConfig = read_config(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let rows = delta_sweep(&deltas, &cfg)?;
            println!("delta,best_success_rate");
            for r in &rows {
                println!("{},{}", r.delta, r.best_success_rate);
            }
            if let Some(path) = out {
                let table = Table::new(
                    "delta",
                    "best_success_rate",
                    rows.iter().map(|r| (r.delta, r.best_success_rate)).collect(),
                );
                emit_plot_data(&table, &path, Some(ChartKind::Line))?;
            }
        }
        Command::Cost { data, delta, k, json, seed: _ } => {
            let data: Dataset64 = read_dataset_csv(&data)?;
            let (eta_mu, eta_sigma) = eta_values(&data)?;
            let budget = epsilon_budget(delta, eta_mu, eta_sigma)?;
            let report = qem_runtime_estimate(&DataMatrices::from_dataset(&data), k, &budget)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                let v = serde_json::to_value(&report)?;
                for (name, value) in v.as_object().expect("struct serialises to an object") {
                    println!("{name:<18} {:>14.6e}", value.as_f64().unwrap_or(f64::NAN));
                }
            }
        }
    }
    Ok(())
}

/// What `fit` reports, whichever algorithm ran.
struct FitOutput {
    result: serde_json::Value,
    k: usize,
    trace_name: &'static str,
    trace: Vec<f64>,
    params: Option<GmmParams64>,
    labels: HardAssignment,
}

fn mixture_output(fit: FitResult<f64>, labels: HardAssignment) -> qem_lab::Result<FitOutput> {
    Ok(FitOutput {
        result: serde_json::to_value(&fit)?,
        k: fit.params.k(),
        trace_name: "loglik",
        trace: fit.loglik_trace,
        params: Some(fit.params),
        labels,
    })
}

fn fit(
    algo: Algo,
    config: Option<&Path>,
    data: &Dataset64,
    k: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> qem_lab::Result<()> {
    let output = match algo {
        Algo::Em => {
            let mut cfg: EmConfig = read_config(config)?;
            cfg.k = k.unwrap_or(cfg.k);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let init = random_init(data, cfg.k, cfg.cov_floor, &mut rng_from_seed(cfg.seed))?;
            let fit = run_em(data, &init, &cfg)?;
            let labels = e_step(data, &fit.params)?.argmax();
            mixture_output(fit, labels)?
        }
        Algo::DeltaEm => {
            let mut cfg: DeltaEmConfig = read_config(config)?;
            cfg.k = k.unwrap_or(cfg.k);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let init = random_init(data, cfg.k, cfg.cov_floor, &mut rng_from_seed(cfg.seed))?;
            let fit = run_delta_em(data, &init, &cfg)?;
            let labels = fit.assignment.clone().expect("at least one δ-E step");
            mixture_output(fit, labels)?
        }
        Algo::Qem => {
            let mut cfg: QemConfig = read_config(config)?;
            cfg.k = k.unwrap_or(cfg.k);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let init = random_init(data, cfg.k, cfg.cov_floor, &mut rng_from_seed(cfg.seed))?;
            let fit = run_qem_emulation(data, &init, &cfg)?;
            let labels = fit.assignment.clone().unwrap_or_else(|| HardAssignment::new(vec![None; data.n()]));
            mixture_output(fit, labels)?
        }
        Algo::Kmeans | Algo::DeltaKmeans => {
            let s: KMeansSettings = read_config(config)?;
            let k = k.unwrap_or(2);
            let seed = seed.unwrap_or(0);
            let init = random_centroids(data, k, &mut rng_from_seed(seed))?;
            let fit = match algo {
                Algo::Kmeans => run_kmeans(data, &init, s.max_iters, s.tol, seed)?,
                _ => run_delta_kmeans(data, &init, s.delta, s.noise_var, s.max_iters, seed)?,
            };
            FitOutput {
                result: serde_json::to_value(&fit)?,
                k,
                trace_name: "wcss",
                trace: fit.wcss_trace.clone(),
                params: None,
                labels: fit.assignment(),
            }
        }
    };
    match out {
        Some(p) => write_json(&output.result, p)?,
        None => println!("{}", serde_json::to_string_pretty(&output.result)?),
    }
    if let Some(truth) = data.true_labels() {
        eprintln!("success rate {:.2}%", 100.0 * success_rate(&output.labels, truth, output.k)?);
    }
    if let Some(prefix) = plot {
        let table = Table::from_trace(output.trace_name, &output.trace);
        emit_plot_data(&table, &prefix.with_extension("trace.csv"), Some(ChartKind::Line))?;
        if data.dim() == 2 {
            emit_scatter(data, output.labels.labels(), output.params.as_ref(), &prefix.with_extension("scatter.csv"))?;
        }
    }
    Ok(())
}
