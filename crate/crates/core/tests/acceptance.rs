//! End-to-end acceptance checks, one line per criterion. Exits non-zero if any fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qem_lab::bench::{
    delta_sweep_on, generate_example1, generate_example2, run_benchmark_on, Algorithm, Example, ExperimentConfig,
};
use qem_lab::cost::{
    condition_number, epsilon_budget, eta_values, mu_coherence, qem_runtime_estimate, DataMatrices, EpsilonBudget,
};
use qem_lab::delta_em::{run_delta_em_observed, DeltaEmConfig};
use qem_lab::distance::{DistanceOracle, Metric};
use qem_lab::em::{random_init, random_init_seeded, run_classification_em_observed, run_em, EmConfig};
use qem_lab::kmeans::{random_centroids, run_delta_kmeans, run_kmeans, DEFAULT_KMEANS_TOL};
use qem_lab::model::{gmm_log_likelihood, normalize_weights, repair_covariance};
use qem_lab::quantum::{
    hoeffding_samples, mode_evaluate, run_qem_emulation_observed, AeChannel, AeSampler, ModeEvalSpec, QemConfig,
    AE_SUCCESS,
};
use qem_lab::rng::rng_from_seed;
use qem_lab::{Dataset64, GmmParams64, HardAssignment, Matrix64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: qem_lab::Error) -> String {
    e.to_string()
}

fn best_rates(example: Example) -> Result<([f64; 4], Duration), String> {
    let started = Instant::now();
    let base = ExperimentConfig { example, ..ExperimentConfig::default() };
    let data = base.load_dataset().map_err(err)?;
    let mut out = [0.0; 4];
    for (slot, algorithm) in
        out.iter_mut().zip([Algorithm::Em, Algorithm::DeltaEm, Algorithm::Kmeans, Algorithm::DeltaKmeans])
    {
        let report = run_benchmark_on(&data, &ExperimentConfig { algorithm, ..base.clone() }).map_err(err)?;
        *slot = 100.0 * report.best.success_rate;
    }
    Ok((out, started.elapsed()))
}

fn example_one() -> Outcome {
    let ([em, dem, km, dkm], t) = best_rates(Example::I)?;
    let detail = format!(
        "EM {em:.1}, δ-EM {dem:.1}, k-means {km:.1}, δ-k-means {dkm:.1}, gap {:.1}, {:.1}s",
        dem - dkm,
        t.as_secs_f64()
    );
    let band = 65.0..=80.0;
    check(
        em >= 90.0
            && dem >= 90.0
            && band.contains(&km)
            && band.contains(&dkm)
            && dem - dkm >= 15.0
            && t < Duration::from_secs(120),
        detail,
    )
}

fn example_two() -> Outcome {
    let ([em, dem, km, dkm], _) = best_rates(Example::II)?;
    let detail = format!("EM {em:.1}, δ-EM {dem:.1}, k-means {km:.1}, δ-k-means {dkm:.1}, gap {:.1}", dem - dkm);
    check(em >= 84.0 && dem >= 84.0 && km <= 65.0 && dkm <= 65.0 && dem - dkm >= 25.0, detail)
}

fn delta_sweep_shape() -> Outcome {
    let base = ExperimentConfig { algorithm: Algorithm::DeltaEm, ..ExperimentConfig::default() };
    let data = base.load_dataset().map_err(err)?;
    let rows = delta_sweep_on(&data, &[0.05, 0.4, 16.0], &base).map_err(err)?;
    let r: Vec<f64> = rows.iter().map(|r| 100.0 * r.best_success_rate).collect();
    check(
        (r[1] - r[0]).abs() <= 2.0 && r[2] <= r[0] - 10.0,
        format!("δ=0.05: {:.1}, δ=0.4: {:.1}, δ=16: {:.1}", r[0], r[1], r[2]),
    )
}

/// Labels of the reference loop agree with the candidate on their common
/// prefix, and the candidate only repeats the reference's final labels after it.
fn same_label_sequence(candidate: &[HardAssignment], reference: &[HardAssignment]) -> bool {
    let n = candidate.len().min(reference.len());
    n > 0 && candidate[..n] == reference[..n] && candidate[n..].iter().all(|a| Some(a) == reference.last())
}

fn reductions() -> Outcome {
    let data: Dataset64 = generate_example1(300, 21).map_err(err)?;
    for seed in 0..10 {
        let init = random_centroids(&data, 2, &mut rng_from_seed(seed)).map_err(err)?;
        let plain = run_kmeans(&data, &init, 100, DEFAULT_KMEANS_TOL, seed).map_err(err)?;
        let delta = run_delta_kmeans(&data, &init, 0.0, 0.0, 100, seed).map_err(err)?;
        if plain != delta {
            return Err(format!("δ-k-means differs from k-means for seed {seed}"));
        }

        let init = random_init_seeded(&data, 2, seed).map_err(err)?;
        let ecfg = EmConfig { k: 2, seed, ..EmConfig::default() };
        let mut reference = Vec::new();
        run_classification_em_observed(&data, &init, &ecfg, |_, l| reference.push(l.clone())).map_err(err)?;

        let mut seq = Vec::new();
        let dcfg = DeltaEmConfig { seed, ..DeltaEmConfig::noiseless(2) };
        run_delta_em_observed(&data, &init, &dcfg, |_, l| seq.push(l.clone())).map_err(err)?;
        if !same_label_sequence(&seq, &reference) {
            return Err(format!("δ-EM labels differ from classification EM for seed {seed}"));
        }

        let mut seq = Vec::new();
        let qcfg = QemConfig { seed, ..QemConfig::noiseless(2) };
        run_qem_emulation_observed(&data, &init, &qcfg, |it| seq.push(it.assignment.clone())).map_err(err)?;
        if !same_label_sequence(&seq, &reference) {
            return Err(format!("q-EM labels differ from classification EM for seed {seed}"));
        }
    }
    Ok("k-means bit-for-bit, δ-EM and q-EM label sequences equal over 10 seeds".into())
}

fn em_monotone() -> Outcome {
    let (mut clean, mut skipped, mut seed) = (0, 0, 0u64);
    while clean < 50 {
        if seed >= 500 {
            return Err(format!("only {clean} runs without reseeds"));
        }
        let data: Dataset64 =
            if seed % 2 == 0 { generate_example1(300, seed) } else { generate_example2(300, seed) }.map_err(err)?;
        let cfg = EmConfig { k: 2, seed, ..EmConfig::default() };
        let init = random_init(&data, 2, cfg.cov_floor, &mut rng_from_seed(seed)).map_err(err)?;
        let fit = run_em(&data, &init, &cfg).map_err(err)?;
        seed += 1;
        if fit.reseeds > 0 {
            skipped += 1;
            continue;
        }
        if let Some(w) = fit.loglik_trace.windows(2).find(|w| w[1] < w[0] - 1e-9) {
            return Err(format!("seed {}: log-likelihood fell from {} to {}", seed - 1, w[0], w[1]));
        }
        clean += 1;
    }
    Ok(format!("50 runs nondecreasing ({skipped} with reseeds skipped)"))
}

fn ae_coverage() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut worst = f64::INFINITY;
    for p in [0.1, 0.3, 0.5, 0.9] {
        for grid in [16, 64] {
            let channel = AeChannel::new(grid).map_err(err)?;
            let sampler = AeSampler::new(p, channel).map_err(err)?;
            let bound = channel.error_bound(p);
            let n = 100_000;
            let hits = (0..n).filter(|_| (sampler.sample(&mut rng) - p).abs() <= bound).count();
            worst = worst.min(hits as f64 / n as f64);
        }
    }
    let zero = AeSampler::new(0.0, AeChannel::new(64).map_err(err)?).map_err(err)?;
    let zero_ok = (0..100_000).all(|_| zero.sample(&mut rng) == 0.0);
    check(
        worst >= AE_SUCCESS - 0.02 && zero_ok,
        format!("worst coverage {worst:.4} (need ≥ {:.4}), p=0 always 0: {zero_ok}", AE_SUCCESS - 0.02),
    )
}

fn mode_failure() -> Outcome {
    let spec = ModeEvalSpec::from_delta(0.01, AE_SUCCESS).map_err(err)?;
    let mut rng = rng_from_seed(7);
    let mut worst: f64 = 0.0;
    for p in [0.1, 0.3, 0.5, 0.9] {
        for grid in [16, 64] {
            let channel = AeChannel::new(grid).map_err(err)?;
            let sampler = AeSampler::new(p, channel).map_err(err)?;
            let bound = channel.error_bound(p);
            let repeats = 10_000;
            let mut failures = 0;
            for _ in 0..repeats {
                let samples: Vec<f64> = (0..spec.copies).map(|_| sampler.sample(&mut rng)).collect();
                if (mode_evaluate(&samples, &spec).map_err(err)? - p).abs() > bound {
                    failures += 1;
                }
            }
            worst = worst.max(failures as f64 / repeats as f64);
        }
    }
    check(worst <= 0.02, format!("L = {}, worst failure rate {worst:.4}", spec.copies))
}

fn eps1_consistency() -> Outcome {
    let data: Dataset64 = generate_example1(1000, 0).map_err(err)?;
    let delta = 0.2;
    let (eta_mu, eta_sigma) = eta_values(&data).map_err(err)?;
    let budget = epsilon_budget(delta, eta_mu, eta_sigma).map_err(err)?;
    let cfg = QemConfig { eps1: 0.4 * delta / 2.0, ..QemConfig::from_budget(2, delta, &budget).map_err(err)? };
    let init = random_init_seeded(&data, 2, 0).map_err(err)?;
    let (mut checked, mut violations, mut failure) = (0usize, 0usize, None);
    let fit = run_qem_emulation_observed(&data, &init, &cfg, |it| {
        let oracle = match DistanceOracle::new(it.params, Metric::Gmm) {
            Ok(o) => o,
            Err(e) => return failure = Some(e.to_string()),
        };
        for (i, y) in data.iter().enumerate() {
            if let (Some(l), true) = (it.assignment.label(i), it.within_eps1[i]) {
                let row = oracle.row(y);
                checked += 1;
                if row.values[l] - row.min() > delta {
                    violations += 1;
                }
            }
        }
    })
    .map_err(err)?;
    if let Some(e) = failure {
        return Err(e);
    }
    check(
        violations == 0 && checked > 0,
        format!("{checked} labels checked over {} iterations, {violations} violations", fit.iterations),
    )
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix64 {
    Matrix64::from_vec(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

fn cost_properties() -> Outcome {
    let mut rng = rng_from_seed(8);
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..7), rng.random_range(1..7));
        let m = random_matrix(&mut rng, r, c);
        let mu = mu_coherence(&m).map_err(err)?;
        if mu > m.frobenius_norm() * (1.0 + 1e-12) {
            return Err(format!("μ(M) = {mu} exceeds ‖M‖_F = {}", m.frobenius_norm()));
        }
    }
    let kappa = condition_number(&Matrix64::identity(3)).map_err(err)?;
    if (kappa - 1.0).abs() > 1e-12 {
        return Err(format!("κ(I) = {kappa}"));
    }

    let data: Dataset64 = generate_example1(1000, 0).map_err(err)?;
    let (eta_mu, eta_sigma) = eta_values(&data).map_err(err)?;
    if eta_sigma != eta_mu * eta_mu {
        return Err(format!("η^Σ = {eta_sigma} but (η^μ)² = {}", eta_mu * eta_mu));
    }

    let matrices = DataMatrices::from_dataset(&data);
    let base = epsilon_budget(0.2, eta_mu, eta_sigma).map_err(err)?;
    let total = |b: &EpsilonBudget| qem_runtime_estimate(&matrices, 2, b).map(|r| r.total).map_err(err);
    let setters: [fn(&mut EpsilonBudget, f64); 6] = [
        |b, f| b.eps1 *= f,
        |b, f| b.eps3_mu *= f,
        |b, f| b.eps4_mu *= f,
        |b, f| b.eps3_sigma *= f,
        |b, f| b.eps4_sigma *= f,
        |b, f| b.eps4_pi *= f,
    ];
    for (i, set) in setters.iter().enumerate() {
        let mut previous = total(&base)?;
        for factor in [1.5, 2.0, 4.0] {
            let mut b = base;
            set(&mut b, factor);
            let t = total(&b)?;
            if t >= previous || t.is_nan() {
                return Err(format!("total not decreasing in budget entry {i} at factor {factor}"));
            }
            previous = t;
        }
    }

    let n_pi = hoeffding_samples(2, 0.1, 0.05).map_err(err)?;
    let independent = (2.0f64 * 2.0 / 0.01 * (2.0 / (1.0 - 0.95f64.powf(0.5))).ln()).ceil() as usize;
    check(
        n_pi == independent,
        format!("μ ≤ ‖·‖_F on 1000 matrices, κ(I) = 1, η^Σ = (η^μ)², total decreasing in every ε, N_π = {n_pi}"),
    )
}

fn random_params(rng: &mut impl Rng, k: usize, d: usize) -> GmmParams64 {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let weights = normalize_weights(&raw).unwrap();
    let means = (0..k).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect();
    let covariances = (0..k)
        .map(|_| {
            let a = random_matrix(rng, d, d);
            a.matmul(&a.transpose()).unwrap().add_identity(0.1)
        })
        .collect();
    GmmParams64::new(weights, means, covariances).unwrap()
}

fn model_properties() -> Outcome {
    let mut rng = rng_from_seed(9);
    let data: Dataset64 = generate_example2(500, 1).map_err(err)?;
    for _ in 0..100 {
        let params = random_params(&mut rng, 3, 2);
        let ll = gmm_log_likelihood(&data, &params).map_err(err)?;
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let lp = gmm_log_likelihood(&data, &params.permuted(&perm)).map_err(err)?;
            if (lp - ll).abs() > 1e-9 * ll.abs().max(1.0) {
                return Err(format!("log-likelihood changed under permutation: {ll} vs {lp}"));
            }
        }
    }
    let jitter = 1e-6;
    for _ in 0..1000 {
        let d = rng.random_range(1..6);
        let m = random_matrix(&mut rng, d, d);
        let repaired = repair_covariance(&m, jitter);
        let oracle = DMatrix::from_row_slice(d, d, repaired.as_slice()).symmetric_eigen();
        let smallest = oracle.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest < jitter - 1e-12 {
            return Err(format!("repaired matrix has eigenvalue {smallest}"));
        }
    }
    for _ in 0..1000 {
        let k = rng.random_range(1..10);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..2.0)).chain([0.5]).collect();
        let w = normalize_weights(&raw).map_err(err)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(format!("normalised weights sum to {sum}"));
        }
    }
    Ok("permutation invariance, repaired spectrum ≥ jitter on 1000 matrices, weights sum to 1".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Example I benchmark", example_one),
        ("Example II benchmark", example_two),
        ("δ-sweep shape", delta_sweep_shape),
        ("reductions", reductions),
        ("EM monotonicity", em_monotone),
        ("amplitude-estimation coverage", ae_coverage),
        ("mode evaluation", mode_failure),
        ("ε₁ consistency", eps1_consistency),
        ("cost model properties", cost_properties),
        ("model properties", model_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {:>2}. {name}: {detail} [{:.1}s]", i + 1, started.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
