//! Best-of-100 success rates of the four classical algorithms on both examples.

use qem_lab::bench::{run_benchmark_on, Algorithm, Example, ExperimentConfig};

fn main() -> qem_lab::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for example in [Example::I, Example::II] {
        let base = ExperimentConfig { example, seed, ..ExperimentConfig::default() };
        let data = base.load_dataset()?;
        for algorithm in [Algorithm::Em, Algorithm::DeltaEm, Algorithm::Kmeans, Algorithm::DeltaKmeans] {
            let t = std::time::Instant::now();
            let report = run_benchmark_on(&data, &ExperimentConfig { algorithm, ..base.clone() })?;
            println!(
                "{example:?} {algorithm:?}: {:.1}% (trial {}, {:.1?})",
                100.0 * report.best.success_rate,
                report.best.trial,
                t.elapsed()
            );
        }
    }
    Ok(())
}
