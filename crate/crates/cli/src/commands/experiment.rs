use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use permlearn::harness::{curve_csv_string, run_recovery_experiment, spec_json, EstimatorKind};

use crate::args::ExperimentArgs;
use crate::output::{emit, Artifacts, Manifest};

pub fn run(args: &ExperimentArgs, out: &Path) -> Result<()> {
    let start = Instant::now();
    let spec = args.spec.resolve()?;
    let curve = run_recovery_experiment(&spec)?;

    let mut artifacts = Artifacts::new(out)?;
    artifacts.add_bytes("recovery.csv", curve_csv_string(&curve)?.as_bytes())?;
    artifacts.add_bytes("recovery_spec.json", (spec_json(&spec) + "\n").as_bytes())?;
    let config = serde_json::to_value(&spec)?;
    artifacts.commit(Manifest::new(
        "experiment",
        config,
        vec![spec.seed],
        start.elapsed().as_secs_f64(),
    ))?;

    let n_max = *spec.n_grid.last().expect("validated grid");
    let summary: Vec<String> = EstimatorKind::ALL
        .into_iter()
        .filter_map(|est| curve.point(est, n_max).map(|p| (est, p)))
        .map(|(est, p)| {
            format!(
                "{:>6}  n={n_max:<4} recovery={:.3}",
                est.name(),
                p.frequency()
            )
        })
        .collect();
    emit(&summary.join("\n"))
}
