use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use permlearn::harness::experiment_models;

use crate::args::GenArgs;
use crate::data;
use crate::output::{emit, Artifacts, Manifest};

pub fn run(args: &GenArgs, out: &Path) -> Result<()> {
    let start = Instant::now();
    let spec = args.spec.resolve()?;
    let (truth, pi_star, model) = experiment_models(&spec)?;

    let mut artifacts = Artifacts::new(out)?;
    artifacts.add_bytes("truth.json", (truth.to_json_string() + "\n").as_bytes())?;
    artifacts.add_bytes("model.json", (model.to_json_string() + "\n").as_bytes())?;
    if let Some(n) = args.samples {
        let samples = truth.sample_labeled(&pi_star, n, spec.seed)?;
        artifacts.add_bytes("data.csv", &data::to_csv(&samples, truth.dim())?)?;
    }
    let config = serde_json::json!({ "spec": spec, "samples": args.samples });
    let written = artifacts.commit(Manifest::new(
        "gen",
        config,
        vec![spec.seed],
        start.elapsed().as_secs_f64(),
    ))?;
    let listing: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    emit(&listing.join("\n"))
}
