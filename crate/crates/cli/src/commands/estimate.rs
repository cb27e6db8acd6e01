use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use permlearn::estimators::{EstimateOutcome, Tally};
use serde::Serialize;

use crate::args::{load_mixture, EstimateArgs, Method};
use crate::data;
use crate::output::{emit, Artifacts, Manifest};

#[derive(Serialize)]
struct NamedOutcome {
    method: &'static str,
    #[serde(flatten)]
    outcome: EstimateOutcome,
}

#[derive(Serialize)]
struct Report {
    n: usize,
    k: usize,
    outcomes: Vec<NamedOutcome>,
}

type Estimator = fn(&Tally) -> permlearn::Result<EstimateOutcome>;

pub fn run(args: &EstimateArgs, out: &Path) -> Result<()> {
    let start = Instant::now();
    let model = load_mixture(&args.model)?;
    let samples = data::read_csv(&args.data)?;
    let tally = Tally::from_data(&model, &samples)
        .with_context(|| format!("tallying {}", args.data.display()))?;
    let methods: &[(&str, Estimator)] = match args.method {
        Method::Mle => &[("mle", Tally::mle)],
        Method::Mv => &[("mv", Tally::mv)],
        Method::Greedy => &[("greedy", Tally::greedy)],
        Method::All => &[
            ("mle", Tally::mle),
            ("greedy", Tally::greedy),
            ("mv", Tally::mv),
        ],
    };
    let outcomes = methods
        .iter()
        .map(|(name, f)| {
            Ok(NamedOutcome {
                method: name,
                outcome: f(&tally)?,
            })
        })
        .collect::<permlearn::Result<Vec<_>>>()?;
    let report = Report {
        n: tally.n(),
        k: model.k(),
        outcomes,
    };
    let mut artifacts = Artifacts::new(out)?;
    artifacts.add_json("estimate.json", &report)?;
    let config = serde_json::json!({
        "model": args.model,
        "data": args.data,
        "method": format!("{:?}", args.method).to_lowercase(),
    });
    artifacts.commit(Manifest::new(
        "estimate",
        config,
        vec![],
        start.elapsed().as_secs_f64(),
    ))?;
    emit(&serde_json::to_string_pretty(&report)?)
}
