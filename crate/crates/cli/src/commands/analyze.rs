//! `analyze`: every requested report lands in one JSON object keyed by
//! analysis name, together with the Monte-Carlo budget and seed.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use permlearn::analysis::{
    beta_star_inf, bound_report, corollary_n, estimate_gap_mle, estimate_gap_mv, group_requirement,
    misclassification_rate, wasserstein1, BoundKind, TvMethod,
};
use permlearn::{MixingMeasure, Permutation};
use serde_json::{json, Map, Value};

use crate::args::{load_mixture, AnalyzeArgs, CorollaryKind};
use crate::output::{emit, Artifacts, Manifest};

fn perm_or_identity(images: &Option<Vec<usize>>, k: usize) -> Result<Permutation> {
    match images {
        Some(v) => Ok(Permutation::from_one_based(v)?),
        None => Ok(Permutation::identity(k)),
    }
}

struct Models {
    model: MixingMeasure,
    truth: MixingMeasure,
    pi_star: Permutation,
}

fn models(args: &AnalyzeArgs) -> Result<Models> {
    let Some(path) = &args.model else {
        bail!("this analysis needs --model");
    };
    let model = load_mixture(path)?;
    let truth = match &args.truth {
        Some(p) => load_mixture(p)?,
        None => model.clone(),
    };
    let pi_star = perm_or_identity(&args.perm, truth.k())?;
    Ok(Models {
        model,
        truth,
        pi_star,
    })
}

pub fn run(args: &AnalyzeArgs, out: &Path) -> Result<()> {
    let start = Instant::now();
    let mut report = Map::new();
    report.insert("mc_samples".into(), json!(args.mc));
    report.insert("seed".into(), json!(args.seed));
    let needs_models = args.gap_mle || args.gap_mv || args.thm1 || args.thm2 || args.risk;
    let m = if needs_models {
        Some(models(args)?)
    } else {
        None
    };
    let (mc, seed) = (args.mc, args.seed);

    if let Some(m) = &m {
        let mut mle_gap = None;
        if args.gap_mle || args.thm1 {
            let g = estimate_gap_mle(&m.model, &m.truth, &m.pi_star, mc, seed)?;
            mle_gap = Some(g.gap.value);
            if args.gap_mle {
                report.insert("gap_mle".into(), serde_json::to_value(&g)?);
            }
        }
        let mut mv_gap = None;
        if args.gap_mv || args.thm2 {
            let g = estimate_gap_mv(&m.model, &m.truth, &m.pi_star, mc, seed)?;
            mv_gap = Some(g.gap.value);
            if args.gap_mv {
                report.insert("gap_mv".into(), serde_json::to_value(&g)?);
            }
        }
        let counts = args.counts.clone().unwrap_or_default();
        if args.thm1 {
            let gap = mle_gap.expect("computed above");
            if gap <= 0.0 {
                bail!("estimated MLE gap {gap} is not positive; the MLE bound is vacuous");
            }
            let dual = beta_star_inf(&m.model, &m.truth, gap / 3.0, mc, seed)?;
            let mut b = bound_report(BoundKind::Mle, m.model.k(), args.delta, dual.value, &counts)
                .context("MLE bound")?;
            b.gap = Some(gap);
            report.insert(
                "thm1".into(),
                json!({ "bound": b, "dual": dual, "mc_samples": mc, "seed": seed }),
            );
        }
        if args.thm2 {
            let gap = mv_gap.expect("computed above");
            let b = bound_report(BoundKind::Mv, m.model.k(), args.delta, gap, &counts)
                .context("MV bound")?;
            report.insert(
                "thm2".into(),
                json!({ "bound": b, "mc_samples": mc, "seed": seed }),
            );
        }
        if args.risk {
            let pi = perm_or_identity(&args.pi_hat, m.model.k())?;
            let r = misclassification_rate(&m.model, &pi, &m.truth, &m.pi_star, mc, seed)?;
            report.insert("risk".into(), serde_json::to_value(&r)?);
        }
    }

    if let Some(paths) = &args.w1 {
        let a = load_mixture(&paths[0])?;
        let b = load_mixture(&paths[1])?;
        let w = wasserstein1(&a, &b, TvMethod::auto(a.dim(), mc, seed))?;
        report.insert("w1".into(), serde_json::to_value(&w)?);
    }

    if let Some(kind) = args.corollary {
        let k = args.k.expect("clap enforces --k");
        let (kind, value) = match kind {
            CorollaryKind::Mv => (
                BoundKind::Mv,
                args.gap.context("--corollary mv needs --gap")?,
            ),
            CorollaryKind::Mle => (
                BoundKind::Mle,
                args.dual.context("--corollary mle needs --dual")?,
            ),
        };
        let n = corollary_n(k, args.delta, kind, value)?;
        let group = group_requirement(k, args.delta, kind, value)?;
        report.insert(
            "corollary".into(),
            json!({
                "kind": kind,
                "k": k,
                "delta": args.delta,
                "value": value,
                "required_n": n,
                "group_requirement": group,
            }),
        );
    }

    if report.len() == 2 {
        bail!("nothing to analyze; pass --gap-mle, --gap-mv, --thm1, --thm2, --w1, --corollary or --risk");
    }
    let report = Value::Object(report);

    let mut artifacts = Artifacts::new(out)?;
    artifacts.add_json("analysis.json", &report)?;
    let config = json!({
        "model": args.model,
        "truth": args.truth,
        "perm": args.perm,
        "pi_hat": args.pi_hat,
        "mc": mc,
        "seed": seed,
        "delta": args.delta,
        "counts": args.counts,
        "w1": args.w1,
        "corollary": args.corollary.map(|c| format!("{c:?}").to_lowercase()),
        "k": args.k,
        "gap": args.gap,
        "dual": args.dual,
        "flags": {
            "gap_mle": args.gap_mle, "gap_mv": args.gap_mv,
            "thm1": args.thm1, "thm2": args.thm2, "risk": args.risk,
        },
    });
    artifacts.commit(Manifest::new(
        "analyze",
        config,
        vec![seed],
        start.elapsed().as_secs_f64(),
    ))?;
    emit(&serde_json::to_string_pretty(&report)?)
}
