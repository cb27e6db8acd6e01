//! Command-line definitions and spec resolution (flags > spec file > defaults).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use permlearn::harness::{ExperimentSpec, Family, PerturbOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "permlearn",
    version,
    about = "Semi-supervised permutation learning over mixing measures"
)]
pub struct Cli {
    /// Directory for written artifacts.
    #[arg(long, global = true, env = "PERMLEARN_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a true mixing measure and the model used for estimation.
    Gen(GenArgs),
    /// Estimate the class-to-region permutation from labeled data.
    Estimate(EstimateArgs),
    /// Gaps, bounds, Wasserstein distances and risk.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo recovery curves for all three estimators.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    GaussianGrid,
    GaussianGridPerturbed,
    MixtureOfMixtures,
    MixtureOfMixturesPerturbed,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::GaussianGrid => Family::GaussianGrid,
            FamilyArg::GaussianGridPerturbed => Family::GaussianGridPerturbed,
            FamilyArg::MixtureOfMixtures => Family::MixtureOfMixtures,
            FamilyArg::MixtureOfMixturesPerturbed => Family::MixtureOfMixturesPerturbed,
        }
    }
}

/// Experiment settings shared by `gen` and `experiment`.
#[derive(Debug, Args)]
pub struct SpecArgs {
    /// JSON spec file; individual flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Sample sizes: `start:end:step` or a comma list.
    #[arg(long, value_parser = parse_n_grid)]
    pub n_grid: Option<NGrid>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Probability of replacing a label by a random wrong one.
    #[arg(long)]
    pub label_noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of the per-coordinate mean shift (perturbed families).
    #[arg(long)]
    pub mean_shift_sd: Option<f64>,
    /// Custom family: true mixture JSON (requires --model-file).
    #[arg(long, requires = "model_file")]
    pub truth_file: Option<PathBuf>,
    /// Custom family: model mixture JSON (requires --truth-file).
    #[arg(long, requires = "truth_file")]
    pub model_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Also write this many labeled samples from the truth to data.csv.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mle,
    Mv,
    Greedy,
    All,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Mixing measure JSON used for estimation.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled data CSV with header x_1,...,x_d,y and 1-based labels.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorollaryKind {
    Mle,
    Mv,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Mixing measure Λ under analysis.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// True mixing measure Λ* (defaults to the model).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True permutation π* as 1-based images, e.g. `2,1,3` (default identity).
    #[arg(long, value_parser = parse_perm)]
    pub perm: Option<std::vec::Vec<usize>>,
    /// Permutation evaluated by --risk (default identity).
    #[arg(long, value_parser = parse_perm)]
    pub pi_hat: Option<std::vec::Vec<usize>>,
    #[arg(long, default_value_t = 100_000)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub gap_mle: bool,
    #[arg(long)]
    pub gap_mv: bool,
    /// MLE recovery bound at --counts, with the MC dual at Δ_MLE/3.
    #[arg(long, requires = "counts")]
    pub thm1: bool,
    /// MV recovery bound at --counts.
    #[arg(long, requires = "counts")]
    pub thm2: bool,
    /// Per-class (thm1) or per-region (thm2) counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Wasserstein-1 distance between two mixture files.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub w1: Option<Vec<PathBuf>>,
    /// Sample-size requirement from the closed-form corollaries.
    #[arg(long, value_enum, requires = "k")]
    pub corollary: Option<CorollaryKind>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Δ_MV for `--corollary mv`.
    #[arg(long)]
    pub gap: Option<f64>,
    /// inf_b β*_b(Δ_MLE/3) for `--corollary mle`.
    #[arg(long)]
    pub dual: Option<f64>,
    /// Misclassification, Bayes and excess risk of (model, --pi-hat).
    #[arg(long)]
    pub risk: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NGrid(pub Vec<usize>);

fn parse_n_grid(s: &str) -> Result<NGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [a, b, c] => {
            let (a, b, c) = (num(a)?, num(b)?, num(c)?);
            if c == 0 {
                return Err("step must be positive".into());
            }
            Ok(NGrid((a..=b).step_by(c).collect()))
        }
        [_] => s.split(',').map(num).collect::<Result<_, _>>().map(NGrid),
        _ => Err(format!(
            "expected start:end:step or a comma list, got {s:?}"
        )),
    }
}

fn parse_perm(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// Spec file contents; every field optional so flags can fill the rest.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    family: Option<Family>,
    k: Option<usize>,
    dim: Option<usize>,
    eta: Option<f64>,
    n_grid: Option<Vec<usize>>,
    trials: Option<usize>,
    label_noise: Option<f64>,
    seed: Option<u64>,
    perturb: Option<PerturbOptions>,
}

fn read_mixture(path: &Path) -> Result<permlearn::MixingMeasure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    permlearn::MixingMeasure::from_json_str(&text)
        .with_context(|| format!("parsing mixture {}", path.display()))
}

impl SpecArgs {
    /// Defaults, then the spec file, then flags.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::default();
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            let file: SpecFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing spec {}", path.display()))?;
            if let Some(v) = file.family {
                spec.family = v;
            }
            if let Some(v) = file.k {
                spec.k = v;
            }
            if let Some(v) = file.dim {
                spec.dim = v;
            }
            if let Some(v) = file.eta {
                spec.eta = v;
            }
            if let Some(v) = file.n_grid {
                spec.n_grid = v;
            }
            if let Some(v) = file.trials {
                spec.trials = v;
            }
            if let Some(v) = file.label_noise {
                spec.label_noise = v;
            }
            if let Some(v) = file.seed {
                spec.seed = v;
            }
            if let Some(v) = file.perturb {
                spec.perturb = v;
            }
        }
        if let Some(f) = self.family {
            if self.truth_file.is_some() {
                bail!("--family conflicts with --truth-file/--model-file");
            }
            spec.family = f.into();
        }
        if let (Some(t), Some(m)) = (&self.truth_file, &self.model_file) {
            let truth = read_mixture(t)?;
            let model = read_mixture(m)?;
            spec.k = truth.k();
            spec.dim = truth.dim();
            spec.family = Family::Custom { truth, model };
        }
        if let Some(v) = self.k {
            spec.k = v;
        }
        if let Some(v) = self.dim {
            spec.dim = v;
        }
        if let Some(v) = self.eta {
            spec.eta = v;
        }
        if let Some(v) = &self.n_grid {
            spec.n_grid = v.0.clone();
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.label_noise {
            spec.label_noise = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.mean_shift_sd {
            spec.perturb.mean_shift_sd = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn load_mixture(path: &Path) -> Result<permlearn::MixingMeasure> {
    read_mixture(path)
}
