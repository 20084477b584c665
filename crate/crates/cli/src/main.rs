//! `dgnn`: dataset validation, training, ablations, sensitivity sweeps,
//! gradient checks and embedding export.

mod commands;
mod config;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_pairs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "dgnn", version, about = "Dual-graph denoising network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset, print its statistics and compare with a profile.
    Validate(RunArgs),
    /// Train one model per seed and write reports and parameters.
    Train(RunArgs),
    /// Train the full model and the A1, A2 and A3 variants.
    Ablate(RunArgs),
    /// Sweep epsilon, or lambda and alpha at fixed beta values.
    Sweep(SweepArgs),
    /// Compare tape gradients with finite differences on a random instance.
    Gradcheck(GradcheckArgs),
    /// Write the three embedding streams of a trained model.
    Export(ExportArgs),
}

/// Options shared by every subcommand. Later sources override earlier
/// ones: defaults, profile, config file, flags.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding graph.edges, features.csv and labels.csv.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Named dataset profile (cora, citeseer, chameleon, squirrel, computers, photo).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    /// `network` (with activations) or `analytic`.
    #[arg(long)]
    mode: Option<String>,
    /// Semantic-graph neighbours per node.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    row_normalize: Option<bool>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Maximum training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// A count N (seeds 0..N) or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    /// A1, A2 or A3.
    #[arg(long)]
    ablation: Option<String>,
    /// Worker threads for multi-seed runs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Memory budget per forward pass, e.g. 8G or 512M.
    #[arg(long)]
    mem_budget: Option<String>,
}

impl RunArgs {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("dataset", show(&self.dataset));
        push("profile", self.profile.clone());
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("beta", self.beta.map(|v| v.to_string()));
        push("epsilon", self.epsilon.map(|v| v.to_string()));
        push("layers", self.layers.map(|v| v.to_string()));
        push("mode", self.mode.clone());
        push("k", self.k.map(|v| v.to_string()));
        push("row_normalize", self.row_normalize.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("dropout", self.dropout.map(|v| v.to_string()));
        push("max_epochs", self.epochs.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("weight_decay", self.weight_decay.map(|v| v.to_string()));
        push("seeds", self.seeds.clone());
        push("ablation", self.ablation.clone());
        push("jobs", self.jobs.map(|v| v.to_string()));
        push("out", show(&self.out));
        push("mem_budget", self.mem_budget.clone());
        pairs
    }

    /// Resolves the full configuration and checks it.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
                parse_pairs(&text).map_err(|e| e.context(format!("in {}", path.display())))?
            }
            None => Vec::new(),
        };
        let flags = self.flag_pairs();
        // A profile or ablation given on the command line replaces the file's.
        for key in ["profile", "ablation"] {
            if flags.iter().any(|(k, _)| k == key) {
                pairs.retain(|(k, _)| k != key);
            }
        }
        pairs.extend(flags);
        for key in ["profile", "ablation"] {
            let last = pairs.iter().rposition(|(k, _)| k == key);
            pairs = pairs
                .into_iter()
                .enumerate()
                .filter(|(i, (k, _))| k != key || Some(*i) == last)
                .map(|(_, p)| p)
                .collect();
        }
        let mut cfg = RunConfig::default();
        cfg.apply_pairs(&pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Epsilon,
    LambdaAlpha,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "epsilon")]
    axis: Axis,
    /// Comma-separated values; defaults to 0.1..0.9 for epsilon and
    /// 0.5..3.5 in steps of 0.5 for lambda and alpha.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Fixed beta values for the lambda-alpha grid.
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Parameter file written by `train`; trains the first seed when absent.
    #[arg(long)]
    params: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Train(a) => commands::train(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Export(a) => commands::export(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
