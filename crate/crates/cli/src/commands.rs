use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use dgnn::datasets::{export_embeddings, load_dataset, summarize};
use dgnn::layer::{ablation_config, Ablation, DgnnHyperparams};
use dgnn::oracle::{check_training_gradients, FdConfig, GradCheckSpec};
use dgnn::profiles::profile;
use dgnn::train::{
    epsilon_grid, infer, prepare, report_csv, report_markdown, sweep as run_sweep, train_seeds, PreparedGraph,
    SweepAxis, TrialSummary, SENSITIVITY_BETAS, SENSITIVITY_RANGE,
};

use crate::config::RunConfig;
use crate::params;
use crate::{Axis, ExportArgs, GradcheckArgs, RunArgs, SweepArgs};

/// Exit status for a dataset that disagrees with its profile or a failed
/// gradient check.
const MISMATCH: u8 = 2;

fn load_prepared(cfg: &RunConfig) -> Result<PreparedGraph> {
    let dir = cfg.dataset.as_ref().context("no dataset given (use --dataset or `dataset =` in the config)")?;
    let graph = load_dataset(dir)?;
    Ok(prepare(&graph, cfg.prepare_options())?)
}

fn create_out(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn trials(data: &PreparedGraph, hp: &DgnnHyperparams, cfg: &RunConfig) -> Result<TrialSummary> {
    let runs = train_seeds(data, hp, &cfg.train, &cfg.seeds, cfg.jobs)?;
    Ok(TrialSummary::from_reports(runs.into_iter().map(|(_, r)| r).collect()))
}

pub fn validate(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let dir = cfg.dataset.as_ref().context("no dataset given")?;
    let summary = summarize(&load_dataset(dir)?);
    println!("{summary}");
    let Some(name) = &cfg.profile else {
        return Ok(ExitCode::SUCCESS);
    };
    let mismatches = profile(name)?.stats.mismatches(&summary);
    if mismatches.is_empty() {
        println!("matches profile {name}");
        return Ok(ExitCode::SUCCESS);
    }
    for (field, expected, found) in mismatches {
        println!("mismatch {field}: expected {expected}, found {found}");
    }
    Ok(ExitCode::from(MISMATCH))
}

pub fn train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let data = load_prepared(&cfg)?;
    let runs = train_seeds(&data, &cfg.hp, &cfg.train, &cfg.seeds, cfg.jobs)?;
    let out = create_out(&cfg)?;
    write(out, "config.txt", cfg.to_text())?;
    for (model, report) in &runs {
        params::save(model, &out.join(format!("params-seed{}.bin", report.seed)))?;
    }
    let summary = TrialSummary::from_reports(runs.into_iter().map(|(_, r)| r).collect());
    write(out, "report.csv", report_csv(&summary.reports))?;
    write(out, "report.md", report_markdown(&cfg.title(), &summary))?;
    for r in &summary.reports {
        println!(
            "seed {} best epoch {} val {:.4} test {:.4}",
            r.seed,
            r.best_epoch,
            r.best().val_acc,
            r.test_accuracy
        );
    }
    println!("{} test accuracy {}", cfg.title(), summary.formatted());
    Ok(ExitCode::SUCCESS)
}

pub fn ablate(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    if args.ablation.is_some() {
        bail!("ablate runs every variant; drop --ablation");
    }
    let data = load_prepared(&cfg)?;
    let variants = [
        ("full", cfg.hp.clone()),
        ("A1", ablation_config(Ablation::A1, &cfg.hp)),
        ("A2", ablation_config(Ablation::A2, &cfg.hp)),
        ("A3", ablation_config(Ablation::A3, &cfg.hp)),
    ];
    let mut csv = String::from("variant,lambda,alpha,beta,epsilon,mean,std\n");
    let mut cells = Vec::new();
    for (name, hp) in &variants {
        let s = trials(&data, hp, &cfg)?;
        writeln!(csv, "{name},{},{},{},{},{:.6},{:.6}", hp.lambda, hp.alpha, hp.beta, hp.epsilon, s.mean, s.std)
            .unwrap();
        println!("{name} {}", s.formatted());
        cells.push(s.formatted());
    }
    let md = format!(
        "| Dataset | full | A1 | A2 | A3 |\n|---|---|---|---|---|\n| {} | {} |\n",
        cfg.title(),
        cells.join(" | ")
    );
    let out = create_out(&cfg)?;
    write(out, "config.txt", cfg.to_text())?;
    write(out, "ablation.csv", csv)?;
    write(out, "ablation.md", md)?;
    Ok(ExitCode::SUCCESS)
}

fn default_grid() -> Vec<f64> {
    let (lo, hi) = SENSITIVITY_RANGE;
    let steps = ((hi - lo) / 0.5).round() as usize;
    (0..=steps).map(|i| lo + 0.5 * i as f64).collect()
}

fn or_default(values: &[f64], default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
    if values.is_empty() {
        default()
    } else {
        values.to_vec()
    }
}

pub fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let cfg = args.run.resolve()?;
    if cfg.seeds.len() < 2 {
        bail!("a sweep needs at least 2 seeds");
    }
    let data = load_prepared(&cfg)?;
    let out = create_out(&cfg)?;
    write(out, "config.txt", cfg.to_text())?;
    match args.axis {
        Axis::Epsilon => {
            let axis = SweepAxis::Epsilon(or_default(&args.values, epsilon_grid));
            let mut csv = String::from("epsilon,mean,std\n");
            for p in run_sweep(&data, &cfg.hp, &axis, &cfg.train, &cfg.seeds, cfg.jobs)? {
                writeln!(csv, "{},{:.6},{:.6}", p.hp.epsilon, p.summary.mean, p.summary.std).unwrap();
                println!("epsilon {} {}", p.hp.epsilon, p.summary.formatted());
            }
            write(out, "sweep_epsilon.csv", csv)?;
        }
        Axis::LambdaAlpha => {
            let lambdas = or_default(&args.lambdas, default_grid);
            let alphas = or_default(&args.alphas, default_grid);
            for beta in or_default(&args.betas, || SENSITIVITY_BETAS.to_vec()) {
                let axis = SweepAxis::LambdaAlpha {
                    beta,
                    lambdas: lambdas.clone(),
                    alphas: alphas.clone(),
                };
                let mut csv = String::from("lambda,alpha,mean,std\n");
                for p in run_sweep(&data, &cfg.hp, &axis, &cfg.train, &cfg.seeds, cfg.jobs)? {
                    writeln!(csv, "{},{},{:.6},{:.6}", p.hp.lambda, p.hp.alpha, p.summary.mean, p.summary.std)
                        .unwrap();
                    println!("beta {beta} lambda {} alpha {} {}", p.hp.lambda, p.hp.alpha, p.summary.formatted());
                }
                write(out, &format!("sweep_beta_{beta}.csv"), csv)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    let cfg = args.run.resolve()?;
    let fd = FdConfig {
        step: args.step,
        tolerance: args.tolerance,
        ..FdConfig::default()
    };
    fd.validate()?;
    let spec = GradCheckSpec {
        nodes: args.nodes,
        dim: args.dim,
        classes: args.classes,
        seed: args.instance_seed,
    };
    let check = check_training_gradients(spec, &cfg.hp, &fd)?;
    let verdict = if check.passed(&fd) { "PASS" } else { "FAIL" };
    println!("{verdict} rel_err={:.3e} elements={}", check.max_rel_err, check.elements);
    Ok(if check.passed(&fd) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(MISMATCH)
    })
}

pub fn export(args: &ExportArgs) -> Result<ExitCode> {
    let cfg = args.run.resolve()?;
    let data = load_prepared(&cfg)?;
    let model = match &args.params {
        Some(path) => params::load(path)?,
        None => {
            let seed = cfg.seeds[0];
            let (model, report) = train_seeds(&data, &cfg.hp, &cfg.train, &[seed], 1)?.remove(0);
            println!("seed {seed} test accuracy {:.4}", report.test_accuracy);
            model
        }
    };
    if model.factor.dim() != data.feature_dim() {
        bail!(
            "parameters expect {} features, dataset has {}",
            model.factor.dim(),
            data.feature_dim()
        );
    }
    if model.classifier.classes() != data.classes {
        bail!(
            "parameters expect {} classes, dataset has {}",
            model.classifier.classes(),
            data.classes
        );
    }
    let (emb, _) = infer(&data, &model, &cfg.hp)?;
    let out = create_out(&cfg)?;
    let path = out.join("embeddings.csv");
    export_embeddings(&emb, &data.labels, &path)?;
    println!("wrote {} rows to {}", data.node_count(), path.display());
    Ok(ExitCode::SUCCESS)
}
