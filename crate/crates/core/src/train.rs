//! Semi-supervised training: splits, classifier head, optimization and
//! the multi-seed protocols built on top.

use std::fmt::Write as _;
use std::rc::Rc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DiffMatrix, Tape};
use crate::error::{Error, Result};
use crate::graph::{cosine_similarity, laplacian, normalize, row_normalize, semantic_graph, Graph};
use crate::layer::{
    check_memory_budget, forward, objective_value, DgnnHyperparams, Embeddings, ReconFactor, DEFAULT_MEMORY_BUDGET,
};

const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Disjoint train/validation/test node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn subset(&self, which: Subset) -> &[usize] {
        match which {
            Subset::Train => &self.train,
            Subset::Val => &self.val,
            Subset::Test => &self.test,
        }
    }
}

/// Seeded 60/20/20 split; rounding leftovers go to test.
pub fn make_split(n: usize, seed: u64) -> Result<Split> {
    if n < 5 {
        return Err(Error::Config(format!("a split needs at least 5 nodes, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

/// `softmax(Z W_c + b)` head. `W_c` is `3D × c`; its row blocks act on
/// `F`, `H` and `H_f` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w_c: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl ClassifierParams {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        ClassifierParams {
            w_c: DMatrix::zeros(3 * dim, classes),
            b: DMatrix::zeros(1, classes),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(dim: usize, classes: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (3 * dim + classes) as f64).sqrt();
        ClassifierParams {
            w_c: DMatrix::from_fn(3 * dim, classes, |_, _| rng.random_range(-limit..limit)),
            b: DMatrix::zeros(1, classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.w_c.ncols()
    }

    /// Block `i` as a `c × D` matrix, so `Z W_c = Σ_i P_i W_iᵀ`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let d = self.w_c.nrows() / 3;
        self.w_c.rows(i * d, d).transpose()
    }
}

/// `[F, H, H_f]`.
pub fn concat(state: &Embeddings) -> Result<DMatrix<f64>> {
    let (n, d) = state.f.shape();
    for m in [&state.h, &state.hf] {
        if m.shape() != (n, d) {
            return Err(Error::Shape {
                op: "concat",
                lhs: (n, d),
                rhs: m.shape(),
            });
        }
    }
    let mut z = DMatrix::zeros(n, 3 * d);
    z.columns_mut(0, d).copy_from(&state.f);
    z.columns_mut(d, d).copy_from(&state.h);
    z.columns_mut(2 * d, d).copy_from(&state.hf);
    Ok(z)
}

/// `Z W_c + b`.
pub fn logits(z: &DMatrix<f64>, cp: &ClassifierParams) -> Result<DMatrix<f64>> {
    if z.ncols() != cp.w_c.nrows() || cp.b.shape() != (1, cp.classes()) {
        return Err(Error::Shape {
            op: "logits",
            lhs: z.shape(),
            rhs: cp.w_c.shape(),
        });
    }
    let mut out = z * &cp.w_c;
    for mut row in out.row_iter_mut() {
        row += &cp.b;
    }
    Ok(out)
}

/// Row-wise softmax of the logits.
pub fn predict(z: &DMatrix<f64>, cp: &ClassifierParams) -> Result<DMatrix<f64>> {
    let mut p = logits(z, cp)?;
    for mut row in p.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    Ok(p)
}

fn argmax_rows(m: &DMatrix<f64>) -> Vec<usize> {
    m.row_iter().map(|r| r.transpose().argmax().0).collect()
}

fn accuracy(pred: &[usize], labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyMask("evaluation subset"));
    }
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(hits as f64 / idx.len() as f64)
}

/// Operators and inputs derived once from a graph.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub x: DMatrix<f64>,
    pub a_hat: DMatrix<f64>,
    pub a_hat_f: DMatrix<f64>,
    pub lap: DMatrix<f64>,
    pub lap_f: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Feature preprocessing and semantic-graph settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    /// Neighbours kept per node in the semantic graph.
    pub k: usize,
    /// Scale feature rows to unit L1 norm.
    pub row_normalize: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            k: 5,
            row_normalize: true,
        }
    }
}

pub fn prepare(graph: &Graph, opts: PrepareOptions) -> Result<PreparedGraph> {
    let x = if opts.row_normalize {
        row_normalize(graph.features())
    } else {
        graph.features().clone()
    };
    let a = normalize(&graph.adjacency());
    let af = semantic_graph(&cosine_similarity(&x), opts.k)?.into_normalized();
    Ok(PreparedGraph {
        lap: laplacian(&a),
        lap_f: laplacian(&af),
        a_hat: a.into_inner(),
        a_hat_f: af.into_inner(),
        x,
        labels: graph.labels().to_vec(),
        classes: graph.class_count(),
    })
}

impl PreparedGraph {
    pub fn node_count(&self) -> usize {
        self.x.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
    pub weight_decay: f64,
    pub seed: u64,
    /// Bytes available to one forward/backward pass.
    pub memory_budget: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            dropout: 0.0,
            max_epochs: 500,
            patience: 100,
            weight_decay: 5e-4,
            seed: 0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Layer objective at the eval-mode embeddings.
    pub objective: f64,
    /// Training cross-entropy, with dropout.
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the first maximum of validation accuracy.
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Everything learned: the reconstruction factor and the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub factor: ReconFactor,
    pub classifier: ClassifierParams,
}

struct Adam {
    lr: f64,
    weight_decay: f64,
    t: i32,
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, weight_decay: f64, params: &[&DMatrix<f64>]) -> Self {
        let zeros = |p: &&DMatrix<f64>| DMatrix::zeros(p.nrows(), p.ncols());
        Adam {
            lr,
            weight_decay,
            t: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    fn step(&mut self, params: &mut [&mut DMatrix<f64>], grads: &[DMatrix<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = g[i] + self.weight_decay * p[i];
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * gi;
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * gi * gi;
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

struct Operators {
    x: Rc<DMatrix<f64>>,
    a_hat: Rc<DMatrix<f64>>,
    a_hat_f: Rc<DMatrix<f64>>,
}

impl Operators {
    fn new(data: &PreparedGraph) -> Self {
        Operators {
            x: Rc::new(data.x.clone()),
            a_hat: Rc::new(data.a_hat.clone()),
            a_hat_f: Rc::new(data.a_hat_f.clone()),
        }
    }

    fn embed(&self, w: &DMatrix<f64>, hp: &DgnnHyperparams) -> Result<Embeddings> {
        let tape = Tape::new();
        let x = tape.constant_shared(self.x.clone());
        let a = tape.constant_shared(self.a_hat.clone());
        let af = tape.constant_shared(self.a_hat_f.clone());
        let w = tape.constant(w.clone());
        Ok(forward(x, a, af, w, hp)?.values())
    }
}

/// Embeddings and class probabilities in eval mode.
pub fn infer(data: &PreparedGraph, model: &TrainedModel, hp: &DgnnHyperparams) -> Result<(Embeddings, DMatrix<f64>)> {
    let state = Operators::new(data).embed(model.factor.w(), hp)?;
    let p = predict(&concat(&state)?, &model.classifier)?;
    Ok((state, p))
}

/// Accuracy on one subset, in eval mode.
pub fn evaluate(
    data: &PreparedGraph,
    model: &TrainedModel,
    hp: &DgnnHyperparams,
    split: &Split,
    which: Subset,
) -> Result<f64> {
    let (_, p) = infer(data, model, hp)?;
    accuracy(&argmax_rows(&p), &data.labels, split.subset(which))
}

fn check_split(split: &Split, n: usize) -> Result<()> {
    for (name, idx) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if idx.is_empty() {
            return Err(Error::EmptyMask(name));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Config(format!("{name} split holds node {bad} but the graph has {n}")));
        }
    }
    Ok(())
}

/// Training loss for given parameters: the masked cross-entropy with
/// dropout driven by `rng`.
pub fn training_loss<'t, R: Rng + ?Sized>(
    x: DiffMatrix<'t>,
    a_hat: DiffMatrix<'t>,
    a_hat_f: DiffMatrix<'t>,
    w: DiffMatrix<'t>,
    w_c: DiffMatrix<'t>,
    b: DiffMatrix<'t>,
    labels: &[usize],
    mask: &[usize],
    hp: &DgnnHyperparams,
    dropout: f64,
    rng: &mut R,
) -> Result<DiffMatrix<'t>> {
    let x = x.dropout(dropout, rng, true)?;
    let s = forward(x, a_hat, a_hat_f, w, hp)?;
    let z = DiffMatrix::concat_cols(&[s.f, s.h, s.hf])?.dropout(dropout, rng, true)?;
    z.matmul(w_c)?.add_row(b)?.softmax_cross_entropy(labels, mask)
}

/// Trains `W`, `W_c` and `b` with Adam and keeps the parameters of the
/// best validation epoch.
pub fn train(
    data: &PreparedGraph,
    hp: &DgnnHyperparams,
    tc: &TrainConfig,
    split: &Split,
) -> Result<(TrainedModel, TrainReport)> {
    hp.validate()?;
    tc.validate()?;
    let n = data.node_count();
    let d = data.feature_dim();
    check_split(split, n)?;
    check_memory_budget(n, hp.layers, tc.memory_budget)?;
    let started = Instant::now();

    let mut init_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    drop_rng.set_stream(DROPOUT_STREAM);

    let mut model = TrainedModel {
        factor: ReconFactor::init(d, &mut init_rng),
        classifier: ClassifierParams::init(d, data.classes, &mut init_rng),
    };
    let ops = Operators::new(data);
    let mut adam = Adam::new(tc.lr, tc.weight_decay, &[model.factor.w(), &model.classifier.w_c, &model.classifier.b]);

    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, TrainedModel)> = None;
    let mut since_best = 0;
    for epoch in 1..=tc.max_epochs {
        let (loss, grads) = {
            let tape = Tape::new();
            let x = tape.constant_shared(ops.x.clone());
            let a = tape.constant_shared(ops.a_hat.clone());
            let af = tape.constant_shared(ops.a_hat_f.clone());
            let w = tape.param(model.factor.w().clone());
            let w_c = tape.param(model.classifier.w_c.clone());
            let b = tape.param(model.classifier.b.clone());
            let loss = training_loss(x, a, af, w, w_c, b, &data.labels, &split.train, hp, tc.dropout, &mut drop_rng)?;
            let value = loss.scalar();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss is {value} at epoch {epoch} (seed {}); lower the learning rate (now {})",
                    tc.seed, tc.lr
                )));
            }
            let mut g = tape.backward(loss)?;
            let grads: Vec<DMatrix<f64>> = [w, w_c, b]
                .into_iter()
                .map(|p| g.take(p).unwrap_or_else(|| DMatrix::zeros(p.shape().0, p.shape().1)))
                .collect();
            (value, grads)
        };
        {
            let TrainedModel { factor, classifier } = &mut model;
            adam.step(&mut [factor.w_mut(), &mut classifier.w_c, &mut classifier.b], &grads);
        }

        let state = ops.embed(model.factor.w(), hp)?;
        let objective = objective_value(&state, &data.x, &data.lap, &data.lap_f, &model.factor.shared(), hp)?;
        let pred = argmax_rows(&logits(&concat(&state)?, &model.classifier)?);
        let record = EpochRecord {
            epoch,
            objective,
            loss,
            train_acc: accuracy(&pred, &data.labels, &split.train)?,
            val_acc: accuracy(&pred, &data.labels, &split.val)?,
            test_acc: accuracy(&pred, &data.labels, &split.test)?,
        };
        epochs.push(record);

        if best.as_ref().is_none_or(|b| record.val_acc > b.1) {
            best = Some((epoch, record.val_acc, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tc.patience {
                break;
            }
        }
    }

    let (best_epoch, _, best_model) = best.expect("at least one epoch ran");
    let report = TrainReport {
        seed: tc.seed,
        test_accuracy: epochs[best_epoch - 1].test_acc,
        best_epoch,
        epochs,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((best_model, report))
}

/// Test accuracies over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub reports: Vec<TrainReport>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

impl TrialSummary {
    pub fn from_reports(reports: Vec<TrainReport>) -> Self {
        let accs: Vec<f64> = reports.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = mean_std(&accs);
        TrialSummary { reports, mean, std }
    }

    /// Percentages as `mean±std`, e.g. `91.06±0.36`.
    pub fn formatted(&self) -> String {
        format!("{:.2}±{:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than
/// two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One training run per seed, each with its own split and initialization.
/// `jobs` threads share the seeds; results come back in seed order.
pub fn train_seeds(
    data: &PreparedGraph,
    hp: &DgnnHyperparams,
    tc: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<(TrainedModel, TrainReport)>> {
    let one = |seed: u64| -> Result<(TrainedModel, TrainReport)> {
        let split = make_split(data.node_count(), seed)?;
        let tc = TrainConfig { seed, ..tc.clone() };
        train(data, hp, &tc, &split)
    };
    let jobs = jobs.clamp(1, seeds.len().max(1));
    if jobs == 1 {
        return seeds.iter().map(|&s| one(s)).collect();
    }
    let per = seeds.len().div_ceil(jobs);
    let mut slots: Vec<Option<Result<(TrainedModel, TrainReport)>>> = vec![None; seeds.len()];
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(per).enumerate() {
            let one = &one;
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(one(seeds[w * per + k]));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// [`train_seeds`] reduced to test-accuracy statistics. Needs at least two
/// seeds.
pub fn run_trials(
    data: &PreparedGraph,
    hp: &DgnnHyperparams,
    tc: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<TrialSummary> {
    if seeds.len() < 2 {
        return Err(Error::Config(format!("run_trials needs at least 2 seeds, got {}", seeds.len())));
    }
    let runs = train_seeds(data, hp, tc, seeds, jobs)?;
    Ok(TrialSummary::from_reports(runs.into_iter().map(|(_, r)| r).collect()))
}

/// Smoothing weights allowed in the sensitivity grid.
pub const SENSITIVITY_RANGE: (f64, f64) = (0.5, 3.5);
/// Consistency weights allowed in the sensitivity grid.
pub const SENSITIVITY_BETAS: [f64; 4] = [0.001, 0.005, 0.01, 0.02];

/// `0.1, 0.2, …, 0.9`.
pub fn epsilon_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Epsilon(Vec<f64>),
    /// Every `(λ, α)` pair at a fixed `β`.
    LambdaAlpha {
        beta: f64,
        lambdas: Vec<f64>,
        alphas: Vec<f64>,
    },
}

impl SweepAxis {
    /// The hyperparameters of every grid point, in row-major order.
    pub fn points(&self, base: &DgnnHyperparams) -> Result<Vec<DgnnHyperparams>> {
        match self {
            SweepAxis::Epsilon(values) => values
                .iter()
                .map(|&e| {
                    if !(0.0..=1.0).contains(&e) {
                        return Err(Error::Config(format!("epsilon {e} outside [0, 1]")));
                    }
                    Ok(DgnnHyperparams {
                        epsilon: e,
                        ..base.clone()
                    })
                })
                .collect(),
            SweepAxis::LambdaAlpha { beta, lambdas, alphas } => {
                if !SENSITIVITY_BETAS.contains(beta) {
                    return Err(Error::Config(format!("beta {beta} not in {SENSITIVITY_BETAS:?}")));
                }
                let (lo, hi) = SENSITIVITY_RANGE;
                let mut out = Vec::new();
                for &lambda in lambdas {
                    for &alpha in alphas {
                        for v in [lambda, alpha] {
                            if !(lo..=hi).contains(&v) {
                                return Err(Error::Config(format!("smoothing weight {v} outside [{lo}, {hi}]")));
                            }
                        }
                        out.push(DgnnHyperparams {
                            lambda,
                            alpha,
                            beta: *beta,
                            ..base.clone()
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub hp: DgnnHyperparams,
    pub summary: TrialSummary,
}

pub fn sweep(
    data: &PreparedGraph,
    base: &DgnnHyperparams,
    axis: &SweepAxis,
    tc: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    axis.points(base)?
        .into_iter()
        .map(|hp| {
            let summary = run_trials(data, &hp, tc, seeds, jobs)?;
            Ok(SweepPoint { hp, summary })
        })
        .collect()
}

pub const REPORT_CSV_HEADER: &str = "seed,epoch,objective,loss,train_acc,val_acc,test_acc";

/// Per-epoch rows for every report.
pub fn report_csv(reports: &[TrainReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        for e in &r.epochs {
            writeln!(
                out,
                "{},{},{:.9e},{:.9e},{:.6},{:.6},{:.6}",
                r.seed, e.epoch, e.objective, e.loss, e.train_acc, e.val_acc, e.test_acc
            )
            .unwrap();
        }
    }
    out
}

/// A one-row markdown accuracy table plus per-seed details.
pub fn report_markdown(name: &str, summary: &TrialSummary) -> String {
    let mut out = String::new();
    writeln!(out, "| Dataset | Accuracy (%) |").unwrap();
    writeln!(out, "|---|---|").unwrap();
    writeln!(out, "| {name} | {} |", summary.formatted()).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "| Seed | Best epoch | Val acc | Test acc | Seconds |").unwrap();
    writeln!(out, "|---|---|---|---|---|").unwrap();
    for r in &summary.reports {
        let b = r.best();
        writeln!(
            out,
            "| {} | {} | {:.4} | {:.4} | {:.1} |",
            r.seed, r.best_epoch, b.val_acc, r.test_accuracy, r.wall_seconds
        )
        .unwrap();
    }
    out
}
