//! The decoupled layer.
//!
//! Three embeddings are carried through `L` unrolled iterations:
//!
//! * `F`, anchored to the attributes `X`,
//! * `H`, smoothed over the topological graph `Â`,
//! * `H_f`, smoothed over the semantic kNN graph `Â_f`.
//!
//! They never mix at the feature level. Instead, the adjacency each one
//! reconstructs through a shared factor `W_s = W Wᵀ` is pulled towards
//! agreement by the residual
//!
//! ```text
//! R = F W_s Fᵀ − ε H W_s Hᵀ − (1 − ε) H_f W_s H_fᵀ
//! ```
//!
//! and one iteration reads the previous state only (Jacobi order):
//!
//! ```text
//! F'   = X       − β σ(R)                (F W_s + F W_sᵀ)
//! H'   = Â H     − ε β/λ σ(−R)           (H W_s + H W_sᵀ)
//! H_f' = Â_f H_f − (1 − ε) β/α σ(−R)     (H_f W_s + H_f W_sᵀ)
//! ```
//!
//! [`Mode::Analytic`] drops σ, giving the plain stationarity iteration of
//! the layer objective ([`objective_value`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::autodiff::DiffMatrix;
use crate::error::{Error, Result};

/// Whether the residual passes through a sigmoid before being applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Network,
    Analytic,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "network" => Ok(Mode::Network),
            "analytic" => Ok(Mode::Analytic),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected network|analytic)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Network => "network",
            Mode::Analytic => "analytic",
        })
    }
}

/// Knobs of the layer objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DgnnHyperparams {
    /// Topological smoothing weight.
    pub lambda: f64,
    /// Semantic smoothing weight.
    pub alpha: f64,
    /// Structural-consistency weight.
    pub beta: f64,
    /// Share of the topological reconstruction in the consistency target.
    pub epsilon: f64,
    /// Unrolled iterations.
    pub layers: usize,
    pub mode: Mode,
}

impl Default for DgnnHyperparams {
    fn default() -> Self {
        DgnnHyperparams {
            lambda: 1.0,
            alpha: 1.0,
            beta: 0.01,
            epsilon: 0.5,
            layers: 2,
            mode: Mode::Network,
        }
    }
}

impl DgnnHyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.layers == 0 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        self.topology_coefficient()?;
        self.semantic_coefficient()?;
        Ok(())
    }

    /// `ε β / λ`, or 0 when the correction vanishes.
    pub fn topology_coefficient(&self) -> Result<f64> {
        if self.beta == 0.0 || self.epsilon == 0.0 {
            return Ok(0.0);
        }
        if self.lambda == 0.0 {
            return Err(Error::Config(
                "lambda = 0 with beta > 0 and epsilon > 0 divides by zero in the H update".into(),
            ));
        }
        Ok(self.epsilon * self.beta / self.lambda)
    }

    /// `(1 − ε) β / α`, or 0 when the correction vanishes.
    pub fn semantic_coefficient(&self) -> Result<f64> {
        if self.beta == 0.0 || self.epsilon == 1.0 {
            return Ok(0.0);
        }
        if self.alpha == 0.0 {
            return Err(Error::Config(
                "alpha = 0 with beta > 0 and epsilon < 1 divides by zero in the H_f update".into(),
            ));
        }
        Ok((1.0 - self.epsilon) * self.beta / self.alpha)
    }
}

/// The trainable factor `W` behind `W_s = W Wᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconFactor {
    w: DMatrix<f64>,
}

impl ReconFactor {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::Shape {
                op: "recon_factor",
                lhs: w.shape(),
                rhs: (w.nrows(), w.nrows()),
            });
        }
        Ok(ReconFactor { w })
    }

    /// `I + U(−0.01, 0.01)`, so `W_s` starts close to the identity.
    pub fn init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let w = DMatrix::from_fn(dim, dim, |i, j| {
            let noise = rng.random_range(-1e-2..1e-2);
            if i == j {
                1.0 + noise
            } else {
                noise
            }
        });
        ReconFactor { w }
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// `W Wᵀ`; symmetric and positive semidefinite by construction.
    pub fn shared(&self) -> DMatrix<f64> {
        &self.w * self.w.transpose()
    }
}

/// `(F, H, H_f)` on a tape.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingState<'t> {
    pub f: DiffMatrix<'t>,
    pub h: DiffMatrix<'t>,
    pub hf: DiffMatrix<'t>,
}

/// `(F, H, H_f)` detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub hf: DMatrix<f64>,
}

impl EmbeddingState<'_> {
    pub fn values(&self) -> Embeddings {
        Embeddings {
            f: self.f.value().as_ref().clone(),
            h: self.h.value().as_ref().clone(),
            hf: self.hf.value().as_ref().clone(),
        }
    }

    fn check(&self) -> Result<(usize, usize)> {
        let shape = self.f.shape();
        for other in [self.h.shape(), self.hf.shape()] {
            if other != shape {
                return Err(Error::Shape {
                    op: "embedding_state",
                    lhs: shape,
                    rhs: other,
                });
            }
        }
        Ok(shape)
    }
}

/// Every stream starts at the attributes.
pub fn init_state(x: DiffMatrix<'_>) -> EmbeddingState<'_> {
    EmbeddingState { f: x, h: x, hf: x }
}

/// `P W_s`, `P W_s Pᵀ` and the expansion `P W_s + P W_sᵀ`, built lazily so
/// a round shares them across the three rules.
struct Stream<'t> {
    p: DiffMatrix<'t>,
    pw: Option<DiffMatrix<'t>>,
}

impl<'t> Stream<'t> {
    fn new(p: DiffMatrix<'t>) -> Self {
        Stream { p, pw: None }
    }

    fn pw(&mut self, ws: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        if let Some(v) = self.pw {
            return Ok(v);
        }
        let v = self.p.matmul(ws)?;
        self.pw = Some(v);
        Ok(v)
    }

    fn gram(&mut self, ws: DiffMatrix<'t>) -> Result<DiffMatrix<'t>> {
        let pw = self.pw(ws)?;
        pw.matmul(self.p.t())
    }

    /// `ws_t` is `None` when `W_s` is symmetric, in which case the
    /// expansion is `2 P W_s`.
    fn expansion(&mut self, ws: DiffMatrix<'t>, ws_t: Option<DiffMatrix<'t>>) -> Result<DiffMatrix<'t>> {
        let pw = self.pw(ws)?;
        match ws_t {
            Some(ws_t) => pw.add(self.p.matmul(ws_t)?),
            None => Ok(pw.scale(2.0)),
        }
    }
}

struct Round<'t> {
    f: Stream<'t>,
    h: Stream<'t>,
    hf: Stream<'t>,
    ws: DiffMatrix<'t>,
    ws_t: Option<DiffMatrix<'t>>,
    graph_activation: Option<DiffMatrix<'t>>,
}

impl<'t> Round<'t> {
    fn new(state: &EmbeddingState<'t>, ws: DiffMatrix<'t>) -> Result<Self> {
        let (_, d) = state.check()?;
        if ws.shape() != (d, d) {
            return Err(Error::Shape {
                op: "consistency_residual",
                lhs: (d, d),
                rhs: ws.shape(),
            });
        }
        Ok(Round {
            f: Stream::new(state.f),
            h: Stream::new(state.h),
            hf: Stream::new(state.hf),
            ws,
            ws_t: (!is_symmetric(&ws.value())).then(|| ws.t()),
            graph_activation: None,
        })
    }

    fn residual(&mut self, epsilon: f64) -> Result<DiffMatrix<'t>> {
        let mut r = self.f.gram(self.ws)?;
        if epsilon != 0.0 {
            r = r.sub(self.h.gram(self.ws)?.scale(epsilon))?;
        }
        if epsilon != 1.0 {
            r = r.sub(self.hf.gram(self.ws)?.scale(1.0 - epsilon))?;
        }
        Ok(r)
    }
}

/// Symmetric up to rounding in the last few bits, as `W Wᵀ` is.
fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax();
    let tol = 1e-14 * scale;
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Activated residual for the F rule (`σ(R)`) and for the graph rules
/// (`σ(−R)`); without σ in analytic mode.
fn activate<'t>(r: DiffMatrix<'t>, negate: bool, mode: Mode) -> DiffMatrix<'t> {
    let signed = if negate { r.scale(-1.0) } else { r };
    match mode {
        Mode::Network => signed.sigmoid(),
        Mode::Analytic => signed,
    }
}

fn f_rule<'t>(round: &mut Round<'t>, x: DiffMatrix<'t>, r: Option<DiffMatrix<'t>>, hp: &DgnnHyperparams) -> Result<DiffMatrix<'t>> {
    if x.shape() != round.f.p.shape() {
        return Err(Error::Shape {
            op: "update_f",
            lhs: x.shape(),
            rhs: round.f.p.shape(),
        });
    }
    if hp.beta == 0.0 {
        return Ok(x);
    }
    let r = match r {
        Some(r) => r,
        None => round.residual(hp.epsilon)?,
    };
    let corr = activate(r, false, hp.mode).matmul(round.f.expansion(round.ws, round.ws_t)?)?;
    x.sub(corr.scale(hp.beta))
}

fn graph_rule<'t>(
    round: &mut Round<'t>,
    topological: bool,
    a_hat: DiffMatrix<'t>,
    r: Option<DiffMatrix<'t>>,
    hp: &DgnnHyperparams,
) -> Result<DiffMatrix<'t>> {
    let coef = if topological {
        hp.topology_coefficient()?
    } else {
        hp.semantic_coefficient()?
    };
    let p = if topological { round.h.p } else { round.hf.p };
    let base = a_hat.matmul(p)?;
    if coef == 0.0 {
        return Ok(base);
    }
    let r = match r {
        Some(r) => r,
        None => round.residual(hp.epsilon)?,
    };
    let act = match round.graph_activation {
        Some(a) => a,
        None => {
            let a = activate(r, true, hp.mode);
            round.graph_activation = Some(a);
            a
        }
    };
    let (ws, ws_t) = (round.ws, round.ws_t);
    let stream = if topological { &mut round.h } else { &mut round.hf };
    let corr = act.matmul(stream.expansion(ws, ws_t)?)?;
    base.sub(corr.scale(coef))
}

/// `F W_s Fᵀ − ε H W_s Hᵀ − (1 − ε) H_f W_s H_fᵀ`.
pub fn consistency_residual<'t>(state: &EmbeddingState<'t>, ws: DiffMatrix<'t>, epsilon: f64) -> Result<DiffMatrix<'t>> {
    Round::new(state, ws)?.residual(epsilon)
}

pub fn update_f<'t>(state: &EmbeddingState<'t>, x: DiffMatrix<'t>, ws: DiffMatrix<'t>, hp: &DgnnHyperparams) -> Result<DiffMatrix<'t>> {
    f_rule(&mut Round::new(state, ws)?, x, None, hp)
}

pub fn update_h<'t>(state: &EmbeddingState<'t>, a_hat: DiffMatrix<'t>, ws: DiffMatrix<'t>, hp: &DgnnHyperparams) -> Result<DiffMatrix<'t>> {
    graph_rule(&mut Round::new(state, ws)?, true, a_hat, None, hp)
}

pub fn update_hf<'t>(state: &EmbeddingState<'t>, a_hat_f: DiffMatrix<'t>, ws: DiffMatrix<'t>, hp: &DgnnHyperparams) -> Result<DiffMatrix<'t>> {
    graph_rule(&mut Round::new(state, ws)?, false, a_hat_f, None, hp)
}

/// One round of all three rules, each reading `state`.
pub fn step<'t>(
    state: &EmbeddingState<'t>,
    x: DiffMatrix<'t>,
    a_hat: DiffMatrix<'t>,
    a_hat_f: DiffMatrix<'t>,
    ws: DiffMatrix<'t>,
    hp: &DgnnHyperparams,
) -> Result<EmbeddingState<'t>> {
    let mut round = Round::new(state, ws)?;
    let needs_residual =
        hp.beta != 0.0 || hp.topology_coefficient()? != 0.0 || hp.semantic_coefficient()? != 0.0;
    let r = if needs_residual {
        Some(round.residual(hp.epsilon)?)
    } else {
        None
    };
    let f = f_rule(&mut round, x, r, hp)?;
    let h = graph_rule(&mut round, true, a_hat, r, hp)?;
    let hf = graph_rule(&mut round, false, a_hat_f, r, hp)?;
    Ok(EmbeddingState { f, h, hf })
}

/// Initializes at `X` and runs `hp.layers` rounds. `w` is the raw factor;
/// `W_s = W Wᵀ` is formed on the tape so gradients reach `W`.
pub fn forward<'t>(
    x: DiffMatrix<'t>,
    a_hat: DiffMatrix<'t>,
    a_hat_f: DiffMatrix<'t>,
    w: DiffMatrix<'t>,
    hp: &DgnnHyperparams,
) -> Result<EmbeddingState<'t>> {
    hp.validate()?;
    let n = x.shape().0;
    for g in [a_hat.shape(), a_hat_f.shape()] {
        if g != (n, n) {
            return Err(Error::Shape {
                op: "forward",
                lhs: g,
                rhs: x.shape(),
            });
        }
    }
    let ws = w.matmul(w.t())?;
    let mut state = init_state(x);
    for _ in 0..hp.layers {
        state = step(&state, x, a_hat, a_hat_f, ws, hp)?;
    }
    Ok(state)
}

/// Rough peak memory of one forward/backward pass: ten `N × N` matrices
/// kept per round plus operators and backward scratch.
pub fn forward_memory_estimate(n: usize, layers: usize) -> u64 {
    let n2 = (n as u64) * (n as u64);
    8 * n2 * (10 * layers as u64 + 6)
}

/// Default budget for [`check_memory_budget`]: 8 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

pub fn check_memory_budget(n: usize, layers: usize, budget: u64) -> Result<()> {
    let need = forward_memory_estimate(n, layers);
    if need > budget {
        return Err(Error::TooLarge(format!(
            "a forward pass over {n} nodes with {layers} layers needs about {:.1} GiB, budget is {:.1} GiB",
            need as f64 / (1u64 << 30) as f64,
            budget as f64 / (1u64 << 30) as f64
        )));
    }
    Ok(())
}

/// The four-term layer objective at a given state.
pub fn objective_value(
    state: &Embeddings,
    x: &DMatrix<f64>,
    lap: &DMatrix<f64>,
    lap_f: &DMatrix<f64>,
    ws: &DMatrix<f64>,
    hp: &DgnnHyperparams,
) -> Result<f64> {
    let shape = x.shape();
    for m in [&state.f, &state.h, &state.hf] {
        if m.shape() != shape {
            return Err(Error::Shape {
                op: "objective_value",
                lhs: m.shape(),
                rhs: shape,
            });
        }
    }
    let fit = (&state.f - x).norm_squared();
    let smooth_h = state.h.component_mul(&(lap * &state.h)).sum();
    let smooth_hf = state.hf.component_mul(&(lap_f * &state.hf)).sum();
    let mut total = fit + hp.lambda * smooth_h + hp.alpha * smooth_hf;
    if hp.beta != 0.0 {
        let gram = |p: &DMatrix<f64>| (p * ws) * p.transpose();
        let r = gram(&state.f) - gram(&state.h) * hp.epsilon - gram(&state.hf) * (1.0 - hp.epsilon);
        total += hp.beta * r.norm_squared();
    }
    Ok(total)
}

/// Simpler consistency regularizers, kept for comparison with the shared
/// factor form.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// `‖F − H‖²`
    FeatureLevel,
    /// `‖F Fᵀ − H Hᵀ‖²`
    PlainGram,
    /// `‖F W_s Fᵀ − H W_s Hᵀ‖²`
    SharedFactor(DMatrix<f64>),
}

impl Regularizer {
    pub fn evaluate(&self, f: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
        match self {
            Regularizer::FeatureLevel => (f - h).norm_squared(),
            Regularizer::PlainGram => (f * f.transpose() - h * h.transpose()).norm_squared(),
            Regularizer::SharedFactor(ws) => ((f * ws) * f.transpose() - (h * ws) * h.transpose()).norm_squared(),
        }
    }
}

/// Ablated variants: topology removed, semantic graph removed,
/// consistency removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    A1,
    A2,
    A3,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Ablation::A1),
            "A2" => Ok(Ablation::A2),
            "A3" => Ok(Ablation::A3),
            _ => Err(Error::Config(format!("unknown ablation {s:?} (expected A1, A2 or A3)"))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::A1 => "A1",
            Ablation::A2 => "A2",
            Ablation::A3 => "A3",
        })
    }
}

pub fn ablation_config(variant: Ablation, base: &DgnnHyperparams) -> DgnnHyperparams {
    let mut hp = base.clone();
    match variant {
        Ablation::A1 => {
            hp.lambda = 0.0;
            hp.epsilon = 0.0;
        }
        Ablation::A2 => {
            hp.alpha = 0.0;
            hp.epsilon = 1.0;
        }
        Ablation::A3 => hp.beta = 0.0,
    }
    hp
}
