//! Independent reference implementations.
//!
//! Everything here is written with explicit index loops over plain
//! `DMatrix` storage and calls nothing from the production modules except
//! their plain data types. These functions exist to check the fast paths,
//! so they favour obviousness over speed and refuse large inputs where the
//! cost would explode.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layer::{DgnnHyperparams, Mode};

/// Settings for central finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Elements checked per parameter; parameters with fewer elements are
    /// checked exhaustively.
    pub samples: usize,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: 1e-5,
            tolerance: 1e-4,
            samples: 64,
            seed: 0,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "finite-difference step and tolerance must be positive (got {}, {})",
                self.step, self.tolerance
            )));
        }
        Ok(())
    }
}

/// One numerically differentiated element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSample {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Central-difference gradient `(f(θ+h) − f(θ−h)) / 2h` for a sample of
/// elements of every parameter.
pub fn fd_gradient<F>(mut loss: F, params: &[DMatrix<f64>], cfg: &FdConfig) -> Result<Vec<Vec<FdSample>>>
where
    F: FnMut(&[DMatrix<f64>]) -> f64,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work: Vec<DMatrix<f64>> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let (rows, cols) = params[p].shape();
        let len = rows * cols;
        let picks: Vec<usize> = if len <= cfg.samples {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, cfg.samples).into_vec();
            v.sort_unstable();
            v
        };
        let mut samples = Vec::with_capacity(picks.len());
        for idx in picks {
            let (r, c) = (idx % rows, idx / rows);
            let orig = work[p][(r, c)];
            work[p][(r, c)] = orig + cfg.step;
            let up = loss(&work);
            work[p][(r, c)] = orig - cfg.step;
            let down = loss(&work);
            work[p][(r, c)] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at perturbed element ({r}, {c}) of parameter {p}"
                )));
            }
            samples.push(FdSample {
                row: r,
                col: c,
                value: (up - down) / (2.0 * cfg.step),
            });
        }
        out.push(samples);
    }
    Ok(out)
}

/// `|a − b| / max(|a|, |b|)`, falling back to the absolute difference when
/// both magnitudes are below `1e-8`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

pub fn matmul_naive(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Degree-normalized adjacency with self loops, entry by entry.
pub fn normalize_naive(adj: &DMatrix<f64>) -> DMatrix<f64> {
    let n = adj.nrows();
    let mut deg = vec![0.0; n];
    for i in 0..n {
        deg[i] = 1.0;
        for j in 0..n {
            deg[i] += adj[(i, j)];
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = adj[(i, j)] + if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = a / (deg[i].sqrt() * deg[j].sqrt());
        }
    }
    out
}

pub fn cosine_naive(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (mut dot, mut ni, mut nj) = (0.0, 0.0, 0.0);
            for k in 0..x.ncols() {
                dot += x[(i, k)] * x[(j, k)];
                ni += x[(i, k)] * x[(i, k)];
                nj += x[(j, k)] * x[(j, k)];
            }
            out[(i, j)] = if ni == 0.0 || nj == 0.0 {
                0.0
            } else {
                dot / (ni.sqrt() * nj.sqrt())
            };
        }
    }
    out
}

/// Brute-force top-k: `j` is a neighbour of `i` when fewer than `k` other
/// candidates outrank it (higher similarity, or equal with lower index).
pub fn top_k_naive(sim: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = sim.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut ahead = 0;
            for l in 0..n {
                if l == i || l == j {
                    continue;
                }
                if sim[(i, l)] > sim[(i, j)] || (sim[(i, l)] == sim[(i, j)] && l < j) {
                    ahead += 1;
                }
            }
            if ahead < k {
                out[(i, j)] = 1.0;
                out[(j, i)] = 1.0;
            }
        }
    }
    out
}

/// `Â^power · X` by repeated naive products.
pub fn propagate_naive(a_hat: &DMatrix<f64>, x: &DMatrix<f64>, power: usize) -> DMatrix<f64> {
    let mut h = x.clone();
    for _ in 0..power {
        h = matmul_naive(a_hat, &h);
    }
    h
}

/// GCN layer before activation: aggregate `Â (X W)`.
pub fn gcn_reference_layer(x: &DMatrix<f64>, a_hat: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::Shape {
            op: "gcn_reference_layer",
            lhs: x.shape(),
            rhs: w.shape(),
        });
    }
    if a_hat.ncols() != x.nrows() {
        return Err(Error::Shape {
            op: "gcn_reference_layer",
            lhs: a_hat.shape(),
            rhs: x.shape(),
        });
    }
    let transformed = matmul_naive(x, w);
    Ok(matmul_naive(a_hat, &transformed))
}

/// `Σ_k P[i,k] W[k,l] P[j,l]` for every `(i, j)`.
fn gram_naive(p: &DMatrix<f64>, ws: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let d = p.ncols();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += p[(i, k)] * ws[(k, l)] * p[(j, l)];
                }
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// `F W_s Fᵀ − ε H W_s Hᵀ − (1−ε) H_f W_s H_fᵀ`, element by element.
pub fn residual_naive(
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    hf: &DMatrix<f64>,
    ws: &DMatrix<f64>,
    epsilon: f64,
) -> DMatrix<f64> {
    let gf = gram_naive(f, ws);
    let gh = gram_naive(h, ws);
    let ghf = gram_naive(hf, ws);
    let n = f.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = gf[(i, j)] - epsilon * gh[(i, j)] - (1.0 - epsilon) * ghf[(i, j)];
        }
    }
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Which of the three unrolled rules to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateTarget {
    F,
    H,
    Hf,
}

/// One unrolled update evaluated with explicit loops.
///
/// `state` is `(F, H, H_f)` at iteration k; `graphs` is `(Â, Â_f)`.
pub fn scalar_update_oracle(
    state: (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>),
    x: &DMatrix<f64>,
    graphs: (&DMatrix<f64>, &DMatrix<f64>),
    ws: &DMatrix<f64>,
    hp: &DgnnHyperparams,
    which: UpdateTarget,
) -> Result<DMatrix<f64>> {
    let (f, h, hf) = state;
    let (n, d) = f.shape();
    if n > 16 || d > 8 {
        return Err(Error::TooLarge(format!(
            "scalar oracle limited to N <= 16, D <= 8 (got {n}x{d})"
        )));
    }
    let eps = hp.epsilon;
    let r = residual_naive(f, h, hf, ws, eps);
    let act = |v: f64| match hp.mode {
        Mode::Network => logistic(v),
        Mode::Analytic => v,
    };
    // Sign of the residual and the stream it multiplies.
    let (sign, stream, base, coef) = match which {
        UpdateTarget::F => (1.0, f, None, hp.beta),
        UpdateTarget::H => (
            -1.0,
            h,
            Some((graphs.0, h)),
            if eps == 0.0 || hp.beta == 0.0 { 0.0 } else { eps * hp.beta / hp.lambda },
        ),
        UpdateTarget::Hf => (
            -1.0,
            hf,
            Some((graphs.1, hf)),
            if eps == 1.0 || hp.beta == 0.0 {
                0.0
            } else {
                (1.0 - eps) * hp.beta / hp.alpha
            },
        ),
    };
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        for c in 0..d {
            let anchor = match base {
                None => x[(i, c)],
                Some((a, s)) => {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += a[(i, j)] * s[(j, c)];
                    }
                    acc
                }
            };
            let mut corr = 0.0;
            if coef != 0.0 {
                for j in 0..n {
                    // (P W_s + P W_sᵀ)[j, c]
                    let mut m = 0.0;
                    for k in 0..d {
                        m += stream[(j, k)] * (ws[(k, c)] + ws[(c, k)]);
                    }
                    corr += act(sign * r[(i, j)]) * m;
                }
            }
            out[(i, c)] = anchor - coef * corr;
        }
    }
    Ok(out)
}

/// Term-by-term evaluation of the layer objective.
#[allow(clippy::too_many_arguments)]
pub fn objective_naive(
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    hf: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lap: &DMatrix<f64>,
    lap_f: &DMatrix<f64>,
    ws: &DMatrix<f64>,
    hp: &DgnnHyperparams,
) -> f64 {
    let (n, d) = f.shape();
    let mut fit = 0.0;
    for i in 0..n {
        for c in 0..d {
            fit += (f[(i, c)] - x[(i, c)]).powi(2);
        }
    }
    let dirichlet = |l: &DMatrix<f64>, s: &DMatrix<f64>| {
        let mut t = 0.0;
        for c in 0..d {
            for i in 0..n {
                for j in 0..n {
                    t += s[(i, c)] * l[(i, j)] * s[(j, c)];
                }
            }
        }
        t
    };
    let r = residual_naive(f, h, hf, ws, hp.epsilon);
    let mut cons = 0.0;
    for i in 0..n {
        for j in 0..n {
            cons += r[(i, j)] * r[(i, j)];
        }
    }
    fit + hp.lambda * dirichlet(lap, h) + hp.alpha * dirichlet(lap_f, hf) + hp.beta * cons
}

/// `‖F − S‖² + λ tr(Fᵀ L̃ F)` with loops.
pub fn gsd_objective_naive(f: &DMatrix<f64>, s: &DMatrix<f64>, lap: &DMatrix<f64>, lambda: f64) -> f64 {
    let (n, d) = f.shape();
    let mut total = 0.0;
    for i in 0..n {
        for c in 0..d {
            total += (f[(i, c)] - s[(i, c)]).powi(2);
        }
    }
    for c in 0..d {
        for i in 0..n {
            for j in 0..n {
                total += lambda * f[(i, c)] * lap[(i, j)] * f[(j, c)];
            }
        }
    }
    total
}

/// Analytic gradient `2(F − S) + 2λ L̃ F` of the denoising objective.
pub fn gsd_gradient_naive(f: &DMatrix<f64>, s: &DMatrix<f64>, lap: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let lf = matmul_naive(lap, f);
    let mut g = DMatrix::zeros(f.nrows(), f.ncols());
    for i in 0..f.nrows() {
        for c in 0..f.ncols() {
            g[(i, c)] = 2.0 * (f[(i, c)] - s[(i, c)]) + 2.0 * lambda * lf[(i, c)];
        }
    }
    g
}

/// Plain gradient descent on the denoising objective, starting from `S`.
pub fn gsd_gradient_descent(
    s: &DMatrix<f64>,
    lap: &DMatrix<f64>,
    lambda: f64,
    step: f64,
    iterations: usize,
) -> DMatrix<f64> {
    let mut f = s.clone();
    for _ in 0..iterations {
        let g = gsd_gradient_naive(&f, s, lap, lambda);
        for i in 0..f.nrows() {
            for c in 0..f.ncols() {
                f[(i, c)] -= step * g[(i, c)];
            }
        }
    }
    f
}

/// Trains multinomial logistic regression on the rows in `train` by full
/// batch gradient descent and returns accuracy on `test`.
pub fn logistic_regression_accuracy(
    x: &DMatrix<f64>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    epochs: usize,
    step: f64,
) -> f64 {
    let d = x.ncols();
    let c = labels.iter().max().map_or(1, |m| m + 1);
    let mut w = vec![vec![0.0; c]; d + 1];
    let probs = |w: &Vec<Vec<f64>>, i: usize| {
        let mut logits = vec![0.0; c];
        for k in 0..c {
            logits[k] = w[d][k];
            for j in 0..d {
                logits[k] += x[(i, j)] * w[j][k];
            }
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        logits.iter().map(|l| (l - m).exp() / z).collect::<Vec<_>>()
    };
    for _ in 0..epochs {
        let mut grad = vec![vec![0.0; c]; d + 1];
        for &i in train {
            let p = probs(&w, i);
            for k in 0..c {
                let g = p[k] - if labels[i] == k { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[j][k] += g * x[(i, j)];
                }
                grad[d][k] += g;
            }
        }
        for j in 0..=d {
            for k in 0..c {
                w[j][k] -= step * grad[j][k] / train.len() as f64;
            }
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let p = probs(&w, i);
            let mut best = 0;
            for k in 1..c {
                if p[k] > p[best] {
                    best = k;
                }
            }
            best == labels[i]
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Size of a random instance for [`check_training_gradients`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckSpec {
    pub nodes: usize,
    pub dim: usize,
    pub classes: usize,
    pub seed: u64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            nodes: 6,
            dim: 4,
            classes: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub elements: usize,
}

impl GradCheck {
    pub fn passed(&self, cfg: &FdConfig) -> bool {
        self.max_rel_err < cfg.tolerance
    }
}

/// Compares tape gradients of the training loss with respect to `W`,
/// `W_c` and `b` against central differences on a random instance.
pub fn check_training_gradients(spec: GradCheckSpec, hp: &DgnnHyperparams, cfg: &FdConfig) -> Result<GradCheck> {
    use crate::autodiff::Tape;
    use crate::graph::{cosine_similarity, normalize, semantic_graph};
    use crate::train::training_loss;
    use rand::Rng;

    let GradCheckSpec { nodes: n, dim: d, classes: c, seed } = spec;
    if n < 2 || d == 0 || c == 0 {
        return Err(Error::Config("gradient check needs nodes >= 2, dim >= 1, classes >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |r: usize, k: usize| DMatrix::from_fn(r, k, |_, _| rng.random_range(-1.0..1.0));
    let x = random(n, d);
    let mut adj = random(n, n).map(|v| if v > 0.2 { 1.0 } else { 0.0 });
    adj.fill_diagonal(0.0);
    let adj = adj.upper_triangle() + adj.upper_triangle().transpose();
    let a_hat = normalize(&adj).into_inner();
    let a_hat_f = semantic_graph(&cosine_similarity(&x), 1)?.into_normalized().into_inner();
    let params = [random(d, d), random(3 * d, c), random(1, c)];
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mask: Vec<usize> = (0..n).collect();

    let build = |p: &[DMatrix<f64>], tape: &Tape| -> Result<f64> {
        let vars: Vec<_> = p.iter().map(|m| tape.param(m.clone())).collect();
        let loss = training_loss(
            tape.constant(x.clone()),
            tape.constant(a_hat.clone()),
            tape.constant(a_hat_f.clone()),
            vars[0],
            vars[1],
            vars[2],
            &labels,
            &mask,
            hp,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        Ok(loss.scalar())
    };
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|m| tape.param(m.clone())).collect();
    let loss = training_loss(
        tape.constant(x.clone()),
        tape.constant(a_hat.clone()),
        tape.constant(a_hat_f.clone()),
        vars[0],
        vars[1],
        vars[2],
        &labels,
        &mask,
        hp,
        0.0,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let grads = tape.backward(loss)?;
    let fd = fd_gradient(|p| build(p, &Tape::new()).unwrap_or(f64::NAN), &params, cfg)?;
    let mut out = GradCheck {
        max_rel_err: 0.0,
        elements: 0,
    };
    for (k, samples) in fd.iter().enumerate() {
        let g = grads
            .get(vars[k])
            .ok_or_else(|| Error::Config(format!("no gradient reached parameter {k}")))?;
        for s in samples {
            out.max_rel_err = out.max_rel_err.max(relative_error(g[(s.row, s.col)], s.value));
            out.elements += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn training_gradients_pass_default_check() {
        let cfg = FdConfig::default();
        let r = check_training_gradients(GradCheckSpec::default(), &DgnnHyperparams::default(), &cfg).unwrap();
        assert!(r.passed(&cfg), "{r:?}");
        assert_eq!(r.elements, 16 + 36 + 3);
    }

    #[test]
    fn fd_square_at_three() {
        let g = fd_gradient(|p| p[0][(0, 0)].powi(2), &[dmatrix![3.0]], &FdConfig::default()).unwrap();
        assert!((g[0][0].value - 6.0).abs() < 1e-7);
    }

    #[test]
    fn fd_linear_is_exact() {
        for h in [1e-3, 1e-5, 0.5] {
            let cfg = FdConfig {
                step: h,
                ..FdConfig::default()
            };
            let g = fd_gradient(
                |p| 2.0 * p[0][(0, 0)] - 0.5 * p[0][(1, 0)],
                &[dmatrix![1.0; -2.0]],
                &cfg,
            )
            .unwrap();
            assert!((g[0][0].value - 2.0).abs() < 1e-9);
            assert!((g[0][1].value + 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_samples_large_parameters() {
        let cfg = FdConfig {
            samples: 5,
            ..FdConfig::default()
        };
        let p = DMatrix::from_element(10, 10, 1.0);
        let g = fd_gradient(|p| p[0].sum(), &[p], &cfg).unwrap();
        assert_eq!(g[0].len(), 5);
        assert!(g[0].iter().all(|s| (s.value - 1.0).abs() < 1e-9));
    }

    #[test]
    fn fd_rejects_non_finite_and_bad_config() {
        let bad = fd_gradient(|_| f64::NAN, &[dmatrix![1.0]], &FdConfig::default());
        assert!(matches!(bad, Err(Error::NonFinite(_))));
        let cfg = FdConfig {
            step: 0.0,
            ..FdConfig::default()
        };
        assert!(fd_gradient(|_| 0.0, &[dmatrix![1.0]], &cfg).is_err());
    }

    #[test]
    fn gcn_reference_cases() {
        let x = dmatrix![1.0, 2.0; 3.0, 5.0];
        let id = DMatrix::identity(2, 2);
        assert_eq!(gcn_reference_layer(&x, &id, &id).unwrap(), x);
        let half = DMatrix::from_element(2, 2, 0.5);
        let out = gcn_reference_layer(&x, &half, &id).unwrap();
        assert_eq!(out, dmatrix![2.0, 3.5; 2.0, 3.5]);
        assert!(gcn_reference_layer(&x, &id, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn scalar_oracle_size_guard() {
        let big = DMatrix::zeros(17, 2);
        let hp = DgnnHyperparams::default();
        let g = DMatrix::identity(17, 17);
        let r = scalar_update_oracle((&big, &big, &big), &big, (&g, &g), &DMatrix::identity(2, 2), &hp, UpdateTarget::F);
        assert!(matches!(r, Err(Error::TooLarge(_))));
    }
}
