//! Graph signal denoising.
//!
//! Given a noisy signal `S` on a graph, find the smooth signal `F` that
//! minimizes
//!
//! ```text
//! ‖F − S‖²_F + λ · tr(Fᵀ L̃ F)
//! ```
//!
//! The objective is strictly convex, and its stationarity condition
//! `(I + λ L̃) F = S` is solved here with a dense Cholesky factorization.
//! Replacing the inverse by its first-order expansion with `λ = 1` leaves
//! `Â S`, exactly the aggregation step of a GCN layer
//! ([`gsd_first_order`]).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Largest node count accepted by [`gsd_exact`].
pub const MAX_EXACT_NODES: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct GsdProblem {
    pub signal: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub lambda: f64,
}

impl GsdProblem {
    pub fn new(signal: DMatrix<f64>, laplacian: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if laplacian.nrows() != laplacian.ncols() || laplacian.nrows() != signal.nrows() {
            return Err(Error::Shape {
                op: "gsd_problem",
                lhs: laplacian.shape(),
                rhs: signal.shape(),
            });
        }
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("smoothing weight must be >= 0, got {lambda}")));
        }
        Ok(GsdProblem {
            signal,
            laplacian,
            lambda,
        })
    }

    fn system(&self) -> DMatrix<f64> {
        let n = self.signal.nrows();
        DMatrix::identity(n, n) + &self.laplacian * self.lambda
    }
}

/// Solves `(I + λ L̃) F = S` directly.
pub fn gsd_exact(p: &GsdProblem) -> Result<DMatrix<f64>> {
    let n = p.signal.nrows();
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLarge(format!(
            "dense denoising solve limited to {MAX_EXACT_NODES} nodes, got {n}"
        )));
    }
    let chol = p
        .system()
        .cholesky()
        .ok_or_else(|| Error::Config("I + λL̃ is not positive definite; is L̃ a valid Laplacian?".into()))?;
    Ok(chol.solve(&p.signal))
}

/// `Â S`: the first-order approximation of the exact solution at `λ = 1`.
pub fn gsd_first_order(signal: &DMatrix<f64>, na: &NormalizedAdjacency) -> Result<DMatrix<f64>> {
    if na.dim() != signal.nrows() {
        return Err(Error::Shape {
            op: "gsd_first_order",
            lhs: na.matrix().shape(),
            rhs: signal.shape(),
        });
    }
    Ok(na.matrix() * signal)
}

/// `‖F − S‖²_F + λ tr(Fᵀ L̃ F)`.
pub fn gsd_objective(f: &DMatrix<f64>, p: &GsdProblem) -> Result<f64> {
    if f.shape() != p.signal.shape() {
        return Err(Error::Shape {
            op: "gsd_objective",
            lhs: f.shape(),
            rhs: p.signal.shape(),
        });
    }
    let fit = (f - &p.signal).norm_squared();
    let smooth = f.component_mul(&(&p.laplacian * f)).sum();
    Ok(fit + p.lambda * smooth)
}

/// `‖(I + λ L̃) F − S‖_F`.
pub fn gsd_residual(f: &DMatrix<f64>, p: &GsdProblem) -> f64 {
    (p.system() * f - &p.signal).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, normalize};
    use crate::oracle;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    a[(i, j)] = 1.0;
                    a[(j, i)] = 1.0;
                }
            }
        }
        a
    }

    fn random_signal(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_lambda_and_single_node_return_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = random_signal(5, 3, &mut rng);
        let lap = laplacian(&normalize(&random_graph(5, 0.5, &mut rng)));
        let f = gsd_exact(&GsdProblem::new(s.clone(), lap, 0.0).unwrap()).unwrap();
        assert!((f - &s).abs().max() < 1e-15);

        let one = GsdProblem::new(dmatrix![2.5, -1.0], dmatrix![0.0], 3.0).unwrap();
        assert_eq!(gsd_exact(&one).unwrap(), dmatrix![2.5, -1.0]);
    }

    #[test]
    fn exact_matches_gradient_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = random_graph(6, 0.5, &mut rng);
        let lap = laplacian(&normalize(&a));
        let s = random_signal(6, 2, &mut rng);
        let p = GsdProblem::new(s.clone(), lap.clone(), 1.0).unwrap();
        let exact = gsd_exact(&p).unwrap();
        let gd = oracle::gsd_gradient_descent(&s, &lap, 1.0, 0.05, 10_000);
        assert!((exact - gd).abs().max() < 1e-6);
    }

    #[test]
    fn first_order_cases() {
        let s = dmatrix![1.0, 4.0; 3.0, 0.0];
        assert_eq!(gsd_first_order(&s, &NormalizedAdjacency::identity(2)).unwrap(), s);
        let two = normalize(&dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert!((gsd_first_order(&s, &two).unwrap() - dmatrix![2.0, 2.0; 2.0, 2.0]).abs().max() < 1e-14);
        assert!(gsd_first_order(&s, &NormalizedAdjacency::identity(3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let na = normalize(&random_graph(7, 0.4, &mut rng));
        let x = random_signal(7, 3, &mut rng);
        let id = DMatrix::identity(3, 3);
        let reference = oracle::gcn_reference_layer(&x, na.matrix(), &id).unwrap();
        assert!((gsd_first_order(&x, &na).unwrap() - reference).abs().max() < 1e-14);
    }

    #[test]
    fn objective_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_graph(6, 0.6, &mut rng);
        let lap = laplacian(&normalize(&a));
        let s = random_signal(6, 2, &mut rng);
        let p = GsdProblem::new(s.clone(), lap.clone(), 0.0).unwrap();
        assert_eq!(gsd_objective(&s, &p).unwrap(), 0.0);
        assert!((gsd_objective(&s, &p).unwrap() - oracle::gsd_objective_naive(&s, &s, &lap, 0.0)).abs() < 1e-12);

        // The normalized Laplacian annihilates D̃^{1/2}·1, the constant
        // signal of a regular graph: use the 6-cycle.
        let mut c6 = DMatrix::zeros(6, 6);
        for i in 0..6 {
            c6[(i, (i + 1) % 6)] = 1.0;
            c6[((i + 1) % 6, i)] = 1.0;
        }
        let lap6 = laplacian(&normalize(&c6));
        let constant = DMatrix::from_element(6, 2, 0.7);
        let p = GsdProblem::new(constant.clone(), lap6, 5.0).unwrap();
        assert!(gsd_objective(&constant, &p).unwrap().abs() < 1e-12);

        let p = GsdProblem::new(s.clone(), lap, 2.0).unwrap();
        let f = gsd_exact(&p).unwrap();
        let best = gsd_objective(&f, &p).unwrap();
        assert!(best < gsd_objective(&s, &p).unwrap());
        for _ in 0..50 {
            let cand = &f + random_signal(6, 2, &mut rng) * 0.1;
            assert!(best <= gsd_objective(&cand, &p).unwrap());
        }
    }

    #[test]
    fn size_guard_and_shape_checks() {
        let n = MAX_EXACT_NODES + 1;
        let p = GsdProblem {
            signal: DMatrix::zeros(n, 1),
            laplacian: DMatrix::zeros(1, 1),
            lambda: 1.0,
        };
        assert!(matches!(gsd_exact(&p), Err(Error::TooLarge(_))));
        assert!(GsdProblem::new(DMatrix::zeros(3, 1), DMatrix::zeros(2, 2), 1.0).is_err());
        assert!(GsdProblem::new(DMatrix::zeros(2, 1), DMatrix::zeros(2, 2), -1.0).is_err());
    }

    #[test]
    fn tiny_lambda_barely_moves_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let lap = laplacian(&normalize(&random_graph(20, 0.3, &mut rng)));
        let s = random_signal(20, 4, &mut rng);
        let f = gsd_exact(&GsdProblem::new(s.clone(), lap, 1e-8).unwrap()).unwrap();
        assert!((f - &s).norm() / s.norm() < 1e-6);
    }

    #[test]
    fn repeated_first_order_is_matrix_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let na = normalize(&random_graph(10, 0.3, &mut rng));
        let s = random_signal(10, 3, &mut rng);
        let mut out = s.clone();
        for _ in 0..4 {
            out = gsd_first_order(&out, &na).unwrap();
        }
        let a = na.matrix();
        let power = a * a * a * a;
        assert!((out - power * &s).abs().max() < 1e-12);
    }

    #[test]
    fn fd_reproduces_analytic_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let lap = laplacian(&normalize(&random_graph(8, 0.4, &mut rng)));
        let s = random_signal(8, 3, &mut rng);
        let f0 = random_signal(8, 3, &mut rng);
        let p = GsdProblem::new(s.clone(), lap.clone(), 1.5).unwrap();
        let analytic = oracle::gsd_gradient_naive(&f0, &s, &lap, 1.5);
        let fd = oracle::fd_gradient(|x| gsd_objective(&x[0], &p).unwrap(), &[f0], &oracle::FdConfig::default()).unwrap();
        for smp in &fd[0] {
            assert!(oracle::relative_error(analytic[(smp.row, smp.col)], smp.value) < 1e-6);
        }
    }
}
