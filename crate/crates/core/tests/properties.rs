use dgnn::autodiff::Tape;
use dgnn::datasets::{format_decimal, generate_sbm, load_dataset, write_dataset, SbmSpec};
use dgnn::graph::{build_graph, cosine_similarity, homophily_rate, laplacian, normalize, semantic_graph};
use dgnn::gsd::{gsd_exact, gsd_objective, GsdProblem};
use dgnn::layer::{consistency_residual, forward, step, DgnnHyperparams, EmbeddingState, Mode, ReconFactor};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_adjacency(n: usize, p: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
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

/// Circulant graph joining `i` and `i ± s` for every step `s`.
fn circulant(n: usize, steps: &[usize]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for &s in steps {
            a[(i, (i + s) % n)] = 1.0;
            a[((i + s) % n, i)] = 1.0;
        }
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_adjacency_spectrum(n in 1usize..=20, p in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = normalize(&random_adjacency(n, p, &mut rng));
        let m = na.matrix();
        prop_assert_eq!(m, &m.transpose());
        for ev in SymmetricEigen::new(m.clone()).eigenvalues.iter() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(ev), "eigenvalue {}", ev);
        }
    }

    #[test]
    fn laplacian_is_psd(n in 2usize..=30, p in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lap = laplacian(&normalize(&random_adjacency(n, p, &mut rng)));
        for _ in 0..100 {
            let x = random(n, 1, &mut rng);
            prop_assert!((x.transpose() * &lap * &x)[(0, 0)] >= -1e-12);
        }
    }

    #[test]
    fn semantic_graph_ignores_row_scaling(n in 3usize..=15, d in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(n, d, &mut rng);
        let mut scaled = x.clone();
        for i in 0..n {
            let s: f64 = rng.random_range(0.1..10.0);
            scaled.row_mut(i).scale_mut(s);
        }
        let k = 1 + (seed as usize) % (n - 1);
        let a = semantic_graph(&cosine_similarity(&x), k).unwrap();
        let b = semantic_graph(&cosine_similarity(&scaled), k).unwrap();
        // Rescaling perturbs cosines in the last bits; only near-ties may flip.
        let sim = cosine_similarity(&x);
        let boundary_gap = |i: usize| {
            let mut row: Vec<f64> = (0..n).filter(|&t| t != i).map(|t| sim[(i, t)]).collect();
            row.sort_by(|p, q| q.total_cmp(p));
            if k < row.len() { (row[k - 1] - row[k]).abs() } else { f64::INFINITY }
        };
        for i in 0..n {
            for j in 0..n {
                if a.adjacency()[(i, j)] != b.adjacency()[(i, j)] {
                    let gap = boundary_gap(i).min(boundary_gap(j));
                    prop_assert!(gap < 1e-12, "edge ({}, {}) flipped with gap {}", i, j, gap);
                }
            }
        }
    }

    #[test]
    fn homophily_range_and_label_permutation(n in 2usize..=30, c in 1usize..=5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut edges = vec![(0, 1)];
        for _ in 0..2 * n {
            edges.push((rng.random_range(0..n), rng.random_range(0..n)));
        }
        let feats = DMatrix::zeros(n, 1);
        let g = build_graph(&edges, feats.clone(), labels.clone()).unwrap();
        let h = homophily_rate(&g).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        let perm: Vec<usize> = (0..c).rev().collect();
        let relabeled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let g2 = build_graph(&edges, feats, relabeled).unwrap();
        prop_assert_eq!(homophily_rate(&g2).unwrap(), h);
    }

    #[test]
    fn gsd_exact_beats_random_candidates(n in 2usize..=40, lambda in 0.0f64..5.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lap = laplacian(&normalize(&random_adjacency(n, 0.3, &mut rng)));
        let p = GsdProblem::new(random(n, 2, &mut rng), lap, lambda).unwrap();
        let f = gsd_exact(&p).unwrap();
        let best = gsd_objective(&f, &p).unwrap();
        for _ in 0..100 {
            let cand = &f + random(n, 2, &mut rng) * rng.random_range(0.001..1.0);
            prop_assert!(best <= gsd_objective(&cand, &p).unwrap());
        }
    }

    #[test]
    fn residual_is_symmetric(n in 1usize..=10, d in 1usize..=5, eps in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tape = Tape::new();
        let state = EmbeddingState {
            f: tape.constant(random(n, d, &mut rng)),
            h: tape.constant(random(n, d, &mut rng)),
            hf: tape.constant(random(n, d, &mut rng)),
        };
        let ws = tape.constant(ReconFactor::init(d, &mut rng).shared());
        let r = consistency_residual(&state, ws, eps).unwrap().value();
        prop_assert!((r.as_ref() - r.transpose()).norm() <= 1e-12 * r.norm());
    }

    #[test]
    fn shared_factor_is_psd(d in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = ReconFactor::new(random(d, d, &mut rng)).unwrap();
        let ws = w.shared();
        for _ in 0..100 {
            let x = random(d, 1, &mut rng);
            prop_assert!((x.transpose() * &ws * &x)[(0, 0)] >= -1e-12);
        }
    }

    /// On regular graphs a state whose columns are constant is stationary
    /// for every weight setting: `Â` fixes it and every Gram matrix in the
    /// residual coincides, so `R = 0`.
    #[test]
    fn analytic_rounds_fix_stationary_points(
        n in 5usize..=12,
        d in 1usize..=4,
        lambda in 0.1f64..3.0,
        alpha in 0.1f64..3.0,
        beta in 0.0f64..0.5,
        eps in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = random(1, d, &mut rng);
        let x = DMatrix::from_fn(n, d, |_, j| cols[(0, j)]);
        let hp = DgnnHyperparams { lambda, alpha, beta, epsilon: eps, layers: 1, mode: Mode::Analytic };
        let tape = Tape::new();
        let xv = tape.constant(x.clone());
        let a = tape.constant(normalize(&circulant(n, &[1])).into_inner());
        let af = tape.constant(normalize(&circulant(n, &[1, 2])).into_inner());
        let ws = tape.constant(ReconFactor::init(d, &mut rng).shared());
        let state = EmbeddingState { f: xv, h: xv, hf: xv };
        let next = step(&state, xv, a, af, ws, &hp).unwrap().values();
        for m in [&next.f, &next.h, &next.hf] {
            prop_assert!((m - &x).abs().max() <= 1e-10);
        }
    }

    #[test]
    fn forward_is_bit_identical(n in 2usize..=8, d in 1usize..=4, seed in any::<u64>()) {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tape = Tape::new();
            let x = tape.constant(random(n, d, &mut rng));
            let a = tape.constant(normalize(&random_adjacency(n, 0.5, &mut rng)).into_inner());
            let af = tape.constant(normalize(&random_adjacency(n, 0.5, &mut rng)).into_inner());
            let w = tape.param(random(d, d, &mut rng));
            let s = forward(x, a, af, w, &DgnnHyperparams::default()).unwrap();
            let loss = s.f.add(s.h).unwrap().add(s.hf).unwrap().sum();
            let g = tape.backward(loss).unwrap();
            (s.values(), g.get(w).unwrap().clone())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn dataset_files_round_trip(per in 2usize..=15, classes in 1usize..=4, seed in any::<u64>()) {
        let spec = SbmSpec { nodes_per_class: per, classes, p_intra: 0.4, p_inter: 0.1, seed, ..SbmSpec::default() };
        let g = generate_sbm(&spec).unwrap();
        // Files carry at most 9 significant digits.
        let feats = g.features().map(|v| format_decimal(v).parse::<f64>().unwrap());
        let g = g.with_features(feats).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&g, dir.path()).unwrap();
        prop_assert_eq!(load_dataset(dir.path()).unwrap(), g);
    }

    #[test]
    fn sbm_is_bit_identical(seed in any::<u64>()) {
        let spec = SbmSpec { seed, ..SbmSpec::default() };
        prop_assert_eq!(generate_sbm(&spec).unwrap(), generate_sbm(&spec).unwrap());
    }
}
