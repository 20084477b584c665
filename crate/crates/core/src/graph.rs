//! Topological and semantic graphs.
//!
//! A [`Graph`] holds an undirected, unweighted edge set together with the
//! dense node attribute matrix and integer class labels. Propagation
//! operators are derived from it on demand:
//!
//! * [`normalize`] builds `Â = D̃^{-1/2} (A + I) D̃^{-1/2}`,
//! * [`laplacian`] returns `L̃ = I − Â`,
//! * [`cosine_similarity`] and [`semantic_graph`] derive a kNN graph from
//!   the attributes alone.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An undirected graph with node attributes and labels.
///
/// Edges are stored once per unordered pair as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: DMatrix<f64>,
    labels: Vec<usize>,
    input_edge_records: usize,
}

/// Builds a graph from a raw edge list.
///
/// Duplicate pairs, reversed pairs and self-edges are accepted and folded
/// away. The node count is the number of feature rows.
pub fn build_graph(
    edge_list: &[(usize, usize)],
    features: DMatrix<f64>,
    labels: Vec<usize>,
) -> Result<Graph> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::RowMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    let mut set = BTreeSet::new();
    for &(a, b) in edge_list {
        if a >= n || b >= n {
            return Err(Error::EndpointOutOfRange(a, b, n));
        }
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    Ok(Graph {
        n,
        edges: set.into_iter().collect(),
        features,
        labels,
        input_edge_records: edge_list.len(),
    })
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of unique undirected edges after deduplication.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of edge records in the input, before deduplication and
    /// self-edge removal. Published dataset statistics count these.
    pub fn input_edge_records(&self) -> usize {
        self.input_edge_records
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Class count, inferred as `max label + 1`.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// Replaces the attribute matrix, keeping topology and labels.
    pub fn with_features(mut self, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() != self.n {
            return Err(Error::RowMismatch {
                what: "features",
                expected: self.n,
                found: features.nrows(),
            });
        }
        self.features = features;
        Ok(self)
    }

    /// Dense symmetric 0/1 adjacency with a zero diagonal.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }
}

/// The GCN propagation operator `D̃^{-1/2} (A + I) D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(DMatrix<f64>);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Operator of an edgeless graph: the identity.
    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency(DMatrix::identity(n, n))
    }
}

/// Adds self-loops and applies symmetric degree normalization.
///
/// The input must be a symmetric 0/1 matrix with zero diagonal. Every
/// degree is at least one after the self-loop, so this never divides by 0.
pub fn normalize(adjacency: &DMatrix<f64>) -> NormalizedAdjacency {
    let n = adjacency.nrows();
    let mut a = adjacency.clone();
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| 1.0 / r.sum().sqrt())
        .collect();
    for j in 0..n {
        for i in 0..n {
            let v = a[(i, j)];
            if v != 0.0 {
                a[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    NormalizedAdjacency(a)
}

/// `L̃ = I − Â`.
pub fn laplacian(na: &NormalizedAdjacency) -> DMatrix<f64> {
    let n = na.dim();
    DMatrix::identity(n, n) - &na.0
}

/// Pairwise cosine similarity of feature rows.
///
/// Rows with zero norm have similarity 0 against every row, themselves
/// included.
pub fn cosine_similarity(features: &DMatrix<f64>) -> DMatrix<f64> {
    let n = features.nrows();
    let inv_norm: Vec<f64> = features
        .row_iter()
        .map(|r| {
            let norm = r.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                0.0
            }
        })
        .collect();
    let mut sim = features * features.transpose();
    for j in 0..n {
        for i in 0..n {
            sim[(i, j)] *= inv_norm[i] * inv_norm[j];
        }
    }
    sim
}

/// A kNN graph derived from attribute similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    adjacency: DMatrix<f64>,
    k: usize,
    normalized: NormalizedAdjacency,
}

impl SemanticGraph {
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalized(&self) -> &NormalizedAdjacency {
        &self.normalized
    }

    pub fn into_normalized(self) -> NormalizedAdjacency {
        self.normalized
    }

    pub fn edge_count(&self) -> usize {
        let n = self.adjacency.nrows();
        let mut count = 0;
        for j in 0..n {
            for i in 0..j {
                if self.adjacency[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Links every node to its `k` most similar other nodes, then symmetrizes
/// by union. Equal similarities go to the lower node index.
pub fn semantic_graph(sim: &DMatrix<f64>, k: usize) -> Result<SemanticGraph> {
    let n = sim.nrows();
    if k == 0 || k >= n {
        return Err(Error::NeighborCount { k, n });
    }
    let mut adjacency = DMatrix::zeros(n, n);
    let mut candidates: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i));
        let order = |&a: &usize, &b: &usize| {
            sim[(i, b)]
                .total_cmp(&sim[(i, a)])
                .then_with(|| a.cmp(&b))
        };
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, order);
        }
        for &j in &candidates[..k] {
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
    }
    let normalized = normalize(&adjacency);
    Ok(SemanticGraph {
        adjacency,
        k,
        normalized,
    })
}

/// Edge homophily: the fraction of undirected edges joining nodes that
/// share a label.
pub fn homophily_rate(graph: &Graph) -> Result<f64> {
    if graph.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let same = graph
        .edges
        .iter()
        .filter(|&&(i, j)| graph.labels[i] == graph.labels[j])
        .count();
    Ok(same as f64 / graph.edges.len() as f64)
}

/// Scales each row to unit L1 norm; all-zero rows are left alone.
pub fn row_normalize(features: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = features.clone();
    for mut row in out.row_iter_mut() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row /= s;
        }
    }
    out
}
