//! Dataset ingestion, synthetic graphs and embedding export.
//!
//! A dataset directory holds three UTF-8 files:
//!
//! * `graph.edges`: one edge per line, two whitespace-separated 0-based
//!   node ids; `#` starts a comment,
//! * `features.csv`: one comma-separated row of decimals per node,
//! * `labels.csv`: one integer class id per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{build_graph, homophily_rate, Graph};
use crate::layer::Embeddings;

pub const EDGES_FILE: &str = "graph.edges";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = it.next().ok_or_else(|| parse_err(path, no + 1, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| parse_err(path, no + 1, format!("invalid node id {tok:?}")))
        };
        let (a, b) = (next()?, next()?);
        if it.next().is_some() {
            return Err(parse_err(path, no + 1, "expected exactly two node ids"));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

fn parse_features(path: &Path) -> Result<DMatrix<f64>> {
    let text = read(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, no + 1, format!("invalid decimal {tok:?}")))?;
            values.push(v);
        }
        let len = values.len() - start;
        match width {
            None => width = Some(len),
            Some(w) if w != len => {
                return Err(parse_err(path, no + 1, format!("row has {len} values, expected {w}")));
            }
            _ => {}
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, width.unwrap_or(0), &values))
}

fn parse_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut labels = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        labels.push(
            tok.parse()
                .map_err(|_| parse_err(path, no + 1, format!("invalid label {tok:?}")))?,
        );
    }
    Ok(labels)
}

/// Reads a dataset directory. Label ids must cover `0..c` without gaps.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let edges = parse_edges(&dir.join(EDGES_FILE))?;
    let features = parse_features(&dir.join(FEATURES_FILE))?;
    let labels = parse_labels(&dir.join(LABELS_FILE))?;
    if labels.len() != features.nrows() {
        return Err(Error::RowMismatch {
            what: "labels.csv",
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; classes];
    for &l in &labels {
        seen[l] = true;
    }
    if let Some(gap) = seen.iter().position(|s| !s) {
        return Err(Error::Config(format!(
            "label ids must be contiguous: class {gap} is unused but {} exists",
            classes - 1
        )));
    }
    build_graph(&edges, features, labels)
}

/// Formats with at most 9 significant digits.
pub fn format_decimal(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("valid float");
    format!("{rounded}")
}

/// Writes the canonical three-file layout.
pub fn write_dataset(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut edges = String::new();
    for &(a, b) in graph.edges() {
        writeln!(edges, "{a} {b}").unwrap();
    }
    let mut feats = String::new();
    for row in graph.features().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format_decimal(*v)).collect();
        feats.push_str(&cells.join(","));
        feats.push('\n');
    }
    let mut labels = String::new();
    for l in graph.labels() {
        writeln!(labels, "{l}").unwrap();
    }
    write(&dir.join(EDGES_FILE), &edges)?;
    write(&dir.join(FEATURES_FILE), &feats)?;
    write(&dir.join(LABELS_FILE), &labels)
}

/// Headline statistics of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSummary {
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    /// Edge records as listed in the input file.
    pub edge_records: usize,
    /// Unique undirected edges.
    pub unique_edges: usize,
    pub homophily: Option<f64>,
}

pub fn summarize(graph: &Graph) -> GraphSummary {
    GraphSummary {
        nodes: graph.node_count(),
        features: graph.feature_dim(),
        classes: graph.class_count(),
        edge_records: graph.input_edge_records(),
        unique_edges: graph.edge_count(),
        homophily: homophily_rate(graph).ok(),
    }
}

impl std::fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "nodes {} features {} classes {} edges {} (unique {}) homophily ",
            self.nodes, self.features, self.classes, self.edge_records, self.unique_edges
        )?;
        match self.homophily {
            Some(h) => write!(f, "{h:.3}"),
            None => f.write_str("n/a"),
        }
    }
}

/// Published statistics of a benchmark dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub edges: usize,
    pub homophily: f64,
}

/// Tolerance on homophily when comparing against published statistics.
pub const HOMOPHILY_TOLERANCE: f64 = 0.01;

impl DatasetStats {
    /// Every field that disagrees, as `(name, expected, found)`.
    pub fn mismatches(&self, s: &GraphSummary) -> Vec<(&'static str, String, String)> {
        let mut out = Vec::new();
        let mut check = |name, want: usize, got: usize| {
            if want != got {
                out.push((name, want.to_string(), got.to_string()));
            }
        };
        check("nodes", self.nodes, s.nodes);
        check("features", self.features, s.features);
        check("classes", self.classes, s.classes);
        check("edges", self.edges, s.edge_records);
        match s.homophily {
            Some(h) if (h - self.homophily).abs() <= HOMOPHILY_TOLERANCE => {}
            other => out.push((
                "homophily",
                format!("{:.3}", self.homophily),
                other.map_or("n/a".into(), |h| format!("{h:.3}")),
            )),
        }
        out
    }
}

/// Parameters of a stochastic block model with Gaussian class features.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub nodes_per_class: usize,
    pub classes: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub feature_dim: usize,
    /// Distance of each class mean from the origin along its own axis.
    pub separation: f64,
    /// Standard deviation of the per-entry Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        SbmSpec {
            nodes_per_class: 50,
            classes: 2,
            p_intra: 0.1,
            p_inter: 0.01,
            feature_dim: 8,
            separation: 1.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.nodes_per_class == 0 || self.classes == 0 || self.feature_dim == 0 {
            return Err(Error::Config("SBM counts must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Samples a labelled SBM graph. Class `c` features are centred on
/// `separation · e_{c mod D}`.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes_per_class * spec.classes;
    let labels: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_class).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { spec.p_intra } else { spec.p_inter };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let mut features = DMatrix::zeros(n, spec.feature_dim);
    for i in 0..n {
        for j in 0..spec.feature_dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[(i, j)] = spec.noise * z;
        }
        features[(i, labels[i] % spec.feature_dim)] += spec.separation;
    }
    build_graph(&edges, features, labels)
}

/// Header of the embedding CSV for dimension `d`.
pub fn embedding_header(d: usize) -> String {
    let mut cols = vec!["node_id".to_string(), "label".to_string()];
    for prefix in ["f", "h", "hf"] {
        cols.extend((0..d).map(|j| format!("{prefix}_{j}")));
    }
    cols.join(",")
}

/// Writes `node_id,label,f_*,h_*,hf_*` rows.
pub fn export_embeddings(state: &Embeddings, labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let (n, d) = state.f.shape();
    if labels.len() != n {
        return Err(Error::RowMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    let mut out = embedding_header(d);
    out.push('\n');
    for i in 0..n {
        write!(out, "{i},{}", labels[i]).unwrap();
        for m in [&state.f, &state.h, &state.hf] {
            for j in 0..d {
                out.push(',');
                out.push_str(&format_decimal(m[(i, j)]));
            }
        }
        out.push('\n');
    }
    write(path.as_ref(), &out)
}

/// Parses a file written by [`export_embeddings`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(Vec<usize>, Embeddings)> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let width = header.split(',').count();
    if width < 2 || (width - 2) % 3 != 0 {
        return Err(parse_err(path, 1, "malformed header"));
    }
    let d = (width - 2) / 3;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(parse_err(path, no + 2, format!("expected {width} columns")));
        }
        labels.push(cells[1].parse().map_err(|_| parse_err(path, no + 2, "invalid label"))?);
        let vals = cells[2..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| parse_err(path, no + 2, format!("invalid decimal {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    let n = rows.len();
    let block = |k: usize| DMatrix::from_fn(n, d, |i, j| rows[i][k * d + j]);
    Ok((
        labels,
        Embeddings {
            f: block(0),
            h: block(1),
            hf: block(2),
        },
    ))
}
