use std::fs;
use std::path::{Path, PathBuf};

use dgnn::datasets::{
    embedding_header, export_embeddings, load_dataset, read_embeddings, summarize, DatasetStats, GraphSummary,
};
use dgnn::layer::Embeddings;
use dgnn::Error;
use nalgebra::dmatrix;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two-triangles")
}

fn copy_fixture(dir: &Path) {
    for f in ["graph.edges", "features.csv", "labels.csv"] {
        fs::copy(fixture().join(f), dir.join(f)).unwrap();
    }
}

#[test]
fn loads_fixture() {
    let g = load_dataset(fixture()).unwrap();
    let s = summarize(&g);
    assert_eq!(
        s,
        GraphSummary {
            nodes: 6,
            features: 3,
            classes: 2,
            edge_records: 8,
            unique_edges: 7,
            homophily: Some(6.0 / 7.0),
        }
    );
    assert_eq!(g.features()[(0, 2)], 0.5);
    assert_eq!(s.to_string(), "nodes 6 features 3 classes 2 edges 8 (unique 7) homophily 0.857");
    let stats = DatasetStats {
        nodes: 6,
        features: 3,
        classes: 2,
        edges: 8,
        homophily: 0.857,
    };
    assert!(stats.mismatches(&s).is_empty());
}

#[test]
fn malformed_edge_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    fs::write(dir.path().join("graph.edges"), "0 1\n# ok\n1 x\n").unwrap();
    match load_dataset(dir.path()) {
        Err(Error::Parse { line, path, .. }) => {
            assert_eq!(line, 3);
            assert!(path.ends_with("graph.edges"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    fs::write(dir.path().join("graph.edges"), "0 1 2\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { line: 1, .. })));
    fs::write(dir.path().join("graph.edges"), "0 9\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::EndpointOutOfRange(0, 9, 6))));
}

#[test]
fn ragged_features_and_bad_labels() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    fs::write(dir.path().join("features.csv"), "1,2\n3\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { line: 2, .. })));

    copy_fixture(dir.path());
    fs::write(dir.path().join("labels.csv"), "0\n0\n0\n2\n2\n2\n").unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("class 1 is unused"), "{err}");

    fs::write(dir.path().join("labels.csv"), "0\n1\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::RowMismatch { .. })));

    fs::write(dir.path().join("labels.csv"), "0\n1\n-1\n0\n0\n0\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { line: 3, .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));
}

#[test]
fn embedding_export_round_trip() {
    let state = Embeddings {
        f: dmatrix![0.125; -1.0 / 3.0],
        h: dmatrix![2.0; 1e-7],
        hf: dmatrix![-0.987654321987; 0.0],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    export_embeddings(&state, &[1, 0], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], embedding_header(1));
    assert!(lines.iter().all(|l| l.split(',').count() == 5));
    let (labels, back) = read_embeddings(&path).unwrap();
    assert_eq!(labels, [1, 0]);
    for (a, b) in [(&state.f, &back.f), (&state.h, &back.h), (&state.hf, &back.hf)] {
        assert!((a - b).abs().max() < 1e-9);
    }
    assert!(export_embeddings(&state, &[0], &path).is_err());
    assert!(export_embeddings(&state, &[0, 1], dir.path().join("missing/emb.csv")).is_err());
}
