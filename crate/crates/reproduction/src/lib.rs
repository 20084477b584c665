//! Acceptance checks against published results live in `tests/acceptance.rs`.
//!
//! Datasets are read from `$DGNN_DATA_DIR`, or `data/` at the workspace
//! root. Every check prints one `PASS` or `FAIL` line.
