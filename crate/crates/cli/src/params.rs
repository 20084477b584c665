//! Binary parameter files.
//!
//! Layout, all little-endian: a `u32` tensor count, then per tensor `u64`
//! rows, `u64` cols and `rows * cols` `f64` values in row-major order.
//! Tensors are stored as `W`, `W_c`, `b`.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use dgnn::layer::ReconFactor;
use dgnn::train::{ClassifierParams, TrainedModel};
use nalgebra::DMatrix;

fn put_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub fn encode(model: &TrainedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&3u32.to_le_bytes());
    put_matrix(&mut buf, model.factor.w());
    put_matrix(&mut buf, &model.classifier.w_c);
    put_matrix(&mut buf, &model.classifier.b);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        ensure!(self.bytes.len() >= N, "truncated parameter file");
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().unwrap())
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = u64::from_le_bytes(self.take()?) as usize;
        let cols = u64::from_le_bytes(self.take()?) as usize;
        let len = rows.checked_mul(cols).context("tensor shape overflows")?;
        ensure!(self.bytes.len() / 8 >= len, "truncated parameter file");
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f64::from_le_bytes(self.take()?));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }
}

pub fn decode(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { bytes };
    let count = u32::from_le_bytes(r.take()?);
    if count != 3 {
        bail!("expected 3 tensors, found {count}");
    }
    let w = r.matrix()?;
    let w_c = r.matrix()?;
    let b = r.matrix()?;
    ensure!(r.bytes.is_empty(), "{} trailing bytes", r.bytes.len());
    let d = w.nrows();
    ensure!(w_c.nrows() == 3 * d, "W_c has {} rows, expected {}", w_c.nrows(), 3 * d);
    ensure!(b.nrows() == 1 && b.ncols() == w_c.ncols(), "bias shape {:?} does not match W_c", b.shape());
    Ok(TrainedModel {
        factor: ReconFactor::new(w)?,
        classifier: ClassifierParams { w_c, b },
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}
