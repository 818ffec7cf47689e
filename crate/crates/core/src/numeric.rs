//! Dense linear algebra and logistic regression primitives.
//!
//! All values are `f64`; matrices are row-major. Constructors reject
//! non-finite entries so downstream math never has to re-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(format!(
                "matrix data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix entries must be finite"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dimension("ragged rows"));
        }
        DenseMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::dimension(format!(
                    "row index {i} out of range ({} rows)",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// New matrix holding columns `lo..hi`.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi || hi > self.cols {
            return Err(Error::dimension(format!(
                "column range {lo}..{hi} out of {} columns",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * (hi - lo));
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[lo..hi]);
        }
        DenseMatrix::new(self.rows, hi - lo, data)
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `A v` (length = rows).
    pub fn matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.cols {
            return Err(Error::dimension(format!(
                "matvec: {} cols vs vector length {}",
                self.cols,
                v.len()
            )));
        }
        let out = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect();
        Ok(DenseVector::raw(out))
    }

    /// `A^T v` (length = cols).
    pub fn transpose_matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.rows {
            return Err(Error::dimension(format!(
                "transpose_matvec: {} rows vs vector length {}",
                self.rows,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v.data()[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(DenseVector::raw(out))
    }
}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("vector entries must be finite"));
        }
        Ok(DenseVector { data })
    }

    /// Construct without the finiteness check (internal fast path).
    pub(crate) fn raw(data: Vec<f64>) -> Self {
        DenseVector { data }
    }

    pub fn zeros(len: usize) -> Self {
        DenseVector {
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::dimension("dot: length mismatch"));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `self += alpha * other`, in place.
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::dimension("add_scaled: length mismatch"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        DenseVector { data }
    }
}

/// Evaluation metrics for a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub loss: f64,
}

/// Numerically stable sigmoid. Computes `e^z / (1 + e^z)` for negative `z`
/// so the exponential never overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus `lambda * ||w||_2^2`.
///
/// `preds` must lie strictly inside (0, 1) and `labels` in {0, 1}.
pub fn logistic_loss(
    preds: &DenseVector,
    labels: &DenseVector,
    w: &DenseVector,
    lambda: f64,
) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::dimension("loss: preds/labels length mismatch"));
    }
    if lambda < 0.0 {
        return Err(Error::domain("loss: lambda must be non-negative"));
    }
    let mut nll = 0.0;
    for (&p, &y) in preds.iter().zip(labels.iter()) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("loss: prediction {p} outside (0,1)")));
        }
        if y != 0.0 && y != 1.0 {
            return Err(Error::domain(format!("loss: label {y} not in {{0,1}}")));
        }
        nll -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    Ok(nll / preds.len() as f64 + lambda * reg)
}

/// Same loss evaluated from logits, stable for any magnitude of `z`.
///
/// Uses `log(1+e^z) - y z = max(z,0) - y z + log1p(e^{-|z|})`, so saturated
/// predictions never produce `ln(0)`.
pub fn logistic_loss_logits(
    logits: &DenseVector,
    labels: &DenseVector,
    w: &DenseVector,
    lambda: f64,
) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(Error::dimension("loss: logits/labels length mismatch"));
    }
    let mut nll = 0.0;
    for (&z, &y) in logits.iter().zip(labels.iter()) {
        nll += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    Ok(nll / logits.len() as f64 + lambda * reg)
}

/// Per-sample residues `y_i - f(x_i)`.
///
/// With labels in {0,1} and predictions strictly inside (0,1), every residue
/// is strictly inside (-1,1) and nonzero; its sign equals the label.
pub fn residues(labels: &DenseVector, preds: &DenseVector) -> Result<DenseVector> {
    if labels.len() != preds.len() {
        return Err(Error::dimension("residues: length mismatch"));
    }
    Ok(DenseVector::raw(
        labels
            .iter()
            .zip(preds.iter())
            .map(|(y, f)| y - f)
            .collect(),
    ))
}

/// Mini-batch logistic gradient `-(1/denom) X^T r`.
pub fn gradient(x_batch: &DenseMatrix, r: &DenseVector, denom: usize) -> Result<DenseVector> {
    if denom == 0 {
        return Err(Error::domain("gradient: denom must be >= 1"));
    }
    let mut g = x_batch.transpose_matvec(r)?;
    let scale = -1.0 / denom as f64;
    for v in g.data.iter_mut() {
        *v *= scale;
    }
    Ok(g)
}

/// Fraction of samples where `(pred >= threshold)` matches the label.
pub fn accuracy(preds: &DenseVector, labels: &DenseVector, threshold: f64) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::dimension("accuracy: length mismatch"));
    }
    if preds.is_empty() {
        return Err(Error::domain("accuracy: empty input"));
    }
    let hits = preds
        .iter()
        .zip(labels.iter())
        .filter(|(&p, &y)| (p >= threshold) == (y == 1.0))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Rank-based AUC (Mann-Whitney), ties counted half.
pub fn auc(scores: &DenseVector, labels: &DenseVector) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dimension("auc: length mismatch"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("auc: need both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores.get(a).total_cmp(&scores.get(b)));
    // Average ranks over tie groups, 1-based.
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores.get(order[j + 1]) == scores.get(order[i]) {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&y, _)| y == 1.0)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Accuracy, AUC and mean log-loss of `scores` against `labels` at the given
/// classification threshold.
pub fn evaluate(scores: &DenseVector, labels: &DenseVector, threshold: f64) -> Result<Metrics> {
    Ok(Metrics {
        accuracy: accuracy(scores, labels, threshold)?,
        auc: auc(scores, labels)?,
        loss: {
            // Metric loss is the unregularized NLL; use the stable logit form.
            let logits = DenseVector::raw(scores.iter().map(|&p| (p / (1.0 - p)).ln()).collect());
            logistic_loss_logits(&logits, labels, &DenseVector::zeros(0), 0.0)?
        },
    })
}
