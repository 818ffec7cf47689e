//! Dataset ingestion, preprocessing, vertical splitting, and synthesis.
//!
//! CSV ingestion handles the common tabular shape: numeric columns parsed as
//! f64, categorical columns one-hot encoded, rows with missing cells (empty
//! or `?`) dropped and counted. Labels must be binary after mapping; a
//! two-valued string column is mapped to {0,1} by lexicographic order of the
//! two values, so e.g. `<=50K` becomes 0 and `>50K` becomes 1.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, DenseVector};
use crate::rng::{RngStream, PARTY_HARNESS};

/// A labeled dataset with named features.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn labels_vector(&self) -> DenseVector {
        DenseVector::new(self.y.iter().map(|&b| b as f64).collect()).expect("labels are finite")
    }

    /// Fraction of positive labels.
    pub fn positive_rate(&self) -> f64 {
        if self.y.is_empty() {
            return 0.0;
        }
        self.y.iter().filter(|&&b| b == 1).count() as f64 / self.y.len() as f64
    }
}

/// What ingestion did to the raw file.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub rows_dropped: usize,
    pub constant_columns: Vec<String>,
    pub one_hot_expanded: Vec<String>,
}

/// The two parties' views of one dataset: Alice holds the first `d_alice`
/// feature columns, Bob the rest plus the labels. Row order is identical on
/// both sides.
#[derive(Debug, Clone)]
pub struct VerticalSplit {
    pub alice: DenseMatrix,
    pub bob: DenseMatrix,
    pub labels: Vec<u8>,
    pub d_alice: usize,
}

impl VerticalSplit {
    pub fn labels_vector(&self) -> DenseVector {
        DenseVector::new(self.labels.iter().map(|&b| b as f64).collect())
            .expect("labels are finite")
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?"
}

fn read_csv_records(path: &Path, has_header: bool) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::ingestion(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = if has_header {
        reader
            .headers()
            .map_err(|e| Error::ingestion(format!("bad header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        vec![]
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::ingestion(format!("row {}: {e}", i + 1)))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::ingestion(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let width = rows[0].len();
    let header = if has_header {
        if header.len() != width {
            return Err(Error::ingestion("header width differs from data width"));
        }
        header
    } else {
        (0..width).map(|j| format!("col{j}")).collect()
    };
    Ok((header, rows))
}

/// Load a labeled CSV. `label_column` names a header column, or is a 0-based
/// index when the file has no header.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    has_header: bool,
) -> Result<(Dataset, IngestReport)> {
    let (header, raw_rows) = read_csv_records(path, has_header)?;
    let label_idx = if has_header {
        header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::ingestion(format!("label column '{label_column}' not found")))?
    } else {
        label_column
            .parse::<usize>()
            .map_err(|_| Error::ingestion("label column must be an index without a header"))?
    };
    if label_idx >= header.len() {
        return Err(Error::ingestion(format!(
            "label column index {label_idx} out of range"
        )));
    }

    let mut report = IngestReport::default();
    let rows: Vec<Vec<String>> = raw_rows
        .into_iter()
        .filter(|r| {
            let keep = !r.iter().any(|c| is_missing(c));
            if !keep {
                report.rows_dropped += 1;
            }
            keep
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::ingestion("all rows dropped (missing values)"));
    }

    // Label mapping: numeric {0,1} passes through; otherwise exactly two
    // distinct values, mapped in lexicographic order.
    let label_values: Vec<&str> = rows.iter().map(|r| r[label_idx].as_str()).collect();
    let numeric_labels = label_values.iter().all(|v| v.parse::<f64>().is_ok());
    let y: Vec<u8> = if numeric_labels {
        let mut out = Vec::with_capacity(rows.len());
        for (i, v) in label_values.iter().enumerate() {
            let x = v.parse::<f64>().unwrap();
            if x == 0.0 {
                out.push(0);
            } else if x == 1.0 {
                out.push(1);
            } else {
                return Err(Error::ingestion(format!(
                    "row {}: label {x} is not binary",
                    i + 1
                )));
            }
        }
        out
    } else {
        let distinct: BTreeSet<&str> = label_values.iter().copied().collect();
        if distinct.len() != 2 {
            return Err(Error::ingestion(format!(
                "label column has {} distinct values, need exactly 2",
                distinct.len()
            )));
        }
        let ordered: Vec<&str> = distinct.into_iter().collect();
        label_values
            .iter()
            .map(|v| u8::from(*v == ordered[1]))
            .collect()
    };

    // Feature columns: numeric if every cell parses, else categorical.
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for &j in &feature_idx {
        let cells: Vec<&str> = rows.iter().map(|r| r[j].as_str()).collect();
        let parsed: Option<Vec<f64>> = cells
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) => columns.push((header[j].clone(), values)),
            None => {
                // One-hot expand in sorted value order for determinism.
                let distinct: BTreeSet<&str> = cells.iter().copied().collect();
                report.one_hot_expanded.push(header[j].clone());
                for value in distinct {
                    let indicator = cells
                        .iter()
                        .map(|c| if *c == value { 1.0 } else { 0.0 })
                        .collect();
                    columns.push((format!("{}={}", header[j], value), indicator));
                }
            }
        }
    }

    for (name, values) in &columns {
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            report.constant_columns.push(name.clone());
        }
    }

    let n = rows.len();
    let d = columns.len();
    let mut data = vec![0.0; n * d];
    for (j, (_, values)) in columns.iter().enumerate() {
        for (i, &v) in values.iter().enumerate() {
            data[i * d + j] = v;
        }
    }
    let ds = Dataset {
        x: DenseMatrix::new(n, d, data)?,
        y,
        feature_names: columns.into_iter().map(|(name, _)| name).collect(),
    };
    Ok((ds, report))
}

/// Load an unlabeled feature matrix (all columns numeric).
pub fn load_features_csv(path: &Path, has_header: bool) -> Result<DenseMatrix> {
    let (_, rows) = read_csv_records(path, has_header)?;
    let d = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, row) in rows.iter().enumerate() {
        for cell in row {
            let v: f64 = cell.parse().map_err(|_| {
                Error::ingestion(format!("row {}: non-numeric cell '{cell}'", i + 1))
            })?;
            data.push(v);
        }
    }
    DenseMatrix::new(rows.len(), d, data)
}

/// Per-feature affine transform fitted by [`standardize`].
#[derive(Debug, Clone)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let d = ds.n_features();
        if d != self.means.len() {
            return Err(Error::dimension("standardization width mismatch"));
        }
        let mut data = Vec::with_capacity(ds.n_samples() * d);
        for i in 0..ds.n_samples() {
            for (j, &v) in ds.x.row(i).iter().enumerate() {
                data.push((v - self.means[j]) / self.stds[j]);
            }
        }
        Ok(Dataset {
            x: DenseMatrix::new(ds.n_samples(), d, data)?,
            y: ds.y.clone(),
            feature_names: ds.feature_names.clone(),
        })
    }
}

/// Zero-mean, unit-variance transform fitted on `ds`. Zero standard
/// deviations are replaced by 1, leaving constant columns centered at zero.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, Standardization)> {
    let n = ds.n_samples() as f64;
    let d = ds.n_features();
    let mut means = vec![0.0; d];
    for i in 0..ds.n_samples() {
        for (j, &v) in ds.x.row(i).iter().enumerate() {
            means[j] += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut vars = vec![0.0; d];
    for i in 0..ds.n_samples() {
        for (j, &v) in ds.x.row(i).iter().enumerate() {
            let c = v - means[j];
            vars[j] += c * c;
        }
    }
    let stds: Vec<f64> = vars
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s == 0.0 {
                1.0
            } else {
                s
            }
        })
        .collect();
    let transform = Standardization { means, stds };
    let out = transform.apply(ds)?;
    Ok((out, transform))
}

/// Split the first `d_alice` feature columns to Alice, the rest plus labels
/// to Bob.
pub fn vertical_split(ds: &Dataset, d_alice: usize) -> Result<VerticalSplit> {
    let d = ds.n_features();
    if d_alice > d {
        return Err(Error::config(format!(
            "d_alice {d_alice} exceeds feature count {d}"
        )));
    }
    Ok(VerticalSplit {
        alice: ds.x.slice_cols(0, d_alice)?,
        bob: ds.x.slice_cols(d_alice, d)?,
        labels: ds.y.clone(),
        d_alice,
    })
}

/// Two Gaussian clusters at `+-separation/2` along a random unit direction,
/// labels by cluster, classes exactly balanced, rows shuffled.
pub fn synth(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::config("synth: n and d must be >= 1"));
    }
    let mut rng = RngStream::derive(seed, PARTY_HARNESS, "synth");
    let mut direction: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in direction.iter_mut() {
        *v /= norm;
    }
    let n_pos = n / 2;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut data = vec![0.0; n * d];
    let mut y = vec![0u8; n];
    for (slot, &row) in order.iter().enumerate() {
        let label = u8::from(slot < n_pos);
        let shift = if label == 1 { 0.5 } else { -0.5 } * separation;
        for j in 0..d {
            data[row * d + j] = rng.standard_normal() + shift * direction[j];
        }
        y[row] = label;
    }
    Ok(Dataset {
        x: DenseMatrix::new(n, d, data)?,
        y,
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
    })
}

/// Seeded shuffle-then-split; `test_fraction` of rows (rounded) go to the
/// test set.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config("test fraction must lie in (0,1)"));
    }
    let n = ds.n_samples();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::config("split would leave an empty side"));
    }
    let mut rng = RngStream::derive(seed, PARTY_HARNESS, "train-test-split");
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let take = |idx: &[usize]| -> Result<Dataset> {
        Ok(Dataset {
            x: ds.x.select_rows(idx)?,
            y: idx.iter().map(|&i| ds.y[i]).collect(),
            feature_names: ds.feature_names.clone(),
        })
    };
    let test = take(&order[..n_test])?;
    let train = take(&order[n_test..])?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_numeric_csv_with_header() {
        let f = write_csv("a,b,label\n1.0,2.0,1\n3.0,4.0,0\n");
        let (ds, report) = load_csv(f.path(), "label", true).unwrap();
        assert_eq!(ds.n_samples(), 2);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.y, vec![1, 0]);
        assert_eq!(report.rows_dropped, 0);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn maps_string_labels_lexicographically() {
        let f = write_csv("a,income\n1,<=50K\n2,>50K\n3,<=50K\n");
        let (ds, _) = load_csv(f.path(), "income", true).unwrap();
        assert_eq!(ds.y, vec![0, 1, 0]);
    }

    #[test]
    fn one_hot_encodes_categorical_and_drops_missing() {
        let f = write_csv("color,n,label\nred,1,0\nblue,2,1\n?,3,0\nred,4,1\n");
        let (ds, report) = load_csv(f.path(), "label", true).unwrap();
        assert_eq!(report.rows_dropped, 1);
        assert_eq!(report.one_hot_expanded, vec!["color"]);
        assert_eq!(ds.feature_names, vec!["color=blue", "color=red", "n"]);
        assert_eq!(ds.x.row(0), &[0.0, 1.0, 1.0]);
        assert_eq!(ds.x.row(1), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn constant_column_flagged_not_dropped() {
        let f = write_csv("a,c,label\n1,7,0\n2,7,1\n");
        let (ds, report) = load_csv(f.path(), "label", true).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(report.constant_columns, vec!["c"]);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let f = write_csv("a,label\n1,0\n2,2\n");
        assert!(load_csv(f.path(), "label", true).is_err());
        let f = write_csv("a,label\nx1,lo\nx2,mid\nx3,hi\n");
        assert!(load_csv(f.path(), "label", true).is_err());
    }

    #[test]
    fn ingestion_is_deterministic() {
        let f = write_csv("a,b,label\n1,x,0\n2,y,1\n3,x,1\n");
        let (a, _) = load_csv(f.path(), "label", true).unwrap();
        let (b, _) = load_csv(f.path(), "label", true).unwrap();
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn standardize_centers_and_rescales() {
        let ds = Dataset {
            x: DenseMatrix::new(2, 2, vec![0.0, 7.0, 2.0, 7.0]).unwrap(),
            y: vec![0, 1],
            feature_names: vec!["a".into(), "c".into()],
        };
        let (out, t) = standardize(&ds).unwrap();
        assert_eq!(out.x.row(0), &[-1.0, 0.0]);
        assert_eq!(out.x.row(1), &[1.0, 0.0]);
        assert_eq!(t.stds[1], 1.0); // constant column

        // De-standardize roundtrip.
        for i in 0..2 {
            for j in 0..2 {
                let back = out.x.get(i, j) * t.stds[j] + t.means[j];
                assert!((back - ds.x.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertical_split_shapes_and_alignment() {
        let ds = synth(30, 7, 2.0, 9).unwrap();
        let split = vertical_split(&ds, 3).unwrap();
        assert_eq!(split.alice.cols(), 3);
        assert_eq!(split.bob.cols(), 4);
        // Joining row i reconstructs the original row i.
        for i in 0..ds.n_samples() {
            let joined: Vec<f64> = split
                .alice
                .row(i)
                .iter()
                .chain(split.bob.row(i))
                .copied()
                .collect();
            assert_eq!(joined.as_slice(), ds.x.row(i));
        }
        // Extreme cases.
        assert_eq!(vertical_split(&ds, 7).unwrap().bob.cols(), 0);
        assert_eq!(vertical_split(&ds, 0).unwrap().alice.cols(), 0);
        assert!(vertical_split(&ds, 8).is_err());
    }

    #[test]
    fn synth_is_balanced_and_deterministic() {
        let a = synth(101, 5, 3.0, 42).unwrap();
        let b = synth(101, 5, 3.0, 42).unwrap();
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.y, b.y);
        let pos = a.y.iter().filter(|&&v| v == 1).count();
        assert_eq!(pos, 50);
        assert_ne!(a.x.data(), synth(101, 5, 3.0, 43).unwrap().x.data());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = synth(10, 3, 1.0, 1).unwrap();
        let (train, test) = train_test_split(&ds, 0.2, 5).unwrap();
        assert_eq!((train.n_samples(), test.n_samples()), (8, 2));
        let (train2, test2) = train_test_split(&ds, 0.2, 5).unwrap();
        assert_eq!(train.x.data(), train2.x.data());
        assert_eq!(test.y, test2.y);

        let ds4 = synth(4, 2, 1.0, 2).unwrap();
        let (tr, te) = train_test_split(&ds4, 0.5, 1).unwrap();
        assert_eq!((tr.n_samples(), te.n_samples()), (2, 2));
    }
}
