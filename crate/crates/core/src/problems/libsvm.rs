//! Reader for the LIBSVM sparse text format (`label idx:val idx:val ...`,
//! 1-based feature indices). Rows are densified.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{Error, Result};

/// How raw labels are mapped to `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LabelPolicy {
    /// Two classes map smaller → −1, larger → +1; a single class is kept
    /// as its sign. More than two classes is an error.
    #[default]
    Auto,
    /// The given class becomes +1, every other class −1.
    OneVsRest(f64),
    /// Labels are kept as read.
    Raw,
}

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    load_libsvm_with(path, LabelPolicy::Auto, None)
}

/// `dim` forces the feature count; indices beyond it are a parse error.
pub fn load_libsvm_with(path: impl AsRef<Path>, policy: LabelPolicy, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "libsvm".to_string());
    let reader = BufReader::new(File::open(path)?);
    parse_libsvm(reader, &name, policy, dim)
}

pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, policy: LabelPolicy, dim: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label {label_tok:?}"),
        })?;
        let mut row = Vec::new();
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based".to_string(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid feature value {val:?}"),
            })?;
            if let Some(d) = dim {
                if idx > d {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("feature index {idx} exceeds dimension {d}"),
                    });
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        rows.push(row);
    }

    let d = dim.unwrap_or(max_index);
    let mut features = DMatrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[(i, j)] = v;
        }
    }
    let labels = map_labels(labels, policy)?;
    Dataset::new(features, DVector::from_vec(labels), name)
}

/// Writes `data` in LIBSVM format, skipping zero entries. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for i in 0..data.num_samples() {
        write!(out, "{}", data.labels[i])?;
        for (j, v) in data.features.row(i).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn map_labels(labels: Vec<f64>, policy: LabelPolicy) -> Result<Vec<f64>> {
    match policy {
        LabelPolicy::Raw => Ok(labels),
        LabelPolicy::OneVsRest(class) => Ok(labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect()),
        LabelPolicy::Auto => {
            let mut classes: Vec<f64> = Vec::new();
            for &l in &labels {
                if !classes.contains(&l) {
                    classes.push(l);
                }
            }
            classes.sort_by(f64::total_cmp);
            match classes.as_slice() {
                [] => Ok(labels),
                [_] => Ok(labels.iter().map(|&l| if l > 0.0 { 1.0 } else { -1.0 }).collect()),
                [low, _] => Ok(labels.iter().map(|&l| if l == *low { -1.0 } else { 1.0 }).collect()),
                _ => Err(Error::UnsupportedLabels(classes.len())),
            }
        }
    }
}
