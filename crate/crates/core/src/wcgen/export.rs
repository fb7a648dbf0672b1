//! CSV, LIBSVM and JSON sidecar output, plus the matching parsers.
//!
//! Floats are written with 17 significant digits so a parse reproduces the
//! exact `f64`. Labels are the integers `1` and `-1`.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_len, DataMatrix, Variant};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Libsvm,
    Json,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Libsvm => "libsvm",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "libsvm" | "svmlight" => Ok(ExportFormat::Libsvm),
            "json" | "json-meta" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

/// JSON sidecar describing a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub k: usize,
    pub sigma: f64,
    pub zeta: f64,
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n_rows: usize,
    pub c: f64,
    pub f_star: f64,
    pub xstar_norm_sq: f64,
    pub spectral_norm_bound: f64,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_label(v: f64) -> &'static str {
    if v > 0.0 {
        "1"
    } else {
        "-1"
    }
}

pub fn write_csv<M: DataMatrix + ?Sized, W: Write>(data: &M, out: &mut W) -> Result<()> {
    let k = data.n_features();
    let header: Vec<String> = (1..=k).map(|j| format!("feature_{j}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    let labels = data.labels();
    for (i, label) in labels.iter().enumerate() {
        let row: Vec<String> = data.row(i).into_iter().map(fmt_f64).collect();
        writeln!(out, "{},{}", row.join(","), fmt_label(*label))?;
    }
    Ok(())
}

/// One `label idx:val ...` line per row, 1-based indices, zeros omitted.
pub fn write_libsvm<M: DataMatrix + ?Sized, W: Write>(data: &M, out: &mut W) -> Result<()> {
    let labels = data.labels();
    for (i, label) in labels.iter().enumerate() {
        write!(out, "{}", fmt_label(*label))?;
        for (j, v) in data.row(i).into_iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, fmt_f64(v))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(m: &DenseMatrix, out: &mut W) -> Result<()> {
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes `data` (CSV or LIBSVM) or `meta` (JSON) to `path`.
pub fn export<M: DataMatrix + ?Sized>(
    data: &M,
    meta: &DatasetMeta,
    format: ExportFormat,
    path: &Path,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ExportFormat::Csv => write_csv(data, &mut out)?,
        ExportFormat::Libsvm => write_libsvm(data, &mut out)?,
        ExportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &serde_json::to_value(meta)?)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A dense dataset read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub n_features: usize,
}

impl DataMatrix for ParsedDataset {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn labels(&self) -> Vec<f64> {
        self.labels.clone()
    }

    fn matvec_a(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.n_features)?;
        Ok(self.rows.iter().map(|r| linalg::dot(r, x)).collect())
    }

    fn matvec_at(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(v, self.rows.len())?;
        let mut out = vec![0.0; self.n_features];
        for (r, vi) in self.rows.iter().zip(v) {
            linalg::axpy(*vi, r, &mut out);
        }
        Ok(out)
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.rows[i].clone()
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number `{tok}`"),
    })
}

pub fn parse_csv<R: BufRead>(input: R) -> Result<ParsedDataset> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })??;
    let n_features = header.split(',').count().saturating_sub(1);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_features + 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", n_features + 1, fields.len()),
            });
        }
        let row = fields[..n_features]
            .iter()
            .map(|t| parse_num::<f64>(t, lineno))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        labels.push(parse_num::<i64>(fields[n_features], lineno)? as f64);
    }
    Ok(ParsedDataset {
        rows,
        labels,
        n_features,
    })
}

pub fn parse_libsvm<R: BufRead>(input: R, n_features: usize) -> Result<ParsedDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let mut toks = line.split_whitespace();
        let Some(label) = toks.next() else { continue };
        labels.push(parse_num::<i64>(label, lineno)? as f64);
        let mut row = vec![0.0; n_features];
        for tok in toks {
            let (j, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got `{tok}`"),
            })?;
            let j: usize = parse_num(j, lineno)?;
            if j == 0 || j > n_features {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("index {j} out of range"),
                });
            }
            row[j - 1] = parse_num(v, lineno)?;
        }
        rows.push(row);
    }
    Ok(ParsedDataset {
        rows,
        labels,
        n_features,
    })
}
