//! Dense row-major matrices, document embedding matrices, per-feature
//! z-scoring and the plain-text matrix file format.
//!
//! File format: a header line `kind rows cols standardized` followed by one
//! whitespace-separated row per line. Values are written with Rust's
//! shortest round-trip float formatting, so reading a file back yields
//! bit-identical values.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("malformed matrix file at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(MatrixError::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Population variance of every entry, used by the SVM `gamma = scale` rule.
    pub fn entry_variance(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Bow,
    D2v,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Bow => "bow",
            EmbeddingKind::D2v => "d2v",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bow" => Ok(EmbeddingKind::Bow),
            "d2v" => Ok(EmbeddingKind::D2v),
            other => Err(format!("unknown embedding kind {other:?}")),
        }
    }
}

/// Per-feature z-score statistics fitted on a subset of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation over `fit_rows`. A feature
    /// whose variance is within floating-point noise of zero gets std 1, so
    /// it maps to zero on the fit rows.
    pub fn fit(values: &Matrix, fit_rows: &[usize]) -> Scaler {
        assert!(!fit_rows.is_empty(), "scaler needs at least one fit row");
        let p = values.cols();
        let n = fit_rows.len() as f64;
        let mut means = vec![0.0; p];
        for &i in fit_rows {
            for (m, v) in means.iter_mut().zip(values.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for &i in fit_rows {
            for ((s, v), m) in vars.iter_mut().zip(values.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let eps = f64::EPSILON;
        let stds = vars
            .iter()
            .zip(&means)
            .map(|(s, m)| {
                let var = s / n;
                let bound = n * eps * var + (n * m * eps).powi(2);
                if var <= bound {
                    1.0
                } else {
                    var.sqrt()
                }
            })
            .collect();
        Scaler { means, stds }
    }

    pub fn transform(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// A document-by-feature matrix with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub kind: EmbeddingKind,
    pub doc_ids: Vec<String>,
    pub values: Matrix,
    pub standardized: bool,
    pub column_means: Option<Vec<f64>>,
    pub column_stds: Option<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(kind: EmbeddingKind, doc_ids: Vec<String>, values: Matrix) -> Result<Self, MatrixError> {
        if doc_ids.len() != values.rows() {
            return Err(MatrixError::Shape(format!(
                "{} document ids for {} rows",
                doc_ids.len(),
                values.rows()
            )));
        }
        Ok(EmbeddingMatrix {
            kind,
            doc_ids,
            values,
            standardized: false,
            column_means: None,
            column_stds: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Z-scores every row with statistics fitted on `fit_rows` only.
    pub fn standardize(&self, fit_rows: &[usize]) -> EmbeddingMatrix {
        self.standardize_with(&Scaler::fit(&self.values, fit_rows))
    }

    /// Applies an already fitted scaler.
    pub fn standardize_with(&self, scaler: &Scaler) -> EmbeddingMatrix {
        EmbeddingMatrix {
            kind: self.kind,
            doc_ids: self.doc_ids.clone(),
            values: scaler.transform(&self.values),
            standardized: true,
            column_means: Some(scaler.means.clone()),
            column_stds: Some(scaler.stds.clone()),
        }
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<(), MatrixError> {
        write_matrix(w, &self.kind.to_string(), &self.values, self.standardized)
    }

    /// Reads a matrix file. Document ids are not part of the format and are
    /// filled with row numbers; callers with a label file overwrite them.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, MatrixError> {
        let (kind, values, standardized) = read_matrix(r)?;
        let kind = kind
            .parse::<EmbeddingKind>()
            .map_err(|message| MatrixError::Parse { line: 1, message })?;
        let doc_ids = (0..values.rows()).map(|i| i.to_string()).collect();
        let mut m = EmbeddingMatrix::new(kind, doc_ids, values)?;
        m.standardized = standardized;
        Ok(m)
    }
}

/// Writes the header and rows of one matrix block.
pub fn write_matrix<W: Write>(
    mut w: W,
    kind: &str,
    values: &Matrix,
    standardized: bool,
) -> Result<(), MatrixError> {
    writeln!(w, "{kind} {} {} {standardized}", values.rows(), values.cols())?;
    let mut line = String::new();
    for row in values.iter_rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:?}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads exactly one matrix block (header plus `rows` lines).
pub fn read_matrix<R: BufRead>(r: R) -> Result<(String, Matrix, bool), MatrixError> {
    let mut lines = r.lines();
    read_matrix_lines(&mut lines, 0)
}

pub(crate) fn read_matrix_lines<I>(
    lines: &mut I,
    line_offset: usize,
) -> Result<(String, Matrix, bool), MatrixError>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let parse_err = |line: usize, message: String| MatrixError::Parse { line: line + line_offset, message };
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(1, format!("header needs `kind rows cols standardized`, got {header:?}")));
    }
    let rows: usize = fields[1].parse().map_err(|_| parse_err(1, format!("bad row count {:?}", fields[1])))?;
    let cols: usize = fields[2].parse().map_err(|_| parse_err(1, format!("bad column count {:?}", fields[2])))?;
    let standardized: bool =
        fields[3].parse().map_err(|_| parse_err(1, format!("bad standardized flag {:?}", fields[3])))?;
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let lineno = i + 2;
        let line = lines.next().ok_or_else(|| parse_err(lineno, "unexpected end of file".into()))??;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| parse_err(lineno, format!("bad number {tok:?}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(lineno, format!("expected {cols} values, found {}", data.len() - before)));
        }
    }
    Ok((fields[0].to_string(), Matrix::from_vec(rows, cols, data)?, standardized))
}
