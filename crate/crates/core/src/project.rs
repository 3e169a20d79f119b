//! One-dimensional supervised projections: SemAxis (centroid difference)
//! and two-class Fisher LDA, fitted leave-one-out, plus the ranking of
//! vocabulary words along a BoW axis.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bow::Vocabulary;
use crate::label::Label;
use crate::matrix::{dot, norm, EmbeddingKind, EmbeddingMatrix, Matrix, Scaler};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("cannot fit axis: {0}")]
    Axis(String),
    #[error("degenerate axis: class centroids coincide")]
    DegenerateAxis,
    #[error("dimension mismatch: axis has {axis} components, rows have {rows}")]
    Dimension { axis: usize, rows: usize },
    #[error("word ranking needs a bag-of-words axis: {0}")]
    WordRank(String),
    #[error("leave-one-out projection needs {0}")]
    LooPrecondition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisMethod {
    SemAxis,
    Lda,
}

impl fmt::Display for AxisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisMethod::SemAxis => "semaxis",
            AxisMethod::Lda => "lda",
        })
    }
}

impl FromStr for AxisMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semaxis" => Ok(AxisMethod::SemAxis),
            "lda" => Ok(AxisMethod::Lda),
            other => Err(format!("unknown projection method {other:?} (expected semaxis or lda)")),
        }
    }
}

/// Unit direction in feature space; Success projects to larger values.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub direction: Vec<f64>,
    pub method: AxisMethod,
    pub embedding: EmbeddingKind,
    pub fitted_on: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub doc_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
    pub method: AxisMethod,
    pub embedding: EmbeddingKind,
    /// Held-out documents whose fold could not produce an axis.
    pub skipped: Vec<(String, ProjectionError)>,
}

impl ProjectionResult {
    pub fn scores_for(&self, label: Label) -> Vec<f64> {
        self.scores.iter().zip(&self.labels).filter(|(_, &l)| l == label).map(|(&s, _)| s).collect()
    }

    /// `doc_id\tlabel\tscore` per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "doc_id\tlabel\tscore")?;
        for ((id, label), s) in self.doc_ids.iter().zip(&self.labels).zip(&self.scores) {
            writeln!(w, "{id}\t{label}\t{s:?}")?;
        }
        Ok(())
    }
}

fn class_centroids(values: &Matrix, labels: &[Label], fit_rows: &[usize]) -> Result<[Vec<f64>; 2], ProjectionError> {
    let p = values.cols();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0usize; 2];
    for &i in fit_rows {
        let c = labels[i].class_id();
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(values.row(i)) {
            *s += v;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(ProjectionError::Axis("fit rows contain a single class".into()));
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>, ProjectionError> {
    let n = norm(&v);
    if !n.is_finite() {
        return Err(ProjectionError::Axis("non-finite direction".into()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

fn centroid_difference(values: &Matrix, labels: &[Label], fit_rows: &[usize]) -> Result<(Vec<f64>, [Vec<f64>; 2]), ProjectionError> {
    let centroids = class_centroids(values, labels, fit_rows)?;
    let [other, success] = &centroids;
    let diff: Vec<f64> = success.iter().zip(other).map(|(s, o)| s - o).collect();
    let scale = norm(success).max(norm(other)).max(f64::MIN_POSITIVE);
    if norm(&diff) <= 1e-12 * scale {
        return Err(ProjectionError::DegenerateAxis);
    }
    Ok((diff, centroids))
}

fn fitted_ids(matrix: &EmbeddingMatrix, fit_rows: &[usize]) -> Vec<String> {
    fit_rows.iter().map(|&i| matrix.doc_ids[i].clone()).collect()
}

/// Unit vector from the Other centroid to the Success centroid.
pub fn semaxis_axis(matrix: &EmbeddingMatrix, labels: &[Label], fit_rows: &[usize]) -> Result<Axis, ProjectionError> {
    let (diff, _) = centroid_difference(&matrix.values, labels, fit_rows)?;
    Ok(Axis {
        direction: unit(diff)?,
        method: AxisMethod::SemAxis,
        embedding: matrix.kind,
        fitted_on: fitted_ids(matrix, fit_rows),
    })
}

/// Solves `(S_W + λI) w = Δμ` with `λ = shrinkage · trace(S_W) / p`, where
/// `S_W` is the pooled within-class scatter of the fit rows.
///
/// When the feature count exceeds the number of fit rows the system is
/// solved through the Woodbury identity on the n×n Gram matrix of the
/// centred rows, which is exact and avoids forming the p×p scatter.
pub fn lda_axis(
    matrix: &EmbeddingMatrix,
    labels: &[Label],
    fit_rows: &[usize],
    shrinkage: f64,
) -> Result<Axis, ProjectionError> {
    if !(shrinkage >= 0.0 && shrinkage.is_finite()) {
        return Err(ProjectionError::Axis(format!("shrinkage must be finite and >= 0, got {shrinkage}")));
    }
    let values = &matrix.values;
    let p = values.cols();
    let (diff, centroids) = centroid_difference(values, labels, fit_rows)?;
    let n = fit_rows.len();
    // centred rows Z (n x p), S_W = Z^T Z
    let mut z = DMatrix::<f64>::zeros(n, p);
    for (r, &i) in fit_rows.iter().enumerate() {
        let mu = &centroids[labels[i].class_id()];
        for (j, (v, m)) in values.row(i).iter().zip(mu).enumerate() {
            z[(r, j)] = v - m;
        }
    }
    let trace: f64 = z.iter().map(|v| v * v).sum();
    let lambda = shrinkage * trace / p as f64;
    let rhs = DVector::from_column_slice(&diff);

    let w = if p <= n {
        let mut a = z.transpose() * &z;
        for j in 0..p {
            a[(j, j)] += lambda;
        }
        solve_spd(a, &rhs)?
    } else {
        if lambda <= 0.0 {
            return Err(ProjectionError::Axis(format!(
                "within-class scatter is singular ({p} features, {n} rows); use shrinkage > 0"
            )));
        }
        let mut gram = &z * z.transpose();
        for j in 0..n {
            gram[(j, j)] += lambda;
        }
        let zv = &z * &rhs;
        let inner = solve_spd(gram, &zv)?;
        (rhs.clone() - z.transpose() * inner) / lambda
    };
    let mut direction: Vec<f64> = w.iter().copied().collect();
    if direction.iter().any(|v| !v.is_finite()) {
        return Err(ProjectionError::Axis("non-finite LDA solution".into()));
    }
    if dot(&direction, &diff) < 0.0 {
        direction.iter_mut().for_each(|v| *v = -*v);
    }
    if norm(&direction) == 0.0 {
        return Err(ProjectionError::DegenerateAxis);
    }
    Ok(Axis {
        direction: unit(direction)?,
        method: AxisMethod::Lda,
        embedding: matrix.kind,
        fitted_on: fitted_ids(matrix, fit_rows),
    })
}

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, ProjectionError> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| ProjectionError::Axis("within-class scatter is singular; use shrinkage > 0".into()))
}

pub fn fit_axis(
    matrix: &EmbeddingMatrix,
    labels: &[Label],
    fit_rows: &[usize],
    method: AxisMethod,
    shrinkage: f64,
) -> Result<Axis, ProjectionError> {
    match method {
        AxisMethod::SemAxis => semaxis_axis(matrix, labels, fit_rows),
        AxisMethod::Lda => lda_axis(matrix, labels, fit_rows, shrinkage),
    }
}

/// Scalar position of every row along `axis`.
pub fn project(matrix: &EmbeddingMatrix, labels: &[Label], axis: &Axis) -> Result<ProjectionResult, ProjectionError> {
    if matrix.cols() != axis.direction.len() {
        return Err(ProjectionError::Dimension { axis: axis.direction.len(), rows: matrix.cols() });
    }
    Ok(ProjectionResult {
        doc_ids: matrix.doc_ids.clone(),
        labels: labels.to_vec(),
        scores: matrix.values.iter_rows().map(|r| dot(r, &axis.direction)).collect(),
        method: axis.method,
        embedding: axis.embedding,
        skipped: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LooOptions {
    pub method: AxisMethod,
    pub shrinkage: f64,
    /// Refit z-score statistics without the held-out row in every fold.
    pub standardize: bool,
}

impl Default for LooOptions {
    fn default() -> Self {
        LooOptions { method: AxisMethod::SemAxis, shrinkage: 1e-3, standardize: false }
    }
}

/// Axis fitted without row `held_out` (and, if requested, z-scored with
/// statistics from the remaining rows), together with the held-out row in
/// the same feature space.
pub fn loo_fold(
    matrix: &EmbeddingMatrix,
    labels: &[Label],
    held_out: usize,
    options: &LooOptions,
) -> Result<(Axis, Vec<f64>), ProjectionError> {
    let fit_rows: Vec<usize> = (0..matrix.rows()).filter(|&i| i != held_out).collect();
    if options.standardize {
        let scaler = Scaler::fit(&matrix.values, &fit_rows);
        let scaled = matrix.standardize_with(&scaler);
        let axis = fit_axis(&scaled, labels, &fit_rows, options.method, options.shrinkage)?;
        Ok((axis, scaled.values.row(held_out).to_vec()))
    } else {
        let axis = fit_axis(matrix, labels, &fit_rows, options.method, options.shrinkage)?;
        Ok((axis, matrix.values.row(held_out).to_vec()))
    }
}

/// Held-out scalar for every document, each from an axis fitted on the
/// other n-1 documents. Folds that cannot fit an axis are skipped and
/// reported.
pub fn loo_projection(
    matrix: &EmbeddingMatrix,
    labels: &[Label],
    options: &LooOptions,
    exec: Execution,
) -> Result<ProjectionResult, ProjectionError> {
    let n = matrix.rows();
    if labels.len() != n {
        return Err(ProjectionError::LooPrecondition(format!("{} labels for {n} rows", labels.len())));
    }
    if n < 3 {
        return Err(ProjectionError::LooPrecondition(format!("at least 3 documents, got {n}")));
    }
    if !labels.contains(&Label::Success) || !labels.contains(&Label::Other) {
        return Err(ProjectionError::LooPrecondition("both classes present".into()));
    }
    let folds = par::map_indices(exec, n, |d| {
        loo_fold(matrix, labels, d, options).map(|(axis, row)| dot(&row, &axis.direction))
    });
    let mut out = ProjectionResult {
        doc_ids: Vec::new(),
        labels: Vec::new(),
        scores: Vec::new(),
        method: options.method,
        embedding: matrix.kind,
        skipped: Vec::new(),
    };
    for (d, r) in folds.into_iter().enumerate() {
        match r {
            Ok(s) => {
                out.doc_ids.push(matrix.doc_ids[d].clone());
                out.labels.push(labels[d]);
                out.scores.push(s);
            }
            Err(e) => {
                log::warn!("leave-one-out fold for {} skipped: {e}", matrix.doc_ids[d]);
                out.skipped.push((matrix.doc_ids[d].clone(), e));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordRanking {
    pub success: Vec<(String, f64)>,
    pub other: Vec<(String, f64)>,
}

impl WordRanking {
    /// `class\trank\tword\tweight` per line, Success block first.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "class\trank\tword\tweight")?;
        for (label, list) in [(Label::Success, &self.success), (Label::Other, &self.other)] {
            for (i, (word, weight)) in list.iter().enumerate() {
                writeln!(w, "{label}\t{}\t{word}\t{weight:?}", i + 1)?;
            }
        }
        Ok(())
    }
}

/// The `k/2` most positive and `k/2` most negative axis components, mapped
/// back to vocabulary words. Ties are broken by vocabulary order.
pub fn top_axis_words(axis: &Axis, vocab: &Vocabulary, k: usize) -> Result<WordRanking, ProjectionError> {
    if axis.embedding != EmbeddingKind::Bow {
        return Err(ProjectionError::WordRank(format!("axis was fitted on a {} matrix", axis.embedding)));
    }
    if vocab.len() != axis.direction.len() {
        return Err(ProjectionError::WordRank(format!(
            "vocabulary has {} words, axis has {} components",
            vocab.len(),
            axis.direction.len()
        )));
    }
    let half = k / 2;
    let pick = |sign: f64| -> Vec<(String, f64)> {
        let mut idx: Vec<usize> = (0..vocab.len()).filter(|&j| sign * axis.direction[j] > 0.0).collect();
        idx.sort_by(|&a, &b| {
            (sign * axis.direction[b]).total_cmp(&(sign * axis.direction[a])).then(a.cmp(&b))
        });
        idx.into_iter().take(half).map(|j| (vocab.words[j].clone(), axis.direction[j])).collect()
    };
    Ok(WordRanking { success: pick(1.0), other: pick(-1.0) })
}
