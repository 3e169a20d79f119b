//! Cross-validation and the experiment grid.

mod config;
mod grid;

pub use config::{ConfigError, ExperimentConfig, DEFAULT_CONFIG};
pub use grid::{
    run_grid, CellFilter, CellResult, EmbeddingInfo, EmbeddingSpec, EvalReport, GridOptions, ReportBody, ReportMeta,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{self, ClassifyError, ModelSpec};
use crate::label::Label;
use crate::matrix::{Matrix, Scaler};
use crate::par::{self, Execution};
use crate::seed;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("cannot split {n} rows into {k} folds")]
    Split { n: usize, k: usize },
    #[error("{rows} matrix rows but {labels} labels")]
    Shape { rows: usize, labels: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidationKind {
    #[serde(rename = "loo")]
    Loo,
    #[serde(rename = "kfold")]
    KFold,
}

impl FromStr for ValidationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loo" => Ok(ValidationKind::Loo),
            "kfold" | "k-fold" => Ok(ValidationKind::KFold),
            other => Err(format!("unknown validation scheme {other:?} (expected loo or kfold)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CVScheme {
    pub kind: ValidationKind,
    /// Fold count; ignored for leave-one-out.
    pub k: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl CVScheme {
    pub fn loo() -> Self {
        CVScheme { kind: ValidationKind::Loo, k: 0, stratified: false, seed: 0 }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        CVScheme { kind: ValidationKind::KFold, k, stratified: true, seed }
    }

    /// Column label used in reports: `LOO` or `10-fold`.
    pub fn name(&self) -> String {
        match self.kind {
            ValidationKind::Loo => "LOO".into(),
            ValidationKind::KFold => format!("{}-fold", self.k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    Raw,
    Standardized,
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preprocessing::Raw => "raw",
            Preprocessing::Standardized => "standardized",
        })
    }
}

impl FromStr for Preprocessing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Preprocessing::Raw),
            "standardized" | "std" => Ok(Preprocessing::Standardized),
            other => Err(format!("unknown preprocessing {other:?} (expected raw or standardized)")),
        }
    }
}

/// Which rows the standardization statistics are fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizeScope {
    /// Training rows of each split only.
    Fold,
    /// All rows, before splitting.
    Global,
}

impl FromStr for StandardizeScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fold" => Ok(StandardizeScope::Fold),
            "global" => Ok(StandardizeScope::Global),
            other => Err(format!("unknown standardize_scope {other:?} (expected fold or global)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test index sets. Test sets partition `0..n`; each list is sorted.
pub fn split(n: usize, labels: &[Label], scheme: &CVScheme) -> Result<Vec<Split>, EvaluateError> {
    if n < 2 {
        return Err(EvaluateError::Split { n, k: scheme.k });
    }
    if labels.len() != n {
        return Err(EvaluateError::Shape { rows: n, labels: labels.len() });
    }
    let k = match scheme.kind {
        ValidationKind::Loo => n,
        ValidationKind::KFold => {
            if scheme.k < 2 || scheme.k > n {
                return Err(EvaluateError::Split { n, k: scheme.k });
            }
            scheme.k
        }
    };
    let order: Vec<usize> = match scheme.kind {
        ValidationKind::Loo => (0..n).collect(),
        ValidationKind::KFold => {
            let mut rng = seed::rng(seed::derive(scheme.seed, "kfold"));
            if scheme.stratified {
                let mut order = Vec::with_capacity(n);
                for class in [Label::Other, Label::Success] {
                    let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                    idx.shuffle(&mut rng);
                    order.extend(idx);
                }
                order
            } else {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                idx
            }
        }
    };
    // dealing the class-grouped order round-robin keeps every fold within one
    // sample of proportional for each class
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            Split { train, test }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// Pooled correct/n for leave-one-out, mean fold accuracy for k-fold.
    pub accuracy: f64,
    /// Population std of fold accuracies; k-fold only.
    pub std: Option<f64>,
    pub per_fold: Vec<f64>,
    /// False when any fold's optimiser stopped before its tolerance.
    pub converged: bool,
}

fn standardized_split(x: &Matrix, fit_rows: &[usize]) -> Matrix {
    Scaler::fit(x, fit_rows).transform(x)
}

/// Accuracy of `spec` under `scheme`. With [`Preprocessing::Standardized`]
/// the scaler is fitted per `scope`.
pub fn cross_validate(
    x: &Matrix,
    labels: &[Label],
    spec: &ModelSpec,
    scheme: &CVScheme,
    preprocessing: Preprocessing,
    scope: StandardizeScope,
    exec: Execution,
) -> Result<CvOutcome, EvaluateError> {
    if x.rows() != labels.len() {
        return Err(EvaluateError::Shape { rows: x.rows(), labels: labels.len() });
    }
    let splits = split(x.rows(), labels, scheme)?;
    let global = match (preprocessing, scope) {
        (Preprocessing::Standardized, StandardizeScope::Global) => {
            Some(standardized_split(x, &(0..x.rows()).collect::<Vec<_>>()))
        }
        _ => None,
    };
    let fold_seed = seed::derive(spec.seed, "fold");
    let folds = par::map_slice(exec, &splits, |s| -> Result<(usize, bool), ClassifyError> {
        let f = s.test[0];
        let xs = match (&global, preprocessing) {
            (Some(g), _) => g.clone(),
            (None, Preprocessing::Standardized) => standardized_split(x, &s.train),
            (None, Preprocessing::Raw) => x.clone(),
        };
        let train_y: Vec<Label> = s.train.iter().map(|&i| labels[i]).collect();
        let mut fold_spec = spec.clone();
        fold_spec.seed = seed::derive_index(fold_seed, f as u64);
        // forests are already inside a parallel fold map
        let model = classify::fit_with(&fold_spec, &xs.select_rows(&s.train), &train_y, Execution::Sequential)?;
        let predicted = model.predict(&xs.select_rows(&s.test))?;
        let correct = s.test.iter().zip(&predicted).filter(|(&i, p)| labels[i] == **p).count();
        Ok((correct, model.converged()))
    });
    let mut per_fold = Vec::with_capacity(splits.len());
    let mut total_correct = 0;
    let mut converged = true;
    for (s, r) in splits.iter().zip(folds) {
        let (correct, ok) = r?;
        total_correct += correct;
        converged &= ok;
        per_fold.push(correct as f64 / s.test.len() as f64);
    }
    Ok(match scheme.kind {
        ValidationKind::Loo => {
            CvOutcome { accuracy: total_correct as f64 / x.rows() as f64, std: None, per_fold, converged }
        }
        ValidationKind::KFold => {
            let k = per_fold.len() as f64;
            let mean = per_fold.iter().sum::<f64>() / k;
            let var = per_fold.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k;
            CvOutcome { accuracy: mean, std: Some(var.sqrt()), per_fold, converged }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label::{Other, Success};
    use proptest::prelude::*;

    #[test]
    fn loo_splits_hold_out_one_each() {
        let labels = [Other, Success, Other, Success];
        let s = split(4, &labels, &CVScheme::loo()).unwrap();
        let tests: Vec<Vec<usize>> = s.iter().map(|s| s.test.clone()).collect();
        assert_eq!(tests, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(s[2].train, vec![0, 1, 3]);
    }

    #[test]
    fn ten_balanced_rows_in_five_folds() {
        let labels: Vec<Label> = (0..10).map(|i| if i < 5 { Success } else { Other }).collect();
        for seed in 0..20 {
            for s in split(10, &labels, &CVScheme::kfold(5, seed)).unwrap() {
                let succ = s.test.iter().filter(|&&i| labels[i] == Success).count();
                assert_eq!((s.test.len(), succ), (2, 1));
            }
        }
    }

    #[test]
    fn too_many_folds() {
        let labels = [Other, Success, Other];
        assert!(matches!(split(3, &labels, &CVScheme::kfold(4, 0)), Err(EvaluateError::Split { n: 3, k: 4 })));
        assert!(matches!(split(3, &labels, &CVScheme::kfold(1, 0)), Err(EvaluateError::Split { .. })));
    }

    #[test]
    fn kfold_std_is_population() {
        // 1-NN on a line: each fold is either all right or all wrong, fixed by
        // construction, so the outcome is checked against the fold contents
        let x = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1]]).unwrap();
        let y = [Other, Other, Success, Success];
        let spec = ModelSpec::new(classify::Hyperparameters::Knn(classify::KnnParams { k: 1 }), 0);
        let scheme = CVScheme::kfold(2, 3);
        let out = cross_validate(&x, &y, &spec, &scheme, Preprocessing::Raw, StandardizeScope::Fold, Execution::Sequential)
            .unwrap();
        assert_eq!(out.per_fold, vec![1.0, 1.0]);
        assert_eq!(out.std, Some(0.0));
    }

    proptest! {
        #[test]
        fn folds_partition_and_stay_stratified(n_succ in 1usize..30, n_other in 1usize..30, k in 2usize..12, seed in any::<u64>()) {
            let n = n_succ + n_other;
            prop_assume!(k <= n);
            let labels: Vec<Label> = (0..n).map(|i| if i < n_succ { Success } else { Other }).collect();
            let splits = split(n, &labels, &CVScheme::kfold(k, seed)).unwrap();
            let mut seen = vec![0; n];
            for s in &splits {
                for &i in &s.test { seen[i] += 1; }
                prop_assert_eq!(s.train.len() + s.test.len(), n);
                for class in [Success, Other] {
                    let total = labels.iter().filter(|&&l| l == class).count() as f64;
                    let here = s.test.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((here - total / k as f64).abs() < 1.0 + 1e-12);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
