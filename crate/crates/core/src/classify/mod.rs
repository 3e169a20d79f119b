//! Binary classifiers behind one fit / predict / decision-score contract.
//!
//! Defaults follow the usual library defaults: KNN with k = 5, L2 logistic
//! regression with C = 1, Gaussian naive Bayes with variance smoothing
//! 1e-9, an unpruned Gini CART tree, a 100-tree random forest with √p
//! features per split, and an RBF C-SVM with `gamma = 1 / (p · Var(X))`
//! capped at 10,000 SMO iterations.
//!
//! Class ids are `Other = 0`, `Success = 1`; every voting tie resolves to
//! `Other`.

mod forest;
mod knn;
mod logistic;
mod naive_bayes;
mod svm;
mod tree;

pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use knn::{Knn, KnnParams};
pub use logistic::{objective_and_gradient, LogisticRegression, LrParams};
pub use naive_bayes::{GaussianNb, NbParams};
pub use svm::{resolve_gamma, Gamma, Kernel, Svm, SvmParams};
pub use tree::{DecisionTree, Node, TreeParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;
use crate::matrix::Matrix;
use crate::par::Execution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("cannot fit {kind}: {message}")]
    Fit { kind: ModelKind, message: String },
    #[error("model expects {expected} features, got {got}")]
    Predict { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Lr,
    Nb,
    Dt,
    Rf,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [ModelKind::Knn, ModelKind::Lr, ModelKind::Nb, ModelKind::Dt, ModelKind::Rf, ModelKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Lr => "lr",
            ModelKind::Nb => "nb",
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown model {s:?} (expected one of knn, lr, nb, dt, rf, svm)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparameters {
    Knn(KnnParams),
    Lr(LrParams),
    Nb(NbParams),
    Dt(TreeParams),
    Rf(ForestParams),
    Svm(SvmParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(hyperparameters: Hyperparameters, seed: u64) -> Self {
        ModelSpec { hyperparameters, seed }
    }

    /// Spec with every hyperparameter at its default.
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        let hyperparameters = match kind {
            ModelKind::Knn => Hyperparameters::Knn(KnnParams::default()),
            ModelKind::Lr => Hyperparameters::Lr(LrParams::default()),
            ModelKind::Nb => Hyperparameters::Nb(NbParams::default()),
            ModelKind::Dt => Hyperparameters::Dt(TreeParams::default()),
            ModelKind::Rf => Hyperparameters::Rf(ForestParams::default()),
            ModelKind::Svm => Hyperparameters::Svm(SvmParams::default()),
        };
        ModelSpec { hyperparameters, seed }
    }

    pub fn kind(&self) -> ModelKind {
        match self.hyperparameters {
            Hyperparameters::Knn(_) => ModelKind::Knn,
            Hyperparameters::Lr(_) => ModelKind::Lr,
            Hyperparameters::Nb(_) => ModelKind::Nb,
            Hyperparameters::Dt(_) => ModelKind::Dt,
            Hyperparameters::Rf(_) => ModelKind::Rf,
            Hyperparameters::Svm(_) => ModelKind::Svm,
        }
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Knn(Knn),
    Lr(LogisticRegression),
    Nb(GaussianNb),
    Dt(DecisionTree),
    Rf(RandomForest),
    Svm(Svm),
}

/// A fitted model; prediction is a pure function of it.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub training_row_count: usize,
    pub n_features: usize,
    fitted: Fitted,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    /// Whether the optimiser met its tolerance (always true for models
    /// without an iterative fit).
    pub fn converged(&self) -> bool {
        match &self.fitted {
            Fitted::Lr(m) => m.converged,
            Fitted::Svm(m) => m.converged,
            _ => true,
        }
    }

    pub fn as_svm(&self) -> Option<&Svm> {
        match &self.fitted {
            Fitted::Svm(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticRegression> {
        match &self.fitted {
            Fitted::Lr(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<&DecisionTree> {
        match &self.fitted {
            Fitted::Dt(m) => Some(m),
            _ => None,
        }
    }

    fn check(&self, x: &Matrix) -> Result<(), ClassifyError> {
        if x.cols() != self.n_features {
            return Err(ClassifyError::Predict { expected: self.n_features, got: x.cols() });
        }
        Ok(())
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Knn(m) => m.score(row),
            Fitted::Lr(m) => m.probability(row),
            Fitted::Nb(m) => m.log_posterior_difference(row),
            Fitted::Dt(m) => m.success_fraction(row),
            Fitted::Rf(m) => m.vote_fraction(row),
            Fitted::Svm(m) => m.decision(row),
        }
    }

    fn predict_row(&self, row: &[f64]) -> Label {
        match &self.fitted {
            Fitted::Knn(m) => m.predict(row),
            Fitted::Lr(m) => m.predict(row),
            Fitted::Nb(m) => m.predict(row),
            Fitted::Dt(m) => m.predict(row),
            Fitted::Rf(m) => m.predict(row),
            Fitted::Svm(m) => m.predict(row),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<Label>, ClassifyError> {
        self.check(x)?;
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    /// Continuous score per row: LR success probability, SVM margin, NB
    /// log-posterior difference (success minus other), and the success
    /// fraction of the KNN neighbourhood, forest votes or tree leaf.
    pub fn decision_scores(&self, x: &Matrix) -> Result<Vec<f64>, ClassifyError> {
        self.check(x)?;
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }
}

fn validate(kind: ModelKind, x: &Matrix, y: &[Label]) -> Result<(), ClassifyError> {
    let fail = |message: String| Err(ClassifyError::Fit { kind, message });
    if x.rows() != y.len() {
        return fail(format!("{} rows but {} labels", x.rows(), y.len()));
    }
    if !y.contains(&Label::Success) || !y.contains(&Label::Other) {
        return fail("training labels contain a single class".into());
    }
    if !x.is_finite() {
        return fail("features contain non-finite values".into());
    }
    Ok(())
}

pub(crate) fn majority(counts: [usize; 2]) -> Label {
    if counts[1] > counts[0] {
        Label::Success
    } else {
        Label::Other
    }
}

/// Fits a model. Random forests spread tree construction according to `exec`.
pub fn fit_with(spec: &ModelSpec, x: &Matrix, y: &[Label], exec: Execution) -> Result<TrainedModel, ClassifyError> {
    let kind = spec.kind();
    validate(kind, x, y)?;
    let fitted = match &spec.hyperparameters {
        Hyperparameters::Knn(p) => Fitted::Knn(Knn::fit(p, x, y)?),
        Hyperparameters::Lr(p) => Fitted::Lr(LogisticRegression::fit(p, x, y)),
        Hyperparameters::Nb(p) => Fitted::Nb(GaussianNb::fit(p, x, y)),
        Hyperparameters::Dt(p) => Fitted::Dt(DecisionTree::fit(p, x, y)),
        Hyperparameters::Rf(p) => Fitted::Rf(RandomForest::fit(p, x, y, spec.seed, exec)),
        Hyperparameters::Svm(p) => Fitted::Svm(Svm::fit(p, x, y)?),
    };
    Ok(TrainedModel { spec: spec.clone(), training_row_count: x.rows(), n_features: x.cols(), fitted })
}

pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[Label]) -> Result<TrainedModel, ClassifyError> {
    fit_with(spec, x, y, Execution::Sequential)
}
