//! Literary success prediction from full book texts.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`corpus`]: manifest loading, Project Gutenberg boilerplate removal,
//!   per-year class balancing and the one-book-per-author rule.
//! * [`preprocess`]: lowercasing, stopword removal, tokenization, lemmatization.
//! * [`bow`]: document-frequency vocabulary and relative-frequency matrices.
//! * [`d2v`]: PV-DM paragraph vectors trained with negative sampling.
//! * [`project`]: SemAxis and Fisher LDA axes, leave-one-out projections,
//!   kernel density curves and discriminative word rankings.
//! * [`classify`]: KNN, logistic regression, Gaussian naive Bayes, CART,
//!   random forest and an SMO-trained SVM behind one fit/predict contract.
//! * [`evaluate`]: leave-one-out and stratified k-fold cross-validation and
//!   the full experiment grid.
//!
//! Data-parallel loops go through [`par`]; with the `parallel` feature off
//! every stage runs sequentially.

pub mod bow;
pub mod classify;
pub mod corpus;
pub mod d2v;
pub mod density;
pub mod evaluate;
pub mod fsutil;
pub mod label;
pub mod matrix;
pub mod par;
pub mod preprocess;
pub mod project;
pub mod seed;

pub use label::Label;
pub use matrix::{EmbeddingKind, EmbeddingMatrix, Matrix};
pub use par::Execution;

use thiserror::Error;

/// Any error raised by the pipeline, tagged with the stage it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Vocabulary(#[from] bow::VocabularyError),
    #[error(transparent)]
    Train(#[from] d2v::TrainError),
    #[error(transparent)]
    Projection(#[from] project::ProjectionError),
    #[error(transparent)]
    Density(#[from] density::KdeError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Evaluate(#[from] evaluate::EvaluateError),
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
    #[error(transparent)]
    Lexicon(#[from] preprocess::LexiconError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
