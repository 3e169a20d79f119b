//! Bag-of-words: a document-frequency-thresholded vocabulary and the
//! relative-frequency matrix over it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::Corpus;
use crate::matrix::{EmbeddingKind, EmbeddingMatrix, Matrix};
use crate::par::{self, Execution};

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("document {0:?} has not been preprocessed")]
    NotPreprocessed(String),
    #[error("min_fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("malformed vocabulary file at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Words kept for the BoW representation, in ascending byte order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Vec<String>,
    pub doc_frequency: Vec<usize>,
    pub min_doc_count: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }

    /// One `word\tdoc_frequency` line per entry.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, df) in self.words.iter().zip(&self.doc_frequency) {
            writeln!(w, "{word}\t{df}")?;
        }
        Ok(())
    }

    /// Reads a vocabulary file. The threshold is not stored in the file; it
    /// is recovered as the smallest document frequency present.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, VocabularyError> {
        let mut words = Vec::new();
        let mut doc_frequency = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (w, df) = line
                .split_once('\t')
                .ok_or_else(|| VocabularyError::Parse { line: i + 1, message: "expected word<TAB>count".into() })?;
            let df: usize = df
                .parse()
                .map_err(|_| VocabularyError::Parse { line: i + 1, message: format!("bad count {df:?}") })?;
            words.push(w.to_string());
            doc_frequency.push(df);
        }
        let min_doc_count = doc_frequency.iter().copied().min().unwrap_or(0);
        Ok(Vocabulary { words, doc_frequency, min_doc_count })
    }
}

fn tokens_of(corpus: &Corpus) -> Result<Vec<&[String]>, VocabularyError> {
    corpus
        .documents
        .iter()
        .map(|d| d.tokens.as_deref().ok_or_else(|| VocabularyError::NotPreprocessed(d.id.clone())))
        .collect()
}

/// Minimum number of documents for a word at `min_fraction` of `n`.
pub fn min_doc_count(n: usize, min_fraction: f64) -> usize {
    // guard against 0.5 * 219 = 109.50000000000001 style rounding
    let raw = min_fraction * n as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Keeps every word occurring in at least `ceil(min_fraction * N)` documents.
pub fn build_vocabulary(corpus: &Corpus, min_fraction: f64) -> Result<Vocabulary, VocabularyError> {
    if !(min_fraction > 0.0 && min_fraction <= 1.0) {
        return Err(VocabularyError::BadFraction(min_fraction));
    }
    if corpus.is_empty() {
        return Err(VocabularyError::EmptyCorpus);
    }
    let docs = tokens_of(corpus)?;
    let threshold = min_doc_count(docs.len(), min_fraction).max(1);
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &docs {
        let distinct: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        for w in distinct {
            *df.entry(w).or_default() += 1;
        }
    }
    let (words, doc_frequency) = df
        .into_iter()
        .filter(|&(_, c)| c >= threshold)
        .map(|(w, c)| (w.to_string(), c))
        .unzip();
    Ok(Vocabulary { words, doc_frequency, min_doc_count: threshold })
}

/// Relative frequency of each vocabulary word per document. The denominator
/// is the document's full token count, so out-of-vocabulary tokens still
/// dilute the row.
pub fn bow_matrix(corpus: &Corpus, vocab: &Vocabulary, exec: Execution) -> Result<EmbeddingMatrix, VocabularyError> {
    let docs = tokens_of(corpus)?;
    let index = vocab.index();
    let p = vocab.len();
    let rows = par::map_slice(exec, &docs, |tokens| {
        let mut row = vec![0.0; p];
        if tokens.is_empty() {
            return row;
        }
        for t in tokens.iter() {
            if let Some(&j) = index.get(t.as_str()) {
                row[j] += 1.0;
            }
        }
        let total = tokens.len() as f64;
        row.iter_mut().for_each(|v| *v /= total);
        row
    });
    for (d, tokens) in corpus.documents.iter().zip(&docs) {
        if tokens.is_empty() {
            log::warn!("document {} has no tokens; its BoW row is all zeros", d.id);
        }
    }
    let mut data = Vec::with_capacity(docs.len() * p);
    for r in rows {
        data.extend(r);
    }
    let values = Matrix::from_vec(docs.len(), p, data).expect("row lengths match the vocabulary");
    Ok(EmbeddingMatrix::new(EmbeddingKind::Bow, corpus.doc_ids(), values).expect("one row per document"))
}

/// Z-scores all rows with statistics from `fit_rows`.
pub fn standardize(matrix: &EmbeddingMatrix, fit_rows: &[usize]) -> EmbeddingMatrix {
    matrix.standardize(fit_rows)
}
