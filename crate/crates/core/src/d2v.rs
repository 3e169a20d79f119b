//! Paragraph vectors, distributed-memory variant (PV-DM), trained with
//! negative sampling.
//!
//! For every position of every document the hidden vector is the mean of
//! the context word vectors and the document vector; it has to score the
//! true centre word above `negatives` words drawn from the unigram^0.75
//! noise distribution.
//!
//! Parameters live in matrices of `AtomicU64`-encoded floats so that the
//! parallel trainer can apply Hogwild-style unsynchronised row updates
//! without undefined behaviour. Relaxed loads and stores compile to plain
//! moves; concurrent updates to the same row may lose increments, which is
//! the usual asynchronous SGD trade-off. `deterministic = true` runs a
//! single worker and is bit-reproducible.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::matrix::{self, dot, EmbeddingKind, EmbeddingMatrix, Matrix, MatrixError};
use crate::par::{self, Execution};
use crate::seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid doc2vec configuration: {0}")]
    Config(String),
    #[error("document {0:?} has not been preprocessed")]
    NotPreprocessed(String),
    #[error("no document has at least two tokens; nothing to train on")]
    EmptyCorpus,
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct D2VConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for D2VConfig {
    fn default() -> Self {
        D2VConfig {
            dim: 64,
            window: 5,
            min_count: 1,
            epochs: 40,
            negatives: 5,
            initial_lr: 0.025,
            final_lr: 0.0001,
            seed: 0,
            deterministic: false,
        }
    }
}

impl D2VConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be >= 1");
        }
        if self.window == 0 {
            return fail("window must be >= 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be >= 1");
        }
        if !(self.final_lr > 0.0 && self.initial_lr >= self.final_lr && self.initial_lr.is_finite()) {
            return fail("learning rates must satisfy initial_lr >= final_lr > 0");
        }
        Ok(())
    }
}

/// Sampling weights for negative words.
#[derive(Clone, Debug)]
pub struct NoiseDistribution {
    pub weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl NoiseDistribution {
    /// Normalises arbitrary nonnegative weights. Panics if they sum to zero.
    pub fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "noise distribution needs positive mass");
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let index = WeightedIndex::new(&weights).expect("weights are finite and nonnegative");
        NoiseDistribution { weights, index }
    }

    /// Unigram counts raised to the 3/4 power.
    pub fn unigram(counts: &[usize]) -> Self {
        let w: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        Self::new(&w)
    }
}

pub fn negative_sample<R: Rng + ?Sized>(noise: &NoiseDistribution, rng: &mut R) -> usize {
    noise.index.sample(rng)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub h: Vec<f64>,
    /// One entry per scored word, target first. A word that appears more
    /// than once (e.g. a negative equal to the target) has total gradient
    /// equal to the sum of its entries.
    pub outputs: Vec<(usize, Vec<f64>)>,
}

/// Negative-sampling loss `-log σ(h·o_t) - Σ log σ(-h·o_n)` and its
/// analytic gradients with respect to `h` and every output row involved.
pub fn loss_and_gradient(h: &[f64], target: usize, negatives: &[usize], output_weights: &Matrix) -> (f64, Gradients) {
    let mut grad_h = vec![0.0; h.len()];
    let mut outputs = Vec::with_capacity(negatives.len() + 1);
    let mut loss = 0.0;
    let scored = std::iter::once((target, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (word, label) in scored {
        let o = output_weights.row(word);
        let f = dot(h, o);
        loss += if label > 0.5 { neg_log_sigmoid(f) } else { neg_log_sigmoid(-f) };
        // d/df of the term is sigmoid(f) - label
        let coef = sigmoid(f) - label;
        for (g, oj) in grad_h.iter_mut().zip(o) {
            *g += coef * oj;
        }
        outputs.push((word, h.iter().map(|hj| coef * hj).collect()));
    }
    (loss, Gradients { h: grad_h, outputs })
}

struct SharedMatrix {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        SharedMatrix { cols: m.cols(), data: m.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect() }
    }

    fn load_row(&self, i: usize, out: &mut [f64]) {
        let row = &self.data[i * self.cols..(i + 1) * self.cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add_to_sum(&self, i: usize, acc: &mut [f64]) {
        let row = &self.data[i * self.cols..(i + 1) * self.cols];
        for (o, a) in acc.iter_mut().zip(row) {
            *o += f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn axpy_row(&self, i: usize, scale: f64, delta: &[f64]) {
        let row = &self.data[i * self.cols..(i + 1) * self.cols];
        for (a, d) in row.iter().zip(delta) {
            let v = f64::from_bits(a.load(Ordering::Relaxed)) + scale * d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_matrix(self, rows: usize) -> Matrix {
        let data = self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        Matrix::from_vec(rows, self.cols, data).expect("shape preserved")
    }
}

#[derive(Clone, Debug)]
pub struct D2VModel {
    pub config: D2VConfig,
    pub doc_ids: Vec<String>,
    pub vocabulary: Vec<String>,
    pub word_counts: Vec<usize>,
    pub doc_vectors: Matrix,
    pub word_vectors: Matrix,
    pub output_weights: Matrix,
    pub noise_distribution: Vec<f64>,
    pub training_loss_per_epoch: Vec<f64>,
    pub skipped_docs: Vec<String>,
}

impl D2VModel {
    /// The book embeddings as a document matrix.
    pub fn embedding(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::new(EmbeddingKind::D2v, self.doc_ids.clone(), self.doc_vectors.clone())
            .expect("one vector per document")
    }

    /// Writes the model file: a `dim vocab_size doc_count seed` header, then
    /// `[doc_ids]`, `[vocabulary]`, `[doc_vectors]`, `[word_vectors]` and
    /// `[output_weights]` sections, the matrices in the matrix text format.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), TrainError> {
        writeln!(w, "{} {} {} {}", self.config.dim, self.vocabulary.len(), self.doc_ids.len(), self.config.seed)?;
        writeln!(w, "[doc_ids]")?;
        for id in &self.doc_ids {
            writeln!(w, "{id}")?;
        }
        writeln!(w, "[vocabulary]")?;
        for (word, count) in self.vocabulary.iter().zip(&self.word_counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        for (name, m) in [
            ("doc_vectors", &self.doc_vectors),
            ("word_vectors", &self.word_vectors),
            ("output_weights", &self.output_weights),
        ] {
            writeln!(w, "[{name}]")?;
            matrix::write_matrix(&mut w, "d2v", m, false)?;
        }
        Ok(())
    }

    /// Reads a model file written by [`D2VModel::write_text`]. Training
    /// losses are not stored and come back empty.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::Format(m);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header".into()))??;
        let h: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|_| bad(format!("bad header field {t:?}"))))
            .collect::<Result<_, _>>()?;
        if h.len() != 4 {
            return Err(bad("header must be `dim vocab_size doc_count seed`".into()));
        }
        let (dim, vocab_size, doc_count) = (h[0] as usize, h[1] as usize, h[2] as usize);
        let expect_section = |lines: &mut std::io::Lines<R>, name: &str| -> Result<(), TrainError> {
            let l = lines.next().ok_or_else(|| bad(format!("missing [{name}]")))??;
            if l != format!("[{name}]") {
                return Err(bad(format!("expected [{name}], found {l:?}")));
            }
            Ok(())
        };
        expect_section(&mut lines, "doc_ids")?;
        let mut doc_ids = Vec::with_capacity(doc_count);
        for _ in 0..doc_count {
            doc_ids.push(lines.next().ok_or_else(|| bad("truncated doc ids".into()))??);
        }
        expect_section(&mut lines, "vocabulary")?;
        let mut vocabulary = Vec::with_capacity(vocab_size);
        let mut word_counts = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            let l = lines.next().ok_or_else(|| bad("truncated vocabulary".into()))??;
            let (w, c) = l.split_once('\t').ok_or_else(|| bad(format!("bad vocabulary line {l:?}")))?;
            vocabulary.push(w.to_string());
            word_counts.push(c.parse().map_err(|_| bad(format!("bad count {c:?}")))?);
        }
        let mut read = |name: &str, rows: usize| -> Result<Matrix, TrainError> {
            expect_section(&mut lines, name)?;
            let (_, m, _) = matrix::read_matrix_lines(&mut lines, 0)?;
            if m.shape() != (rows, dim) {
                return Err(bad(format!("[{name}] has shape {:?}, expected {:?}", m.shape(), (rows, dim))));
            }
            Ok(m)
        };
        let doc_vectors = read("doc_vectors", doc_count)?;
        let word_vectors = read("word_vectors", vocab_size)?;
        let output_weights = read("output_weights", vocab_size)?;
        let noise = if word_counts.iter().any(|&c| c > 0) {
            NoiseDistribution::unigram(&word_counts).weights
        } else {
            Vec::new()
        };
        Ok(D2VModel {
            config: D2VConfig { dim, seed: h[3], ..D2VConfig::default() },
            doc_ids,
            vocabulary,
            word_counts,
            doc_vectors,
            word_vectors,
            output_weights,
            noise_distribution: noise,
            training_loss_per_epoch: Vec::new(),
            skipped_docs: Vec::new(),
        })
    }
}

/// Word ids ordered by descending corpus frequency, ties lexicographic.
fn build_word_index(docs: &[&[String]], min_count: usize) -> (Vec<String>, Vec<usize>) {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        for t in d.iter() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count.max(1)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(w, c)| (w.to_string(), c)).unzip()
}

struct Workspace {
    h: Vec<f64>,
    o: Vec<f64>,
    grad_h: Vec<f64>,
    context: Vec<usize>,
}

struct Trainer<'a> {
    config: &'a D2VConfig,
    docs: &'a [Vec<usize>],
    doc_vectors: SharedMatrix,
    word_vectors: SharedMatrix,
    output_weights: SharedMatrix,
    noise: NoiseDistribution,
    processed: AtomicUsize,
    total_examples: usize,
}

impl Trainer<'_> {
    fn learning_rate(&self, processed: usize) -> f64 {
        let frac = (processed as f64 / self.total_examples as f64).min(1.0);
        self.config.initial_lr - (self.config.initial_lr - self.config.final_lr) * frac
    }

    /// One pass over one document; returns (summed loss, example count).
    fn train_document(&self, doc: usize, epoch: usize, ws: &mut Workspace) -> (f64, usize) {
        let tokens = &self.docs[doc];
        if tokens.len() < 2 {
            return (0.0, 0);
        }
        let cfg = self.config;
        let mut rng = seed::rng(seed::derive_index(
            seed::derive_index(seed::derive(cfg.seed, "d2v-train"), epoch as u64),
            doc as u64,
        ));
        let start = self.processed.fetch_add(tokens.len(), Ordering::Relaxed);
        let mut loss = 0.0;
        for (t, &target) in tokens.iter().enumerate() {
            let lr = self.learning_rate(start + t);
            let lo = t.saturating_sub(cfg.window);
            let hi = (t + cfg.window).min(tokens.len() - 1);
            ws.context.clear();
            ws.context.extend((lo..=hi).filter(|&j| j != t).map(|j| tokens[j]));
            let inputs = (ws.context.len() + 1) as f64;

            ws.h.iter_mut().for_each(|v| *v = 0.0);
            self.doc_vectors.add_to_sum(doc, &mut ws.h);
            for &c in &ws.context {
                self.word_vectors.add_to_sum(c, &mut ws.h);
            }
            ws.h.iter_mut().for_each(|v| *v /= inputs);

            ws.grad_h.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..=cfg.negatives {
                let (word, label) = if k == 0 { (target, 1.0) } else { (negative_sample(&self.noise, &mut rng), 0.0) };
                self.output_weights.load_row(word, &mut ws.o);
                let f = dot(&ws.h, &ws.o);
                loss += if k == 0 { neg_log_sigmoid(f) } else { neg_log_sigmoid(-f) };
                let coef = sigmoid(f) - label;
                for (g, oj) in ws.grad_h.iter_mut().zip(&ws.o) {
                    *g += coef * oj;
                }
                self.output_weights.axpy_row(word, -lr * coef, &ws.h);
            }
            // h is a mean, so each input receives grad_h / inputs
            let step = -lr / inputs;
            self.doc_vectors.axpy_row(doc, step, &ws.grad_h);
            for &c in &ws.context {
                self.word_vectors.axpy_row(c, step, &ws.grad_h);
            }
        }
        (loss, tokens.len())
    }
}

/// Trains PV-DM paragraph vectors over the preprocessed corpus.
pub fn train(corpus: &Corpus, config: &D2VConfig) -> Result<D2VModel, TrainError> {
    train_with(corpus, config, Execution::default())
}

/// As [`train`]; `exec` only matters when `config.deterministic` is false.
pub fn train_with(corpus: &Corpus, config: &D2VConfig, exec: Execution) -> Result<D2VModel, TrainError> {
    config.validate()?;
    let token_lists: Vec<&[String]> = corpus
        .documents
        .iter()
        .map(|d| d.tokens.as_deref().ok_or_else(|| TrainError::NotPreprocessed(d.id.clone())))
        .collect::<Result<_, _>>()?;
    let (vocabulary, word_counts) = build_word_index(&token_lists, config.min_count);
    let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let docs: Vec<Vec<usize>> = token_lists
        .iter()
        .map(|toks| toks.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let mut skipped_docs = Vec::new();
    for (d, ids) in corpus.documents.iter().zip(&docs) {
        if ids.len() < 2 {
            log::warn!("document {} has fewer than 2 usable tokens; skipped by doc2vec", d.id);
            skipped_docs.push(d.id.clone());
        }
    }
    let per_epoch: usize = docs.iter().filter(|d| d.len() >= 2).map(Vec::len).sum();
    if per_epoch == 0 {
        return Err(TrainError::EmptyCorpus);
    }

    let dim = config.dim;
    let mut init_rng = seed::rng(seed::derive(config.seed, "d2v-init"));
    let bound = 0.5 / dim as f64;
    let mut uniform = |rows: usize| {
        let data = (0..rows * dim).map(|_| init_rng.gen_range(-bound..bound)).collect();
        Matrix::from_vec(rows, dim, data).expect("shape")
    };
    let word_init = uniform(vocabulary.len());
    let doc_init = uniform(docs.len());

    let noise = NoiseDistribution::unigram(&word_counts);
    let trainer = Trainer {
        config,
        docs: &docs,
        doc_vectors: SharedMatrix::from_matrix(&doc_init),
        word_vectors: SharedMatrix::from_matrix(&word_init),
        output_weights: SharedMatrix::from_matrix(&Matrix::zeros(vocabulary.len(), dim)),
        noise: noise.clone(),
        processed: AtomicUsize::new(0),
        total_examples: per_epoch * config.epochs,
    };
    let exec = if config.deterministic { Execution::Sequential } else { exec };
    let new_ws = || Workspace { h: vec![0.0; dim], o: vec![0.0; dim], grad_h: vec![0.0; dim], context: Vec::new() };

    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let per_doc: Vec<(f64, usize)> = if exec.is_parallel() {
            par::map_indices(exec, docs.len(), |d| trainer.train_document(d, epoch, &mut new_ws()))
        } else {
            let mut ws = new_ws();
            (0..docs.len()).map(|d| trainer.train_document(d, epoch, &mut ws)).collect()
        };
        let (sum, count) = per_doc.iter().fold((0.0, 0usize), |(s, c), &(l, n)| (s + l, c + n));
        let mean = sum / count as f64;
        log::debug!("doc2vec epoch {}: mean loss {mean:.5}", epoch + 1);
        losses.push(mean);
    }

    let n_docs = docs.len();
    let n_words = vocabulary.len();
    let Trainer { doc_vectors, word_vectors, output_weights, .. } = trainer;
    Ok(D2VModel {
        config: config.clone(),
        doc_ids: corpus.doc_ids(),
        vocabulary,
        word_counts,
        doc_vectors: doc_vectors.into_matrix(n_docs),
        word_vectors: word_vectors.into_matrix(n_words),
        output_weights: output_weights.into_matrix(n_words),
        noise_distribution: noise.weights,
        training_loss_per_epoch: losses,
        skipped_docs,
    })
}
