//! Text normalisation: lowercase, drop stopwords, tokenize, lemmatize.
//!
//! Stopwords are matched against whitespace chunks with their surrounding
//! punctuation stripped, before the chunk is split into tokens. That order
//! is what lets `"thing,"` survive the stopword pass and become `thing`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Corpus;
use crate::par::{self, Execution};

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const BUILTIN_LEXICON: &str = include_str!("../data/lemma_en.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name}, line {line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug)]
pub struct StopwordList {
    pub words: HashSet<String>,
    pub source_name: String,
    /// SHA-256 of the list contents, echoed into run manifests.
    pub digest: String,
}

impl StopwordList {
    /// The 179-entry English list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS, "builtin:english-179").expect("builtin stopword list is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self, LexiconError> {
        let mut words = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() {
                continue;
            }
            if w.chars().any(char::is_whitespace) || w.to_lowercase() != w {
                return Err(LexiconError::Parse {
                    source_name: source_name.into(),
                    line: i + 1,
                    message: format!("stopword {w:?} must be lowercase with no inner whitespace"),
                });
            }
            words.insert(w.to_string());
        }
        Ok(StopwordList { words, source_name: source_name.into(), digest: sha256_hex(text) })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Exception table, suffix rules and base vocabulary of a morphy-style
/// lemmatizer.
#[derive(Clone, Debug)]
pub struct LemmaLexicon {
    pub exceptions: HashMap<String, String>,
    pub suffix_rules: Vec<(String, String)>,
    pub base_vocabulary: HashSet<String>,
    pub source_name: String,
    pub digest: String,
}

impl LemmaLexicon {
    /// English lexicon derived from WordNet 3.0.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON, "builtin:wordnet-3.0").expect("builtin lexicon is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses `exception\tword\tlemma`, `rule\tsuffix\treplacement` and
    /// `base\tword` records. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, LexiconError> {
        let mut lex = LemmaLexicon {
            exceptions: HashMap::new(),
            suffix_rules: Vec::new(),
            base_vocabulary: HashSet::new(),
            source_name: source_name.into(),
            digest: sha256_hex(text),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| LexiconError::Parse { source_name: source_name.into(), line: i + 1, message };
            let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            match (f[0], f.len()) {
                ("exception", 3) => {
                    lex.exceptions.insert(f[1].to_string(), f[2].to_string());
                }
                ("rule", 3) => {
                    if f[1].is_empty() {
                        return Err(err("rule with an empty suffix".into()));
                    }
                    lex.suffix_rules.push((f[1].to_string(), f[2].to_string()));
                }
                ("base", 2) => {
                    lex.base_vocabulary.insert(f[1].to_string());
                }
                _ => return Err(err(format!("unrecognised record {line:?}"))),
            }
        }
        Ok(lex)
    }

}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Lemma of a lowercase alphabetic token.
///
/// A known base form maps to itself; then irregular exceptions apply;
/// otherwise the first suffix rule whose output is a base form applies. Unknown words
/// are returned unchanged.
pub fn lemmatize(token: &str, lexicon: &LemmaLexicon) -> String {
    if lexicon.base_vocabulary.contains(token) {
        return token.to_string();
    }
    if let Some(lemma) = lexicon.exceptions.get(token) {
        return lemma.clone();
    }
    for (suffix, replacement) in &lexicon.suffix_rules {
        if let Some(stem) = token.strip_suffix(suffix.as_str()) {
            if stem.is_empty() {
                continue;
            }
            let candidate = format!("{stem}{replacement}");
            if lexicon.base_vocabulary.contains(&candidate) {
                return candidate;
            }
        }
    }
    token.to_string()
}

fn strip_punctuation(chunk: &str) -> &str {
    chunk.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Runs the full pipeline over body text and returns tokens in order.
pub fn preprocess_document(raw_text: &str, stopwords: &StopwordList, lexicon: &LemmaLexicon) -> Vec<String> {
    let lowered: String = raw_text.nfc().collect::<String>().to_lowercase();
    let mut out = Vec::new();
    for chunk in lowered.split_whitespace() {
        if stopwords.contains(strip_punctuation(chunk)) {
            continue;
        }
        for piece in chunk.split(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit())) {
            if piece.is_empty() || piece.bytes().any(|b| b.is_ascii_digit()) {
                continue;
            }
            out.push(lemmatize(piece, lexicon));
        }
    }
    out
}

/// Fills `tokens` for every document.
pub fn preprocess_corpus(corpus: &mut Corpus, stopwords: &StopwordList, lexicon: &LemmaLexicon, exec: Execution) {
    let tokens = par::map_slice(exec, &corpus.documents, |d| preprocess_document(&d.raw_text, stopwords, lexicon));
    for (d, t) in corpus.documents.iter_mut().zip(tokens) {
        d.tokens = Some(t);
    }
}
