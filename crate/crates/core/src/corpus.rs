//! Book collections: manifest loading, boilerplate stripping, per-year
//! balancing of the two classes and the one-book-per-author rule.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;
use crate::par::{self, Execution};
use crate::seed;

pub const MANIFEST_HEADER: [&str; 7] = ["id", "title", "author", "year", "label", "subject", "path"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no text left after removing boilerplate{}", .source_name.as_ref().map(|s| format!(" from {s}")).unwrap_or_default())]
    Boilerplate { source_name: Option<String> },
    #[error("manifest {path}, row {row}: {message}")]
    Manifest { path: String, row: usize, message: String },
    #[error("cannot balance pools: {0}")]
    Balance(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    #[default]
    Full,
    SubjectPs,
}

/// One book.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub author: String,
    pub year: i32,
    pub label: Label,
    pub subject: Option<String>,
    pub raw_text: String,
    pub tokens: Option<Vec<String>>,
}

impl Document {
    /// Author key used by the one-book-per-author rule.
    pub fn author_key(&self) -> String {
        self.author.trim().to_lowercase()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearShortfall {
    pub year: i32,
    pub needed: usize,
    pub available: usize,
}

/// What balancing and filtering did to a corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub shortfalls: Vec<YearShortfall>,
    pub dropped_ids: Vec<String>,
    pub subject_filter: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub seed: u64,
    pub profile: Profile,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.documents.iter().filter(|d| d.label == label).count()
    }

    fn with_documents(&self, documents: Vec<Document>) -> Corpus {
        Corpus {
            documents,
            seed: self.seed,
            profile: self.profile,
            provenance: self.provenance.clone(),
        }
    }

    /// Splits into (success pool, other pool).
    pub fn split_by_label(&self) -> (Corpus, Corpus) {
        let (s, o): (Vec<_>, Vec<_>) = self.documents.iter().cloned().partition(|d| d.label == Label::Success);
        (self.with_documents(s), self.with_documents(o))
    }

    /// Keeps books published in `[min_year, max_year]`; ids of the rest are
    /// recorded as dropped.
    pub fn filter_years(&self, min_year: i32, max_year: i32) -> Corpus {
        let (keep, drop): (Vec<_>, Vec<_>) =
            self.documents.iter().cloned().partition(|d| (min_year..=max_year).contains(&d.year));
        let mut out = self.with_documents(keep);
        out.provenance.dropped_ids.extend(drop.into_iter().map(|d| d.id));
        out
    }
}

/// Result of [`strip_gutenberg_boilerplate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    pub markers_found: bool,
}

fn start_markers() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        vec![
            Regex::new(r"(?im)^[ \t]*\*{3}[ \t]*START OF (?:THE |THIS )?PROJECT GUTENBERG E-?(?:BOOK|TEXT)\b.*$").unwrap(),
            Regex::new(r"(?im)^.*\*END\*[ \t]*THE SMALL PRINT.*$").unwrap(),
        ]
    })
}

fn end_markers() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        vec![
            Regex::new(r"(?im)^[ \t]*\*{3}[ \t]*END OF (?:THE |THIS )?PROJECT GUTENBERG E-?(?:BOOK|TEXT)\b.*$").unwrap(),
            Regex::new(r"(?im)^[ \t]*END OF (?:THE |THIS )?PROJECT GUTENBERG(?:'S)?\b.*$").unwrap(),
        ]
    })
}

/// Returns the body between the last start marker and the first end marker
/// after it. Without any marker the input comes back unchanged with
/// `markers_found = false`.
pub fn strip_gutenberg_boilerplate(raw_text: &str) -> Result<Stripped, CorpusError> {
    let start = start_markers()
        .iter()
        .flat_map(|re| re.find_iter(raw_text))
        .map(|m| m.end())
        .max();
    let from = start.unwrap_or(0);
    let end = end_markers()
        .iter()
        .filter_map(|re| re.find_at(raw_text, from).map(|m| m.start()))
        .min();
    if start.is_none() && end.is_none() {
        log::warn!("no Project Gutenberg markers found; text kept unchanged");
        return Ok(Stripped { text: raw_text.to_string(), markers_found: false });
    }
    let to = end.unwrap_or(raw_text.len());
    let body = raw_text[from..to].trim();
    if body.is_empty() {
        return Err(CorpusError::Boilerplate { source_name: None });
    }
    Ok(Stripped { text: body.to_string(), markers_found: true })
}

/// Inclusive 1-based line range removed from a stripped body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutRange {
    pub first: usize,
    pub last: usize,
}

pub fn parse_cuts(field: &str) -> Result<Vec<CutRange>, String> {
    let mut out = Vec::new();
    for part in field.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once("..")
            .ok_or_else(|| format!("cut {part:?} is not of the form a..b"))?;
        let first: usize = a.trim().parse().map_err(|_| format!("bad cut start {a:?}"))?;
        let last: usize = b.trim().parse().map_err(|_| format!("bad cut end {b:?}"))?;
        if first == 0 || last < first {
            return Err(format!("cut {part:?} must satisfy 1 <= a <= b"));
        }
        out.push(CutRange { first, last });
    }
    Ok(out)
}

pub fn apply_cuts(text: &str, cuts: &[CutRange]) -> String {
    if cuts.is_empty() {
        return text.to_string();
    }
    text.lines()
        .enumerate()
        .filter(|(i, _)| !cuts.iter().any(|c| (c.first..=c.last).contains(&(i + 1))))
        .map(|(_, l)| l)
        .collect::<Vec<_>>()
        .join("\n")
}

struct ManifestRow {
    row: usize,
    id: String,
    title: String,
    author: String,
    year: i32,
    label: Label,
    subject: Option<String>,
    path: PathBuf,
    cuts: Vec<CutRange>,
}

fn parse_manifest(path: &Path, content: &str) -> Result<Vec<ManifestRow>, CorpusError> {
    let err = |row: usize, message: String| CorpusError::Manifest { path: path.display().to_string(), row, message };
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
    let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let has_cuts = header.len() == 8 && header[7] == "cuts";
    if header[..header.len().min(7)] != MANIFEST_HEADER[..] || !(header.len() == 7 || has_cuts) {
        return Err(err(1, format!("header must be `{}` (optionally followed by `cuts`)", MANIFEST_HEADER.join("\\t"))));
    }
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in lines {
        let row = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 7 || f.len() > 8 || (f.len() == 8 && !has_cuts) {
            return Err(err(row, format!("expected {} tab-separated fields, found {}", header.len(), f.len())));
        }
        let id = f[0].trim().to_string();
        if id.is_empty() {
            return Err(err(row, "empty id".into()));
        }
        if let Some(prev) = seen.insert(id.clone(), row) {
            return Err(err(row, format!("duplicate id {id:?} (first seen on row {prev})")));
        }
        let year = f[3].trim().parse::<i32>().map_err(|_| err(row, format!("bad year {:?}", f[3])))?;
        let label = f[4].parse::<Label>().map_err(|e| err(row, e.to_string()))?;
        let subject = Some(f[5].trim()).filter(|s| !s.is_empty()).map(str::to_string);
        let cuts = match f.get(7) {
            Some(c) => parse_cuts(c).map_err(|m| err(row, m))?,
            None => Vec::new(),
        };
        rows.push(ManifestRow {
            row,
            id,
            title: f[1].trim().to_string(),
            author: f[2].trim().to_string(),
            year,
            label,
            subject,
            path: base.join(f[6].trim()),
            cuts,
        });
    }
    Ok(rows)
}

pub fn load_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    load_manifest_with(path, Execution::default())
}

/// Loads a TSV manifest, reading and cleaning the book files (in parallel
/// when `exec` allows). Row numbers in errors are 1-based file lines.
pub fn load_manifest_with(path: &Path, exec: Execution) -> Result<Corpus, CorpusError> {
    load_rows(path, exec, true)
}

/// Loads a corpus written by [`write_archive`]; texts are already clean, so
/// no boilerplate stripping is attempted.
pub fn load_archive(dir: &Path, exec: Execution) -> Result<Corpus, CorpusError> {
    let path = if dir.is_dir() { dir.join("corpus.tsv") } else { dir.to_path_buf() };
    load_rows(&path, exec, false)
}

fn load_rows(path: &Path, exec: Execution, strip: bool) -> Result<Corpus, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::Manifest {
        path: path.display().to_string(),
        row: 0,
        message: format!("cannot read manifest: {e}"),
    })?;
    let rows = parse_manifest(path, &content)?;
    let docs = par::map_slice(exec, &rows, |r| -> Result<Document, CorpusError> {
        let err = |message: String| CorpusError::Manifest { path: path.display().to_string(), row: r.row, message };
        let raw = fs::read_to_string(&r.path).map_err(|e| err(format!("cannot read {}: {e}", r.path.display())))?;
        let body = if strip {
            strip_gutenberg_boilerplate(&raw).map_err(|_| err(format!("{} is all boilerplate", r.path.display())))?.text
        } else {
            raw
        };
        let text = apply_cuts(&body, &r.cuts);
        if text.trim().is_empty() {
            return Err(err(format!("{} is empty after cuts", r.path.display())));
        }
        Ok(Document {
            id: r.id.clone(),
            title: r.title.clone(),
            author: r.author.clone(),
            year: r.year,
            label: r.label,
            subject: r.subject.clone(),
            raw_text: text,
            tokens: None,
        })
    });
    let documents = docs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(documents))
}

/// Per year, pairs every Success title with a randomly chosen Other title
/// from the same year. Years where the Other pool runs short are reported,
/// not padded.
pub fn balance_by_year(success_pool: &Corpus, other_pool: &Corpus, seed: u64) -> Result<Corpus, CorpusError> {
    let success_authors: HashSet<String> = success_pool.documents.iter().map(Document::author_key).collect();
    let mut clashes: Vec<String> = other_pool
        .documents
        .iter()
        .filter(|d| success_authors.contains(&d.author_key()))
        .map(|d| d.author.clone())
        .collect();
    if !clashes.is_empty() {
        clashes.sort();
        clashes.dedup();
        return Err(CorpusError::Balance(format!("authors present in both pools: {}", clashes.join(", "))));
    }

    let mut needed: BTreeMap<i32, usize> = BTreeMap::new();
    for d in &success_pool.documents {
        *needed.entry(d.year).or_default() += 1;
    }
    let mut by_year: BTreeMap<i32, Vec<&Document>> = BTreeMap::new();
    for d in &other_pool.documents {
        by_year.entry(d.year).or_default().push(d);
    }

    let base = seed::derive(seed, "balance");
    let mut selected = Vec::new();
    let mut used_authors = success_authors;
    let mut shortfalls = Vec::new();
    for (&year, &need) in &needed {
        let mut candidates = by_year.remove(&year).unwrap_or_default();
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        candidates.shuffle(&mut seed::rng(seed::derive_index(base, year as u64)));
        let mut taken = 0;
        let mut available = 0;
        for d in candidates {
            if used_authors.contains(&d.author_key()) {
                continue;
            }
            available += 1;
            if taken < need {
                used_authors.insert(d.author_key());
                selected.push(d.clone());
                taken += 1;
            }
        }
        if available < need {
            shortfalls.push(YearShortfall { year, needed: need, available });
        }
    }
    selected.sort_by(|a, b| a.year.cmp(&b.year).then_with(|| a.id.cmp(&b.id)));

    let mut documents = success_pool.documents.clone();
    documents.extend(selected);
    let mut provenance = success_pool.provenance.clone();
    provenance.shortfalls = shortfalls;
    Ok(Corpus { documents, seed, profile: success_pool.profile, provenance })
}

/// Keeps one book per author. Collisions that span both classes keep a
/// Success title; the survivor is otherwise drawn uniformly (seeded).
pub fn enforce_one_per_author(corpus: &Corpus, seed: u64) -> Corpus {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in corpus.documents.iter().enumerate() {
        groups.entry(d.author_key()).or_default().push(i);
    }
    let base = seed::derive(seed, "one-per-author");
    let mut keep = vec![true; corpus.len()];
    let mut dropped = Vec::new();
    for (author, members) in &groups {
        if members.len() < 2 {
            continue;
        }
        let has_success = members.iter().any(|&i| corpus.documents[i].label == Label::Success);
        let mut pool: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| !has_success || corpus.documents[i].label == Label::Success)
            .collect();
        pool.sort_by(|&a, &b| corpus.documents[a].id.cmp(&corpus.documents[b].id));
        let pick = pool[seed::rng(seed::derive(base, author)).gen_range(0..pool.len())];
        for &i in members {
            if i != pick {
                keep[i] = false;
                dropped.push(corpus.documents[i].id.clone());
            }
        }
    }
    let documents = corpus
        .documents
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(d, _)| d.clone())
        .collect();
    let mut out = corpus.with_documents(documents);
    dropped.sort();
    out.provenance.dropped_ids.extend(dropped);
    out.seed = seed;
    out
}

pub fn filter_by_subject(corpus: &Corpus, subject: &str) -> Corpus {
    let documents = corpus
        .documents
        .iter()
        .filter(|d| d.subject.as_deref() == Some(subject))
        .cloned()
        .collect();
    let mut out = corpus.with_documents(documents);
    if subject == "PS" {
        out.profile = Profile::SubjectPs;
    }
    out.provenance.subject_filter = Some(subject.to_string());
    out
}

fn archive_file_name(index: usize, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{index:04}_{safe}.txt")
}

/// Writes a cleaned corpus as `corpus.tsv` plus `texts/`. The result loads
/// back with [`load_archive`].
pub fn write_archive(corpus: &Corpus, dir: &Path) -> Result<PathBuf, CorpusError> {
    let io = |p: &Path, e: std::io::Error| CorpusError::Io { path: p.display().to_string(), source: e };
    let texts = dir.join("texts");
    fs::create_dir_all(&texts).map_err(|e| io(&texts, e))?;
    let manifest_path = dir.join("corpus.tsv");
    let mut out = String::new();
    out.push_str(&MANIFEST_HEADER.join("\t"));
    out.push('\n');
    for (i, d) in corpus.documents.iter().enumerate() {
        let name = archive_file_name(i, &d.id);
        let p = texts.join(&name);
        fs::write(&p, &d.raw_text).map_err(|e| io(&p, e))?;
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\ttexts/{}\n",
            clean(&d.id),
            clean(&d.title),
            clean(&d.author),
            d.year,
            d.label,
            d.subject.as_deref().unwrap_or(""),
            name
        ));
    }
    crate::fsutil::write_atomic(&manifest_path, out.as_bytes()).map_err(|e| io(&manifest_path, e))?;
    Ok(manifest_path)
}
