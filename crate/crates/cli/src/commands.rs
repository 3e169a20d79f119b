use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use serde_json::json;

use bestseller_core::bow::{self, Vocabulary};
use bestseller_core::corpus::{self, Corpus, CorpusError};
use bestseller_core::d2v::{self, D2VConfig};
use bestseller_core::density::{self, SvgStyle};
use bestseller_core::evaluate::{self, CellFilter, EvalReport, ExperimentConfig, GridOptions};
use bestseller_core::fsutil::write_atomic;
use bestseller_core::preprocess::{preprocess_corpus, LemmaLexicon, StopwordList};
use bestseller_core::project::{self, AxisMethod, LooOptions};
use bestseller_core::{EmbeddingKind, EmbeddingMatrix, Label};

use crate::run_manifest::Recorder;
use crate::{Cli, Command, Failure, Global, OrFailure};

pub const CACHE_ENV: &str = "BESTSELLER_LAB_CACHE";

#[derive(Args, Debug, serde::Serialize)]
pub struct IngestArgs {
    /// TSV manifest: id, title, author, year, label, subject, path[, cuts].
    #[arg(long)]
    pub manifest: PathBuf,
    /// Keep only books with this Library of Congress subject (e.g. PS).
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long, default_value_t = 1895)]
    pub min_year: i32,
    #[arg(long, default_value_t = 1924)]
    pub max_year: i32,
    /// Skip per-year balancing of the Other class.
    #[arg(long)]
    pub no_balance: bool,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct EmbedArgs {
    /// Corpus archive directory written by `ingest`.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = ["bow", "d2v"])]
    pub kind: String,
    /// BoW: keep words found in at least this fraction of documents.
    #[arg(long, default_value_t = 0.5)]
    pub min_fraction: f64,
    /// Doc2vec vector size.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub negatives: u64,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Also write the doc2vec model (vocabulary, word and output vectors).
    #[arg(long)]
    pub save_model: bool,
    /// Stopword file (one word per line) instead of the built-in list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Lemma lexicon instead of the built-in one.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// `doc_id<TAB>label` file; defaults to labels.tsv beside the matrix.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// BoW vocabulary; defaults to vocabulary.tsv beside the matrix.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
    #[arg(long, default_value = "semaxis", value_parser = ["semaxis", "lda"])]
    pub method: String,
    /// LDA ridge as a fraction of the mean within-class variance.
    #[arg(long, default_value_t = 1e-3)]
    pub shrinkage: f64,
    /// Z-score features, refitting the statistics in every fold.
    #[arg(long)]
    pub standardize: bool,
    /// Write the K most discriminative words, K/2 per class (BoW only).
    #[arg(long)]
    pub words: Option<usize>,
    #[arg(long, default_value_t = 512)]
    pub grid_points: usize,
    /// Fixed KDE bandwidth instead of Scott's rule.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Also render the density curves as SVG.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "")]
    pub title: String,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Experiment config; the built-in full grid when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cell filter such as `model=lr,prep=standardized,embed=bow`.
    #[arg(long)]
    pub only: Option<String>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ReportArgs {
    /// Report JSON; defaults to report.json in the output directory.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "table", value_parser = ["table", "json", "body"])]
    pub format: String,
}

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest(a) => ingest(g, a),
        Command::Embed(a) => embed(g, a),
        Command::Project(a) => run_project(g, a),
        Command::Evaluate(a) => run_evaluate(g, a),
        Command::Report(a) => report(g, a),
    }
}

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::Io { .. } => Failure::Io(e.into()),
        CorpusError::Manifest { row: 0, .. } => Failure::Io(e.into()),
        CorpusError::Manifest { ref message, .. } if message.starts_with("cannot read") => Failure::Io(e.into()),
        other => Failure::Usage(other.into()),
    }
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).io()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).with_context(|| format!("cannot write {}", path.display())).io()
}

fn archive_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![dir.join("corpus.tsv")];
    if let Ok(entries) = fs::read_dir(dir.join("texts")) {
        let mut texts: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        texts.sort();
        files.extend(texts);
    }
    files
}

fn load_archive(dir: &Path, g: &Global) -> Result<Corpus, Failure> {
    if !dir.join("corpus.tsv").is_file() {
        return Err(Failure::Io(anyhow!("{} is not a corpus archive (no corpus.tsv)", dir.display())));
    }
    corpus::load_archive(dir, g.exec()).map_err(corpus_failure)
}

fn ingest(g: &Global, a: &IngestArgs) -> Result<u8, Failure> {
    let mut rec = Recorder::new("ingest");
    rec.inputs.push(a.manifest.clone());
    let seed = g.seed();
    let loaded = corpus::load_manifest_with(&a.manifest, g.exec()).map_err(corpus_failure)?;
    rec.stage("load");
    let mut c = loaded.filter_years(a.min_year, a.max_year);
    if let Some(s) = &a.subject {
        c = corpus::filter_by_subject(&c, s);
    }
    let c = corpus::enforce_one_per_author(&c, seed);
    let c = if a.no_balance {
        c
    } else {
        let (success, other) = c.split_by_label();
        corpus::balance_by_year(&success, &other, seed).map_err(corpus_failure)?
    };
    rec.stage("balance");
    if c.is_empty() {
        return Err(Failure::Usage(anyhow!("no books left after filtering and balancing")));
    }
    for s in &c.provenance.shortfalls {
        log::warn!("year {}: needed {} Other titles, found {}", s.year, s.needed, s.available);
    }
    create_out(&g.out)?;
    corpus::write_archive(&c, &g.out).map_err(corpus_failure)?;
    rec.stage("write");
    rec.outputs.extend(archive_files(&g.out));
    let params = json!({
        "global": g,
        "args": a,
        "documents": c.len(),
        "success": c.count(Label::Success),
        "other": c.count(Label::Other),
        "provenance": c.provenance,
    });
    rec.finish(&g.out, params).context("cannot write run manifest").io()?;
    println!(
        "wrote {} books ({} success, {} other) to {}",
        c.len(),
        c.count(Label::Success),
        c.count(Label::Other),
        g.out.display()
    );
    Ok(0)
}

fn lexicons(stopwords: Option<&Path>, lemmas: Option<&Path>) -> Result<(StopwordList, LemmaLexicon), Failure> {
    let sw = match stopwords {
        Some(p) => StopwordList::from_file(p).usage()?,
        None => StopwordList::builtin(),
    };
    let lx = match lemmas {
        Some(p) => LemmaLexicon::from_file(p).usage()?,
        None => LemmaLexicon::builtin(),
    };
    Ok((sw, lx))
}

fn write_labels(path: &Path, corpus: &Corpus) -> Result<(), Failure> {
    let mut text = String::from("doc_id\tlabel\n");
    for d in &corpus.documents {
        text.push_str(&format!("{}\t{}\n", d.id, d.label));
    }
    write_file(path, text.as_bytes())
}

fn read_labels(path: &Path) -> Result<(Vec<String>, Vec<Label>), Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read labels {}", path.display())).io()?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Failure::Usage(anyhow!("{}:{}: expected doc_id<TAB>label", path.display(), i + 1)))?;
        ids.push(id.to_string());
        labels.push(label.parse::<Label>().map_err(|e| Failure::Usage(anyhow!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok((ids, labels))
}

fn embed(g: &Global, a: &EmbedArgs) -> Result<u8, Failure> {
    let mut rec = Recorder::new("embed");
    let mut c = load_archive(&a.corpus, g)?;
    rec.inputs.extend(archive_files(&a.corpus));
    rec.stage("load");
    let (sw, lx) = lexicons(a.stopwords.as_deref(), a.lemmas.as_deref())?;
    preprocess_corpus(&mut c, &sw, &lx, g.exec());
    rec.stage("preprocess");
    create_out(&g.out)?;
    let mut extra = json!({});
    let matrix_path = match a.kind.as_str() {
        "bow" => {
            let vocab = bow::build_vocabulary(&c, a.min_fraction).usage()?;
            let m = bow::bow_matrix(&c, &vocab, g.exec()).usage()?;
            rec.stage("embed");
            let mut buf = Vec::new();
            vocab.write_text(&mut buf).io()?;
            let vpath = g.out.join("vocabulary.tsv");
            write_file(&vpath, &buf)?;
            rec.outputs.push(vpath);
            extra = json!({ "vocabulary_size": vocab.len(), "min_doc_count": vocab.min_doc_count });
            write_matrix(&g.out.join("bow.matrix"), &m)?
        }
        _ => {
            let config = D2VConfig {
                dim: a.dim as usize,
                window: a.window as usize,
                min_count: a.min_count,
                epochs: a.epochs as usize,
                negatives: a.negatives as usize,
                seed: g.seed(),
                deterministic: g.deterministic,
                ..D2VConfig::default()
            };
            config.validate().usage()?;
            let model = d2v::train_with(&c, &config, g.exec()).usage()?;
            rec.stage("embed");
            if a.save_model {
                let mut buf = Vec::new();
                model.write_text(&mut buf).usage()?;
                let mpath = g.out.join(format!("d2v-{}.model", a.dim));
                write_file(&mpath, &buf)?;
                rec.outputs.push(mpath);
            }
            extra = json!({
                "d2v": config,
                "vocabulary_size": model.vocabulary.len(),
                "loss_per_epoch": model.training_loss_per_epoch,
                "skipped_docs": model.skipped_docs,
            });
            write_matrix(&g.out.join(format!("d2v-{}.matrix", a.dim)), &model.embedding())?
        }
    };
    let lpath = g.out.join("labels.tsv");
    write_labels(&lpath, &c)?;
    rec.outputs.push(matrix_path.clone());
    rec.outputs.push(lpath);
    rec.stage("write");
    let params = json!({
        "global": g,
        "args": a,
        "stopwords_sha256": sw.digest,
        "lemmas_sha256": lx.digest,
        "embedding": extra,
    });
    rec.finish(&g.out, params).context("cannot write run manifest").io()?;
    println!("wrote {}", matrix_path.display());
    Ok(0)
}

fn write_matrix(path: &Path, m: &EmbeddingMatrix) -> Result<PathBuf, Failure> {
    let mut buf = Vec::new();
    m.write_text(&mut buf).usage()?;
    write_file(path, &buf)?;
    Ok(path.to_path_buf())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn run_project(g: &Global, a: &ProjectArgs) -> Result<u8, Failure> {
    let mut rec = Recorder::new("project");
    let method: AxisMethod = a.method.parse().map_err(|e: String| Failure::Usage(anyhow!(e)))?;
    let file = fs::File::open(&a.matrix).with_context(|| format!("cannot open {}", a.matrix.display())).io()?;
    let mut matrix = EmbeddingMatrix::read_text(BufReader::new(file)).usage()?;
    rec.inputs.push(a.matrix.clone());
    let labels_path = a.labels.clone().unwrap_or_else(|| sibling(&a.matrix, "labels.tsv"));
    let (ids, labels) = read_labels(&labels_path)?;
    rec.inputs.push(labels_path);
    if ids.len() != matrix.rows() {
        return Err(Failure::Usage(anyhow!("{} labels for a {}-row matrix", ids.len(), matrix.rows())));
    }
    matrix.doc_ids = ids;
    rec.stage("load");
    create_out(&g.out)?;

    // ranked words come from an axis fitted on every book
    let mut words_written = None;
    if let Some(k) = a.words {
        if k == 0 || k % 2 == 1 {
            return Err(Failure::Usage(anyhow!("--words must be a positive even number, got {k}")));
        }
        let all: Vec<usize> = (0..matrix.rows()).collect();
        let fitted = if a.standardize { matrix.standardize(&all) } else { matrix.clone() };
        let axis = project::fit_axis(&fitted, &labels, &all, method, a.shrinkage).usage()?;
        if matrix.kind != EmbeddingKind::Bow {
            let e = project::ProjectionError::WordRank(format!("axis was fitted on a {} matrix", matrix.kind));
            return Err(Failure::Usage(e.into()));
        }
        let vpath = a.vocabulary.clone().unwrap_or_else(|| sibling(&a.matrix, "vocabulary.tsv"));
        let vfile = fs::File::open(&vpath).with_context(|| format!("cannot open {}", vpath.display())).io()?;
        let vocab = Vocabulary::read_text(BufReader::new(vfile)).usage()?;
        rec.inputs.push(vpath);
        let ranking = project::top_axis_words(&axis, &vocab, k).usage()?;
        let mut buf = Vec::new();
        ranking.write_tsv(&mut buf).io()?;
        let wpath = g.out.join("words.tsv");
        write_file(&wpath, &buf)?;
        rec.outputs.push(wpath);
        words_written = Some(k);
        rec.stage("words");
    }

    let options = LooOptions { method, shrinkage: a.shrinkage, standardize: a.standardize };
    let projection = project::loo_projection(&matrix, &labels, &options, g.exec()).usage()?;
    rec.stage("projection");
    let curve = density::kde_with(&projection, a.grid_points, a.bandwidth).usage()?;
    rec.stage("kde");

    let mut buf = Vec::new();
    projection.write_tsv(&mut buf).io()?;
    let ppath = g.out.join("projection.tsv");
    write_file(&ppath, &buf)?;
    let mut buf = Vec::new();
    curve.write_tsv(&mut buf).io()?;
    let kpath = g.out.join("kde.tsv");
    write_file(&kpath, &buf)?;
    rec.outputs.extend([ppath, kpath]);
    if a.svg {
        let style = SvgStyle { title: a.title.clone(), ..SvgStyle::default() };
        let spath = g.out.join("kde.svg");
        write_file(&spath, curve.to_svg(&style).as_bytes())?;
        rec.outputs.push(spath);
    }
    rec.stage("write");
    let skipped: Vec<String> = projection.skipped.iter().map(|(id, e)| format!("{id}: {e}")).collect();
    let params = json!({
        "global": g,
        "args": a,
        "bandwidths": curve.bandwidth_per_class.iter().map(|(l, h)| (l.to_string(), *h)).collect::<std::collections::BTreeMap<_, _>>(),
        "skipped_folds": skipped,
        "words": words_written,
    });
    rec.finish(&g.out, params).context("cannot write run manifest").io()?;
    println!("wrote projection for {} books to {}", projection.scores.len(), g.out.display());
    Ok(0)
}

fn run_evaluate(g: &Global, a: &EvaluateArgs) -> Result<u8, Failure> {
    let mut rec = Recorder::new("evaluate");
    let mut config = match &a.config {
        Some(p) => {
            rec.inputs.push(p.clone());
            ExperimentConfig::from_file(p).map_err(|e| match e {
                evaluate::ConfigError::Io { .. } => Failure::Io(e.into()),
                other => Failure::Usage(other.into()),
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        config.seed = s;
    }
    let filter = match &a.only {
        Some(f) => CellFilter::parse(f).map_err(|e| Failure::Usage(anyhow!("--only: {e}")))?,
        None => CellFilter::default(),
    };
    let corpus = load_archive(&a.corpus, g)?;
    rec.inputs.extend(archive_files(&a.corpus));
    rec.stage("load");
    let options = GridOptions {
        exec: g.exec(),
        deterministic: g.deterministic,
        cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
        filter,
    };
    let report = evaluate::run_grid(&corpus, &config, &options).usage()?;
    rec.stage("grid");
    let (json_path, table_path) =
        report.write_files(&g.out).with_context(|| format!("cannot write report into {}", g.out.display())).io()?;
    rec.outputs.extend([json_path.clone(), table_path]);
    rec.stage("write");
    let failed = report.failed_cells();
    let params = json!({
        "global": g,
        "args": a,
        "config": config,
        "config_hash": report.body.config_hash,
        "cells": report.body.cells.len(),
        "failed_cells": failed,
    });
    rec.finish(&g.out, params).context("cannot write run manifest").io()?;
    print!("{}", report.table());
    println!("{} cells, {failed} failed; report at {}", report.body.cells.len(), json_path.display());
    Ok(if failed > 0 { 2 } else { 0 })
}

fn report(g: &Global, a: &ReportArgs) -> Result<u8, Failure> {
    let path = a.report.clone().unwrap_or_else(|| g.out.join("report.json"));
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display())).io()?;
    let report = EvalReport::from_json(&text).with_context(|| format!("{} is not an evaluation report", path.display())).usage()?;
    let out = std::io::stdout();
    let mut w = BufWriter::new(out.lock());
    let rendered = match a.format.as_str() {
        "json" => report.to_json() + "\n",
        "body" => report.body_json() + "\n",
        _ => report.table(),
    };
    w.write_all(rendered.as_bytes()).io()?;
    w.flush().io()?;
    Ok(0)
}
