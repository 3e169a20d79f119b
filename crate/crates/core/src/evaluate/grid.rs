use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{cross_validate, CVScheme, EvaluateError, ExperimentConfig, Preprocessing, ValidationKind};
use crate::bow;
use crate::classify::ModelKind;
use crate::corpus::{filter_by_subject, Corpus};
use crate::d2v::{self, D2VConfig};
use crate::fsutil::write_atomic;
use crate::label::Label;
use crate::matrix::Matrix;
use crate::par::{self, Execution};
use crate::preprocess::{preprocess_corpus, LemmaLexicon, StopwordList};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmbeddingSpec {
    Bow,
    D2v(usize),
}

impl EmbeddingSpec {
    /// `BoW` or `D2V-<dim>`.
    pub fn name(&self) -> String {
        match self {
            EmbeddingSpec::Bow => "BoW".into(),
            EmbeddingSpec::D2v(d) => format!("D2V-{d}"),
        }
    }
}

/// Restricts a grid run to matching cells, parsed from
/// `model=lr,prep=standardized,embed=bow,validation=loo`. Repeating a key
/// widens the match; `embed=d2v` matches every dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellFilter {
    pub models: Vec<ModelKind>,
    pub preprocessing: Vec<Preprocessing>,
    pub embeddings: Vec<String>,
    pub validations: Vec<ValidationKind>,
}

impl CellFilter {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut f = CellFilter::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| format!("filter term {part:?} is not key=value"))?;
            match key.trim() {
                "model" => f.models.push(value.parse()?),
                "prep" | "preprocessing" => f.preprocessing.push(value.parse()?),
                "embed" | "embedding" => {
                    let v = value.trim().to_ascii_lowercase();
                    let ok = v == "bow"
                        || v == "d2v"
                        || v.strip_prefix("d2v-").is_some_and(|d| d.parse::<usize>().is_ok_and(|d| d > 0));
                    if !ok {
                        return Err(format!("unknown embedding {value:?} (expected bow, d2v or d2v-<dim>)"));
                    }
                    f.embeddings.push(v);
                }
                "validation" | "cv" => f.validations.push(value.parse()?),
                other => return Err(format!("unknown filter key {other:?}")),
            }
        }
        Ok(f)
    }

    fn embedding_matches(&self, e: EmbeddingSpec) -> bool {
        self.embeddings.is_empty()
            || self.embeddings.iter().any(|p| match e {
                EmbeddingSpec::Bow => p == "bow",
                EmbeddingSpec::D2v(d) => p == "d2v" || *p == format!("d2v-{d}"),
            })
    }

    fn matches(&self, e: EmbeddingSpec, prep: Preprocessing, model: ModelKind, v: ValidationKind) -> bool {
        self.embedding_matches(e)
            && (self.preprocessing.is_empty() || self.preprocessing.contains(&prep))
            && (self.models.is_empty() || self.models.contains(&model))
            && (self.validations.is_empty() || self.validations.contains(&v))
    }
}

#[derive(Clone, Debug, Default)]
pub struct GridOptions {
    pub exec: Execution,
    /// Single-threaded doc2vec so embeddings are bit-reproducible.
    pub deterministic: bool,
    /// Directory for write-once embedding files keyed by content hash.
    pub cache_dir: Option<PathBuf>,
    pub filter: CellFilter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub content_hash: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub embedding: String,
    pub preprocessing: Preprocessing,
    pub model: ModelKind,
    /// `LOO` or `<k>-fold`.
    pub validation: String,
    pub accuracy: Option<f64>,
    pub std: Option<f64>,
    pub per_fold: Vec<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub documents: usize,
    pub success: usize,
    pub other: usize,
    pub content_hash: String,
}

/// Everything that must reproduce exactly under a fixed config and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub filter: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub corpus: CorpusSummary,
    pub embeddings: Vec<EmbeddingInfo>,
    pub cells: Vec<CellResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub deterministic: bool,
    pub cache_hits: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub body: ReportBody,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn corpus_hash(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    for d in &corpus.documents {
        h.update(d.id.as_bytes());
        h.update(b"\t");
        h.update(d.label.as_str().as_bytes());
        h.update(b"\n");
        for t in d.tokens.as_deref().unwrap_or(&[]) {
            h.update(t.as_bytes());
            h.update(b" ");
        }
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn matrix_hash(m: &Matrix) -> String {
    let mut h = Sha256::new();
    for v in m.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn load_lexicons(config: &ExperimentConfig) -> Result<(StopwordList, LemmaLexicon), EvaluateError> {
    let err = |e: crate::preprocess::LexiconError| EvaluateError::Embedding(e.to_string());
    let stopwords = match config.stopwords.as_str() {
        "builtin" => StopwordList::builtin(),
        path => StopwordList::from_file(Path::new(path)).map_err(err)?,
    };
    let lemmas = match config.lemmas.as_str() {
        "builtin" => LemmaLexicon::builtin(),
        path => LemmaLexicon::from_file(Path::new(path)).map_err(err)?,
    };
    Ok((stopwords, lemmas))
}

fn compute_embedding(
    spec: EmbeddingSpec,
    corpus: &Corpus,
    config: &ExperimentConfig,
    d2v_config: Option<&D2VConfig>,
    exec: Execution,
) -> Result<Matrix, String> {
    match spec {
        EmbeddingSpec::Bow => {
            let vocab = bow::build_vocabulary(corpus, config.min_fraction).map_err(|e| e.to_string())?;
            if vocab.is_empty() {
                return Err(format!("no word reaches min_fraction = {} of the documents", config.min_fraction));
            }
            Ok(bow::bow_matrix(corpus, &vocab, exec).map_err(|e| e.to_string())?.values)
        }
        EmbeddingSpec::D2v(_) => {
            let model = d2v::train_with(corpus, d2v_config.expect("d2v config"), exec).map_err(|e| e.to_string())?;
            Ok(model.embedding().values)
        }
    }
}

/// Fetches an embedding from the cache or computes and stores it. Returns the
/// matrix and whether it came from the cache.
fn embedding_with_cache(
    spec: EmbeddingSpec,
    corpus: &Corpus,
    corpus_hash: &str,
    config: &ExperimentConfig,
    d2v_config: Option<&D2VConfig>,
    options: &GridOptions,
) -> Result<(Matrix, bool), String> {
    let params = match spec {
        EmbeddingSpec::Bow => format!("bow|min_fraction={:?}", config.min_fraction),
        EmbeddingSpec::D2v(_) => format!("d2v|{}", serde_json::to_string(d2v_config.expect("d2v config")).unwrap()),
    };
    let key = sha256_hex(format!("{corpus_hash}|{params}").as_bytes());
    let path = options.cache_dir.as_ref().map(|d| d.join(format!("{key}.matrix")));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        match std::fs::File::open(p).map_err(|e| e.to_string()).and_then(|f| {
            crate::matrix::read_matrix(std::io::BufReader::new(f)).map_err(|e| e.to_string())
        }) {
            Ok((_, m, _)) if m.rows() == corpus.len() => return Ok((m, true)),
            Ok(_) => log::warn!("ignoring cached embedding {} with the wrong row count", p.display()),
            Err(e) => log::warn!("ignoring unreadable cached embedding {}: {e}", p.display()),
        }
    }
    let m = compute_embedding(spec, corpus, config, d2v_config, options.exec)?;
    if let Some(p) = path {
        let kind = match spec {
            EmbeddingSpec::Bow => crate::EmbeddingKind::Bow,
            EmbeddingSpec::D2v(_) => crate::EmbeddingKind::D2v,
        };
        let mut buf = Vec::new();
        let stored = std::fs::create_dir_all(p.parent().expect("cache file has a parent"))
            .map_err(|e| e.to_string())
            .and_then(|_| crate::matrix::write_matrix(&mut buf, &kind.to_string(), &m, false).map_err(|e| e.to_string()))
            .and_then(|_| write_atomic(&p, &buf).map_err(|e| e.to_string()));
        if let Err(e) = stored {
            log::warn!("could not cache embedding at {}: {e}", p.display());
        }
    }
    Ok((m, false))
}

/// Runs every configured embedding × preprocessing × model × validation
/// cell. Embeddings are computed once (whole corpus) and shared by all of
/// their cells; a failing cell records its error and the grid carries on.
pub fn run_grid(corpus: &Corpus, config: &ExperimentConfig, options: &GridOptions) -> Result<EvalReport, EvaluateError> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();

    let mut corpus = match &config.subject {
        Some(s) => filter_by_subject(corpus, s),
        None => corpus.clone(),
    };
    if corpus.documents.iter().any(|d| d.tokens.is_none()) {
        let (stopwords, lemmas) = load_lexicons(config)?;
        preprocess_corpus(&mut corpus, &stopwords, &lemmas, options.exec);
    }
    let labels: Vec<Label> = corpus.labels();
    let c_hash = corpus_hash(&corpus);

    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), config.seed);
    let split_seed = seed::derive(config.seed, "split");
    seeds.insert("split".to_string(), split_seed);
    let d2v_seed = seed::derive(config.seed, "d2v");
    seeds.insert("d2v".to_string(), d2v_seed);
    let model_seed = seed::derive(config.seed, "models");
    seeds.insert("models".to_string(), model_seed);

    let mut specs = Vec::new();
    if config.bow_enabled {
        specs.push(EmbeddingSpec::Bow);
    }
    specs.extend(config.d2v_dims.iter().map(|&d| EmbeddingSpec::D2v(d)));
    specs.retain(|&e| options.filter.embedding_matches(e));

    let mut embeddings = Vec::new();
    let mut matrices: Vec<Result<Matrix, String>> = Vec::new();
    let mut cache_hits = Vec::new();
    for &spec in &specs {
        let d2v_config = match spec {
            EmbeddingSpec::D2v(dim) => Some(D2VConfig {
                dim,
                window: config.d2v_window,
                min_count: config.d2v_min_count,
                epochs: config.d2v_epochs,
                negatives: config.d2v_negatives,
                initial_lr: config.d2v_initial_lr,
                final_lr: config.d2v_final_lr,
                seed: seed::derive_index(d2v_seed, dim as u64),
                deterministic: options.deterministic,
            }),
            EmbeddingSpec::Bow => None,
        };
        log::info!("embedding {}", spec.name());
        let result = embedding_with_cache(spec, &corpus, &c_hash, config, d2v_config.as_ref(), options);
        let info = match &result {
            Ok((m, hit)) => {
                if *hit {
                    cache_hits.push(spec.name());
                }
                EmbeddingInfo { name: spec.name(), rows: m.rows(), cols: m.cols(), content_hash: matrix_hash(m), error: None }
            }
            Err(e) => EmbeddingInfo {
                name: spec.name(),
                rows: 0,
                cols: 0,
                content_hash: String::new(),
                error: Some(e.clone()),
            },
        };
        embeddings.push(info);
        matrices.push(result.map(|(m, _)| m));
    }

    struct Cell {
        embedding: usize,
        preprocessing: Preprocessing,
        model: ModelKind,
        scheme: CVScheme,
    }
    let mut cells = Vec::new();
    for (e, &spec) in specs.iter().enumerate() {
        for &preprocessing in &config.preprocessing {
            for &model in &config.models {
                for &kind in &config.schemes {
                    if !options.filter.matches(spec, preprocessing, model, kind) {
                        continue;
                    }
                    let scheme = match kind {
                        ValidationKind::Loo => CVScheme::loo(),
                        ValidationKind::KFold => {
                            CVScheme { kind, k: config.k, stratified: config.stratified, seed: split_seed }
                        }
                    };
                    cells.push(Cell { embedding: e, preprocessing, model, scheme });
                }
            }
        }
    }

    let results = par::map_slice(options.exec, &cells, |cell| {
        let spec = specs[cell.embedding];
        let mut result = CellResult {
            embedding: spec.name(),
            preprocessing: cell.preprocessing,
            model: cell.model,
            validation: cell.scheme.name(),
            accuracy: None,
            std: None,
            per_fold: Vec::new(),
            converged: None,
            error: None,
        };
        let x = match &matrices[cell.embedding] {
            Ok(x) => x,
            Err(e) => {
                result.error = Some(format!("embedding failed: {e}"));
                return result;
            }
        };
        let model_spec = config.model_spec(cell.model, seed::derive(model_seed, cell.model.as_str()));
        log::debug!("cell {} {} {} {}", result.embedding, result.preprocessing, result.model, result.validation);
        match cross_validate(x, &labels, &model_spec, &cell.scheme, cell.preprocessing, config.standardize_scope, options.exec) {
            Ok(out) => {
                result.accuracy = Some(out.accuracy);
                result.std = out.std;
                result.per_fold = out.per_fold;
                result.converged = Some(out.converged);
            }
            Err(e) => result.error = Some(e.to_string()),
        }
        result
    });
    for r in results.iter().filter(|r| r.error.is_some()) {
        log::warn!("cell {} {} {} {} failed: {}", r.embedding, r.preprocessing, r.model, r.validation, r.error.as_deref().unwrap());
    }

    let body = ReportBody {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        filter: if options.filter == CellFilter::default() { None } else { Some(format!("{:?}", options.filter)) },
        seeds,
        corpus: CorpusSummary {
            documents: corpus.len(),
            success: corpus.count(Label::Success),
            other: corpus.count(Label::Other),
            content_hash: c_hash,
        },
        embeddings,
        cells: results,
    };
    let meta = ReportMeta {
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: par::current_threads(options.exec),
        deterministic: options.deterministic,
        cache_hits,
    };
    Ok(EvalReport { meta, body })
}

fn model_label(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Knn => "KNN",
        ModelKind::Lr => "LR",
        ModelKind::Nb => "NB",
        ModelKind::Dt => "DT",
        ModelKind::Rf => "RF",
        ModelKind::Svm => "SVM",
    }
}

impl EvalReport {
    pub fn failed_cells(&self) -> usize {
        self.body.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// The reproducible part of the report as pretty JSON.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn cell(&self, embedding: &str, prep: Preprocessing, model: ModelKind, validation: &str) -> Option<&CellResult> {
        self.body
            .cells
            .iter()
            .find(|c| c.embedding == embedding && c.preprocessing == prep && c.model == model && c.validation == validation)
    }

    /// One block per embedding: models down the side, preprocessing and
    /// validation scheme across, k-fold cells as `mean±std`.
    pub fn table(&self) -> String {
        let mut embeddings: Vec<&str> = Vec::new();
        let mut preps: Vec<Preprocessing> = Vec::new();
        let mut models: Vec<ModelKind> = Vec::new();
        let mut validations: Vec<&str> = Vec::new();
        for c in &self.body.cells {
            if !embeddings.contains(&c.embedding.as_str()) {
                embeddings.push(&c.embedding);
            }
            if !preps.contains(&c.preprocessing) {
                preps.push(c.preprocessing);
            }
            if !models.contains(&c.model) {
                models.push(c.model);
            }
            if !validations.contains(&c.validation.as_str()) {
                validations.push(&c.validation);
            }
        }
        const W: usize = 12;
        let mut out = String::new();
        for e in embeddings {
            let _ = writeln!(out, "{e}");
            let mut line = format!("{:<6}", "");
            for p in &preps {
                line.push_str(&format!("  {:<width$}", p.to_string(), width = W * validations.len()));
            }
            let _ = writeln!(out, "{}", line.trim_end());
            let mut line = format!("{:<6}", "");
            for _ in &preps {
                line.push_str("  ");
                for v in &validations {
                    line.push_str(&format!("{v:<W$}"));
                }
            }
            let _ = writeln!(out, "{}", line.trim_end());
            for &m in &models {
                let mut line = format!("{:<6}", model_label(m));
                for &p in &preps {
                    line.push_str("  ");
                    for v in &validations {
                        let text = match self.cell(e, p, m, v) {
                            None => "-".to_string(),
                            Some(c) if c.error.is_some() => "ERR".to_string(),
                            Some(c) => match (c.accuracy, c.std) {
                                (Some(a), Some(s)) => format!("{a:.2}±{s:.2}"),
                                (Some(a), None) => format!("{a:.2}"),
                                _ => "-".to_string(),
                            },
                        };
                        line.push_str(&format!("{text:<W$}"));
                    }
                }
                let _ = writeln!(out, "{}", line.trim_end());
            }
            out.push('\n');
        }
        out
    }

    /// Writes the JSON report and the text table into `dir`.
    pub fn write_files(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(&self.body.config.report_file);
        let table = dir.join(&self.body.config.table_file);
        write_atomic(&json, self.to_json().as_bytes())?;
        write_atomic(&table, self.table().as_bytes())?;
        Ok((json, table))
    }
}
