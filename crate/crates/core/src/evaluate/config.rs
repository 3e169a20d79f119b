use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Preprocessing, StandardizeScope, ValidationKind};
use crate::classify::{
    ForestParams, Hyperparameters, Kernel, KnnParams, LrParams, ModelKind, ModelSpec, NbParams, SvmParams, TreeParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("missing config key `{key}` in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("unknown config key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("invalid value for `{key}` in [{section}]: {message}")]
    Invalid { section: String, key: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

/// The full default experiment: every embedding, preprocessing, model and
/// validation scheme.
pub const DEFAULT_CONFIG: &str = "\
[corpus]
# optional Library of Congress subject filter, e.g. PS
subject =
stopwords = builtin
lemmas = builtin

[bow]
enabled = true
min_fraction = 0.5

[d2v]
dims = 32,64,128,256
window = 5
min_count = 1
epochs = 40
negatives = 5
initial_lr = 0.025
final_lr = 0.0001
retrain_per_fold = false

[models]
models = knn,lr,nb,dt,rf,svm
knn_k = 5
lr_c = 1.0
lr_max_iter = 100
nb_var_smoothing = 1e-9
rf_trees = 100
svm_c = 1.0
svm_kernel = rbf
svm_tol = 0.001
svm_max_iter = 10000

[validation]
schemes = loo,kfold
k = 10
stratified = true
preprocessing = raw,standardized
standardize_scope = fold
seed = 0

[output]
report = report.json
table = report.txt
";

const REQUIRED: &[(&str, &str)] =
    &[("bow", "min_fraction"), ("d2v", "dims"), ("models", "models"), ("validation", "schemes"), ("validation", "k")];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub subject: Option<String>,
    /// `builtin` or a path to a stopword file.
    pub stopwords: String,
    /// `builtin` or a path to a lemma lexicon.
    pub lemmas: String,
    pub bow_enabled: bool,
    pub min_fraction: f64,
    pub d2v_dims: Vec<usize>,
    pub d2v_window: usize,
    pub d2v_min_count: usize,
    pub d2v_epochs: usize,
    pub d2v_negatives: usize,
    pub d2v_initial_lr: f64,
    pub d2v_final_lr: f64,
    pub models: Vec<ModelKind>,
    pub knn_k: usize,
    pub lr_c: f64,
    pub lr_max_iter: usize,
    pub nb_var_smoothing: f64,
    pub rf_trees: usize,
    pub svm_c: f64,
    pub svm_kernel: Kernel,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub schemes: Vec<ValidationKind>,
    pub k: usize,
    pub stratified: bool,
    pub preprocessing: Vec<Preprocessing>,
    pub standardize_scope: StandardizeScope,
    pub seed: u64,
    pub report_file: String,
    pub table_file: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::parse(DEFAULT_CONFIG).expect("default config parses")
    }
}

struct Sections(BTreeMap<String, BTreeMap<String, String>>);

impl Sections {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.0.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    /// Value from the file, else from the defaults.
    fn value<'a>(&'a self, defaults: &'a Sections, section: &str, key: &str) -> &'a str {
        self.raw(section, key).or_else(|| defaults.raw(section, key)).unwrap_or("")
    }
}

fn sections(ini: &Ini) -> Result<Sections, ConfigError> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (name, props) in ini.iter() {
        let name = name.unwrap_or("").to_string();
        for (k, v) in props.iter() {
            out.entry(name.clone()).or_default().insert(k.to_string(), v.trim().to_string());
        }
        out.entry(name).or_default();
    }
    Ok(Sections(out))
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Invalid {
        section: section.into(),
        key: key.into(),
        message: format!("{raw:?}: {e}"),
    })
}

fn parse_list<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(section, key, s)).collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Parses a config. Required keys must be present; other keys fall back
    /// to [`DEFAULT_CONFIG`]; unknown sections and keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let given = sections(&Ini::load_from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?)?;
        let defaults = sections(&Ini::load_from_str(DEFAULT_CONFIG).expect("default config is valid"))?;
        for (section, keys) in &given.0 {
            let Some(known) = defaults.0.get(section) else {
                if section.is_empty() && keys.is_empty() {
                    continue;
                }
                return Err(ConfigError::UnknownSection(section.clone()));
            };
            if let Some(k) = keys.keys().find(|k| !known.contains_key(*k)) {
                return Err(ConfigError::UnknownKey { section: section.clone(), key: k.clone() });
            }
        }
        for (section, key) in REQUIRED {
            if given.raw(section, key).is_none() {
                return Err(ConfigError::MissingKey { section: (*section).into(), key: (*key).into() });
            }
        }
        let v = |section: &str, key: &str| given.value(&defaults, section, key).to_string();
        macro_rules! get {
            ($s:literal, $k:literal) => {
                parse_value($s, $k, &v($s, $k))?
            };
        }
        macro_rules! list {
            ($s:literal, $k:literal) => {
                parse_list($s, $k, &v($s, $k))?
            };
        }
        let retrain: bool = get!("d2v", "retrain_per_fold");
        if retrain {
            return Err(ConfigError::Invalid {
                section: "d2v".into(),
                key: "retrain_per_fold".into(),
                message: "fold-local doc2vec retraining needs inference for held-out books, which is not supported"
                    .into(),
            });
        }
        let subject = v("corpus", "subject");
        let cfg = ExperimentConfig {
            subject: if subject.is_empty() { None } else { Some(subject) },
            stopwords: v("corpus", "stopwords"),
            lemmas: v("corpus", "lemmas"),
            bow_enabled: get!("bow", "enabled"),
            min_fraction: get!("bow", "min_fraction"),
            d2v_dims: list!("d2v", "dims"),
            d2v_window: get!("d2v", "window"),
            d2v_min_count: get!("d2v", "min_count"),
            d2v_epochs: get!("d2v", "epochs"),
            d2v_negatives: get!("d2v", "negatives"),
            d2v_initial_lr: get!("d2v", "initial_lr"),
            d2v_final_lr: get!("d2v", "final_lr"),
            models: list!("models", "models"),
            knn_k: get!("models", "knn_k"),
            lr_c: get!("models", "lr_c"),
            lr_max_iter: get!("models", "lr_max_iter"),
            nb_var_smoothing: get!("models", "nb_var_smoothing"),
            rf_trees: get!("models", "rf_trees"),
            svm_c: get!("models", "svm_c"),
            svm_kernel: get!("models", "svm_kernel"),
            svm_tol: get!("models", "svm_tol"),
            svm_max_iter: get!("models", "svm_max_iter"),
            schemes: list!("validation", "schemes"),
            k: get!("validation", "k"),
            stratified: get!("validation", "stratified"),
            preprocessing: list!("validation", "preprocessing"),
            standardize_scope: get!("validation", "standardize_scope"),
            seed: get!("validation", "seed"),
            report_file: v("output", "report"),
            table_file: v("output", "table"),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |section: &str, key: &str, message: &str| {
            Err(ConfigError::Invalid { section: section.into(), key: key.into(), message: message.into() })
        };
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return bad("bow", "min_fraction", "must lie in (0, 1]");
        }
        if self.d2v_dims.contains(&0) {
            return bad("d2v", "dims", "dimensions must be >= 1");
        }
        if self.models.is_empty() {
            return bad("models", "models", "at least one model is required");
        }
        if self.schemes.is_empty() {
            return bad("validation", "schemes", "at least one scheme is required");
        }
        if self.preprocessing.is_empty() {
            return bad("validation", "preprocessing", "at least one preprocessing mode is required");
        }
        if self.schemes.contains(&ValidationKind::KFold) && self.k < 2 {
            return bad("validation", "k", "k-fold needs k >= 2");
        }
        if !self.bow_enabled && self.d2v_dims.is_empty() {
            return bad("d2v", "dims", "no embedding is enabled");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn model_spec(&self, kind: ModelKind, seed: u64) -> ModelSpec {
        let hyperparameters = match kind {
            ModelKind::Knn => Hyperparameters::Knn(KnnParams { k: self.knn_k }),
            ModelKind::Lr => Hyperparameters::Lr(LrParams { c: self.lr_c, max_iter: self.lr_max_iter, ..LrParams::default() }),
            ModelKind::Nb => Hyperparameters::Nb(NbParams { var_smoothing: self.nb_var_smoothing }),
            ModelKind::Dt => Hyperparameters::Dt(TreeParams::default()),
            ModelKind::Rf => Hyperparameters::Rf(ForestParams { n_trees: self.rf_trees, ..ForestParams::default() }),
            ModelKind::Svm => Hyperparameters::Svm(SvmParams {
                c: self.svm_c,
                kernel: self.svm_kernel,
                tol: self.svm_tol,
                max_iter: self.svm_max_iter,
                ..SvmParams::default()
            }),
        };
        ModelSpec::new(hyperparameters, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_the_full_grid() {
        let c = ExperimentConfig::default();
        assert_eq!(c.d2v_dims, vec![32, 64, 128, 256]);
        assert_eq!(c.models.len(), 6);
        assert_eq!(c.k, 10);
        assert_eq!(c.standardize_scope, StandardizeScope::Fold);
        assert_eq!(c.subject, None);
    }

    #[test]
    fn missing_key_is_named() {
        let text = DEFAULT_CONFIG.replace("min_fraction = 0.5\n", "");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err, ConfigError::MissingKey { section: "bow".into(), key: "min_fraction".into() });
        assert!(err.to_string().contains("min_fraction"));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let text = DEFAULT_CONFIG.replace("knn_k = 5", "knn_neighbours = 5");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::UnknownKey { .. })));
        let text = format!("{DEFAULT_CONFIG}\n[plots]\nwidth = 3\n");
        assert_eq!(ExperimentConfig::parse(&text), Err(ConfigError::UnknownSection("plots".into())));
    }

    #[test]
    fn optional_keys_default() {
        let c = ExperimentConfig::parse(
            "[bow]\nmin_fraction = 0.4\n[d2v]\ndims = 16\n[models]\nmodels = lr\n[validation]\nschemes = loo\nk = 10\n",
        )
        .unwrap();
        assert_eq!(c.d2v_epochs, 40);
        assert_eq!(c.min_fraction, 0.4);
        assert_eq!(c.models, vec![ModelKind::Lr]);
    }

    #[test]
    fn svm_kernel_override() {
        let c = ExperimentConfig::parse(&DEFAULT_CONFIG.replace("svm_kernel = rbf", "svm_kernel = linear")).unwrap();
        match c.model_spec(ModelKind::Svm, 0).hyperparameters {
            Hyperparameters::Svm(p) => assert_eq!(p.kernel, Kernel::Linear),
            other => panic!("{other:?}"),
        }
        let bad = DEFAULT_CONFIG.replace("svm_kernel = rbf", "svm_kernel = poly");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn retraining_per_fold_is_refused() {
        let text = DEFAULT_CONFIG.replace("retrain_per_fold = false", "retrain_per_fold = true");
        assert!(matches!(ExperimentConfig::parse(&text), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
