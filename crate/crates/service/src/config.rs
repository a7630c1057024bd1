//! TOML application config. Every asset path is optional; a missing entry
//! falls back to the copy compiled into the library. Relative paths resolve
//! against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use belief_dialog::bundled;
use belief_dialog::classifier::{
    default_labels, load_model, parse_corpus, BeliefClassifier, BeliefModel, LabeledUtterance, TrainConfig,
};
use belief_dialog::dialog::{load_fsm, load_policy, DialogEngine};
use belief_dialog::epistemic::{parse_rules, Limits, RuleBase};
use belief_dialog::extraction::{load_assertion_rules, load_lexicon};
use belief_dialog::knowledge::load_ontology;
use belief_dialog::text::{parse_entity_lexicon, parse_stopwords, Preprocessor};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{what} ({origin}): {message}")]
    Asset { what: &'static str, origin: String, message: String },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetPaths {
    pub model: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub assertions: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub fsm: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub entities: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Session journal. `None` keeps sessions in memory only.
    pub journal: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { host: "127.0.0.1".into(), port: 8080, journal: Some(PathBuf::from("sessions.ndjson")) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub max_facts: usize,
    pub max_iterations: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        let l = Limits::default();
        InferenceConfig { max_facts: l.max_facts, max_iterations: l.max_iterations }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub labels: Vec<String>,
    pub assets: AssetPaths,
    pub server: ServerConfig,
    pub inference: InferenceConfig,
    pub training: TrainConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            labels: default_labels(),
            assets: AssetPaths::default(),
            server: ServerConfig::default(),
            inference: InferenceConfig::default(),
            training: TrainConfig::default(),
        }
    }
}

fn asset_err(what: &'static str, path: Option<&Path>, e: impl ToString) -> ConfigError {
    let origin = path.map_or_else(|| "bundled".to_string(), |p| p.display().to_string());
    ConfigError::Asset { what, origin, message: e.to_string() }
}

fn read_text(what: &'static str, path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| asset_err(what, Some(path), e))
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|message| ConfigError::Parse { path: path.into(), message })
    }

    /// Parse TOML, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut cfg: AppConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.labels.is_empty() {
            return Err("labels must not be empty".into());
        }
        cfg.training.validate().map_err(|e| e.to_string())?;
        let a = &mut cfg.assets;
        for p in [
            &mut a.model,
            &mut a.corpus,
            &mut a.rules,
            &mut a.assertions,
            &mut a.lexicon,
            &mut a.ontology,
            &mut a.fsm,
            &mut a.policy,
            &mut a.stopwords,
            &mut a.entities,
            &mut cfg.server.journal,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn limits(&self) -> Limits {
        Limits { max_facts: self.inference.max_facts, max_iterations: self.inference.max_iterations }
    }

    pub fn preprocessor(&self) -> Result<Preprocessor, ConfigError> {
        let stop = match &self.assets.stopwords {
            Some(p) => read_text("stopwords", p)?,
            None => bundled::STOPWORDS.to_string(),
        };
        let entities = match &self.assets.entities {
            Some(p) => read_text("entity lexicon", p)?,
            None => bundled::ENTITIES.to_string(),
        };
        let patterns = parse_entity_lexicon(&entities).map_err(|e| asset_err("entity lexicon", self.assets.entities.as_deref(), e))?;
        Ok(Preprocessor::new(parse_stopwords(&stop), patterns))
    }

    pub fn corpus(&self) -> Result<Vec<LabeledUtterance>, ConfigError> {
        let p = self.assets.corpus.as_deref();
        let text = match p {
            Some(p) => read_text("corpus", p)?,
            None => bundled::CORPUS.to_string(),
        };
        parse_corpus(&text).map_err(|e| asset_err("corpus", p, e))
    }

    pub fn model(&self) -> Result<BeliefModel, ConfigError> {
        match &self.assets.model {
            Some(p) => load_model(p).map_err(|e| asset_err("model", Some(p), e)),
            None => bundled::classifier().map(|c| c.model).map_err(|e| asset_err("model", None, e)),
        }
    }

    pub fn classifier(&self) -> Result<BeliefClassifier, ConfigError> {
        Ok(BeliefClassifier::new(self.model()?, self.preprocessor()?))
    }

    pub fn rules(&self) -> Result<RuleBase, ConfigError> {
        let p = self.assets.rules.as_deref();
        let text = match p {
            Some(p) => read_text("rulebase", p)?,
            None => bundled::RULES.to_string(),
        };
        parse_rules(&text).map_err(|e| asset_err("rulebase", p, e))
    }

    /// Load every dialog asset, failing on the first one that does not load.
    pub fn engine(&self) -> Result<DialogEngine, ConfigError> {
        let classifier = self.classifier()?;
        if classifier.model.labels != self.labels {
            let msg = format!("model labels {:?} differ from configured labels {:?}", classifier.model.labels, self.labels);
            return Err(asset_err("model", self.assets.model.as_deref(), msg));
        }
        self.engine_with(Arc::new(classifier))
    }

    /// Like [`AppConfig::engine`] with a caller-supplied belief predictor.
    pub fn engine_with(&self, classifier: Arc<dyn belief_dialog::classifier::BeliefPredictor>) -> Result<DialogEngine, ConfigError> {
        let a = &self.assets;
        let lexicon = match &a.lexicon {
            Some(p) => load_lexicon(p),
            None => bundled::lexicon(),
        }
        .map_err(|e| asset_err("lexicon", a.lexicon.as_deref(), e))?;
        let assertions = match &a.assertions {
            Some(p) => load_assertion_rules(p),
            None => bundled::assertions(),
        }
        .map_err(|e| asset_err("assertion rules", a.assertions.as_deref(), e))?;
        let graph = match &a.ontology {
            Some(p) => load_ontology(p),
            None => bundled::ontology(),
        }
        .map_err(|e| asset_err("ontology", a.ontology.as_deref(), e))?;
        let fsm = match &a.fsm {
            Some(p) => load_fsm(p),
            None => bundled::fsm(),
        }
        .map_err(|e| asset_err("state machine", a.fsm.as_deref(), e))?;
        let policy = match &a.policy {
            Some(p) => load_policy(p),
            None => bundled::policy(),
        }
        .map_err(|e| asset_err("policy", a.policy.as_deref(), e))?;
        let rules = self.rules()?;
        let mut engine = DialogEngine::new(classifier, lexicon, assertions, rules, graph, fsm, policy)
            .map_err(|e| asset_err("policy", a.policy.as_deref(), e))?;
        engine.limits = self.limits();
        Ok(engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let cfg = AppConfig::parse("[assets]\nrules = \"r.dl\"\nfsm = \"/abs/a.fsm\"\n[server]\nport = 9000\n", Path::new("/etc/bdm")).unwrap();
        assert_eq!(cfg.assets.rules.as_deref(), Some(Path::new("/etc/bdm/r.dl")));
        assert_eq!(cfg.assets.fsm.as_deref(), Some(Path::new("/abs/a.fsm")));
        assert_eq!(cfg.server.journal.as_deref(), Some(Path::new("/etc/bdm/sessions.ndjson")));
        assert_eq!(cfg.server.port, 9000);
        assert_eq!(cfg.training.hidden, 100);
    }

    #[test]
    fn model_labels_must_match() {
        let cfg = AppConfig::parse("labels = [\"happy\", \"sad\", \"neutral\"]\n", Path::new(".")).unwrap();
        assert!(cfg.engine().unwrap_err().to_string().contains("differ"));
    }

    #[test]
    fn example_file_matches_the_defaults() {
        let text = include_str!("../advisor.example.toml");
        let cfg = AppConfig::parse(text, Path::new("/srv")).unwrap();
        let def = AppConfig::default();
        assert_eq!(cfg.training, def.training);
        assert_eq!(cfg.labels, def.labels);
        assert_eq!(cfg.limits(), def.limits());
        assert_eq!(cfg.server.port, def.server.port);
        assert_eq!(cfg.server.journal.as_deref(), Some(Path::new("/srv/sessions.ndjson")));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(AppConfig::parse("[assets]\nrulez = \"x\"\n", Path::new(".")).is_err());
        assert!(AppConfig::parse("[training]\nepochs = 0\n", Path::new(".")).is_err());
        assert!(AppConfig::parse("labels = []\n", Path::new(".")).is_err());
    }

    #[test]
    fn missing_asset_names_the_file() {
        let cfg = AppConfig::parse("[assets]\nontology = \"nope.txt\"\n", Path::new("/nonexistent")).unwrap();
        let err = cfg.engine_with(Arc::new(belief_dialog::classifier::FixedBelief::one_hot(default_labels(), "neutral").unwrap()));
        let msg = err.unwrap_err().to_string();
        assert!(msg.contains("ontology") && msg.contains("nope.txt"), "{msg}");
    }
}
