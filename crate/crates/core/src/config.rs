//! Service configuration: one TOML document, then `section.key=value`
//! overrides from the command line, then `CHIRPY_SECTION__KEY` environment
//! variables. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::corpus::{CorpusError, EntityIndex};
use crate::knowledge::{Knowledge, KnowledgeError};
use crate::linker::LinkerConfig;
use crate::manager::{Engine, EngineSettings, SamplerConfig, SamplerConfigError, SessionOverrides};
use crate::neural::{GeneratorAdapter, MockAdapter, ScriptError, ScriptedAdapter};
use crate::nlp::{Pipeline, PipelineConfig};
use crate::resources::Resources;
use crate::rgs::{standard_registry, World};
use crate::store::{FileStore, MemoryStore, Store, StoreError};

pub const ENV_PREFIX: &str = "CHIRPY_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("override `{0}`: expected section.key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sampler(#[from] SamplerConfigError),
    #[error(transparent)]
    Index(#[from] CorpusError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexSection {
    /// Entity records or a serialized index. Unset means an empty index.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeSection {
    /// Directory whose files replace bundled tables of the same name.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreBackend {
    #[default]
    File,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    pub backend: StoreBackend,
    pub state_path: PathBuf,
    pub log_path: PathBuf,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            backend: StoreBackend::File,
            state_path: PathBuf::from("data/state.jsonl"),
            log_path: PathBuf::from("data/log.jsonl"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub rg_timeout_ms: u64,
    pub sequential_annotation: bool,
    pub neural_samples: usize,
    pub max_history_tokens: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self { rg_timeout_ms: 1000, sequential_annotation: false, neural_samples: 20, max_history_tokens: 800 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    #[default]
    Mock,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterSection {
    pub kind: AdapterKind,
    /// Script for the scripted adapter; unmatched requests go to the mock.
    pub script: Option<PathBuf>,
    pub question_rate: f64,
}

impl Default for AdapterSection {
    fn default() -> Self {
        Self { kind: AdapterKind::Mock, script: None, question_rate: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub index: IndexSection,
    pub knowledge: KnowledgeSection,
    pub store: StoreSection,
    pub sampler: SamplerConfig,
    pub engine: EngineSection,
    pub session: SessionOverrides,
    pub adapter: AdapterSection,
    pub pipeline: PipelineConfig,
    pub linker: LinkerConfig,
    pub server: ServerSection,
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `path` (dot separated) in `doc`. Existing keys match without
/// regard to case, so environment variables can name mixed-case keys.
fn set_path(doc: &mut Table, path: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').filter(|p| !p.is_empty()).collect();
    let Some((last, parents)) = parts.split_last() else { return Err(ConfigError::Override(path.into())) };
    let mut table = doc;
    for part in parents {
        let key = table.keys().find(|k| k.eq_ignore_ascii_case(part)).cloned().unwrap_or_else(|| part.to_string());
        let entry = table.entry(key).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::Override(path.into()))?;
    }
    let key = table.keys().find(|k| k.eq_ignore_ascii_case(last)).cloned().unwrap_or_else(|| last.to_string());
    table.insert(key, value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    /// Reads `path` (if any), then applies `sets` (`section.key=value`) and
    /// `CHIRPY_`-prefixed variables from `env`, later sources winning.
    pub fn load(
        path: Option<&Path>,
        sets: &[String],
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let defaults = Value::try_from(Config::default()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut doc = match defaults {
            Value::Table(t) => t,
            _ => Table::new(),
        };
        let base = path.and_then(|p| p.parent()).map(Path::to_path_buf);
        if let Some(p) = path {
            let text =
                std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
            let file: Table =
                toml::from_str(&text).map_err(|e| ConfigError::Parse { path: p.display().to_string(), message: e.to_string() })?;
            merge(&mut doc, file);
        }
        for set in sets {
            let (key, raw) = set.split_once('=').ok_or_else(|| ConfigError::Override(set.clone()))?;
            set_path(&mut doc, key.trim(), parse_value(raw.trim()))?;
        }
        let mut env: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        env.sort();
        for (k, v) in env {
            let key = k[ENV_PREFIX.len()..].to_lowercase().replace("__", ".");
            set_path(&mut doc, &key, parse_value(&v))?;
        }
        let mut config: Config = Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse { path: "configuration".into(), message: e.to_string() })?;
        if let Some(base) = base {
            config.resolve_paths(&base);
        }
        config.validate()?;
        Ok(config)
    }

    /// Like [`Config::load`] with the process environment.
    pub fn from_env(path: Option<&Path>, sets: &[String]) -> Result<Self, ConfigError> {
        Self::load(path, sets, std::env::vars())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.index.path.as_mut().map(fix);
        self.knowledge.dir.as_mut().map(fix);
        self.adapter.script.as_mut().map(fix);
        fix(&mut self.store.state_path);
        fix(&mut self.store.log_path);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sampler.validate()?;
        if !(0.0..=1.0).contains(&self.adapter.question_rate) {
            return Err(ConfigError::Invalid("adapter.question_rate must be within 0..=1".into()));
        }
        if self.adapter.kind == AdapterKind::Scripted && self.adapter.script.is_none() {
            return Err(ConfigError::Invalid("adapter.script is required for the scripted adapter".into()));
        }
        if self.session.start_hour.is_some_and(|h| h > 23) {
            return Err(ConfigError::Invalid("session.start_hour must be 0..=23".into()));
        }
        if self.engine.rg_timeout_ms == 0 {
            return Err(ConfigError::Invalid("engine.rg_timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> EngineSettings {
        let mut session = self.session.clone();
        session.seed = session.seed.or(self.sampler.rng_seed);
        EngineSettings {
            sampler: self.sampler.clone(),
            rg_timeout: Duration::from_millis(self.engine.rg_timeout_ms),
            session,
            sequential_annotation: self.engine.sequential_annotation,
        }
    }

    pub fn load_index(&self) -> Result<EntityIndex, ConfigError> {
        match &self.index.path {
            Some(p) => Ok(EntityIndex::load(p)?),
            None => {
                tracing::warn!("no index.path configured; entity linking will find nothing");
                Ok(EntityIndex::build(Vec::new())?)
            }
        }
    }

    pub fn adapter(&self) -> Result<Arc<dyn GeneratorAdapter>, ConfigError> {
        let mock: Arc<dyn GeneratorAdapter> = Arc::new(MockAdapter { question_rate: self.adapter.question_rate });
        Ok(match (&self.adapter.kind, &self.adapter.script) {
            (AdapterKind::Scripted, Some(p)) => Arc::new(ScriptedAdapter::load(p, mock)?),
            _ => mock,
        })
    }

    pub fn store(&self) -> Result<Arc<dyn Store>, ConfigError> {
        Ok(match self.store.backend {
            StoreBackend::Memory => Arc::new(MemoryStore::new()),
            StoreBackend::File => Arc::new(FileStore::open(&self.store.state_path, &self.store.log_path)?),
        })
    }

    /// Builds an engine with the configured store.
    pub fn engine(&self) -> Result<Engine, ConfigError> {
        let store = self.store()?;
        self.engine_with_store(store)
    }

    pub fn engine_with_store(&self, store: Arc<dyn Store>) -> Result<Engine, ConfigError> {
        let resources = Resources::bundled();
        let index = Arc::new(self.load_index()?);
        let knowledge = match &self.knowledge.dir {
            Some(dir) => Knowledge::load_dir(dir)?,
            None => Knowledge::bundled().clone(),
        };
        let world = Arc::new(World {
            index: index.clone(),
            knowledge: Arc::new(knowledge),
            adapter: self.adapter()?,
            offense: resources.nlp.offense.clone(),
            stopwords: Arc::new(resources.linker_resources.stopwords.clone()),
            neural_samples: self.engine.neural_samples,
            max_history_tokens: self.engine.max_history_tokens,
        });
        let pipeline = Pipeline::standard(
            Arc::new(resources.nlp.clone()),
            Arc::new(resources.linker_with(self.linker.clone())),
            index,
            self.pipeline.clone(),
        );
        let registry = standard_registry(&world);
        Ok(Engine::new(world, Arc::new(pipeline), registry, self.settings(), store))
    }
}
