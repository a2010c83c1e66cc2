//! Pipeline configuration: one JSON file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assort::{self, Solver, VerticalConstraint};
use crate::compatibility::{self, MetricMode};
use crate::corpus::{self, LayerOffset};
use crate::error::{Error, Result};
use crate::eval;
use crate::io::hash_json;
use crate::synth::{FeedbackConfig, SynthConfig};
use crate::topicmodel::{self, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub catalog: PathBuf,
    pub activations: PathBuf,
    pub sessions: PathBuf,
    pub purchases: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            catalog: "data/catalog.jsonl".into(),
            activations: "data/activations.jsonl".into(),
            sessions: "data/sessions.jsonl".into(),
            purchases: "data/purchases.jsonl".into(),
            model_dir: "model".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub quantile: f64,
    /// One stopword per line; the bundled English list when absent.
    pub stopwords: Option<PathBuf>,
    pub min_token_freq: usize,
    pub layer_offsets: Option<Vec<LayerOffset>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            quantile: corpus::DEFAULT_QUANTILE,
            stopwords: None,
            min_token_freq: corpus::DEFAULT_MIN_TOKEN_FREQ,
            layer_offsets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicModelConfig {
    pub variant: Variant,
    pub num_topics: usize,
    pub alpha_sum: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub fold_in_sweeps: usize,
}

impl Default for TopicModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Multimodal,
            num_topics: topicmodel::DEFAULT_NUM_TOPICS,
            alpha_sum: topicmodel::DEFAULT_ALPHA_SUM,
            beta: topicmodel::DEFAULT_BETA,
            iterations: topicmodel::DEFAULT_ITERATIONS,
            seed: 0,
            fold_in_sweeps: topicmodel::DEFAULT_FOLD_IN_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub mode: MetricMode,
    pub lambda: f64,
    pub window_days: u32,
    pub min_items: usize,
    pub max_items: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            mode: MetricMode::InverseCovariance,
            lambda: compatibility::DEFAULT_LAMBDA,
            window_days: compatibility::DEFAULT_WINDOW_DAYS,
            min_items: compatibility::DEFAULT_MIN_ITEMS,
            max_items: compatibility::DEFAULT_MAX_ITEMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssortConfig {
    pub solver: Solver,
    /// `[couch set vertical, coffee table vertical]`.
    pub seed_verticals: [String; 2],
    /// Non-seed verticals in visiting order.
    pub verticals: Vec<VerticalConstraint>,
    /// Total budget including the seed.
    pub budget_cents: u64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub max_passes: usize,
    pub top_n: usize,
    /// Candidates per instance for the `oracle` command.
    pub oracle_candidates: usize,
}

impl Default for AssortConfig {
    fn default() -> Self {
        Self {
            solver: Solver::VerticalIter,
            seed_verticals: [assort::COUCH_SET.into(), assort::COFFEE_TABLE.into()],
            verticals: assort::default_constraints(),
            budget_cents: 300_000,
            epsilon: assort::DEFAULT_CONVERGENCE_EPSILON,
            max_iters: assort::DEFAULT_MAX_ITERS,
            max_passes: assort::DEFAULT_MAX_PASSES,
            top_n: 100,
            oracle_candidates: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tau: eval::DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub catalog: SynthConfig,
    pub feedback: FeedbackConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub topicmodel: TopicModelConfig,
    pub metric: MetricConfig,
    pub assort: AssortConfig,
    pub eval: EvalConfig,
    pub synth: SynthSection,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}` {reason}"))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let q = self.corpus.quantile;
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid("corpus.quantile", "must lie in [0, 1]"));
        }
        let tm = &self.topicmodel;
        if tm.num_topics < 1 {
            return Err(invalid("topicmodel.num_topics", "must be at least 1"));
        }
        if !(tm.alpha_sum.is_finite() && tm.alpha_sum > 0.0) {
            return Err(invalid("topicmodel.alpha_sum", "must be positive"));
        }
        if !(tm.beta.is_finite() && tm.beta > 0.0) {
            return Err(invalid("topicmodel.beta", "must be positive"));
        }
        if tm.iterations < 1 {
            return Err(invalid("topicmodel.iterations", "must be at least 1"));
        }
        let m = &self.metric;
        if !(m.lambda.is_finite() && m.lambda >= 0.0) {
            return Err(invalid("metric.lambda", "must be non-negative"));
        }
        if m.min_items > m.max_items {
            return Err(invalid("metric.min_items", "exceeds metric.max_items"));
        }
        let a = &self.assort;
        for c in &a.verticals {
            c.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(a.epsilon.is_finite() && a.epsilon > 0.0) {
            return Err(invalid("assort.epsilon", "must be positive"));
        }
        if a.max_iters < 1 {
            return Err(invalid("assort.max_iters", "must be at least 1"));
        }
        if a.oracle_candidates > crate::synth::MAX_ORACLE_CANDIDATES {
            return Err(invalid("assort.oracle_candidates", "must be at most 20"));
        }
        let tau = self.eval.tau;
        if !(0.0..=1.0).contains(&tau) {
            return Err(invalid("eval.tau", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config always serializes")
    }

    pub fn hash(&self) -> String {
        hash_json(&self.to_value())
    }
}

/// Sets a dotted key inside a JSON object, creating intermediate objects.
/// The value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("override key `{key}` has an empty segment")));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("just ensured object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// A loaded configuration and the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Reads `path` (or starts from defaults), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (mut value, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let value: Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
                    path: p.to_path_buf(),
                    line: e.line(),
                    message: e.to_string(),
                })?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (value, base)
            }
            None => (Value::Object(Default::default()), PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: PipelineConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(Self { config, base_dir })
    }

    pub fn from_config(config: PipelineConfig, base_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            base_dir: base_dir.into(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
