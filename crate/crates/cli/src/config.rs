//! Experiment configuration: a JSON document with every field defaulted,
//! overridable by dotted-path assignments.

use std::fs;
use std::path::{Path, PathBuf};

use hamflow::flows::{FlowKind, FlowSpec};
use hamflow::graph::{generate_sbm, NodeDataset, NormMode, SbmParams};
use hamflow::robustness::{AttackBudget, AttackMode, ModelConfig, TrainConfig};
use hamflow::stability::{PortraitConfig, StabilityConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Dataset files, resolved relative to the working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub split: PathBuf,
}

/// Exactly one source of node data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthetic stochastic block model; its seed is the root seed.
    Sbm(SbmParams),
    Files(DatasetFiles),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Sbm(SbmParams::default())
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<NodeDataset, CliError> {
        Ok(match self {
            DatasetSource::Sbm(p) => generate_sbm(p)?,
            DatasetSource::Files(f) => NodeDataset::load(&f.edges, &f.features, &f.labels, &f.split)?,
        })
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            DatasetSource::Sbm(p) => DatasetSource::Sbm(SbmParams { seed, ..p.clone() }),
            files => files.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSettings {
    pub mode: AttackMode,
    /// Root seeds of the independent suite cells; the root seed when empty.
    pub seeds: Vec<u64>,
    pub surrogate_hidden: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            mode: AttackMode::BlackBox,
            seeds: Vec::new(),
            surrogate_hidden: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSettings {
    /// Central-difference step.
    pub h: f64,
    pub tolerance: f64,
    /// Nodes per class of the SBM probe graph.
    pub nodes_per_class: usize,
    pub hidden: usize,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tolerance: 1e-5,
            nodes_per_class: 4,
            hidden: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub dataset: DatasetSource,
    pub models: Vec<ModelConfig>,
    pub train: TrainConfig,
    pub attacks: Vec<AttackBudget>,
    pub suite: SuiteSettings,
    pub stability: StabilityConfig,
    pub portrait: PortraitConfig,
    pub gradcheck: GradcheckSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let model = |kind| ModelConfig {
            flow: FlowSpec::new(kind),
            ..ModelConfig::default()
        };
        Self {
            seed: 0,
            output: PathBuf::from("out"),
            dataset: DatasetSource::default(),
            models: vec![model(FlowKind::Hang), model(FlowKind::GrandL)],
            train: TrainConfig::default(),
            attacks: vec![AttackBudget {
                epsilon: 0.5,
                epsilon_relative: true,
                ..AttackBudget::default()
            }],
            suite: SuiteSettings::default(),
            stability: StabilityConfig::default(),
            portrait: PortraitConfig::default(),
            gradcheck: GradcheckSettings::default(),
        }
    }
}

/// Command-line overrides, applied after the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `key.path=value` assignments; values parse as JSON, else as strings.
    pub set: Vec<String>,
    pub flow: Option<String>,
    pub alpha: Option<f64>,
    pub attention: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

fn keys_of(v: &Value) -> String {
    match v {
        Value::Object(m) => m.keys().cloned().collect::<Vec<_>>().join(", "),
        Value::Array(a) => format!("indices 0..{}", a.len()),
        _ => "none (scalar)".into(),
    }
}

/// Assigns `value` at a dotted `path`, refusing keys absent from `doc`.
fn assign(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let prefix = parts[..depth].join(".");
        let valid = keys_of(cur);
        let next = match cur {
            Value::Object(m) => m.get_mut(*part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        };
        cur = next.ok_or_else(|| {
            let at = if prefix.is_empty() {
                "top level".to_string()
            } else {
                format!("`{prefix}`")
            };
            CliError::Usage(format!("unknown key `{part}` at {at}; valid keys: {valid}"))
        })?;
    }
    *cur = value;
    Ok(())
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn flow_shorthand(flow: Option<&str>, attention: Option<&str>, spec: &mut FlowSpec) -> Result<(), CliError> {
    let usage = |what: &str, got: &str, valid: &str| CliError::Usage(format!("unknown {what} `{got}`; valid: {valid}"));
    if let Some(f) = flow {
        spec.kind = match f {
            "grand" => FlowKind::GrandL,
            other => FlowKind::parse(other).ok_or_else(|| {
                usage(
                    "flow",
                    other,
                    "grand, grand_l, grand_nl, graphcon, graphbel, hang, hang_quad",
                )
            })?,
        };
    }
    if let Some(a) = attention {
        let valid = "doubly-stochastic, row, column, symmetric";
        match a {
            "doubly-stochastic" | "sinkhorn" => {
                if !matches!(spec.kind, FlowKind::GrandL | FlowKind::GrandNl) {
                    return Err(CliError::Usage("--attention applies to grand flows only".into()));
                }
                spec.kind = FlowKind::GrandNl;
            }
            "row" | "column" | "symmetric" => {
                if !matches!(spec.kind, FlowKind::GrandL | FlowKind::GrandNl) {
                    return Err(CliError::Usage("--attention applies to grand flows only".into()));
                }
                spec.kind = FlowKind::GrandL;
                spec.adjacency = match a {
                    "row" => NormMode::Row,
                    "column" => NormMode::Column,
                    _ => NormMode::Symmetric,
                };
            }
            other => return Err(usage("attention", other, valid)),
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults), applies `ov`, then pins every
    /// derived seed to the root seed.
    pub fn resolve(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(Self::default()).expect("default config serializes");
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            // Parse strictly first so unknown keys are reported with the valid set.
            let from_file: Self =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            doc = serde_json::to_value(from_file).expect("config serializes");
        }
        for item in &ov.set {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{item}`")))?;
            assign(&mut doc, key.trim(), parse_value(value.trim()))?;
        }
        let mut cfg: Self =
            serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid override: {e}")))?;

        if ov.flow.is_some() || ov.attention.is_some() || ov.alpha.is_some() {
            if cfg.models.is_empty() {
                cfg.models.push(ModelConfig::default());
            }
            for m in &mut cfg.models {
                flow_shorthand(ov.flow.as_deref(), ov.attention.as_deref(), &mut m.flow)?;
                if let Some(a) = ov.alpha {
                    m.flow.alpha = a;
                }
            }
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(o) = &ov.output {
            cfg.output = o.clone();
        } else if let Ok(o) = std::env::var("HAMFLOW_OUT") {
            cfg.output = PathBuf::from(o);
        }
        Ok(cfg.reseeded(cfg.seed))
    }

    /// This configuration with every sub-seed set to `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.dataset = cfg.dataset.with_seed(seed);
        cfg.train.seed = seed;
        for a in &mut cfg.attacks {
            a.seed = seed;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate()?;
        for m in &self.models {
            m.flow.validate()?;
            m.integration.num_steps()?;
        }
        for a in &self.attacks {
            a.validate()?;
        }
        Ok(())
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = dir.join("resolved_config.json");
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(path)
    }
}
