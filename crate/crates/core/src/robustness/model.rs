use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NodeClassifier;
use crate::autodiff::{SparseOperator, Tape, Var};
use crate::error::{Error, Result};
use crate::flows::{Flow, FlowSpec};
use crate::integrators::{integrate_on_tape, IntegrationConfig};
use crate::nets::{BoundParams, GraphContext, Linear, ParamStore};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub flow: FlowSpec,
    /// Width `r` of the flow state.
    pub hidden: usize,
    pub integration: IntegrationConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            flow: FlowSpec::default(),
            hidden: 16,
            integration: IntegrationConfig::default(),
        }
    }
}

/// Encoder `Linear(d → r)`, a flow integrated to `T`, and a decoder
/// `Linear(r → C)` applied to the final position block.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub config: ModelConfig,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub store: ParamStore,
    encoder: Linear,
    flow: Flow,
    decoder: Linear,
    /// Parameters before the flow's, and after them.
    flow_range: (usize, usize),
    /// Identifies the graph `flow` was built on.
    home: Arc<SparseOperator>,
}

impl FlowModel {
    pub fn new(
        config: &ModelConfig,
        feature_dim: usize,
        num_classes: usize,
        ctx: &GraphContext,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if config.hidden == 0 || feature_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(format!(
                "model widths must be positive (hidden {}, features {feature_dim}, classes {num_classes})",
                config.hidden
            )));
        }
        config.integration.num_steps()?;
        let mut store = ParamStore::new();
        let encoder = Linear::new(&mut store, "encoder", feature_dim, config.hidden, rng);
        let start = store.len();
        let flow = Flow::build(&config.flow, &mut store, ctx, config.hidden, rng)?;
        let end = store.len();
        let decoder = Linear::new(&mut store, "decoder", config.hidden, num_classes, rng);
        Ok(Self {
            config: config.clone(),
            feature_dim,
            num_classes,
            store,
            encoder,
            flow,
            decoder,
            flow_range: (start, end),
            home: Arc::clone(&ctx.gcn),
        })
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    /// The flow bound to the graph of `ctx`, sharing this model's parameters.
    pub fn flow_on(&self, ctx: &GraphContext) -> Result<Flow> {
        if Arc::ptr_eq(&ctx.gcn, &self.home) {
            return Ok(self.flow.clone());
        }
        let (start, end) = self.flow_range;
        let mut scratch = self.store.truncated(start);
        // Only the layout matters; the drawn values are discarded.
        let mut rng = rng::stream(0, "layout");
        let flow = Flow::build(&self.config.flow, &mut scratch, ctx, self.config.hidden, &mut rng)?;
        let same_layout = scratch.len() == end
            && scratch.ids().skip(start).all(|id| {
                scratch.name(id) == self.store.name(id) && scratch.get(id).shape() == self.store.get(id).shape()
            });
        if !same_layout {
            return Err(Error::Contract("flow parameter layout depends on the graph".into()));
        }
        Ok(flow)
    }

    /// Encoded initial features `q(0)`.
    pub fn encode(&self, tape: &mut Tape, params: &BoundParams, x: Var) -> Result<Var> {
        self.encoder.forward(tape, params, x)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "model": "flow",
            "config": self.config,
            "feature_dim": self.feature_dim,
            "num_classes": self.num_classes,
        });
        self.store.save(dir, meta)
    }

    /// Restores a model saved with [`FlowModel::save`] onto the graph of `ctx`.
    pub fn load(dir: &Path, ctx: &GraphContext) -> Result<Self> {
        let (store, meta) = ParamStore::load(dir)?;
        if meta["model"] != "flow" {
            return Err(Error::Contract(format!(
                "{} is not a flow model checkpoint",
                dir.display()
            )));
        }
        let config: ModelConfig = serde_json::from_value(meta["config"].clone())?;
        let dim = |key: &str| {
            meta[key]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Contract(format!("checkpoint metadata lacks {key}")))
        };
        let mut rng = rng::stream(0, "layout");
        let mut model = Self::new(&config, dim("feature_dim")?, dim("num_classes")?, ctx, &mut rng)?;
        let layout_matches = model.store.len() == store.len()
            && model.store.ids().all(|id| {
                model.store.name(id) == store.name(id) && model.store.get(id).shape() == store.get(id).shape()
            });
        if !layout_matches {
            return Err(Error::Contract(format!(
                "checkpoint {} does not match its recorded configuration",
                dir.display()
            )));
        }
        model.store = store;
        Ok(model)
    }
}

impl NodeClassifier for FlowModel {
    fn name(&self) -> &str {
        self.config.flow.kind.as_str()
    }

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn logits(&self, tape: &mut Tape, params: &BoundParams, ctx: &GraphContext, x: Var) -> Result<Var> {
        let flow = self.flow_on(ctx)?;
        let q0 = self.encoder.forward(tape, params, x)?;
        let state0 = flow.initial_state(tape, q0)?;
        let end = integrate_on_tape(&flow, tape, params, &state0, &self.config.integration)?;
        self.decoder.forward(tape, params, end.position)
    }
}
