use std::path::Path;

use rand::Rng;

use super::NodeClassifier;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nets::{BoundParams, GcnLayer, GraphContext, ParamStore};
use crate::rng;

/// Two-layer GCN `Â relu(ÂXW₁ + b₁) W₂ + b₂` with
/// `Â = D̃^{-1/2}(A + I)D̃^{-1/2}`, used to craft transfer attacks.
#[derive(Clone, Debug)]
pub struct GcnSurrogate {
    pub store: ParamStore,
    pub layer1: GcnLayer,
    pub layer2: GcnLayer,
}

impl GcnSurrogate {
    pub fn new(feature_dim: usize, hidden: usize, num_classes: usize, rng: &mut impl Rng) -> Result<Self> {
        if feature_dim == 0 || hidden == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument("surrogate widths must be positive".into()));
        }
        let mut store = ParamStore::new();
        let layer1 = GcnLayer::new(&mut store, "surrogate.gcn1", feature_dim, hidden, rng);
        let layer2 = GcnLayer::new(&mut store, "surrogate.gcn2", hidden, num_classes, rng);
        Ok(Self { store, layer1, layer2 })
    }

    /// `Â` from a dense symmetric adjacency `a` without self-loops, kept
    /// differentiable in `a`.
    pub fn normalize_dense(tape: &mut Tape, a: Var) -> Result<Var> {
        let n = tape.shape(a).0;
        let eye = tape.constant(Tensor::identity(n));
        let a_tilde = tape.add(a, eye)?;
        let deg = tape.row_sums(a_tilde)?;
        let dinv = tape.powf(deg, -0.5)?;
        let dinv_t = tape.transpose(dinv)?;
        let outer = tape.matmul(dinv, dinv_t)?;
        tape.hadamard(a_tilde, outer)
    }

    /// Logits with a dense normalized adjacency `a_hat`.
    pub fn logits_dense(&self, tape: &mut Tape, params: &BoundParams, a_hat: Var, x: Var) -> Result<Var> {
        let layer = |tape: &mut Tape, l: &GcnLayer, h: Var| -> Result<Var> {
            let hw = tape.matmul(h, params.get(l.weight))?;
            let ahw = tape.matmul(a_hat, hw)?;
            tape.add_row_vector(ahw, params.get(l.bias))
        };
        let h = layer(tape, &self.layer1, x)?;
        let h = tape.relu(h)?;
        layer(tape, &self.layer2, h)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "model": "gcn_surrogate",
            "feature_dim": self.layer1.fan_in,
            "hidden": self.layer1.fan_out,
            "num_classes": self.layer2.fan_out,
        });
        self.store.save(dir, meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (store, meta) = ParamStore::load(dir)?;
        if meta["model"] != "gcn_surrogate" {
            return Err(Error::Contract(format!(
                "{} is not a surrogate checkpoint",
                dir.display()
            )));
        }
        let dim = |key: &str| {
            meta[key]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Contract(format!("checkpoint metadata lacks {key}")))
        };
        let mut model = Self::new(
            dim("feature_dim")?,
            dim("hidden")?,
            dim("num_classes")?,
            &mut rng::stream(0, "layout"),
        )?;
        if model.store.len() != store.len()
            || model
                .store
                .ids()
                .any(|id| model.store.get(id).shape() != store.get(id).shape())
        {
            return Err(Error::Contract(format!(
                "checkpoint {} has the wrong layout",
                dir.display()
            )));
        }
        model.store = store;
        Ok(model)
    }
}

impl NodeClassifier for GcnSurrogate {
    fn name(&self) -> &str {
        "gcn"
    }

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn logits(&self, tape: &mut Tape, params: &BoundParams, ctx: &GraphContext, x: Var) -> Result<Var> {
        let h = self.layer1.forward(tape, params, &ctx.gcn, x)?;
        let h = tape.relu(h)?;
        self.layer2.forward(tape, params, &ctx.gcn, h)
    }
}
