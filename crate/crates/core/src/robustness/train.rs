use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{accuracy, cross_entropy, GcnSurrogate, NodeClassifier};
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::NodeDataset;
use crate::nets::GraphContext;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// L2 coefficient added to every gradient.
    pub weight_decay: f64,
    /// Root seed for parameter initialization.
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-2,
            weight_decay: 1e-4,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
}

impl History {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("history csv", e))?;
        Ok(())
    }
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(shapes: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = shapes.iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for k in 0..p.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Full-batch training on `data.split.train` with cross-entropy. After
/// every epoch's forward pass the current parameters are scored on the
/// validation set; the best (highest accuracy, then lowest loss) are
/// restored at the end.
pub fn train<M: NodeClassifier + ?Sized>(model: &mut M, data: &NodeDataset, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if data.split.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let ctx = GraphContext::new(&data.graph);
    let mut adam = Adam::new(model.params().values());
    let mut history = History::default();
    let mut best: Option<(f64, f64, Vec<Tensor>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape, true);
        let x = tape.constant(data.features.clone());
        let step = |tape: &mut Tape| -> Result<_> {
            let logits = model.logits(tape, &bound, &ctx, x)?;
            let loss = cross_entropy(tape, logits, &data.labels, &data.split.train)?;
            Ok((logits, loss))
        };
        let (logits, loss) = step(&mut tape).map_err(|e| match e {
            Error::Numeric { op } => {
                warn!("epoch {epoch}: non-finite value in {op}");
                Error::Divergence { epoch }
            }
            other => other,
        })?;
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let logit_values = tape.value(logits).clone();
        let pred: Vec<usize> = (0..logit_values.rows()).map(|i| logit_values.argmax_row(i)).collect();
        let train_acc = accuracy(&pred, &data.labels, &data.split.train)?;
        let (val_acc, val_loss) = if data.split.val.is_empty() {
            (train_acc, loss_value)
        } else {
            let mut vt = Tape::new();
            let l = vt.constant(logit_values);
            let vl = cross_entropy(&mut vt, l, &data.labels, &data.split.val)?;
            (accuracy(&pred, &data.labels, &data.split.val)?, vt.value(vl).item())
        };
        history.records.push(EpochRecord {
            epoch,
            loss: loss_value,
            train_acc,
            val_acc,
            val_loss,
        });
        debug!("epoch {epoch}: loss {loss_value:.5} train {train_acc:.3} val {val_acc:.3}");

        let improved = match &best {
            None => true,
            Some((acc, vl, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *vl),
        };
        if improved {
            best = Some((val_acc, val_loss, model.params().values().to_vec()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }

        let mut grads = tape.backward_wrt(loss, bound.vars())?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        let params = model.params_mut().values_mut();
        for (g, p) in grads.iter_mut().zip(params.iter()) {
            if cfg.weight_decay > 0.0 {
                g.axpy(cfg.weight_decay, p)?;
            }
        }
        match cfg.optimizer {
            OptimizerKind::Adam => adam.step(params, &grads, cfg.lr),
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads) {
                    p.axpy(-cfg.lr, g)?;
                }
            }
        }
    }
    if let Some((_, _, values)) = best {
        model.params_mut().values_mut().clone_from_slice(&values);
    }
    Ok(history)
}

/// Builds a [`GcnSurrogate`] from the `surrogate.init` stream of
/// `cfg.seed` and trains it like any other model.
pub fn train_surrogate(data: &NodeDataset, cfg: &TrainConfig, hidden: usize) -> Result<(GcnSurrogate, History)> {
    let mut init = rng::stream(cfg.seed, "surrogate.init");
    let mut model = GcnSurrogate::new(data.feature_dim(), hidden, data.num_classes, &mut init)?;
    let history = train(&mut model, data, cfg)?;
    Ok((model, history))
}
