//! Node classification with flow models, and attacks against it.
//!
//! Attacks are crafted on a [`GcnSurrogate`] and transferred to victim
//! models (black-box), or crafted on the victim itself (white-box).

mod attacks;
mod model;
mod suite;
mod surrogate;
mod train;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::NodeDataset;
use crate::nets::{BoundParams, GraphContext, ParamStore};

pub use attacks::{
    edge_flip_attack, injection_attack, pgd_feature_attack, AttackBudget, AttackKind, EdgeFlip, EDGE_FLIP_SHORTLIST,
};
pub use model::{FlowModel, ModelConfig};
pub use suite::{robustness_suite, write_suite_csv, AttackMode, SuiteRow};
pub use surrogate::GcnSurrogate;
pub use train::{train, train_surrogate, EpochRecord, History, OptimizerKind, TrainConfig};

/// A model mapping node features on a graph to class logits.
pub trait NodeClassifier: Send + Sync {
    fn name(&self) -> &str;

    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    /// `|V|×C` logits for the graph of `ctx` and features `x`.
    fn logits(&self, tape: &mut Tape, params: &BoundParams, ctx: &GraphContext, x: Var) -> Result<Var>;
}

/// Mean cross-entropy of `logits` over `nodes`.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], nodes: &[usize]) -> Result<Var> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("cross-entropy over an empty node set".into()));
    }
    let (n, c) = tape.shape(logits);
    let mut pick = Tensor::zeros(n, c);
    for &i in nodes {
        if i >= n || labels[i] >= c {
            return Err(Error::InvalidArgument(format!("node {i} or its label is out of range")));
        }
        pick.set(i, labels[i], 1.0);
    }
    let logp = tape.log_softmax_rows(logits)?;
    let pick = tape.constant(pick);
    let picked = tape.hadamard(logp, pick)?;
    let total = tape.sum(picked)?;
    tape.scale(total, -1.0 / nodes.len() as f64)
}

/// Argmax class of every node; ties go to the lowest index.
pub fn predict(model: &dyn NodeClassifier, ctx: &GraphContext, features: &Tensor) -> Result<Vec<usize>> {
    let logits = logits_value(model, ctx, features)?;
    Ok((0..logits.rows()).map(|i| logits.argmax_row(i)).collect())
}

pub(crate) fn logits_value(model: &dyn NodeClassifier, ctx: &GraphContext, features: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let params = model.params().bind(&mut tape, false);
    let x = tape.constant(features.clone());
    let out = model.logits(&mut tape, &params, ctx, x)?;
    Ok(tape.value(out).clone())
}

/// Fraction of `nodes` whose predicted class equals the label.
pub fn accuracy(predictions: &[usize], labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("accuracy over an empty node set".into()));
    }
    let hits = nodes.iter().filter(|&&i| predictions[i] == labels[i]).count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Accuracy of `model` on `nodes` of `data`.
pub fn evaluate(model: &dyn NodeClassifier, data: &NodeDataset, nodes: &[usize]) -> Result<f64> {
    evaluate_in(model, &GraphContext::new(&data.graph), data, nodes)
}

/// [`evaluate`] with a prebuilt context for `data.graph`.
pub fn evaluate_in(model: &dyn NodeClassifier, ctx: &GraphContext, data: &NodeDataset, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("evaluation node set is empty".into()));
    }
    let pred = predict(model, ctx, &data.features)?;
    accuracy(&pred, &data.labels, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, Split};

    /// Returns fixed logits regardless of input.
    struct Fixed(Tensor, ParamStore);

    impl NodeClassifier for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn params(&self) -> &ParamStore {
            &self.1
        }
        fn params_mut(&mut self) -> &mut ParamStore {
            &mut self.1
        }
        fn logits(&self, tape: &mut Tape, _: &BoundParams, _: &GraphContext, _: Var) -> Result<Var> {
            Ok(tape.constant(self.0.clone()))
        }
    }

    fn dataset(labels: Vec<usize>) -> NodeDataset {
        let n = labels.len();
        let split = Split {
            train: vec![],
            val: vec![],
            test: (0..n).collect(),
        };
        NodeDataset::new(Graph::empty(n), Tensor::zeros(n, 1), labels, 3, split).unwrap()
    }

    #[test]
    fn uniform_logits_give_log_c_loss() {
        let mut tape = Tape::new();
        let logits = tape.constant(Tensor::zeros(4, 3));
        let loss = cross_entropy(&mut tape, logits, &[0, 1, 2, 0], &[0, 1, 3]).unwrap();
        assert!((tape.value(loss).item() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let labels = vec![0, 2, 1, 2, 2];
        let data = dataset(labels.clone());
        let perfect = Tensor::from_fn(5, 3, |i, c| if labels[i] == c { 1.0 } else { 0.0 });
        let m = Fixed(perfect, ParamStore::new());
        assert_eq!(evaluate(&m, &data, &data.split.test).unwrap(), 1.0);
        // Constant logits tie everywhere, so every node is predicted class 0.
        let m = Fixed(Tensor::zeros(5, 3), ParamStore::new());
        assert_eq!(evaluate(&m, &data, &data.split.test).unwrap(), 0.2);
        let m = Fixed(
            Tensor::from_fn(5, 3, |_, c| if c == 2 { 1.0 } else { 0.0 }),
            ParamStore::new(),
        );
        let acc = evaluate(&m, &data, &data.split.test).unwrap();
        assert_eq!(acc, 0.6);
        assert_eq!(acc, evaluate(&m, &data, &data.split.test).unwrap());
    }

    #[test]
    fn empty_sets_are_rejected() {
        let data = dataset(vec![0, 1]);
        let m = Fixed(Tensor::zeros(2, 3), ParamStore::new());
        assert!(matches!(evaluate(&m, &data, &[]), Err(Error::InvalidArgument(_))));
        let mut tape = Tape::new();
        let l = tape.constant(Tensor::zeros(2, 3));
        assert!(cross_entropy(&mut tape, l, &[0, 1], &[]).is_err());
    }
}
