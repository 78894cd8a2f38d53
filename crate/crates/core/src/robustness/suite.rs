use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    edge_flip_attack, evaluate, injection_attack, pgd_feature_attack, AttackBudget, AttackKind, GcnSurrogate,
    NodeClassifier,
};
use crate::error::Result;
use crate::graph::NodeDataset;

/// Which model the attacks are crafted against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Craft once on the surrogate and transfer to every victim.
    #[default]
    BlackBox,
    /// Craft feature and injection attacks on each victim through its own
    /// unrolled solver. Edge flips always use the surrogate's dense relaxation.
    WhiteBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub model: String,
    pub attack: String,
    pub clean_acc: f64,
    pub attacked_acc: f64,
    /// `clean_acc − attacked_acc`.
    pub drop: f64,
    pub seed: u64,
}

fn craft(
    attacker: &dyn NodeClassifier,
    surrogate: &GcnSurrogate,
    data: &NodeDataset,
    b: &AttackBudget,
) -> Result<NodeDataset> {
    match b.kind {
        AttackKind::PgdFeature => data.with_features(pgd_feature_attack(attacker, data, b)?),
        AttackKind::Injection => injection_attack(attacker, data, b),
        AttackKind::EdgeFlip => Ok(edge_flip_attack(surrogate, data, b)?.0),
    }
}

/// Test accuracy of every model on clean data and under every budget. Rows
/// are grouped by model: a clean row with attack `"none"`, then one row per
/// budget in order. Accuracy is always measured on the original test nodes.
pub fn robustness_suite(
    models: &[&dyn NodeClassifier],
    surrogate: &GcnSurrogate,
    data: &NodeDataset,
    budgets: &[AttackBudget],
    seed: u64,
    mode: AttackMode,
) -> Result<Vec<SuiteRow>> {
    let test = &data.split.test;
    let transferred = match mode {
        AttackMode::BlackBox => Some(
            budgets
                .iter()
                .map(|b| craft(surrogate, surrogate, data, b))
                .collect::<Result<Vec<_>>>()?,
        ),
        AttackMode::WhiteBox => None,
    };
    let mut rows = Vec::with_capacity(models.len() * (1 + budgets.len()));
    for &model in models {
        let clean_acc = evaluate(model, data, test)?;
        let row = |attack: String, attacked_acc: f64| SuiteRow {
            model: model.name().to_string(),
            attack,
            clean_acc,
            attacked_acc,
            drop: clean_acc - attacked_acc,
            seed,
        };
        rows.push(row("none".into(), clean_acc));
        for (k, b) in budgets.iter().enumerate() {
            let attacked = match &transferred {
                Some(sets) => evaluate(model, &sets[k], test)?,
                None => evaluate(model, &craft(model, surrogate, data, b)?, test)?,
            };
            rows.push(row(b.label(), attacked));
        }
    }
    Ok(rows)
}

/// CSV mirror of the JSON report.
pub fn write_suite_csv(rows: &[SuiteRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<suite csv>", e))?;
    Ok(())
}
