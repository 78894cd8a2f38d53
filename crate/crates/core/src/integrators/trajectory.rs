use std::collections::BTreeMap;
use std::io::Write;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::flows::PhaseState;

/// Recorded states of one integration run. `times`, `states` and
/// `diagnostics` have equal length; the first entry is `t = 0`.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState<Tensor>>,
    pub diagnostics: Vec<BTreeMap<String, f64>>,
    pub requested_time: f64,
}

impl Trajectory {
    pub(crate) fn new(requested_time: f64) -> Self {
        Self {
            requested_time,
            ..Self::default()
        }
    }

    pub(crate) fn push(&mut self, t: f64, state: PhaseState<Tensor>, diag: BTreeMap<String, f64>) {
        self.times.push(t);
        self.states.push(state);
        self.diagnostics.push(diag);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> Option<&PhaseState<Tensor>> {
        self.states.last()
    }

    /// `T − n·h`, non-negative.
    pub fn time_mismatch(&self) -> f64 {
        self.requested_time - self.final_time()
    }

    /// One diagnostic across all recorded times, if every record has it.
    pub fn series(&self, key: &str) -> Option<Vec<f64>> {
        self.diagnostics.iter().map(|d| d.get(key).copied()).collect()
    }

    /// CSV with columns `time`, each diagnostic, then optionally the
    /// flattened state as `s0, s1, …`.
    pub fn write_csv<W: Write>(&self, out: W, with_state: bool) -> Result<()> {
        let keys: Vec<&String> = self.diagnostics.first().map(|d| d.keys().collect()).unwrap_or_default();
        let width = self.states.first().map_or(0, |s| s.flatten().len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        if with_state {
            header.extend((0..width).map(|i| format!("s{i}")));
        }
        w.write_record(&header)?;
        for ((t, s), d) in self.times.iter().zip(&self.states).zip(&self.diagnostics) {
            let mut row = vec![t.to_string()];
            for k in &keys {
                let v = d
                    .get(*k)
                    .ok_or_else(|| Error::Contract(format!("diagnostic {k} missing at t={t}")))?;
                row.push(v.to_string());
            }
            if with_state {
                row.extend(s.flatten().iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("trajectory csv", e))?;
        Ok(())
    }
}
