//! Named parameter tensors and their on-disk checkpoint form.
//!
//! A checkpoint directory holds `manifest.json` (names, shapes, offsets and
//! free-form metadata) and `params.bin`, every parameter's entries as
//! little-endian `f64` in declaration order.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

/// Ordered collection of named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

/// Tape handles for every parameter of a store, in declaration order.
#[derive(Clone, Debug)]
pub struct BoundParams(Vec<Var>);

impl BoundParams {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    params: Vec<ManifestEntry>,
    total: usize,
    #[serde(default)]
    metadata: serde_json::Value,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform `rows×cols` parameter.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let value = Tensor::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit));
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Puts every parameter on `tape`, as leaves when `trainable`, else as
    /// constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        BoundParams(
            self.values
                .iter()
                .map(|v| {
                    if trainable {
                        tape.leaf(v.clone())
                    } else {
                        tape.constant(v.clone())
                    }
                })
                .collect(),
        )
    }

    /// The first `len` parameters; ids below `len` keep their meaning.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            names: self.names[..len].to_vec(),
            values: self.values[..len].to_vec(),
        }
    }

    /// All entries concatenated in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.data().iter().copied()).collect()
    }

    pub fn save(&self, dir: &Path, metadata: serde_json::Value) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut offset = 0;
        let mut params = Vec::with_capacity(self.len());
        for (name, value) in self.names.iter().zip(&self.values) {
            params.push(ManifestEntry {
                name: name.clone(),
                rows: value.rows(),
                cols: value.cols(),
                offset,
            });
            offset += value.len();
        }
        let manifest = Manifest {
            params,
            total: offset,
            metadata,
        };
        let manifest_path = dir.join("manifest.json");
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(&manifest_path, e))?;
        let bytes: Vec<u8> = self.flatten().iter().flat_map(|v| v.to_le_bytes()).collect();
        let bin_path = dir.join("params.bin");
        fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
    }

    /// Loads a checkpoint, returning the store and the saved metadata.
    pub fn load(dir: &Path) -> Result<(Self, serde_json::Value)> {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let bin_path = dir.join("params.bin");
        let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        if bytes.len() != manifest.total * 8 {
            return Err(Error::Contract(format!(
                "{} holds {} bytes, manifest expects {} values",
                bin_path.display(),
                bytes.len(),
                manifest.total
            )));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut store = ParamStore::new();
        for entry in manifest.params {
            let end = entry.offset + entry.rows * entry.cols;
            if end > flat.len() {
                return Err(Error::Contract(format!("parameter {} runs past the data", entry.name)));
            }
            let value = Tensor::new(entry.rows, entry.cols, flat[entry.offset..end].to_vec())?;
            store.add(entry.name, value);
        }
        Ok((store, manifest.metadata))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(1, "init");
        store.add_glorot("w", 3, 4, &mut r);
        store.add("b", Tensor::new(1, 2, vec![0.1, -1e-300]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path(), serde_json::json!({"kind": "test"})).unwrap();
        let (back, meta) = ParamStore::load(dir.path()).unwrap();
        assert_eq!(back, store);
        assert_eq!(meta["kind"], "test");
        assert_eq!(fs::metadata(dir.path().join("params.bin")).unwrap().len(), 14 * 8);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let mut store = ParamStore::new();
        store.add_zeros("w", 2, 2);
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path(), serde_json::Value::Null).unwrap();
        fs::write(dir.path().join("params.bin"), [0u8; 16]).unwrap();
        assert!(matches!(ParamStore::load(dir.path()), Err(Error::Contract(_))));
    }

    #[test]
    fn glorot_respects_limit() {
        let mut store = ParamStore::new();
        let id = store.add_glorot("w", 10, 6, &mut rng::stream(0, "init"));
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(store.get(id).max_abs() <= limit);
        assert_eq!(store.find("w"), Some(id));
    }
}
