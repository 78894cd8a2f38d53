use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{load_edge_list, Graph};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Disjoint train / validation / test node sets, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Class-stratified split: within each class the nodes are shuffled with
    /// the `split` stream of `seed` and the first `round(f·n_c)` go to train,
    /// the next to val, then test. Nodes left over belong to no set.
    pub fn stratified(labels: &[usize], fractions: (f64, f64, f64), seed: u64) -> Result<Self> {
        let (ft, fv, fs) = fractions;
        if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || ft + fv + fs > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "split fractions {fractions:?} must be in [0,1] and sum to at most 1"
            )));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut rng = rng::stream(seed, "split");
        let mut split = Split::default();
        for c in 0..num_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            members.shuffle(&mut rng);
            let n = members.len() as f64;
            let n_train = (ft * n).round() as usize;
            let n_val = ((fv * n).round() as usize).min(members.len() - n_train);
            let n_test = ((fs * n).round() as usize).min(members.len() - n_train - n_val);
            split.train.extend_from_slice(&members[..n_train]);
            split.val.extend_from_slice(&members[n_train..n_train + n_val]);
            split
                .test
                .extend_from_slice(&members[n_train + n_val..n_train + n_val + n_test]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        Ok(split)
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in set {
                if i >= num_nodes {
                    return Err(Error::InvalidArgument(format!(
                        "{name} index {i} outside 0..{num_nodes}"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears in more than one split set"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }
}

/// Graph with node features, labels and a split.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDataset {
    pub graph: Graph,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl NodeDataset {
    /// Checks shapes, label range and split validity. `num_classes` must
    /// exceed every label.
    pub fn new(graph: Graph, features: Tensor, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::dim(
                "NodeDataset",
                format!("{} feature rows for {n} nodes", features.rows()),
            ));
        }
        if labels.len() != n {
            return Err(Error::dim(
                "NodeDataset",
                format!("{} labels for {n} nodes", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{num_classes}")));
        }
        if !features.is_finite() {
            return Err(Error::InvalidArgument("features contain non-finite values".into()));
        }
        split.validate(n)?;
        Ok(Self {
            graph,
            features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Copy with different features; everything else shared.
    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        Self::new(
            self.graph.clone(),
            features,
            self.labels.clone(),
            self.num_classes,
            self.split.clone(),
        )
    }

    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Self::new(
            graph,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
            self.split.clone(),
        )
    }

    /// Population standard deviation of all feature entries.
    pub fn feature_std(&self) -> f64 {
        let d = self.features.data();
        if d.is_empty() {
            return 0.0;
        }
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
    }

    /// Loads a dataset from an edge list, a features CSV and a labels CSV
    /// (each with a header row, row `i` describing node `i`) and a split JSON.
    /// When the edge list names fewer nodes than the CSVs, the remaining
    /// nodes are isolated.
    pub fn load(edges: &Path, features: &Path, labels: &Path, split: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let features = read_features_csv(&read(features)?)?;
        let labels = read_labels_csv(&read(labels)?)?;
        let split = Split::from_json(&read(split)?)?;
        let mut graph = load_edge_list(&read(edges)?)?;
        if graph.num_nodes() < features.rows() {
            graph = Graph::from_edges(features.rows(), &graph.edges())?;
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(graph, features, labels, num_classes, split)
    }

    /// Writes `edges.txt`, `features.csv`, `labels.csv` and `split.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        write("edges.txt", super::save_edge_list(&self.graph))?;
        write("features.csv", write_features_csv(&self.features)?)?;
        let mut labels = String::from("label\n");
        for c in &self.labels {
            labels.push_str(&format!("{c}\n"));
        }
        write("labels.csv", labels)?;
        write("split.json", self.split.to_json())
    }
}

fn csv_line(e: &csv::Error) -> usize {
    e.position().map_or(0, |p| p.line() as usize)
}

pub(crate) fn read_features_csv(text: &str) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: csv_line(&e),
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("expected a number, found {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Tensor::from_rows(&rows)
}

fn read_labels_csv(text: &str) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: csv_line(&e),
            message: e.to_string(),
        })?;
        let field = record.get(0).unwrap_or("").trim();
        labels.push(field.parse().map_err(|_| Error::Parse {
            line: i + 2,
            message: format!("expected a class index, found {field:?}"),
        })?);
    }
    Ok(labels)
}

pub(crate) fn write_features_csv(features: &Tensor) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record((0..features.cols()).map(|j| format!("f{j}")))?;
    for i in 0..features.rows() {
        writer.write_record(features.row(i).iter().map(|v| v.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::io("features.csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
