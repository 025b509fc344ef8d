use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, Param, TrustGnn};
use crate::error::{Error, Result};
use crate::graph::{ChainType, TrustGraph};
use crate::ndiff::Tensor;
use crate::train::TrainConfig;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// On-disk model: configuration echo, chain-type order and every parameter
/// tensor as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub num_nodes: usize,
    pub num_relations: usize,
    pub chain_index: Vec<ChainType>,
    pub params: BTreeMap<String, Vec<Vec<f64>>>,
    pub seed: u64,
    /// [`TrustGraph::fingerprint`] of the dataset the model was trained on.
    #[serde(default)]
    pub graph_fingerprint: Option<String>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, model: &TrustGnn, params: &ModelParams) -> Self {
        let spec = model.spec();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            num_nodes: spec.num_nodes,
            num_relations: spec.num_relations,
            chain_index: spec.chains.types().to_vec(),
            params: params
                .entries()
                .iter()
                .map(|p| (p.name.clone(), p.value.to_rows()))
                .collect(),
            seed: config.seed,
            graph_fingerprint: None,
        }
    }

    pub fn with_graph(mut self, graph: &TrustGraph) -> Self {
        self.graph_fingerprint = Some(graph.fingerprint());
        self
    }

    /// Refuses a dataset other than the one the checkpoint was trained on.
    pub fn check_graph(&self, graph: &TrustGraph) -> Result<()> {
        if graph.num_nodes() != self.num_nodes {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects {} nodes, dataset has {}",
                self.num_nodes,
                graph.num_nodes()
            )));
        }
        if graph.num_relations() != self.num_relations {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects {} relations, dataset has {}",
                self.num_relations,
                graph.num_relations()
            )));
        }
        match &self.graph_fingerprint {
            Some(f) if *f != graph.fingerprint() => Err(Error::Checkpoint(format!(
                "dataset fingerprint {} does not match the checkpoint's {f}",
                graph.fingerprint()
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(fs::File::open(path)?);
        Ok(serde_json::from_reader(r)?)
    }

    /// Rebuilds the model and its parameters, checking the version, the
    /// chain-type order and every tensor shape against the configuration.
    pub fn restore(&self) -> Result<(TrustGnn, ModelParams)> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.num_relations != self.config.num_relations {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} relations but its configuration says {}",
                self.num_relations, self.config.num_relations
            )));
        }
        let spec = self
            .config
            .model_spec(self.num_nodes)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if spec.chains.types() != self.chain_index.as_slice() {
            return Err(Error::Checkpoint(
                "chain-type order does not match the configuration".into(),
            ));
        }
        let mut entries = Vec::with_capacity(self.params.len());
        for (name, shape, trainable) in ModelParams::layout(&spec) {
            let rows = self
                .params
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}` (expected {shape:?})")))?;
            let value = if rows.is_empty() {
                Tensor::zeros(0, shape[1])
            } else {
                Tensor::from_rows(rows).map_err(|_| Error::Checkpoint(format!("`{name}` has ragged rows")))?
            };
            entries.push(Param { name, value, trainable });
        }
        if let Some(extra) = self.params.keys().find(|k| !entries.iter().any(|p| &p.name == *k)) {
            return Err(Error::Checkpoint(format!("unexpected parameter `{extra}`")));
        }
        let params = ModelParams::from_entries(entries);
        params.validate(&spec)?;
        if params.entries().iter().any(|p| !p.value.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok((TrustGnn::new(spec)?, params))
    }
}
