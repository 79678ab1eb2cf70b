use serde::{Deserialize, Serialize};

use super::{MdnConfig, MdnModel};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs x outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// JSON model checkpoint: configuration plus per-layer weight arrays in
/// layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: MdnConfig,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerCheckpoint>,
}

impl MdnModel {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: self.params[l.weight_range()].to_vec(),
                    bias: self.params[l.bias_range()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let params = ck
            .layers
            .into_iter()
            .flat_map(|l| l.weights.into_iter().chain(l.bias))
            .collect();
        MdnModel::from_params(ck.config, ck.input_dim, ck.output_dim, params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_checkpoint(serde_json::from_str(text)?)
    }
}
