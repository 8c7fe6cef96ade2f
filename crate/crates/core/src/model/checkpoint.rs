use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelParams, TensorSet, TENSOR_NAMES};
use crate::error::{QapError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    n: usize,
    d_h: usize,
    d_prime: usize,
    layers: usize,
    seed: u64,
    tensors: BTreeMap<String, TensorRecord>,
}

/// Trained parameters plus the seed they were initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let dims = self.params.dims();
        let tensors = TENSOR_NAMES
            .iter()
            .zip(self.params.slices())
            .map(|(name, values)| {
                let rec = TensorRecord {
                    shape: dims.shape_of(name).expect("known tensor"),
                    values: values.to_vec(),
                };
                (name.to_string(), rec)
            })
            .collect();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            n: dims.n,
            d_h: dims.d_h,
            d_prime: dims.d_prime,
            layers: dims.layers,
            seed: self.seed,
            tensors,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut file: CheckpointFile = serde_json::from_str(text)?;
        if file.version != CHECKPOINT_VERSION {
            return Err(QapError::Config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                file.version
            )));
        }
        let dims = ModelDims {
            n: file.n,
            d_h: file.d_h,
            d_prime: file.d_prime,
            layers: file.layers,
        };
        dims.validate()?;
        if file.tensors.len() != TENSOR_NAMES.len() {
            return Err(QapError::Config(format!(
                "checkpoint holds {} tensors, expected {}",
                file.tensors.len(),
                TENSOR_NAMES.len()
            )));
        }
        let mut params = ModelParams::zeros(dims);
        for (name, slot) in TENSOR_NAMES.iter().zip(params.slices_mut()) {
            let rec = file
                .tensors
                .remove(*name)
                .ok_or_else(|| QapError::Config(format!("checkpoint lacks tensor {name}")))?;
            let want = dims.shape_of(name).expect("known tensor");
            if rec.shape != want {
                return Err(QapError::Dimension(format!(
                    "{name} has shape {:?}, dims imply {want:?}",
                    rec.shape
                )));
            }
            if rec.values.len() != slot.len() {
                return Err(QapError::Dimension(format!(
                    "{name} carries {} values for shape {want:?}",
                    rec.values.len()
                )));
            }
            if rec.values.iter().any(|x| !x.is_finite()) {
                return Err(QapError::Config(format!("{name} has non-finite values")));
            }
            slot.copy_from_slice(&rec.values);
        }
        params.validate()?;
        Ok(Self { params, seed: file.seed })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
