//! JSON checkpoint records.
//!
//! An MLP record serializes its fields in this order: `version`,
//! `layer_sizes`, `activation`, `weights` (one row-major array per layer),
//! `biases`, `spectral_norm_mask`, `spectral_vectors` (`null` for unmasked
//! layers), `power_iterations`, `adam` (optional optimizer state). Reals are
//! written in shortest round-trip form, so reading a record back reproduces
//! every `f64` bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::matrix::Matrix;
use super::mlp::{Activation, Mlp, MlpParams};
use super::spectral::{PowerVectors, SpectralNormState};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpCheckpoint {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub spectral_norm_mask: Vec<bool>,
    pub spectral_vectors: Vec<Option<PowerVectors>>,
    pub power_iterations: usize,
    pub adam: Option<AdamState>,
}

impl MlpCheckpoint {
    pub fn from_mlp(net: &Mlp, adam: Option<&AdamState>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            layer_sizes: net.params.layer_sizes.clone(),
            activation: net.params.activation,
            weights: net.params.weights.iter().map(|w| w.data().to_vec()).collect(),
            biases: net.params.biases.clone(),
            spectral_norm_mask: net.params.spectral_norm_mask.clone(),
            spectral_vectors: net.spectral.layers.clone(),
            power_iterations: net.spectral.power_iterations,
            adam: adam.cloned(),
        }
    }

    /// Record for bare parameters of a network without spectral-norm layers.
    pub fn from_params(params: &MlpParams) -> Result<Self> {
        if params.spectral_norm_mask.iter().any(|&on| on) {
            return Err(Error::argument("spectral-norm layers need their power vectors"));
        }
        Ok(Self {
            version: CHECKPOINT_VERSION,
            layer_sizes: params.layer_sizes.clone(),
            activation: params.activation,
            weights: params.weights.iter().map(|w| w.data().to_vec()).collect(),
            biases: params.biases.clone(),
            spectral_norm_mask: params.spectral_norm_mask.clone(),
            spectral_vectors: vec![None; params.n_layers()],
            power_iterations: 1,
            adam: None,
        })
    }

    pub fn into_mlp(self) -> Result<(Mlp, Option<AdamState>)> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.layer_sizes.len() < 2 || self.weights.len() != self.layer_sizes.len() - 1 {
            return Err(Error::Format("checkpoint layer count does not match layer_sizes".into()));
        }
        let weights = self
            .weights
            .into_iter()
            .zip(self.layer_sizes.windows(2))
            .map(|(data, dims)| Matrix::from_vec(dims[1], dims[0], data))
            .collect::<Result<Vec<_>>>()?;
        let params = MlpParams {
            layer_sizes: self.layer_sizes,
            weights,
            biases: self.biases,
            activation: self.activation,
            spectral_norm_mask: self.spectral_norm_mask,
        };
        params.validate()?;
        if self.spectral_vectors.len() != params.n_layers() {
            return Err(Error::Format("spectral vector count does not match layer count".into()));
        }
        for (i, (pv, &on)) in self.spectral_vectors.iter().zip(&params.spectral_norm_mask).enumerate() {
            match (pv, on) {
                (Some(pv), true) => {
                    let w = &params.weights[i];
                    if pv.left.len() != w.rows() || pv.right.len() != w.cols() {
                        return Err(Error::Format(format!("layer {i} power vectors have wrong length")));
                    }
                }
                (None, false) => {}
                _ => return Err(Error::Format(format!("layer {i} spectral vectors disagree with mask"))),
            }
        }
        if let Some(adam) = &self.adam {
            if adam.first_moment.len() != params.num_params() || adam.second_moment.len() != params.num_params() {
                return Err(Error::Format("Adam moments do not match parameter count".into()));
            }
        }
        let spectral = SpectralNormState {
            layers: self.spectral_vectors,
            power_iterations: self.power_iterations,
        };
        Ok((Mlp { params, spectral }, self.adam))
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}
