//! Checkpoint persistence: one JSON document holding a header (format
//! version, dims, activation, alphabet, schedule and trainer settings, seed)
//! and flat 64-bit float arrays per layer in declaration order.
//!
//! Floats are serialized as shortest-round-trip decimals, so finite values
//! survive save/load bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{DiffusionConfig, RunConfig, TrainerConfig};
use crate::molgraph::AtomAlphabet;
use crate::nn::{Activation, ConditionalInr, DenseLayer, NetworkDims};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("unsupported format version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphabetSpec {
    pub symbols: Vec<String>,
    pub valences: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub t_max: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerSpec {
    pub inner_iters: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkParams {
    pub synthesis: Vec<LayerParams>,
    pub modulation: Vec<LayerParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub dims: NetworkDims,
    pub activation: String,
    pub omega0: f64,
    pub alphabet: AlphabetSpec,
    pub schedule: ScheduleSpec,
    pub trainer: TrainerSpec,
    pub seed: u64,
    pub denoiser: NetworkParams,
    pub latent_model: NetworkParams,
}

fn layer_to_params(layer: &DenseLayer) -> LayerParams {
    LayerParams {
        in_dim: layer.in_dim,
        out_dim: layer.out_dim,
        weights: layer.weights.clone(),
        biases: layer.biases.clone(),
    }
}

fn net_to_params(net: &ConditionalInr) -> NetworkParams {
    NetworkParams {
        synthesis: net.synthesis.iter().map(layer_to_params).collect(),
        modulation: net.modulation.iter().map(layer_to_params).collect(),
    }
}

impl Checkpoint {
    pub fn from_networks(cfg: &RunConfig, denoiser: &ConditionalInr, latent: &ConditionalInr) -> Self {
        let alphabet = AlphabetSpec {
            symbols: (0..cfg.alphabet.len()).map(|i| cfg.alphabet.symbol(i).to_string()).collect(),
            valences: (0..cfg.alphabet.len()).map(|i| cfg.alphabet.valence(i)).collect(),
        };
        Checkpoint {
            format_version: FORMAT_VERSION,
            dims: cfg.network_dims(),
            activation: cfg.model.activation.name().to_string(),
            omega0: cfg.model.omega0,
            alphabet,
            schedule: ScheduleSpec {
                t_max: cfg.diffusion.t_max,
                beta_min: cfg.diffusion.beta_min,
                beta_max: cfg.diffusion.beta_max,
            },
            trainer: TrainerSpec {
                inner_iters: cfg.train.inner_iters,
                inner_lr: cfg.train.inner_lr,
                outer_lr: cfg.train.outer_lr,
                batch_size: cfg.train.batch_size,
                epochs: cfg.train.epochs,
            },
            seed: cfg.train.seed,
            denoiser: net_to_params(denoiser),
            latent_model: net_to_params(latent),
        }
    }

    pub fn alphabet(&self) -> Result<AtomAlphabet, CheckpointError> {
        let pairs = self
            .alphabet
            .symbols
            .iter()
            .cloned()
            .zip(self.alphabet.valences.iter().copied())
            .collect();
        AtomAlphabet::new(pairs).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    pub fn activation_kind(&self) -> Result<Activation, CheckpointError> {
        Activation::from_name(&self.activation)
            .ok_or_else(|| CheckpointError::Malformed(format!("unknown activation {:?}", self.activation)))
    }

    fn build_network(&self, params: &NetworkParams) -> Result<ConditionalInr, CheckpointError> {
        let activation = self.activation_kind()?;
        let expect_layers = self.dims.layers;
        if params.synthesis.len() != expect_layers + 1 || params.modulation.len() != expect_layers {
            return Err(CheckpointError::Malformed("layer count does not match dims".into()));
        }
        let to_layer = |p: &LayerParams| -> Result<DenseLayer, CheckpointError> {
            if p.weights.len() != p.in_dim * p.out_dim || p.biases.len() != p.out_dim {
                return Err(CheckpointError::Malformed("tensor sizes do not match layer dims".into()));
            }
            if p.weights.iter().chain(&p.biases).any(|x| !x.is_finite()) {
                return Err(CheckpointError::Malformed("non-finite parameter".into()));
            }
            Ok(DenseLayer {
                in_dim: p.in_dim,
                out_dim: p.out_dim,
                weights: p.weights.clone(),
                biases: p.biases.clone(),
            })
        };
        Ok(ConditionalInr {
            dims: self.dims,
            activation,
            omega0: self.omega0,
            synthesis: params.synthesis.iter().map(&to_layer).collect::<Result<_, _>>()?,
            modulation: params.modulation.iter().map(&to_layer).collect::<Result<_, _>>()?,
        })
    }

    pub fn denoiser_network(&self) -> Result<ConditionalInr, CheckpointError> {
        self.build_network(&self.denoiser)
    }

    pub fn latent_network(&self) -> Result<ConditionalInr, CheckpointError> {
        self.build_network(&self.latent_model)
    }

    pub fn diffusion_config(&self) -> DiffusionConfig {
        DiffusionConfig {
            t_max: self.schedule.t_max,
            beta_min: self.schedule.beta_min,
            beta_max: self.schedule.beta_max,
        }
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            inner_iters: self.trainer.inner_iters,
            inner_lr: self.trainer.inner_lr,
            outer_lr: self.trainer.outer_lr,
            batch_size: self.trainer.batch_size,
            epochs: self.trainer.epochs,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(ckpt.format_version));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Checkpoint::from_json(&text)
    }
}
