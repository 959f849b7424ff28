//! Run configuration: flat `section.key = value` text files with `#`
//! comments. Unknown keys are errors so typos never silently fall back to a
//! default.

use std::path::Path;

use thiserror::Error;

use crate::molgraph::AtomAlphabet;
use crate::nn::{Activation, NetworkDims};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key}: {message}")]
    BadValue { key: String, message: String },
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d: usize,
    pub k: usize,
    pub hidden: usize,
    pub layers: usize,
    pub activation: Activation,
    pub omega0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    pub t_max: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub inner_iters: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alphabet: AtomAlphabet,
    pub model: ModelConfig,
    pub diffusion: DiffusionConfig,
    pub train: TrainerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alphabet: AtomAlphabet::qm9(),
            model: ModelConfig {
                d: 7,
                k: 64,
                hidden: 256,
                layers: 8,
                activation: Activation::Sine,
                omega0: 30.0,
            },
            diffusion: DiffusionConfig { t_max: 100, beta_min: 1e-4, beta_max: 0.02 },
            train: TrainerConfig {
                inner_iters: 3,
                inner_lr: 0.1,
                outer_lr: 1e-4,
                batch_size: 256,
                epochs: 500,
                seed: 0,
            },
        }
    }
}

impl RunConfig {
    /// Signal width derived from the alphabet: one slot per element, three
    /// bond slots, one null slot.
    pub fn signal_dim(&self) -> usize {
        self.alphabet.len() + 4
    }

    pub fn network_dims(&self) -> NetworkDims {
        NetworkDims {
            d: self.model.d,
            k: self.model.k,
            hidden: self.model.hidden,
            layers: self.model.layers,
            f: self.signal_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError::Inconsistent(m.to_string()));
        if self.model.d < 1 || self.model.d > 64 {
            return err("model.d must be in 1..=64");
        }
        if self.model.k < 1 || self.model.hidden < 1 || self.model.layers < 1 {
            return err("model.k, model.hidden, model.layers must be >= 1");
        }
        if !(self.model.omega0 > 0.0) {
            return err("model.omega0 must be positive");
        }
        if self.diffusion.t_max < 1 {
            return err("diffusion.T must be >= 1");
        }
        if !(self.diffusion.beta_min > 0.0
            && self.diffusion.beta_min <= self.diffusion.beta_max
            && self.diffusion.beta_max < 1.0)
        {
            return err("diffusion betas must satisfy 0 < beta_min <= beta_max < 1");
        }
        if self.train.inner_iters < 1 {
            return err("train.inner_iters must be >= 1");
        }
        if !(self.train.inner_lr > 0.0) || !(self.train.outer_lr > 0.0) {
            return err("learning rates must be positive");
        }
        if self.train.batch_size < 1 {
            return err("train.batch_size must be >= 1");
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected key = value, got {line:?}"),
        })?;
        apply_key(&mut cfg, key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            message: format!("cannot parse {value:?}"),
        })
    }

    match key {
        "data.alphabet" => {
            cfg.alphabet = AtomAlphabet::parse_spec(value).map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                message: e.to_string(),
            })?;
        }
        "model.d" => cfg.model.d = parse(key, value)?,
        "model.k" => cfg.model.k = parse(key, value)?,
        "model.hidden" => cfg.model.hidden = parse(key, value)?,
        "model.layers" => cfg.model.layers = parse(key, value)?,
        "model.activation" => {
            cfg.model.activation =
                Activation::from_name(value).ok_or_else(|| ConfigError::BadValue {
                    key: key.to_string(),
                    message: format!("expected sine or relu, got {value:?}"),
                })?;
        }
        "model.omega0" => cfg.model.omega0 = parse(key, value)?,
        "diffusion.T" => cfg.diffusion.t_max = parse(key, value)?,
        "diffusion.beta_min" => cfg.diffusion.beta_min = parse(key, value)?,
        "diffusion.beta_max" => cfg.diffusion.beta_max = parse(key, value)?,
        "train.inner_iters" => cfg.train.inner_iters = parse(key, value)?,
        "train.inner_lr" => cfg.train.inner_lr = parse(key, value)?,
        "train.outer_lr" => cfg.train.outer_lr = parse(key, value)?,
        "train.batch_size" => cfg.train.batch_size = parse(key, value)?,
        "train.epochs" => cfg.train.epochs = parse(key, value)?,
        "train.seed" => cfg.train.seed = parse(key, value)?,
        other => return Err(ConfigError::UnknownKey(other.to_string())),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_signal_dim() {
        let cfg = parse_config("model.d = 7\n").unwrap();
        assert_eq!(cfg.signal_dim(), 8);
        assert_eq!(cfg.model.hidden, 256);
        assert_eq!(cfg.train.inner_iters, 3);
        assert_eq!(cfg.train.batch_size, 256);
        assert_eq!(cfg.train.epochs, 500);
        assert_eq!(cfg.diffusion.t_max, 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("hiden_dim = 4\n").unwrap_err();
        assert!(err.to_string().contains("hiden_dim"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let cfg = parse_config("# a comment\n\nmodel.k = 16 # trailing\n").unwrap();
        assert_eq!(cfg.model.k, 16);
    }

    #[test]
    fn full_config_round_trip() {
        let text = "\
data.alphabet = C:4,N:3,O:2,F:1
model.d = 7
model.k = 16
model.hidden = 64
model.layers = 3
model.activation = sine
model.omega0 = 30
diffusion.T = 20
diffusion.beta_min = 0.0001
diffusion.beta_max = 0.02
train.inner_iters = 3
train.inner_lr = 0.1
train.outer_lr = 0.001
train.batch_size = 256
train.epochs = 300
train.seed = 17
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.layers, 3);
        assert_eq!(cfg.diffusion.t_max, 20);
        assert_eq!(cfg.train.seed, 17);
        assert_eq!(cfg.network_dims().f, 8);
    }

    #[test]
    fn cross_field_validation() {
        assert!(parse_config("model.d = 0\n").is_err());
        assert!(parse_config("model.d = 65\n").is_err());
        assert!(parse_config("diffusion.beta_min = 0.5\ndiffusion.beta_max = 0.1\n").is_err());
        assert!(parse_config("train.inner_iters = 0\n").is_err());
        assert!(parse_config("model.activation = gelu\n").is_err());
    }

    #[test]
    fn epochs_zero_is_allowed() {
        let cfg = parse_config("train.epochs = 0\n").unwrap();
        assert_eq!(cfg.train.epochs, 0);
    }
}
