use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Frequency, SplitRatio};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::prompt::{PromptDesign, ValueFormat, ValueScale};
use crate::tensor::AdamWConfig;

/// Where prompt embeddings come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Embedder {
    /// Hash-seeded stand-in computed from the rendered prompts.
    Stub,
    /// Store files in a directory, one per split.
    Store(PathBuf),
}

impl Embedder {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "stub" => Ok(Self::Stub),
            other => match other.strip_prefix("store:") {
                Some(dir) if !dir.is_empty() => Ok(Self::Store(PathBuf::from(dir))),
                _ => Err(Error::Config(format!(
                    "embedder must be 'stub' or 'store:DIR', got '{s}'"
                ))),
            },
        }
    }
}

/// One experiment, read from a flat TOML file.
///
/// `dataset` is either a CSV path (relative paths resolve against the
/// config file's directory) or one of the generators `synthetic:ili`,
/// `synthetic:etth1`, `synthetic:etth2`, `synthetic:ar1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    /// Name used in output file names; defaults to the dataset's own.
    pub name: Option<String>,
    /// Required for CSV datasets.
    pub frequency: Option<String>,
    /// `"train:val:test"`; defaults to the dataset's convention.
    pub split: Option<String>,
    pub drop_missing: bool,
    /// Rows for synthetic generators that take a length.
    pub synthetic_len: usize,
    /// Z-score every split with training statistics before windowing.
    pub standardize: bool,

    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Cap on windows per split, keeping the earliest ones. 0 means no cap.
    pub max_windows: usize,

    pub design: String,
    pub prompt_decimals: usize,
    pub raw_prompt_values: bool,
    pub embedder: String,

    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub layers_ts: usize,
    pub layers_prompt: usize,
    pub layers_dec: usize,
    pub heads: usize,
    pub ffn_ratio: usize,
    pub lambda: f32,
    pub causal_decoder: bool,
    pub prompt_projection: bool,
    pub use_prompt_branch: bool,

    pub lr: f32,
    pub weight_decay: f32,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            dataset: "synthetic:ili".into(),
            name: None,
            frequency: None,
            split: None,
            drop_missing: false,
            synthetic_len: 4000,
            standardize: true,
            lookback: m.lookback,
            horizon: m.horizon,
            stride: 1,
            max_windows: 0,
            design: "P5".into(),
            prompt_decimals: 2,
            raw_prompt_values: false,
            embedder: "stub".into(),
            hidden_dim: m.hidden_dim,
            embed_dim: m.embed_dim,
            layers_ts: m.layers_ts,
            layers_prompt: m.layers_prompt,
            layers_dec: m.layers_dec,
            heads: m.heads,
            ffn_ratio: m.ffn_ratio,
            lambda: m.lambda,
            causal_decoder: m.causal_decoder,
            prompt_projection: m.prompt_projection,
            use_prompt_branch: m.use_prompt_branch,
            lr: 1e-4,
            weight_decay: 0.0,
            epochs: 50,
            patience: 10,
            batch_size: 16,
            seed: 2024,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves relative dataset and store paths
    /// against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if !cfg.dataset.starts_with("synthetic:") && Path::new(&cfg.dataset).is_relative() {
            cfg.dataset = base.join(&cfg.dataset).to_string_lossy().into_owned();
        }
        if let Embedder::Store(dir) = cfg.embedder()? {
            if dir.is_relative() {
                cfg.embedder = format!("store:{}", base.join(dir).display());
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form; embedded in every output.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn design(&self) -> Result<PromptDesign> {
        self.design.parse()
    }

    pub fn embedder(&self) -> Result<Embedder> {
        Embedder::parse(&self.embedder)
    }

    pub fn value_format(&self) -> ValueFormat {
        ValueFormat {
            decimals: self.prompt_decimals,
            scale: if self.raw_prompt_values {
                ValueScale::Raw
            } else {
                ValueScale::Normalized
            },
        }
    }

    pub fn frequency(&self) -> Result<Option<Frequency>> {
        self.frequency.as_deref().map(str::parse).transpose()
    }

    pub fn split_ratio(&self) -> Result<Option<SplitRatio>> {
        self.split.as_deref().map(str::parse).transpose()
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }

    pub fn model_config(&self, num_variables: usize) -> ModelConfig {
        ModelConfig {
            num_variables,
            lookback: self.lookback,
            horizon: self.horizon,
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            layers_ts: self.layers_ts,
            layers_prompt: self.layers_prompt,
            layers_dec: self.layers_dec,
            heads: self.heads,
            ffn_ratio: self.ffn_ratio,
            lambda: self.lambda,
            causal_decoder: self.causal_decoder,
            prompt_projection: self.prompt_projection,
            use_prompt_branch: self.use_prompt_branch,
        }
    }

    /// Field-level checks plus existence of every referenced path.
    pub fn validate(&self) -> Result<()> {
        self.design()?;
        self.frequency()?;
        self.split_ratio()?;
        self.model_config(1).validate()?;
        if self.layers_ts == 0
            || self.layers_dec == 0
            || (self.use_prompt_branch && self.layers_prompt == 0)
        {
            return Err(Error::Config("layer counts must be at least 1".into()));
        }
        if self.stride == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "stride, batch_size and epochs must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !self.dataset.starts_with("synthetic:") {
            if !Path::new(&self.dataset).is_file() {
                return Err(Error::Config(format!(
                    "dataset file {} does not exist",
                    self.dataset
                )));
            }
            if self.frequency.is_none() {
                return Err(Error::Config("CSV datasets need a 'frequency'".into()));
            }
        }
        if let Embedder::Store(dir) = self.embedder()? {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "store directory {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_toml_overrides_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "lookback = 36\nhorizon = 24\ndesign = \"P3\"\nembedder = \"store:emb\"\n",
        )
        .unwrap();
        assert_eq!((cfg.lookback, cfg.horizon), (36, 24));
        assert_eq!(cfg.design().unwrap(), PromptDesign::P3);
        assert_eq!(cfg.embedder().unwrap(), Embedder::Store("emb".into()));
        assert_eq!(cfg.epochs, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("lookbak = 3\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            name: Some("x".into()),
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
