//! Run configuration read from flat `key = value` files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys mirror the fields of [`ModelConfig`], [`TrainConfig`] and
//! [`SamplerConfig`]; values set later (for example from command-line
//! flags through [`RunConfig::set`]) override earlier ones.
//!
//! ```
//! use multiplex_embed::config::RunConfig;
//!
//! let mut cfg = RunConfig::parse_str("dim = 16\nepochs = 3 # short run\n", "inline").unwrap();
//! cfg.set("alpha", "0.1").unwrap();
//! assert_eq!(cfg.model.dim, 16);
//! assert_eq!(cfg.train.epochs, 3);
//! assert_eq!(cfg.train.sampler.alpha, 0.1);
//! cfg.validate().unwrap();
//! ```

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

/// Every knob of a `train` run in one place.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_seed: u64,
    pub data: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// Keys accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "dim",
    "attn_dim",
    "hops",
    "epochs",
    "learning_rate",
    "neg_ratio",
    "batch_size",
    "seed",
    "sampling_start_epoch",
    "resample_each_epoch",
    "resample_negatives",
    "similarity_source",
    "loss_reduction",
    "variant",
    "alpha",
    "beta",
    "target_layer",
    "split_seed",
    "data",
    "attributes",
    "labels",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {raw:?}: {e}")))
}

impl RunConfig {
    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        let t = &mut self.train;
        match key {
            "dim" => self.model.dim = value(key, raw)?,
            "attn_dim" => self.model.attn_dim = value(key, raw)?,
            "hops" => self.model.hops = value(key, raw)?,
            "epochs" => t.epochs = value(key, raw)?,
            "learning_rate" => t.learning_rate = value(key, raw)?,
            "neg_ratio" => t.neg_ratio = value(key, raw)?,
            "batch_size" => t.batch_size = value(key, raw)?,
            "seed" => {
                t.seed = value(key, raw)?;
                t.sampler.seed = t.seed;
            }
            "sampling_start_epoch" => t.sampling_start_epoch = value(key, raw)?,
            "resample_each_epoch" => t.resample_each_epoch = value(key, raw)?,
            "resample_negatives" => t.resample_negatives = value(key, raw)?,
            "similarity_source" => t.similarity_source = raw.parse()?,
            "loss_reduction" => t.loss_reduction = raw.parse()?,
            "variant" => t.variant = raw.parse()?,
            "alpha" => t.sampler.alpha = value(key, raw)?,
            "beta" => t.sampler.beta = value(key, raw)?,
            "target_layer" => t.sampler.target_layer = value(key, raw)?,
            "split_seed" => self.split_seed = value(key, raw)?,
            "data" => self.data = Some(raw.into()),
            "attributes" => self.attributes = Some(raw.into()),
            "labels" => self.labels = Some(raw.into()),
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?} (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.into(),
                line: idx + 1,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            self.set(key.trim(), raw).map_err(|e| Error::Parse {
                path: origin.into(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_str(text, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Render as a config file that [`RunConfig::parse_str`] reads back.
    pub fn to_config_string(&self) -> String {
        let t = &self.train;
        let mut out = format!(
            "dim = {}\nattn_dim = {}\nhops = {}\nepochs = {}\nlearning_rate = {}\n\
             neg_ratio = {}\nbatch_size = {}\nseed = {}\nsampling_start_epoch = {}\n\
             resample_each_epoch = {}\nresample_negatives = {}\nsimilarity_source = {}\n\
             loss_reduction = {}\nvariant = {}\nalpha = {}\nbeta = {}\ntarget_layer = {}\n\
             split_seed = {}\n",
            self.model.dim,
            self.model.attn_dim,
            self.model.hops,
            t.epochs,
            t.learning_rate,
            t.neg_ratio,
            t.batch_size,
            t.seed,
            t.sampling_start_epoch,
            t.resample_each_epoch,
            t.resample_negatives,
            t.similarity_source,
            t.loss_reduction,
            t.variant,
            t.sampler.alpha,
            t.sampler.beta,
            t.sampler.target_layer,
            self.split_seed,
        );
        for (key, path) in [
            ("data", &self.data),
            ("attributes", &self.attributes),
            ("labels", &self.labels),
        ] {
            if let Some(p) = path {
                out.push_str(&format!("{key} = {}\n", p.display()));
            }
        }
        out
    }
}
