//! Flat `key = value` training configuration.
//!
//! ```text
//! gamma = 1.0
//! alpha = 0.1
//! s_prime = 3
//! hidden_dims = [64]
//! fixed_margin = 0.8   # omit for adaptive margins
//! ```
//!
//! Every key is optional; missing keys keep the [`TrainConfig`] defaults.
//! Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::margins::MarginMode;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub visual_height_cutoff: Option<usize>,
    pub visual_pair_cap: Option<usize>,
    pub fixed_margin: Option<f64>,
    pub s_prime: Option<usize>,
    pub m_prime: Option<usize>,
    pub t_prime: Option<usize>,
    pub hidden_dims: Option<Vec<usize>>,
    pub embedding_dim: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub steps_per_epoch: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoint_every: Option<usize>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Values set in `other` win.
    pub fn overlay(self, other: FlatConfig) -> FlatConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FlatConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            gamma,
            beta,
            alpha,
            visual_height_cutoff,
            visual_pair_cap,
            fixed_margin,
            s_prime,
            m_prime,
            t_prime,
            hidden_dims,
            embedding_dim,
            lr,
            epochs,
            steps_per_epoch,
            seed,
            checkpoint_every
        )
    }

    pub fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($f:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$f.clone() { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            gamma => margin.gamma,
            beta => margin.beta,
            alpha => margin.alpha,
            visual_height_cutoff => margin.visual_height_cutoff,
            s_prime => sampler.s_prime,
            m_prime => sampler.m_prime,
            t_prime => sampler.t_prime,
            hidden_dims => hidden_dims,
            embedding_dim => embedding_dim,
            lr => lr,
            epochs => epochs,
            steps_per_epoch => steps_per_epoch,
            seed => seed,
        );
        if self.visual_pair_cap.is_some() {
            cfg.margin.visual_pair_cap = self.visual_pair_cap;
        }
        if self.checkpoint_every.is_some() {
            cfg.checkpoint_every = self.checkpoint_every;
        }
        if let Some(m) = self.fixed_margin {
            cfg.margin_mode = MarginMode::Fixed(m);
        }
        cfg
    }

    pub fn to_train_config(&self) -> Result<TrainConfig> {
        let cfg = self.apply(TrainConfig::default());
        cfg.validate()?;
        Ok(cfg)
    }
}
