//! Epoch loop: refresh the margin table from the parameters as they stand at
//! the start of each epoch, then run sampled batches through
//! forward, loss, backward and an SGD update.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::embedder::{backward, EmbedderParams, Embedding, GradientAccumulator};
use crate::error::{Error, Result};
use crate::margins::{build_with_mode, MarginConfig, MarginMode, MarginTable};
use crate::pairloss::{loss_and_grad, LossReport, PairSet};
use crate::sampler::{draw_batch, SamplerConfig};
use crate::seed;
use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: MarginConfig,
    pub margin_mode: MarginMode,
    pub sampler: SamplerConfig,
    pub hidden_dims: Vec<usize>,
    pub embedding_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
    /// Checkpoint every N epochs; the final epoch is always checkpointed.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: MarginConfig::default(),
            margin_mode: MarginMode::Adaptive,
            sampler: SamplerConfig::default(),
            hidden_dims: vec![64],
            embedding_dim: 32,
            lr: 0.01,
            epochs: 10,
            steps_per_epoch: 10,
            seed: 0,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.margin.validate()?;
        self.sampler.validate()?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::BadTrainConfig(format!(
                "lr must be non-negative, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::BadTrainConfig(
                "epochs and steps_per_epoch must be >= 1".into(),
            ));
        }
        if self.embedding_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::BadTrainConfig("layer sizes must be positive".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::BadTrainConfig("checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden_dims.iter().copied())
            .chain(std::iter::once(self.embedding_dim))
            .collect()
    }

    /// Margin config with the subsample stream tied to the training seed.
    pub fn seeded_margin(&self) -> MarginConfig {
        MarginConfig {
            subsample_seed: seed::derive(self.seed, &[2]),
            ..self.margin.clone()
        }
    }

    /// Sampler config with its stream tied to the training seed.
    pub fn seeded_sampler(&self) -> SamplerConfig {
        SamplerConfig {
            seed: seed::derive(self.seed, &[1]),
            ..self.sampler.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: EmbedderParams,
    pub margin_table: MarginTable,
    /// Current 1-based epoch.
    pub epoch: usize,
    /// Completed steps across all epochs.
    pub step: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    /// Step within the epoch, from 0.
    pub step: usize,
    pub report: LossReport,
}

impl StepRecord {
    /// Tab-separated log line: epoch, step, total, positive term, negative
    /// term, active negatives.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.epoch,
            self.step,
            self.report.total,
            self.report.positive_term,
            self.report.negative_term,
            self.report.active_negatives
        )
    }

    pub const LOG_HEADER: &'static str = "epoch\tstep\ttotal\tpositive\tnegative\tactive_negatives";
}

/// Hooks called by [`train_with`].
pub trait TrainObserver {
    fn on_step(&mut self, _record: &StepRecord) -> Result<()> {
        Ok(())
    }
    fn on_margin_table(&mut self, _table: &MarginTable) -> Result<()> {
        Ok(())
    }
    /// Called after the epochs selected by `checkpoint_every` and after the
    /// final epoch.
    fn on_checkpoint(&mut self, _state: &TrainState) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Embeddings of every record, in record order.
pub fn embed_dataset(params: &EmbedderParams, data: &Dataset) -> Result<Vec<Embedding>> {
    data.records
        .iter()
        .map(|r| params.embed(&r.features).map_err(|e| attach_sample(e, &r.id)))
        .collect()
}

/// Embeddings grouped by leaf class, record order kept within a class.
pub fn embed_all(params: &EmbedderParams, data: &Dataset) -> Result<HashMap<NodeId, Vec<Embedding>>> {
    let mut out: HashMap<NodeId, Vec<Embedding>> = HashMap::new();
    for (e, leaf) in embed_dataset(params, data)?.into_iter().zip(&data.leaves) {
        out.entry(*leaf).or_default().push(e);
    }
    Ok(out)
}

fn attach_sample(e: Error, id: &str) -> Error {
    match e {
        Error::ZeroPreNormVector { norm, .. } => Error::ZeroPreNormVector {
            norm,
            sample: Some(id.to_string()),
        },
        other => other,
    }
}

/// Loss and summed parameter gradient of one batch (dataset indices plus
/// their leaf classes) under a fixed margin table.
pub fn batch_gradient(
    params: &EmbedderParams,
    data: &Dataset,
    samples: &[usize],
    leaves: &[NodeId],
    table: &MarginTable,
) -> Result<(LossReport, GradientAccumulator)> {
    let caches = samples
        .iter()
        .map(|&k| {
            let r = &data.records[k];
            params.forward(&r.features).map_err(|e| attach_sample(e, &r.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let embs: Vec<Embedding> = caches.iter().map(|c| c.embedding().clone()).collect();
    let pairs = PairSet::enumerate(leaves, table)?;
    let (report, grads) = loss_and_grad(&pairs, &embs);
    let mut acc = GradientAccumulator::zeros_like(params);
    for (cache, g) in caches.iter().zip(&grads) {
        backward(params, cache, g, &mut acc)?;
    }
    Ok((report, acc))
}

pub fn build_epoch_table(
    params: &EmbedderParams,
    data: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<MarginTable> {
    let margin = cfg.seeded_margin();
    if epoch <= 1 {
        build_with_mode(taxonomy, &margin, cfg.margin_mode, epoch, None)
    } else {
        let embs = embed_all(params, data)?;
        build_with_mode(taxonomy, &margin, cfg.margin_mode, epoch, Some(&embs))
    }
}

pub fn train(data: &Dataset, taxonomy: &Taxonomy, cfg: &TrainConfig) -> Result<TrainState> {
    train_with(data, taxonomy, cfg, &mut ())
}

pub fn train_with(
    data: &Dataset,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for leaf in &data.leaves {
        if !taxonomy.is_leaf(*leaf) {
            return Err(Error::UnknownClass(leaf.0));
        }
    }
    let params = EmbedderParams::init(&cfg.layer_dims(data.feature_dim), cfg.seed)?;
    let index = data.index_by_class();
    let sampler = cfg.seeded_sampler();

    let mut state = TrainState {
        margin_table: build_epoch_table(&params, data, taxonomy, cfg, 1)?,
        params,
        epoch: 1,
        step: 0,
        loss_history: Vec::with_capacity(cfg.epochs * cfg.steps_per_epoch),
    };

    for epoch in 1..=cfg.epochs {
        if epoch > 1 {
            state.margin_table = build_epoch_table(&state.params, data, taxonomy, cfg, epoch)?;
        }
        state.epoch = epoch;
        observer.on_margin_table(&state.margin_table)?;

        for step in 0..cfg.steps_per_epoch {
            let plan = draw_batch(&index, &state.margin_table, &sampler, epoch, step)?;
            let (report, grad) = batch_gradient(
                &state.params,
                data,
                &plan.samples,
                &plan.leaves,
                &state.margin_table,
            )?;
            if !report.total.is_finite() {
                return Err(Error::DivergedLoss { epoch, step });
            }
            state.params.sgd_step(&grad, cfg.lr);
            state.step += 1;
            state.loss_history.push(report.total);
            observer.on_step(&StepRecord { epoch, step, report })?;
        }

        let due = cfg.checkpoint_every.is_some_and(|n| epoch % n == 0);
        if due || epoch == cfg.epochs {
            observer.on_checkpoint(&state)?;
        }
    }
    Ok(state)
}
