//! Per-class-pair margins: semantic margin from taxonomy dissimilarity, visual
//! similarity from current embeddings, and their combination.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::embedder::Embedding;
use crate::error::{Error, Result};
use crate::seed;
use crate::taxonomy::{NodeId, Taxonomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginConfig {
    /// Scale applied to the taxonomy dissimilarity. Must be positive.
    pub gamma: f64,
    pub beta: f64,
    /// Weight of the visual term.
    pub alpha: f64,
    /// The visual term applies to a class pair iff `height(lcs) <= visual_height_cutoff`.
    pub visual_height_cutoff: usize,
    /// Maximum cross pairs averaged per class pair; larger pair sets are
    /// subsampled uniformly.
    pub visual_pair_cap: Option<usize>,
    pub subsample_seed: u64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            gamma: 1.0,
            beta: 0.0,
            alpha: 0.1,
            visual_height_cutoff: 2,
            visual_pair_cap: None,
            subsample_seed: 0,
        }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::BadMarginConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::BadMarginConfig(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::BadMarginConfig("beta must be finite".into()));
        }
        if self.visual_pair_cap == Some(0) {
            return Err(Error::BadMarginConfig(
                "visual_pair_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The smallest semantic margin on `t` must stay positive.
    fn validate_for(&self, t: &Taxonomy) -> Result<()> {
        self.validate()?;
        let h = t.tree_height().max(1) as f64;
        if self.gamma / h + self.beta <= 0.0 {
            return Err(Error::BadMarginConfig(format!(
                "gamma / tree_height + beta = {} must be positive",
                self.gamma / h + self.beta
            )));
        }
        Ok(())
    }
}

/// `gamma * dissimilarity(u, v) + beta`.
pub fn semantic_margin(t: &Taxonomy, cfg: &MarginConfig, u: NodeId, v: NodeId) -> Result<f64> {
    Ok(cfg.gamma * t.dissimilarity(u, v)? + cfg.beta)
}

/// Mean Euclidean distance over all cross pairs of two classes. When `cap`
/// is below `a.len() * b.len()`, exactly `cap` pairs are drawn without
/// replacement from a stream seeded by `seed`.
pub fn visual_similarity(a: &[Embedding], b: &[Embedding], cap: Option<usize>, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyClass);
    }
    let total = a.len() * b.len();
    match cap {
        Some(cap) if cap < total => {
            let mut rng = seed::rng(seed, &[]);
            let mut picks = index::sample(&mut rng, total, cap).into_vec();
            picks.sort_unstable();
            let sum: f64 = picks
                .iter()
                .map(|&p| a[p / b.len()].distance(&b[p % b.len()]))
                .sum();
            Ok(sum / cap as f64)
        }
        _ => {
            let sum: f64 = a.iter().flat_map(|x| b.iter().map(move |y| x.distance(y))).sum();
            Ok(sum / total as f64)
        }
    }
}

/// Dense symmetric matrix indexed by class position.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Off-diagonal entries with `i < j`.
    pub fn upper(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| self.get(i, j)))
    }
}

/// Margins for every pair of leaf classes, stamped with the epoch they were
/// built for. Diagonals are unused and hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTable {
    pub classes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    pub semantic: SymMatrix,
    pub visual: SymMatrix,
    pub combined: SymMatrix,
    /// Whether the pair's LCS is low enough for the visual term.
    eligible: Vec<bool>,
    pub epoch: usize,
}

impl MarginTable {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_index(&self, leaf: NodeId) -> Option<usize> {
        self.index.get(&leaf).copied()
    }

    pub fn visual_eligible(&self, i: usize, j: usize) -> bool {
        self.eligible[i * self.classes.len() + j]
    }

    /// Combined margin for two distinct leaf classes.
    pub fn margin(&self, u: NodeId, v: NodeId) -> Result<f64> {
        let i = self.class_index(u).ok_or(Error::UnknownClass(u.0))?;
        let j = self.class_index(v).ok_or(Error::UnknownClass(v.0))?;
        if i == j {
            return Err(Error::SameClass(u.0));
        }
        Ok(self.combined.get(i, j))
    }

    /// Mean of the off-diagonal semantic margins.
    pub fn mean_semantic(&self) -> f64 {
        let n = self.classes.len();
        if n < 2 {
            return 0.0;
        }
        self.semantic.upper().sum::<f64>() / (n * (n - 1) / 2) as f64
    }
}

/// How negative-pair margins are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MarginMode {
    /// Semantic margin plus weighted visual similarity.
    Adaptive,
    /// One constant margin for every class pair. Visual similarities are
    /// still computed so that neighbour sampling behaves identically.
    Fixed(f64),
}

/// Builds the adaptive margin table for `epoch` (1-based). Epoch 1 uses a
/// zero visual term; later epochs need the current embeddings of every class.
pub fn build_margin_table(
    t: &Taxonomy,
    cfg: &MarginConfig,
    epoch: usize,
    embeddings: Option<&HashMap<NodeId, Vec<Embedding>>>,
) -> Result<MarginTable> {
    build_with_mode(t, cfg, MarginMode::Adaptive, epoch, embeddings)
}

pub fn build_with_mode(
    t: &Taxonomy,
    cfg: &MarginConfig,
    mode: MarginMode,
    epoch: usize,
    embeddings: Option<&HashMap<NodeId, Vec<Embedding>>>,
) -> Result<MarginTable> {
    cfg.validate_for(t)?;
    if epoch == 0 {
        return Err(Error::BadMarginConfig("epochs are numbered from 1".into()));
    }
    if let MarginMode::Fixed(m) = mode {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::BadMarginConfig(format!(
                "fixed margin must be positive, got {m}"
            )));
        }
    }
    let embeddings = match (epoch, embeddings) {
        (1, _) => None,
        (_, Some(e)) => Some(e),
        (_, None) => return Err(Error::MissingEmbeddings { epoch, class: None }),
    };

    let classes = t.leaves();
    let n = classes.len();
    let index: HashMap<NodeId, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut semantic = SymMatrix::zeros(n);
    let mut visual = SymMatrix::zeros(n);
    let mut combined = SymMatrix::zeros(n);
    let mut eligible = vec![false; n * n];

    let lookup = |c: NodeId| -> Result<&[Embedding]> {
        let e = embeddings.expect("checked above");
        e.get(&c)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingEmbeddings {
                epoch,
                class: Some(t.path_name(c)),
            })
    };

    for i in 0..n {
        for j in i + 1..n {
            let (u, v) = (classes[i], classes[j]);
            let ok = t.height(t.lcs(u, v)?) <= cfg.visual_height_cutoff;
            eligible[i * n + j] = ok;
            eligible[j * n + i] = ok;

            let s = match (embeddings, ok) {
                (Some(_), true) => {
                    let pair_seed = seed::derive(cfg.subsample_seed, &[epoch as u64, i as u64, j as u64]);
                    visual_similarity(lookup(u)?, lookup(v)?, cfg.visual_pair_cap, pair_seed)?
                }
                _ => 0.0,
            };
            let (m, total) = match mode {
                MarginMode::Adaptive => {
                    let m = semantic_margin(t, cfg, u, v)?;
                    (m, m + cfg.alpha * s)
                }
                MarginMode::Fixed(m) => (m, m),
            };
            semantic.set(i, j, m);
            visual.set(i, j, s);
            combined.set(i, j, total);
        }
    }

    Ok(MarginTable {
        classes,
        index,
        semantic,
        visual,
        combined,
        eligible,
        epoch,
    })
}
