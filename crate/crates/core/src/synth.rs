//! Hierarchical Gaussian cluster generator.
//!
//! Every node of a complete tree gets a mean equal to its parent's mean plus
//! a Gaussian offset whose scale depends on the node's level. Samples scatter
//! around their leaf mean with `noise_scale`. With decreasing level scales,
//! classes that share deeper ancestors sit closer in feature space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Children per node at each level, root-first.
    pub branching: Vec<usize>,
    pub samples_per_leaf: usize,
    pub feature_dim: usize,
    /// Offset scale per level, same length as `branching`.
    pub level_scales: Vec<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadSyntheticSpec(m.to_string()));
        if self.branching.is_empty() || self.branching.contains(&0) {
            return bad("branching must be a non-empty list of positive counts");
        }
        if self.level_scales.len() != self.branching.len() {
            return bad("level_scales must have one entry per branching level");
        }
        if !self.level_scales.iter().all(|s| s.is_finite() && *s > 0.0) {
            return bad("level_scales must be positive");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("noise_scale must be non-negative");
        }
        if self.samples_per_leaf == 0 || self.feature_dim == 0 {
            return bad("samples_per_leaf and feature_dim must be positive");
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.branching.iter().product()
    }
}

/// Generates records leaf by leaf in depth-first order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Record>> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed, &[]);
    let mut records = Vec::with_capacity(spec.leaf_count() * spec.samples_per_leaf);
    let root = vec![0.0; spec.feature_dim];
    descend(spec, &mut rng, 0, &root, &mut Vec::new(), &mut records);
    Ok(records)
}

fn descend(
    spec: &SyntheticSpec,
    rng: &mut impl Rng,
    level: usize,
    mean: &[f64],
    labels: &mut Vec<String>,
    out: &mut Vec<Record>,
) {
    if level == spec.branching.len() {
        let leaf_name = labels.join("/");
        for k in 0..spec.samples_per_leaf {
            let features = mean
                .iter()
                .map(|m| m + spec.noise_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            out.push(Record {
                id: format!("{leaf_name}#{k}"),
                labels: labels.clone(),
                features,
            });
        }
        return;
    }
    let scale = spec.level_scales[level];
    for c in 0..spec.branching[level] {
        let child: Vec<f64> = mean
            .iter()
            .map(|m| m + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let name = match labels.last() {
            Some(parent) => format!("{parent}.{c}"),
            None => format!("n{c}"),
        };
        labels.push(name);
        descend(spec, rng, level + 1, &child, labels, out);
        labels.pop();
    }
}
