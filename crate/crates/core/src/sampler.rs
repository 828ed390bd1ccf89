//! Mini-batch planning: `S'` seed classes, each grouped with its `M' - 1`
//! visually nearest classes, `t'` samples per class.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::MarginTable;
use crate::seed;
use crate::taxonomy::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Seed classes per batch.
    pub s_prime: usize,
    /// Classes per group, seed included.
    pub m_prime: usize,
    /// Samples per class.
    pub t_prime: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            s_prime: 3,
            m_prime: 2,
            t_prime: 4,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn batch_size(&self) -> usize {
        self.s_prime * self.m_prime * self.t_prime
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_prime == 0 || self.m_prime == 0 || self.t_prime == 0 {
            return Err(Error::BadSamplerConfig(
                "s_prime, m_prime and t_prime must be >= 1".into(),
            ));
        }
        if self.batch_size() < 2 {
            return Err(Error::BadSamplerConfig(format!(
                "batch size {} must be at least 2",
                self.batch_size()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGroup {
    pub seed: NodeId,
    /// `M'` distinct classes, seed first.
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub groups: Vec<ClassGroup>,
    /// Dataset sample indices, group by group and class by class.
    pub samples: Vec<usize>,
    /// Leaf class of each entry of `samples`.
    pub leaves: Vec<NodeId>,
}

/// Ranks every other class by visual similarity to the class at `seed_idx`,
/// nearest first. Pairs outside the visual height cutoff carry no visual
/// measurement and rank after all measured pairs. Ties go to the lower class
/// index.
pub fn rank_neighbours(table: &MarginTable, seed_idx: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..table.len()).filter(|&j| j != seed_idx).collect();
    others.sort_by(|&a, &b| {
        let ka = (!table.visual_eligible(seed_idx, a), table.visual.get(seed_idx, a));
        let kb = (!table.visual_eligible(seed_idx, b), table.visual.get(seed_idx, b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.cmp(&b))
    });
    others
}

/// Plans one batch. Deterministic in `(cfg.seed, epoch, step)`.
///
/// At epoch 1 the visual matrix is all zero, so neighbours are drawn
/// uniformly instead of ranked.
pub fn draw_batch(
    index_by_class: &HashMap<NodeId, Vec<usize>>,
    table: &MarginTable,
    cfg: &SamplerConfig,
    epoch: usize,
    step: usize,
) -> Result<BatchPlan> {
    cfg.validate()?;
    let n = table.len();
    let needed = cfg.m_prime.max(cfg.s_prime);
    if n < needed {
        return Err(Error::TooFewClasses { available: n, needed });
    }
    let members_of = |c: NodeId| -> Result<&Vec<usize>> {
        match index_by_class.get(&c) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::EmptyLeaf(format!("{c}"))),
        }
    };

    let mut rng = seed::rng(cfg.seed, &[epoch as u64, step as u64]);
    let seeds = index::sample(&mut rng, n, cfg.s_prime).into_vec();

    let mut groups = Vec::with_capacity(cfg.s_prime);
    let mut samples = Vec::with_capacity(cfg.batch_size());
    let mut leaves = Vec::with_capacity(cfg.batch_size());
    for &s in &seeds {
        let neighbours: Vec<usize> = if epoch <= 1 {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != s).collect();
            others.shuffle(&mut rng);
            others.truncate(cfg.m_prime - 1);
            others
        } else {
            let mut ranked = rank_neighbours(table, s);
            ranked.truncate(cfg.m_prime - 1);
            ranked
        };
        let members: Vec<NodeId> = std::iter::once(s)
            .chain(neighbours)
            .map(|i| table.classes[i])
            .collect();
        for &c in &members {
            let pool = members_of(c)?;
            if pool.len() < cfg.t_prime {
                for _ in 0..cfg.t_prime {
                    samples.push(pool[rng.random_range(0..pool.len())]);
                }
            } else {
                for k in index::sample(&mut rng, pool.len(), cfg.t_prime) {
                    samples.push(pool[k]);
                }
            }
            leaves.extend(std::iter::repeat_n(c, cfg.t_prime));
        }
        groups.push(ClassGroup {
            seed: table.classes[s],
            members,
        });
    }
    Ok(BatchPlan {
        groups,
        samples,
        leaves,
    })
}
