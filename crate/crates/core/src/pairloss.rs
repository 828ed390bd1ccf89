//! Contrastive loss over all within-batch pairs with per-class-pair margins.
//!
//! `L = sum_pos D(f_i, f_j) + sum_neg max(0, M_ij - D(f_i, f_j))` with `D` the
//! plain (unsquared) Euclidean distance. No normalization by pair count.

use crate::embedder::{euclidean, Embedding};
use crate::error::{Error, Result};
use crate::margins::MarginTable;
use crate::taxonomy::NodeId;

/// Distances below this contribute a zero subgradient.
pub const DISTANCE_KINK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativePair {
    pub i: usize,
    pub j: usize,
    pub margin: f64,
}

/// Unordered batch-position pairs, each stored once with `i < j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<NegativePair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Enumerates every pair of the batch. `leaves[k]` is the leaf class of
    /// batch position `k`; same-leaf pairs are positives.
    pub fn enumerate(leaves: &[NodeId], table: &MarginTable) -> Result<Self> {
        if leaves.len() < 2 {
            return Err(Error::BatchTooSmall(leaves.len()));
        }
        let idx = leaves
            .iter()
            .map(|l| table.class_index(*l).ok_or(Error::UnknownClass(l.0)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = PairSet::default();
        for i in 0..leaves.len() {
            for j in i + 1..leaves.len() {
                if idx[i] == idx[j] {
                    out.positives.push((i, j));
                } else {
                    out.negatives.push(NegativePair {
                        i,
                        j,
                        margin: table.combined.get(idx[i], idx[j]),
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub positive_term: f64,
    pub negative_term: f64,
    /// Negatives with `D < M`.
    pub active_negatives: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Loss and its gradient with respect to every embedding in the batch.
pub fn loss_and_grad(pairs: &PairSet, embs: &[Embedding]) -> (LossReport, Vec<Vec<f64>>) {
    let dim = embs.first().map_or(0, Embedding::dim);
    let mut grads = vec![vec![0.0; dim]; embs.len()];
    let mut report = LossReport {
        positives: pairs.positives.len(),
        negatives: pairs.negatives.len(),
        ..Default::default()
    };

    // `sign` is +1 to pull together, -1 to push apart.
    let mut push = |i: usize, j: usize, d: f64, sign: f64| {
        if d < DISTANCE_KINK {
            return;
        }
        let (a, b) = (embs[i].as_slice(), embs[j].as_slice());
        for k in 0..dim {
            let g = sign * (a[k] - b[k]) / d;
            grads[i][k] += g;
            grads[j][k] -= g;
        }
    };

    for &(i, j) in &pairs.positives {
        let d = euclidean(embs[i].as_slice(), embs[j].as_slice());
        report.positive_term += d;
        push(i, j, d, 1.0);
    }
    for n in &pairs.negatives {
        let d = euclidean(embs[n.i].as_slice(), embs[n.j].as_slice());
        if d < n.margin {
            report.negative_term += n.margin - d;
            report.active_negatives += 1;
            push(n.i, n.j, d, -1.0);
        }
    }
    report.total = report.positive_term + report.negative_term;
    (report, grads)
}

/// Loss only, for finite-difference checks and evaluation.
pub fn loss(pairs: &PairSet, embs: &[Embedding]) -> f64 {
    let pos: f64 = pairs
        .positives
        .iter()
        .map(|&(i, j)| embs[i].distance(&embs[j]))
        .sum();
    let neg: f64 = pairs
        .negatives
        .iter()
        .map(|n| (n.margin - embs[n.i].distance(&embs[n.j])).max(0.0))
        .sum();
    pos + neg
}
