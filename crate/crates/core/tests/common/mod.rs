//! Independent oracles and fixture generators shared by integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use hiermargin::embedder::{euclidean, EmbedderParams, Embedding};
use hiermargin::pairloss::{self, NegativePair, PairSet};
use rand::Rng;

/// A random rooted tree kept as a plain parent array. Node 0 is the root.
pub struct RandomTree {
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<usize>,
    pub children: Vec<Vec<usize>>,
}

impl RandomTree {
    /// Grows a tree of at most `max_nodes` nodes and depth at most `max_height`
    /// by attaching each new node under a uniformly chosen eligible node.
    pub fn generate(rng: &mut impl Rng, max_nodes: usize, max_height: usize) -> Self {
        let n = rng.random_range(2..=max_nodes);
        let mut parent = vec![None];
        let mut depth = vec![0];
        let mut children = vec![vec![]];
        while parent.len() < n {
            let eligible: Vec<usize> = (0..parent.len()).filter(|&v| depth[v] < max_height).collect();
            let p = eligible[rng.random_range(0..eligible.len())];
            let id = parent.len();
            parent.push(Some(p));
            depth.push(depth[p] + 1);
            children.push(vec![]);
            children[p].push(id);
        }
        RandomTree {
            parent,
            depth,
            children,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (1..self.len()).filter(|&v| self.children[v].is_empty()).collect()
    }

    /// Label path (root excluded) using globally unique names.
    pub fn path(&self, v: usize) -> Vec<String> {
        let mut out = vec![];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            out.push(format!("n{cur}"));
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn ancestors(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Deepest node in the intersection of the two ancestor sets.
    pub fn naive_lcs(&self, u: usize, v: usize) -> usize {
        let au: HashSet<usize> = self.ancestors(u).into_iter().collect();
        self.ancestors(v)
            .into_iter()
            .filter(|a| au.contains(a))
            .max_by_key(|a| self.depth[*a])
            .unwrap()
    }

    /// Longest downward path, by brute force over every leaf below `v`.
    pub fn naive_height(&self, v: usize) -> usize {
        self.leaves_with_root_leaf()
            .into_iter()
            .filter(|&l| self.ancestors(l).contains(&v))
            .map(|l| self.depth[l] - self.depth[v])
            .max()
            .unwrap()
    }

    fn leaves_with_root_leaf(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.children[v].is_empty()).collect()
    }

    pub fn naive_dissimilarity(&self, u: usize, v: usize) -> f64 {
        self.naive_height(self.naive_lcs(u, v)) as f64 / self.naive_height(0) as f64
    }
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = Embedding::normalize(v) {
            return e;
        }
    }
}

/// Loss of a batch of raw inputs under `params`, forward passes only.
pub fn batch_loss(params: &EmbedderParams, xs: &[Vec<f64>], pairs: &PairSet) -> f64 {
    let embs: Vec<Embedding> = xs.iter().map(|x| params.embed(x).unwrap()).collect();
    pairloss::loss(pairs, &embs)
}

/// Whether any pair sits within `eps` of a non-differentiable point.
pub fn near_kink(pairs: &PairSet, embs: &[Embedding], eps: f64) -> bool {
    let d = |i: usize, j: usize| euclidean(embs[i].as_slice(), embs[j].as_slice());
    pairs.positives.iter().any(|&(i, j)| d(i, j) < eps)
        || pairs
            .negatives
            .iter()
            .any(|n: &NegativePair| d(n.i, n.j) < eps || (d(n.i, n.j) - n.margin).abs() < eps)
}

/// Norm-wise relative error. The denominator is floored at 1e-6 so that two
/// gradients that are both zero up to rounding do not register as 100% off.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-6)
}

/// Central-difference gradient of `f` at `x`.
pub fn central_diff(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + h;
            let up = f(x);
            x[k] = orig - h;
            let down = f(x);
            x[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Exhaustive sort of every gallery position by (distance, position).
pub fn sorted_by_distance(q: &Embedding, gallery: &[Embedding], skip: Option<usize>) -> Vec<usize> {
    let mut all: Vec<usize> = (0..gallery.len()).filter(|i| Some(*i) != skip).collect();
    all.sort_by(|&a, &b| {
        let da = euclidean(q.as_slice(), gallery[a].as_slice());
        let db = euclidean(q.as_slice(), gallery[b].as_slice());
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    all
}
