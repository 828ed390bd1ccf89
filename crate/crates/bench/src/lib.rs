//! Fixture builders shared by the benchmarks.

use std::collections::HashMap;

use hiermargin::{Embedding, Gallery, NodeId, Taxonomy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complete tree with the given branching factor per level.
pub fn balanced_taxonomy(branching: &[usize]) -> Taxonomy {
    let mut paths: Vec<Vec<String>> = vec![vec![]];
    for &b in branching {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..b).map(move |c| {
                    let mut q = p.clone();
                    let name = match q.last() {
                        Some(parent) => format!("{parent}.{c}"),
                        None => format!("c{c}"),
                    };
                    q.push(name);
                    q
                })
            })
            .collect();
    }
    Taxonomy::build(&paths).expect("balanced tree is consistent")
}

pub fn unit(rng: &mut impl Rng, dim: usize) -> Embedding {
    loop {
        let v = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(e) = Embedding::normalize(v) {
            return e;
        }
    }
}

/// `per_class` random unit embeddings for every leaf.
pub fn class_embeddings(
    rng: &mut impl Rng,
    t: &Taxonomy,
    per_class: usize,
    dim: usize,
) -> HashMap<NodeId, Vec<Embedding>> {
    t.leaves()
        .into_iter()
        .map(|l| (l, (0..per_class).map(|_| unit(rng, dim)).collect()))
        .collect()
}

/// Gallery of `n` random points spread over the leaves of `t`.
pub fn gallery(rng: &mut impl Rng, t: &Taxonomy, n: usize, dim: usize) -> Gallery {
    let leaves = t.leaves();
    Gallery::new(
        (0..n).map(|_| unit(rng, dim)).collect(),
        (0..n).map(|i| format!("g{i}")).collect(),
        (0..n).map(|i| leaves[i % leaves.len()]).collect(),
    )
    .expect("shapes agree")
}
