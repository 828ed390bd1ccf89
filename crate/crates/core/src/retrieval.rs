//! Exhaustive nearest-neighbour search and Recall@k per taxonomy level.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::embedder::Embedding;
use crate::error::{Error, Result};
use crate::taxonomy::{NodeId, Taxonomy};

/// Embedded items with their ids and leaf classes.
#[derive(Debug, Clone)]
pub struct Gallery {
    pub embeddings: Vec<Embedding>,
    pub ids: Vec<String>,
    pub leaves: Vec<NodeId>,
    positions: HashMap<String, usize>,
}

impl Gallery {
    pub fn new(embeddings: Vec<Embedding>, ids: Vec<String>, leaves: Vec<NodeId>) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptyGallery);
        }
        if ids.len() != embeddings.len() || leaves.len() != embeddings.len() {
            return Err(Error::ShapeMismatch {
                expected: embeddings.len(),
                got: ids.len().min(leaves.len()),
            });
        }
        let positions = ids.iter().enumerate().map(|(k, id)| (id.clone(), k)).collect();
        Ok(Gallery {
            embeddings,
            ids,
            leaves,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }
}

/// Positions of the `k` nearest gallery items, nearest first. Equal
/// distances resolve to the lower gallery position. `exclude` drops the
/// gallery item with that id, if present.
pub fn knn(query: &Embedding, g: &Gallery, k: usize, exclude: Option<&str>) -> Result<Vec<usize>> {
    let skip = exclude.and_then(|id| g.position(id));
    let usable = g.len() - usize::from(skip.is_some());
    if k == 0 || k > usable {
        return Err(Error::KTooLarge { k, available: usable });
    }
    let mut scored: Vec<(f64, usize)> = g
        .embeddings
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, e)| (query.distance(e), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Recall@k for each requested depth (rows) and k (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct RecallReport {
    pub levels: Vec<usize>,
    pub ks: Vec<usize>,
    /// `recall[level_idx][k_idx]`
    pub recall: Vec<Vec<f64>>,
}

impl RecallReport {
    pub fn get(&self, level: usize, k: usize) -> Option<f64> {
        let li = self.levels.iter().position(|l| *l == level)?;
        let ki = self.ks.iter().position(|x| *x == k)?;
        Some(self.recall[li][ki])
    }

    /// Tab-separated: one row per level, one column per k.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("level");
        for k in &self.ks {
            write!(s, "\tR@{k}").unwrap();
        }
        s.push('\n');
        for (level, row) in self.levels.iter().zip(&self.recall) {
            write!(s, "{level}").unwrap();
            for v in row {
                write!(s, "\t{v:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn ancestor(t: &Taxonomy, leaf: NodeId, depth: usize) -> Result<NodeId> {
    t.ancestor_at_depth(leaf, depth).ok_or_else(|| Error::BadLevel {
        depth,
        leaf: t.path_name(leaf),
    })
}

/// A query counts as a hit at level `l` and cutoff `k` when one of its `k`
/// nearest gallery items shares its depth-`l` ancestor. A gallery item with
/// the query's own id is never retrieved, which handles the case where
/// queries and gallery are the same set.
pub fn recall_at_k(
    queries: &Gallery,
    gallery: &Gallery,
    t: &Taxonomy,
    ks: &[usize],
    levels: &[usize],
) -> Result<RecallReport> {
    let max_k = ks.iter().copied().max().ok_or(Error::KTooLarge {
        k: 0,
        available: gallery.len(),
    })?;
    for l in queries.leaves.iter().chain(&gallery.leaves) {
        for &depth in levels {
            ancestor(t, *l, depth)?;
        }
    }
    let mut hits = vec![vec![0usize; ks.len()]; levels.len()];
    for (q, (emb, id)) in queries.embeddings.iter().zip(&queries.ids).enumerate() {
        let nn = knn(emb, gallery, max_k, Some(id))?;
        for (li, &depth) in levels.iter().enumerate() {
            let target = ancestor(t, queries.leaves[q], depth)?;
            let first_hit = nn
                .iter()
                .position(|&g| t.ancestor_at_depth(gallery.leaves[g], depth) == Some(target));
            if let Some(rank) = first_hit {
                for (ki, &k) in ks.iter().enumerate() {
                    if rank < k {
                        hits[li][ki] += 1;
                    }
                }
            }
        }
    }
    let n = queries.len() as f64;
    Ok(RecallReport {
        levels: levels.to_vec(),
        ks: ks.to_vec(),
        recall: hits
            .into_iter()
            .map(|row| row.into_iter().map(|h| h as f64 / n).collect())
            .collect(),
    })
}

/// Mean taxonomy dissimilarity between each query and its highest-ranked
/// gallery item of a different leaf class. Lower means retrieval mistakes
/// stay semantically close. `None` when no query has a mismatching item.
pub fn mean_mismatch_dissimilarity(
    queries: &Gallery,
    gallery: &Gallery,
    t: &Taxonomy,
) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (q, emb) in queries.embeddings.iter().enumerate() {
        let leaf = queries.leaves[q];
        let nearest = gallery
            .embeddings
            .iter()
            .enumerate()
            .filter(|(g, _)| gallery.leaves[*g] != leaf)
            .map(|(g, e)| (emb.distance(e), g))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, g)) = nearest {
            sum += t.dissimilarity(leaf, gallery.leaves[g])?;
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Top-k neighbours of one query as `(gallery position, distance)`.
pub fn top_k_with_distances(
    query: &Embedding,
    g: &Gallery,
    k: usize,
    exclude: Option<&str>,
) -> Result<Vec<(usize, f64)>> {
    Ok(knn(query, g, k, exclude)?
        .into_iter()
        .map(|i| (i, query.distance(&g.embeddings[i])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Embedding {
        Embedding::normalize(v.to_vec()).unwrap()
    }

    fn t0() -> Taxonomy {
        Taxonomy::build(&[vec!["A", "a1"], vec!["A", "a2"], vec!["B", "b1"]]).unwrap()
    }

    #[test]
    fn zero_distance_wins() {
        let t = t0();
        let leaf = t.leaves()[0];
        let g = Gallery::new(
            vec![
                unit(&[0.0, 1.0, 0.0]),
                unit(&[1.0, 0.0, 0.0]),
                unit(&[0.0, 0.0, 1.0]),
            ],
            vec!["p".into(), "q".into(), "r".into()],
            vec![leaf; 3],
        )
        .unwrap();
        assert_eq!(knn(&unit(&[1.0, 0.0, 0.0]), &g, 1, None).unwrap(), vec![1]);
        let all = knn(&unit(&[1.0, 0.1, 0.0]), &g, 3, None).unwrap();
        assert_eq!(all, vec![1, 0, 2]);
        assert_eq!(
            knn(&unit(&[1.0, 0.0, 0.0]), &g, 2, Some("q")).unwrap(),
            vec![0, 2]
        );
        assert!(matches!(
            knn(&unit(&[1.0, 0.0, 0.0]), &g, 3, Some("q")),
            Err(Error::KTooLarge { k: 3, available: 2 })
        ));
        assert!(matches!(
            knn(&unit(&[1.0, 0.0, 0.0]), &g, 0, None),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn duplicates_give_perfect_recall() {
        let t = t0();
        let leaves = t.leaves();
        let pts = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.3]];
        let mut embs = vec![];
        let mut ids = vec![];
        let mut ls = vec![];
        for (k, p) in pts.iter().enumerate() {
            for copy in 0..2 {
                embs.push(unit(p));
                ids.push(format!("{k}-{copy}"));
                ls.push(leaves[k]);
            }
        }
        let g = Gallery::new(embs, ids, ls).unwrap();
        let r = recall_at_k(&g, &g, &t, &[1, 2], &[1, 2]).unwrap();
        assert_eq!(r.get(2, 1), Some(1.0));
        assert_eq!(r.get(1, 1), Some(1.0));
        assert!(r.to_tsv().starts_with("level\tR@1\tR@2\n1\t1.000000"));
    }

    #[test]
    fn bad_level() {
        let t = t0();
        let g = Gallery::new(
            vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])],
            vec!["a".into(), "b".into()],
            vec![t.leaves()[0], t.leaves()[1]],
        )
        .unwrap();
        assert!(matches!(
            recall_at_k(&g, &g, &t, &[1], &[3]),
            Err(Error::BadLevel { depth: 3, .. })
        ));
    }

    #[test]
    fn mismatch_dissimilarity() {
        let t = t0();
        let [a1, a2, b1] = [t.leaves()[0], t.leaves()[1], t.leaves()[2]];
        let g = Gallery::new(
            vec![
                unit(&[1.0, 0.0]),
                unit(&[1.0, 0.1]),
                unit(&[1.0, -0.3]),
                unit(&[-1.0, 0.0]),
            ],
            vec!["x".into(), "y".into(), "z".into(), "w".into()],
            vec![a1, b1, a2, b1],
        )
        .unwrap();
        let q = Gallery::new(vec![unit(&[1.0, 0.0])], vec!["q".into()], vec![a1]).unwrap();
        // Nearest non-a1 item is y (class b1, lcs root).
        assert_eq!(mean_mismatch_dissimilarity(&q, &g, &t).unwrap(), Some(1.0));
        let q2 = Gallery::new(vec![unit(&[1.0, -0.2])], vec!["q".into()], vec![a1]).unwrap();
        assert_eq!(mean_mismatch_dissimilarity(&q2, &g, &t).unwrap(), Some(0.5));
    }

    #[test]
    fn gallery_shape_checks() {
        assert!(matches!(
            Gallery::new(vec![], vec![], vec![]),
            Err(Error::EmptyGallery)
        ));
        assert!(Gallery::new(vec![unit(&[1.0])], vec![], vec![NodeId(0)]).is_err());
    }
}
