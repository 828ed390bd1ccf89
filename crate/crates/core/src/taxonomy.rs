//! Semantic tree built from root-first label paths.
//!
//! Nodes are identified by their full name path, so two `Shoes` nodes under
//! different parents are distinct. A synthetic root is always placed above
//! the first label level, which keeps the structure a single tree even when
//! the input paths start with different names.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Display name of the synthetic root node.
pub const ROOT_NAME: &str = "<root>";

/// Dense handle into a [`Taxonomy`]'s node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Edges from the root.
    pub depth: usize,
    /// Edges on the longest downward path to a leaf.
    pub height: usize,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    nodes: Vec<Node>,
    root: NodeId,
    leaf_index: HashMap<Vec<String>, NodeId>,
    tree_height: usize,
}

impl Taxonomy {
    /// Builds the tree from label paths. Duplicate paths are idempotent.
    ///
    /// A path that is a strict prefix of another path is rejected: its class
    /// would be an internal node, and every class must be a leaf.
    pub fn build<P, S>(paths: &[P]) -> Result<Self>
    where
        P: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut nodes = vec![Node {
            name: ROOT_NAME.to_string(),
            parent: None,
            children: Vec::new(),
            depth: 0,
            height: 0,
        }];
        let root = NodeId(0);
        let mut by_path: HashMap<Vec<String>, NodeId> = HashMap::new();

        for (index, path) in paths.iter().enumerate() {
            let path = path.as_ref();
            if path.is_empty() {
                return Err(Error::EmptyPath { index });
            }
            let mut parent = root;
            let mut prefix: Vec<String> = Vec::with_capacity(path.len());
            for name in path {
                prefix.push(name.as_ref().to_string());
                parent = match by_path.get(&prefix) {
                    Some(&id) => id,
                    None => {
                        let id = NodeId(nodes.len());
                        let depth = nodes[parent.0].depth + 1;
                        nodes.push(Node {
                            name: name.as_ref().to_string(),
                            parent: Some(parent),
                            children: Vec::new(),
                            depth,
                            height: 0,
                        });
                        nodes[parent.0].children.push(id);
                        by_path.insert(prefix.clone(), id);
                        id
                    }
                };
            }
        }

        let mut leaf_index = HashMap::new();
        for path in paths {
            let key: Vec<String> = path.as_ref().iter().map(|s| s.as_ref().to_string()).collect();
            let id = by_path[&key];
            if !nodes[id.0].children.is_empty() {
                return Err(Error::InconsistentHierarchy(format!(
                    "class '{}' is both a labelled class and an ancestor of other classes",
                    key.join("/")
                )));
            }
            leaf_index.insert(key, id);
        }

        // Children always have larger ids than their parent, so a reverse
        // sweep visits every child before its parent.
        for i in (1..nodes.len()).rev() {
            let h = nodes[i].height + 1;
            let p = nodes[i].parent.expect("non-root node has a parent").0;
            if nodes[p].height < h {
                nodes[p].height = h;
            }
        }
        let tree_height = nodes[0].height;

        Ok(Taxonomy {
            nodes,
            root,
            leaf_index,
            tree_height,
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Height of the root, equal to the maximum height over all nodes.
    pub fn tree_height(&self) -> usize {
        self.tree_height
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(Error::InvalidNode(id.0))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn height(&self, id: NodeId) -> usize {
        self.nodes[id.0].height
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id.0].depth
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].children.is_empty()
    }

    /// Leaf node for a full root-first label path.
    pub fn leaf<S: AsRef<str>>(&self, path: &[S]) -> Option<NodeId> {
        let key: Vec<String> = path.iter().map(|s| s.as_ref().to_string()).collect();
        self.leaf_index.get(&key).copied()
    }

    /// Labelled leaf classes in ascending id order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.leaf_index.values().copied().collect();
        v.sort_unstable();
        v
    }

    /// Label path of a node, root excluded.
    pub fn path(&self, id: NodeId) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.nodes[id.0].depth);
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            out.push(self.nodes[cur.0].name.as_str());
            cur = p;
        }
        out.reverse();
        out
    }

    /// `/`-joined label path, used as the class name in reports.
    pub fn path_name(&self, id: NodeId) -> String {
        if id == self.root {
            ROOT_NAME.to_string()
        } else {
            self.path(id).join("/")
        }
    }

    /// Ancestor-or-self of `id` at the given depth.
    pub fn ancestor_at_depth(&self, id: NodeId, depth: usize) -> Option<NodeId> {
        let mut cur = id;
        if self.nodes[cur.0].depth < depth {
            return None;
        }
        while self.nodes[cur.0].depth > depth {
            cur = self.nodes[cur.0].parent?;
        }
        Some(cur)
    }

    /// Deepest node that is an ancestor-or-self of both `u` and `v`.
    pub fn lcs(&self, u: NodeId, v: NodeId) -> Result<NodeId> {
        self.node(u)?;
        self.node(v)?;
        let (mut a, mut b) = (u, v);
        while self.nodes[a.0].depth > self.nodes[b.0].depth {
            a = self.nodes[a.0].parent.expect("deeper node has a parent");
        }
        while self.nodes[b.0].depth > self.nodes[a.0].depth {
            b = self.nodes[b.0].parent.expect("deeper node has a parent");
        }
        while a != b {
            a = self.nodes[a.0]
                .parent
                .expect("distinct nodes at equal depth are below the root");
            b = self.nodes[b.0]
                .parent
                .expect("distinct nodes at equal depth are below the root");
        }
        Ok(a)
    }

    /// `height(lcs(u, v)) / tree_height`, in `(0, 1]` for distinct nodes.
    pub fn dissimilarity(&self, u: NodeId, v: NodeId) -> Result<f64> {
        if u == v {
            self.node(u)?;
            return Err(Error::SameClass(u.0));
        }
        let l = self.lcs(u, v)?;
        Ok(self.nodes[l.0].height as f64 / self.tree_height as f64)
    }

    /// Node counts per depth, root first.
    pub fn counts_per_depth(&self) -> Vec<usize> {
        let max_depth = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut counts = vec![0; max_depth + 1];
        for n in &self.nodes {
            counts[n.depth] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn t0() -> Taxonomy {
        Taxonomy::build(&[vec!["A", "a1"], vec!["A", "a2"], vec!["B", "b1"]]).unwrap()
    }

    fn ancestors(t: &Taxonomy, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = t.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    fn naive_lcs(t: &Taxonomy, u: NodeId, v: NodeId) -> NodeId {
        let au: HashSet<NodeId> = ancestors(t, u).into_iter().collect();
        ancestors(t, v)
            .into_iter()
            .filter(|a| au.contains(a))
            .max_by_key(|a| t.depth(*a))
            .unwrap()
    }

    #[test]
    fn t0_heights() {
        let t = t0();
        let a = t.leaf(&["A", "a1"]).and_then(|l| t.parent(l)).unwrap();
        let b = t.leaf(&["B", "b1"]).and_then(|l| t.parent(l)).unwrap();
        assert_eq!(t.tree_height(), 2);
        assert_eq!(t.height(t.root()), 2);
        assert_eq!(t.height(a), 1);
        assert_eq!(t.height(b), 1);
        for leaf in t.leaves() {
            assert_eq!(t.height(leaf), 0);
            assert_eq!(t.depth(leaf), 2);
        }
        assert_eq!(t.leaves().len(), 3);
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn single_path_is_a_chain() {
        let t = Taxonomy::build(&[vec!["A", "a1"]]).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.tree_height(), 2);
    }

    #[test]
    fn duplicate_paths_are_idempotent() {
        let t = Taxonomy::build(&[vec!["A", "a1"], vec!["A", "a1"]]).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.leaves().len(), 1);
    }

    #[test]
    fn empty_path_rejected() {
        let paths: Vec<Vec<&str>> = vec![vec!["A"], vec![]];
        assert!(matches!(
            Taxonomy::build(&paths),
            Err(Error::EmptyPath { index: 1 })
        ));
    }

    #[test]
    fn class_that_is_also_an_ancestor_rejected() {
        let paths = vec![vec!["A"], vec!["A", "a1"]];
        assert!(matches!(
            Taxonomy::build(&paths),
            Err(Error::InconsistentHierarchy(_))
        ));
    }

    #[test]
    fn repeated_names_under_different_parents_are_distinct() {
        let t = Taxonomy::build(&[vec!["Men", "Shoes"], vec!["Women", "Shoes"]]).unwrap();
        let m = t.leaf(&["Men", "Shoes"]).unwrap();
        let w = t.leaf(&["Women", "Shoes"]).unwrap();
        assert_ne!(m, w);
        assert_eq!(t.lcs(m, w).unwrap(), t.root());
    }

    #[test]
    fn lcs_on_t0() {
        let t = t0();
        let a1 = t.leaf(&["A", "a1"]).unwrap();
        let a2 = t.leaf(&["A", "a2"]).unwrap();
        let b1 = t.leaf(&["B", "b1"]).unwrap();
        let a = t.parent(a1).unwrap();
        assert_eq!(t.lcs(a1, a2).unwrap(), a);
        assert_eq!(naive_lcs(&t, a1, a2), a);
        assert_eq!(t.lcs(a1, b1).unwrap(), t.root());
        assert_eq!(naive_lcs(&t, a1, b1), t.root());
        assert_eq!(t.lcs(a1, a1).unwrap(), a1);
        assert_eq!(t.lcs(a, a1).unwrap(), a);
    }

    #[test]
    fn dissimilarity_on_t0() {
        let t = t0();
        let a1 = t.leaf(&["A", "a1"]).unwrap();
        let a2 = t.leaf(&["A", "a2"]).unwrap();
        let b1 = t.leaf(&["B", "b1"]).unwrap();
        assert_eq!(t.dissimilarity(a1, a2).unwrap(), 0.5);
        assert_eq!(t.dissimilarity(a1, b1).unwrap(), 1.0);
        assert_eq!(t.dissimilarity(b1, a1).unwrap(), 1.0);
        assert!(matches!(t.dissimilarity(a1, a1), Err(Error::SameClass(_))));
    }

    #[test]
    fn invalid_handle() {
        let t = t0();
        assert!(matches!(t.lcs(NodeId(99), t.root()), Err(Error::InvalidNode(99))));
    }

    #[test]
    fn unbalanced_tree_uses_longest_path() {
        let t = Taxonomy::build(&[vec!["A", "x", "y"], vec!["B"]]).unwrap();
        assert_eq!(t.tree_height(), 3);
        let b = t.leaf(&["B"]).unwrap();
        let y = t.leaf(&["A", "x", "y"]).unwrap();
        assert_eq!(t.dissimilarity(b, y).unwrap(), 1.0);
        assert_eq!(t.counts_per_depth(), vec![1, 2, 1, 1]);
        assert_eq!(t.ancestor_at_depth(y, 1), t.parent(t.parent(y).unwrap()));
        assert_eq!(t.ancestor_at_depth(b, 2), None);
        assert_eq!(t.path_name(y), "A/x/y");
    }
}
