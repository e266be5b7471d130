//! Unrooted binary trees and rooted descendant-subtree views.
//!
//! Nodes and edges carry dense integer ids. Every internal node has degree
//! three and every leaf degree one, so a tree with `n >= 2` leaves has
//! `2n - 2` nodes and `2n - 3` edges.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// An unrooted binary tree with stable node and edge ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTopology {
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    edges: Vec<(NodeId, NodeId)>,
    leaves: Vec<NodeId>,
    leaf_index: Vec<Option<usize>>,
    labels: Vec<Option<String>>,
}

impl TreeTopology {
    /// Builds a tree from an edge list, checking connectivity, acyclicity and
    /// the degree constraints. `labels` may be empty or hold one entry per node.
    pub fn from_edges(
        node_count: usize,
        edges: Vec<(NodeId, NodeId)>,
        labels: Vec<Option<String>>,
    ) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidTopology("a tree needs at least two nodes"));
        }
        if edges.len() + 1 != node_count {
            return Err(Error::InvalidTopology(
                "edge count must be node count minus one",
            ));
        }
        let labels = if labels.is_empty() {
            vec![None; node_count]
        } else {
            labels
        };
        if labels.len() != node_count {
            return Err(Error::InvalidTopology("one label slot per node required"));
        }
        let mut adjacency = vec![Vec::with_capacity(3); node_count];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a.0 >= node_count || b.0 >= node_count {
                return Err(Error::InvalidTopology("edge endpoint out of range"));
            }
            if a == b {
                return Err(Error::InvalidTopology("self loop"));
            }
            adjacency[a.0].push((b, EdgeId(i)));
            adjacency[b.0].push((a, EdgeId(i)));
        }
        for adj in &adjacency {
            match adj.len() {
                1 | 3 => {}
                0 => return Err(Error::InvalidTopology("isolated node")),
                _ => return Err(Error::InvalidTopology("internal nodes must have degree 3")),
            }
        }
        // n - 1 edges plus connectivity implies acyclic.
        let mut seen = vec![false; node_count];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adjacency[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        if reached != node_count {
            return Err(Error::InvalidTopology("graph is not connected"));
        }
        let leaves: Vec<NodeId> = (0..node_count)
            .filter(|&v| adjacency[v].len() == 1)
            .map(NodeId)
            .collect();
        let mut leaf_index = vec![None; node_count];
        for (i, l) in leaves.iter().enumerate() {
            leaf_index[l.0] = Some(i);
        }
        Ok(TreeTopology {
            adjacency,
            edges,
            leaves,
            leaf_index,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Leaves in increasing id order. Leaf-scoped spin vectors follow this order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Position of `node` in [`TreeTopology::leaves`], if it is a leaf.
    #[inline]
    pub fn leaf_index(&self, node: NodeId) -> Option<usize> {
        self.leaf_index.get(node.0).copied().flatten()
    }

    #[inline]
    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.adjacency[node.0].len() == 1
    }

    #[inline]
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[node.0]
    }

    #[inline]
    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.edges[edge.0]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.adjacency
            .get(a.0)?
            .iter()
            .find(|(w, _)| *w == b)
            .map(|&(_, e)| e)
    }

    pub fn label(&self, node: NodeId) -> Option<&str> {
        self.labels.get(node.0)?.as_deref()
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    /// Finds the node carrying `label`.
    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.labels
            .iter()
            .position(|l| l.as_deref() == Some(label))
            .map(NodeId)
    }

    /// First internal node, or node 0 for the two-leaf tree.
    pub fn default_root(&self) -> NodeId {
        (0..self.node_count())
            .map(NodeId)
            .find(|&v| !self.is_leaf(v))
            .unwrap_or(NodeId(0))
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<()> {
        if node.0 < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownNode(node))
        }
    }

    pub(crate) fn check_edge(&self, edge: EdgeId) -> Result<()> {
        if edge.0 < self.edge_count() {
            Ok(())
        } else {
            Err(Error::UnknownEdge(edge))
        }
    }
}

/// A rooted view of part of a tree: either the descendant subtree of `root`
/// with respect to an adjacent node, or the whole tree hung from `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedView {
    root: NodeId,
    away_from: Option<NodeId>,
    parent: Vec<Option<(NodeId, EdgeId)>>,
    children: Vec<Vec<(NodeId, EdgeId)>>,
    in_view: Vec<bool>,
    preorder: Vec<NodeId>,
    leaves: Vec<NodeId>,
}

impl RootedView {
    fn build(tree: &TreeTopology, root: NodeId, away_from: Option<NodeId>) -> Self {
        let n = tree.node_count();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut in_view = vec![false; n];
        let mut preorder = Vec::new();
        let mut leaves = Vec::new();
        let mut stack = vec![root];
        in_view[root.0] = true;
        while let Some(v) = stack.pop() {
            preorder.push(v);
            if tree.is_leaf(v) {
                leaves.push(v);
            }
            // Reverse push keeps children visited in adjacency order.
            for &(w, e) in tree.neighbors(v).iter().rev() {
                if Some(w) == away_from || in_view[w.0] {
                    continue;
                }
                in_view[w.0] = true;
                parent[w.0] = Some((v, e));
                stack.push(w);
            }
            for &(w, e) in tree.neighbors(v) {
                if parent[w.0].map(|(p, _)| p) == Some(v) && Some(w) != away_from {
                    children[v.0].push((w, e));
                }
            }
        }
        leaves.sort_unstable();
        RootedView {
            root,
            away_from,
            parent,
            children,
            in_view,
            preorder,
            leaves,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// The excluded neighbor, or `None` for a whole-tree rooting.
    pub fn away_from(&self) -> Option<NodeId> {
        self.away_from
    }

    #[inline]
    pub fn parent(&self, node: NodeId) -> Option<(NodeId, EdgeId)> {
        self.parent[node.0]
    }

    #[inline]
    pub fn children(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.children[node.0]
    }

    #[inline]
    pub fn contains(&self, node: NodeId) -> bool {
        self.in_view.get(node.0).copied().unwrap_or(false)
    }

    /// Nodes of the view, parents before children.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    /// Nodes of the view, children before parents.
    pub fn postorder(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.preorder.iter().rev().copied()
    }

    /// True if `node` is a leaf of the underlying tree and lies in the view.
    #[inline]
    pub fn is_tree_leaf(&self, node: NodeId) -> bool {
        self.leaves.binary_search(&node).is_ok()
    }

    /// Tree leaves inside the view (`L_root`), increasing id order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn node_count(&self) -> usize {
        self.preorder.len()
    }

    /// Node count of the underlying tree (length of node-indexed buffers).
    pub fn tree_node_count(&self) -> usize {
        self.parent.len()
    }

    /// Edges of the view, each identified by its child endpoint.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, EdgeId)> + '_ {
        self.preorder
            .iter()
            .filter_map(move |&v| self.parent[v.0].map(|(p, e)| (p, v, e)))
    }
}

/// The descendant subtree at `root` with respect to the adjacent node `away_from`.
pub fn descendant_subtree(
    tree: &TreeTopology,
    root: NodeId,
    away_from: NodeId,
) -> Result<RootedView> {
    tree.check_node(root)?;
    tree.check_node(away_from)?;
    if tree.edge_between(root, away_from).is_none() {
        return Err(Error::NotAdjacent(root, away_from));
    }
    Ok(RootedView::build(tree, root, Some(away_from)))
}

/// The whole tree hung from `root`; the root may have up to three children.
pub fn whole_tree_view(tree: &TreeTopology, root: NodeId) -> Result<RootedView> {
    tree.check_node(root)?;
    Ok(RootedView::build(tree, root, None))
}

/// Edge ids in depth-first discovery order from an anchor node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfsEdgeOrder(Vec<EdgeId>);

impl DfsEdgeOrder {
    pub fn new(tree: &TreeTopology, anchor: NodeId) -> Result<Self> {
        tree.check_node(anchor)?;
        let view = RootedView::build(tree, anchor, None);
        Ok(DfsEdgeOrder(
            view.preorder()
                .iter()
                .filter_map(|&v| view.parent(v).map(|(_, e)| e))
                .collect(),
        ))
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }
}

/// Random unrooted binary topology grown by attaching each new leaf to a
/// uniformly chosen existing edge. Leaves are labelled `t1..tn` in
/// attachment order.
pub fn random_binary_tree<R: Rng + ?Sized>(n_leaves: usize, rng: &mut R) -> Result<TreeTopology> {
    if n_leaves < 2 {
        return Err(Error::TooFewLeaves {
            got: n_leaves,
            min: 2,
        });
    }
    let mut edges = vec![(NodeId(0), NodeId(1))];
    let mut labels = vec![Some(String::from("t1")), Some(String::from("t2"))];
    for k in 3..=n_leaves {
        let pick = rng.random_range(0..edges.len());
        let (a, b) = edges[pick];
        let mid = NodeId(labels.len());
        labels.push(None);
        let leaf = NodeId(labels.len());
        labels.push(Some(format!("t{k}")));
        edges[pick] = (a, mid);
        edges.push((mid, b));
        edges.push((mid, leaf));
    }
    TreeTopology::from_edges(labels.len(), edges, labels)
}

/// Shapes of rooted experiment trees. The root always has two children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Complete binary tree of the given depth (`2^depth` leaves).
    Complete,
    /// Path-like tree: every internal node has one leaf child.
    Caterpillar,
    /// As balanced as possible for an arbitrary leaf count.
    Balanced,
}

/// Builds a rooted experiment tree as the descendant subtree of its root with
/// respect to an extra pendant "anchor" leaf, so the surrounding topology
/// keeps the degree-3 invariant.
///
/// Nodes are numbered breadth first from the root (id 0); for complete trees
/// this is heap order, children of `i` being `2i + 1` and `2i + 2`, and the
/// edge above node `c` is edge `c - 1`. The anchor is the last node and the
/// last edge. `size` is the depth for [`ExperimentKind::Complete`] and the
/// leaf count otherwise.
pub fn experiment_tree(kind: ExperimentKind, size: usize) -> Result<(TreeTopology, RootedView)> {
    let leaves = match kind {
        ExperimentKind::Complete => {
            if size == 0 {
                return Err(Error::TooFewLeaves { got: 1, min: 2 });
            }
            if size > 24 {
                return Err(Error::TooManyLeaves {
                    got: usize::MAX,
                    max: 1 << 24,
                });
            }
            1usize << size
        }
        ExperimentKind::Caterpillar | ExperimentKind::Balanced => {
            if size < 2 {
                return Err(Error::TooFewLeaves { got: size, min: 2 });
            }
            size
        }
    };
    let mut edges = Vec::with_capacity(2 * leaves);
    let mut labels: Vec<Option<String>> = vec![None];
    let mut leaf_counter = 0usize;
    let mut queue = VecDeque::from([(NodeId(0), leaves)]);
    while let Some((v, count)) = queue.pop_front() {
        if count == 1 {
            leaf_counter += 1;
            labels[v.0] = Some(format!("t{leaf_counter}"));
            continue;
        }
        let (left, right) = match kind {
            ExperimentKind::Caterpillar => (1, count - 1),
            _ => (count - count / 2, count / 2),
        };
        for part in [left, right] {
            let child = NodeId(labels.len());
            labels.push(None);
            edges.push((v, child));
            queue.push_back((child, part));
        }
    }
    let anchor = NodeId(labels.len());
    labels.push(Some(String::from("anchor")));
    edges.push((NodeId(0), anchor));
    let tree = TreeTopology::from_edges(labels.len(), edges, labels)?;
    let view = descendant_subtree(&tree, NodeId(0), anchor)?;
    Ok((tree, view))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quartet() -> TreeTopology {
        // A=0, B=1, x=2, y=3, C=4, D=5
        let e = |a, b| (NodeId(a), NodeId(b));
        TreeTopology::from_edges(6, vec![e(2, 0), e(2, 1), e(2, 3), e(3, 4), e(3, 5)], vec![])
            .unwrap()
    }

    fn check_invariants(t: &TreeTopology) {
        let n = t.leaf_count();
        assert_eq!(t.node_count(), 2 * n - 2);
        assert_eq!(t.edge_count(), 2 * n - 3);
        for v in 0..t.node_count() {
            let d = t.neighbors(NodeId(v)).len();
            assert!(d == 1 || d == 3);
        }
    }

    #[test]
    fn random_trees_satisfy_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..40 {
            check_invariants(&random_binary_tree(n, &mut rng).unwrap());
        }
        let t = random_binary_tree(5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (8, 7));
    }

    #[test]
    fn small_random_trees_are_unique_shapes() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t2 = random_binary_tree(2, &mut rng).unwrap();
            assert_eq!((t2.node_count(), t2.edge_count()), (2, 1));
            let t3 = random_binary_tree(3, &mut rng).unwrap();
            let internal: Vec<_> = (0..4).map(NodeId).filter(|&v| !t3.is_leaf(v)).collect();
            assert_eq!(internal.len(), 1);
        }
        assert_eq!(
            random_binary_tree(1, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::TooFewLeaves { got: 1, min: 2 })
        );
    }

    #[test]
    fn rejects_bad_topologies() {
        let e = |a, b| (NodeId(a), NodeId(b));
        // degree-2 node
        assert!(TreeTopology::from_edges(3, vec![e(0, 1), e(1, 2)], vec![]).is_err());
        // disconnected (cycle plus isolated pair)
        assert!(TreeTopology::from_edges(4, vec![e(0, 1), e(1, 0), e(2, 3)], vec![]).is_err());
    }

    #[test]
    fn descendant_views() {
        let t = quartet();
        let view = descendant_subtree(&t, NodeId(2), NodeId(3)).unwrap();
        let kids: Vec<_> = view.children(NodeId(2)).iter().map(|c| c.0).collect();
        assert_eq!(kids, vec![NodeId(0), NodeId(1)]);
        assert_eq!(view.leaves(), &[NodeId(0), NodeId(1)]);

        let leaf = descendant_subtree(&t, NodeId(0), NodeId(2)).unwrap();
        assert_eq!(leaf.node_count(), 1);
        assert_eq!(leaf.leaves(), &[NodeId(0)]);

        assert_eq!(
            descendant_subtree(&t, NodeId(0), NodeId(3)),
            Err(Error::NotAdjacent(NodeId(0), NodeId(3)))
        );
    }

    #[test]
    fn views_partition_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..20 {
            let t = random_binary_tree(n, &mut rng).unwrap();
            for &(a, b) in t.edges() {
                let va = descendant_subtree(&t, a, b).unwrap();
                let vb = descendant_subtree(&t, b, a).unwrap();
                for v in 0..t.node_count() {
                    assert!(va.contains(NodeId(v)) ^ vb.contains(NodeId(v)));
                }
                for &v in va.preorder() {
                    if !t.is_leaf(v) {
                        assert_eq!(va.children(v).len(), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn dfs_order_covers_each_edge_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_binary_tree(12, &mut rng).unwrap();
        let order = DfsEdgeOrder::new(&t, t.default_root()).unwrap();
        let mut ids: Vec<_> = order.edges().iter().map(|e| e.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..t.edge_count()).collect::<Vec<_>>());
    }

    #[test]
    fn experiment_shapes() {
        let (_, cherry) = experiment_tree(ExperimentKind::Complete, 1).unwrap();
        assert_eq!(cherry.leaves().len(), 2);
        assert_eq!(cherry.children(NodeId(0)).len(), 2);

        let (t, v) = experiment_tree(ExperimentKind::Complete, 3).unwrap();
        assert_eq!(v.leaves(), &(7..15).map(NodeId).collect::<Vec<_>>()[..]);
        for i in 0..7 {
            let kids: Vec<_> = v
                .children(NodeId(i))
                .iter()
                .map(|c| (c.0 .0, c.1 .0))
                .collect();
            assert_eq!(kids, vec![(2 * i + 1, 2 * i), (2 * i + 2, 2 * i + 1)]);
        }
        assert_eq!(t.label(NodeId(15)), Some("anchor"));
        check_invariants(&t);

        let (t, v) = experiment_tree(ExperimentKind::Caterpillar, 4).unwrap();
        assert_eq!(v.leaves().len(), 4);
        check_invariants(&t);
        let (t, v) = experiment_tree(ExperimentKind::Balanced, 1000).unwrap();
        assert_eq!(v.leaves().len(), 1000);
        assert_eq!(t.leaf_count(), 1001);
    }
}
