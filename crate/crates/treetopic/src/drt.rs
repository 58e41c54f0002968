//! Directed rooted trees (DRTs): construction, path enumeration, membership
//! counts, isomorphism and reconstruction from path node-sets.
//!
//! A DRT is a directed graph whose undirected skeleton is a tree and which has
//! a unique in-degree-0 node, the root. Node ids are `1..=K`. A *maximal path*
//! runs from the root to a leaf; its length is the number of nodes on it, so a
//! single-node tree has one path of length 1. Depth labels in figure-style
//! edge counting are one less than the lengths reported here.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::DrtError;

/// 1-based node identifier.
pub type NodeId = usize;

/// A validated directed rooted tree over nodes `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Drt {
    node_count: usize,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

/// Size of a DRT: leaf count `I`, sorted multiset of path lengths and node
/// count `K`. Path lengths count nodes, not edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeTriple {
    pub leaves: usize,
    pub depths: Vec<usize>,
    pub nodes: usize,
}

/// All maximal paths of a DRT in canonical (lexicographic) order, together
/// with the locator `z(c, l)` giving the node at depth `l` of path `c` and its
/// exact preimage.
#[derive(Debug, Clone)]
pub struct PathTable {
    paths: Vec<Vec<NodeId>>,
    locator_inverse: BTreeMap<NodeId, Vec<(usize, usize)>>,
}

/// An edge-preserving, root-preserving bijection between the nodes of two
/// isomorphic DRTs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeBijection {
    forward: Vec<NodeId>,
    backward: Vec<NodeId>,
}

impl Drt {
    /// Builds a DRT from a parent map defined on all non-root nodes.
    ///
    /// Node ids must be exactly `{1, ..., K}`. Children are ordered by node
    /// id, which fixes the canonical path order.
    pub fn build(parents: &BTreeMap<NodeId, NodeId>, root: NodeId) -> Result<Self, DrtError> {
        let edges: Vec<(NodeId, NodeId)> = parents.iter().map(|(&c, &p)| (c, p)).collect();
        Self::from_edges(&edges, root)
    }

    /// Builds a DRT from `(child, parent)` edges. A child listed twice would
    /// need two parents and is rejected.
    pub fn from_edges(edges: &[(NodeId, NodeId)], root: NodeId) -> Result<Self, DrtError> {
        let mut ids: BTreeSet<NodeId> = BTreeSet::new();
        ids.insert(root);
        for &(c, p) in edges {
            ids.insert(c);
            ids.insert(p);
        }
        let node_count = ids.len();
        if root == 0 || ids.iter().any(|&v| v == 0 || v > node_count) {
            return Err(DrtError::InvalidIds {
                detail: format!("node ids must be exactly 1..={node_count}"),
            });
        }

        let mut parent: Vec<Option<NodeId>> = vec![None; node_count];
        for &(c, p) in edges {
            if c == root {
                return Err(DrtError::MultiRoot { node: c });
            }
            if parent[c - 1].is_some() {
                return Err(DrtError::MultiRoot { node: c });
            }
            parent[c - 1] = Some(p);
        }
        for v in 1..=node_count {
            if v != root && parent[v - 1].is_none() {
                return Err(DrtError::MultiRoot { node: v });
            }
        }

        // Walking up from every node must reach the root without revisiting.
        let mut state = vec![0u8; node_count]; // 0 unseen, 1 on stack, 2 done
        state[root - 1] = 2;
        for v in 1..=node_count {
            let mut trail = Vec::new();
            let mut u = v;
            while state[u - 1] == 0 {
                state[u - 1] = 1;
                trail.push(u);
                u = parent[u - 1].expect("non-root nodes have parents");
            }
            if state[u - 1] == 1 {
                return Err(DrtError::Cycle { node: u });
            }
            for t in trail {
                state[t - 1] = 2;
            }
        }

        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        for v in 1..=node_count {
            if let Some(p) = parent[v - 1] {
                children[p - 1].push(v);
            }
        }
        for ch in &mut children {
            ch.sort_unstable();
        }

        let drt = Drt {
            node_count,
            root,
            parent,
            children,
        };
        // With ids validated and one parent per non-root node this is
        // unreachable, but the reachability contract is cheap to keep.
        let reached = drt.reachable_from_root();
        if reached != node_count {
            return Err(DrtError::Disconnected {
                detail: format!("{reached} of {node_count} nodes reachable from root"),
            });
        }
        Ok(drt)
    }

    fn reachable_from_root(&self) -> usize {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.root];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            if seen[v - 1] {
                continue;
            }
            seen[v - 1] = true;
            count += 1;
            stack.extend(self.children[v - 1].iter().copied());
        }
        count
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v - 1]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v - 1]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v - 1].is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.node_count
    }

    /// Parent map over non-root nodes, the serialized form of the tree.
    pub fn parent_map(&self) -> BTreeMap<NodeId, NodeId> {
        self.nodes()
            .filter_map(|v| self.parent[v - 1].map(|p| (v, p)))
            .collect()
    }

    /// Enumerates all maximal paths in lexicographic node-sequence order.
    pub fn enumerate_paths(&self) -> (PathTable, SizeTriple) {
        let mut paths = Vec::new();
        let mut current = vec![self.root];
        self.collect_paths(self.root, &mut current, &mut paths);
        // Children are id-sorted, so depth-first traversal already emits the
        // lexicographically smallest sequence first.
        debug_assert!(paths.windows(2).all(|w| w[0] <= w[1]));

        let mut locator_inverse: BTreeMap<NodeId, Vec<(usize, usize)>> = BTreeMap::new();
        for (c, path) in paths.iter().enumerate() {
            for (l, &v) in path.iter().enumerate() {
                locator_inverse.entry(v).or_default().push((c, l));
            }
        }
        let mut depths: Vec<usize> = paths.iter().map(|p| p.len()).collect();
        depths.sort_unstable();
        let size = SizeTriple {
            leaves: paths.len(),
            depths,
            nodes: self.node_count,
        };
        (
            PathTable {
                paths,
                locator_inverse,
            },
            size,
        )
    }

    fn collect_paths(&self, v: NodeId, current: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if self.is_leaf(v) {
            out.push(current.clone());
            return;
        }
        for &c in self.children(v) {
            current.push(c);
            self.collect_paths(c, current, out);
            current.pop();
        }
    }

    /// Membership counts: the number of leaves in the subtree rooted at each
    /// node. Leaves map to 1 and the root to the total leaf count.
    pub fn membership(&self) -> BTreeMap<NodeId, usize> {
        let mut m: BTreeMap<NodeId, usize> = BTreeMap::new();
        self.membership_rec(self.root, &mut m);
        m
    }

    fn membership_rec(&self, v: NodeId, m: &mut BTreeMap<NodeId, usize>) -> usize {
        let val = if self.is_leaf(v) {
            1
        } else {
            self.children(v)
                .iter()
                .map(|&c| self.membership_rec(c, m))
                .sum()
        };
        m.insert(v, val);
        val
    }

    /// Canonical subtree encoding: parenthesized sorted child encodings.
    fn canonical_code(&self, v: NodeId) -> Vec<u8> {
        let mut child_codes: Vec<Vec<u8>> = self
            .children(v)
            .iter()
            .map(|&c| self.canonical_code(c))
            .collect();
        child_codes.sort();
        let mut code = Vec::with_capacity(2 + child_codes.iter().map(Vec::len).sum::<usize>());
        code.push(b'(');
        for c in child_codes {
            code.extend_from_slice(&c);
        }
        code.push(b')');
        code
    }
}

/// Finds an edge-preserving bijection mapping the root of `a` to the root of
/// `b`, if the trees are isomorphic. Deterministic: children are matched in
/// canonical-code order with ties broken by node id.
pub fn isomorphism(a: &Drt, b: &Drt) -> Option<NodeBijection> {
    if a.node_count != b.node_count {
        return None;
    }
    if a.canonical_code(a.root) != b.canonical_code(b.root) {
        return None;
    }
    let mut forward = vec![0usize; a.node_count];
    let mut backward = vec![0usize; b.node_count];
    let mut stack = vec![(a.root, b.root)];
    while let Some((u, v)) = stack.pop() {
        forward[u - 1] = v;
        backward[v - 1] = u;
        let mut ca: Vec<(Vec<u8>, NodeId)> = a
            .children(u)
            .iter()
            .map(|&c| (a.canonical_code(c), c))
            .collect();
        let mut cb: Vec<(Vec<u8>, NodeId)> = b
            .children(v)
            .iter()
            .map(|&c| (b.canonical_code(c), c))
            .collect();
        ca.sort();
        cb.sort();
        for ((code_a, na), (code_b, nb)) in ca.into_iter().zip(cb) {
            debug_assert_eq!(code_a, code_b);
            stack.push((na, nb));
        }
    }
    Some(NodeBijection { forward, backward })
}

/// Reconstructs a DRT whose maximal-path node-sets equal `sets`, unique up to
/// isomorphism. Greedy construction: fix a root in the common intersection,
/// then repeatedly attach, under the node whose history group is considered,
/// the element occurring in the largest number of its subsets. Ties pick the
/// smallest node id. The result is verified against the input before being
/// returned.
pub fn reconstruct_from_path_sets(sets: &[BTreeSet<NodeId>]) -> Result<Drt, DrtError> {
    if sets.is_empty() || sets.iter().any(BTreeSet::is_empty) {
        return Err(DrtError::NotRealizable {
            reason: "empty collection or empty node-set".into(),
        });
    }
    let universe: BTreeSet<NodeId> = sets.iter().flatten().copied().collect();
    let node_count = universe.len();
    if universe.iter().any(|&v| v == 0 || v > node_count) {
        return Err(DrtError::InvalidIds {
            detail: format!("node ids must be exactly 1..={node_count}"),
        });
    }

    let mut common = sets[0].clone();
    for s in &sets[1..] {
        common = common.intersection(s).copied().collect();
    }
    let Some(&root) = common.iter().next() else {
        return Err(DrtError::NotRealizable {
            reason: "no common root across node-sets".into(),
        });
    };

    let mut remaining: Vec<BTreeSet<NodeId>> = sets
        .iter()
        .map(|s| {
            let mut t = s.clone();
            t.remove(&root);
            t
        })
        .collect();
    let mut history: Vec<NodeId> = vec![root; remaining.len()];
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();

    while remaining.iter().any(|s| !s.is_empty()) {
        let parent = remaining
            .iter()
            .zip(&history)
            .filter(|(s, _)| !s.is_empty())
            .map(|(_, &h)| h)
            .min()
            .expect("some set is nonempty");
        let group: Vec<usize> = (0..remaining.len())
            .filter(|&i| history[i] == parent && !remaining[i].is_empty())
            .collect();
        let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
        for &i in &group {
            for &u in &remaining[i] {
                *counts.entry(u).or_default() += 1;
            }
        }
        let max = *counts.values().max().expect("group has elements");
        let child = *counts
            .iter()
            .find(|(_, &c)| c == max)
            .map(|(u, _)| u)
            .expect("max exists");
        edges.push((child, parent));
        for &i in &group {
            if remaining[i].remove(&child) {
                history[i] = child;
            }
        }
        // A freshly attached node left in a set with a different history
        // cannot come from any DRT.
        for i in 0..remaining.len() {
            if history[i] != child && remaining[i].contains(&child) {
                return Err(DrtError::NotRealizable {
                    reason: format!("node {child} occurs under two different histories"),
                });
            }
        }
    }

    let drt = Drt::from_edges(&edges, root).map_err(|e| DrtError::NotRealizable {
        reason: format!("constructed edges are not a DRT: {e}"),
    })?;

    let (table, _) = drt.enumerate_paths();
    let mut produced: Vec<BTreeSet<NodeId>> = table
        .paths()
        .iter()
        .map(|p| p.iter().copied().collect())
        .collect();
    let mut wanted: Vec<BTreeSet<NodeId>> = sets.to_vec();
    produced.sort();
    wanted.sort();
    wanted.dedup();
    if produced != wanted {
        return Err(DrtError::NotRealizable {
            reason: "path node-sets of the constructed tree do not match the input".into(),
        });
    }
    Ok(drt)
}

impl PathTable {
    pub fn paths(&self) -> &[Vec<NodeId>] {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// `z(c, l)`: the node at depth `l` (0-based) along path `c`.
    pub fn node_at(&self, path: usize, depth: usize) -> NodeId {
        self.paths[path][depth]
    }

    /// `z^{-1}(k)`: every `(path, depth)` pair locating node `k`.
    pub fn locations(&self, node: NodeId) -> &[(usize, usize)] {
        self.locator_inverse
            .get(&node)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Indices of the paths passing through `node`.
    pub fn paths_through(&self, node: NodeId) -> Vec<usize> {
        self.locations(node).iter().map(|&(c, _)| c).collect()
    }

    pub fn path_len(&self, path: usize) -> usize {
        self.paths[path].len()
    }

    /// Common path length if all paths have one.
    pub fn uniform_depth(&self) -> Option<usize> {
        let j = self.paths[0].len();
        self.paths.iter().all(|p| p.len() == j).then_some(j)
    }
}

impl NodeBijection {
    pub fn identity(n: usize) -> Self {
        let ids: Vec<NodeId> = (1..=n).collect();
        NodeBijection {
            forward: ids.clone(),
            backward: ids,
        }
    }

    pub fn map(&self, v: NodeId) -> NodeId {
        self.forward[v - 1]
    }

    pub fn unmap(&self, v: NodeId) -> NodeId {
        self.backward[v - 1]
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// `other ∘ self` (apply `self` first).
    pub fn compose(&self, other: &NodeBijection) -> NodeBijection {
        let forward: Vec<NodeId> = (1..=self.len()).map(|v| other.map(self.map(v))).collect();
        let mut backward = vec![0usize; self.len()];
        for (i, &f) in forward.iter().enumerate() {
            backward[f - 1] = i + 1;
        }
        NodeBijection { forward, backward }
    }

    /// Checks edge preservation in both directions between `a` and `b`.
    pub fn preserves_edges(&self, a: &Drt, b: &Drt) -> bool {
        if self.len() != a.node_count() || a.node_count() != b.node_count() {
            return false;
        }
        if self.map(a.root()) != b.root() {
            return false;
        }
        for v in a.nodes() {
            match a.parent(v) {
                Some(p) => {
                    if b.parent(self.map(v)) != Some(self.map(p)) {
                        return false;
                    }
                }
                None => {
                    if b.parent(self.map(v)).is_some() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Uniform random recursive tree on `1..=k` with root 1: each node picks its
/// parent uniformly among smaller ids.
pub fn random_drt<R: rand::Rng>(k: usize, rng: &mut R) -> Drt {
    let mut parents = BTreeMap::new();
    for v in 2..=k {
        parents.insert(v, rng.gen_range(1..v));
    }
    Drt::build(&parents, 1).expect("random recursive tree is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parents(pairs: &[(usize, usize)]) -> BTreeMap<NodeId, NodeId> {
        pairs.iter().copied().collect()
    }

    /// Two-branch tree used across the suite: 1 -> {2,3}, 2 -> {4,5}, 3 -> {6,7}.
    pub(crate) fn two_branch_seven() -> Drt {
        Drt::build(
            &parents(&[(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 3)]),
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_node_tree() {
        let t = Drt::build(&BTreeMap::new(), 1).unwrap();
        let (table, size) = t.enumerate_paths();
        assert_eq!(table.paths(), &[vec![1]]);
        assert_eq!(
            size,
            SizeTriple {
                leaves: 1,
                depths: vec![1],
                nodes: 1
            }
        );
        assert_eq!(t.membership(), BTreeMap::from([(1, 1)]));
    }

    #[test]
    fn duplicate_child_edge_is_multi_root() {
        // Node 8 reachable through both 4 and 5 would need two parents.
        let edges = [
            (2, 1),
            (3, 1),
            (4, 2),
            (5, 2),
            (6, 3),
            (7, 3),
            (8, 4),
            (8, 5),
        ];
        match Drt::from_edges(&edges, 1) {
            Err(DrtError::MultiRoot { node: 8 }) => {}
            other => panic!("expected MultiRoot for node 8, got {other:?}"),
        }
    }

    #[test]
    fn root_with_parent_is_multi_root() {
        let err = Drt::build(&parents(&[(1, 2), (2, 3)]), 1).unwrap_err();
        assert!(matches!(err, DrtError::MultiRoot { node: 1 }));
    }

    #[test]
    fn two_cycle_detected() {
        // 2 and 3 parent each other; walking up never reaches the root.
        let err = Drt::build(&parents(&[(2, 3), (3, 2)]), 1).unwrap_err();
        assert!(matches!(err, DrtError::Cycle { .. }));
    }

    #[test]
    fn linear_chain_is_single_path() {
        let t = Drt::build(&parents(&[(2, 1), (3, 2), (4, 3), (5, 4)]), 1).unwrap();
        let (table, size) = t.enumerate_paths();
        assert_eq!(table.paths(), &[vec![1, 2, 3, 4, 5]]);
        assert_eq!(size.leaves, 1);
        assert_eq!(size.depths, vec![5]);
    }

    #[test]
    fn two_branch_paths_are_lexicographic() {
        let t = two_branch_seven();
        let (table, size) = t.enumerate_paths();
        assert_eq!(
            table.paths(),
            &[vec![1, 2, 4], vec![1, 2, 5], vec![1, 3, 6], vec![1, 3, 7]]
        );
        assert_eq!(
            size,
            SizeTriple {
                leaves: 4,
                depths: vec![3, 3, 3, 3],
                nodes: 7
            }
        );
        assert_eq!(table.node_at(2, 1), 3);
        assert_eq!(table.locations(3), &[(2, 1), (3, 1)]);
    }

    #[test]
    fn membership_counts() {
        // 1 -> {2,3}, 2 -> 8, 8 -> {4,5}, 3 -> {6,7}: root has 4 leaves,
        // node 3 has 2.
        let t = Drt::build(
            &parents(&[(2, 1), (3, 1), (8, 2), (4, 8), (5, 8), (6, 3), (7, 3)]),
            1,
        )
        .unwrap();
        let m = t.membership();
        assert_eq!(m[&1], 4);
        assert_eq!(m[&3], 2);
        assert_eq!(m[&8], 2);
        for leaf in [4, 5, 6, 7] {
            assert_eq!(m[&leaf], 1);
        }
        let star = Drt::build(&parents(&[(2, 1), (3, 1), (4, 1)]), 1).unwrap();
        let ms = star.membership();
        assert_eq!(ms[&1], 3);
        assert_eq!(ms[&2], 1);
    }

    #[test]
    fn swapped_interior_nodes_are_isomorphic() {
        // Same shape with nodes 2 and 8 playing swapped roles.
        let b = Drt::build(
            &parents(&[(2, 1), (3, 1), (8, 2), (4, 8), (5, 8), (6, 3), (7, 3)]),
            1,
        )
        .unwrap();
        let c = Drt::build(
            &parents(&[(8, 1), (3, 1), (2, 8), (4, 2), (5, 2), (6, 3), (7, 3)]),
            1,
        )
        .unwrap();
        let sigma = isomorphism(&b, &c).expect("isomorphic");
        assert!(sigma.preserves_edges(&b, &c));
        assert_eq!(sigma.map(1), 1);

        // A different leaf-depth arrangement of the same size is not.
        let d = Drt::build(
            &parents(&[(2, 1), (3, 1), (4, 2), (5, 2), (8, 4), (6, 4), (7, 3)]),
            1,
        )
        .unwrap();
        let (_, size_b) = b.enumerate_paths();
        let (_, size_d) = d.enumerate_paths();
        assert_eq!(size_b, size_d);
        assert!(isomorphism(&b, &d).is_none());
    }

    #[test]
    fn identity_isomorphism() {
        let t = two_branch_seven();
        let sigma = isomorphism(&t, &t).unwrap();
        assert!(sigma.preserves_edges(&t, &t));
    }

    #[test]
    fn reconstruct_shared_deep_paths() {
        let sets: Vec<BTreeSet<NodeId>> = [
            vec![1, 2, 4, 8],
            vec![1, 2, 5, 8],
            vec![1, 3, 6],
            vec![1, 3, 7],
        ]
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect();
        let t = reconstruct_from_path_sets(&sets).unwrap();
        let b = Drt::build(
            &parents(&[(2, 1), (3, 1), (8, 2), (4, 8), (5, 8), (6, 3), (7, 3)]),
            1,
        )
        .unwrap();
        assert!(isomorphism(&t, &b).is_some());
    }

    #[test]
    fn reconstruct_rejects_cycle_collection() {
        let sets: Vec<BTreeSet<NodeId>> = [vec![1, 2, 4], vec![1, 2, 3], vec![1, 3]]
            .into_iter()
            .map(|v| v.into_iter().collect())
            .collect();
        let err = reconstruct_from_path_sets(&sets).unwrap_err();
        assert!(matches!(err, DrtError::NotRealizable { .. }));
    }

    #[test]
    fn reconstruct_single_node() {
        let sets = vec![BTreeSet::from([1])];
        let t = reconstruct_from_path_sets(&sets).unwrap();
        assert_eq!(t.node_count(), 1);
    }

    #[test]
    fn reconstruct_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.gen_range(1..=12);
            let t = random_drt(k, &mut rng);
            let (table, _) = t.enumerate_paths();
            let sets: Vec<BTreeSet<NodeId>> = table
                .paths()
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect();
            let r = reconstruct_from_path_sets(&sets).unwrap();
            assert!(
                isomorphism(&t, &r).is_some(),
                "reconstruction not isomorphic for parents {:?}",
                t.parent_map()
            );
        }
    }

    #[test]
    fn reconstruct_exact_when_branching() {
        // Every internal node with >= 2 children forces the exact tree back.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 60 {
            let k = rng.gen_range(1..=12);
            let t = random_drt(k, &mut rng);
            let branching = t
                .nodes()
                .all(|v| t.is_leaf(v) || t.children(v).len() >= 2);
            if !branching {
                continue;
            }
            checked += 1;
            let (table, _) = t.enumerate_paths();
            let sets: Vec<BTreeSet<NodeId>> = table
                .paths()
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect();
            let r = reconstruct_from_path_sets(&sets).unwrap();
            assert_eq!(r.parent_map(), t.parent_map());
            assert_eq!(r.root(), t.root());
        }
    }

    #[test]
    fn membership_conserved_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.gen_range(1..=12);
            let t = random_drt(k, &mut rng);
            let m = t.membership();
            let (table, size) = t.enumerate_paths();
            let leaf_sum: usize = t.nodes().filter(|&v| t.is_leaf(v)).map(|v| m[&v]).sum();
            assert_eq!(leaf_sum, size.leaves);
            assert_eq!(m[&t.root()], size.leaves);
            for path in table.paths() {
                for w in path.windows(2) {
                    assert!(m[&w[0]] >= m[&w[1]]);
                }
            }
        }
    }

    #[test]
    fn isomorphism_is_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let k = rng.gen_range(1..=9);
            let a = random_drt(k, &mut rng);
            // Relabel a by a random permutation to build an isomorphic copy.
            let mut perm: Vec<NodeId> = (1..=k).collect();
            for i in (1..k).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let edges: Vec<(NodeId, NodeId)> = a
                .parent_map()
                .iter()
                .map(|(&c, &p)| (perm[c - 1], perm[p - 1]))
                .collect();
            let b = Drt::from_edges(&edges, perm[a.root() - 1]).unwrap();
            let c = random_drt(k, &mut rng);

            let id = isomorphism(&a, &a).unwrap();
            assert!(id.preserves_edges(&a, &a));
            let ab = isomorphism(&a, &b).expect("relabeled copy is isomorphic");
            let ba = isomorphism(&b, &a).unwrap();
            assert!(ab.preserves_edges(&a, &b));
            assert!(ba.preserves_edges(&b, &a));
            if let (Some(bc), Some(ac)) = (isomorphism(&b, &c), isomorphism(&a, &c)) {
                assert!(bc.preserves_edges(&b, &c));
                assert!(ab.compose(&bc).preserves_edges(&a, &c));
                assert!(ac.preserves_edges(&a, &c));
            }
        }
    }
}
