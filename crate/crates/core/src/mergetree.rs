//! Full binary merge trees over superpixels.
//!
//! Node ids are laid out as: leaves `0..n` in ascending superpixel-label
//! order, then internal nodes in merge order, so the root is always the last
//! node and every child id is smaller than its parent id. The clique at node
//! `i` is the merge of its two children; leaf cliques carry `y = 1`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{region_adjacency, BoundaryStats, GridImage, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub leaf_label: Option<u32>,
}

/// A merge decision unit: node `node` together with the edges to its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clique {
    pub node: usize,
    pub children: Option<[usize; 2]>,
}

impl Clique {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Ordered chain of non-leaf cliques, each entry the parent of the previous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliquePath(pub Vec<usize>);

impl CliquePath {
    pub fn cliques(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTree {
    n_leaves: usize,
    nodes: Vec<Node>,
    label_to_leaf: HashMap<u32, usize>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    parent: Option<usize>,
    children: Vec<usize>,
    leaf_label: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    n_leaves: usize,
    nodes: Vec<NodeRecord>,
}

impl MergeTree {
    /// Build from a leaf label list and the merge sequence; merge `k` creates
    /// node `n + k`.
    pub fn from_merges(leaf_labels: &[u32], merges: &[[usize; 2]]) -> Result<Self> {
        let n = leaf_labels.len();
        let mut nodes: Vec<Node> = leaf_labels
            .iter()
            .enumerate()
            .map(|(id, &l)| Node {
                id,
                parent: None,
                children: None,
                leaf_label: Some(l),
            })
            .collect();
        for (k, &[a, b]) in merges.iter().enumerate() {
            let id = n + k;
            for c in [a, b] {
                if c >= id || nodes[c].parent.is_some() || a == b {
                    return Err(Error::MalformedTree(format!(
                        "merge {k} uses invalid child {c}"
                    )));
                }
                nodes[c].parent = Some(id);
            }
            nodes.push(Node {
                id,
                parent: None,
                children: Some([a, b]),
                leaf_label: None,
            });
        }
        Self::from_nodes(n, nodes)
    }

    /// Validate and wrap a node list.
    pub fn from_nodes(n_leaves: usize, nodes: Vec<Node>) -> Result<Self> {
        let bad = |msg: String| Err(Error::MalformedTree(msg));
        if n_leaves == 0 {
            return bad("no leaves".into());
        }
        if nodes.len() != 2 * n_leaves - 1 {
            return bad(format!(
                "{} nodes for {n_leaves} leaves, expected {}",
                nodes.len(),
                2 * n_leaves - 1
            ));
        }
        let mut label_to_leaf = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at position {i} has id {}", node.id));
            }
            let is_leaf = i < n_leaves;
            match (is_leaf, node.children, node.leaf_label) {
                (true, None, Some(l)) => {
                    if label_to_leaf.insert(l, i).is_some() {
                        return bad(format!("duplicate leaf label {l}"));
                    }
                }
                (false, Some(ch), None) => {
                    for c in ch {
                        if c >= i || nodes[c].parent != Some(i) {
                            return bad(format!("node {i} has inconsistent child {c}"));
                        }
                    }
                    if ch[0] == ch[1] {
                        return bad(format!("node {i} has duplicate children"));
                    }
                }
                _ => return bad(format!("node {i} has the wrong leaf/internal shape")),
            }
            match node.parent {
                None if i + 1 != nodes.len() => {
                    return bad(format!("node {i} has no parent but is not the root"))
                }
                Some(p) if p >= nodes.len() || nodes[p].children.is_none_or(|c| !c.contains(&i)) => {
                    return bad(format!("node {i} has inconsistent parent {p}"))
                }
                _ => {}
            }
        }
        Ok(MergeTree {
            n_leaves,
            nodes,
            label_to_leaf,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: usize) -> Option<[usize; 2]> {
        self.nodes[id].children
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        id < self.n_leaves
    }

    pub fn clique(&self, id: usize) -> Clique {
        Clique {
            node: id,
            children: self.nodes[id].children,
        }
    }

    /// Ids of the non-leaf cliques, bottom-up.
    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.n_leaves..self.nodes.len()
    }

    pub fn leaf_for_label(&self, label: u32) -> Option<usize> {
        self.label_to_leaf.get(&label).copied()
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.parent(id), |&p| self.parent(p))
    }

    /// `id` and all its descendants (pre-order).
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            out.push(v);
            if let Some([a, b]) = self.children(v) {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    pub fn is_ancestor(&self, anc: usize, id: usize) -> bool {
        self.ancestors(id).any(|a| a == anc)
    }

    /// Leaves of each node's subtree, as a contiguous range in the returned
    /// leaf order.
    pub fn leaf_intervals(&self) -> (Vec<usize>, Vec<std::ops::Range<usize>>) {
        let mut order = Vec::with_capacity(self.n_leaves);
        let mut ranges = vec![0..0; self.len()];
        // iterative post-order
        let mut stack = vec![(self.root(), false)];
        let mut start = vec![0usize; self.len()];
        while let Some((v, done)) = stack.pop() {
            match (self.children(v), done) {
                (None, _) => {
                    ranges[v] = order.len()..order.len() + 1;
                    order.push(v);
                }
                (Some([a, b]), false) => {
                    start[v] = order.len();
                    stack.push((v, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                (Some(_), true) => ranges[v] = start[v]..order.len(),
            }
        }
        (order, ranges)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = TreeRecord {
            n_leaves: self.n_leaves,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    parent: n.parent,
                    children: n.children.map(|c| c.to_vec()).unwrap_or_default(),
                    leaf_label: n.leaf_label,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: TreeRecord = serde_json::from_str(s)?;
        let nodes = rec
            .nodes
            .into_iter()
            .map(|n| {
                let children = match n.children.as_slice() {
                    [] => None,
                    &[a, b] => Some([a, b]),
                    _ => {
                        return Err(Error::MalformedTree(format!(
                            "node {} has {} children",
                            n.id,
                            n.children.len()
                        )))
                    }
                };
                Ok(Node {
                    id: n.id,
                    parent: n.parent,
                    children,
                    leaf_label: n.leaf_label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(rec.n_leaves, nodes)
    }
}

/// Voxels of every tree node as contiguous runs of one voxel array, with
/// O(1) membership tests.
#[derive(Debug, Clone)]
pub struct RegionLayout {
    /// position of each voxel's leaf in the tree's leaf order
    leaf_pos: Vec<usize>,
    leaf_ranges: Vec<std::ops::Range<usize>>,
    voxels: Vec<usize>,
    voxel_ranges: Vec<std::ops::Range<usize>>,
}

impl RegionLayout {
    pub fn new(tree: &MergeTree, sp: &LabelMap) -> Result<Self> {
        let (order, leaf_ranges) = tree.leaf_intervals();
        let mut pos_of_leaf = vec![0usize; tree.n_leaves()];
        for (p, &leaf) in order.iter().enumerate() {
            pos_of_leaf[leaf] = p;
        }
        let leaf_pos = sp
            .labels()
            .iter()
            .map(|&l| {
                tree.leaf_for_label(l)
                    .map(|leaf| pos_of_leaf[leaf])
                    .ok_or(Error::UnknownLabel(l))
            })
            .collect::<Result<Vec<_>>>()?;
        // counting sort of voxels by leaf position
        let mut offsets = vec![0usize; order.len() + 1];
        for &p in &leaf_pos {
            offsets[p + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let mut fill = offsets.clone();
        let mut voxels = vec![0usize; leaf_pos.len()];
        for (v, &p) in leaf_pos.iter().enumerate() {
            voxels[fill[p]] = v;
            fill[p] += 1;
        }
        let voxel_ranges = leaf_ranges
            .iter()
            .map(|r| offsets[r.start]..offsets[r.end])
            .collect();
        Ok(RegionLayout {
            leaf_pos,
            leaf_ranges,
            voxels,
            voxel_ranges,
        })
    }

    #[inline]
    pub fn contains(&self, node: usize, voxel: usize) -> bool {
        self.leaf_ranges[node].contains(&self.leaf_pos[voxel])
    }

    pub fn voxels(&self, node: usize) -> &[usize] {
        &self.voxels[self.voxel_ranges[node].clone()]
    }

    pub fn size(&self, node: usize) -> usize {
        self.voxel_ranges[node].len()
    }
}

/// Merge tree together with the saliency at which each internal node formed
/// (`+inf` for forced merges of disconnected components).
#[derive(Debug, Clone)]
pub struct Agglomeration {
    pub tree: MergeTree,
    pub saliency: Vec<f64>,
}

impl Agglomeration {
    pub fn saliency_of(&self, node: usize) -> Option<f64> {
        node.checked_sub(self.tree.n_leaves())
            .and_then(|k| self.saliency.get(k).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    saliency: f64,
    a: usize,
    b: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // min-heap on (saliency, a, b) with a < b
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .saliency
            .total_cmp(&self.saliency)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy agglomeration from a set of leaf labels and pairwise boundary
/// statistics. Region pairs are keyed by node id, so ties on saliency go to
/// the smaller `(min id, max id)` pair.
pub fn agglomerate(
    leaf_labels: &[u32],
    boundaries: impl IntoIterator<Item = ((u32, u32), BoundaryStats)>,
) -> Result<Agglomeration> {
    let n = leaf_labels.len();
    if n == 0 {
        return Err(Error::EmptySuperpixels);
    }
    let index: HashMap<u32, usize> = leaf_labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut nbrs: Vec<BTreeMap<usize, BoundaryStats>> = vec![BTreeMap::new(); 2 * n - 1];
    for ((la, lb), stats) in boundaries {
        let (Some(&a), Some(&b)) = (index.get(&la), index.get(&lb)) else {
            return Err(Error::UnknownLabel(if index.contains_key(&la) { lb } else { la }));
        };
        if a == b {
            continue;
        }
        nbrs[a].entry(b).or_default().merge(&stats);
        nbrs[b].entry(a).or_default().merge(&stats);
    }
    let mut heap = BinaryHeap::new();
    for (a, m) in nbrs.iter().enumerate().take(n) {
        for (&b, s) in m.range(a + 1..) {
            heap.push(Candidate {
                saliency: s.mean(),
                a,
                b,
            });
        }
    }
    let mut active = vec![true; n];
    active.reserve(n - 1);
    let mut merges = Vec::with_capacity(n - 1);
    let mut saliency = Vec::with_capacity(n - 1);
    while let Some(Candidate { saliency: s, a, b }) = heap.pop() {
        if !active[a] || !active[b] {
            continue;
        }
        let id = n + merges.len();
        active[a] = false;
        active[b] = false;
        active.push(true);
        merges.push([a, b]);
        saliency.push(s);
        let mut joined = std::mem::take(&mut nbrs[a]);
        for (k, st) in std::mem::take(&mut nbrs[b]) {
            joined.entry(k).or_default().merge(&st);
        }
        joined.remove(&a);
        joined.remove(&b);
        for (&k, st) in &joined {
            nbrs[k].remove(&a);
            nbrs[k].remove(&b);
            nbrs[k].insert(id, *st);
            heap.push(Candidate {
                saliency: st.mean(),
                a: k,
                b: id,
            });
        }
        nbrs[id] = joined;
    }
    // disconnected adjacency graph: fold the remaining components together in
    // order of their smallest superpixel label
    let mut min_leaf: Vec<usize> = (0..n).collect();
    for &[a, b] in &merges {
        min_leaf.push(min_leaf[a].min(min_leaf[b]));
    }
    let mut roots: Vec<usize> = (0..active.len()).filter(|&i| active[i]).collect();
    roots.sort_by_key(|&r| min_leaf[r]);
    if let Some((&first, rest)) = roots.split_first() {
        let mut acc = first;
        for &r in rest {
            merges.push([acc, r]);
            saliency.push(f64::INFINITY);
            acc = n + merges.len() - 1;
        }
    }
    Ok(Agglomeration {
        tree: MergeTree::from_merges(leaf_labels, &merges)?,
        saliency,
    })
}

/// Build the merge tree of a superpixel map by repeatedly merging the
/// adjacent pair with the lowest mean boundary confidence.
pub fn build_merge_tree(sp: &LabelMap, conf: &GridImage) -> Result<MergeTree> {
    Ok(build_agglomeration(sp, conf)?.tree)
}

pub fn build_agglomeration(sp: &LabelMap, conf: &GridImage) -> Result<Agglomeration> {
    if sp.labels().is_empty() {
        return Err(Error::EmptySuperpixels);
    }
    let adj = region_adjacency(sp, conf)?;
    let labels = sp.distinct();
    agglomerate(&labels, adj.iter().map(|(&k, b)| (k, b.stats)))
}

/// For every non-leaf clique, the chain of up to `len` cliques towards the
/// root. Chains near the root are shorter; nested chains are all kept.
pub fn enumerate_paths(tree: &MergeTree, len: usize) -> Vec<CliquePath> {
    tree.internal_nodes()
        .map(|i| {
            let chain = std::iter::once(i)
                .chain(tree.ancestors(i))
                .take(len)
                .collect();
            CliquePath(chain)
        })
        .collect()
}

/// Region consistency: every leaf-to-root node path holds exactly one `z = 1`.
pub fn check_region_consistency(tree: &MergeTree, z: &[bool]) -> Result<()> {
    if z.len() != tree.len() {
        return Err(Error::DimMismatch {
            expected: tree.len(),
            found: z.len(),
        });
    }
    // count of selected nodes on the path from the root down to each node
    let mut above = vec![0u32; tree.len()];
    for i in (0..tree.len()).rev() {
        let from_parent = tree.parent(i).map_or(0, |p| above[p]);
        above[i] = from_parent + z[i] as u32;
        if above[i] > 1 {
            return Err(Error::InconsistentZ {
                leaf: tree.subtree(i).into_iter().find(|&v| tree.is_leaf(v)).unwrap_or(i),
            });
        }
    }
    match (0..tree.n_leaves()).find(|&l| above[l] != 1) {
        Some(leaf) => Err(Error::InconsistentZ { leaf }),
        None => Ok(()),
    }
}

/// `y_i >= y_parent(i)` for every non-root clique.
pub fn check_merge_consistency(tree: &MergeTree, y: &[bool]) -> bool {
    y.len() == tree.len()
        && (0..tree.len()).all(|i| tree.parent(i).is_none_or(|p| y[i] >= y[p]))
}

/// Merge consistency restricted to labelled cliques: no labelled clique may
/// carry a smaller label than any labelled ancestor.
pub fn check_partial_merge_consistency(tree: &MergeTree, y: &[Option<bool>]) -> bool {
    if y.len() != tree.len() {
        return false;
    }
    // largest label among labelled strict ancestors, walking top-down
    let mut max_above: Vec<Option<bool>> = vec![None; tree.len()];
    for i in (0..tree.len()).rev() {
        if let Some(p) = tree.parent(i) {
            max_above[i] = match (max_above[p], y[p]) {
                (Some(a), Some(b)) => Some(a || b),
                (a, b) => a.or(b),
            };
        }
        if let (Some(mine), Some(above)) = (y[i], max_above[i]) {
            if !mine && above {
                return false;
            }
        }
    }
    true
}

/// `y = 1` at selected nodes and their descendants, `0` elsewhere.
pub fn z_to_y(tree: &MergeTree, z: &[bool]) -> Result<Vec<bool>> {
    check_region_consistency(tree, z)?;
    let mut y = vec![false; tree.len()];
    for i in (0..tree.len()).rev() {
        y[i] = z[i] || tree.parent(i).is_some_and(|p| y[p]);
    }
    Ok(y)
}

/// `z = 1` exactly where `y = 1` and the node is the root or its parent has `y = 0`.
pub fn y_to_z(tree: &MergeTree, y: &[bool]) -> Result<Vec<bool>> {
    if y.len() != tree.len() {
        return Err(Error::DimMismatch {
            expected: tree.len(),
            found: y.len(),
        });
    }
    if let Some(leaf) = (0..tree.n_leaves()).find(|&l| !y[l]) {
        return Err(Error::InconsistentY { node: leaf });
    }
    if let Some(node) = (0..tree.len()).find(|&i| tree.parent(i).is_some_and(|p| !y[i] && y[p])) {
        return Err(Error::InconsistentY { node });
    }
    Ok((0..tree.len())
        .map(|i| y[i] && tree.parent(i).is_none_or(|p| !y[p]))
        .collect())
}
