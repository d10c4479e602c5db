//! Static draft-tree topologies and the layer-by-layer retrieval that fills
//! them from the adjacency matrix.
//!
//! A tree is stored as a list of nodes in topological order. Node 0 is the
//! root (the last confirmed token); every other node names its parent and the
//! candidate rank it takes from the parent's matrix row.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::RecycleMatrix;
use crate::vocab::TokenId;

const DEFAULT_TREE: &str = include_str!("../data/default_tree.txt");

/// One line of a tree file. The root has neither parent nor rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRecord {
    pub parent: Option<usize>,
    pub rank: Option<usize>,
}

impl NodeRecord {
    pub const ROOT: NodeRecord = NodeRecord {
        parent: None,
        rank: None,
    };

    pub fn child(parent: usize, rank: usize) -> Self {
        NodeRecord {
            parent: Some(parent),
            rank: Some(rank),
        }
    }
}

/// Checks every structural invariant of a tree and that all ranks are `< k`.
/// The first violation is reported with the offending node index.
pub fn validate_tree(records: &[NodeRecord], k: usize) -> Result<()> {
    check_structure(records)?;
    for (i, r) in records.iter().enumerate().skip(1) {
        let rank = r.rank.unwrap_or_default();
        if rank >= k {
            return Err(Error::tree(i, format!("rank {rank} is not below k = {k}")));
        }
    }
    Ok(())
}

fn check_structure(records: &[NodeRecord]) -> Result<()> {
    let Some(root) = records.first() else {
        return Err(Error::tree(0, "tree has no root"));
    };
    if root.parent.is_some() || root.rank.is_some() {
        return Err(Error::tree(0, "root must have parent -1 and rank -1"));
    }
    let mut last_rank: HashMap<usize, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate().skip(1) {
        let (Some(parent), Some(rank)) = (r.parent, r.rank) else {
            return Err(Error::tree(i, "only the root may omit parent or rank"));
        };
        if parent >= i {
            return Err(Error::tree(
                i,
                format!("not layer-ordered: parent {parent} is not before node {i}"),
            ));
        }
        if let Some(&prev) = last_rank.get(&parent) {
            if rank <= prev {
                return Err(Error::tree(
                    i,
                    format!(
                        "sibling ranks under parent {parent} must strictly increase ({prev} then {rank})"
                    ),
                ));
            }
        }
        last_rank.insert(parent, rank);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeSpec {
    records: Vec<NodeRecord>,
    depths: Vec<usize>,
    children: Vec<Vec<usize>>,
    layers: Vec<Vec<usize>>,
}

impl TreeSpec {
    pub fn from_records(records: Vec<NodeRecord>) -> Result<Self> {
        check_structure(&records)?;
        let n = records.len();
        let mut depths = vec![0; n];
        let mut children = vec![Vec::new(); n];
        for (i, r) in records.iter().enumerate().skip(1) {
            let p = r.parent.expect("checked");
            depths[i] = depths[p] + 1;
            children[p].push(i);
        }
        let depth = depths.iter().copied().max().unwrap_or(0);
        let mut layers = vec![Vec::new(); depth + 1];
        for (i, &d) in depths.iter().enumerate() {
            layers[d].push(i);
        }
        Ok(Self {
            records,
            depths,
            children,
            layers,
        })
    }

    /// Builds a tree from `(parent, rank)` pairs for nodes `1..`.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Self> {
        let mut records = vec![NodeRecord::ROOT];
        records.extend(edges.iter().map(|&(p, r)| NodeRecord::child(p, r)));
        Self::from_records(records)
    }

    pub fn root_only() -> Self {
        Self::from_records(vec![NodeRecord::ROOT]).expect("valid")
    }

    /// A single rank-0 path with `len` draft nodes below the root.
    pub fn chain(len: usize) -> Self {
        let edges: Vec<_> = (0..len).map(|i| (i, 0)).collect();
        Self::from_edges(&edges).expect("valid")
    }

    /// The complete `branch`-ary tree of the given draft depth, in
    /// breadth-first order.
    pub fn balanced(branch: usize, depth: usize) -> Self {
        let mut paths = vec![Vec::new()];
        let mut frontier = vec![Vec::new()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(frontier.len() * branch);
            for p in &frontier {
                for r in 0..branch {
                    let mut c: Vec<usize> = p.clone();
                    c.push(r);
                    next.push(c);
                }
            }
            paths.extend(next.iter().cloned());
            frontier = next;
        }
        Self::from_paths(paths).expect("balanced tree is valid")
    }

    /// Builds a breadth-first tree from an ancestor-closed set of rank paths.
    /// The empty path is the root and is always included.
    pub fn from_paths(paths: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut set: BTreeSet<(usize, Vec<usize>)> =
            paths.into_iter().map(|p| (p.len(), p)).collect();
        set.insert((0, Vec::new()));
        let mut index: HashMap<Vec<usize>, usize> = HashMap::with_capacity(set.len());
        let mut records = Vec::with_capacity(set.len());
        for (_, path) in set {
            let record = match path.split_last() {
                None => NodeRecord::ROOT,
                Some((&rank, prefix)) => {
                    let Some(&parent) = index.get(prefix) else {
                        return Err(Error::tree(
                            records.len(),
                            format!("path {path:?} has no parent in the set"),
                        ));
                    };
                    NodeRecord::child(parent, rank)
                }
            };
            index.insert(path, records.len());
            records.push(record);
        }
        Self::from_records(records)
    }

    /// The tree shipped with the crate: 81 nodes over 5 draft layers with
    /// ranks below 8.
    pub fn default_tree() -> Self {
        Self::parse(DEFAULT_TREE).expect("shipped tree parses")
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of draft layers below the root.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn records(&self) -> &[NodeRecord] {
        &self.records
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.records[i].parent
    }

    pub fn rank(&self, i: usize) -> Option<usize> {
        self.records[i].rank
    }

    pub fn node_depth(&self, i: usize) -> usize {
        self.depths[i]
    }

    /// Children of `i` in ascending rank order.
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn max_rank(&self) -> Option<usize> {
        self.records.iter().filter_map(|r| r.rank).max()
    }

    pub fn check_ranks(&self, k: usize) -> Result<()> {
        validate_tree(&self.records, k)
    }

    /// Ranks taken along the root-to-node path.
    pub fn rank_path(&self, mut i: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.depths[i]);
        while let Some(p) = self.records[i].parent {
            path.push(self.records[i].rank.expect("non-root"));
            i = p;
        }
        path.reverse();
        path
    }

    /// Node indices from the root down to `i`, inclusive.
    pub fn node_path(&self, mut i: usize) -> Vec<usize> {
        let mut path = vec![i];
        while let Some(p) = self.records[i].parent {
            path.push(p);
            i = p;
        }
        path.reverse();
        path
    }

    /// Keeps the nodes flagged in `keep` (which must be ancestor-closed),
    /// preserving their relative order and ranks.
    pub fn subtree(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.len() {
            return Err(Error::invalid(format!(
                "keep mask has {} entries for {} nodes",
                keep.len(),
                self.len()
            )));
        }
        let mut remap = vec![usize::MAX; self.len()];
        let mut records = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if !(keep[i] || i == 0) {
                continue;
            }
            let record = match r.parent {
                None => NodeRecord::ROOT,
                Some(p) if remap[p] != usize::MAX => NodeRecord {
                    parent: Some(remap[p]),
                    rank: r.rank,
                },
                Some(p) => {
                    return Err(Error::tree(i, format!("kept node whose parent {p} was dropped")))
                }
            };
            remap[i] = records.len();
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 3 {
                return Err(Error::format(
                    "tree record",
                    format!("line {}: expected `index parent rank`, got {line:?}", lineno + 1),
                ));
            }
            let num = |s: &str, field: &'static str| -> Result<i64> {
                s.parse::<i64>().map_err(|_| {
                    Error::format(field, format!("line {}: {s:?} is not an integer", lineno + 1))
                })
            };
            let index = num(fields[0], "index")?;
            let parent = num(fields[1], "parent")?;
            let rank = num(fields[2], "rank")?;
            if index != records.len() as i64 {
                return Err(Error::format(
                    "index",
                    format!("line {}: expected index {}, got {index}", lineno + 1, records.len()),
                ));
            }
            let opt = |v: i64, field: &'static str| -> Result<Option<usize>> {
                match v {
                    -1 => Ok(None),
                    v if v >= 0 => Ok(Some(v as usize)),
                    v => Err(Error::format(field, format!("line {}: {v} < -1", lineno + 1))),
                }
            };
            records.push(NodeRecord {
                parent: opt(parent, "parent")?,
                rank: opt(rank, "rank")?,
            });
        }
        Self::from_records(records)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# index parent rank\n");
        for (i, r) in self.records.iter().enumerate() {
            let p = r.parent.map_or(-1, |p| p as i64);
            let k = r.rank.map_or(-1, |k| k as i64);
            writeln!(out, "{i} {p} {k}").unwrap();
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    /// A tree of exactly `nodes` nodes and exactly `depth` draft layers
    /// derived from `self`: the rank-0 chain to `depth` first, then this
    /// tree's nodes in order (those that fit the depth), then further nodes
    /// by a rank prior that favours low ranks and shallow positions.
    ///
    /// Growing `nodes` at a fixed depth always yields a superset.
    pub fn resized(&self, nodes: usize, depth: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if nodes < depth + 1 {
            return Err(Error::invalid(format!(
                "{nodes} nodes cannot reach depth {depth}"
            )));
        }
        let mut chosen: Vec<Vec<usize>> = vec![Vec::new()];
        let mut seen: BTreeSet<Vec<usize>> = chosen.iter().cloned().collect();
        let mut push = |path: Vec<usize>, chosen: &mut Vec<Vec<usize>>| {
            if chosen.len() < nodes && seen.insert(path.clone()) {
                chosen.push(path);
            }
        };
        for d in 1..=depth {
            push(vec![0; d], &mut chosen);
        }
        for i in 1..self.len() {
            let path = self.rank_path(i);
            if path.len() <= depth && path.iter().all(|&r| r < k) {
                // Ancestors of a base node always precede it.
                push(path, &mut chosen);
            }
        }
        let mut heap = BinaryHeap::new();
        heap.push(PriorPath::new(Vec::new()));
        while chosen.len() < nodes {
            let Some(PriorPath { path, .. }) = heap.pop() else {
                return Err(Error::invalid(format!(
                    "depth {depth} with k = {k} holds fewer than {nodes} nodes"
                )));
            };
            if path.len() < depth {
                for r in 0..k {
                    let mut c = path.clone();
                    c.push(r);
                    heap.push(PriorPath::new(c));
                }
            }
            push(path, &mut chosen);
        }
        Self::from_paths(chosen)
    }
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self::default_tree()
    }
}

/// Best-first ordering over rank paths: higher prior first, then
/// lexicographically smaller path.
#[derive(PartialEq)]
struct PriorPath {
    log_prior: f64,
    path: Vec<usize>,
}

impl PriorPath {
    fn new(path: Vec<usize>) -> Self {
        let log_prior = path.iter().map(|&r| -((r + 2) as f64).ln()).sum();
        Self { log_prior, path }
    }
}

impl Eq for PriorPath {}

impl PartialOrd for PriorPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_prior
            .total_cmp(&other.log_prior)
            .then_with(|| other.path.cmp(&self.path))
    }
}

/// Draft tokens laid out in tree order, ready for one batched evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergedSequence<'t> {
    spec: &'t TreeSpec,
    tokens: Vec<TokenId>,
}

impl<'t> MergedSequence<'t> {
    pub fn new(spec: &'t TreeSpec, tokens: Vec<TokenId>) -> Result<Self> {
        if tokens.len() != spec.len() {
            return Err(Error::invalid(format!(
                "{} tokens for a {}-node tree",
                tokens.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, tokens })
    }

    pub fn spec(&self) -> &'t TreeSpec {
        self.spec
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn root(&self) -> TokenId {
        self.tokens[0]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.spec.parent(i)
    }

    /// Tokens from the root down to node `i`, inclusive.
    pub fn path_tokens(&self, i: usize) -> Vec<TokenId> {
        self.spec
            .node_path(i)
            .into_iter()
            .map(|n| self.tokens[n])
            .collect()
    }
}

/// Fills `spec` from the matrix, one layer at a time, starting at `root`.
pub fn retrieve<'t>(
    m: &RecycleMatrix,
    spec: &'t TreeSpec,
    root: TokenId,
) -> Result<MergedSequence<'t>> {
    if root.index() >= m.vocab_size() {
        return Err(Error::invalid(format!("root {root} out of range")));
    }
    if let Some(r) = spec.max_rank() {
        if r >= m.k() {
            return Err(Error::invalid(format!(
                "tree uses rank {r} but matrix rows hold {} candidates",
                m.k()
            )));
        }
    }
    let mut tokens = vec![TokenId(0); spec.len()];
    tokens[0] = root;
    for layer in &spec.layers[1..] {
        for &i in layer {
            let r = spec.records[i];
            let parent_token = tokens[r.parent.expect("non-root")];
            tokens[i] = m.row_unchecked(parent_token)[r.rank.expect("non-root")];
        }
    }
    Ok(MergedSequence { spec, tokens })
}

/// Picks the highest-count non-root nodes (ties: lexicographically smaller
/// rank path first), adding missing ancestors along the way, without
/// exceeding `budget` nodes in total. Nodes that were never hit are skipped.
fn select_nodes(tree: &TreeSpec, counts: &[u64], budget: usize) -> Vec<bool> {
    let mut order: Vec<(usize, Vec<usize>)> = (1..tree.len())
        .filter(|&i| counts[i] > 0)
        .map(|i| (i, tree.rank_path(i)))
        .collect();
    order.sort_by(|(a, pa), (b, pb)| counts[*b].cmp(&counts[*a]).then_with(|| pa.cmp(pb)));
    let mut keep = vec![false; tree.len()];
    keep[0] = true;
    let mut used = 1;
    for (i, _) in order {
        if keep[i] {
            continue;
        }
        let missing: Vec<usize> = tree
            .node_path(i)
            .into_iter()
            .filter(|&n| !keep[n])
            .collect();
        if used + missing.len() <= budget {
            used += missing.len();
            for n in missing {
                keep[n] = true;
            }
        }
    }
    keep
}

/// Derives a static tree from measured node hit counts.
///
/// Starting from the complete `branch`-ary tree of the given depth, each
/// round keeps the `prune_step` most frequently accepted nodes (with their
/// ancestors) plus their children, then re-measures the smaller tree. Rounds
/// stop once the tree fits `target_nodes` or stops shrinking; the result is
/// the best `target_nodes` hit nodes of the last measured tree.
///
/// `measure` returns one hit count per node of the tree it is given.
pub fn calibrate_tree<F>(
    branch: usize,
    depth: usize,
    target_nodes: usize,
    prune_step: usize,
    mut measure: F,
) -> Result<TreeSpec>
where
    F: FnMut(&TreeSpec) -> Result<Vec<u64>>,
{
    if branch == 0 || prune_step == 0 || target_nodes == 0 {
        return Err(Error::invalid(
            "branch, prune_step and target_nodes must all be >= 1",
        ));
    }
    let mut tree = TreeSpec::balanced(branch, depth);
    let mut counts = measure_checked(&tree, &mut measure)?;
    while tree.len() > target_nodes {
        let selected = select_nodes(&tree, &counts, prune_step + 1);
        let mut keep = selected.clone();
        for (i, &sel) in selected.iter().enumerate() {
            if sel {
                for &c in tree.children(i) {
                    keep[c] = true;
                }
            }
        }
        if keep.iter().filter(|&&k| k).count() == tree.len() {
            break;
        }
        tree = tree.subtree(&keep)?;
        counts = measure_checked(&tree, &mut measure)?;
    }
    tree.subtree(&select_nodes(&tree, &counts, target_nodes))
}

/// One cut of the complete tree down to `target_nodes` using a single
/// measurement. Baseline for [`calibrate_tree`].
pub fn single_cut_tree(
    branch: usize,
    depth: usize,
    target_nodes: usize,
    counts: &[u64],
) -> Result<TreeSpec> {
    let tree = TreeSpec::balanced(branch, depth);
    if counts.len() != tree.len() {
        return Err(Error::invalid(format!(
            "{} hit counts for a {}-node tree",
            counts.len(),
            tree.len()
        )));
    }
    tree.subtree(&select_nodes(&tree, counts, target_nodes))
}

fn measure_checked<F>(tree: &TreeSpec, measure: &mut F) -> Result<Vec<u64>>
where
    F: FnMut(&TreeSpec) -> Result<Vec<u64>>,
{
    let counts = measure(tree)?;
    if counts.len() != tree.len() {
        return Err(Error::invalid(format!(
            "{} hit counts for a {}-node tree",
            counts.len(),
            tree.len()
        )));
    }
    Ok(counts)
}
