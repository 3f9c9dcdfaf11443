//! Read-only analyses of grown trees.
//!
//! All passes exploit `parent(v) < v`: a forward scan over labels sees every
//! parent before its children, a backward scan every child before its parent.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringe::{FringeKey, FringeOutcome, FringeTree, Interner};
use crate::tree::Tree;

/// Depth of every vertex, indexed by label (slot 0 unused).
pub fn depths(tree: &Tree) -> Vec<u32> {
    let n = tree.len() as usize;
    let mut depth = vec![0u32; n + 1];
    for v in 2..=n {
        depth[v] = depth[tree.parent_raw(v as u64) as usize] + 1;
    }
    depth
}

pub fn depth_of(tree: &Tree, v: u64) -> Result<u64> {
    tree.check_label(v)?;
    let mut d = 0;
    let mut u = v;
    while let Some(p) = tree.parent(u) {
        u = p;
        d += 1;
    }
    Ok(d)
}

pub fn height(tree: &Tree) -> u64 {
    depths(tree).into_iter().max().unwrap_or(0) as u64
}

/// `(v, parent(v), ..., 1)`.
pub fn ancestor_chain(tree: &Tree, v: u64) -> Result<Vec<u64>> {
    tree.check_label(v)?;
    let mut chain = vec![v];
    let mut u = v;
    while let Some(p) = tree.parent(u) {
        chain.push(p);
        u = p;
    }
    Ok(chain)
}

/// Number of vertices of each degree; the degree of `v` counts its children
/// plus the edge to its parent.
pub fn degree_histogram(tree: &Tree) -> BTreeMap<u64, u64> {
    let n = tree.len() as usize;
    let mut children = vec![0u32; n + 1];
    for p in tree.parents() {
        children[p as usize] += 1;
    }
    let mut hist = BTreeMap::new();
    for (v, &c) in children.iter().enumerate().skip(1) {
        *hist.entry(c as u64 + u64::from(v != 1)).or_insert(0) += 1;
    }
    hist
}

/// Compressed child lists.
pub struct Children {
    offsets: Vec<usize>,
    list: Vec<u64>,
}

impl Children {
    pub fn new(tree: &Tree) -> Self {
        let n = tree.len() as usize;
        let mut offsets = vec![0usize; n + 2];
        for p in tree.parents() {
            offsets[p as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let mut fill = offsets.clone();
        let mut list = vec![0u64; n.saturating_sub(1)];
        for v in 2..=n as u64 {
            let p = tree.parent_raw(v) as usize;
            list[fill[p]] = v;
            fill[p] += 1;
        }
        Children { offsets, list }
    }

    #[inline]
    pub fn of(&self, v: u64) -> &[u64] {
        let v = v as usize;
        &self.list[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Number of descendants of every vertex, itself included.
pub fn subtree_sizes(tree: &Tree) -> Vec<u64> {
    let n = tree.len() as usize;
    let mut size = vec![1u64; n + 1];
    size[0] = 0;
    for v in (2..=n).rev() {
        let p = tree.parent_raw(v as u64) as usize;
        size[p] += size[v];
    }
    size
}

/// Canonical form of the subtree of `root`, leaving out the branch at `skip`.
fn collect_fringe(children: &Children, root: u64, skip: Option<u64>, cap: usize) -> FringeOutcome {
    let mut local: Vec<Vec<usize>> = vec![Vec::new()];
    let mut queue = vec![(root, 0usize)];
    let mut head = 0;
    while head < queue.len() {
        let (v, id) = queue[head];
        head += 1;
        for &c in children.of(v) {
            if Some(c) == skip {
                continue;
            }
            let cid = local.len();
            if cid >= cap {
                return FringeOutcome::Truncated;
            }
            local.push(Vec::new());
            local[id].push(cid);
            queue.push((c, cid));
        }
    }
    FringeOutcome::Tree(FringeTree::from_children(&local, 0))
}

/// The subtree of descendants of `v` in canonical form, or `Truncated` when
/// it has more than `size_cap` vertices.
pub fn fringe_at(tree: &Tree, v: u64, size_cap: usize) -> Result<FringeOutcome> {
    tree.check_label(v)?;
    check_cap(size_cap)?;
    Ok(collect_fringe(&Children::new(tree), v, None, size_cap))
}

/// The extended fringe `(f_0, ..., f_k)` at `v`: `f_0` is the fringe of `v`
/// and `f_i` is the subtree of the `i`-th ancestor with the branch towards the
/// `(i-1)`-st ancestor removed.
pub fn extended_fringe(tree: &Tree, v: u64, k: usize, size_cap: usize) -> Result<Vec<FringeOutcome>> {
    check_cap(size_cap)?;
    let chain = ancestor_chain(tree, v)?;
    if chain.len() <= k {
        return Err(Error::TooShallow {
            vertex: v,
            depth: chain.len() as u64 - 1,
            k,
        });
    }
    let children = Children::new(tree);
    Ok((0..=k)
        .map(|i| {
            let skip = (i > 0).then(|| chain[i - 1]);
            collect_fringe(&children, chain[i], skip, size_cap)
        })
        .collect())
}

/// Counts of fringe shapes over a set of vertices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FringeDistribution {
    pub counts: BTreeMap<FringeKey, u64>,
    pub total: u64,
}

impl FringeDistribution {
    pub fn from_counts(counts: BTreeMap<FringeKey, u64>) -> Self {
        let total = counts.values().sum();
        FringeDistribution { counts, total }
    }

    pub fn add(&mut self, key: FringeKey) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &FringeDistribution) {
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn frequency(&self, key: &FringeKey) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn frequencies(&self) -> BTreeMap<FringeKey, f64> {
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.total as f64))
            .collect()
    }

    /// Merges every shape larger than `max_size` into the truncated bucket.
    pub fn coarsen(&self, max_size: usize) -> FringeDistribution {
        let mut counts = BTreeMap::new();
        for (k, &c) in &self.counts {
            *counts.entry(k.clone().coarsen(max_size)).or_insert(0) += c;
        }
        FringeDistribution {
            counts,
            total: self.total,
        }
    }

    pub fn truncated_mass(&self) -> f64 {
        self.frequency(&FringeKey::Truncated)
    }

    /// `code,count,frequency` rows, truncated mass last.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "code,count,frequency")?;
        for (k, &c) in &self.counts {
            writeln!(out, "{k},{c},{}", crate::fmt_f64(c as f64 / self.total as f64))?;
        }
        out.flush()
    }
}

/// Fringe codes of every vertex whose subtree has at most `cap` vertices.
struct FringeIndex {
    interner: Interner,
    // u32::MAX marks a truncated fringe
    ids: Vec<u32>,
    sizes: Vec<u64>,
    children: Children,
}

const TRUNCATED_ID: u32 = u32::MAX;

impl FringeIndex {
    fn build(tree: &Tree, cap: usize) -> Self {
        let n = tree.len() as usize;
        let sizes = subtree_sizes(tree);
        let children = Children::new(tree);
        let mut interner = Interner::default();
        let mut ids = vec![TRUNCATED_ID; n + 1];
        let mut kid_ids = Vec::new();
        for v in (1..=n).rev() {
            if sizes[v] <= cap as u64 {
                kid_ids.clear();
                kid_ids.extend(children.of(v as u64).iter().map(|&c| ids[c as usize]));
                ids[v] = interner.wrap(&kid_ids);
            }
        }
        FringeIndex {
            interner,
            ids,
            sizes,
            children,
        }
    }

    fn key(&self, id: u32) -> FringeKey {
        if id == TRUNCATED_ID {
            FringeKey::Truncated
        } else {
            FringeKey::Shape(self.interner.code(id).to_owned())
        }
    }

    /// Code id of the subtree at `a` without the branch at child `skip`.
    fn residual(&mut self, a: u64, skip: u64, cap: usize) -> u32 {
        if self.sizes[a as usize] - self.sizes[skip as usize] > cap as u64 {
            return TRUNCATED_ID;
        }
        let kid_ids: Vec<u32> = self
            .children
            .of(a)
            .iter()
            .filter(|&&c| c != skip)
            .map(|&c| self.ids[c as usize])
            .collect();
        self.interner.wrap(&kid_ids)
    }
}

/// Empirical law of the fringe of a uniformly chosen vertex.
pub fn empirical_fringe(tree: &Tree, size_cap: usize) -> Result<FringeDistribution> {
    check_cap(size_cap)?;
    let index = FringeIndex::build(tree, size_cap);
    let mut by_id: HashMap<u32, u64> = HashMap::new();
    for &id in &index.ids[1..] {
        *by_id.entry(id).or_insert(0) += 1;
    }
    Ok(FringeDistribution::from_counts(
        by_id.into_iter().map(|(id, c)| (index.key(id), c)).collect(),
    ))
}

/// Empirical law of the extended fringe of order `k` over all vertices of
/// depth at least `k`.
pub fn empirical_extended_fringe(
    tree: &Tree,
    k: usize,
    size_cap: usize,
) -> Result<BTreeMap<Vec<FringeKey>, u64>> {
    check_cap(size_cap)?;
    let mut index = FringeIndex::build(tree, size_cap);
    let mut by_ids: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut ids = Vec::with_capacity(k + 1);
    'vertices: for v in 1..=tree.len() {
        ids.clear();
        ids.push(index.ids[v as usize]);
        let mut below = v;
        for _ in 0..k {
            let Some(a) = tree.parent(below) else {
                continue 'vertices;
            };
            ids.push(index.residual(a, below, size_cap));
            below = a;
        }
        *by_ids.entry(ids.clone()).or_insert(0) += 1;
    }
    Ok(by_ids
        .into_iter()
        .map(|(ids, c)| (ids.into_iter().map(|id| index.key(id)).collect(), c))
        .collect())
}

fn check_cap(size_cap: usize) -> Result<()> {
    if size_cap == 0 {
        Err(Error::invalid("size_cap", "must be at least 1"))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branchpoint {
    pub label: u64,
    pub depth: u64,
}

/// The subtree spanned by a set of leaves: leaf depths, branchpoints and the
/// graph metric between the leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpannedSubtree {
    pub leaves: Vec<u64>,
    /// Distinct pairwise most recent common ancestors in the order the leaf
    /// lineages merge when the edges are added youngest child first.
    pub branchpoints: Vec<Branchpoint>,
    pub leaf_depths: Vec<u64>,
    pub pairwise_distances: Vec<Vec<u64>>,
    #[serde(skip)]
    chains: Vec<Vec<u64>>,
}

impl SpannedSubtree {
    /// The first merge, which is where the ancestral lines of the leaves
    /// meet when explored youngest first.
    pub fn top_branchpoint(&self) -> Option<Branchpoint> {
        self.branchpoints.first().copied()
    }

    /// `{leaves, branchpoints: [{label, depth}], distances}` with the
    /// distance matrix flattened row-major.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "leaves": self.leaves,
            "branchpoints": self.branchpoints,
            "leaf_depths": self.leaf_depths,
            "distances": self.pairwise_distances.iter().flatten().collect::<Vec<_>>(),
        })
    }

    /// DOT rendering of the union of root paths, branchpoints boxed.
    pub fn write_dot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "digraph T {{")?;
        let mut edges = std::collections::BTreeSet::new();
        for chain in &self.chains {
            for w in chain.windows(2) {
                edges.insert((w[0], w[1]));
            }
        }
        for leaf in &self.leaves {
            writeln!(out, "  {leaf} [shape=doublecircle];")?;
        }
        for bp in &self.branchpoints {
            writeln!(
                out,
                "  {} [shape=box, label=\"{} (depth {})\"];",
                bp.label, bp.label, bp.depth
            )?;
        }
        for (c, p) in edges.iter().rev() {
            writeln!(out, "  {c} -> {p};")?;
        }
        writeln!(out, "}}")?;
        out.flush()
    }
}

/// Spanned subtree of `leaves`, computed from their ancestor chains.
///
/// Chains are strictly decreasing, so the most recent common ancestor of two
/// leaves is the largest label their chains share.
pub fn spanned_subtree(tree: &Tree, leaves: &[u64]) -> Result<SpannedSubtree> {
    let mut seen = std::collections::HashSet::new();
    for &v in leaves {
        tree.check_label(v)?;
        if !seen.insert(v) {
            return Err(Error::invalid("leaves", format!("duplicate leaf {v}")));
        }
    }
    let chains: Vec<Vec<u64>> = leaves
        .iter()
        .map(|&v| ancestor_chain(tree, v))
        .collect::<Result<_>>()?;
    let positions: Vec<HashMap<u64, usize>> = chains
        .iter()
        .map(|c| c.iter().enumerate().map(|(i, &l)| (l, i)).collect())
        .collect();
    let k = leaves.len();
    let leaf_depths: Vec<u64> = chains.iter().map(|c| c.len() as u64 - 1).collect();
    let mut dist = vec![vec![0u64; k]; k];
    let mut mrcas: BTreeMap<u64, u64> = BTreeMap::new();
    for a in 0..k {
        for b in a + 1..k {
            let (i, &label) = chains[a]
                .iter()
                .enumerate()
                .find(|(_, l)| positions[b].contains_key(l))
                .expect("chains share the root");
            let j = positions[b][&label];
            dist[a][b] = (i + j) as u64;
            dist[b][a] = dist[a][b];
            mrcas.insert(label, leaf_depths[a] - i as u64);
        }
    }
    // Adding the edges of the union of root paths youngest child first, a
    // branchpoint joins two lineages at its second child, or at its first
    // child when it is itself a leaf.
    let mut children: HashMap<u64, std::collections::BTreeSet<u64>> = HashMap::new();
    for c in &chains {
        for w in c.windows(2) {
            children.entry(w[1]).or_default().insert(w[0]);
        }
    }
    let merge_key = |label: u64| -> u64 {
        let kids = &children[&label];
        let skip = usize::from(!seen.contains(&label));
        *kids.iter().rev().nth(skip).expect("branchpoints join two lineages")
    };
    let mut branchpoints: Vec<Branchpoint> = mrcas
        .into_iter()
        .map(|(label, depth)| Branchpoint { label, depth })
        .collect();
    branchpoints.sort_by_key(|b| std::cmp::Reverse(merge_key(b.label)));
    Ok(SpannedSubtree {
        leaves: leaves.to_vec(),
        branchpoints,
        leaf_depths,
        pairwise_distances: dist,
        chains,
    })
}

/// Whether `d` satisfies the four-point condition: for every quadruple the
/// two largest of the three pair sums coincide.
pub fn four_point_condition(d: &[Vec<u64>]) -> bool {
    let k = d.len();
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                for m in 0..k {
                    let mut s = [d[i][j] + d[l][m], d[i][l] + d[j][m], d[i][m] + d[j][l]];
                    s.sort_unstable();
                    if s[1] != s[2] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Distance of every vertex to the root-to-`n` path, indexed by label.
pub fn spine_distances(tree: &Tree) -> Vec<u32> {
    let n = tree.len() as usize;
    let mut on_spine = vec![false; n + 1];
    let mut u = n as u64;
    loop {
        on_spine[u as usize] = true;
        match tree.parent(u) {
            Some(p) => u = p,
            None => break,
        }
    }
    let mut dist = vec![0u32; n + 1];
    for v in 2..=n {
        if !on_spine[v] {
            dist[v] = dist[tree.parent_raw(v as u64) as usize] + 1;
        }
    }
    dist
}

/// Largest distance from any vertex to the root-to-`n` path.
pub fn max_dist_to_spine(tree: &Tree) -> Result<u64> {
    if tree.len() < 2 {
        return Err(Error::invalid("n", "spine distance needs at least two vertices"));
    }
    Ok(spine_distances(tree)[1..].iter().copied().max().unwrap_or(0) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::schedule::MemorySchedule;
    use crate::tree::grow_tree;
    use proptest::prelude::*;
    use rand_core::RngCore;
    use std::collections::VecDeque;

    fn path3() -> Tree {
        Tree::path(3)
    }

    #[test]
    fn depth_and_height_basics() {
        let single = Tree::from_parents(&[]).unwrap();
        assert_eq!(height(&single), 0);
        assert_eq!(depth_of(&single, 1).unwrap(), 0);
        let p = path3();
        assert_eq!(depth_of(&p, 3).unwrap(), 2);
        assert_eq!(height(&p), 2);
        assert!(depth_of(&p, 4).is_err());
        assert!(depth_of(&p, 0).is_err());
    }

    #[test]
    fn chains() {
        let single = Tree::from_parents(&[]).unwrap();
        assert_eq!(ancestor_chain(&single, 1).unwrap(), vec![1]);
        assert_eq!(ancestor_chain(&path3(), 3).unwrap(), vec![3, 2, 1]);
    }

    #[test]
    fn chain_length_matches_depth() {
        let s = MemorySchedule::mesoscopic(0.5).unwrap();
        let t = grow_tree(&s, 2000, 4).unwrap();
        let d = depths(&t);
        for v in 1..=t.len() {
            let chain = ancestor_chain(&t, v).unwrap();
            assert_eq!(chain.len() as u64 - 1, d[v as usize] as u64);
            assert!(chain.windows(2).all(|w| w[0] > w[1] && t.parent(w[0]) == Some(w[1])));
        }
        assert!(height(&t) >= depth_of(&t, t.len()).unwrap());
    }

    #[test]
    fn degree_histograms() {
        assert_eq!(degree_histogram(&Tree::path(2)), BTreeMap::from([(1, 2)]));
        assert_eq!(degree_histogram(&Tree::star(10)), BTreeMap::from([(1, 9), (9, 1)]));
    }

    #[test]
    fn degree_sums() {
        let t = grow_tree(&MemorySchedule::macroscopic(0.4).unwrap(), 5000, 2).unwrap();
        let h = degree_histogram(&t);
        assert_eq!(h.values().sum::<u64>(), 5000);
        assert_eq!(h.iter().map(|(k, c)| k * c).sum::<u64>(), 2 * 4999);
    }

    #[test]
    fn fringe_examples() {
        let p = Tree::path(2);
        assert_eq!(fringe_at(&p, 2, 4).unwrap(), FringeOutcome::Tree(FringeTree::leaf()));
        assert_eq!(fringe_at(&p, 1, 4).unwrap().tree().unwrap().code(), "(())");
        assert_eq!(fringe_at(&Tree::path(10), 1, 4).unwrap(), FringeOutcome::Truncated);
        assert_eq!(fringe_at(&Tree::path(4), 1, 4).unwrap().tree().unwrap().code(), "(((())))");
    }

    #[test]
    fn extended_fringe_examples() {
        let p = path3();
        let k0 = extended_fringe(&p, 3, 0, 5).unwrap();
        assert_eq!(k0, vec![fringe_at(&p, 3, 5).unwrap()]);
        let k1 = extended_fringe(&p, 3, 1, 5).unwrap();
        let leaf = FringeOutcome::Tree(FringeTree::leaf());
        assert_eq!(k1, vec![leaf.clone(), leaf]);
        assert!(matches!(extended_fringe(&p, 2, 2, 5), Err(Error::TooShallow { .. })));
    }

    #[test]
    fn empirical_fringe_matches_pointwise() {
        let t = grow_tree(&MemorySchedule::mesoscopic(0.5).unwrap(), 3000, 8).unwrap();
        let dist = empirical_fringe(&t, 5).unwrap();
        let mut direct = FringeDistribution::default();
        for v in 1..=t.len() {
            direct.add(fringe_at(&t, v, 5).unwrap().key());
        }
        assert_eq!(dist, direct);
        let total: f64 = dist.frequencies().values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_extended_fringe_matches_pointwise() {
        let t = grow_tree(&MemorySchedule::macroscopic(0.5).unwrap(), 2000, 3).unwrap();
        for k in 0..3 {
            let counts = empirical_extended_fringe(&t, k, 4).unwrap();
            let mut direct: BTreeMap<Vec<FringeKey>, u64> = BTreeMap::new();
            for v in 1..=t.len() {
                if let Ok(ef) = extended_fringe(&t, v, k, 4) {
                    *direct.entry(ef.iter().map(FringeOutcome::key).collect()).or_insert(0) += 1;
                }
            }
            assert_eq!(counts, direct, "k = {k}");
        }
    }

    #[test]
    fn spanned_subtree_examples() {
        let p = Tree::path(5);
        let single = spanned_subtree(&p, &[4]).unwrap();
        assert!(single.branchpoints.is_empty());
        assert_eq!(single.leaf_depths, vec![3]);
        let pair = spanned_subtree(&p, &[2, 3]).unwrap();
        assert_eq!(pair.branchpoints, vec![Branchpoint { label: 2, depth: 1 }]);
        assert_eq!(pair.pairwise_distances[0][1], 1);
        assert!(spanned_subtree(&p, &[2, 2]).is_err());
    }

    #[test]
    fn branchpoints_follow_merge_order() {
        // 8 and 5 meet at 3 (depth 2), 7 and 6 meet at 4 (depth 1)
        let t = Tree::from_parents(&[1, 2, 1, 3, 4, 4, 3]).unwrap();
        let sub = spanned_subtree(&t, &[8, 7, 6, 5]).unwrap();
        assert_eq!(
            sub.branchpoints,
            vec![
                Branchpoint { label: 4, depth: 1 },
                Branchpoint { label: 3, depth: 2 },
                Branchpoint { label: 1, depth: 0 },
            ]
        );
        // 12 and 11 meet at 6 before 10 and 9 meet at 8, which is larger and deeper
        let t = Tree::from_parents(&[1, 2, 3, 4, 5, 6, 7, 8, 8, 6, 6]).unwrap();
        let sub = spanned_subtree(&t, &[12, 11, 10, 9]).unwrap();
        assert_eq!(
            sub.branchpoints,
            vec![Branchpoint { label: 6, depth: 5 }, Branchpoint { label: 8, depth: 7 }]
        );
    }

    fn bfs_distances(tree: &Tree, from: u64) -> Vec<u64> {
        let n = tree.len() as usize;
        let mut adj = vec![Vec::new(); n + 1];
        for v in 2..=n as u64 {
            let p = tree.parent(v).unwrap();
            adj[v as usize].push(p);
            adj[p as usize].push(v);
        }
        let mut dist = vec![u64::MAX; n + 1];
        dist[from as usize] = 0;
        let mut q = VecDeque::from([from]);
        while let Some(u) = q.pop_front() {
            for &w in &adj[u as usize] {
                if dist[w as usize] == u64::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    #[test]
    fn spanned_distances_match_bfs() {
        let schedules = [
            MemorySchedule::mesoscopic(0.5).unwrap(),
            MemorySchedule::macroscopic(0.5).unwrap(),
        ];
        for seed in 0..1000u64 {
            let s = &schedules[(seed % 2) as usize];
            let mut r = rng::stream(seed);
            let n = 2 + r.next_u64() % 199;
            let t = grow_tree(s, n, seed).unwrap();
            let k = 1 + (r.next_u64() % n.min(5)) as usize;
            let mut leaves: Vec<u64> = Vec::new();
            while leaves.len() < k {
                let v = 1 + r.next_u64() % n;
                if !leaves.contains(&v) {
                    leaves.push(v);
                }
            }
            let sub = spanned_subtree(&t, &leaves).unwrap();
            for (a, &u) in leaves.iter().enumerate() {
                let d = bfs_distances(&t, u);
                for (b, &v) in leaves.iter().enumerate() {
                    assert_eq!(sub.pairwise_distances[a][b], d[v as usize]);
                }
            }
            assert!(four_point_condition(&sub.pairwise_distances));
            for bp in &sub.branchpoints {
                let under: usize = leaves
                    .iter()
                    .filter(|&&l| ancestor_chain(&t, l).unwrap().contains(&bp.label))
                    .count();
                assert!(under >= 2);
                assert_eq!(bp.depth, depth_of(&t, bp.label).unwrap());
            }
        }
    }

    #[test]
    fn four_point_rejects_non_tree_metric() {
        // 4-cycle metric
        let d = vec![vec![0, 1, 2, 1], vec![1, 0, 1, 2], vec![2, 1, 0, 1], vec![1, 2, 1, 0]];
        assert!(!four_point_condition(&d));
    }

    #[test]
    fn spine_examples() {
        assert_eq!(max_dist_to_spine(&Tree::path(7)).unwrap(), 0);
        assert_eq!(max_dist_to_spine(&Tree::star(5)).unwrap(), 1);
        assert!(max_dist_to_spine(&Tree::path(1)).is_err());
    }

    #[test]
    fn spine_distance_matches_brute_force() {
        let t = grow_tree(&MemorySchedule::mesoscopic(0.3).unwrap(), 3000, 12).unwrap();
        let spine = ancestor_chain(&t, t.len()).unwrap();
        let fast = spine_distances(&t);
        for v in (1..=t.len()).step_by(37) {
            let d = bfs_distances(&t, v);
            let brute = spine.iter().map(|&s| d[s as usize]).min().unwrap();
            assert_eq!(fast[v as usize] as u64, brute);
        }
    }

    proptest! {
        #[test]
        fn spanned_metric_is_tree_metric(seed in any::<u64>(), n in 2u64..300, k in 1usize..6) {
            let t = grow_tree(&MemorySchedule::mesoscopic(0.6).unwrap(), n, seed).unwrap();
            let leaves: Vec<u64> = (0..(k as u64).min(n)).map(|i| n - i).collect();
            let sub = spanned_subtree(&t, &leaves).unwrap();
            prop_assert!(four_point_condition(&sub.pairwise_distances));
        }
    }
}
