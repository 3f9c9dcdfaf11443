//! Tree growth: the parent-array representation and the two growth paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::rng::{self, Xoshiro256PlusPlus};
use crate::schedule::MemorySchedule;

/// Parent labels, `u32` below `2^31` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
enum ParentStore {
    Narrow(Vec<u32>),
    Wide(Vec<u64>),
}

const NARROW_LIMIT: u64 = 1 << 31;

impl ParentStore {
    fn with_capacity(n: u64) -> Self {
        if n < NARROW_LIMIT {
            ParentStore::Narrow(Vec::with_capacity(n as usize + 1))
        } else {
            ParentStore::Wide(Vec::with_capacity(n as usize + 1))
        }
    }

    #[inline]
    fn push(&mut self, p: u64) {
        match self {
            ParentStore::Narrow(v) => v.push(p as u32),
            ParentStore::Wide(v) => v.push(p),
        }
    }

    #[inline]
    fn get(&self, i: usize) -> u64 {
        match self {
            ParentStore::Narrow(v) => v[i] as u64,
            ParentStore::Wide(v) => v[i],
        }
    }
}

/// An immutable recursive tree on labels `1..=n` rooted at 1.
///
/// Every vertex `v >= 2` has `parent(v) < v`, so any forward scan over labels
/// visits parents before children.
#[derive(Clone, Debug)]
pub struct Tree {
    n: u64,
    // index v holds the parent of v; slots 0 and 1 hold the sentinel 0
    parents: ParentStore,
    schedule: Option<MemorySchedule>,
    seed: Option<u64>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && (2..=self.n).all(|v| self.parent_raw(v) == other.parent_raw(v))
    }
}

impl Eq for Tree {}

impl Tree {
    /// Builds a tree from `parents[i]` = parent of vertex `i + 2`.
    pub fn from_parents(parents: &[u64]) -> Result<Self> {
        let n = parents.len() as u64 + 1;
        let mut store = ParentStore::with_capacity(n);
        store.push(0);
        store.push(0);
        for (i, &p) in parents.iter().enumerate() {
            let v = i as u64 + 2;
            if p == 0 || p >= v {
                return Err(Error::invalid(
                    "parent",
                    format!("parent of {v} is {p}, must lie in 1..{v}"),
                ));
            }
            store.push(p);
        }
        Ok(Tree {
            n,
            parents: store,
            schedule: None,
            seed: None,
        })
    }

    /// The path `1 - 2 - ... - n`.
    pub fn path(n: u64) -> Self {
        let parents: Vec<u64> = (1..n).collect();
        Tree::from_parents(&parents).expect("path is a valid recursive tree")
    }

    /// All vertices attached to the root.
    pub fn star(n: u64) -> Self {
        let parents = vec![1; n.saturating_sub(1) as usize];
        Tree::from_parents(&parents).expect("star is a valid recursive tree")
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Parent of `v`, `None` for the root.
    #[inline]
    pub fn parent(&self, v: u64) -> Option<u64> {
        match self.parent_raw(v) {
            0 => None,
            p => Some(p),
        }
    }

    /// Parent of `v` with 0 standing for "none"; `v` must be in `1..=n`.
    #[inline]
    pub(crate) fn parent_raw(&self, v: u64) -> u64 {
        self.parents.get(v as usize)
    }

    pub fn schedule(&self) -> Option<&MemorySchedule> {
        self.schedule.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn check_label(&self, v: u64) -> Result<()> {
        if v == 0 || v > self.n {
            Err(Error::LabelOutOfRange { label: v, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Parents of `2..=n` in order.
    pub fn parents(&self) -> impl Iterator<Item = u64> + '_ {
        (2..=self.n).map(move |v| self.parent_raw(v))
    }

    /// Verifies `parent(v)` lies in the window open when `v` arrived.
    pub fn check_window_legality(&self, schedule: &MemorySchedule) -> Result<()> {
        for v in 2..=self.n {
            let p = self.parent_raw(v);
            let lo = schedule.window_lo(v - 1).unwrap_or(1);
            if p < lo || p > v - 1 {
                return Err(Error::invalid(
                    "parent",
                    format!("parent of {v} is {p}, outside window [{lo}, {}]", v - 1),
                ));
            }
        }
        Ok(())
    }

    /// Writes the `vertex,parent` CSV (LF line endings, one row per `v = 2..=n`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"vertex,parent\n")?;
        let mut line = String::with_capacity(32);
        for v in 2..=self.n {
            line.clear();
            let _ = writeln!(line, "{v},{}", self.parent_raw(v));
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }

    /// Reads a `vertex,parent` CSV as written by [`Tree::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io("<tree csv>", e))?
            .unwrap_or_default();
        if header.trim() != "vertex,parent" {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `vertex,parent`, got `{header}`"),
            });
        }
        let mut parents = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<tree csv>", e))?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { line: lineno, reason };
            let (v, p) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected two fields".into()))?;
            let v: u64 = v.trim().parse().map_err(|e| parse_err(format!("vertex: {e}")))?;
            let p: u64 = p.trim().parse().map_err(|e| parse_err(format!("parent: {e}")))?;
            if v != parents.len() as u64 + 2 {
                return Err(parse_err(format!(
                    "expected vertex {}, got {v}",
                    parents.len() + 2
                )));
            }
            parents.push(p);
        }
        Tree::from_parents(&parents)
    }

    /// `digraph T { v -> p; ... }` with edges pointing from child to parent.
    pub fn write_dot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"digraph T {\n")?;
        if self.n == 1 {
            out.write_all(b"  1;\n")?;
        }
        for v in 2..=self.n {
            writeln!(out, "  {v} -> {};", self.parent_raw(v))?;
        }
        out.write_all(b"}\n")?;
        out.flush()
    }
}

/// Source of parent choices: yields the parent of vertex `m + 1` for
/// `m = 1, 2, ...`, consuming the random stream identically for every caller.
pub struct AttachmentStream<'a> {
    schedule: &'a MemorySchedule,
    rng: Xoshiro256PlusPlus,
    m: u64,
}

impl<'a> AttachmentStream<'a> {
    pub fn new(schedule: &'a MemorySchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        Ok(AttachmentStream {
            schedule,
            rng: rng::stream(seed),
            m: 1,
        })
    }

    /// Label of the next vertex to arrive.
    pub fn next_label(&self) -> u64 {
        self.m + 1
    }

    /// Parent of the next vertex.
    #[inline]
    pub fn next_parent(&mut self) -> u64 {
        let m = self.m;
        self.m += 1;
        match self.schedule {
            MemorySchedule::Sarrt(law) => {
                let v = law.quantile(rng::unit_f64(&mut self.rng));
                let p = (m as f64 * v).floor() as u64;
                p.clamp(1, m)
            }
            schedule => {
                let lo = schedule.window_lo(m).expect("windowed schedule");
                rng::uniform_inclusive(&mut self.rng, lo, m)
            }
        }
    }
}

/// Grows a tree on `n` vertices; deterministic in `(schedule, n, seed)`.
pub fn grow_tree(schedule: &MemorySchedule, n: u64, seed: u64) -> Result<Tree> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one vertex"));
    }
    let mut stream = AttachmentStream::new(schedule, seed)?;
    let mut store = ParentStore::with_capacity(n);
    store.push(0);
    store.push(0);
    for _ in 2..=n {
        store.push(stream.next_parent());
    }
    Ok(Tree {
        n,
        parents: store,
        schedule: Some(schedule.clone()),
        seed: Some(seed),
    })
}

/// What [`grow_streaming`] keeps besides height and degree counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Collect {
    pub depths: bool,
    pub parents: bool,
}

#[derive(Clone, Debug)]
pub struct GrowthSummary {
    pub n: u64,
    pub height: u64,
    pub degree_histogram: BTreeMap<u64, u64>,
    pub depth: Option<Vec<u32>>,
    pub tree: Option<Tree>,
    pub seed: u64,
}

/// Grows a tree while tracking depths, height and degrees online.
///
/// Produces exactly the tree [`grow_tree`] would for the same seed. Without
/// `collect.parents` the memory footprint is two `u32` per vertex.
pub fn grow_streaming(
    schedule: &MemorySchedule,
    n: u64,
    seed: u64,
    collect: Collect,
) -> Result<GrowthSummary> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one vertex"));
    }
    if n > u32::MAX as u64 {
        return Err(Error::invalid("n", "streaming mode supports n < 2^32"));
    }
    let mut stream = AttachmentStream::new(schedule, seed)?;
    let len = n as usize + 1;
    let mut depth = vec![0u32; len];
    let mut children = vec![0u32; len];
    let mut parents = collect.parents.then(|| {
        let mut s = ParentStore::with_capacity(n);
        s.push(0);
        s.push(0);
        s
    });
    let mut height = 0u32;
    for v in 2..len {
        let p = stream.next_parent() as usize;
        let d = depth[p] + 1;
        depth[v] = d;
        height = height.max(d);
        children[p] += 1;
        if let Some(s) = parents.as_mut() {
            s.push(p as u64);
        }
    }
    let mut degree_histogram = BTreeMap::new();
    for (v, &c) in children.iter().enumerate().skip(1) {
        let deg = c as u64 + u64::from(v != 1);
        *degree_histogram.entry(deg).or_insert(0) += 1;
    }
    drop(children);
    Ok(GrowthSummary {
        n,
        height: height as u64,
        degree_histogram,
        depth: collect.depths.then_some(depth),
        tree: parents.map(|parents| Tree {
            n,
            parents,
            schedule: Some(schedule.clone()),
            seed: Some(seed),
        }),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{AttachmentLaw, CustomJ};

    fn schedules() -> Vec<MemorySchedule> {
        vec![
            MemorySchedule::macroscopic(0.5).unwrap(),
            MemorySchedule::mesoscopic(0.5).unwrap(),
            MemorySchedule::sarrt(AttachmentLaw::uniform(0.3, 1.0).unwrap()),
            MemorySchedule::custom_j(CustomJ::constant(1)),
        ]
    }

    #[test]
    fn second_vertex_attaches_to_root() {
        for s in schedules() {
            for seed in 0..20 {
                let t = grow_tree(&s, 2, seed).unwrap();
                assert_eq!(t.parent(2), Some(1));
                assert_eq!(t.parent(1), None);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        for s in schedules() {
            let a = grow_tree(&s, 5000, 17).unwrap();
            let b = grow_tree(&s, 5000, 17).unwrap();
            let c = grow_tree(&s, 5000, 18).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn window_legality_exhaustive() {
        for s in schedules() {
            for seed in 0..5 {
                let t = grow_tree(&s, 20_000, seed).unwrap();
                if s.is_windowed() {
                    t.check_window_legality(&s).unwrap();
                } else {
                    assert!(t.parents().enumerate().all(|(i, p)| p >= 1 && p < i as u64 + 2));
                }
            }
        }
    }

    #[test]
    fn streaming_matches_full_growth() {
        for s in schedules() {
            let full = grow_tree(&s, 3000, 99).unwrap();
            let summary = grow_streaming(
                &s,
                3000,
                99,
                Collect {
                    depths: true,
                    parents: true,
                },
            )
            .unwrap();
            assert_eq!(summary.tree.as_ref().unwrap(), &full);
            let depths = crate::analysis::depths(&full);
            assert_eq!(summary.depth.as_ref().unwrap()[1..], depths[1..]);
            assert_eq!(summary.height, crate::analysis::height(&full));
            assert_eq!(summary.degree_histogram, crate::analysis::degree_histogram(&full));
        }
    }

    #[test]
    fn streaming_single_vertex() {
        let s = MemorySchedule::mesoscopic(0.5).unwrap();
        let g = grow_streaming(&s, 1, 0, Collect::default()).unwrap();
        assert_eq!(g.height, 0);
        assert_eq!(g.degree_histogram, BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn streaming_three_vertex_path() {
        let s = MemorySchedule::mesoscopic(0.5).unwrap();
        let seed = (0..100)
            .find(|&seed| grow_tree(&s, 3, seed).unwrap().parent(3) == Some(2))
            .unwrap();
        let g = grow_streaming(&s, 3, seed, Collect::default()).unwrap();
        assert_eq!(g.height, 2);
        assert_eq!(g.degree_histogram, BTreeMap::from([(1, 2), (2, 1)]));
    }

    #[test]
    fn csv_round_trip() {
        let s = MemorySchedule::macroscopic(0.3).unwrap();
        let t = grow_tree(&s, 500, 5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vertex,parent\n2,1\n"));
        assert_eq!(text.lines().count(), 500);
        assert!(!text.contains('\r'));
        let back = Tree::read_csv(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(Tree::read_csv(&b"v,p\n2,1\n"[..]).is_err());
        assert!(Tree::read_csv(&b"vertex,parent\n2,2\n"[..]).is_err());
        assert!(Tree::read_csv(&b"vertex,parent\n3,1\n"[..]).is_err());
        assert!(Tree::read_csv(&b"vertex,parent\n2,x\n"[..]).is_err());
    }

    #[test]
    fn dot_export() {
        let mut buf = Vec::new();
        Tree::path(3).write_dot(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "digraph T {\n  2 -> 1;\n  3 -> 2;\n}\n");
    }

    #[test]
    fn rejects_invalid_parents() {
        assert!(Tree::from_parents(&[0]).is_err());
        assert!(Tree::from_parents(&[1, 3]).is_err());
        assert!(grow_tree(&MemorySchedule::Macroscopic { theta: 1.2 }, 10, 0).is_err());
    }
}
