//! Joint exploration of the ancestral lines of several young vertices, and a
//! tree-free simulator of a single ancestral line.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::depth_of;
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, Xoshiro256PlusPlus};
use crate::schedule::{floor_pow, MemorySchedule};
use crate::tree::{grow_tree, Tree};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationStep {
    pub m: usize,
    pub revealed_label: u64,
    /// Zero-based index of the line whose next ancestor was revealed.
    pub chosen_line: usize,
    /// `M^i_m`: ancestors revealed so far on each line.
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub k: usize,
    pub starts: Vec<u64>,
    pub steps: Vec<ExplorationStep>,
    /// Step at which two lines first share a label.
    pub termination: usize,
    pub terminal_label: u64,
    pub coalesced_pair: (usize, usize),
    /// Whether the youngest start lies in the window of `n - 1`, the
    /// condition under which the limit theory applies.
    pub theory_applies: bool,
}

impl ExplorationTrace {
    /// `max_m max_i |M^i_m - m/k|`.
    pub fn max_line_imbalance(&self) -> f64 {
        let k = self.k as f64;
        self.steps
            .iter()
            .flat_map(|s| s.counts.iter().map(move |&c| (c as f64 - s.m as f64 / k).abs()))
            .fold(0.0, f64::max)
    }

    /// `m,revealed_label,chosen_line,M_1,...,M_k`, lines numbered from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "m,revealed_label,chosen_line")?;
        for i in 1..=self.k {
            write!(out, ",M_{i}")?;
        }
        writeln!(out)?;
        for s in &self.steps {
            write!(out, "{},{},{}", s.m, s.revealed_label, s.chosen_line + 1)?;
            for c in &s.counts {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Explores the ancestral lines of `starts` (default: the `k` youngest
/// vertices) by repeatedly revealing the parent of the frontier vertex with the
/// largest label, stopping as soon as two frontier labels coincide.
pub fn explore_ancestral_lines(tree: &Tree, k: usize, starts: Option<&[u64]>) -> Result<ExplorationTrace> {
    let n = tree.len();
    if k < 2 {
        return Err(Error::invalid("k", "need at least two lines"));
    }
    let starts: Vec<u64> = match starts {
        Some(s) => s.to_vec(),
        None => {
            if n < k as u64 {
                return Err(Error::invalid("k", format!("tree has only {n} vertices")));
            }
            (0..k as u64).map(|i| n - i).collect()
        }
    };
    if starts.len() != k {
        return Err(Error::invalid("starts", format!("expected {k} labels, got {}", starts.len())));
    }
    for &s in &starts {
        tree.check_label(s)?;
    }
    if starts.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("starts", "labels must be distinct and strictly decreasing"));
    }
    let theory_applies = match tree.schedule().and_then(|s| s.window_lo(starts[0].saturating_sub(1).max(1))) {
        Some(lo) => starts[k - 1] >= lo,
        None => true,
    };

    let mut frontier = starts.clone();
    let mut counts = vec![0usize; k];
    let mut steps = Vec::new();
    let mut m = 0;
    loop {
        // step (1) is checked before step (2); frontier labels start distinct
        // and only the moved line can create a collision
        if let Some(last) = steps.last() {
            let ExplorationStep { chosen_line, .. } = *last;
            if let Some(other) = (0..k).find(|&i| i != chosen_line && frontier[i] == frontier[chosen_line]) {
                return Ok(ExplorationTrace {
                    k,
                    starts,
                    termination: m,
                    terminal_label: frontier[chosen_line],
                    coalesced_pair: (other.min(chosen_line), other.max(chosen_line)),
                    steps,
                    theory_applies,
                });
            }
        }
        let (line, &label) = frontier
            .iter()
            .enumerate()
            .max_by_key(|&(_, &l)| l)
            .expect("k >= 2");
        let parent = tree
            .parent(label)
            .expect("frontier labels are distinct, so the maximum is not the root");
        frontier[line] = parent;
        counts[line] += 1;
        m += 1;
        steps.push(ExplorationStep {
            m,
            revealed_label: parent,
            chosen_line: line,
            counts: counts.clone(),
        });
    }
}

/// How the tree-free chain picks the next ancestor of `l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainConvention {
    /// Uniform on the attachment window of `l - 1`, exactly as in the tree.
    #[default]
    ModelConsistent,
    /// `l - Uniform{1, ..., floor(l^beta)}`.
    StepBack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Absorption,
    /// Stop at the first label `<= threshold`.
    LabelAtMost(u64),
}

/// The ancestral line of `n` in a mesoscopic tree, generated label by label
/// in constant memory.
pub struct ChainWalk {
    beta: f64,
    convention: ChainConvention,
    rng: Xoshiro256PlusPlus,
    next: Option<u64>,
}

impl ChainWalk {
    pub fn new(n: u64, beta: f64, seed: u64, convention: ChainConvention) -> Result<Self> {
        MemorySchedule::mesoscopic(beta)?;
        if n == 0 {
            return Err(Error::invalid("n", "need at least one vertex"));
        }
        Ok(ChainWalk {
            beta,
            convention,
            rng: rng::stream(seed),
            next: Some(n),
        })
    }
}

impl Iterator for ChainWalk {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let current = self.next?;
        self.next = (current > 1).then(|| match self.convention {
            ChainConvention::ModelConsistent => {
                let m = current - 1;
                let lo = (m - floor_pow(m, self.beta)).max(1);
                rng::uniform_inclusive(&mut self.rng, lo, m)
            }
            ChainConvention::StepBack => {
                let width = floor_pow(current, self.beta).max(1);
                current - rng::uniform_inclusive(&mut self.rng, 1, width)
            }
        });
        Some(current)
    }
}

/// Labels `L(0) = n, L(1), ...` of the ancestral line until `stop`.
pub fn simulate_chain(
    n: u64,
    beta: f64,
    seed: u64,
    stop: StopRule,
    convention: ChainConvention,
) -> Result<Vec<u64>> {
    let walk = ChainWalk::new(n, beta, seed, convention)?;
    let mut out = Vec::new();
    for label in walk {
        out.push(label);
        if let StopRule::LabelAtMost(threshold) = stop {
            if label <= threshold {
                break;
            }
        }
    }
    Ok(out)
}

/// `sup_{t <= t_max} |L(floor(t n^{1-beta})) / n - f_beta(t)|`, taking
/// `L = 1` once the chain has been absorbed.
pub fn chain_sup_residual(chain: &[u64], n: u64, beta: f64, t_max: f64) -> Result<f64> {
    let scale = (n as f64).powf(1.0 - beta);
    let last = (t_max * scale).floor() as usize;
    let nf = n as f64;
    let mut sup = 0.0f64;
    for step in 0..=last {
        let label = chain.get(step).copied().unwrap_or(1) as f64 / nf;
        // on [step, step + 1) / scale the label is constant and f_beta monotone
        let t0 = step as f64 / scale;
        let t1 = (((step + 1) as f64) / scale).min(t_max);
        let a = crate::limits::f_beta(beta, t0)?;
        let b = crate::limits::f_beta(beta, t1.max(t0))?;
        sup = sup.max((label - a).abs()).max((label - b).abs());
    }
    Ok(sup)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchpointRecord {
    pub replication: usize,
    pub seed: u64,
    pub terminal_label: u64,
    pub depth: u64,
    /// `depth / ((2/(1-beta)) n^{1-beta})`; at `beta = 1/2` that is `depth / (4 sqrt n)`.
    pub scaled_depth: f64,
    pub leaf_depths: Vec<u64>,
}

/// Height scale `(2/(1-beta)) n^{1-beta}` of mesoscopic trees.
pub fn meso_height_scale(n: u64, beta: f64) -> f64 {
    2.0 / (1.0 - beta) * (n as f64).powf(1.0 - beta)
}

/// Grows `replications` mesoscopic trees and records the depth of the first
/// coalescence among the ancestral lines of the `k` youngest vertices.
pub fn branchpoint_statistics(
    beta: f64,
    n: u64,
    k: usize,
    replications: usize,
    master_seed: u64,
) -> Result<Vec<BranchpointRecord>> {
    let schedule = MemorySchedule::mesoscopic(beta)?;
    let scale = meso_height_scale(n, beta);
    (0..replications)
        .into_par_iter()
        .map(|replication| {
            let seed = derive_seed(master_seed, replication as u64);
            let tree = grow_tree(&schedule, n, seed)?;
            let trace = explore_ancestral_lines(&tree, k, None)?;
            let depth = depth_of(&tree, trace.terminal_label)?;
            let leaf_depths = trace
                .starts
                .iter()
                .map(|&v| depth_of(&tree, v))
                .collect::<Result<_>>()?;
            Ok(BranchpointRecord {
                replication,
                seed,
                terminal_label: trace.terminal_label,
                depth,
                scaled_depth: depth as f64 / scale,
                leaf_depths,
            })
        })
        .collect()
}

/// `replication,seed,depth,scaled_depth` rows.
pub fn write_branchpoints_csv<W: Write>(records: &[BranchpointRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "replication,seed,depth,scaled_depth")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.replication, r.seed, r.depth, crate::fmt_f64(r.scaled_depth))?;
    }
    out.flush()
}
