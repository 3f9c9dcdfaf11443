//! Seeded replication sweeps over tree sizes.
//!
//! Cell `i` (sizes outer, replications inner) uses seed
//! `derive_seed(master_seed, i)`, so results do not depend on scheduling or
//! thread count. With an output directory, finished cells are appended to
//! `cells.partial.jsonl` chunk by chunk; an interrupted sweep leaves
//! `sweep.resume.json` behind and a rerun with the same config continues from
//! the last flushed cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{depth_of, empirical_fringe, height, max_dist_to_spine};
use crate::error::{Error, Result};
use crate::exploration::{chain_sup_residual, explore_ancestral_lines, simulate_chain, ChainConvention, StopRule};
use crate::fringe::FringeKey;
use crate::limits::degree::{macro_degree_table, meso_degree_table};
use crate::limits::poisson_gw_reference;
use crate::rng::{derive_seed, GENERATOR};
use crate::schedule::{MemorySchedule, ScheduleSpec};
use crate::stats::{tv_distance, Summary};
use crate::tree::{grow_streaming, grow_tree, Collect, Tree};

pub const PARTIAL_FILE: &str = "cells.partial.jsonl";
pub const RESUME_MARKER: &str = "sweep.resume.json";
pub const REPORT_FILE: &str = "report.json";
pub const CELLS_CSV: &str = "cells.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Height,
    DegreeHist,
    Fringe { size_cap: usize },
    Chain {
        #[serde(default = "default_t_max")]
        t_max: f64,
    },
    Spine,
    Branchpoints { k: usize },
}

fn default_t_max() -> f64 {
    3.0
}

/// Pass/fail check of a per-size metric mean against a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub metric: String,
    /// Restrict to one size; all sizes otherwise.
    #[serde(default)]
    pub n: Option<u64>,
    pub target: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schedule: ScheduleSpec,
    pub n: Vec<u64>,
    pub replications: usize,
    pub master_seed: u64,
    pub statistics: Vec<Statistic>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&self.schedule.build()?)
    }

    /// Validation against an already built schedule.
    pub fn validate_with(&self, schedule: &MemorySchedule) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::invalid("n", "need a non-empty list of sizes >= 1"));
        }
        if self.statistics.is_empty() {
            return Err(Error::invalid("statistics", "request at least one statistic"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        for s in &self.statistics {
            match s {
                Statistic::Fringe { size_cap } if *size_cap == 0 => {
                    return Err(Error::invalid("size_cap", "must be at least 1"))
                }
                Statistic::Branchpoints { k } if *k < 2 => return Err(Error::invalid("k", "need at least two lines")),
                Statistic::Chain { t_max } if t_max.is_nan() || *t_max < 0.0 => {
                    return Err(Error::invalid("t_max", "must be non-negative"))
                }
                Statistic::Chain { .. } if !matches!(schedule, MemorySchedule::Mesoscopic { .. }) => {
                    return Err(Error::invalid("chain", "only defined for mesoscopic schedules"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The config with execution-only settings (threads, output directory) removed.
    pub fn scientific(&self) -> SweepConfig {
        SweepConfig {
            output_dir: None,
            threads: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON of [`SweepConfig::scientific`].
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&self.scientific()).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.n.len() * self.replications
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: u64,
    pub rep: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: u64,
    pub metric: String,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub reference: String,
    pub distance: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub config: SweepConfig,
    pub generator: String,
    pub config_digest: String,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<Comparison>,
}

impl ReplicationReport {
    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell: `n,rep,seed,<metrics in name order>`.
    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names: BTreeSet<&String> = self.cells.iter().flat_map(|c| c.metrics.keys()).collect();
        write!(out, "n,rep,seed")?;
        for name in &names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for c in &self.cells {
            write!(out, "{},{},{}", c.n, c.rep, c.seed)?;
            for name in &names {
                match c.metrics.get(*name) {
                    Some(&v) => write!(out, ",{}", crate::fmt_f64(v))?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Per-size summaries of every metric, in size order then metric name order.
pub fn aggregate(cells: &[CellRecord]) -> Result<Vec<Aggregate>> {
    let mut grouped: BTreeMap<(u64, &str), Vec<f64>> = BTreeMap::new();
    let mut order: Vec<u64> = Vec::new();
    for c in cells {
        if !order.contains(&c.n) {
            order.push(c.n);
        }
        for (name, &v) in &c.metrics {
            grouped.entry((c.n, name)).or_default().push(v);
        }
    }
    let mut out = Vec::new();
    for n in order {
        for ((_, name), values) in grouped.range((n, "")..).take_while(|((m, _), _)| *m == n) {
            out.push(Aggregate {
                n,
                metric: (*name).to_owned(),
                summary: Summary::of(values)?,
            });
        }
    }
    Ok(out)
}

fn compare(checks: &[Check], aggregates: &[Aggregate]) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for check in checks {
        let matching: Vec<&Aggregate> = aggregates
            .iter()
            .filter(|a| a.metric == check.metric && check.n.is_none_or(|n| n == a.n))
            .collect();
        if matching.is_empty() {
            return Err(Error::invalid(
                "checks",
                format!("no metric `{}` for the requested sizes", check.metric),
            ));
        }
        for a in matching {
            let distance = (a.summary.mean - check.target).abs();
            out.push(Comparison {
                name: format!("mean({})@n={}", check.metric, a.n),
                reference: format!("target={}", crate::fmt_f64(check.target)),
                distance,
                threshold: check.tolerance,
                pass: distance <= check.tolerance,
            });
        }
    }
    Ok(out)
}

/// Reference laws shared by all cells.
struct Prepared {
    schedule: MemorySchedule,
    degree_reference: Option<BTreeMap<u64, f64>>,
    fringe_reference: Option<BTreeMap<FringeKey, f64>>,
}

impl Prepared {
    fn new(config: &SweepConfig, schedule: MemorySchedule) -> Result<Self> {
        let wants_degrees = config.statistics.contains(&Statistic::DegreeHist);
        let degree_reference = match (&schedule, wants_degrees) {
            (MemorySchedule::Mesoscopic { .. }, true) => Some(meso_degree_table(40)),
            (MemorySchedule::Macroscopic { theta }, true) => Some(macro_degree_table(*theta, 40, 1e-10)),
            _ => None,
        };
        let fringe_cap = config.statistics.iter().find_map(|s| match s {
            Statistic::Fringe { size_cap } => Some(*size_cap),
            _ => None,
        });
        let fringe_reference = match (&schedule, fringe_cap) {
            (MemorySchedule::Mesoscopic { .. }, Some(cap)) => Some(poisson_gw_reference(cap.min(9))),
            _ => None,
        };
        Ok(Prepared {
            schedule,
            degree_reference,
            fringe_reference,
        })
    }

    fn height_scale(&self, n: u64) -> Option<f64> {
        match self.schedule {
            MemorySchedule::Mesoscopic { beta } => Some((n as f64).powf(1.0 - beta)),
            MemorySchedule::Macroscopic { .. } if n >= 2 => Some((n as f64).ln()),
            _ => None,
        }
    }
}

fn run_cell(prepared: &Prepared, config: &SweepConfig, n: u64, rep: usize, seed: u64) -> Result<CellRecord> {
    let mut metrics = BTreeMap::new();
    let needs_tree = config
        .statistics
        .iter()
        .any(|s| !matches!(s, Statistic::Height | Statistic::DegreeHist | Statistic::Chain { .. }));
    let needs_growth = config.statistics.iter().any(|s| !matches!(s, Statistic::Chain { .. }));
    let (tree, summary) = if !needs_growth {
        (None, None)
    } else if needs_tree {
        (Some(grow_tree(&prepared.schedule, n, seed)?), None)
    } else {
        (None, Some(grow_streaming(&prepared.schedule, n, seed, Collect::default())?))
    };
    let tree: Option<&Tree> = tree.as_ref();
    for statistic in &config.statistics {
        match statistic {
            Statistic::Height => {
                let h = match (&summary, tree) {
                    (Some(s), _) => s.height,
                    (None, Some(t)) => height(t),
                    _ => unreachable!("growth requested"),
                };
                metrics.insert("height".to_owned(), h as f64);
                if let Some(scale) = prepared.height_scale(n) {
                    metrics.insert("height_scaled".to_owned(), h as f64 / scale);
                }
            }
            Statistic::DegreeHist => {
                let hist = match (&summary, tree) {
                    (Some(s), _) => s.degree_histogram.clone(),
                    (None, Some(t)) => crate::analysis::degree_histogram(t),
                    _ => unreachable!("growth requested"),
                };
                let total = n as f64;
                for k in 1..=5 {
                    let c = hist.get(&k).copied().unwrap_or(0);
                    metrics.insert(format!("deg_{k}"), c as f64 / total);
                }
                if let Some(reference) = &prepared.degree_reference {
                    metrics.insert("deg_tv".to_owned(), tv_distance(&hist, reference)?);
                }
            }
            Statistic::Fringe { size_cap } => {
                let t = tree.expect("tree grown");
                let dist = empirical_fringe(t, *size_cap)?;
                metrics.insert("fringe_leaf".to_owned(), dist.frequency(&FringeKey::Shape("()".to_owned())));
                metrics.insert("fringe_truncated".to_owned(), dist.truncated_mass());
                if let Some(reference) = &prepared.fringe_reference {
                    let coarse = dist.coarsen((*size_cap).min(9));
                    metrics.insert("fringe_tv".to_owned(), tv_distance(&coarse.counts, reference)?);
                }
            }
            Statistic::Chain { t_max } => {
                let MemorySchedule::Mesoscopic { beta } = prepared.schedule else {
                    unreachable!("validated")
                };
                let chain = simulate_chain(n, beta, seed, StopRule::Absorption, ChainConvention::ModelConsistent)?;
                metrics.insert("chain_length".to_owned(), (chain.len() - 1) as f64);
                metrics.insert("chain_residual".to_owned(), chain_sup_residual(&chain, n, beta, *t_max)?);
            }
            Statistic::Spine => {
                let t = tree.expect("tree grown");
                if n >= 2 {
                    let d = max_dist_to_spine(t)? as f64;
                    metrics.insert("spine_max".to_owned(), d);
                    if let MemorySchedule::Mesoscopic { beta } = prepared.schedule {
                        metrics.insert("spine_max_scaled".to_owned(), d / (n as f64).powf(1.0 - beta));
                    }
                }
            }
            Statistic::Branchpoints { k } => {
                let t = tree.expect("tree grown");
                if n >= *k as u64 {
                    let trace = explore_ancestral_lines(t, *k, None)?;
                    let depth = depth_of(t, trace.terminal_label)? as f64;
                    metrics.insert("branchpoint_depth".to_owned(), depth);
                    if let MemorySchedule::Mesoscopic { beta } = prepared.schedule {
                        metrics.insert(
                            "branchpoint_scaled".to_owned(),
                            depth / crate::exploration::meso_height_scale(n, beta),
                        );
                    }
                }
            }
        }
    }
    Ok(CellRecord { n, rep, seed, metrics })
}

#[derive(Serialize, Deserialize)]
struct PartialHeader {
    config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct ResumeMarker {
    config_digest: String,
    completed: usize,
    total: usize,
    error: String,
}

fn load_partial(dir: &Path, digest: &str) -> Result<Vec<CellRecord>> {
    let path = dir.join(PARTIAL_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let mut lines = BufReader::new(file).lines();
    let header: PartialHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line.map_err(|e| Error::io(&path, e))?)?,
        None => return Ok(Vec::new()),
    };
    if header.config_digest != digest {
        return Err(Error::invalid(
            "output_dir",
            format!("{} belongs to a different sweep config", path.display()),
        ));
    }
    let mut cells = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(&path, e))?;
        // a torn final line from a crash is recomputed
        match serde_json::from_str(&line) {
            Ok(cell) => cells.push(cell),
            Err(_) => break,
        }
    }
    Ok(cells)
}

fn rewrite_partial(dir: &Path, digest: &str, cells: &[CellRecord]) -> Result<BufWriter<File>> {
    let path = dir.join(PARTIAL_FILE);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, s: String| writeln!(w, "{s}").map_err(|e| Error::io(&path, e));
    put(
        &mut w,
        serde_json::to_string(&PartialHeader {
            config_digest: digest.to_owned(),
        })?,
    )?;
    for c in cells {
        put(&mut w, serde_json::to_string(c)?)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(w)
}

/// Runs every `(n, replication)` cell and assembles the report; with an output
/// directory also writes `report.json` and `cells.csv`.
pub fn run_sweep(config: &SweepConfig) -> Result<ReplicationReport> {
    run_sweep_with(config, config.schedule.build()?)
}

/// [`run_sweep`] with a schedule built by the caller, e.g. a custom `j` read
/// from a file; `config.schedule` should describe it.
pub fn run_sweep_with(config: &SweepConfig, schedule: MemorySchedule) -> Result<ReplicationReport> {
    config.validate_with(&schedule)?;
    let prepared = Prepared::new(config, schedule)?;
    let digest = config.digest();
    let total = config.cell_count();
    let cell_params = |i: usize| {
        let n = config.n[i / config.replications];
        (n, i % config.replications, derive_seed(config.master_seed, i as u64))
    };

    let dir = config.output_dir.as_deref();
    let mut cells = Vec::with_capacity(total);
    let mut sink = match dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            let mut done = load_partial(d, &digest)?;
            done.truncate(total);
            let sink = rewrite_partial(d, &digest, &done)?;
            cells = done;
            Some(sink)
        }
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    let chunk = (pool.current_num_threads() * 4).max(8);

    while cells.len() < total {
        let start = cells.len();
        let end = (start + chunk).min(total);
        let results: Vec<Result<CellRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let (n, rep, seed) = cell_params(i);
                    run_cell(&prepared, config, n, rep, seed)
                })
                .collect()
        });
        let mut failure = None;
        for r in results {
            match r {
                Ok(cell) if failure.is_none() => {
                    if let (Some(w), Some(d)) = (sink.as_mut(), dir) {
                        let path = d.join(PARTIAL_FILE);
                        writeln!(w, "{}", serde_json::to_string(&cell)?).map_err(|e| Error::io(&path, e))?;
                    }
                    cells.push(cell);
                }
                Ok(_) => {}
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                }
            }
        }
        if let (Some(w), Some(d)) = (sink.as_mut(), dir) {
            w.flush().map_err(|e| Error::io(d.join(PARTIAL_FILE), e))?;
        }
        if let Some(source) = failure {
            // without an output directory there is nothing to resume from
            let Some(d) = dir else { return Err(source) };
            let marker = d.join(RESUME_MARKER);
            let body = serde_json::to_string_pretty(&ResumeMarker {
                config_digest: digest.clone(),
                completed: cells.len(),
                total,
                error: source.to_string(),
            })?;
            fs::write(&marker, body).map_err(|e| Error::io(&marker, e))?;
            return Err(Error::SweepInterrupted {
                completed: cells.len(),
                total,
                marker,
                source: Box::new(source),
            });
        }
    }
    drop(sink);

    let aggregates = aggregate(&cells)?;
    let comparisons = compare(&config.checks, &aggregates)?;
    let report = ReplicationReport {
        config: config.scientific(),
        generator: GENERATOR.to_owned(),
        config_digest: digest,
        cells,
        aggregates,
        comparisons,
    };
    if let Some(d) = dir {
        let path = d.join(REPORT_FILE);
        fs::write(&path, report.to_json()?).map_err(|e| Error::io(&path, e))?;
        let path = d.join(CELLS_CSV);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        report.write_cells_csv(BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        for name in [PARTIAL_FILE, RESUME_MARKER] {
            let p = d.join(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    Ok(report)
}
