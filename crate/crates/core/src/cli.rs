//! The `memtree` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 failed
//! `sweep --assert` comparison. Errors go to standard error prefixed `error:`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{degree_histogram, empirical_fringe, height, spanned_subtree, spine_distances};
use crate::error::Error;
use crate::exploration::{
    branchpoint_statistics, chain_sup_residual, explore_ancestral_lines, simulate_chain, write_branchpoints_csv,
    ChainConvention, StopRule,
};
use crate::fringe::FringeKey;
use crate::limits::constants::{write_constants_csv, HeightConstants};
use crate::limits::degree::{macro_degree_pmf, macro_degree_table, meso_degree_pmf, meso_degree_table};
use crate::limits::{f_beta, poisson_gw_reference, sample_macro_fringe, sample_sarrt_fringe};
use crate::rng::derive_seed;
use crate::schedule::{AttachmentSpec, CustomJ, MemorySchedule, ScheduleSpec};
use crate::stats::{cdf_dominance_counts, chi_square, ks_one_sample, shifted_geometric_cdf, tv_distance};
use crate::sweep::{run_sweep_with, ReplicationReport, SweepConfig};
use crate::tree::{grow_streaming, grow_tree, Collect, Tree};
use crate::fmt_f64;

#[derive(Parser, Debug)]
#[command(name = "memtree", version, about = "Random recursive trees with limited memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow one tree and write its parent list.
    Grow(GrowArgs),
    /// Degree histogram against the limiting degree law.
    Degrees(DegreesArgs),
    /// Heights of independent trees.
    Height(HeightArgs),
    /// Ancestor-label chain of vertex n and its distance to the fluid limit.
    Chain(ChainArgs),
    /// Empirical fringe distribution against its limit.
    Fringe(FringeArgs),
    /// Joint exploration of the ancestral lines of the k youngest vertices.
    Explore(ExploreArgs),
    /// Distances to the root-to-n path and the geometric domination check.
    Spine(SpineArgs),
    /// Depth of the first coalescence among the k youngest vertices.
    Branchpoints(BranchpointArgs),
    /// First-birth constant and maximal height exponent of the macroscopic regime.
    Constants(ConstantsArgs),
    /// Run a sweep described by a JSON config.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
#[group(id = "regime", multiple = false)]
struct Regime {
    /// j(n) = floor(theta n).
    #[arg(long, value_name = "THETA")]
    macroscopic: Option<f64>,
    /// j(n) = n - floor(n^beta).
    #[arg(long, value_name = "BETA")]
    mesoscopic: Option<f64>,
    /// j(1), j(2), ... one per line (or `n,j` rows).
    #[arg(long = "custom-j", value_name = "FILE")]
    custom_j: Option<PathBuf>,
    /// Attachment law: `uniform`, `uniform:LO,HI` or `power:GAMMA`.
    #[arg(long, value_name = "SPEC")]
    sarrt: Option<String>,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[command(flatten)]
    regime: Regime,
    /// Tree size(s), comma separated where a list is accepted.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file; standard output otherwise.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct GrowArgs {
    #[command(flatten)]
    common: Common,
    /// Also write the tree as DOT.
    #[arg(long, value_name = "FILE")]
    export_dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DegreesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Analyse a tree read from a `vertex,parent` CSV instead of growing one.
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
    /// Largest degree listed (default: largest observed).
    #[arg(long)]
    max_k: Option<u64>,
}

#[derive(Args, Debug)]
struct HeightArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Supremum window in units of n^(1-beta).
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// Write the labels of a single chain instead of per-replication residuals.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct FringeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
    #[arg(long)]
    size_cap: Option<usize>,
    /// Monte-Carlo draws for the macroscopic and SARRT references.
    #[arg(long)]
    reference_draws: Option<usize>,
}

#[derive(Args, Debug)]
struct ExploreArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Explicit start labels, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    starts: Vec<u64>,
    /// Write the spanned subtree as DOT with branchpoints boxed.
    #[arg(long, value_name = "FILE")]
    export_dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
    /// Allowed CDF deficit in the domination check.
    #[arg(long)]
    slack: Option<f64>,
}

#[derive(Args, Debug)]
struct BranchpointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep config JSON.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Artifact directory, overriding `output_dir` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exit with status 3 if any comparison fails.
    #[arg(long)]
    assert: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Model,
    StepBack,
}

impl From<ConventionArg> for ChainConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Model => ChainConvention::ModelConsistent,
            ConventionArg::StepBack => ChainConvention::StepBack,
        }
    }
}

/// Effective settings of a run: the `--config` file overlaid with flags.
/// Echoed into every output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_j_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<ChainConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($field:ident),*) => {
        $(if $top.$field.is_some() { $base.$field = $top.$field.clone(); })*
    };
}

impl Settings {
    fn overlay(&mut self, top: &Settings) {
        if top.schedule.is_some() {
            self.custom_j_file = top.custom_j_file.clone();
        }
        overlay!(self, top; schedule, custom_j_file, n, seed, reps, threads, tree, k, starts, size_cap,
            reference_draws, t_max, convention, trace, max_k, slack, theta, tol, format);
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
    Assert(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(Error::io(path, e))
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            // clap renders its own `error:` prefix
            eprint!("{}", e.render());
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(Failure::Assert(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    }
}

fn dispatch(command: Command) -> Outcome<()> {
    match command {
        Command::Grow(a) => grow(a),
        Command::Degrees(a) => degrees(a),
        Command::Height(a) => height_cmd(a),
        Command::Chain(a) => chain(a),
        Command::Fringe(a) => fringe(a),
        Command::Explore(a) => explore(a),
        Command::Spine(a) => spine(a),
        Command::Branchpoints(a) => branchpoints(a),
        Command::Constants(a) => constants(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn load_settings(path: Option<&Path>) -> Outcome<Settings> {
    let Some(path) = path else { return Ok(Settings::default()) };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn regime_settings(r: &Regime) -> Outcome<Settings> {
    let mut s = Settings::default();
    if let Some(theta) = r.macroscopic {
        s.schedule = Some(ScheduleSpec::Macroscopic { theta });
    } else if let Some(beta) = r.mesoscopic {
        s.schedule = Some(ScheduleSpec::Mesoscopic { beta });
    } else if let Some(path) = &r.custom_j {
        s.schedule = Some(ScheduleSpec::CustomJ {
            name: format!("file:{}", path.display()),
        });
        s.custom_j_file = Some(path.clone());
    } else if let Some(spec) = &r.sarrt {
        s.schedule = Some(ScheduleSpec::Sarrt {
            law: parse_sarrt(spec)?,
        });
    }
    Ok(s)
}

fn parse_sarrt(spec: &str) -> Outcome<AttachmentSpec> {
    let bad = || usage(format!("bad --sarrt spec `{spec}`; expected uniform, uniform:LO,HI or power:GAMMA"));
    let (family, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Outcome<_>>()?
    };
    match (family, nums.as_slice()) {
        ("uniform", []) => Ok(AttachmentSpec::Uniform { lo: 0.0, hi: 1.0 }),
        ("uniform", [lo, hi]) => Ok(AttachmentSpec::Uniform { lo: *lo, hi: *hi }),
        ("power", [gamma]) => Ok(AttachmentSpec::Power { gamma: *gamma }),
        _ => Err(bad()),
    }
}

/// Reads `j(1), j(2), ...`, one per line, or `n,j` rows with an optional header.
pub fn read_custom_j(path: &Path) -> crate::Result<CustomJ> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.chars().any(|c| c.is_ascii_alphabetic())) {
            continue;
        }
        let bad = |reason: String| Error::Parse { line: i + 1, reason };
        let value = match line.split_once(',') {
            Some((n, j)) => {
                let n: u64 = n.trim().parse().map_err(|e| bad(format!("n: {e}")))?;
                if n != table.len() as u64 + 1 {
                    return Err(bad(format!("expected n = {}, got {n}", table.len() + 1)));
                }
                j
            }
            None => line,
        };
        table.push(value.trim().parse::<u64>().map_err(|e| bad(format!("j: {e}")))?);
    }
    CustomJ::from_table(format!("file:{}", path.display()), table)
}

/// Builds a schedule, reading custom `j` tables named `file:PATH`.
fn build_schedule(spec: &ScheduleSpec, file: Option<&Path>) -> Outcome<MemorySchedule> {
    let schedule = match spec {
        ScheduleSpec::CustomJ { name } => {
            let path = file
                .map(Path::to_path_buf)
                .or_else(|| name.strip_prefix("file:").map(PathBuf::from));
            match path {
                Some(p) => MemorySchedule::custom_j(read_custom_j(&p).map_err(|e| usage(e.to_string()))?),
                None => spec.build().map_err(|e| usage(e.to_string()))?,
            }
        }
        _ => spec.build().map_err(|e| usage(e.to_string()))?,
    };
    Ok(schedule)
}

struct Resolved {
    settings: Settings,
    schedule: Option<MemorySchedule>,
}

impl Resolved {
    fn schedule(&self) -> Outcome<&MemorySchedule> {
        self.schedule
            .as_ref()
            .ok_or_else(|| usage("a regime is required: --macroscopic, --mesoscopic, --custom-j or --sarrt"))
    }

    fn beta(&self, what: &str) -> Outcome<f64> {
        match self.schedule()? {
            MemorySchedule::Mesoscopic { beta } => Ok(*beta),
            _ => Err(usage(format!("{what} requires --mesoscopic"))),
        }
    }

    fn single_n(&self) -> Outcome<u64> {
        match self.settings.n.as_deref() {
            Some([n]) if *n >= 1 => Ok(*n),
            Some([_]) => Err(usage("--n must be at least 1")),
            Some(_) => Err(usage("expected a single --n")),
            None => Err(usage("--n is required")),
        }
    }

    fn seed(&self) -> u64 {
        self.settings.seed.unwrap_or(0)
    }

    fn reps(&self) -> Outcome<usize> {
        match self.settings.reps.unwrap_or(1) {
            0 => Err(usage("--reps must be at least 1")),
            r => Ok(r),
        }
    }

    fn format(&self) -> Format {
        self.settings.format.unwrap_or_default()
    }

    fn pool(&self) -> Outcome<rayon::ThreadPool> {
        if self.settings.threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.settings.threads.unwrap_or(0))
            .build()
            .map_err(|e| usage(e.to_string()))
    }

    /// The tree from `--tree` if given.
    fn input_tree(&self) -> Outcome<Option<Tree>> {
        let Some(path) = &self.settings.tree else { return Ok(None) };
        let file = File::open(path).map_err(io_failure(path))?;
        Ok(Some(Tree::read_csv(BufReader::new(file))?))
    }
}

fn resolve(common: &Common, flags: Settings) -> Outcome<Resolved> {
    let mut settings = load_settings(common.config.as_deref())?;
    let mut top = regime_settings(&common.regime)?;
    if !common.n.is_empty() {
        top.n = Some(common.n.clone());
    }
    top.seed = common.seed;
    top.format = common.format;
    top.overlay(&flags);
    settings.overlay(&top);
    let schedule = match &settings.schedule {
        Some(spec) => Some(build_schedule(spec, settings.custom_j_file.as_deref())?),
        None => None,
    };
    Ok(Resolved { settings, schedule })
}

/// Writes `body` as CSV (with a `<out>.config.json` sidecar carrying the
/// settings and summary) or as one JSON document.
fn emit(
    command: &str,
    resolved: &Resolved,
    out: Option<&Path>,
    csv: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    data: impl FnOnce() -> Value,
    summary: Value,
) -> Outcome<()> {
    let provenance = json!({
        "command": command,
        "config": resolved.settings,
        "summary": summary,
    });
    match resolved.format() {
        Format::Csv => {
            write_to(out, csv)?;
            if let Some(path) = out {
                let side = sidecar(path);
                let text = serde_json::to_string_pretty(&provenance).map_err(Error::from)?;
                fs::write(&side, text + "\n").map_err(io_failure(&side))?;
            }
        }
        Format::Json => {
            let mut doc = provenance;
            doc["data"] = data();
            let text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
            write_to(out, |w| writeln!(w, "{text}"))?;
        }
    }
    Ok(())
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

fn write_to(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(io_failure(path))?;
            let mut w = BufWriter::new(file);
            body(&mut w).map_err(io_failure(path))?;
            w.flush().map_err(io_failure(path))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w).and_then(|_| w.flush()).map_err(io_failure(Path::new("<stdout>")))
        }
    }
}

fn limit_degree_pmf(schedule: Option<&MemorySchedule>, k: u64) -> Option<f64> {
    match schedule? {
        MemorySchedule::Mesoscopic { .. } => Some(meso_degree_pmf(k)),
        MemorySchedule::Macroscopic { theta } => Some(macro_degree_pmf(*theta, k, 1e-10)),
        _ => None,
    }
}

fn grow(a: GrowArgs) -> Outcome<()> {
    let r = resolve(&a.common, Settings::default())?;
    let schedule = r.schedule()?;
    let n = r.single_n()?;
    let tree = grow_tree(schedule, n, r.seed())?;
    if let Some(path) = &a.export_dot {
        write_to(Some(path), |w| tree.write_dot(w))?;
    }
    let summary = json!({ "n": n, "height": height(&tree) });
    emit(
        "grow",
        &r,
        a.common.out.as_deref(),
        |w| tree.write_csv(w),
        || json!({ "n": n, "parents": tree.parents().collect::<Vec<_>>() }),
        summary,
    )
}

fn degrees(a: DegreesArgs) -> Outcome<()> {
    let flags = Settings {
        reps: a.reps,
        threads: a.threads,
        tree: a.tree.clone(),
        max_k: a.max_k,
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let vertices;
    if let Some(tree) = r.input_tree()? {
        hist = degree_histogram(&tree);
        vertices = tree.len();
    } else {
        let schedule = r.schedule()?;
        let n = r.single_n()?;
        let reps = r.reps()?;
        let seed = r.seed();
        let pool = r.pool()?;
        let hists: Vec<BTreeMap<u64, u64>> = pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| Ok(grow_streaming(schedule, n, derive_seed(seed, rep as u64), Collect::default())?.degree_histogram))
                .collect::<crate::Result<_>>()
        })?;
        for h in hists {
            for (k, c) in h {
                *hist.entry(k).or_insert(0) += c;
            }
        }
        vertices = n * reps as u64;
    }
    let max_k = r.settings.max_k.unwrap_or_else(|| *hist.keys().next_back().unwrap_or(&1));
    let schedule = r.schedule.as_ref();
    let reference = match schedule {
        Some(MemorySchedule::Mesoscopic { .. }) => Some(meso_degree_table(max_k.max(40))),
        Some(MemorySchedule::Macroscopic { theta }) => Some(macro_degree_table(*theta, max_k.max(40), 1e-10)),
        _ => None,
    };
    let total = vertices as f64;
    let rows: Vec<(u64, u64, f64, Option<f64>)> = (1..=max_k)
        .map(|k| {
            let c = hist.get(&k).copied().unwrap_or(0);
            (k, c, c as f64 / total, limit_degree_pmf(schedule, k))
        })
        .collect();
    let summary = match &reference {
        Some(pmf) => {
            let chi = chi_square(&hist, pmf)?;
            json!({ "vertices": vertices, "tv": tv_distance(&hist, pmf)?, "chi_square": chi })
        }
        None => json!({ "vertices": vertices }),
    };
    emit(
        "degrees",
        &r,
        a.common.out.as_deref(),
        |w| {
            writeln!(w, "k,count,frequency,limit")?;
            for (k, c, f, l) in &rows {
                writeln!(w, "{k},{c},{},{}", fmt_f64(*f), l.map(fmt_f64).unwrap_or_default())?;
            }
            Ok(())
        },
        || {
            json!(rows
                .iter()
                .map(|(k, c, f, l)| json!({ "k": k, "count": c, "frequency": f, "limit": l }))
                .collect::<Vec<_>>())
        },
        summary,
    )
}

fn height_scale(schedule: Option<&MemorySchedule>, n: u64) -> Option<f64> {
    match schedule? {
        MemorySchedule::Mesoscopic { beta } => Some((n as f64).powf(1.0 - beta)),
        MemorySchedule::Macroscopic { .. } if n >= 2 => Some((n as f64).ln()),
        _ => None,
    }
}

fn height_cmd(a: HeightArgs) -> Outcome<()> {
    let flags = Settings {
        reps: a.reps,
        threads: a.threads,
        tree: a.tree.clone(),
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    // rows: n, rep, seed, height
    let rows: Vec<(u64, usize, Option<u64>, u64)> = if let Some(tree) = r.input_tree()? {
        vec![(tree.len(), 0, tree.seed(), height(&tree))]
    } else {
        let schedule = r.schedule()?;
        let sizes = r.settings.n.clone().ok_or_else(|| usage("--n is required"))?;
        if sizes.contains(&0) {
            return Err(usage("--n must be at least 1"));
        }
        let reps = r.reps()?;
        let seed = r.seed();
        let pool = r.pool()?;
        let cells: Vec<(u64, usize, u64)> = sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| (0..reps).map(move |rep| (n, rep, derive_seed(seed, (i * reps + rep) as u64))))
            .collect();
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(n, rep, s)| Ok((n, rep, Some(s), grow_streaming(schedule, n, s, Collect::default())?.height)))
                .collect::<crate::Result<_>>()
        })?
    };
    let schedule = r.schedule.as_ref();
    let scaled = |n: u64, h: u64| height_scale(schedule, n).map(|s| h as f64 / s);
    let mut by_n: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for &(n, _, _, h) in &rows {
        by_n.entry(n).or_default().push(h as f64);
    }
    let summary: Vec<Value> = by_n
        .iter()
        .map(|(&n, hs)| {
            let mean = hs.iter().sum::<f64>() / hs.len() as f64;
            json!({ "n": n, "mean_height": mean, "mean_scaled": height_scale(schedule, n).map(|s| mean / s) })
        })
        .collect();
    emit(
        "height",
        &r,
        a.common.out.as_deref(),
        |w| {
            writeln!(w, "n,rep,seed,height,height_scaled")?;
            for &(n, rep, seed, h) in &rows {
                let seed = seed.map(|s| s.to_string()).unwrap_or_default();
                writeln!(w, "{n},{rep},{seed},{h},{}", scaled(n, h).map(fmt_f64).unwrap_or_default())?;
            }
            Ok(())
        },
        || {
            json!(rows
                .iter()
                .map(|&(n, rep, seed, h)| json!({ "n": n, "rep": rep, "seed": seed, "height": h, "height_scaled": scaled(n, h) }))
                .collect::<Vec<_>>())
        },
        json!(summary),
    )
}

fn chain(a: ChainArgs) -> Outcome<()> {
    let flags = Settings {
        reps: a.reps,
        threads: a.threads,
        t_max: a.t_max,
        convention: a.convention.map(Into::into),
        trace: a.trace.then_some(true),
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let beta = r.beta("chain")?;
    let n = r.single_n()?;
    let t_max = r.settings.t_max.unwrap_or(3.0);
    if t_max.is_nan() || t_max < 0.0 {
        return Err(usage("--t-max must be non-negative"));
    }
    let convention = r.settings.convention.unwrap_or_default();
    let seed = r.seed();
    let scale = (n as f64).powf(1.0 - beta);
    if r.settings.trace == Some(true) {
        let s = derive_seed(seed, 0);
        let labels = simulate_chain(n, beta, s, StopRule::Absorption, convention)?;
        let rows: Vec<(usize, f64, u64, f64, f64)> = labels
            .iter()
            .enumerate()
            .map(|(step, &l)| {
                let t = step as f64 / scale;
                Ok((step, t, l, l as f64 / n as f64, f_beta(beta, t)?))
            })
            .collect::<crate::Result<_>>()?;
        let residual = chain_sup_residual(&labels, n, beta, t_max)?;
        return emit(
            "chain",
            &r,
            a.common.out.as_deref(),
            |w| {
                writeln!(w, "step,t,label,scaled_label,f_beta")?;
                for (step, t, l, x, f) in &rows {
                    writeln!(w, "{step},{},{l},{},{}", fmt_f64(*t), fmt_f64(*x), fmt_f64(*f))?;
                }
                Ok(())
            },
            || json!({ "labels": labels }),
            json!({ "seed": s, "length": labels.len() - 1, "residual": residual }),
        );
    }
    let reps = r.reps()?;
    let pool = r.pool()?;
    let rows: Vec<(usize, u64, usize, f64)> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let s = derive_seed(seed, rep as u64);
                let labels = simulate_chain(n, beta, s, StopRule::Absorption, convention)?;
                Ok((rep, s, labels.len() - 1, chain_sup_residual(&labels, n, beta, t_max)?))
            })
            .collect::<crate::Result<_>>()
    })?;
    let mean = rows.iter().map(|r| r.3).sum::<f64>() / reps as f64;
    let max = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    emit(
        "chain",
        &r,
        a.common.out.as_deref(),
        |w| {
            writeln!(w, "rep,seed,length,residual")?;
            for (rep, s, len, res) in &rows {
                writeln!(w, "{rep},{s},{len},{}", fmt_f64(*res))?;
            }
            Ok(())
        },
        || {
            json!(rows
                .iter()
                .map(|(rep, s, len, res)| json!({ "rep": rep, "seed": s, "length": len, "residual": res }))
                .collect::<Vec<_>>())
        },
        json!({ "mean_residual": mean, "max_residual": max, "t_max": t_max }),
    )
}

fn fringe(a: FringeArgs) -> Outcome<()> {
    let flags = Settings {
        threads: a.threads,
        tree: a.tree.clone(),
        size_cap: a.size_cap,
        reference_draws: a.reference_draws,
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let cap = r.settings.size_cap.unwrap_or(4);
    if cap == 0 {
        return Err(usage("--size-cap must be at least 1"));
    }
    let draws = r.settings.reference_draws.unwrap_or(100_000);
    let tree = match r.input_tree()? {
        Some(t) => t,
        None => grow_tree(r.schedule()?, r.single_n()?, r.seed())?,
    };
    let empirical = empirical_fringe(&tree, cap)?.coarsen(cap);
    let reference_seed = derive_seed(r.seed(), u64::MAX);
    let monte_carlo = |draw: &(dyn Fn(u64) -> crate::Result<crate::fringe::FringeOutcome> + Sync)| -> Outcome<_> {
        if draws == 0 {
            return Err(usage("--reference-draws must be at least 1"));
        }
        let pool = r.pool()?;
        let outcomes: Vec<FringeKey> = pool.install(|| {
            (0..draws as u64)
                .into_par_iter()
                .map(|i| Ok(draw(derive_seed(reference_seed, i))?.key().coarsen(cap)))
                .collect::<crate::Result<_>>()
        })?;
        let mut freq: BTreeMap<FringeKey, f64> = BTreeMap::new();
        for k in outcomes {
            *freq.entry(k).or_insert(0.0) += 1.0 / draws as f64;
        }
        freq.remove(&FringeKey::Truncated);
        Ok(Some(freq))
    };
    let (reference, kind): (Option<BTreeMap<FringeKey, f64>>, &str) = match r.schedule.as_ref() {
        Some(MemorySchedule::Mesoscopic { .. }) => {
            let mut exact = poisson_gw_reference(cap.min(9));
            exact.remove(&FringeKey::Truncated);
            (Some(exact), "poisson_gw_exact")
        }
        Some(MemorySchedule::Macroscopic { theta }) => {
            let theta = *theta;
            (monte_carlo(&|s| sample_macro_fringe(theta, s, cap))?, "macro_monte_carlo")
        }
        Some(MemorySchedule::Sarrt(law)) => {
            let density = |v: f64| law.density(v);
            let sup = law.density_sup();
            (monte_carlo(&|s| sample_sarrt_fringe(&density, sup, s, cap))?, "sarrt_monte_carlo")
        }
        _ => (None, "none"),
    };
    let tv = reference.as_ref().map(|p| tv_distance(&empirical.counts, p)).transpose()?;
    let mut keys: Vec<FringeKey> = empirical.counts.keys().cloned().collect();
    if let Some(p) = &reference {
        keys.extend(p.keys().cloned());
    }
    keys.sort();
    keys.dedup();
    let rows: Vec<(FringeKey, u64, f64, Option<f64>)> = keys
        .into_iter()
        .map(|k| {
            let c = empirical.counts.get(&k).copied().unwrap_or(0);
            let f = c as f64 / empirical.total as f64;
            let q = reference.as_ref().map(|p| match &k {
                FringeKey::Truncated => (1.0 - p.values().sum::<f64>()).max(0.0),
                shape => p.get(shape).copied().unwrap_or(0.0),
            });
            (k, c, f, q)
        })
        .collect();
    emit(
        "fringe",
        &r,
        a.common.out.as_deref(),
        |w| {
            writeln!(w, "code,size,count,frequency,reference")?;
            for (k, c, f, q) in &rows {
                let size = k.size().map(|s| s.to_string()).unwrap_or_default();
                writeln!(w, "{k},{size},{c},{},{}", fmt_f64(*f), q.map(fmt_f64).unwrap_or_default())?;
            }
            Ok(())
        },
        || {
            json!(rows
                .iter()
                .map(|(k, c, f, q)| json!({ "code": k.to_string(), "size": k.size(), "count": c, "frequency": f, "reference": q }))
                .collect::<Vec<_>>())
        },
        json!({ "vertices": empirical.total, "size_cap": cap, "reference": kind, "tv": tv }),
    )
}

fn explore(a: ExploreArgs) -> Outcome<()> {
    let flags = Settings {
        tree: a.tree.clone(),
        k: a.k,
        starts: (!a.starts.is_empty()).then(|| a.starts.clone()),
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let tree = match r.input_tree()? {
        Some(t) => t,
        None => grow_tree(r.schedule()?, r.single_n()?, r.seed())?,
    };
    let starts = r.settings.starts.clone();
    let k = match (&starts, r.settings.k) {
        (Some(s), Some(k)) if s.len() != k => return Err(usage("--k disagrees with the number of --starts")),
        (Some(s), _) => s.len(),
        (None, k) => k.unwrap_or(2),
    };
    let trace = explore_ancestral_lines(&tree, k, starts.as_deref()).map_err(|e| match e {
        Error::InvalidParameter { .. } => usage(e.to_string()),
        other => Failure::Runtime(other),
    })?;
    if !trace.theory_applies {
        eprintln!("warning: start labels are not all in the window of n - 1; limit statements do not apply");
    }
    let sub = spanned_subtree(&tree, &trace.starts)?;
    if let Some(path) = &a.export_dot {
        write_to(Some(path), |w| sub.write_dot(w))?;
    }
    let depth = crate::analysis::depth_of(&tree, trace.terminal_label)?;
    let summary = json!({
        "termination": trace.termination,
        "terminal_label": trace.terminal_label,
        "terminal_depth": depth,
        "coalesced_pair": [trace.coalesced_pair.0 + 1, trace.coalesced_pair.1 + 1],
        "theory_applies": trace.theory_applies,
        "max_line_imbalance": trace.max_line_imbalance(),
    });
    emit(
        "explore",
        &r,
        a.common.out.as_deref(),
        |w| trace.write_csv(w),
        || json!({ "trace": trace, "spanned_subtree": sub.to_json() }),
        summary,
    )
}

fn spine(a: SpineArgs) -> Outcome<()> {
    let flags = Settings {
        reps: a.reps,
        threads: a.threads,
        tree: a.tree.clone(),
        slack: a.slack,
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let slack = r.settings.slack.unwrap_or(0.02);
    if slack.is_nan() || slack < 0.0 {
        return Err(usage("--slack must be non-negative"));
    }
    let histogram = |t: &Tree| -> (BTreeMap<u64, u64>, u64) {
        let mut h = BTreeMap::new();
        let d = spine_distances(t);
        for &x in &d[1..] {
            *h.entry(x as u64).or_insert(0) += 1;
        }
        let max = d[1..].iter().copied().max().unwrap_or(0) as u64;
        (h, max)
    };
    let per_rep: Vec<(BTreeMap<u64, u64>, u64)>;
    let n;
    if let Some(tree) = r.input_tree()? {
        n = tree.len();
        per_rep = vec![histogram(&tree)];
    } else {
        let schedule = r.schedule()?;
        n = r.single_n()?;
        let reps = r.reps()?;
        let seed = r.seed();
        per_rep = r.pool()?.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| Ok(histogram(&grow_tree(schedule, n, derive_seed(seed, rep as u64))?)))
                .collect::<crate::Result<_>>()
        })?;
    }
    let mut pooled: BTreeMap<u64, u64> = BTreeMap::new();
    for (h, _) in &per_rep {
        for (&k, &c) in h {
            *pooled.entry(k).or_insert(0) += c;
        }
    }
    let maxima: Vec<u64> = per_rep.iter().map(|(_, m)| *m).collect();
    let reference = match r.schedule.as_ref() {
        Some(MemorySchedule::Mesoscopic { beta }) => Some(((n as f64).powf(-beta), 1.0 - beta)),
        _ => None,
    };
    let verdict = reference
        .map(|(p, _)| cdf_dominance_counts(&pooled, shifted_geometric_cdf(p), slack))
        .transpose()?;
    let total: u64 = pooled.values().sum();
    let mut running = 0u64;
    let rows: Vec<(u64, u64, f64, Option<f64>)> = (0..=*pooled.keys().next_back().unwrap_or(&0))
        .map(|x| {
            let c = pooled.get(&x).copied().unwrap_or(0);
            running += c;
            (x, c, running as f64 / total as f64, reference.map(|(p, _)| shifted_geometric_cdf(p)(x)))
        })
        .collect();
    let mean_max = maxima.iter().sum::<u64>() as f64 / maxima.len() as f64;
    let summary = json!({
        "n": n,
        "max_dist_per_rep": maxima,
        "mean_max_dist_scaled": reference.map(|(_, e)| mean_max / (n as f64).powf(e)),
        "slack": slack,
        "dominance": verdict,
    });
    emit(
        "spine",
        &r,
        a.common.out.as_deref(),
        |w| {
            writeln!(w, "distance,count,empirical_cdf,reference_cdf")?;
            for (x, c, f, q) in &rows {
                writeln!(w, "{x},{c},{},{}", fmt_f64(*f), q.map(fmt_f64).unwrap_or_default())?;
            }
            Ok(())
        },
        || {
            json!(rows
                .iter()
                .map(|(x, c, f, q)| json!({ "distance": x, "count": c, "empirical_cdf": f, "reference_cdf": q }))
                .collect::<Vec<_>>())
        },
        summary,
    )
}

fn branchpoints(a: BranchpointArgs) -> Outcome<()> {
    let flags = Settings {
        reps: a.reps,
        threads: a.threads,
        k: a.k,
        ..Settings::default()
    };
    let r = resolve(&a.common, flags)?;
    let beta = r.beta("branchpoints")?;
    let n = r.single_n()?;
    let k = r.settings.k.unwrap_or(2);
    if k < 2 || n < k as u64 {
        return Err(usage("need 2 <= k <= n"));
    }
    let reps = r.reps()?;
    let records = r.pool()?.install(|| branchpoint_statistics(beta, n, k, reps, r.seed()))?;
    let exponent = (4 * k * (k - 1)) as i32;
    let scaled: Vec<f64> = records.iter().map(|b| b.scaled_depth).collect();
    let ks = ks_one_sample(&scaled, |x| x.clamp(0.0, 1.0).powi(exponent))?;
    let summary = json!({
        "k": k,
        "reference": format!("x^{exponent}"),
        "ks": ks,
        "mean_scaled_depth": scaled.iter().sum::<f64>() / scaled.len() as f64,
    });
    emit(
        "branchpoints",
        &r,
        a.common.out.as_deref(),
        |w| write_branchpoints_csv(&records, w),
        || json!(records),
        summary,
    )
}

fn constants(a: ConstantsArgs) -> Outcome<()> {
    let mut settings = load_settings(a.config.as_deref())?;
    settings.overlay(&Settings {
        theta: (!a.theta.is_empty()).then(|| a.theta.clone()),
        tol: a.tol,
        format: a.format,
        ..Settings::default()
    });
    let thetas = settings
        .theta
        .clone()
        .unwrap_or_else(|| (1..=9).map(|i| i as f64 / 10.0).collect());
    if let Some(bad) = thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(usage(format!("theta must lie in (0, 1), got {bad}")));
    }
    let tol = settings.tol.unwrap_or(1e-9);
    if tol.is_nan() || tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let rows: Vec<HeightConstants> = thetas
        .iter()
        .map(|&t| HeightConstants::compute(t, tol))
        .collect::<crate::Result<_>>()?;
    let worst = rows.iter().map(HeightConstants::duality_gap).fold(0.0, f64::max);
    let r = Resolved {
        settings,
        schedule: None,
    };
    emit(
        "constants",
        &r,
        a.out.as_deref(),
        |w| write_constants_csv(&rows, w),
        || json!(rows),
        json!({ "max_duality_gap": worst }),
    )
}

fn sweep(a: SweepArgs) -> Outcome<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| usage(format!("cannot read {}: {e}", a.config.display())))?;
    let mut config: SweepConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad sweep config {}: {e}", a.config.display())))?;
    if a.threads.is_some() {
        config.threads = a.threads;
    }
    if a.out.is_some() {
        config.output_dir = a.out.clone();
    }
    let schedule = build_schedule(&config.schedule, None)?;
    config.validate_with(&schedule).map_err(|e| usage(e.to_string()))?;
    let report = run_sweep_with(&config, schedule)?;
    match a.format.unwrap_or_default() {
        Format::Json => write_to(None, |w| writeln!(w, "{}", report.to_json().map_err(io::Error::other)?))?,
        Format::Csv => write_to(None, |w| write_aggregates_csv(&report, w))?,
    }
    if a.assert && !report.all_pass() {
        let failed: Vec<&str> = report.comparisons.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(Failure::Assert(format!("comparisons failed: {}", failed.join(", "))));
    }
    Ok(())
}

/// `n,metric,count,mean,variance,q05,...,q95` rows.
pub fn write_aggregates_csv(report: &ReplicationReport, w: &mut dyn Write) -> io::Result<()> {
    write!(w, "n,metric,count,mean,variance")?;
    let levels: Vec<&String> = report
        .aggregates
        .first()
        .map(|a| a.summary.quantiles.keys().collect())
        .unwrap_or_default();
    for l in &levels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for a in &report.aggregates {
        write!(
            w,
            "{},{},{},{},{}",
            a.n,
            a.metric,
            a.summary.count,
            fmt_f64(a.summary.mean),
            fmt_f64(a.summary.variance)
        )?;
        for l in &levels {
            write!(w, ",{}", fmt_f64(a.summary.quantiles[*l]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sarrt_specs() {
        assert_eq!(parse_sarrt("uniform").ok(), Some(AttachmentSpec::Uniform { lo: 0.0, hi: 1.0 }));
        assert_eq!(
            parse_sarrt("uniform:0.5,1").ok(),
            Some(AttachmentSpec::Uniform { lo: 0.5, hi: 1.0 })
        );
        assert_eq!(parse_sarrt("power:2").ok(), Some(AttachmentSpec::Power { gamma: 2.0 }));
        assert!(parse_sarrt("power").is_err());
        assert!(parse_sarrt("beta:1,2").is_err());
    }

    #[test]
    fn flags_override_config() {
        let mut base = Settings {
            n: Some(vec![10]),
            seed: Some(1),
            schedule: Some(ScheduleSpec::Macroscopic { theta: 0.5 }),
            ..Settings::default()
        };
        base.overlay(&Settings {
            seed: Some(2),
            ..Settings::default()
        });
        assert_eq!(base.seed, Some(2));
        assert_eq!(base.n, Some(vec![10]));
        assert_eq!(base.schedule, Some(ScheduleSpec::Macroscopic { theta: 0.5 }));
    }

    #[test]
    fn custom_j_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("j.txt");
        fs::write(&plain, "1\n1\n2\n3\n").unwrap();
        let j = read_custom_j(&plain).unwrap();
        let s = MemorySchedule::custom_j(j);
        assert_eq!(s.j(3), Some(2));
        // beyond the table the lag n - j(n) = 1 is kept
        assert_eq!(s.j(10), Some(9));
        let rows = dir.path().join("j.csv");
        fs::write(&rows, "n,j\n1,1\n2,1\n3,1\n").unwrap();
        assert!(read_custom_j(&rows).is_ok());
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "1,1\n3,1\n").unwrap();
        assert!(read_custom_j(&bad).is_err());
        let decreasing = dir.path().join("dec.txt");
        fs::write(&decreasing, "1\n2\n1\n").unwrap();
        assert!(read_custom_j(&decreasing).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar(Path::new("out/t.csv")), PathBuf::from("out/t.csv.config.json"));
    }
}
