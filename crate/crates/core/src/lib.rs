//! Random recursive trees grown with limited memory: vertex `n + 1` attaches
//! uniformly to one of the vertices `j(n), ..., n`.
//!
//! The crate grows such trees under several memory schedules, measures
//! depth, degree and fringe statistics, evaluates the corresponding limit
//! objects, and runs reproducible replication sweeps.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exploration;
pub mod fringe;
pub mod limits;
pub mod rng;
pub mod schedule;
pub mod stats;
pub mod sweep;
pub mod tree;

pub use error::{Error, Result};
pub use schedule::{AttachmentLaw, CustomJ, MemorySchedule, ScheduleSpec};
pub use tree::{grow_streaming, grow_tree, Tree};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || (x.is_finite() && (1e-4..1e16).contains(&x.abs()) && x.fract() == 0.0) {
        // integers stay readable in CSV
        format!("{x:.0}")
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}
