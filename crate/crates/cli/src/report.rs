//! JSON documents written by the commands. Every document carries
//! `format_version`.

use serde::Serialize;

use rasch_gauss::inference::{CoverageMode, CoverageResult};
use rasch_gauss::tvlab::DistanceReport;

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Serialize)]
pub struct SimulateMeta {
    pub format_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub radius: f64,
    pub theta: Vec<f64>,
    pub ability: String,
    pub csv: String,
    pub header: bool,
}

#[derive(Debug, Serialize)]
pub struct Invariant {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Serialize)]
pub struct StatsDoc {
    pub format_version: &'static str,
    pub command: &'static str,
    pub n: u64,
    pub m: usize,
    /// Row sums.
    pub s: Vec<u64>,
    /// Column sums of the first m-1 items.
    pub t: Vec<u64>,
    /// Column sum of item m.
    pub t_m: u64,
    /// Score histogram N_0..N_m.
    pub counts: Vec<u64>,
    pub interior: u64,
    pub invariants: Vec<Invariant>,
}

#[derive(Debug, Serialize)]
pub struct SmoothingDoc {
    pub b: f64,
    pub alpha_exponent: Option<f64>,
    pub beta: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct EstimateDoc {
    pub format_version: &'static str,
    pub command: &'static str,
    pub n: u64,
    pub m: usize,
    pub degenerate: bool,
    pub alpha: f64,
    pub t: Vec<u64>,
    pub counts: Vec<u64>,
    /// Smoothed column sums; absent when b = 0.
    pub t_star: Option<Vec<f64>>,
    pub t_star_star: Option<Vec<f64>>,
    pub clamped: Option<bool>,
    pub center: Option<Vec<f64>>,
    /// Row-major m × m shape matrix.
    pub shape: Option<Vec<f64>>,
    pub iota: Option<f64>,
    pub maximal_axis: Option<f64>,
    pub smoothing: SmoothingDoc,
}

#[derive(Debug, Serialize)]
pub struct VerdictCounts {
    pub holds: usize,
    pub holds_as_shape: usize,
    pub violated: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Serialize)]
pub struct VerifyDoc {
    pub format_version: &'static str,
    pub command: &'static str,
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    pub reps: usize,
    pub summary: VerdictCounts,
    pub reports: Vec<DistanceReport>,
}

#[derive(Debug, Serialize)]
pub struct CoverInputs {
    pub m: usize,
    pub n: usize,
    pub radius: f64,
    pub theta: Vec<f64>,
    pub ability: String,
    pub alpha: f64,
    pub reps: usize,
    pub mode: CoverageMode,
    pub b: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct CoverDoc {
    pub format_version: &'static str,
    pub command: &'static str,
    pub inputs: CoverInputs,
    pub result: CoverageResult,
}
