//! JSON documents written by the command-line tool. Field order in each
//! struct is the key order in the output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::completion::{CompletionConfig, CompletionReport};
use crate::error::{Error, Result};
use crate::solver::{DecomposeReport, SolverConfig};
use crate::synth::TrialSummary;

pub const DECOMPOSE_SCHEMA: &str = include_str!("../schemas/decompose-report.schema.json");
pub const COMPLETE_SCHEMA: &str = include_str!("../schemas/complete-report.schema.json");
pub const SYNTH_SCHEMA: &str = include_str!("../schemas/synth-report.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub input: String,
    pub dims: Vec<usize>,
    pub config: SolverConfig,
    /// Upper triangle of the final rank matrix, lexicographic edge order.
    pub ranks: Vec<usize>,
    pub compression_ratio: f64,
    pub relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub re_trace: Vec<f64>,
    pub change_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(input: &Path, dims: &[usize], config: &SolverConfig, report: DecomposeReport) -> Self {
        Self {
            command: "decompose".into(),
            input: input.display().to_string(),
            dims: dims.to_vec(),
            config: config.clone(),
            ranks: report.ranks.entries().to_vec(),
            compression_ratio: report.compression_ratio,
            relative_error: report.relative_error,
            iterations: report.iterations,
            converged: report.converged,
            wall_time_ms: report.wall_time_ms,
            re_trace: report.re_trace,
            change_trace: report.change_trace,
            warnings: report.warnings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRunReport {
    pub command: String,
    pub input: String,
    pub mask: String,
    pub output: String,
    pub dims: Vec<usize>,
    pub config: CompletionConfig,
    pub observed_count: usize,
    pub missing_count: usize,
    pub ranks: Vec<usize>,
    pub compression_ratio: f64,
    pub observed_relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub change_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct CompletionPaths<'a> {
    pub input: &'a Path,
    pub mask: &'a Path,
    pub output: &'a Path,
}

impl CompletionRunReport {
    pub fn new(
        paths: CompletionPaths<'_>,
        dims: &[usize],
        config: &CompletionConfig,
        observed_count: usize,
        report: CompletionReport,
    ) -> Self {
        let total: usize = dims.iter().product();
        Self {
            command: "complete".into(),
            input: paths.input.display().to_string(),
            mask: paths.mask.display().to_string(),
            output: paths.output.display().to_string(),
            dims: dims.to_vec(),
            config: config.clone(),
            observed_count,
            missing_count: total - observed_count,
            ranks: report.ranks.entries().to_vec(),
            compression_ratio: report.compression_ratio,
            observed_relative_error: report.observed_relative_error,
            iterations: report.iterations,
            converged: report.converged,
            wall_time_ms: report.wall_time_ms,
            change_trace: report.change_trace,
            warnings: report.warnings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub command: String,
    pub config: SolverConfig,
    pub summary: TrialSummary,
    /// Plain-text rendering of the summary row.
    pub table: String,
}

/// Zeroes every wall-clock field so repeated runs serialize identically.
pub trait StripTiming {
    fn strip_timing(&mut self);
}

impl StripTiming for RunReport {
    fn strip_timing(&mut self) {
        self.wall_time_ms = 0.0;
    }
}

impl StripTiming for CompletionRunReport {
    fn strip_timing(&mut self) {
        self.wall_time_ms = 0.0;
    }
}

impl StripTiming for SynthReport {
    fn strip_timing(&mut self) {
        self.summary.mean_wall_time_ms = 0.0;
        for o in &mut self.summary.outcomes {
            o.wall_time_ms = 0.0;
        }
        self.table = crate::synth::format_summary_table(std::slice::from_ref(&self.summary));
    }
}

pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial report.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let path = path.as_ref();
    let text = to_json(report)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
