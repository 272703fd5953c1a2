//! CSV tables and the JSON run report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use abphase_core::interferometer::{FringePattern, PhaseComparison, TwoArmHistory};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> std::io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&x| format_number(x)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

pub const HISTORY_HEADER: [&str; 8] = [
    "t",
    "norm1",
    "norm2",
    "mean_p1",
    "mean_p2",
    "phase1",
    "phase2",
    "dphi_unwrapped",
];

pub fn write_history(path: &Path, h: &TwoArmHistory) -> std::io::Result<()> {
    let rows = (0..h.times.len()).map(|i| {
        [
            h.times[i],
            h.norm1[i],
            h.norm2[i],
            h.mean_p1[i],
            h.mean_p2[i],
            h.phase1[i],
            h.phase2[i],
            h.dphi[i],
        ]
    });
    write_csv(path, &HISTORY_HEADER, rows)
}

pub fn write_fringes(path: &Path, pattern: &FringePattern) -> std::io::Result<()> {
    let rows = pattern
        .screen_positions
        .iter()
        .zip(&pattern.intensities)
        .map(|(&x, &i)| [x, i]);
    write_csv(path, &["screen_position", "intensity"], rows)
}

/// Residuals of one run at `step` and `step / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub step: f64,
    pub residual: f64,
    pub half_step: f64,
    pub half_residual: f64,
    /// `|residual| / |half_residual|`; about 4 for a second-order scheme
    /// whose error is above rounding.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_echo: ScenarioConfig,
    pub comparison: PhaseComparison,
    pub fringe_kick: f64,
    pub fringe_shift: f64,
    pub timing_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
}

pub fn write_report(path: &Path, report: &RunReport) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}
