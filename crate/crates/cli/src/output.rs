//! CSV formatting and the run manifest.
//!
//! Every CSV has a header row, a fixed column order, `.` decimals and `\n`
//! line endings. Measured reals use four decimals; τ values print as
//! integers when they are integral.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use tau_snn::experiments::{AccuracyGrid, FiringReport, Histogram, WeightStats};
use tau_snn::hwmap::{DeviceRecord, Verdict};
use tau_snn::training::TrainHistory;

use crate::CliError;

pub fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn fmt_tau(tau: f64) -> String {
    if tau.fract() == 0.0 && tau.abs() < 1e15 {
        format!("{tau:.0}")
    } else {
        f4(tau)
    }
}

pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for (i, (loss, acc)) in history.loss.iter().zip(&history.accuracy).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, f4(*loss), f4(*acc));
    }
    out
}

pub fn grid_header() -> String {
    "seed,tau_train,tau_infer,accuracy\n".into()
}

pub fn grid_rows(grid: &AccuracyGrid) -> String {
    let mut out = String::new();
    for (i, &tt) in grid.train_taus.iter().enumerate() {
        for (j, &ti) in grid.infer_taus.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                grid.seed,
                fmt_tau(tt),
                fmt_tau(ti),
                f4(grid.accuracy[i][j])
            );
        }
    }
    out
}

pub fn windows_header() -> String {
    "seed,tau_train,floor,tau_low,tau_high\n".into()
}

/// One row per training τ; the bounds are blank when no cell clears the floor.
pub fn window_row(seed: u64, tau_train: f64, floor: f64, window: Option<(f64, f64)>) -> String {
    let (lo, hi) = window.map_or((String::new(), String::new()), |(a, b)| (fmt_tau(a), fmt_tau(b)));
    format!("{seed},{},{},{lo},{hi}\n", fmt_tau(tau_train), f4(floor))
}

pub fn accuracy_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("tau,accuracy\n");
    for (tau, acc) in rows {
        let _ = writeln!(out, "{},{}", fmt_tau(*tau), f4(*acc));
    }
    out
}

/// Histogram rows in bin order, with the underflow and overflow bins first
/// and last.
pub fn histogram_rows(h: &Histogram) -> Vec<(String, String, u64)> {
    let mut rows = vec![("-inf".to_string(), f4(-h.bound), h.underflow)];
    for k in 0..h.bins() {
        let (l, r) = h.edges(k);
        rows.push((f4(l), f4(r), h.counts[k]));
    }
    rows.push((f4(h.bound), "inf".to_string(), h.overflow));
    rows
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (l, r, c) in histogram_rows(h) {
        let _ = writeln!(out, "{l},{r},{c}");
    }
    out
}

pub fn weight_stats_csv(stats: &WeightStats) -> String {
    let mut out = String::from("layer,std,kurtosis,near_zero_frac\n");
    for (i, layer) in stats.layers.iter().enumerate() {
        let kurt = layer.kurtosis.map(f4).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{kurt},{}",
            i + 1,
            f4(layer.std),
            f4(layer.near_zero_fraction)
        );
    }
    out
}

pub fn firing_csv(report: &FiringReport) -> String {
    let mut out = String::from("tau,layer,rate\n");
    for (tau, rates) in report.taus.iter().zip(&report.rates) {
        for (l, r) in rates.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_tau(*tau), l + 1, f4(*r));
        }
    }
    out
}

pub fn devices_csv(verdicts: &[(DeviceRecord, Verdict)]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    let _ = w.write_record(["name", "technology_class", "tau_min_s", "tau_max_s", "verdict"]);
    for (d, v) in verdicts {
        let _ = w.write_record([
            d.name.clone(),
            d.technology_class.to_string(),
            f4(d.tau_min_s),
            f4(d.tau_max_s),
            v.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn conversion_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("tau_discrete,tau_seconds\n");
    for (d, s) in rows {
        let _ = writeln!(out, "{},{}", fmt_tau(*d), f4(*s));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub duration_s: f64,
}

/// Collects output files for one command; `finish` writes `manifest.json`
/// after everything else.
pub struct RunRecorder {
    dir: PathBuf,
    argv: Vec<String>,
    start: Instant,
    outputs: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn new(dir: &Path, argv: &[String]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            argv: argv.to_vec(),
            start: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Records a file written by someone else (e.g. a checkpoint).
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(self, config: serde_json::Value, seed: Option<u64>) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: self.argv,
            config,
            seed,
            outputs: self.outputs,
            tool_version: format!("tau-snn {}", env!("CARGO_PKG_VERSION")),
            duration_s: self.start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
