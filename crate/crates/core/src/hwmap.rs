//! Conversion between discrete (software) and physical (hardware) time
//! constants, and device screening against per-task τ requirements.
//!
//! A discrete τ counts samples, so `tau_seconds = tau_discrete / rate`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::training::Task;
use crate::{Error, Result};

/// ECG sampling rate used as the series-task default.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 360.0;
pub const DYNAMIC_MIN_TAU_S: f64 = 0.01;
pub const SERIES_MIN_TAU_S: f64 = 0.2;
pub const DYNAMIC_MIN_TAU_DISCRETE: f64 = 4.0;
pub const SERIES_MIN_TAU_DISCRETE: f64 = 72.0;

pub fn to_hardware_tau(tau_discrete: f64, sample_rate_hz: f64) -> Result<f64> {
    if !(tau_discrete.is_finite() && tau_discrete >= 1.0) {
        return Err(Error::invalid(format!("discrete tau must be >= 1, got {tau_discrete}")));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::invalid(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    Ok(tau_discrete / sample_rate_hz)
}

pub fn to_software_tau(tau_seconds: f64, sample_rate_hz: f64) -> Result<f64> {
    if !(tau_seconds.is_finite() && tau_seconds > 0.0) {
        return Err(Error::invalid(format!(
            "tau in seconds must be positive, got {tau_seconds}"
        )));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::invalid(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    Ok(tau_seconds * sample_rate_hz)
}

/// `(tau_discrete, tau_seconds)` for every τ in `taus`.
pub fn conversion_table(taus: &[f64], sample_rate_hz: f64) -> Result<Vec<(f64, f64)>> {
    taus.iter()
        .map(|&t| Ok((t, to_hardware_tau(t, sample_rate_hz)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TechnologyClass {
    Transistor,
    Memristor,
    CmosCircuit,
    Optoelectronic,
}

impl fmt::Display for TechnologyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TechnologyClass::Transistor => "transistor",
            TechnologyClass::Memristor => "memristor",
            TechnologyClass::CmosCircuit => "cmos-circuit",
            TechnologyClass::Optoelectronic => "optoelectronic",
        })
    }
}

impl FromStr for TechnologyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transistor" => Ok(TechnologyClass::Transistor),
            "memristor" => Ok(TechnologyClass::Memristor),
            "cmos-circuit" => Ok(TechnologyClass::CmosCircuit),
            "optoelectronic" => Ok(TechnologyClass::Optoelectronic),
            other => Err(Error::invalid(format!("unknown technology class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub name: String,
    pub technology_class: TechnologyClass,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub reference: String,
}

impl DeviceRecord {
    pub fn new(
        name: &str,
        technology_class: TechnologyClass,
        tau_min_s: f64,
        tau_max_s: f64,
        reference: &str,
    ) -> Result<Self> {
        let rec = Self {
            name: name.to_string(),
            technology_class,
            tau_min_s,
            tau_max_s,
            reference: reference.to_string(),
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau_min_s > 0.0 && self.tau_min_s.is_finite() && self.tau_max_s.is_finite()) {
            return Err(Error::invalid(format!(
                "{}: tau values must be positive and finite",
                self.name
            )));
        }
        if self.tau_min_s > self.tau_max_s {
            return Err(Error::invalid(format!(
                "{}: tau_min_s {} exceeds tau_max_s {}",
                self.name, self.tau_min_s, self.tau_max_s
            )));
        }
        Ok(())
    }

    pub fn is_fixed_value(&self) -> bool {
        self.tau_min_s == self.tau_max_s
    }
}

/// Representative device time constants, one record per device; single
/// reported values are stored with `tau_min_s == tau_max_s`.
pub fn builtin_catalog() -> Vec<DeviceRecord> {
    use TechnologyClass::*;
    let rows: [(&str, TechnologyClass, f64, f64, &str); 12] = [
        ("High-k HfO₂ Transistor", Transistor, 2.93e-3, 2.93e-3, "[13]"),
        ("Ferroelectric FET", Transistor, 1.66, 6.97, "[16]"),
        ("Triboelectric Charge-trap Transistor", Transistor, 1.57, 83.94, "[22]"),
        ("MoS₂ Neuronal Device", Transistor, 29.25, 29.25, "[19]"),
        ("Li-based Synaptic Transistor", Transistor, 166.06, 166.06, "[12]"),
        (
            "Li-ion Solid Electrolyte 2D α-MoO₃ Nanosheet Transistor",
            Transistor,
            19.95,
            19.95,
            "[12]",
        ),
        ("MoS₂/Na⁺-diffused SiO₂ Transistor", Transistor, 21.99, 69.26, "[12]"),
        ("Na-based WOx Synaptic Transistor", Transistor, 221.77, 221.77, "[12]"),
        ("Standard CMOS LIF Neuron", CmosCircuit, 1e-3, 1.0, "[11]"),
        ("TiO₂:ZnO QD Memristor", Optoelectronic, 0.15, 0.36, "[20]"),
        ("Ferroelectric Memristor", Memristor, 8.69e-2, 8.69e-2, "[17]"),
        ("Organic Ferroelectric FTJ Memristor", Memristor, 39.0, 118.0, "[18]"),
    ];
    rows.iter()
        .map(|&(name, class, lo, hi, reference)| DeviceRecord::new(name, class, lo, hi, reference).unwrap())
        .collect()
}

/// Reads `name,technology_class,tau_min_s,tau_max_s,reference` rows after a
/// header. Errors carry the 1-based line number of the offending row.
pub fn parse_catalog<R: Read>(reader: R) -> Result<Vec<DeviceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Catalog {
            line: e.position().map_or(line + 1, |p| p.line()),
            msg: e.to_string(),
        })?;
        line = rec.position().map_or(line + 1, |p| p.line());
        let catalog_err = |msg: String| Error::Catalog { line, msg };
        let dev: DeviceRecord = rec.deserialize(None).map_err(|e| catalog_err(e.to_string()))?;
        dev.validate().map_err(|e| catalog_err(e.to_string()))?;
        out.push(dev);
    }
    Ok(out)
}

pub fn load_catalog(path: &Path) -> Result<Vec<DeviceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(std::io::BufReader::new(file))
}

pub fn write_catalog<W: Write>(writer: W, catalog: &[DeviceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::invalid(format!("writing catalog: {e}"));
    for dev in catalog {
        w.serialize(dev).map_err(err)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing catalog: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRequirement {
    pub task: Task,
    /// Devices need τ strictly above this; `None` accepts everything.
    pub min_tau_s: Option<f64>,
}

impl TaskRequirement {
    pub fn for_task(task: Task) -> Self {
        let min_tau_s = match task {
            Task::Static => None,
            Task::Dynamic => Some(DYNAMIC_MIN_TAU_S),
            Task::Series => Some(SERIES_MIN_TAU_S),
        };
        Self { task, min_tau_s }
    }

    /// The discrete-τ form of the requirement at `sample_rate_hz`.
    pub fn from_discrete(task: Task, sample_rate_hz: f64) -> Result<Self> {
        let min_tau_s = match task {
            Task::Static => None,
            Task::Dynamic => Some(to_hardware_tau(DYNAMIC_MIN_TAU_DISCRETE, sample_rate_hz)?),
            Task::Series => Some(to_hardware_tau(SERIES_MIN_TAU_DISCRETE, sample_rate_hz)?),
        };
        Ok(Self { task, min_tau_s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Partial,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Partial => "partial",
            Verdict::Fail => "fail",
        })
    }
}

/// Pass when the whole τ range exceeds the requirement, fail when no part
/// of it does, partial otherwise.
pub fn verdict(device: &DeviceRecord, req: &TaskRequirement) -> Verdict {
    match req.min_tau_s {
        None => Verdict::Pass,
        Some(thr) if device.tau_min_s > thr => Verdict::Pass,
        Some(thr) if device.tau_max_s <= thr => Verdict::Fail,
        Some(_) => Verdict::Partial,
    }
}

pub fn recommend_devices(req: &TaskRequirement, catalog: &[DeviceRecord]) -> Result<Vec<(DeviceRecord, Verdict)>> {
    if catalog.is_empty() {
        return Err(Error::invalid("device catalog is empty"));
    }
    Ok(catalog.iter().map(|d| (d.clone(), verdict(d, req))).collect())
}
