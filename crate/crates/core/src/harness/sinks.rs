//! Record schemas and the NDJSON / CSV writers.
//!
//! Every line carries the schema version, config hash, seed and the
//! `git describe` of the build. Floats are written in shortest round-trip
//! form and parsed back exactly, so re-rendering stored output is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{EnergyReport, MomentScalingReport, PressureReport};
use crate::error::{Error, Result};
use crate::runner::{EnsembleSummary, SweepReport};
use crate::stepper::StepRecord;

pub const SCHEMA_VERSION: u32 = 1;

/// `git describe --always --dirty --tags` at build time.
pub const GIT_DESCRIBE: &str = env!("STOCHFLOCK_GIT_DESCRIBE");

pub const METADATA_FILE: &str = "metadata.json";
pub const TRAJECTORY_FILE: &str = "trajectory.ndjson";
pub const REPORT_FILE: &str = "report.ndjson";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub git_describe: String,
}

impl Header {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            git_describe: GIT_DESCRIBE.to_string(),
        }
    }
}

/// A header plus one body object, flattened into a single JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record<B> {
    #[serde(flatten)]
    pub header: Header,
    #[serde(flatten)]
    pub body: B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Ensemble,
    Sweep,
    Verify,
    Particles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "metadata")]
pub struct Metadata {
    pub command: Command,
    pub crate_version: String,
    /// `Σ_{k>k_max} g_k²`, the noise intensity left out by the truncation.
    pub noise_tail: f64,
    pub noise_retained: f64,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    pub path: u64,
    /// Sweep member index (`0` outside sweeps).
    pub member: usize,
    #[serde(flatten)]
    pub record: StepRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLine {
    pub path: u64,
    pub member: usize,
    pub step: usize,
    pub time: f64,
    pub rho: Vec<f64>,
    /// Velocity coefficients in `X_m`.
    pub u: Vec<f64>,
    /// Coefficients of `Π_m(ϱu)`.
    pub momentum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleLine {
    pub step: usize,
    pub time: f64,
    pub velocity_variance: f64,
    pub momentum: Vec<f64>,
}

/// Particle-versus-continuum comparison at the final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleReport {
    pub count: usize,
    pub steps: usize,
    pub time: f64,
    pub variance_initial: f64,
    pub variance_final: f64,
    /// Steps at which the velocity variance increased.
    pub variance_increases: usize,
    pub momentum_drift: f64,
    /// Relative `L²` distance of the empirical density from the continuum one.
    pub rho_distance: f64,
    /// Relative `L²` distance of the empirical momentum from `ϱu`.
    pub momentum_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    /// Absent when the check could not be evaluated.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub detail: String,
}

/// Raw output of a command; reports are rendered from these alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryLine {
    Step(StepLine),
    Snapshot(SnapshotLine),
    Particle(ParticleLine),
    ParticleSummary(ParticleReport),
    Check(CheckLine),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportLine {
    Mass {
        path: u64,
        member: usize,
        residual: f64,
    },
    Energy {
        path: u64,
        member: usize,
        report: EnergyReport,
    },
    Pressure {
        path: u64,
        member: usize,
        report: PressureReport,
    },
    Renormalized {
        path: u64,
        member: usize,
        name: String,
        final_defect: f64,
        max_abs_defect: f64,
    },
    Ensemble(EnsembleSummary),
    MomentScaling(MomentScalingReport),
    Sweep(SweepReport),
    Particles(ParticleReport),
    Check(CheckLine),
    Verify {
        passed: usize,
        total: usize,
    },
    Breach {
        step: Option<usize>,
        time: Option<f64>,
        cause: String,
    },
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub item: String,
    pub path: Option<u64>,
    pub member: Option<usize>,
    pub value: Option<f64>,
    pub time: Option<f64>,
    pub mass_residual: Option<f64>,
    pub total_energy: Option<f64>,
    pub energy_residual: Option<f64>,
    pub min_dissipation: Option<f64>,
    pub pressure_defect: Option<f64>,
    pub entropy: Option<f64>,
    pub passed: Option<bool>,
}

impl SummaryRow {
    pub fn named(item: impl Into<String>) -> Self {
        Self {
            item: item.into(),
            path: None,
            member: None,
            value: None,
            time: None,
            mass_residual: None,
            total_energy: None,
            energy_residual: None,
            min_dissipation: None,
            pressure_defect: None,
            entropy: None,
            passed: None,
        }
    }
}

/// The four files of an output directory.
#[derive(Clone, Debug)]
pub struct OutputSet {
    pub dir: PathBuf,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn open(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn metadata(&self) -> PathBuf {
        self.dir.join(METADATA_FILE)
    }

    pub fn trajectory(&self) -> PathBuf {
        self.dir.join(TRAJECTORY_FILE)
    }

    pub fn report(&self) -> PathBuf {
        self.dir.join(REPORT_FILE)
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join(SUMMARY_FILE)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes one JSON object per line.
pub fn write_ndjson<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::io(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::io(path, e))).collect()
}

/// Metadata of a command run with `cfg`.
pub fn metadata(command: Command, cfg: &RunConfig) -> Record<Metadata> {
    Record {
        header: Header::new(cfg),
        body: Metadata {
            command,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            noise_tail: cfg.scheme.noise.tail_mass(),
            noise_retained: cfg.scheme.noise.retained_mass(),
            config: cfg.clone(),
        },
    }
}

pub fn write_metadata(out: &OutputSet, meta: &Record<Metadata>) -> Result<()> {
    write_ndjson(&out.metadata(), std::iter::once(meta))
}

pub fn read_metadata(out: &OutputSet) -> Result<Record<Metadata>> {
    read_ndjson::<Record<Metadata>>(&out.metadata())?
        .into_iter()
        .next()
        .ok_or_else(|| Error::io(&out.metadata(), "empty metadata file"))
}
