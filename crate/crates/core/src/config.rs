//! Serializable run configuration, dotted-path overrides and canonical hashing.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constitutive::{KernelPreset, PeriodicKernel, ViscosityParams, DEFAULT_TAIL_THRESHOLD};
use crate::diagnostics::Renormalization;
use crate::error::{invalid, Error, Result};
use crate::noise::NoiseSpec;
use crate::torus::{Field, TorusGrid};

/// Which density weights the final `M_ϱ⁻¹` of a momentum step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassWeightTime {
    Start,
    #[default]
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    pub a: f64,
    pub gamma: f64,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self { a: 1.0, gamma: 2.0 }
    }
}

/// A kernel given by a preset or by a file of grid samples (CSV text, or
/// little-endian `f64` when the extension is `.bin`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSource {
    Preset(KernelPreset),
    Tabulated { file: PathBuf },
}

impl KernelSource {
    pub fn build(&self, grid: &TorusGrid) -> Result<PeriodicKernel> {
        match self {
            KernelSource::Preset(p) => Ok(PeriodicKernel::from_preset(grid, p.clone())),
            KernelSource::Tabulated { file } => PeriodicKernel::from_field(load_samples(file, grid)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub k: KernelSource,
    pub psi: KernelSource,
    pub tail_threshold: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            k: KernelSource::Preset(KernelPreset::CosineSum { amplitude: 1.0 }),
            psi: KernelSource::Preset(KernelPreset::RaisedCosine { amplitude: 1.0 }),
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

impl KernelConfig {
    pub fn zero() -> Self {
        Self {
            k: KernelSource::Preset(KernelPreset::Zero),
            psi: KernelSource::Preset(KernelPreset::Zero),
            ..Self::default()
        }
    }
}

/// Discretization and regularization knobs of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub dim: usize,
    pub n: usize,
    /// Galerkin modes; `0` selects the full dealiased band.
    pub m: usize,
    pub h: f64,
    pub t_final: f64,
    /// Minimum number of inner density steps per outer step.
    pub sub_steps: usize,
    pub eps: f64,
    pub delta: f64,
    pub radius: f64,
    pub pressure: PressureConfig,
    pub viscosity: ViscosityParams,
    pub kernels: KernelConfig,
    pub noise: NoiseSpec,
    pub rho_floor: f64,
    pub mass_weight_time: MassWeightTime,
    pub drift_enabled: bool,
    /// Spacing of the underlying Wiener grid; defaults to `h`.
    pub noise_base_dt: Option<f64>,
    /// Store a state snapshot every this many steps (`0`: first and last only).
    pub snapshot_every: usize,
    pub renormalizations: Vec<Renormalization>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 32,
            m: 9,
            h: 0.01,
            t_final: 0.2,
            sub_steps: 8,
            eps: 0.05,
            delta: 0.01,
            radius: 1e3,
            pressure: PressureConfig::default(),
            viscosity: ViscosityParams { mu: 0.1, lambda: 0.1 },
            kernels: KernelConfig::default(),
            noise: NoiseSpec::default(),
            rho_floor: 1e-8,
            mass_weight_time: MassWeightTime::End,
            drift_enabled: true,
            noise_base_dt: None,
            snapshot_every: 1,
            renormalizations: vec![
                Renormalization::Identity,
                Renormalization::Square,
                Renormalization::RhoLogRho,
            ],
        }
    }
}

impl SchemeConfig {
    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityInit {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · (1/d) Σ_a cos(π k x_a)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        wavenumber: i64,
    },
    Tabulated {
        file: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityInit {
    Zero,
    Uniform {
        value: Vec<f64>,
    },
    /// `u_a = amplitude · sin(π k x_a)`.
    Compressive {
        amplitude: f64,
        wavenumber: i64,
    },
    /// `u_a = amplitude · sin(π k x_{a+1})` (cyclic; equals `Compressive` in 1-D).
    Shear {
        amplitude: f64,
        wavenumber: i64,
    },
    /// One file holding all `d` components, component-major.
    Tabulated {
        file: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub rho: DensityInit,
    pub u: VelocityInit,
    /// Admissible range `[ϱ̲, ϱ̄]` for the initial density.
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            rho: DensityInit::Cosine {
                mean: 1.0,
                amplitude: 0.2,
                wavenumber: 1,
            },
            u: VelocityInit::Compressive {
                amplitude: 0.5,
                wavenumber: 1,
            },
            rho_min: 1e-3,
            rho_max: 1e3,
        }
    }
}

impl InitialConfig {
    pub fn density(&self, grid: &TorusGrid) -> Result<Field> {
        let rho = match &self.rho {
            DensityInit::Constant { value } => Field::constant(grid, *value),
            DensityInit::Cosine {
                mean,
                amplitude,
                wavenumber,
            } => {
                let d = grid.dim() as f64;
                let k = *wavenumber as f64;
                Field::from_fn(grid, |x| {
                    mean + amplitude * x.iter().map(|&v| (PI * k * v).cos()).sum::<f64>() / d
                })
            }
            DensityInit::Tabulated { file } => load_samples(file, grid)?,
        };
        if !rho.is_finite() || rho.min() < self.rho_min || rho.max() > self.rho_max {
            return Err(invalid(
                "initial.rho",
                format!(
                    "initial density range [{}, {}] outside admissible [{}, {}]",
                    rho.min(),
                    rho.max(),
                    self.rho_min,
                    self.rho_max
                ),
            ));
        }
        Ok(rho)
    }

    pub fn velocity(&self, grid: &TorusGrid) -> Result<Field> {
        let d = grid.dim();
        Ok(match &self.u {
            VelocityInit::Zero => Field::zeros(grid, d),
            VelocityInit::Uniform { value } => {
                if value.len() != d {
                    return Err(invalid("initial.u.value", format!("needs {d} components")));
                }
                Field::vector_from_fn(grid, |_, o| o.copy_from_slice(value))
            }
            VelocityInit::Compressive { amplitude, wavenumber } => Field::vector_from_fn(grid, |x, o| {
                for a in 0..d {
                    o[a] = amplitude * (PI * *wavenumber as f64 * x[a]).sin();
                }
            }),
            VelocityInit::Shear { amplitude, wavenumber } => Field::vector_from_fn(grid, |x, o| {
                for a in 0..d {
                    o[a] = amplitude * (PI * *wavenumber as f64 * x[(a + 1) % d]).sin();
                }
            }),
            VelocityInit::Tabulated { file } => {
                let raw = read_numbers(file)?;
                Field::new(grid, d, raw).map_err(|e| invalid("initial.u.file", e.to_string()))?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub paths: usize,
    /// Moment orders reported per record time.
    pub moments: Vec<u32>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            paths: 16,
            moments: vec![2, 4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    H,
    M,
    Eps,
    Delta,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Self::H),
            "m" => Ok(Self::M),
            "eps" => Ok(Self::Eps),
            "delta" => Ok(Self::Delta),
            other => Err(invalid("sweep.axis", format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::H,
            values: vec![0.02, 0.01, 0.005],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleConfig {
    pub count: usize,
    pub h: f64,
    pub steps: usize,
    /// Gaussian bandwidth for the empirical fields, in grid cells.
    pub bandwidth_cells: f64,
    /// Standard deviation of the initial velocity spread.
    pub speed: f64,
    /// Optional Brownian velocity kick (visualization only).
    pub kick: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            count: 256,
            h: 0.01,
            steps: 100,
            bandwidth_cells: 4.0,
            speed: 0.5,
            kick: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Emit full state snapshots in the trajectory file.
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: std::env::var_os("STOCHFLOCK_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            snapshots: false,
        }
    }
}

/// The full configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scheme: SchemeConfig,
    pub initial: InitialConfig,
    pub ensemble: EnsembleConfig,
    pub sweep: SweepConfig,
    pub particles: ParticleConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses TOML and applies `a.b.c=value` overrides before deserializing.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("config parse error: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Invalid(format!("config error: {}", e.message())))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Canonical JSON (sorted keys) of every semantically meaningful field.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes to JSON");
        if let Some(out) = v.get_mut("output").and_then(|o| o.as_object_mut()) {
            out.remove("dir");
        }
        serde_json::to_string(&v).expect("JSON value serializes")
    }

    /// SHA-256 of [`RunConfig::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Sets `path = value` in a TOML table; the value is parsed as TOML when
/// possible and taken as a string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid("--set", format!("expected key=value, got `{assignment}`")))?;
    let value = parse_toml_value(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| invalid("--set", format!("`{key}` is not a table in `{path}`")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let ctx = |e: String| invalid("file", format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = std::fs::read(path).map_err(|e| ctx(e.to_string()))?;
        if bytes.len() % 8 != 0 {
            return Err(ctx("binary sample file length is not a multiple of 8".into()));
        }
        return Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect());
    }
    let text = std::fs::read_to_string(path).map_err(|e| ctx(e.to_string()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| ctx(format!("`{s}`: {e}"))))
        .collect()
}

/// Reads scalar grid samples (row-major, last axis fastest).
pub fn load_samples(path: &Path, grid: &TorusGrid) -> Result<Field> {
    let values = read_numbers(path)?;
    Field::scalar(grid, values).map_err(|e| invalid("file", format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn overrides_by_dotted_path() {
        let cfg = RunConfig::from_toml_with_overrides(
            "",
            &[
                "scheme.h=0.005".into(),
                "scheme.noise.k_max=4".into(),
                "scheme.mass_weight_time=start".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.scheme.h, 0.005);
        assert_eq!(cfg.scheme.noise.k_max, 4);
        assert_eq!(cfg.scheme.mass_weight_time, MassWeightTime::Start);
        assert!(RunConfig::from_toml_with_overrides("", &["scheme.bogus=1".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.scheme.eps = 0.051;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn kernel_sources_parse() {
        let cfg = RunConfig::from_toml_str("[scheme.kernels]\nk = { kind = \"zero\" }\npsi = { file = \"psi.csv\" }\n")
            .unwrap();
        assert_eq!(cfg.scheme.kernels.k, KernelSource::Preset(KernelPreset::Zero));
        assert_eq!(
            cfg.scheme.kernels.psi,
            KernelSource::Tabulated {
                file: PathBuf::from("psi.csv")
            }
        );
    }

    #[test]
    fn tabulated_samples_load() {
        let g = TorusGrid::new(1, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("k.csv");
        std::fs::write(&csv, "1, 2\n3 4\n").unwrap();
        assert_eq!(load_samples(&csv, &g).unwrap().values(), &[1.0, 2.0, 3.0, 4.0]);
        let bin = dir.path().join("k.bin");
        let bytes: Vec<u8> = [0.5f64, 1.5, 2.5, 3.5].iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&bin, bytes).unwrap();
        assert_eq!(load_samples(&bin, &g).unwrap().values()[3], 3.5);
        std::fs::write(&csv, "1, 2, 3").unwrap();
        assert!(load_samples(&csv, &g).is_err());
    }

    #[test]
    fn initial_density_range_is_enforced() {
        let g = TorusGrid::new(1, 16).unwrap();
        let init = InitialConfig {
            rho: DensityInit::Cosine {
                mean: 1.0,
                amplitude: 1.5,
                wavenumber: 1,
            },
            ..InitialConfig::default()
        };
        assert!(init.density(&g).is_err());
    }
}
