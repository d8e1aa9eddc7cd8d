//! Reports certifying mass conservation, the energy inequality, alignment
//! dissipation, moment scaling in time, the pressure identity, the
//! renormalized continuity equation and the effective-viscous-flux proxy.

pub mod integrands;
pub mod truncation;

use serde::{Deserialize, Serialize};

use crate::constitutive::{checked_density, PeriodicKernel};
use crate::error::{invalid, Error, Result};
use crate::stepper::Trajectory;
use crate::torus::{neumaier_sum, Field};

pub use truncation::{
    truncation_l_k, truncation_l_k_prime, truncation_l_k_second, truncation_t, truncation_t_k, truncation_t_k_prime,
    truncation_t_k_second, truncation_t_prime, truncation_t_second,
};

/// Minimum ensemble size for moment-scaling fits.
pub const MIN_SCALING_PATHS: usize = 64;

/// Terms of the energy balance at time `time`; dissipation and source terms
/// are cumulative from `0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub time: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    pub stress_dissip: f64,
    pub visc_dissip: f64,
    pub density_dissip: f64,
    /// `½∫∭ϱϱψ(u(y) - u(x))²`.
    pub alignment_dissip: f64,
    pub ito_correction: f64,
    pub stochastic_work: f64,
    /// `-ε∫∫(∇K * ϱ)·∇ϱ`.
    pub remainder_viscous: f64,
    /// `∫∫(K * ϱ) div(ϱ(u - [u]_R))`.
    pub remainder_cutoff: f64,
    /// `[E(τ) + dissipation] - [E(0) + sources]`; `≤ 0` up to discretization.
    pub residual: f64,
}

impl EnergyReport {
    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }

    pub fn dissipation(&self) -> f64 {
        self.stress_dissip + self.visc_dissip + self.density_dissip + self.alignment_dissip
    }

    /// Smallest of the four dissipation integrals.
    pub fn min_dissipation(&self) -> f64 {
        self.stress_dissip
            .min(self.visc_dissip)
            .min(self.density_dissip)
            .min(self.alignment_dissip)
    }
}

/// Terms of the pressure identity over `[0, time]`.
///
/// `terms[i]` holds `I_{i+1}`: transport of the test field (1), initial and
/// final momentum pairings (2, 3), convection (4), mean pressure (5), stress
/// (6), artificial viscosity (7), interaction (8), alignment (9) and the
/// stochastic integral (10).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub time: f64,
    /// `∫∫χ p_δ(ϱ)ϱ`.
    pub lhs: f64,
    pub terms: [f64; 10],
    /// `lhs - Σ terms`.
    pub defect: f64,
}

/// Convex/concave functions `b` tracked through the renormalized continuity
/// equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Renormalization {
    Identity,
    Square,
    RhoLogRho,
    Tk { k: f64 },
    Lk { k: f64 },
}

impl Renormalization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Tk { k } | Self::Lk { k } if !(k >= 1.0) || !k.is_finite() => Err(invalid(
                "renormalization.k",
                format!("must be finite and at least 1, got {k}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Identity => "z".into(),
            Self::Square => "z^2".into(),
            Self::RhoLogRho => "z log z".into(),
            Self::Tk { k } => format!("T_{k}"),
            Self::Lk { k } => format!("L_{k}"),
        }
    }

    pub fn b(&self, z: f64) -> f64 {
        match *self {
            Self::Identity => z,
            Self::Square => z * z,
            Self::RhoLogRho => {
                if z > 0.0 {
                    z * z.ln()
                } else {
                    0.0
                }
            }
            Self::Tk { k } => truncation_t_k(z, k),
            Self::Lk { k } => truncation_l_k(z, k),
        }
    }

    pub fn prime(&self, z: f64) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::Square => 2.0 * z,
            Self::RhoLogRho => z.ln() + 1.0,
            Self::Tk { k } => truncation_t_k_prime(z, k),
            Self::Lk { k } => truncation_l_k_prime(z, k),
        }
    }

    pub fn second(&self, z: f64) -> f64 {
        match *self {
            Self::Identity => 0.0,
            Self::Square => 2.0,
            Self::RhoLogRho => 1.0 / z,
            Self::Tk { k } => truncation_t_k_second(z, k),
            Self::Lk { k } => truncation_l_k_second(z, k),
        }
    }

    /// `b'(z)z - b(z)`, in closed form so it stays finite at `z = 0`.
    pub fn defect_weight(&self, z: f64) -> f64 {
        match *self {
            Self::Identity => 0.0,
            Self::Square => z * z,
            Self::RhoLogRho => z,
            Self::Tk { k } => z * truncation_t_k_prime(z, k) - truncation_t_k(z, k),
            Self::Lk { k } => truncation_t_k(z, k),
        }
    }

    /// `∫b(ϱ)`; errors where `b` is not evaluable on the attained range.
    pub fn integral(&self, rho: &Field) -> Result<f64> {
        let rho = checked_density(rho)?;
        let needs_positive = matches!(self, Self::RhoLogRho | Self::Lk { .. });
        if needs_positive && rho.min() <= 0.0 {
            return Err(invalid(
                "renormalization",
                format!("{} needs a strictly positive density", self.name()),
            ));
        }
        Ok(rho.map(|z| self.b(z)).integral())
    }
}

/// `max_t |∫ϱ(t) - M|` over every record and stored snapshot.
pub fn mass_residual(traj: &Trajectory) -> f64 {
    let m = traj.initial_mass;
    let records = traj.records.iter().map(|r| (r.mass - m).abs());
    let snaps = traj.snapshots.iter().map(|s| (s.rho.integral() - m).abs());
    records.chain(snaps).fold(0.0, f64::max)
}

fn record_index(traj: &Trajectory, tau: f64) -> Result<usize> {
    let tol = 1e-9 * traj.h_last.max(1e-300);
    traj.records
        .iter()
        .position(|r| (r.time - tau).abs() <= tol)
        .ok_or_else(|| invalid("tau", format!("{tau} is not a step time of the trajectory")))
}

/// Energy balance at step time `tau`.
pub fn energy_report(traj: &Trajectory, tau: f64) -> Result<EnergyReport> {
    Ok(traj.records[record_index(traj, tau)?].energy)
}

/// `∭ϱ(x)ϱ(y)ψ(x - y)(u(y) - u(x))²` via the convolution identity.
pub fn alignment_dissipation(rho: &Field, u: &Field, psi: &PeriodicKernel) -> f64 {
    2.0 * integrands::alignment_rate(rho, u, psi)
}

/// Moments of momentum increments against the time lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentScalingReport {
    pub lags: Vec<f64>,
    pub r: f64,
    /// `E‖Π_m(ϱu)(τ₂) - Π_m(ϱu)(τ₁)‖^r`, one entry per lag.
    pub moments: Vec<f64>,
    /// Least-squares slope of `log moment` against `log lag`; absent for a
    /// single lag.
    pub slope: Option<f64>,
    pub paths: usize,
    /// Increment samples per lag (paths × start times).
    pub samples: Vec<usize>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Increment moments of `Π_m(ϱu)` at each lag, averaged over paths and over
/// every pair of stored snapshots separated by the lag.
pub fn moment_scaling(ensemble: &[Trajectory], r: f64, lags: &[f64]) -> Result<MomentScalingReport> {
    if ensemble.len() < MIN_SCALING_PATHS {
        return Err(Error::InsufficientEnsemble {
            found: ensemble.len(),
            required: MIN_SCALING_PATHS,
        });
    }
    if !(r >= 2.0) {
        return Err(invalid("r", format!("moment order must be at least 2, got {r}")));
    }
    if lags.is_empty() || lags.windows(2).any(|w| !(w[1] > w[0])) || !(lags[0] > 0.0) {
        return Err(invalid("lags", "must be positive and strictly increasing"));
    }
    let tol = 1e-9 * ensemble[0].h_last;
    let mut moments = Vec::with_capacity(lags.len());
    let mut samples = Vec::with_capacity(lags.len());
    for &lag in lags {
        let mut vals = Vec::new();
        for traj in ensemble {
            let snaps = &traj.snapshots;
            for (i, a) in snaps.iter().enumerate() {
                if let Some(b) = snaps[i + 1..].iter().find(|b| (b.time - a.time - lag).abs() <= tol) {
                    let d: f64 = a.momentum.iter().zip(&b.momentum).map(|(x, y)| (y - x).powi(2)).sum();
                    vals.push(d.sqrt().powf(r));
                }
            }
        }
        if vals.is_empty() {
            return Err(invalid("lags", format!("lag {lag} exceeds the stored horizon")));
        }
        samples.push(vals.len());
        moments.push(neumaier_sum(vals.iter().copied()) / vals.len() as f64);
    }
    let lx: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    Ok(MomentScalingReport {
        lags: lags.to_vec(),
        r,
        slope: fit_slope(&lx, &ly),
        moments,
        paths: ensemble.len(),
        samples,
    })
}

/// Pressure identity over the whole trajectory.
pub fn pressure_identity_report(traj: &Trajectory) -> PressureReport {
    traj.final_record().pressure
}

/// `(t, D(t))` with `D(t) = ∫b(ϱ(t)) - ∫b(ϱ₀) + ∫₀ᵗ∫[(b'ϱ - b) div[u]_R + εb''|∇ϱ|²]`.
pub fn renormalized_defect(traj: &Trajectory, b: Renormalization) -> Result<Vec<(f64, f64)>> {
    let idx = traj
        .renormalizations
        .iter()
        .position(|r| *r == b)
        .ok_or_else(|| Error::UntrackedRenormalization(b.name()))?;
    Ok(traj.records.iter().map(|r| (r.time, r.renormalized[idx])).collect())
}

/// `∫ϱ log ϱ` of each sweep member and gaps between neighbours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvfReport {
    pub entropies: Vec<f64>,
    /// `|e_i - e_{i+1}|`, coarse to fine.
    pub gaps: Vec<f64>,
}

impl EvfReport {
    /// Every gap at least `factor` times smaller than its predecessor.
    pub fn gaps_decrease(&self, factor: f64) -> bool {
        self.gaps.windows(2).all(|w| w[1] * factor <= w[0])
    }
}

/// Effective-viscous-flux proxy over final densities ordered coarse to fine.
pub fn evf_defect(members: &[&Field]) -> Result<EvfReport> {
    let entropies = members
        .iter()
        .map(|rho| integrands::entropy(rho))
        .collect::<Result<Vec<_>>>()?;
    let gaps = entropies.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    Ok(EvfReport { entropies, gaps })
}
