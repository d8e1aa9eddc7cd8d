//! Orchestration of single paths, ensembles and common-noise sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SchemeConfig, SweepAxis};
use crate::diagnostics::{evf_defect, EvfReport};
use crate::error::{invalid, Error, Result};
use crate::stepper::{run_path, GalerkinState, SchemeParams, Trajectory};
use crate::torus::{neumaier_sum, Field};

/// Builds the validated parameters and initial state of a config.
pub fn prepare(cfg: &RunConfig) -> Result<(SchemeParams, GalerkinState)> {
    let params = SchemeParams::from_config(&cfg.scheme)?;
    let rho = cfg.initial.density(&params.grid)?;
    let u = cfg.initial.velocity(&params.grid)?;
    let state = GalerkinState::new(&params, rho, &u)?;
    Ok((params, state))
}

/// Path `0` of the configured seed.
pub fn run_single(cfg: &RunConfig) -> Result<(SchemeParams, Trajectory)> {
    let (params, s0) = prepare(cfg)?;
    let traj = run_path(&params, &params.wiener_path(cfg.seed, 0), &s0)?;
    Ok((params, traj))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Paths `0..paths` of `seed`, returned in path order whatever the worker
/// count.
pub fn run_ensemble(
    params: &SchemeParams,
    initial: &GalerkinState,
    seed: u64,
    paths: usize,
    threads: Option<usize>,
) -> Result<Vec<Trajectory>> {
    if paths == 0 {
        return Err(invalid("ensemble.paths", "must be at least 1"));
    }
    with_threads(threads, || {
        (0..paths as u64)
            .into_par_iter()
            .map(|p| run_path(params, &params.wiener_path(seed, p), initial))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Sample mean and standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl MeanStat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = neumaier_sum(values.iter().copied()) / n as f64;
        let var = if n > 1 {
            neumaier_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            count: n,
        }
    }

    /// `mean ≤ k·std_err`.
    pub fn within_upper(&self, k: f64) -> bool {
        self.mean <= k * self.std_err
    }

    /// `|mean| ≤ k·std_err`.
    pub fn within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.std_err
    }
}

/// `E‖Π_m(ϱu)(T)‖^r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub r: u32,
    pub value: MeanStat,
}

/// Ensemble statistics at the final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub time: f64,
    pub energy_residual: MeanStat,
    pub total_energy: MeanStat,
    pub pressure_defect: MeanStat,
    pub stochastic_work: MeanStat,
    /// Smallest dissipation integral over every record of every path.
    pub min_dissipation: f64,
    pub max_mass_residual: f64,
    pub max_noise_bound_ratio: f64,
    pub moments: Vec<MomentEstimate>,
}

pub fn summarize(trajs: &[Trajectory], moments: &[u32]) -> EnsembleSummary {
    let finals: Vec<_> = trajs.iter().map(|t| t.final_record()).collect();
    let pick =
        |f: &dyn Fn(&crate::stepper::StepRecord) -> f64| MeanStat::of(&finals.iter().map(|r| f(r)).collect::<Vec<_>>());
    let norms: Vec<f64> = finals.iter().map(|r| r.momentum_norm).collect();
    let all = trajs.iter().flat_map(|t| &t.records);
    EnsembleSummary {
        paths: trajs.len(),
        time: finals.first().map_or(0.0, |r| r.time),
        energy_residual: pick(&|r| r.energy.residual),
        total_energy: pick(&|r| r.energy.total_energy()),
        pressure_defect: pick(&|r| r.pressure.defect),
        stochastic_work: pick(&|r| r.energy.stochastic_work),
        min_dissipation: all
            .clone()
            .map(|r| r.energy.min_dissipation())
            .fold(f64::INFINITY, f64::min),
        max_mass_residual: trajs.iter().map(crate::diagnostics::mass_residual).fold(0.0, f64::max),
        max_noise_bound_ratio: all.map(|r| r.noise_bound_ratio).fold(0.0, f64::max),
        moments: moments
            .iter()
            .map(|&r| MomentEstimate {
                r,
                value: MeanStat::of(&norms.iter().map(|n| n.powi(r as i32)).collect::<Vec<_>>()),
            })
            .collect(),
    }
}

/// One member of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub value: f64,
    pub final_energy: f64,
    pub max_energy: f64,
    pub final_residual: f64,
    pub entropy: f64,
    pub mass_residual: f64,
}

/// Common-noise refinement study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub members: Vec<SweepMember>,
    /// `‖ϱ_i(T) - ϱ_{i+1}(T)‖_{L²}` between neighbours.
    pub rho_gaps: Vec<f64>,
    /// `‖(ϱu)_i(T) - (ϱu)_{i+1}(T)‖_{L²}` between neighbours.
    pub momentum_gaps: Vec<f64>,
    pub evf: EvfReport,
}

impl SweepReport {
    /// Successive `rho_gaps` shrink by at least `factor`.
    pub fn rho_gaps_decrease(&self, factor: f64) -> bool {
        self.rho_gaps.windows(2).all(|w| w[1] * factor <= w[0])
    }

    /// Successive ratios `gap_i / gap_{i+1}`.
    pub fn rho_gap_ratios(&self) -> Vec<f64> {
        self.rho_gaps.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

fn apply_axis(cfg: &mut SchemeConfig, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::H => cfg.h = value,
        SweepAxis::Eps => cfg.eps = value,
        SweepAxis::Delta => cfg.delta = value,
        SweepAxis::M => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(invalid(
                    "sweep.values",
                    format!("mode counts must be positive integers, got {value}"),
                ));
            }
            cfg.m = value as usize;
        }
    }
    Ok(())
}

fn l2_gap(a: &Field, b: &Field) -> f64 {
    let d = a - b;
    d.inner(&d).sqrt()
}

/// The config of every sweep member: `axis` set to each value, all sharing
/// one Wiener grid. For an `h` sweep that grid is the smallest step, which
/// every other value must divide.
pub fn sweep_configs(base: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<RunConfig>> {
    if values.len() < 2 {
        return Err(invalid("sweep.values", "need at least two values"));
    }
    let base_dt = match axis {
        SweepAxis::H => values.iter().copied().fold(f64::INFINITY, f64::min),
        _ => base.scheme.noise_base_dt.unwrap_or(base.scheme.h),
    };
    values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            apply_axis(&mut c.scheme, axis, v)?;
            c.scheme.noise_base_dt = Some(base_dt);
            Ok(c)
        })
        .collect()
}

/// Runs path `0` of every member config.
pub fn run_sweep_members(cfgs: &[RunConfig], threads: Option<usize>) -> Result<Vec<(SchemeParams, Trajectory)>> {
    with_threads(threads, || {
        cfgs.par_iter()
            .map(|c| -> Result<_> {
                let (params, s0) = prepare(c)?;
                let traj = run_path(&params, &params.wiener_path(c.seed, 0), &s0)?;
                Ok((params, traj))
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Gaps between neighbouring members at their final states.
pub fn sweep_report(axis: SweepAxis, values: &[f64], members: &[(SchemeParams, Trajectory)]) -> Result<SweepReport> {
    let finals: Vec<(Field, Field)> = members
        .iter()
        .map(|(p, t)| {
            let s = t.final_snapshot();
            let q = p.space.velocity(&s.u).mul_scalar_field(&s.rho);
            (s.rho.clone(), q)
        })
        .collect();
    let rho_gaps = finals.windows(2).map(|w| l2_gap(&w[0].0, &w[1].0)).collect();
    let momentum_gaps = finals.windows(2).map(|w| l2_gap(&w[0].1, &w[1].1)).collect();
    let evf = evf_defect(&finals.iter().map(|f| &f.0).collect::<Vec<_>>())?;
    let members = members
        .iter()
        .zip(values)
        .zip(&evf.entropies)
        .map(|(((_, t), &value), &entropy)| SweepMember {
            value,
            final_energy: t.final_record().energy.total_energy(),
            max_energy: t
                .records
                .iter()
                .map(|r| r.energy.total_energy())
                .fold(f64::MIN, f64::max),
            final_residual: t.final_record().energy.residual,
            entropy,
            mass_residual: crate::diagnostics::mass_residual(t),
        })
        .collect();
    Ok(SweepReport {
        axis,
        members,
        rho_gaps,
        momentum_gaps,
        evf,
    })
}

/// Runs every sweep value against one shared Wiener path.
pub fn run_sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], threads: Option<usize>) -> Result<SweepReport> {
    let members = run_sweep_members(&sweep_configs(base, axis, values)?, threads)?;
    sweep_report(axis, values, &members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stat_of_known_sample() {
        let s = MeanStat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(MeanStat::of(&[-1.0, -2.0]).within_upper(0.0));
    }

    #[test]
    fn ensemble_is_ordered_and_thread_independent() {
        let mut cfg = RunConfig::default();
        cfg.scheme.t_final = 0.03;
        cfg.scheme.n = 16;
        cfg.scheme.m = 5;
        let (params, s0) = prepare(&cfg).unwrap();
        let a = run_ensemble(&params, &s0, 3, 4, Some(1)).unwrap();
        let b = run_ensemble(&params, &s0, 3, 4, Some(3)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.path, y.path);
            assert_eq!(x.records, y.records);
        }
        assert_eq!(a[2].path, 2);
    }
}
