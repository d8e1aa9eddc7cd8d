//! Command execution, output sinks, report rendering and the `verify`
//! battery. The CLI in [`cli`] is a thin layer over [`execute`] and
//! [`rerender`].

pub mod cli;
pub mod render;
pub mod sinks;
pub mod verify;

use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::particles::{empirical_fields, relative_l2, run_particles, ParticleState};
use crate::runner::{prepare, run_ensemble, run_single, run_sweep_members, sweep_configs};
use crate::stepper::{run_path, GalerkinState, SchemeParams};

use render::{render, trajectory_lines};
use sinks::{
    metadata, read_metadata, read_ndjson, write_metadata, write_ndjson, write_summary, Command, Header, OutputSet,
    ParticleLine, ParticleReport, Record, ReportLine, TrajectoryLine,
};

/// What a command left behind.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub out: OutputSet,
    pub report: Vec<ReportLine>,
}

impl Outcome {
    /// `false` when any check in the report failed.
    pub fn all_passed(&self) -> bool {
        self.report.iter().all(|l| match l {
            ReportLine::Check(c) => c.passed,
            ReportLine::Verify { passed, total } => passed == total,
            _ => true,
        })
    }
}

fn particle_lines(cfg: &RunConfig) -> Result<Vec<TrajectoryLine>> {
    let pc = &cfg.particles;
    if pc.count == 0 || !(pc.h > 0.0) {
        return Err(crate::error::invalid("particles", "need count ≥ 1 and h > 0"));
    }
    let mut scheme = cfg.scheme.clone();
    scheme.noise = NoiseSpec::off();
    scheme.t_final = pc.h * pc.steps.max(1) as f64;
    let params = SchemeParams::from_config(&scheme)?;
    let ps = ParticleState::random(params.grid.dim(), pc.count, pc.speed, cfg.seed)?;

    // The continuum run starts from the particles' own empirical fields.
    let (rho0, q0) = empirical_fields(&ps, &params.grid, pc.bandwidth_cells)?;
    let u0 = {
        let mut u = q0.clone();
        for c in 0..u.components() {
            for (v, r) in u.component_mut(c).iter_mut().zip(rho0.values()) {
                *v /= r;
            }
        }
        u
    };
    let s0 = GalerkinState::new(&params, rho0, &u0)?;
    let continuum = run_path(&params, &params.wiener_path(cfg.seed, 0), &s0)?;

    let kick = (pc.kick > 0.0).then_some((pc.kick, cfg.seed));
    let mut lines = Vec::with_capacity(pc.steps + 2);
    let mut state = ps.clone();
    let mut variance = vec![state.velocity_variance()];
    lines.push(TrajectoryLine::Particle(ParticleLine {
        step: 0,
        time: 0.0,
        velocity_variance: variance[0],
        momentum: state.total_momentum(),
    }));
    for step in 1..=pc.steps {
        let (next, v) = run_particles(
            &state,
            pc.h,
            1,
            &params.kernels,
            kick.map(|(s, seed)| (s, seed ^ step as u64)),
        );
        state = next;
        variance.push(v[1]);
        lines.push(TrajectoryLine::Particle(ParticleLine {
            step,
            time: state.time,
            velocity_variance: v[1],
            momentum: state.total_momentum(),
        }));
    }
    let (rho_p, q_p) = empirical_fields(&state, &params.grid, pc.bandwidth_cells)?;
    let last = continuum.final_snapshot();
    let q_c = params.space.velocity(&last.u).mul_scalar_field(&last.rho);
    let drift = ps
        .total_momentum()
        .iter()
        .zip(state.total_momentum())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    lines.push(TrajectoryLine::ParticleSummary(ParticleReport {
        count: pc.count,
        steps: pc.steps,
        time: state.time,
        variance_initial: variance[0],
        variance_final: *variance.last().expect("initial entry"),
        variance_increases: variance.windows(2).filter(|w| w[1] > w[0]).count(),
        momentum_drift: drift,
        rho_distance: relative_l2(&rho_p, &last.rho),
        momentum_distance: relative_l2(&q_p, &q_c),
    }));
    Ok(lines)
}

fn produce(command: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<TrajectoryLine>> {
    Ok(match command {
        Command::Run => {
            let (_, traj) = run_single(cfg)?;
            trajectory_lines(0, &traj, cfg.output.snapshots)
        }
        Command::Ensemble => {
            let (params, s0) = prepare(cfg)?;
            let trajs = run_ensemble(&params, &s0, cfg.seed, cfg.ensemble.paths, threads)?;
            trajs.iter().flat_map(|t| trajectory_lines(0, t, true)).collect()
        }
        Command::Sweep => {
            let cfgs = sweep_configs(cfg, cfg.sweep.axis, &cfg.sweep.values)?;
            let members = run_sweep_members(&cfgs, threads)?;
            members
                .iter()
                .enumerate()
                .flat_map(|(i, (_, t))| trajectory_lines(i, t, cfg.output.snapshots))
                .collect()
        }
        Command::Verify => verify::run_battery().into_iter().map(TrajectoryLine::Check).collect(),
        Command::Particles => particle_lines(cfg)?,
    })
}

fn write_rendered(
    out: &OutputSet,
    header: &Header,
    meta: &sinks::Metadata,
    lines: &[TrajectoryLine],
) -> Result<Vec<ReportLine>> {
    let (report, rows) = render(meta, lines)?;
    write_ndjson(
        &out.report(),
        report.iter().map(|body| Record {
            header: header.clone(),
            body,
        }),
    )?;
    write_summary(&out.summary(), &rows)?;
    Ok(report)
}

/// Runs `command` and writes metadata, trajectory, report and summary into
/// `cfg.output.dir`. A runtime breach leaves a `breach` line in the report.
pub fn execute(command: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<Outcome> {
    let out = OutputSet::create(&cfg.output.dir)?;
    let meta = metadata(command, cfg);
    write_metadata(&out, &meta)?;
    let lines = match produce(command, cfg, threads) {
        Ok(lines) => lines,
        Err(e) => {
            if e.is_runtime_breach() {
                let (step, time) = match &e {
                    Error::StepFailure { step, time, .. } => (Some(*step), Some(*time)),
                    _ => (None, None),
                };
                let breach = ReportLine::Breach {
                    step,
                    time,
                    cause: e.to_string(),
                };
                write_ndjson(
                    &out.report(),
                    std::iter::once(Record {
                        header: meta.header.clone(),
                        body: breach,
                    }),
                )?;
            }
            return Err(e);
        }
    };
    write_ndjson(
        &out.trajectory(),
        lines.iter().map(|body| Record {
            header: meta.header.clone(),
            body,
        }),
    )?;
    // Render from what was written, exactly as `report` would.
    let stored: Vec<Record<TrajectoryLine>> = read_ndjson(&out.trajectory())?;
    let stored: Vec<TrajectoryLine> = stored.into_iter().map(|r| r.body).collect();
    let report = write_rendered(&out, &meta.header, &meta.body, &stored)?;
    Ok(Outcome { out, report })
}

/// Re-renders the report and summary of stored output `from` into `to`.
pub fn rerender(from: &Path, to: &Path) -> Result<Outcome> {
    let src = OutputSet::open(from);
    let meta = read_metadata(&src)?;
    let lines: Vec<Record<TrajectoryLine>> = read_ndjson(&src.trajectory())?;
    let lines: Vec<TrajectoryLine> = lines.into_iter().map(|r| r.body).collect();
    let out = OutputSet::create(to)?;
    let report = write_rendered(&out, &meta.header, &meta.body, &lines)?;
    Ok(Outcome { out, report })
}
