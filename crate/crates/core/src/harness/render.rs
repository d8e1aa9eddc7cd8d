//! Turns raw trajectory lines into report lines and summary rows.
//!
//! Commands render from lines that have been through the JSON round trip,
//! so `report` on stored output reproduces the original files byte for byte.

use std::collections::BTreeMap;

use crate::config::RunConfig;
use crate::diagnostics::{energy_report, mass_residual, moment_scaling, pressure_identity_report, renormalized_defect};
use crate::error::{Error, Result};
use crate::runner::{summarize, sweep_configs, sweep_report};
use crate::stepper::{SchemeParams, Snapshot, StepRecord, Trajectory};
use crate::torus::Field;

use super::sinks::{Command, Metadata, ReportLine, SnapshotLine, StepLine, SummaryRow, TrajectoryLine};

/// Member configs: the sweep members for `sweep`, else the config itself.
pub fn member_configs(command: Command, cfg: &RunConfig) -> Result<Vec<RunConfig>> {
    match command {
        Command::Sweep => sweep_configs(cfg, cfg.sweep.axis, &cfg.sweep.values),
        _ => Ok(vec![cfg.clone()]),
    }
}

/// Step records of every path, plus snapshots (all of them when
/// `all_snapshots`, otherwise the final one).
pub fn trajectory_lines(member: usize, traj: &Trajectory, all_snapshots: bool) -> Vec<TrajectoryLine> {
    let mut out: Vec<TrajectoryLine> = traj
        .records
        .iter()
        .map(|r| {
            TrajectoryLine::Step(StepLine {
                path: traj.path,
                member,
                record: r.clone(),
            })
        })
        .collect();
    let last = traj.snapshots.len() - 1;
    for (i, s) in traj.snapshots.iter().enumerate() {
        if all_snapshots || i == last {
            out.push(TrajectoryLine::Snapshot(SnapshotLine {
                path: traj.path,
                member,
                step: s.step,
                time: s.time,
                rho: s.rho.values().to_vec(),
                u: s.u.clone(),
                momentum: s.momentum.clone(),
            }));
        }
    }
    out
}

/// Rebuilds the trajectories of every `(member, path)` in first-seen order.
pub fn reconstruct(cfgs: &[RunConfig], lines: &[TrajectoryLine]) -> Result<Vec<(usize, SchemeParams, Trajectory)>> {
    let params: Vec<SchemeParams> = cfgs
        .iter()
        .map(|c| SchemeParams::from_config(&c.scheme))
        .collect::<Result<_>>()?;
    let mut order: Vec<(usize, u64)> = Vec::new();
    let mut records: BTreeMap<(usize, u64), Vec<StepRecord>> = BTreeMap::new();
    let mut snaps: BTreeMap<(usize, u64), Vec<Snapshot>> = BTreeMap::new();
    for line in lines {
        match line {
            TrajectoryLine::Step(s) => {
                let key = (s.member, s.path);
                if !records.contains_key(&key) {
                    order.push(key);
                }
                records.entry(key).or_default().push(s.record.clone());
            }
            TrajectoryLine::Snapshot(s) => {
                let p = params
                    .get(s.member)
                    .ok_or_else(|| Error::Invalid(format!("snapshot of unknown member {}", s.member)))?;
                snaps.entry((s.member, s.path)).or_default().push(Snapshot {
                    step: s.step,
                    time: s.time,
                    rho: Field::scalar(&p.grid, s.rho.clone())?,
                    u: s.u.clone(),
                    momentum: s.momentum.clone(),
                });
            }
            _ => {}
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (member, path) = key;
            let recs = records.remove(&key).unwrap_or_default();
            let snapshots = snaps.remove(&key).unwrap_or_default();
            if recs.is_empty() || snapshots.is_empty() {
                return Err(Error::Invalid(format!(
                    "incomplete trajectory for member {member}, path {path}"
                )));
            }
            let p = params[member].clone();
            let traj = Trajectory {
                seed: cfgs[member].seed,
                path,
                tau_r: recs.iter().find(|r| r.after_tau).map(|r| r.time),
                h_last: recs.last().map_or(p.h(), |r| if r.h > 0.0 { r.h } else { p.h() }),
                initial_mass: recs[0].mass,
                renormalizations: p.config.renormalizations.clone(),
                records: recs,
                snapshots,
            };
            Ok((member, p, traj))
        })
        .collect()
}

fn path_lines(member: usize, traj: &Trajectory, out: &mut Vec<ReportLine>) -> Result<SummaryRow> {
    let last = traj.final_record();
    let residual = mass_residual(traj);
    out.push(ReportLine::Mass {
        path: traj.path,
        member,
        residual,
    });
    let energy = energy_report(traj, last.time)?;
    out.push(ReportLine::Energy {
        path: traj.path,
        member,
        report: energy,
    });
    let pressure = pressure_identity_report(traj);
    out.push(ReportLine::Pressure {
        path: traj.path,
        member,
        report: pressure,
    });
    for b in &traj.renormalizations {
        let series = renormalized_defect(traj, *b)?;
        out.push(ReportLine::Renormalized {
            path: traj.path,
            member,
            name: b.name(),
            final_defect: series.last().map_or(0.0, |s| s.1),
            max_abs_defect: series.iter().fold(0.0, |m, s| f64::max(m, s.1.abs())),
        });
    }
    Ok(SummaryRow {
        path: Some(traj.path),
        member: Some(member),
        time: Some(last.time),
        mass_residual: Some(residual),
        total_energy: Some(energy.total_energy()),
        energy_residual: Some(energy.residual),
        min_dissipation: Some(
            traj.records
                .iter()
                .map(|r| r.energy.min_dissipation())
                .fold(f64::INFINITY, f64::min),
        ),
        pressure_defect: Some(pressure.defect),
        entropy: Some(last.entropy),
        ..SummaryRow::named("path")
    })
}

/// Report lines and summary rows for stored trajectory lines.
pub fn render(meta: &Metadata, lines: &[TrajectoryLine]) -> Result<(Vec<ReportLine>, Vec<SummaryRow>)> {
    let mut report = Vec::new();
    let mut rows = Vec::new();
    match meta.command {
        Command::Run | Command::Ensemble | Command::Sweep => {
            let cfgs = member_configs(meta.command, &meta.config)?;
            let trajs = reconstruct(&cfgs, lines)?;
            for (member, _, t) in &trajs {
                let mut row = path_lines(*member, t, &mut report)?;
                if meta.command == Command::Sweep {
                    row.value = meta.config.sweep.values.get(*member).copied();
                }
                rows.push(row);
            }
            match meta.command {
                Command::Ensemble => {
                    let paths: Vec<Trajectory> = trajs.into_iter().map(|t| t.2).collect();
                    let summary = summarize(&paths, &meta.config.ensemble.moments);
                    let mut row = SummaryRow::named("ensemble");
                    row.time = Some(summary.time);
                    row.mass_residual = Some(summary.max_mass_residual);
                    row.total_energy = Some(summary.total_energy.mean);
                    row.energy_residual = Some(summary.energy_residual.mean);
                    row.min_dissipation = Some(summary.min_dissipation);
                    row.pressure_defect = Some(summary.pressure_defect.mean);
                    rows.push(row);
                    report.push(ReportLine::Ensemble(summary));
                    let h = meta.config.scheme.h;
                    let horizon = meta.config.scheme.t_final;
                    let lags: Vec<f64> = (0..8)
                        .map(|i| h * f64::from(1u32 << i))
                        .filter(|l| *l <= 0.5 * horizon + 1e-12)
                        .collect();
                    for &r in &meta.config.ensemble.moments {
                        if let Ok(ms) = moment_scaling(&paths, f64::from(r), &lags) {
                            report.push(ReportLine::MomentScaling(ms));
                        }
                    }
                }
                Command::Sweep => {
                    let members: Vec<(SchemeParams, Trajectory)> = trajs.into_iter().map(|(_, p, t)| (p, t)).collect();
                    report.push(ReportLine::Sweep(sweep_report(
                        meta.config.sweep.axis,
                        &meta.config.sweep.values,
                        &members,
                    )?));
                }
                _ => {}
            }
        }
        Command::Particles => {
            for line in lines {
                if let TrajectoryLine::ParticleSummary(p) = line {
                    let mut row = SummaryRow::named("particles");
                    row.time = Some(p.time);
                    row.value = Some(p.variance_final);
                    row.passed = Some(p.variance_increases == 0);
                    rows.push(row);
                    report.push(ReportLine::Particles(p.clone()));
                }
            }
        }
        Command::Verify => {
            let mut passed = 0;
            let mut total = 0;
            for line in lines {
                if let TrajectoryLine::Check(c) = line {
                    total += 1;
                    passed += usize::from(c.passed);
                    let mut row = SummaryRow::named(c.name.clone());
                    row.value = c.value;
                    row.passed = Some(c.passed);
                    rows.push(row);
                    report.push(ReportLine::Check(c.clone()));
                }
            }
            report.push(ReportLine::Verify { passed, total });
        }
    }
    Ok((report, rows))
}
