//! The `verify` battery: one quick check per operation on small grids.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{KernelConfig, RunConfig, SweepAxis, VelocityInit};
use crate::constitutive::{
    coeff_norm, cutoff_chi, potential_delta, pressure_delta, stress_dissipation, validate_kernels, velocity_truncate,
    KernelPair, KernelPreset, PressureLaw, ViscosityParams, DEFAULT_TAIL_THRESHOLD,
};
use crate::diagnostics::{
    alignment_dissipation, energy_report, evf_defect, mass_residual, moment_scaling, pressure_identity_report,
    renormalized_defect, truncation_l_k, truncation_l_k_prime, truncation_t_k, Renormalization,
};
use crate::error::Result;
use crate::galerkin::{galerkin_rhs, mass_apply, mass_lipschitz_gap, mass_solve, GalerkinSpace};
use crate::noise::{momentum_noise_increment, NoiseModel, NoiseSpec, WienerPath};
use crate::particles::{empirical_fields, particle_step, ParticleState};
use crate::runner::{prepare, run_ensemble, run_single, run_sweep};
use crate::stepper::{density_substep, momentum_update, run_path, step, SchemeParams};
use crate::torus::{
    convolve, divergence, from_spectral, gradient, inv_laplacian, laplacian, lp_norm, mean, project_modes,
    sym_gradient, to_spectral, Field, TorusGrid,
};

use super::sinks::CheckLine;

fn check(name: &str, value: f64, tolerance: f64, passed: bool, detail: impl Into<String>) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        passed: passed && value.is_finite(),
        value: value.is_finite().then_some(value),
        tolerance,
        detail: detail.into(),
    }
}

/// `value ≤ tolerance`.
fn below(name: &str, value: f64, tolerance: f64, detail: &str) -> CheckLine {
    check(name, value, tolerance, value <= tolerance, detail)
}

fn random_field(grid: &TorusGrid, rng: &mut ChaCha8Rng, components: usize) -> Field {
    let vals = (0..grid.len() * components)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Field::new(grid, components, vals).expect("sized")
}

/// Smooth positive density with a few random low modes.
fn random_density(grid: &TorusGrid, rng: &mut ChaCha8Rng) -> Field {
    let c: Vec<f64> = (0..4).map(|_| rng.random_range(-0.1..0.1)).collect();
    Field::from_fn(grid, |x| {
        1.0 + c[0] * (PI * x[0]).cos()
            + c[1] * (PI * x[0]).sin()
            + c[2] * (2.0 * PI * x[0]).cos()
            + c[3] * x.iter().skip(1).map(|v| (PI * v).sin()).sum::<f64>()
    })
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scheme.n = 16;
    cfg.scheme.m = 5;
    cfg.scheme.t_final = 0.05;
    cfg
}

fn quiet(mut cfg: RunConfig) -> RunConfig {
    cfg.scheme.noise = NoiseSpec::off();
    cfg.scheme.kernels = KernelConfig::zero();
    cfg
}

type Battery = Vec<CheckLine>;

fn torus_checks(out: &mut Battery) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g2 = TorusGrid::new(2, 16)?;
    let f = random_field(&g2, &mut rng, 1);
    let err = (&from_spectral(&to_spectral(&f)) - &f).max_abs();
    out.push(below(
        "to_spectral/from_spectral",
        err,
        1e-12,
        "round trip of random samples",
    ));

    let s = Field::from_fn(&g2, |x| (PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let lap = laplacian(&s);
    let expect = s.scale(-5.0 * PI * PI);
    let div_grad = divergence(&gradient(&s)?)?;
    let sym = sym_gradient(&gradient(&s)?)?;
    let err =
        (&lap - &expect).max_abs() + (&div_grad - &lap).max_abs() + (sym.component(1)[3] - sym.component(2)[3]).abs();
    out.push(below(
        "gradient/divergence/laplacian/sym_gradient",
        err,
        1e-9,
        "sine eigenfunction",
    ));

    let g1 = TorusGrid::new(1, 8)?;
    let f = random_field(&g1, &mut rng, 1);
    let k = random_field(&g1, &mut rng, 1);
    let conv = convolve(&f, &k)?;
    let h = g1.cell_volume();
    // Nodes start at -1, so x_i - x_j sits at index i - j + n/2.
    let direct: Vec<f64> = (0..8)
        .map(|i| (0..8).map(|j| k.values()[(i + 12 - j) % 8] * f.values()[j] * h).sum())
        .collect();
    let err = conv
        .values()
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(below("convolve", err, 1e-12, "direct quadrature sum, n = 8"));

    let f = random_field(&g2, &mut rng, 1);
    let p = project_modes(&f, 9)?;
    let err = (&project_modes(&p, 9)? - &p).max_abs();
    out.push(below("project_modes", err, 1e-12, "idempotence"));

    let f = random_field(&g2, &mut rng, 1);
    let err = (&laplacian(&inv_laplacian(&f)?) - &dealias_mean_free(&f)).max_abs();
    out.push(below("inv_laplacian", err, 1e-10, "Δ Δ⁻¹ f = f - f̄ away from Nyquist"));

    let c = Field::constant(&g2, 1.7);
    let sine = Field::from_fn(&g2, |x| (PI * x[0]).sin());
    let err = (mean(&c) - 1.7 * 4.0).abs() + (lp_norm(&sine, 2.0)? - 2f64.sqrt()).abs();
    out.push(below("mean/lp_norm", err, 1e-12, "constant and sine closed forms"));
    Ok(())
}

/// `f - f̄` with Nyquist modes removed (the inverse Laplacian keeps them, the
/// Laplacian symbol does too, so this is exact on all modes).
fn dealias_mean_free(f: &Field) -> Field {
    let avg = f.average();
    f.map(|v| v - avg)
}

fn constitutive_checks(out: &mut Battery) -> Result<()> {
    let law = PressureLaw::power(1.3, 2.0, 0.05)?;
    let g = TorusGrid::new(1, 8)?;
    let c = 1.4;
    let rho = Field::constant(&g, c);
    let gam = law.big_gamma();
    let expect = 1.3 * c * c + 0.05 * (c.powf(gam) + c * c);
    out.push(below(
        "pressure/pressure_delta",
        (pressure_delta(&rho, &law)?.values()[0] - expect).abs(),
        1e-12,
        "closed form at a constant state",
    ));

    let mut worst: f64 = 0.0;
    for i in 1..=50 {
        let z = 0.05 * i as f64;
        let hh = 1e-5 * z;
        let dp = (law.potential_delta(z + hh) - law.potential_delta(z - hh)) / (2.0 * hh);
        let rel = ((z * dp - law.potential_delta(z)) - law.p_delta(z)).abs() / law.p_delta(z);
        worst = worst.max(rel);
    }
    let _ = potential_delta(&rho, &law)?;
    out.push(below(
        "potential/potential_delta",
        worst,
        1e-6,
        "ϱP' - P = p by central differences",
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g2 = TorusGrid::new(2, 8)?;
    let visc = ViscosityParams::new(0.1, 0.1)?;
    let du = sym_gradient(&random_field(&g2, &mut rng, 2))?;
    let min = stress_dissipation(&du, &visc)?.min();
    out.push(check(
        "stress/stress_dissipation",
        min,
        0.0,
        min >= -1e-12,
        "pointwise nonnegative",
    ));

    let plateau = (cutoff_chi(-0.3) - 1.0).abs() + cutoff_chi(1.2) + (cutoff_chi(0.5) - 0.5).abs();
    out.push(below("cutoff_chi", plateau, 1e-15, "plateaus and midpoint symmetry"));

    let v = vec![0.3, -0.4, 0.1];
    let below_r = velocity_truncate(&v, 1.0);
    let far = velocity_truncate(&v, coeff_norm(&v) - 2.0);
    let err = below_r.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum::<f64>() + coeff_norm(&far);
    out.push(below(
        "velocity_truncate",
        err,
        0.0,
        "identity below R, zero above R + 1",
    ));

    let kp = KernelPair::default_presets(&g2);
    let rep = validate_kernels(&kp, DEFAULT_TAIL_THRESHOLD);
    out.push(check(
        "validate_kernels",
        rep.psi_min,
        0.0,
        rep.all_passed(),
        "default presets",
    ));
    Ok(())
}

fn noise_checks(out: &mut Battery) -> Result<()> {
    let path = WienerPath::new(9, 0, 4, 0.01)?;
    let draws: Vec<f64> = (0..2500u64).flat_map(|j| path.wiener_increments(j)).collect();
    let var = draws.iter().map(|v| v * v).sum::<f64>() / draws.len() as f64;
    let rel = (var / 0.01 - 1.0).abs();
    let se = (2.0 / draws.len() as f64).sqrt();
    let repeat = path.wiener_increments(17) == WienerPath::new(9, 0, 4, 0.01)?.wiener_increments(17);
    out.push(check(
        "wiener_increments",
        rel,
        4.0 * se,
        rel <= 4.0 * se && repeat,
        "variance h within 4 SE, deterministic",
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = TorusGrid::new(2, 16)?;
    let spec = NoiseSpec {
        beta: 0.5,
        ..NoiseSpec::default()
    };
    let nm = NoiseModel::new(&g, &spec)?;
    let rho = random_density(&g, &mut rng);
    let u = random_field(&g, &mut rng, 2).scale(3.0);
    let q = u.mul_scalar_field(&rho);
    let mut worst: f64 = 0.0;
    for k in 1..=nm.k_max() {
        let gk = nm.coefficient_g(k, &rho, &q)?.magnitude();
        let bound = nm.g()[k - 1] * nm.profile(k).max_abs();
        for i in 0..g.len() {
            let b = bound * (rho.values()[i] + q.magnitude().values()[i]);
            worst = worst.max(gk.values()[i] / b);
        }
    }
    out.push(below("coefficient_G", worst, 1.0 + 1e-12, "|G_k| ≤ g_k‖ē_k‖∞(ϱ + |q|)"));

    let ratio = nm.uniform_bound_ratio(&rho, &u, 0.05)?;
    out.push(below(
        "coefficient_F_eps",
        ratio,
        1.0 + 1e-12,
        "|F_k,ε| ≤ g_k‖ē_k‖∞(1 + |u|)",
    ));

    let space = GalerkinSpace::new(&g, 9)?;
    let dw = vec![0.1; nm.k_max()];
    let a = momentum_noise_increment(space.basis(), &rho, &u, &dw, 0.05, &nm)?;
    let dw2: Vec<f64> = dw.iter().map(|v| 2.0 * v).collect();
    let b = momentum_noise_increment(space.basis(), &rho, &u, &dw2, 0.05, &nm)?;
    let err = a.iter().zip(&b).map(|(x, y)| (2.0 * x - y).abs()).fold(0.0, f64::max);
    out.push(below("momentum_noise_increment", err, 1e-13, "linear in ΔW"));
    Ok(())
}

fn galerkin_checks(out: &mut Battery) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = TorusGrid::new(2, 16)?;
    let space = GalerkinSpace::new(&g, 13)?;
    let v: Vec<f64> = (0..space.coeff_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let one = Field::constant(&g, 1.0);
    let rho = random_density(&g, &mut rng);
    let id_err = mass_apply(&space, &one, &v)?
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let w = mass_apply(&space, &rho, &v)?;
    let back = mass_solve(&space, &rho, &w, 1e-8)?;
    let rt = back.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(below(
        "mass_apply/mass_solve",
        id_err.max(rt),
        1e-10,
        "M₁ = I and solve ∘ apply = I",
    ));

    let probes: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..space.coeff_len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let bump = Field::from_fn(&g, |x| (PI * x[0]).cos());
    let ratios: Vec<f64> = [1e-3, 1e-4]
        .iter()
        .map(|&s| mass_lipschitz_gap(&space, &rho, &(&rho + &bump.scale(s)), &probes, 1e-8).map(|l| l.ratio))
        .collect::<Result<_>>()?;
    let spread = ratios[0].max(ratios[1]) / ratios[0].min(ratios[1]);
    out.push(below(
        "mass_lipschitz_gap",
        spread,
        2.0,
        "ratio stable across perturbation scales",
    ));

    let cfg = small_config();
    let params = SchemeParams::from_config(&cfg.scheme)?;
    let c = Field::constant(&params.grid, 1.2);
    let zero = vec![0.0; params.space.coeff_len()];
    let rhs = galerkin_rhs(&params.space, &c, &zero, &params.drift_params())?.total();
    out.push(below(
        "galerkin_rhs",
        coeff_norm(&rhs),
        1e-12,
        "rest state is stationary",
    ));
    Ok(())
}

fn stepper_checks(out: &mut Battery) -> Result<()> {
    let cfg = small_config();
    let (params, s0) = prepare(&cfg)?;
    let traj = density_substep(&params.space, &s0.rho, &s0.u, 0.01, 0.05, 1e3, 4)?;
    let err = (traj.last().integral() - s0.rho.integral()).abs();
    out.push(below("density_substep", err, 1e-12, "mass conserved over the substep"));

    let rest_cfg = {
        let mut c = quiet(small_config());
        c.initial.u = VelocityInit::Zero;
        c.initial.rho = crate::config::DensityInit::Constant { value: 1.0 };
        c
    };
    let (rp, rs) = prepare(&rest_cfg)?;
    let rt = density_substep(&rp.space, &rs.rho, &rs.u, rp.h(), rp.eps(), 1e3, 2)?;
    let u1 = momentum_update(&rp, &rs, &rt, &vec![0.0; rp.noise.k_max()])?;
    out.push(below(
        "momentum_update",
        coeff_norm(&u1),
        1e-13,
        "rest state stays at rest",
    ));

    let path = params.wiener_path(cfg.seed, 0);
    let a = step(&params, &s0, &path, params.h())?;
    let b = run_path(&params, &path, &s0)?;
    let same = a.u == b.snapshots[1].u && run_path(&params, &path, &s0)?.records == b.records;
    out.push(check(
        "step/run_path",
        0.0,
        0.0,
        same,
        "step matches run_path; reruns identical",
    ));

    let one = run_ensemble(&params, &s0, 5, 3, Some(1))?;
    let many = run_ensemble(&params, &s0, 5, 3, Some(3))?;
    let same = one.iter().zip(&many).all(|(x, y)| x.records == y.records);
    let mut sweep_cfg = quiet(small_config());
    sweep_cfg.scheme.t_final = 0.1;
    let sweep = run_sweep(&sweep_cfg, SweepAxis::H, &[0.02, 0.01, 0.005], Some(1))?;
    let ok = same && sweep.rho_gaps_decrease(1.5);
    out.push(check(
        "run_ensemble/run_sweep",
        sweep.rho_gap_ratios().iter().copied().fold(f64::INFINITY, f64::min),
        1.5,
        ok,
        "thread-independent ensemble; h-sweep gaps shrink ≥ 1.5×",
    ));
    Ok(())
}

fn diagnostics_checks(out: &mut Battery) -> Result<()> {
    let cfg = small_config();
    let (_, traj) = run_single(&cfg)?;
    out.push(below("mass_residual", mass_residual(&traj), 1e-10, "noisy run"));

    let (_, quiet_traj) = run_single(&quiet(small_config()))?;
    let e = energy_report(&quiet_traj, quiet_traj.final_record().time)?;
    let ok = e.residual <= 1e-12 && e.min_dissipation() >= -1e-12;
    out.push(check(
        "energy_report",
        e.residual,
        0.0,
        ok,
        "noise-off residual ≤ 0, dissipation ≥ 0",
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = TorusGrid::new(1, 8)?;
    let psi = crate::constitutive::PeriodicKernel::from_preset(&g, KernelPreset::RaisedCosine { amplitude: 1.0 });
    let rho = random_density(&g, &mut rng);
    let u = random_field(&g, &mut rng, 1);
    let h = g.cell_volume();
    let mut direct = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let r = crate::particles::wrap(g.point(i)[0] - g.point(j)[0]);
            direct +=
                rho.values()[i] * rho.values()[j] * psi.eval(&[r]) * (u.values()[j] - u.values()[i]).powi(2) * h * h;
        }
    }
    let err = (alignment_dissipation(&rho, &u, &psi) - direct).abs();
    out.push(below(
        "alignment_dissipation",
        err,
        1e-12,
        "double-sum quadrature, n = 8",
    ));

    let mut mcfg = small_config();
    mcfg.scheme.drift_enabled = false;
    mcfg.scheme.t_final = 0.08;
    mcfg.initial.u = VelocityInit::Zero;
    let (mp, ms) = prepare(&mcfg)?;
    let ens = run_ensemble(&mp, &ms, 11, 64, None)?;
    let too_few = moment_scaling(&ens[..8], 2.0, &[0.01]).is_err();
    let rep = moment_scaling(&ens, 2.0, &[0.01, 0.02, 0.04])?;
    let slope = rep.slope.unwrap_or(f64::NAN);
    out.push(check(
        "moment_scaling",
        slope,
        0.3,
        too_few && (slope - 1.0).abs() <= 0.3,
        "drift-zeroed r = 2 slope near 1 (64 paths); rejects small ensembles",
    ));

    let mut ccfg = quiet(small_config());
    ccfg.initial.rho = crate::config::DensityInit::Constant { value: 1.3 };
    ccfg.initial.u = VelocityInit::Zero;
    let (cp, ctraj) = run_single(&ccfg)?;
    let p = pressure_identity_report(&ctraj);
    let t = ctraj.final_record().time;
    let closed = cp.law.p_delta(1.3) * 1.3 * cp.grid.measure() * t;
    let err = (p.lhs - closed).abs() + p.defect.abs();
    out.push(below(
        "pressure_identity_report",
        err,
        1e-10,
        "constant state closed form",
    ));

    let series = renormalized_defect(&traj, Renormalization::Identity)?;
    let worst = series.iter().fold(0.0, |m, s| f64::max(m, s.1.abs()));
    out.push(below("renormalized_defect", worst, 1e-10, "b(z) = z"));

    let c = Field::constant(&TorusGrid::new(2, 8)?, 1.5);
    let rep = evf_defect(&[&c, &c])?;
    let err = (rep.entropies[0] - 1.5 * 1.5f64.ln() * 4.0).abs() + rep.gaps[0];
    out.push(below("evf_defect", err, 1e-12, "constant state; identical members"));

    let mut worst: f64 = 0.0;
    let k = 2.0;
    for i in 1..=100 {
        let z = 0.1 * i as f64;
        let hh = 1e-6 * z;
        let dl = (truncation_l_k(z + hh, k) - truncation_l_k(z - hh, k)) / (2.0 * hh);
        let t = truncation_t_k(z, k);
        worst = worst.max((z * dl - truncation_l_k(z, k) - t).abs() / t);
        worst = worst.max((z * truncation_l_k_prime(z, k) - truncation_l_k(z, k) - t).abs() / t);
    }
    out.push(below(
        "truncation_T_k/truncation_L_k",
        worst,
        1e-6,
        "z L_k' - L_k = T_k by central differences",
    ));
    Ok(())
}

fn particle_checks(out: &mut Battery) -> Result<()> {
    let g = TorusGrid::new(2, 16)?;
    let kp = KernelPair::default_presets(&g);
    let ps = ParticleState::random(2, 32, 0.5, 7)?;
    let mut s = ps.clone();
    for _ in 0..10 {
        s = particle_step(&s, 0.01, &kp);
    }
    let drift = ps
        .total_momentum()
        .iter()
        .zip(s.total_momentum())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(below("particle_step", drift, 1e-10, "total momentum conserved"));

    let (rho, _) = empirical_fields(&s, &g, 4.0)?;
    let err = (rho.integral() - s.len() as f64 * s.mass).abs();
    out.push(below("empirical_fields", err, 1e-12, "kernel normalized on the grid"));
    Ok(())
}

/// Runs the whole battery. Failures to even evaluate a check are reported
/// as failed checks carrying the error message.
pub fn run_battery() -> Vec<CheckLine> {
    let groups: [(&str, fn(&mut Battery) -> Result<()>); 7] = [
        ("torus_field", torus_checks),
        ("constitutive", constitutive_checks),
        ("noise", noise_checks),
        ("galerkin_core", galerkin_checks),
        ("stepper", stepper_checks),
        ("diagnostics", diagnostics_checks),
        ("particle_reference", particle_checks),
    ];
    let mut out = Vec::new();
    for (name, f) in groups {
        if let Err(e) = f(&mut out) {
            out.push(check(name, f64::NAN, 0.0, false, format!("error: {e}")));
        }
    }
    out
}
