//! The time-split scheme: parabolic density substep, frozen-coefficient
//! momentum update with an Itô increment, and the path driver that
//! accumulates every diagnostic time integral while stepping.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{MassWeightTime, SchemeConfig};
use crate::constitutive::{checked_density, coeff_norm, KernelPair, PressureLaw, ViscosityParams};
use crate::diagnostics::integrands::{self, PressureRates};
use crate::diagnostics::{EnergyReport, PressureReport, Renormalization};
use crate::error::{invalid, Error, Result};
use crate::galerkin::{galerkin_rhs, truncated_velocity, DriftParams, GalerkinSpace, MassOperator};
use crate::noise::{NoiseModel, WienerPath};
use crate::torus::spectral::{derivative_symbol, laplacian_symbol};
use crate::torus::{divergence, from_spectral, gradient, to_spectral, Field, GalerkinBasis, SpectralField, TorusGrid};

/// Validated scheme parameters with every derived object built once.
#[derive(Clone, Debug)]
pub struct SchemeParams {
    pub config: SchemeConfig,
    pub grid: TorusGrid,
    pub space: Arc<GalerkinSpace>,
    pub law: PressureLaw,
    pub visc: ViscosityParams,
    pub kernels: KernelPair,
    pub noise: NoiseModel,
}

impl SchemeParams {
    pub fn from_config(cfg: &SchemeConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("scheme.h", cfg.h)?;
        positive("scheme.t_final", cfg.t_final)?;
        positive("scheme.radius", cfg.radius)?;
        positive("scheme.rho_floor", cfg.rho_floor)?;
        if !(cfg.eps >= 0.0) || !cfg.eps.is_finite() {
            return Err(invalid("scheme.eps", format!("must be non-negative, got {}", cfg.eps)));
        }
        if cfg.sub_steps == 0 {
            return Err(invalid("scheme.sub_steps", "must be at least 1"));
        }
        if let Some(dt) = cfg.noise_base_dt {
            positive("scheme.noise_base_dt", dt)?;
            let ratio = cfg.h / dt;
            if (ratio - ratio.round()).abs() > 1e-9 {
                return Err(invalid(
                    "scheme.noise_base_dt",
                    format!("h = {} is not a multiple of the Wiener base step {dt}", cfg.h),
                ));
            }
        }
        let capacity = GalerkinBasis::capacity(&grid);
        let m = if cfg.m == 0 { capacity } else { cfg.m };
        if m > capacity {
            return Err(invalid(
                "scheme.m",
                format!("{m} modes requested but the dealiased grid holds {capacity}"),
            ));
        }
        let space = Arc::new(GalerkinSpace::new(&grid, m)?);
        let law = PressureLaw::power(cfg.pressure.a, cfg.pressure.gamma, cfg.delta)?;
        cfg.viscosity.validate()?;
        let kernels = KernelPair::new(cfg.kernels.k.build(&grid)?, cfg.kernels.psi.build(&grid)?)?
            .validated(cfg.kernels.tail_threshold)?;
        let noise = NoiseModel::new(&grid, &cfg.noise)?;
        for r in &cfg.renormalizations {
            r.validate()?;
        }
        Ok(Self {
            config: cfg.clone(),
            grid,
            space,
            law,
            visc: cfg.viscosity,
            kernels,
            noise,
        })
    }

    pub fn drift_params(&self) -> DriftParams<'_> {
        DriftParams {
            law: &self.law,
            visc: &self.visc,
            kernels: &self.kernels,
            eps: self.config.eps,
            radius: self.config.radius,
        }
    }

    pub fn h(&self) -> f64 {
        self.config.h
    }

    pub fn eps(&self) -> f64 {
        self.config.eps
    }

    /// Wiener base step: `noise_base_dt` when set, otherwise `h`.
    pub fn noise_base_dt(&self) -> f64 {
        self.config.noise_base_dt.unwrap_or(self.config.h)
    }

    pub fn wiener_path(&self, seed: u64, path: u64) -> WienerPath {
        WienerPath::new(seed, path, self.noise.k_max(), self.noise_base_dt())
            .expect("base step validated at construction")
    }

    /// Outer step lengths covering `[0, T]`; the last one is shortened when
    /// `T/h` is not integral.
    pub fn step_times(&self) -> Vec<(f64, f64)> {
        let (h, t) = (self.config.h, self.config.t_final);
        let full = ((t / h) + 1e-9).floor() as usize;
        let mut out: Vec<(f64, f64)> = (0..full).map(|i| (i as f64 * h, (i + 1) as f64 * h)).collect();
        let reached = full as f64 * h;
        if t - reached > 1e-9 * h {
            out.push((reached, t));
        } else if let Some(last) = out.last_mut() {
            last.1 = t;
        }
        out
    }
}

/// Density samples and velocity coefficients at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinState {
    pub rho: Field,
    pub u: Vec<f64>,
    pub time: f64,
}

impl GalerkinState {
    /// Projects `u` onto `X_m` and checks the initial density.
    pub fn new(params: &SchemeParams, rho: Field, u: &Field) -> Result<Self> {
        rho.expect_grid(&params.grid)?;
        rho.expect_components(1)?;
        u.expect_components(params.grid.dim())?;
        if !(rho.min() > 0.0) || !rho.is_finite() {
            return Err(invalid("initial density", "must be finite and strictly positive"));
        }
        Ok(Self {
            rho,
            u: params.space.coefficients(u),
            time: 0.0,
        })
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    pub fn velocity(&self, space: &GalerkinSpace) -> Field {
        space.velocity(&self.u)
    }
}

/// Prescribed sources, used for manufactured-solution studies.
pub trait Forcing: Send + Sync {
    /// Added to the right-hand side of the continuity equation.
    fn density_source(&self, _t: f64, _grid: &TorusGrid) -> Option<Field> {
        None
    }
    /// Added to the momentum drift (projected onto `X_m`).
    fn momentum_source(&self, _t: f64, _grid: &TorusGrid) -> Option<Field> {
        None
    }
}

/// Density at the inner nodes of one outer step.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    /// `nodes[j]` is the density at `t0 + j·dt`, `j = 0..=inner_steps`.
    pub nodes: Vec<Field>,
    pub dt: f64,
    /// Advective ratio `dt·‖[u]_R‖∞·n/2` of the inner steps.
    pub cfl: f64,
}

impl DensityTrajectory {
    pub fn inner_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn last(&self) -> &Field {
        self.nodes.last().expect("at least two nodes")
    }

    /// Trapezoid weights over the nodes.
    pub fn weights(&self) -> Vec<f64> {
        let s = self.inner_steps();
        (0..=s)
            .map(|j| if j == 0 || j == s { 0.5 * self.dt } else { self.dt })
            .collect()
    }
}

fn inner_step_count(h: f64, v: &Field, n: usize, min_steps: usize) -> usize {
    let vmax = v.magnitude().max();
    let cfl_steps = (h * vmax * n as f64 / 2.0).ceil() as usize;
    min_steps.max(cfl_steps).max(1)
}

/// `-div Π_{2/3}(ϱ v)` in spectral space.
fn advective_tendency(rho_hat: &SpectralField, v: &Field) -> SpectralField {
    let grid = rho_hat.grid().clone();
    let d = grid.dim();
    let rho = from_spectral(rho_hat);
    let mut flux = to_spectral(&v.mul_scalar_field(&rho));
    flux.dealias();
    let mut out = SpectralField::zeros(&grid, 1);
    for a in 0..d {
        let src = flux.component(a).to_vec();
        for (i, dst) in out.component_mut(0).iter_mut().enumerate() {
            *dst -= src[i] * derivative_symbol(&grid, grid.wavevector(i), a);
        }
    }
    out
}

fn density_substep_impl(
    rho_n: &Field,
    v: &Field,
    h: f64,
    eps: f64,
    min_steps: usize,
    forcing: Option<(&dyn Forcing, f64)>,
) -> Result<DensityTrajectory> {
    let grid = rho_n.grid().clone();
    let steps = inner_step_count(h, v, grid.n(), min_steps);
    let dt = h / steps as f64;
    let cfl = dt * v.magnitude().max() * grid.n() as f64 / 2.0;
    if cfl > 1.0 {
        log::warn!("inner advective ratio {cfl:.3} exceeds 1");
    }
    let decay: Vec<f64> = (0..grid.len())
        .map(|i| (eps * laplacian_symbol(&grid, grid.wavevector(i)) * dt).exp())
        .collect();
    let moving = v.max_abs() > 0.0;
    let tendency = |r: &SpectralField, t: f64| -> Option<SpectralField> {
        let mut out = moving.then(|| advective_tendency(r, v));
        if let Some((f, _)) = forcing {
            if let Some(src) = f.density_source(t, &grid) {
                let s = to_spectral(&src);
                match out.as_mut() {
                    Some(o) => {
                        for (a, b) in o.coeffs_mut().iter_mut().zip(s.coeffs()) {
                            *a += b;
                        }
                    }
                    None => out = Some(s),
                }
            }
        }
        out
    };
    let t0 = forcing.map_or(0.0, |(_, t)| t);
    let axpy = |x: &SpectralField, a: f64, y: Option<&SpectralField>| -> SpectralField {
        let mut out = x.clone();
        if let Some(y) = y {
            for (o, b) in out.coeffs_mut().iter_mut().zip(y.coeffs()) {
                *o += b * a;
            }
        }
        out
    };
    let propagate = |x: &mut SpectralField| {
        for (c, e) in x.coeffs_mut().iter_mut().zip(&decay) {
            *c *= Complex64::new(*e, 0.0);
        }
    };

    let mut state = to_spectral(rho_n);
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(checked_density(rho_n)?);
    for j in 0..steps {
        let t = t0 + j as f64 * dt;
        let k1 = tendency(&state, t);
        let mut stage = axpy(&state, dt, k1.as_ref());
        propagate(&mut stage);
        let k2 = tendency(&stage, t + dt);
        let mut next = axpy(&state, 0.5 * dt, k1.as_ref());
        propagate(&mut next);
        state = axpy(&next, 0.5 * dt, k2.as_ref());
        let rho = from_spectral(&state);
        if !rho.is_finite() {
            return Err(Error::NonFinite("density substep"));
        }
        nodes.push(checked_density(&rho)?);
    }
    Ok(DensityTrajectory { nodes, dt, cfl })
}

/// Solves `∂ₜϱ + div(ϱ[u]_R) = εΔϱ` over one outer step with `u` frozen.
///
/// Inner steps use an integrating-factor second-order Runge–Kutta scheme:
/// diffusion is integrated exactly mode by mode, advection of the
/// 2/3-filtered flux explicitly. The zero mode is never modified, so mass is
/// conserved to rounding.
pub fn density_substep(
    space: &GalerkinSpace,
    rho_n: &Field,
    u_frozen: &[f64],
    h: f64,
    eps: f64,
    radius: f64,
    sub_steps: usize,
) -> Result<DensityTrajectory> {
    let (v, _) = truncated_velocity(space, u_frozen, radius);
    density_substep_impl(rho_n, &v, h, eps, sub_steps, None)
}

/// Everything one outer step produced.
#[derive(Clone, Debug)]
pub struct StepData {
    pub next: GalerkinState,
    pub density: DensityTrajectory,
    pub dw: Vec<f64>,
    /// Coefficients of `Π_m F_{k,ε}(ϱ(nh), u(nh))`, one vector per mode.
    pub noise_coeffs: Vec<Vec<f64>>,
    /// `M_{ϱ(nh)}` applied to `noise_coeffs`.
    pub noise_columns: Vec<Vec<f64>>,
    pub start_mass: MassOperator,
    pub noise_bound_ratio: f64,
    pub cutoff: f64,
}

/// `u` at `nh + h` from the accumulated momentum functional.
pub fn momentum_update(
    params: &SchemeParams,
    state: &GalerkinState,
    density: &DensityTrajectory,
    dw: &[f64],
) -> Result<Vec<f64>> {
    Ok(advance_momentum(params, state, density, dw, None)?.0)
}

type MomentumParts = (Vec<f64>, MassOperator, Vec<Vec<f64>>, Vec<Vec<f64>>, f64);

fn advance_momentum(
    params: &SchemeParams,
    state: &GalerkinState,
    density: &DensityTrajectory,
    dw: &[f64],
    forcing: Option<&dyn Forcing>,
) -> Result<MomentumParts> {
    let space = &params.space;
    let cfg = &params.config;
    let floor = cfg.rho_floor;
    let start = MassOperator::assemble(space, &state.rho, floor)?;
    let mut w = start.apply(&state.u);

    if cfg.drift_enabled {
        let dp = params.drift_params();
        for (j, (node, wt)) in density.nodes.iter().zip(density.weights()).enumerate() {
            let drift = galerkin_rhs(space, node, &state.u, &dp)?.total();
            for (o, v) in w.iter_mut().zip(drift) {
                *o += wt * v;
            }
            if let Some(f) = forcing {
                let t = state.time + j as f64 * density.dt;
                if let Some(src) = f.momentum_source(t, &params.grid) {
                    for (o, v) in w.iter_mut().zip(space.coefficients(&src)) {
                        *o += wt * v;
                    }
                }
            }
        }
    }

    let mut coeffs = Vec::new();
    let mut columns = Vec::new();
    let mut ratio: f64 = 0.0;
    if !params.noise.is_off() {
        let uf = state.velocity(space);
        let speed = uf.magnitude();
        for k in 1..=params.noise.k_max() {
            let f = params.noise.coefficient_f_eps(k, &state.rho, &uf, cfg.eps)?;
            let gk = params.noise.g()[k - 1];
            let sup_e = params.noise.profile(k).max_abs();
            if gk > 0.0 && sup_e > 0.0 {
                for (fv, s) in f.magnitude().values().iter().zip(speed.values()) {
                    ratio = ratio.max(fv / (gk * sup_e * (1.0 + s)));
                }
            }
            let fc = space.coefficients(&f);
            let col = start.apply(&fc);
            for (o, c) in w.iter_mut().zip(&col) {
                *o += c * dw[k - 1];
            }
            coeffs.push(fc);
            columns.push(col);
        }
        debug_assert!(ratio <= 1.0 + 1e-12, "noise bound violated: {ratio}");
    }

    let u_next = match cfg.mass_weight_time {
        MassWeightTime::Start => start.solve(&w),
        MassWeightTime::End => MassOperator::assemble(space, density.last(), floor)?.solve(&w),
    };
    if u_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("momentum update"));
    }
    Ok((u_next, start, coeffs, columns, ratio))
}

fn advance(
    params: &SchemeParams,
    state: &GalerkinState,
    t1: f64,
    dw: Vec<f64>,
    forcing: Option<&dyn Forcing>,
) -> Result<StepData> {
    let h = t1 - state.time;
    let (v, cutoff) = truncated_velocity(&params.space, &state.u, params.config.radius);
    let density = density_substep_impl(
        &state.rho,
        &v,
        h,
        params.config.eps,
        params.config.sub_steps,
        forcing.map(|f| (f, state.time)),
    )?;
    let (u, start_mass, noise_coeffs, noise_columns, ratio) = advance_momentum(params, state, &density, &dw, forcing)?;
    Ok(StepData {
        next: GalerkinState {
            rho: density.last().clone(),
            u,
            time: t1,
        },
        density,
        dw,
        noise_coeffs,
        noise_columns,
        start_mass,
        noise_bound_ratio: ratio,
        cutoff,
    })
}

/// One outer step of length `h`, drawing `ΔW` from `path`.
pub fn step(params: &SchemeParams, state: &GalerkinState, path: &WienerPath, h: f64) -> Result<GalerkinState> {
    let t1 = state.time + h;
    let dw = params_increment(params, path, state.time, t1);
    Ok(advance(params, state, t1, dw, None)?.next)
}

fn params_increment(params: &SchemeParams, path: &WienerPath, t0: f64, t1: f64) -> Vec<f64> {
    if params.noise.is_off() {
        vec![0.0; params.noise.k_max()]
    } else {
        path.increment_over(t0, t1)
    }
}

/// Per-step diagnostics; time integrals are cumulative from `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub h: f64,
    pub inner_steps: usize,
    pub cfl: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub u_norm: f64,
    /// `‖Π_m(ϱu)‖_{L²}`.
    pub momentum_norm: f64,
    /// `χ(‖u(nh)‖ - R)` used during the step ending here.
    pub cutoff: f64,
    /// Set on every record at or after the first time `‖u‖ > R`.
    pub after_tau: bool,
    pub entropy: f64,
    /// Largest `|F_{k,ε}| / (g_k ‖ē_k‖∞ (1 + |u|))` seen during the step.
    pub noise_bound_ratio: f64,
    pub energy: EnergyReport,
    pub pressure: PressureReport,
    /// Cumulative renormalized-continuity defects, one per tracked function.
    pub renormalized: Vec<f64>,
}

/// A stored state.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: Field,
    pub u: Vec<f64>,
    /// Coefficients of `Π_m(ϱu)`.
    pub momentum: Vec<f64>,
}

/// The output of one path.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub path: u64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub tau_r: Option<f64>,
    pub h_last: f64,
    pub initial_mass: f64,
    pub renormalizations: Vec<Renormalization>,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectories keep their final state")
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trajectories keep their initial record")
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct EndpointRates {
    stress: f64,
    visc: f64,
    align: f64,
    rem_cutoff: f64,
}

fn endpoint_rates(params: &SchemeParams, rho: &Field, u: &[f64]) -> Result<EndpointRates> {
    let uf = params.space.velocity(u);
    let (v, _) = truncated_velocity(&params.space, u, params.config.radius);
    Ok(EndpointRates {
        stress: integrands::stress_rate(&uf, &params.visc)?,
        visc: integrands::viscous_rate(rho, &uf, params.config.eps),
        align: integrands::alignment_rate(rho, &uf, &params.kernels.psi),
        rem_cutoff: integrands::remainder_cutoff_rate(rho, &uf, &v, &params.kernels.k)?,
    })
}

struct Tracker<'a> {
    params: &'a SchemeParams,
    energy: EnergyReport,
    e0: f64,
    pressure: PressureReport,
    rho_bar: f64,
    renorm_initial: Vec<f64>,
    renorm_flux: Vec<f64>,
}

impl<'a> Tracker<'a> {
    fn new(params: &'a SchemeParams, s0: &GalerkinState) -> Result<Self> {
        let uf = s0.velocity(&params.space);
        let mut energy = EnergyReport::default();
        Self::fill_state_energy(params, &mut energy, &s0.rho, &uf)?;
        let e0 = energy.total_energy();
        let mut pressure = PressureReport::default();
        let i3 = integrands::momentum_against_test_field(&s0.rho, &uf)?;
        pressure.terms[1] = -i3;
        pressure.terms[2] = i3;
        let renorm_initial = params
            .config
            .renormalizations
            .iter()
            .map(|r| r.integral(&s0.rho))
            .collect::<Result<Vec<_>>>()?;
        let mut t = Self {
            params,
            energy,
            e0,
            pressure,
            rho_bar: s0.mass() / params.grid.measure(),
            renorm_flux: vec![0.0; renorm_initial.len()],
            renorm_initial,
        };
        t.finish_energy();
        Ok(t)
    }

    fn fill_state_energy(params: &SchemeParams, e: &mut EnergyReport, rho: &Field, u: &Field) -> Result<()> {
        e.kinetic = integrands::kinetic_energy(rho, u);
        e.potential = integrands::potential_energy(rho, &params.law)?;
        e.interaction = integrands::interaction_energy(rho, &params.kernels.k);
        Ok(())
    }

    fn finish_energy(&mut self) {
        let e = &mut self.energy;
        e.residual = e.total_energy() + e.dissipation()
            - (self.e0 + e.stochastic_work + e.ito_correction + e.remainder_viscous + e.remainder_cutoff);
    }

    fn inner_nodes(&mut self, state: &GalerkinState, data: &StepData) -> Result<()> {
        let p = self.params;
        let eps = p.config.eps;
        let uf = state.velocity(&p.space);
        let (v, chi) = truncated_velocity(&p.space, &state.u, p.config.radius);
        let div_v = divergence(&v)?;
        let mut acc = PressureRates::default();
        for (node, w) in data.density.nodes.iter().zip(data.density.weights()) {
            self.energy.density_dissip += w * integrands::density_rate(node, &p.law, eps)?;
            self.energy.remainder_viscous += w * integrands::remainder_viscous_rate(node, &p.kernels.k, eps)?;
            let r = integrands::pressure_rates(node, &uf, &v, chi, self.rho_bar, &p.law, &p.visc, &p.kernels, eps)?;
            acc.lhs += w * r.lhs;
            acc.i1 += w * r.i1;
            acc.i4 += w * r.i4;
            acc.i5 += w * r.i5;
            acc.i6 += w * r.i6;
            acc.i7 += w * r.i7;
            acc.i8 += w * r.i8;
            acc.i9 += w * r.i9;
            if !p.config.renormalizations.is_empty() {
                let grad_sq = if eps > 0.0 {
                    let g = gradient(node)?;
                    Some(g.dot_pointwise(&g))
                } else {
                    None
                };
                for (i, b) in p.config.renormalizations.iter().enumerate() {
                    let mut rate = node.map(|z| b.defect_weight(z)).inner(&div_v);
                    if let Some(gs) = &grad_sq {
                        rate += eps * node.map(|z| b.second(z)).inner(gs);
                    }
                    self.renorm_flux[i] += w * rate;
                }
            }
        }
        let t = &mut self.pressure.terms;
        self.pressure.lhs += acc.lhs;
        t[0] += acc.i1;
        t[3] += acc.i4;
        t[4] += acc.i5;
        t[5] += acc.i6;
        t[6] += acc.i7;
        t[7] += acc.i8;
        t[8] += acc.i9;
        Ok(())
    }

    fn noise(&mut self, state: &GalerkinState, data: &StepData) -> Result<()> {
        if data.noise_coeffs.is_empty() {
            return Ok(());
        }
        let p = self.params;
        let h = data.next.time - state.time;
        let phi = integrands::pressure_test_field(&state.rho)?;
        let rho_phi = phi.mul_scalar_field(&state.rho);
        for (k, (fc, col)) in data.noise_coeffs.iter().zip(&data.noise_columns).enumerate() {
            let dw = data.dw[k];
            let quad: f64 = fc.iter().zip(col).map(|(a, b)| a * b).sum();
            self.energy.ito_correction += 0.5 * h * quad;
            let work: f64 = col.iter().zip(&state.u).map(|(a, b)| a * b).sum();
            self.energy.stochastic_work += dw * work;
            let pf = p.space.velocity(fc);
            self.pressure.terms[9] -= dw * pf.inner(&rho_phi);
        }
        Ok(())
    }

    fn end_step(
        &mut self,
        h: f64,
        start: &EndpointRates,
        end: &EndpointRates,
        next: &GalerkinState,
    ) -> Result<Vec<f64>> {
        let e = &mut self.energy;
        e.time = next.time;
        e.stress_dissip += 0.5 * h * (start.stress + end.stress);
        e.visc_dissip += 0.5 * h * (start.visc + end.visc);
        e.alignment_dissip += 0.5 * h * (start.align + end.align);
        e.remainder_cutoff += 0.5 * h * (start.rem_cutoff + end.rem_cutoff);
        let uf = next.velocity(&self.params.space);
        Self::fill_state_energy(self.params, e, &next.rho, &uf)?;
        self.finish_energy();

        self.pressure.time = next.time;
        self.pressure.terms[2] = integrands::momentum_against_test_field(&next.rho, &uf)?;
        self.pressure.defect = self.pressure.lhs - self.pressure.terms.iter().sum::<f64>();

        self.params
            .config
            .renormalizations
            .iter()
            .enumerate()
            .map(|(i, b)| Ok(b.integral(&next.rho)? - self.renorm_initial[i] + self.renorm_flux[i]))
            .collect()
    }
}

/// Coefficients of `Π_m(ϱu)`; no positivity floor is imposed.
pub fn momentum_coefficients(space: &GalerkinSpace, rho: &Field, u: &[f64]) -> Vec<f64> {
    let gram = MassOperator::gram_matrix(space, rho);
    let m = space.m();
    (0..space.dim())
        .flat_map(|c| {
            let b = nalgebra::DVector::from_column_slice(&u[c * m..(c + 1) * m]);
            let out: Vec<f64> = (&gram * b).data.into();
            out
        })
        .collect()
}

fn snapshot(params: &SchemeParams, step: usize, s: &GalerkinState) -> Snapshot {
    Snapshot {
        step,
        time: s.time,
        rho: s.rho.clone(),
        u: s.u.clone(),
        momentum: momentum_coefficients(&params.space, &s.rho, &s.u),
    }
}

/// Runs one path from `initial` over `[0, T]`.
pub fn run_path(params: &SchemeParams, path: &WienerPath, initial: &GalerkinState) -> Result<Trajectory> {
    run_path_with(params, path, initial, None)
}

/// [`run_path`] with optional prescribed sources.
pub fn run_path_with(
    params: &SchemeParams,
    path: &WienerPath,
    initial: &GalerkinState,
    forcing: Option<&dyn Forcing>,
) -> Result<Trajectory> {
    let cfg = &params.config;
    let radius = cfg.radius;
    let mut tracker = Tracker::new(params, initial)?;
    let mut state = initial.clone();
    state.time = 0.0;
    let u_norm0 = coeff_norm(&state.u);
    let mut tau_r = (u_norm0 > radius).then_some(0.0);
    let record = |step: usize,
                  s: &GalerkinState,
                  h: f64,
                  inner: usize,
                  cfl: f64,
                  cutoff: f64,
                  ratio: f64,
                  tracker: &Tracker,
                  renorm: Vec<f64>,
                  tau: Option<f64>|
     -> Result<StepRecord> {
        Ok(StepRecord {
            step,
            time: s.time,
            h,
            inner_steps: inner,
            cfl,
            mass: s.mass(),
            min_rho: s.rho.min(),
            max_rho: s.rho.max(),
            u_norm: coeff_norm(&s.u),
            momentum_norm: coeff_norm(&momentum_coefficients(&params.space, &s.rho, &s.u)),
            cutoff,
            after_tau: tau.is_some(),
            entropy: integrands::entropy(&s.rho)?,
            noise_bound_ratio: ratio,
            energy: tracker.energy,
            pressure: tracker.pressure,
            renormalized: renorm,
        })
    };
    let zeros = vec![0.0; cfg.renormalizations.len()];
    let mut records = vec![record(0, &state, 0.0, 0, 0.0, 1.0, 0.0, &tracker, zeros, tau_r)?];
    let mut snapshots = vec![snapshot(params, 0, &state)];
    let mut start_rates = endpoint_rates(params, &state.rho, &state.u)?;
    let times = params.step_times();
    let mut h_last = cfg.h;

    for (i, &(t0, t1)) in times.iter().enumerate() {
        let n = i + 1;
        let wrap = |e: Error| Error::StepFailure {
            step: n,
            time: t0,
            cause: Box::new(e),
        };
        state.time = t0;
        let dw = params_increment(params, path, t0, t1);
        let data = advance(params, &state, t1, dw, forcing).map_err(wrap)?;
        tracker.inner_nodes(&state, &data).map_err(wrap)?;
        tracker.noise(&state, &data).map_err(wrap)?;
        let end_rates = endpoint_rates(params, &data.next.rho, &data.next.u).map_err(wrap)?;
        h_last = t1 - t0;
        let renorm = tracker
            .end_step(h_last, &start_rates, &end_rates, &data.next)
            .map_err(wrap)?;
        if tau_r.is_none() && coeff_norm(&data.next.u) > radius {
            tau_r = Some(t1);
        }
        let rec = record(
            n,
            &data.next,
            h_last,
            data.density.inner_steps(),
            data.density.cfl,
            data.cutoff,
            data.noise_bound_ratio,
            &tracker,
            renorm,
            tau_r,
        )
        .map_err(wrap)?;
        records.push(rec);
        state = data.next;
        start_rates = end_rates;
        let last = n == times.len();
        if last || (cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0) {
            snapshots.push(snapshot(params, n, &state));
        }
    }

    Ok(Trajectory {
        seed: path.seed,
        path: path.path,
        records,
        snapshots,
        tau_r,
        h_last,
        initial_mass: initial.mass(),
        renormalizations: cfg.renormalizations.clone(),
    })
}
