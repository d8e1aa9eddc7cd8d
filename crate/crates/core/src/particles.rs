//! Cucker–Smale particles with attraction–repulsion, used as a qualitative
//! mean-field cross-check of the continuum alignment and interaction terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constitutive::KernelPair;
use crate::error::{invalid, Error, Result};
use crate::torus::{neumaier_sum, Field, TorusGrid};

/// Wraps a coordinate into `[-1, 1)`.
pub fn wrap(x: f64) -> f64 {
    let y = (x + 1.0).rem_euclid(2.0) - 1.0;
    if y >= 1.0 {
        -1.0
    } else {
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    dim: usize,
    /// Particle-major, `dim` entries each.
    positions: Vec<f64>,
    velocities: Vec<f64>,
    /// Mass carried by each particle in the empirical fields.
    pub mass: f64,
    pub time: f64,
}

impl ParticleState {
    /// Particle mass defaults to `2^d / N`, so a uniform cloud has density one.
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid("dim", format!("must be 1, 2 or 3, got {dim}")));
        }
        if positions.is_empty() || positions.len() % dim != 0 || positions.len() != velocities.len() {
            return Err(invalid(
                "particles",
                "positions and velocities need N·d entries each, N ≥ 1",
            ));
        }
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle state"));
        }
        let count = positions.len() / dim;
        Ok(Self {
            dim,
            positions: positions.into_iter().map(wrap).collect(),
            velocities,
            mass: 2f64.powi(dim as i32) / count as f64,
            time: 0.0,
        })
    }

    /// Uniformly random positions, Gaussian velocities of standard deviation `speed`.
    pub fn random(dim: usize, count: usize, speed: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..count * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let velocities = (0..count * dim)
            .map(|_| speed * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(dim, positions, velocities)
    }

    /// `per_axis^d` particles on a uniform lattice, all moving with `velocity`.
    pub fn lattice(dim: usize, per_axis: usize, velocity: &[f64]) -> Result<Self> {
        if velocity.len() != dim || per_axis == 0 {
            return Err(invalid("lattice", "velocity needs d components and per_axis ≥ 1"));
        }
        let count = per_axis.pow(dim as u32);
        let mut positions = Vec::with_capacity(count * dim);
        for i in 0..count {
            let mut rem = i;
            let mut p = vec![0.0; dim];
            for a in (0..dim).rev() {
                p[a] = -1.0 + 2.0 * (rem % per_axis) as f64 / per_axis as f64;
                rem /= per_axis;
            }
            positions.extend(p);
        }
        let velocities = velocity.iter().copied().cycle().take(count * dim).collect();
        Self::new(dim, positions, velocities)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    /// `Σ_i v_i`.
    pub fn total_momentum(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| neumaier_sum((0..self.len()).map(|i| self.velocities[i * self.dim + a])))
            .collect()
    }

    /// `(1/N) Σ_i |v_i - v̄|²`.
    pub fn velocity_variance(&self) -> f64 {
        let n = self.len() as f64;
        let mean: Vec<f64> = self.total_momentum().iter().map(|m| m / n).collect();
        let mean = &mean;
        neumaier_sum((0..self.len()).flat_map(|i| {
            let v = self.velocity(i);
            (0..self.dim).map(move |a| (v[a] - mean[a]).powi(2))
        })) / n
    }

    /// Adds an independent Brownian velocity kick of intensity `sigma` over `h`.
    pub fn kick(&mut self, sigma: f64, h: f64, rng: &mut impl Rng) {
        let s = sigma * h.sqrt();
        for v in &mut self.velocities {
            *v += s * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// `v̇_i = (1/N)Σ_j ψ(x_i - x_j)(v_j - v_i) - (1/N)Σ_j ∇K(x_i - x_j)`.
///
/// Pairs are visited once and the forces applied with opposite signs, so the
/// total momentum changes only by rounding.
fn accelerations(dim: usize, x: &[f64], v: &[f64], kernels: &KernelPair) -> Vec<f64> {
    let n = x.len() / dim;
    let inv_n = 1.0 / n as f64;
    let use_k = !kernels.k.is_zero();
    let use_psi = !kernels.psi.is_zero();
    let mut acc = vec![0.0; x.len()];
    let mut r = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for i in 0..n {
        for j in i + 1..n {
            for a in 0..dim {
                r[a] = wrap(x[i * dim + a] - x[j * dim + a]);
            }
            let psi = if use_psi { kernels.psi.eval(&r) } else { 0.0 };
            if use_k {
                kernels.k.gradient(&r, &mut g);
            }
            for a in 0..dim {
                let mut f = psi * (v[j * dim + a] - v[i * dim + a]);
                if use_k {
                    f -= g[a];
                }
                acc[i * dim + a] += inv_n * f;
                acc[j * dim + a] -= inv_n * f;
            }
        }
    }
    acc
}

/// One explicit-midpoint step of length `h`.
pub fn particle_step(ps: &ParticleState, h: f64, kernels: &KernelPair) -> ParticleState {
    let d = ps.dim;
    let vmax = ps.velocities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let half_cell = 0.5 * kernels.grid().spacing();
    if vmax * h > half_cell {
        log::warn!("particles move {:.3e} per step, more than half a cell", vmax * h);
    }
    let a0 = accelerations(d, &ps.positions, &ps.velocities, kernels);
    let xm: Vec<f64> = ps
        .positions
        .iter()
        .zip(&ps.velocities)
        .map(|(x, v)| wrap(x + 0.5 * h * v))
        .collect();
    let vm: Vec<f64> = ps.velocities.iter().zip(&a0).map(|(v, a)| v + 0.5 * h * a).collect();
    let am = accelerations(d, &xm, &vm, kernels);
    ParticleState {
        dim: d,
        positions: ps.positions.iter().zip(&vm).map(|(x, v)| wrap(x + h * v)).collect(),
        velocities: ps.velocities.iter().zip(&am).map(|(v, a)| v + h * a).collect(),
        mass: ps.mass,
        time: ps.time + h,
    }
}

/// Periodic Gaussian weights of one coordinate on the grid nodes, summing
/// to `1/spacing` so the discrete integral is exactly one.
fn axis_weights(grid: &TorusGrid, x: f64, sigma: f64) -> Vec<f64> {
    let n = grid.n();
    let hx = grid.spacing();
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let node = -1.0 + i as f64 * hx;
            (-2..=2)
                .map(|img| {
                    let r = node - x + 2.0 * img as f64;
                    (-0.5 * (r / sigma).powi(2)).exp()
                })
                .sum()
        })
        .collect();
    let s: f64 = w.iter().sum::<f64>() * hx;
    for v in &mut w {
        *v /= s;
    }
    w
}

/// Kernel-density estimates of the density and momentum on `grid`.
pub fn empirical_fields(ps: &ParticleState, grid: &TorusGrid, bandwidth_cells: f64) -> Result<(Field, Field)> {
    if grid.dim() != ps.dim {
        return Err(Error::GridMismatch(format!(
            "{}-D particles on a {}-D grid",
            ps.dim,
            grid.dim()
        )));
    }
    if !(bandwidth_cells >= 2.0) {
        return Err(invalid(
            "bandwidth",
            format!("must be at least 2 cells, got {bandwidth_cells}"),
        ));
    }
    let d = ps.dim;
    let n = grid.n();
    let sigma = bandwidth_cells * grid.spacing();
    let mut rho = Field::zeros(grid, 1);
    let mut q = Field::zeros(grid, d);
    for i in 0..ps.len() {
        let w: Vec<Vec<f64>> = ps.position(i).iter().map(|&x| axis_weights(grid, x, sigma)).collect();
        let v = ps.velocity(i);
        for flat in 0..grid.len() {
            let idx = grid.multi_index(flat);
            let mut wt = ps.mass;
            for a in 0..d {
                wt *= w[a][idx[a]];
            }
            rho.values_mut()[flat] += wt;
            for a in 0..d {
                q.component_mut(a)[flat] += wt * v[a];
            }
        }
        debug_assert_eq!(w[0].len(), n);
    }
    Ok((rho, q))
}

/// `‖a - b‖_{L²} / ‖b‖_{L²}`.
pub fn relative_l2(a: &Field, b: &Field) -> f64 {
    let d = a - b;
    (d.inner(&d) / b.inner(b)).sqrt()
}

/// Runs `steps` midpoint steps, returning the velocity variance after each.
pub fn run_particles(
    ps: &ParticleState,
    h: f64,
    steps: usize,
    kernels: &KernelPair,
    kick: Option<(f64, u64)>,
) -> (ParticleState, Vec<f64>) {
    let mut rng = kick.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    let mut state = ps.clone();
    let mut variance = Vec::with_capacity(steps + 1);
    variance.push(state.velocity_variance());
    for _ in 0..steps {
        state = particle_step(&state, h, kernels);
        if let (Some((sigma, _)), Some(rng)) = (kick, rng.as_mut()) {
            state.kick(sigma, h, rng);
        }
        variance.push(state.velocity_variance());
    }
    (state, variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::KernelPreset;

    #[test]
    fn wrap_into_torus() {
        assert_eq!(wrap(1.0), -1.0);
        assert!((wrap(2.5) - 0.5).abs() < 1e-15);
        assert!((wrap(-1.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn equal_velocities_translate_rigidly() {
        let g = TorusGrid::new(2, 16).unwrap();
        let kp = KernelPair::from_presets(&g, KernelPreset::Zero, KernelPreset::RaisedCosine { amplitude: 1.0 });
        let ps = ParticleState::lattice(2, 4, &[0.3, -0.1]).unwrap();
        let next = particle_step(&ps, 0.01, &kp);
        assert_eq!(next.velocities(), ps.velocities());
        assert!((next.position(0)[0] - (ps.position(0)[0] + 0.003)).abs() < 1e-15);
    }

    #[test]
    fn single_particle_density_is_normalized_kernel() {
        let g = TorusGrid::new(1, 32).unwrap();
        let ps = ParticleState::new(1, vec![0.3], vec![1.0]).unwrap();
        let (rho, q) = empirical_fields(&ps, &g, 3.0).unwrap();
        assert!((rho.integral() - 2.0).abs() < 1e-13);
        assert_eq!(rho.values(), q.values());
        assert!(empirical_fields(&ps, &g, 1.0).is_err());
    }
}
