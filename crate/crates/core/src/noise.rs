//! Truncated cylindrical Wiener process, the diffusion coefficients `G_k`,
//! their truncation `F_{k,ε}`, and the projected momentum increment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constitutive::cutoff_chi;
use crate::error::{invalid, Error, Result};
use crate::torus::{eigenmodes, Field, GalerkinBasis, TorusGrid};

/// Spatial profile `ē_k` attached to Wiener mode `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// The `k`-th nonconstant Laplacian eigenfunction, scaled to unit sup-norm.
    #[default]
    Eigenfunction,
    /// `ē_k ≡ 1`.
    Constant,
}

/// Serializable description of a [`NoiseModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Overall amplitude `g₀`; zero switches the noise off.
    pub g0: f64,
    pub k_max: usize,
    /// `g_k = g₀ / k^decay`.
    pub decay: f64,
    pub profile: ProfileKind,
    /// Density coupling `α_k` (one value for all modes).
    pub alpha: f64,
    /// Momentum coupling `β_k` (one value for all modes).
    pub beta: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            g0: 0.1,
            k_max: 8,
            decay: 2.0,
            profile: ProfileKind::Eigenfunction,
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            g0: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 >= 0.0) || !self.g0.is_finite() {
            return Err(invalid("noise.g0", format!("must be non-negative, got {}", self.g0)));
        }
        if self.k_max == 0 {
            return Err(invalid("noise.k_max", "must be at least 1"));
        }
        if !(self.decay > 0.5) {
            return Err(invalid(
                "noise.decay",
                format!("sum of g_k^2 diverges unless decay > 1/2, got {}", self.decay),
            ));
        }
        if !(self.alpha.abs() <= 1.0) || !(self.beta.abs() <= 1.0) {
            return Err(invalid(
                "noise.alpha/beta",
                "couplings must satisfy |alpha|, |beta| <= 1",
            ));
        }
        Ok(())
    }

    /// Neglected tail `Σ_{k > k_max} g_k²`.
    pub fn tail_mass(&self) -> f64 {
        let s = 2.0 * self.decay;
        let head: f64 = (1..=self.k_max).map(|k| (k as f64).powf(-s)).sum();
        self.g0 * self.g0 * (zeta(s) - head).max(0.0)
    }

    /// Retained `Σ_{k ≤ k_max} g_k²`.
    pub fn retained_mass(&self) -> f64 {
        (1..=self.k_max)
            .map(|k| (self.g0 * (k as f64).powf(-self.decay)).powi(2))
            .sum()
    }
}

/// Riemann zeta for `s > 1`: partial sum plus an Euler–Maclaurin tail.
fn zeta(s: f64) -> f64 {
    let n = 1000usize;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
}

/// Noise coefficients `G_k(x, ϱ, q) = g_k ē_k(x) (α_k ϱ e_{(k-1) mod d} + β_k q)`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    spec: NoiseSpec,
    g: Vec<f64>,
    profiles: Vec<Field>,
}

impl NoiseModel {
    pub fn new(grid: &TorusGrid, spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        let g = (1..=spec.k_max)
            .map(|k| spec.g0 * (k as f64).powf(-spec.decay))
            .collect();
        let profiles = match spec.profile {
            ProfileKind::Constant => vec![Field::constant(grid, 1.0); spec.k_max],
            ProfileKind::Eigenfunction => {
                let mut lim = 1;
                let modes = loop {
                    let modes = eigenmodes(grid.dim(), lim);
                    if modes.len() > spec.k_max {
                        break modes;
                    }
                    lim += 1;
                };
                modes[1..=spec.k_max]
                    .iter()
                    .map(|mode| {
                        let f = Field::from_fn(grid, |x| mode.eval(x));
                        let sup = f.max_abs();
                        if sup > 0.0 {
                            f.scale(1.0 / sup)
                        } else {
                            Field::constant(grid, 1.0)
                        }
                    })
                    .collect()
            }
        };
        Ok(Self {
            spec: spec.clone(),
            g,
            profiles,
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn k_max(&self) -> usize {
        self.spec.k_max
    }

    pub fn is_off(&self) -> bool {
        self.spec.g0 == 0.0
    }

    /// `g_k` for `k = 1..=k_max` (index `k - 1`).
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn profile(&self, k: usize) -> &Field {
        &self.profiles[k - 1]
    }

    fn direction(&self, k: usize, dim: usize) -> usize {
        (k - 1) % dim
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.spec.k_max {
            return Err(invalid("k", format!("mode {k} outside 1..={}", self.spec.k_max)));
        }
        Ok(())
    }

    /// `G_k(ϱ, q)` as a vector field.
    pub fn coefficient_g(&self, k: usize, rho: &Field, q: &Field) -> Result<Field> {
        self.check_mode(k)?;
        let grid = rho.grid();
        let d = grid.dim();
        rho.expect_components(1)?;
        q.expect_components(d)?;
        let (gk, e) = (self.g[k - 1], self.profile(k));
        let mut out = q.mul_scalar_field(e).scale(gk * self.spec.beta);
        let dir = self.direction(k, d);
        let dst = out.component_mut(dir);
        for i in 0..grid.len() {
            dst[i] += gk * self.spec.alpha * e.values()[i] * rho.values()[i];
        }
        Ok(out)
    }

    /// `F_{k,ε}(ϱ, u) = χ(ε/ϱ - 1) χ(|u| - 1/ε) ϱ⁻¹ G_k(ϱ, ϱu)`; both cutoff
    /// factors are taken as `1` when `ε = 0`.
    pub fn coefficient_f_eps(&self, k: usize, rho: &Field, u: &Field, eps: f64) -> Result<Field> {
        self.check_mode(k)?;
        let grid = rho.grid();
        let d = grid.dim();
        rho.expect_components(1)?;
        u.expect_components(d)?;
        let (gk, e) = (self.g[k - 1], self.profile(k));
        let dir = self.direction(k, d);
        let len = grid.len();
        let speed = u.magnitude();
        let mut out = Field::zeros(grid, d);
        for i in 0..len {
            let factor = if eps > 0.0 {
                let r = rho.values()[i];
                let density_cut = if r > 0.0 { cutoff_chi(eps / r - 1.0) } else { 0.0 };
                density_cut * cutoff_chi(speed.values()[i] - 1.0 / eps)
            } else {
                1.0
            };
            if factor == 0.0 {
                continue;
            }
            let w = factor * gk * e.values()[i];
            for c in 0..d {
                let mut v = self.spec.beta * u.component(c)[i];
                if c == dir {
                    v += self.spec.alpha;
                }
                out.component_mut(c)[i] = w * v;
            }
        }
        Ok(out)
    }

    /// Galerkin coefficients of `Π_m F_{k,ε}` for every `k`.
    pub fn projected_f(&self, basis: &GalerkinBasis, rho: &Field, u: &Field, eps: f64) -> Result<Vec<Vec<f64>>> {
        (1..=self.spec.k_max)
            .map(|k| Ok(basis.analyze(&self.coefficient_f_eps(k, rho, u, eps)?)))
            .collect()
    }

    /// Largest observed `|F_{k,ε}| / (g_k ‖ē_k‖∞ (1 + |u|))` over modes and grid
    /// points; at most `1` by construction.
    pub fn uniform_bound_ratio(&self, rho: &Field, u: &Field, eps: f64) -> Result<f64> {
        let speed = u.magnitude();
        let mut worst: f64 = 0.0;
        for k in 1..=self.spec.k_max {
            let gk = self.g[k - 1];
            if gk == 0.0 {
                continue;
            }
            let f = self.coefficient_f_eps(k, rho, u, eps)?.magnitude();
            let sup_e = self.profile(k).max_abs();
            for (fv, s) in f.values().iter().zip(speed.values()) {
                worst = worst.max(fv / (gk * sup_e * (1.0 + s)));
            }
        }
        Ok(worst)
    }
}

/// `Σ_k Π_m(ϱ Π_m F_{k,ε}(ϱ, u)) ΔW_k` in Galerkin coefficients.
pub fn momentum_noise_increment(
    basis: &GalerkinBasis,
    rho: &Field,
    u: &Field,
    dw: &[f64],
    eps: f64,
    nm: &NoiseModel,
) -> Result<Vec<f64>> {
    if dw.len() != nm.k_max() {
        return Err(Error::Invalid(format!(
            "expected {} Wiener increments, got {}",
            nm.k_max(),
            dw.len()
        )));
    }
    let d = rho.grid().dim();
    let mut out = vec![0.0; basis.len() * d];
    for (k, &w) in dw.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let pf = basis.project(&nm.coefficient_f_eps(k + 1, rho, u, eps)?);
        let col = basis.analyze(&pf.mul_scalar_field(rho));
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * w;
        }
    }
    Ok(out)
}

/// Counter-based Wiener increments on a base time grid of spacing `base_dt`.
///
/// Each base step `j` of path `p` draws its `k_max` standard normals from a
/// ChaCha8 stream keyed by `(seed, p, j)`, so values are independent of the
/// order in which paths or steps are evaluated. Coarser steps sum the base
/// increments they cover, which couples runs at different `h` to one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    pub seed: u64,
    pub path: u64,
    pub k_max: usize,
    pub base_dt: f64,
}

impl WienerPath {
    pub fn new(seed: u64, path: u64, k_max: usize, base_dt: f64) -> Result<Self> {
        if !(base_dt > 0.0) || !base_dt.is_finite() {
            return Err(invalid("base_dt", format!("must be positive, got {base_dt}")));
        }
        Ok(Self {
            seed,
            path,
            k_max,
            base_dt,
        })
    }

    fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path.to_le_bytes());
        key[16..24].copy_from_slice(&step.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// Standard normals for base step `step` (one per mode).
    pub fn normals(&self, step: u64) -> Vec<f64> {
        let mut rng = self.rng(step);
        (0..self.k_max).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// `ΔW_k` over base step `step`, each `N(0, base_dt)`.
    pub fn wiener_increments(&self, step: u64) -> Vec<f64> {
        let s = self.base_dt.sqrt();
        self.normals(step).into_iter().map(|z| z * s).collect()
    }

    /// `W(t1) - W(t0)`; both ends are snapped to the base grid and a trailing
    /// fractional base step contributes `sqrt(fraction)` of its increment.
    pub fn increment_over(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k_max];
        let a = t0 / self.base_dt;
        let b = t1 / self.base_dt;
        let tol = 1e-9;
        let start = (a + tol).floor().max(0.0) as u64;
        let end = (b + tol).floor() as u64;
        for j in start..end {
            for (o, w) in out.iter_mut().zip(self.wiener_increments(j)) {
                *o += w;
            }
        }
        let frac = b - end as f64;
        if frac > tol {
            let s = frac.sqrt();
            for (o, w) in out.iter_mut().zip(self.wiener_increments(end)) {
                *o += s * w;
            }
        }
        out
    }
}
