//! Pressure laws and their potentials, the viscous stress, the smooth cutoff
//! `χ` with the velocity truncation `[v]_R`, and the nonlocal kernels.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::torus::{to_spectral, Field, SpectralField, TorusGrid};

/// Samples below this value abort; samples in `[-NEGATIVE_TOLERANCE, 0)` are clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Clamps round-off negatives to zero and rejects genuine positivity breaches.
pub fn checked_density(rho: &Field) -> Result<Field> {
    let mut out = rho.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite("density"));
        }
        if *v < -NEGATIVE_TOLERANCE {
            return Err(Error::PositivityBreach { index: i, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// A barotropic pressure `p(ϱ)` with `p(0) = 0` and `p' > 0`.
pub trait BarotropicLaw: Send + Sync + fmt::Debug {
    fn pressure(&self, rho: f64) -> f64;
    fn derivative(&self, rho: f64) -> f64;
    /// Growth exponent `γ` in `p'(ϱ) ~ ϱ^{γ-1}`.
    fn exponent(&self) -> f64;

    /// `P(ϱ) = ϱ ∫_1^ϱ p(s)/s² ds`, by quadrature unless overridden.
    fn potential(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let out = quadrature::integrate(|s| self.pressure(s) / (s * s), 1.0, rho, 1e-13);
        rho * out.integral
    }
}

/// `p(ϱ) = a ϱ^γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub a: f64,
    pub gamma: f64,
}

impl BarotropicLaw for PowerLaw {
    fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    fn derivative(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    fn exponent(&self) -> f64 {
        self.gamma
    }

    fn potential(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if (self.gamma - 1.0).abs() < 1e-12 {
            return self.a * rho * rho.ln();
        }
        self.a * (rho.powf(self.gamma) - rho) / (self.gamma - 1.0)
    }
}

/// Pressure law with the regularization `p_δ = p + δ(ϱ^Γ + ϱ²)`, `Γ = max{γ, 6}`.
#[derive(Clone, Debug)]
pub struct PressureLaw {
    base: Arc<dyn BarotropicLaw>,
    delta: f64,
    big_gamma: f64,
}

impl PressureLaw {
    pub fn power(a: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid("a", format!("pressure amplitude must be positive, got {a}")));
        }
        Self::custom(Arc::new(PowerLaw { a, gamma }), delta)
    }

    /// Wraps an arbitrary law. Only `p(0) = 0` and monotonicity on a sample
    /// range are checked; the asymptotic growth condition is the caller's
    /// responsibility.
    pub fn custom(base: Arc<dyn BarotropicLaw>, delta: f64) -> Result<Self> {
        let gamma = base.exponent();
        if !(gamma > 1.5) {
            return Err(invalid("gamma", format!("must exceed 3/2, got {gamma}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid("delta", format!("must be non-negative, got {delta}")));
        }
        if base.pressure(0.0).abs() > 1e-14 {
            return Err(invalid("pressure", "law must satisfy p(0) = 0"));
        }
        let mut prev = base.pressure(0.0);
        for i in 1..=200 {
            let z = 0.05 * i as f64;
            let p = base.pressure(z);
            if !(p > prev) || !(base.derivative(z) > 0.0) {
                return Err(invalid("pressure", format!("law is not increasing at rho = {z}")));
            }
            prev = p;
        }
        Ok(Self {
            base,
            delta,
            big_gamma: gamma.max(6.0),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.base.exponent()
    }

    /// `Γ = max{γ, 6}`.
    pub fn big_gamma(&self) -> f64 {
        self.big_gamma
    }

    pub fn base(&self) -> &dyn BarotropicLaw {
        self.base.as_ref()
    }

    /// Same base law with a different regularization weight.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::custom(self.base.clone(), delta)
    }

    pub fn p(&self, z: f64) -> f64 {
        self.base.pressure(z)
    }

    pub fn p_delta(&self, z: f64) -> f64 {
        self.base.pressure(z) + self.delta * (z.powf(self.big_gamma) + z * z)
    }

    pub fn p_delta_derivative(&self, z: f64) -> f64 {
        self.base.derivative(z) + self.delta * (self.big_gamma * z.powf(self.big_gamma - 1.0) + 2.0 * z)
    }

    pub fn potential(&self, z: f64) -> f64 {
        self.base.potential(z)
    }

    pub fn potential_delta(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let g = self.big_gamma;
        self.base.potential(z) + self.delta * ((z.powf(g) - z) / (g - 1.0) + (z * z - z))
    }

    /// `P_δ'(ϱ) = ∫_1^ϱ p_δ(s)/s² ds + p_δ(ϱ)/ϱ`.
    pub fn potential_delta_derivative(&self, z: f64) -> f64 {
        (self.potential_delta(z) + self.p_delta(z)) / z
    }

    /// `P_δ''(ϱ) = p_δ'(ϱ)/ϱ`.
    pub fn potential_delta_second(&self, z: f64) -> f64 {
        let z = z.max(f64::MIN_POSITIVE);
        self.p_delta_derivative(z) / z
    }
}

fn map_density(rho: &Field, f: impl Fn(f64) -> f64) -> Result<Field> {
    rho.expect_components(1)?;
    Ok(checked_density(rho)?.map(f))
}

pub fn pressure(rho: &Field, law: &PressureLaw) -> Result<Field> {
    map_density(rho, |z| law.p(z))
}

pub fn pressure_delta(rho: &Field, law: &PressureLaw) -> Result<Field> {
    map_density(rho, |z| law.p_delta(z))
}

pub fn potential(rho: &Field, law: &PressureLaw) -> Result<Field> {
    map_density(rho, |z| law.potential(z))
}

pub fn potential_delta(rho: &Field, law: &PressureLaw) -> Result<Field> {
    map_density(rho, |z| law.potential_delta(z))
}

/// Shear viscosity `μ > 0` and bulk parameter `λ ≥ 2μ/3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscosityParams {
    pub mu: f64,
    pub lambda: f64,
}

impl ViscosityParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        let v = Self { mu, lambda };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.lambda - 2.0 * self.mu / 3.0 >= -1e-15) {
            return Err(invalid(
                "lambda",
                format!(
                    "lambda - 2 mu / 3 must be >= 0, got {}",
                    self.lambda - 2.0 * self.mu / 3.0
                ),
            ));
        }
        Ok(())
    }
}

/// `S(Du) = μ Du + (λ + μ) tr(Du) I` for a row-major `d × d` tensor field.
pub fn stress(du: &Field, visc: &ViscosityParams) -> Result<Field> {
    let d = du.grid().dim();
    du.expect_components(d * d)?;
    let len = du.grid().len();
    let mut out = du.scale(visc.mu);
    let bulk = visc.lambda + visc.mu;
    for i in 0..len {
        let tr: f64 = (0..d).map(|a| du.component(a * d + a)[i]).sum();
        for a in 0..d {
            out.component_mut(a * d + a)[i] += bulk * tr;
        }
    }
    Ok(out)
}

/// `S(Du):Du = μ|Du|² + (λ + μ)(tr Du)²`.
pub fn stress_dissipation(du: &Field, visc: &ViscosityParams) -> Result<Field> {
    let d = du.grid().dim();
    du.expect_components(d * d)?;
    let len = du.grid().len();
    let values = (0..len)
        .map(|i| {
            let frob: f64 = (0..d * d).map(|c| du.component(c)[i].powi(2)).sum();
            let tr: f64 = (0..d).map(|a| du.component(a * d + a)[i]).sum();
            visc.mu * frob + (visc.lambda + visc.mu) * tr * tr
        })
        .collect();
    Field::scalar(du.grid(), values)
}

fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth non-increasing cutoff: `1` on `(-∞, 0]`, `0` on `[1, ∞)`.
pub fn cutoff_chi(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z >= 1.0 {
        return 0.0;
    }
    let (a, b) = (sigma(1.0 - z), sigma(z));
    a / (a + b)
}

/// Euclidean norm of Galerkin coefficients (equal to the `L²` norm of the field).
pub fn coeff_norm(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `[v]_R = χ(‖v‖ - R) v`.
pub fn velocity_truncate(coeffs: &[f64], radius: f64) -> Vec<f64> {
    let factor = cutoff_chi(coeff_norm(coeffs) - radius);
    coeffs.iter().map(|c| factor * c).collect()
}

/// Closed-form kernel shapes; all are even, smooth and band-limited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelPreset {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · Σ_i cos(π x_i)`.
    CosineSum {
        amplitude: f64,
    },
    /// `amplitude · Π_i (1 + cos(π x_i)) / 2^d`.
    RaisedCosine {
        amplitude: f64,
    },
}

impl KernelPreset {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            KernelPreset::Zero => 0.0,
            KernelPreset::Constant { value } => value,
            KernelPreset::CosineSum { amplitude } => amplitude * x.iter().map(|&v| (PI * v).cos()).sum::<f64>(),
            KernelPreset::RaisedCosine { amplitude } => {
                amplitude * x.iter().map(|&v| 0.5 * (1.0 + (PI * v).cos())).product::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            KernelPreset::Zero | KernelPreset::Constant { .. } => out.fill(0.0),
            KernelPreset::CosineSum { amplitude } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = -amplitude * PI * (PI * v).sin();
                }
            }
            KernelPreset::RaisedCosine { amplitude } => {
                for a in 0..x.len() {
                    let mut g = -0.5 * PI * (PI * x[a]).sin();
                    for (b, &v) in x.iter().enumerate() {
                        if b != a {
                            g *= 0.5 * (1.0 + (PI * v).cos());
                        }
                    }
                    out[a] = amplitude * g;
                }
            }
        }
    }

    pub fn sample(&self, grid: &TorusGrid) -> Field {
        Field::from_fn(grid, |x| self.eval(x))
    }
}

/// A periodic kernel sampled on the grid, with its spectrum cached.
#[derive(Clone, Debug)]
pub struct PeriodicKernel {
    field: Field,
    spectrum: SpectralField,
    preset: Option<KernelPreset>,
}

impl PeriodicKernel {
    pub fn from_field(field: Field) -> Result<Self> {
        field.expect_components(1)?;
        if !field.is_finite() {
            return Err(Error::NonFinite("kernel samples"));
        }
        let spectrum = to_spectral(&field);
        Ok(Self {
            field,
            spectrum,
            preset: None,
        })
    }

    pub fn from_preset(grid: &TorusGrid, preset: KernelPreset) -> Self {
        let field = preset.sample(grid);
        let spectrum = to_spectral(&field);
        Self {
            field,
            spectrum,
            preset: Some(preset),
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn spectrum(&self) -> &SpectralField {
        &self.spectrum
    }

    pub fn preset(&self) -> Option<&KernelPreset> {
        self.preset.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.field.max_abs() == 0.0
    }

    /// Point value: closed form for presets, trigonometric interpolation otherwise.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(p) = &self.preset {
            return p.eval(x);
        }
        let grid = self.spectrum.grid();
        let mut acc = 0.0;
        for (i, c) in self.spectrum.component(0).iter().enumerate() {
            let k = grid.wavevector(i);
            let phase: f64 = (0..grid.dim()).map(|a| PI * k[a] as f64 * x[a]).sum();
            acc += (c * Complex64::from_polar(1.0, phase)).re;
        }
        acc
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        if let Some(p) = &self.preset {
            return p.gradient(x, out);
        }
        let grid = self.spectrum.grid();
        out.fill(0.0);
        for (i, c) in self.spectrum.component(0).iter().enumerate() {
            let k = grid.wavevector(i);
            let phase: f64 = (0..grid.dim()).map(|a| PI * k[a] as f64 * x[a]).sum();
            let e = c * Complex64::from_polar(1.0, phase);
            for a in 0..grid.dim() {
                if !grid.is_nyquist(k[a]) {
                    out[a] += (Complex64::new(0.0, PI * k[a] as f64) * e).re;
                }
            }
        }
    }
}

/// Attraction-repulsion kernel `K` and alignment kernel `ψ`.
#[derive(Clone, Debug)]
pub struct KernelPair {
    pub k: PeriodicKernel,
    pub psi: PeriodicKernel,
}

impl KernelPair {
    /// Builds the pair without validation; see [`validate_kernels`].
    pub fn new(k: PeriodicKernel, psi: PeriodicKernel) -> Result<Self> {
        if k.field.grid() != psi.field.grid() {
            return Err(Error::GridMismatch("K and psi sampled on different grids".into()));
        }
        Ok(Self { k, psi })
    }

    pub fn from_presets(grid: &TorusGrid, k: KernelPreset, psi: KernelPreset) -> Self {
        Self {
            k: PeriodicKernel::from_preset(grid, k),
            psi: PeriodicKernel::from_preset(grid, psi),
        }
    }

    /// Both kernels identically zero.
    pub fn zero(grid: &TorusGrid) -> Self {
        Self::from_presets(grid, KernelPreset::Zero, KernelPreset::Zero)
    }

    /// The default pair: `K = Σ cos(πx_i)`, `ψ = Π(1 + cos(πx_i))/2^d`.
    pub fn default_presets(grid: &TorusGrid) -> Self {
        Self::from_presets(
            grid,
            KernelPreset::CosineSum { amplitude: 1.0 },
            KernelPreset::RaisedCosine { amplitude: 1.0 },
        )
    }

    /// Runs [`validate_kernels`] and rejects the pair on any failed check.
    pub fn validated(self, tail_threshold: f64) -> Result<Self> {
        let report = validate_kernels(&self, tail_threshold);
        if !report.all_passed() {
            return Err(Error::Invalid(format!("kernel validation failed: {report:?}")));
        }
        Ok(self)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.k.field.grid()
    }
}

/// Outcome of the kernel assumption checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub k_symmetric: bool,
    pub psi_symmetric: bool,
    pub psi_nonnegative: bool,
    pub k_smooth: bool,
    pub psi_smooth: bool,
    pub k_asymmetry: f64,
    pub psi_asymmetry: f64,
    pub psi_min: f64,
    pub k_tail_fraction: f64,
    pub psi_tail_fraction: f64,
}

impl KernelReport {
    pub fn all_passed(&self) -> bool {
        self.k_symmetric && self.psi_symmetric && self.psi_nonnegative && self.k_smooth && self.psi_smooth
    }
}

pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-8;

fn asymmetry(f: &Field) -> f64 {
    let g = f.grid();
    let v = f.values();
    (0..g.len())
        .map(|i| (v[i] - v[g.reflected_index(i)]).abs())
        .fold(0.0, f64::max)
}

/// Fraction of the non-constant spectral energy outside the 2/3-rule band.
pub fn tail_fraction(spectrum: &SpectralField) -> f64 {
    let g = spectrum.grid();
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, c) in spectrum.component(0).iter().enumerate() {
        let k = g.wavevector(i);
        if k == [0, 0, 0] {
            continue;
        }
        total += c.norm_sqr();
        if !g.is_dealiased(k) {
            tail += c.norm_sqr();
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Checks reflection symmetry of `K` and `ψ`, `ψ ≥ 0`, and spectral decay.
pub fn validate_kernels(kp: &KernelPair, tail_threshold: f64) -> KernelReport {
    let k_asym = asymmetry(&kp.k.field);
    let psi_asym = asymmetry(&kp.psi.field);
    let psi_min = kp.psi.field.min();
    let k_tail = tail_fraction(&kp.k.spectrum);
    let psi_tail = tail_fraction(&kp.psi.spectrum);
    let scale = |f: &Field| f.max_abs().max(1.0);
    KernelReport {
        k_symmetric: k_asym <= 1e-12 * scale(&kp.k.field),
        psi_symmetric: psi_asym <= 1e-12 * scale(&kp.psi.field),
        psi_nonnegative: psi_min >= 0.0,
        k_smooth: k_tail <= tail_threshold,
        psi_smooth: psi_tail <= tail_threshold,
        k_asymmetry: k_asym,
        psi_asymmetry: psi_asym,
        psi_min,
        k_tail_fraction: k_tail,
        psi_tail_fraction: psi_tail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pressure_values() {
        let g = TorusGrid::new(1, 8).unwrap();
        let law = PressureLaw::power(1.0, 2.0, 0.1).unwrap();
        assert_eq!(law.big_gamma(), 6.0);
        assert!(pressure(&Field::constant(&g, 0.0), &law).unwrap().max_abs() == 0.0);
        let two = Field::constant(&g, 2.0);
        assert!((pressure(&two, &law).unwrap().values()[0] - 4.0).abs() < 1e-14);
        assert!((pressure_delta(&two, &law).unwrap().values()[0] - 10.8).abs() < 1e-12);
        let off = law.with_delta(0.0).unwrap();
        assert_eq!(pressure_delta(&two, &off).unwrap(), pressure(&two, &off).unwrap());
        assert_eq!(PressureLaw::power(1.0, 7.5, 0.0).unwrap().big_gamma(), 7.5);
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(PressureLaw::power(1.0, 1.5, 0.0).is_err());
        assert!(PressureLaw::power(0.0, 2.0, 0.0).is_err());
        assert!(PressureLaw::power(1.0, 2.0, -1.0).is_err());
        assert!(ViscosityParams::new(0.0, 1.0).is_err());
        assert!(ViscosityParams::new(1.0, 0.5).is_err());
        assert!(ViscosityParams::new(1.0, 2.0 / 3.0).is_ok());
    }

    #[test]
    fn negative_density_is_reported_with_index() {
        let g = TorusGrid::new(1, 8).unwrap();
        let law = PressureLaw::power(1.0, 2.0, 0.0).unwrap();
        let mut rho = Field::constant(&g, 1.0);
        rho.values_mut()[3] = -1e-3;
        match pressure(&rho, &law) {
            Err(Error::PositivityBreach { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
        rho.values_mut()[3] = -1e-13;
        assert_eq!(pressure(&rho, &law).unwrap().values()[3], 0.0);
    }

    #[test]
    fn potential_values() {
        let law = PressureLaw::power(1.0, 2.0, 0.0).unwrap();
        assert_eq!(law.potential(1.0), 0.0);
        assert!((law.potential(2.0) - 2.0).abs() < 1e-14);
        assert_eq!(law.potential_delta(0.0), 0.0);
    }

    #[derive(Debug)]
    struct Quadratic;
    impl BarotropicLaw for Quadratic {
        fn pressure(&self, z: f64) -> f64 {
            z * z + z.powi(3)
        }
        fn derivative(&self, z: f64) -> f64 {
            2.0 * z + 3.0 * z * z
        }
        fn exponent(&self) -> f64 {
            3.0
        }
    }

    #[test]
    fn custom_law_potential_by_quadrature() {
        let law = PressureLaw::custom(Arc::new(Quadratic), 0.0).unwrap();
        // P = z ∫_1^z (1 + s) ds = z[(z - 1) + (z² - 1)/2]
        for z in [0.3, 1.0, 2.5] {
            let exact = z * ((z - 1.0) + 0.5 * (z * z - 1.0));
            assert!((law.potential(z) - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn stress_one_dimensional_example() {
        let g = TorusGrid::new(1, 4).unwrap();
        let visc = ViscosityParams::new(1.0, 2.0 / 3.0).unwrap();
        let du = Field::constant(&g, 2.0);
        let s = stress(&du, &visc).unwrap();
        assert!((s.values()[0] - (2.0 + 10.0 / 3.0)).abs() < 1e-14);
        let diss = stress_dissipation(&du, &visc).unwrap();
        assert!((diss.values()[0] - (4.0 + 20.0 / 3.0)).abs() < 1e-13);
        let zero = Field::zeros(&g, 1);
        assert_eq!(stress_dissipation(&zero, &visc).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cutoff_plateaus_and_monotonicity() {
        assert_eq!(cutoff_chi(-0.5), 1.0);
        assert_eq!(cutoff_chi(0.0), 1.0);
        assert_eq!(cutoff_chi(1.0), 0.0);
        assert_eq!(cutoff_chi(2.0), 0.0);
        let (a, b) = (cutoff_chi(0.3), cutoff_chi(0.7));
        assert!(a > 0.0 && a < 1.0 && a >= b);
        assert!((cutoff_chi(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncation_plateaus() {
        let v = vec![3.0, 4.0];
        assert_eq!(velocity_truncate(&v, 10.0), v);
        assert!(velocity_truncate(&v, 0.0).iter().all(|&c| c == 0.0));
        let r = 4.5;
        let out = velocity_truncate(&v, r);
        let chi = cutoff_chi(0.5);
        assert!((out[0] - chi * 3.0).abs() < 1e-15 && (out[1] - chi * 4.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_validation() {
        let g = TorusGrid::new(1, 32).unwrap();
        let good = KernelPair::new(
            PeriodicKernel::from_field(Field::from_fn(&g, |x| (PI * x[0]).cos())).unwrap(),
            PeriodicKernel::from_field(Field::from_fn(&g, |x| 1.0 + (PI * x[0]).cos())).unwrap(),
        )
        .unwrap();
        assert!(validate_kernels(&good, DEFAULT_TAIL_THRESHOLD).all_passed());

        let odd = KernelPair::new(
            good.k.clone(),
            PeriodicKernel::from_field(Field::from_fn(&g, |x| (PI * x[0]).sin())).unwrap(),
        )
        .unwrap();
        let rep = validate_kernels(&odd, DEFAULT_TAIL_THRESHOLD);
        assert!(!rep.psi_nonnegative && !rep.psi_symmetric);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Field::scalar(&g, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let rough = KernelPair::new(PeriodicKernel::from_field(noise).unwrap(), good.psi.clone()).unwrap();
        let rep = validate_kernels(&rough, DEFAULT_TAIL_THRESHOLD);
        assert!(!rep.k_smooth && rep.k_tail_fraction > 0.1);
        assert!(rough.validated(DEFAULT_TAIL_THRESHOLD).is_err());
    }

    #[test]
    fn interpolated_kernel_matches_preset() {
        let g = TorusGrid::new(2, 16).unwrap();
        let preset = KernelPreset::RaisedCosine { amplitude: 1.5 };
        let tab = PeriodicKernel::from_field(preset.sample(&g)).unwrap();
        let x = [0.123, -0.77];
        assert!((tab.eval(&x) - preset.eval(&x)).abs() < 1e-12);
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        tab.gradient(&x, &mut a);
        preset.gradient(&x, &mut b);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}
