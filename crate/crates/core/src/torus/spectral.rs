use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::{Field, TorusGrid};

/// Fourier coefficients of a (possibly multi-component) real field.
///
/// Normalized so that `f(x) = Σ_k c_k exp(iπ k·x)`; a constant field `c`
/// has `c_0 = c`. Coefficients are stored in FFT index order, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid, components: usize) -> Self {
        Self {
            grid: grid.clone(),
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); components * grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Coefficient of wavevector `k` in component `c`.
    pub fn coefficient(&self, c: usize, k: [i64; 3]) -> Complex64 {
        self.component(c)[self.grid.index_of_wavevector(k)]
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.components {
            let comp = self.component(c);
            for i in 0..self.grid.len() {
                let j = self.grid.reflected_index(i);
                worst = worst.max((comp[i] - comp[j].conj()).norm());
            }
        }
        worst
    }

    /// Applies `f(k) * c_k` to every coefficient.
    pub fn map_modes(&self, f: impl Fn([i64; 3]) -> Complex64) -> SpectralField {
        let len = self.grid.len();
        let mult: Vec<Complex64> = (0..len).map(|i| f(self.grid.wavevector(i))).collect();
        let mut out = self.clone();
        for c in 0..self.components {
            for (v, m) in out.component_mut(c).iter_mut().zip(&mult) {
                *v *= m;
            }
        }
        out
    }

    /// Zeroes modes outside the 2/3-rule band.
    pub fn dealias(&mut self) {
        let len = self.grid.len();
        let keep: Vec<bool> = (0..len)
            .map(|i| self.grid.is_dealiased(self.grid.wavevector(i)))
            .collect();
        for c in 0..self.components {
            for (v, &k) in self.component_mut(c).iter_mut().zip(&keep) {
                if !k {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

fn fft_axes(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let d = grid.dim();
    let len = grid.len();
    let plans = grid.plans();
    let fft = if inverse { &plans.inverse } else { &plans.forward };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for outer in 0..len / block {
            for inner in 0..stride {
                let start = outer * block + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[start + j * stride] = *value;
                }
            }
        }
    }
}

/// Parity sign `(-1)^{Σ i_a}` that moves the phase origin from `x = -1` to `x = 0`.
fn origin_sign(grid: &TorusGrid, flat: usize) -> f64 {
    let idx = grid.multi_index(flat);
    if idx[..grid.dim()].iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn to_spectral(f: &Field) -> SpectralField {
    let grid = f.grid().clone();
    let len = grid.len();
    let scale = 1.0 / len as f64;
    let mut coeffs = Vec::with_capacity(f.components() * len);
    for c in 0..f.components() {
        let mut buf: Vec<Complex64> = f.component(c).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_axes(&grid, &mut buf, false);
        for (i, v) in buf.iter_mut().enumerate() {
            *v *= scale * origin_sign(&grid, i);
        }
        coeffs.extend(buf);
    }
    SpectralField {
        grid,
        components: f.components(),
        coeffs,
    }
}

pub fn from_spectral(s: &SpectralField) -> Field {
    let grid = s.grid.clone();
    let len = grid.len();
    let mut values = Vec::with_capacity(s.components * len);
    for c in 0..s.components {
        let mut buf: Vec<Complex64> = s
            .component(c)
            .iter()
            .enumerate()
            .map(|(i, v)| v * origin_sign(&grid, i))
            .collect();
        fft_axes(&grid, &mut buf, true);
        values.extend(buf.iter().map(|v| v.re));
    }
    Field::new(&grid, s.components, values).expect("spectral layout matches grid")
}

/// First-derivative multiplier `iπk` along `axis`; zero on the Nyquist mode.
pub(crate) fn derivative_symbol(grid: &TorusGrid, k: [i64; 3], axis: usize) -> Complex64 {
    if grid.is_nyquist(k[axis]) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, PI * k[axis] as f64)
    }
}

pub(crate) fn laplacian_symbol(grid: &TorusGrid, k: [i64; 3]) -> f64 {
    -PI * PI * k[..grid.dim()].iter().map(|&c| (c * c) as f64).sum::<f64>()
}

fn partial(s: &SpectralField, comp: usize, axis: usize) -> SpectralField {
    let grid = s.grid.clone();
    let len = grid.len();
    let mut out = SpectralField::zeros(&grid, 1);
    let src = s.component(comp);
    for i in 0..len {
        out.coeffs[i] = src[i] * derivative_symbol(&grid, grid.wavevector(i), axis);
    }
    out
}

fn stack_spectral(parts: Vec<SpectralField>) -> SpectralField {
    let grid = parts[0].grid.clone();
    let components = parts.len();
    let coeffs = parts.into_iter().flat_map(|p| p.coeffs).collect();
    SpectralField {
        grid,
        components,
        coeffs,
    }
}

/// Gradient of a scalar field.
pub fn gradient(f: &Field) -> Result<Field> {
    f.expect_components(1)?;
    let s = to_spectral(f);
    let parts = (0..f.grid().dim()).map(|a| partial(&s, 0, a)).collect();
    Ok(from_spectral(&stack_spectral(parts)))
}

/// Gradient of every component: component `a * d + b` holds `∂_a f_b`.
pub fn gradient_components(f: &Field) -> Field {
    let d = f.grid().dim();
    let s = to_spectral(f);
    let mut parts = Vec::with_capacity(d * f.components());
    for a in 0..d {
        for b in 0..f.components() {
            parts.push(partial(&s, b, a));
        }
    }
    from_spectral(&stack_spectral(parts))
}

/// Divergence of a vector field.
pub fn divergence(v: &Field) -> Result<Field> {
    let d = v.grid().dim();
    v.expect_components(d)?;
    let s = to_spectral(v);
    let grid = v.grid().clone();
    let mut out = SpectralField::zeros(&grid, 1);
    for a in 0..d {
        let src = s.component(a);
        for i in 0..grid.len() {
            out.coeffs[i] += src[i] * derivative_symbol(&grid, grid.wavevector(i), a);
        }
    }
    Ok(from_spectral(&out))
}

/// Row divergence of a `d × d` tensor field: `(div T)_b = Σ_a ∂_a T_ab`.
pub fn divergence_tensor(t: &Field) -> Result<Field> {
    let d = t.grid().dim();
    t.expect_components(d * d)?;
    let s = to_spectral(t);
    let grid = t.grid().clone();
    let mut out = SpectralField::zeros(&grid, d);
    for b in 0..d {
        for a in 0..d {
            let src = s.component(a * d + b);
            for i in 0..grid.len() {
                let m = derivative_symbol(&grid, grid.wavevector(i), a);
                out.component_mut(b)[i] += src[i] * m;
            }
        }
    }
    Ok(from_spectral(&out))
}

/// Componentwise Laplacian with the exact symbol `-π²|k|²`.
pub fn laplacian(f: &Field) -> Field {
    let s = to_spectral(f);
    let grid = f.grid().clone();
    from_spectral(&s.map_modes(|k| Complex64::new(laplacian_symbol(&grid, k), 0.0)))
}

/// Symmetric gradient `D v = (∇v + ∇vᵀ)/2` as a row-major `d × d` tensor.
pub fn sym_gradient(v: &Field) -> Result<Field> {
    let d = v.grid().dim();
    v.expect_components(d)?;
    let g = gradient_components(v);
    let len = v.grid().len();
    let mut out = Field::zeros(v.grid(), d * d);
    for a in 0..d {
        for b in 0..d {
            let (gab, gba) = (g.component(a * d + b), g.component(b * d + a));
            let dst = out.component_mut(a * d + b);
            for i in 0..len {
                dst[i] = 0.5 * (gab[i] + gba[i]);
            }
        }
    }
    Ok(out)
}

/// Periodic convolution `(K * f)(x) = ∫ K(x - y) f(y) dy`, applied per component of `f`.
pub fn convolve(f: &Field, kernel: &Field) -> Result<Field> {
    kernel.expect_components(1)?;
    if f.grid() != kernel.grid() {
        return Err(Error::GridMismatch(
            "convolution operands live on different grids".into(),
        ));
    }
    Ok(convolve_with_spectrum(f, &to_spectral(kernel)))
}

/// Convolution against a precomputed kernel spectrum.
pub fn convolve_with_spectrum(f: &Field, kernel: &SpectralField) -> Field {
    let grid = f.grid().clone();
    let measure = grid.measure();
    let mut s = to_spectral(f);
    let kc = kernel.component(0);
    for c in 0..s.components {
        for (v, k) in s.component_mut(c).iter_mut().zip(kc) {
            *v *= k * measure;
        }
    }
    from_spectral(&s)
}

/// Inverse Laplacian of the mean-free part; the output has zero mean.
pub fn inv_laplacian(f: &Field) -> Result<Field> {
    f.expect_components(1)?;
    let s = to_spectral(f);
    let grid = f.grid().clone();
    let out = s.map_modes(|k| {
        let sym = laplacian_symbol(&grid, k);
        if sym == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / sym, 0.0)
        }
    });
    Ok(from_spectral(&out))
}

/// Applies the 2/3-rule filter in physical space.
pub fn dealias(f: &Field) -> Field {
    let mut s = to_spectral(f);
    s.dealias();
    from_spectral(&s)
}

/// The measure-weighted integral `∫ f dx` (so the constant 1 integrates to `2^d`).
pub fn mean(f: &Field) -> f64 {
    f.integral()
}

/// `L^p` norm with cell-volume quadrature; vector fields use the pointwise
/// Euclidean magnitude. `p = f64::INFINITY` gives the maximum norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(crate::error::invalid("p", format!("must lie in [1, inf], got {p}")));
    }
    let mag = if f.components() == 1 {
        f.map(f64::abs)
    } else {
        f.magnitude()
    };
    if p.is_infinite() {
        return Ok(mag.max());
    }
    let cell = f.grid().cell_volume();
    let sum = crate::torus::field::neumaier_sum(mag.values().iter().map(|v| v.powf(p)));
    Ok((cell * sum).powf(1.0 / p))
}

/// `‖f‖²` via Parseval: `2^d Σ |c_k|²`.
pub fn parseval_norm_sq(s: &SpectralField) -> f64 {
    s.grid.measure() * s.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &TorusGrid, comps: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..comps * grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Field::new(grid, comps, values).unwrap()
    }

    /// Random trigonometric polynomial without Nyquist content.
    fn smooth_random(grid: &TorusGrid, seed: u64) -> Field {
        let f = random_field(grid, 1, seed);
        let mut s = to_spectral(&f);
        let g = grid.clone();
        s = s.map_modes(|k| {
            if k[..g.dim()].iter().any(|&c| g.is_nyquist(c)) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        from_spectral(&s)
    }

    #[test]
    fn constant_has_only_zero_mode() {
        let g = TorusGrid::new(2, 8).unwrap();
        let s = to_spectral(&Field::constant(&g, 3.5));
        assert!((s.coefficient(0, [0, 0, 0]).re - 3.5).abs() < 1e-14);
        let others: f64 = s.coeffs()[1..].iter().map(|c| c.norm()).sum();
        assert!(others < 1e-13);
    }

    #[test]
    fn sine_has_two_conjugate_modes() {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).sin());
        let s = to_spectral(&f);
        let c1 = s.coefficient(0, [1, 0, 0]);
        let cm1 = s.coefficient(0, [-1, 0, 0]);
        assert!((c1 - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((cm1 - c1.conj()).norm() < 1e-15);
        let rest: f64 = (0..16)
            .filter(|&i| i != 1 && i != 15)
            .map(|i| s.coeffs()[i].norm())
            .sum();
        assert!(rest < 1e-14);
    }

    #[test]
    fn roundtrip_and_parseval() {
        for (d, n) in [(1, 8), (1, 16), (1, 32), (1, 64), (2, 16), (3, 8)] {
            let g = TorusGrid::new(d, n).unwrap();
            let f = random_field(&g, 1, 7 + n as u64);
            let s = to_spectral(&f);
            assert!(s.hermitian_defect() < 1e-14);
            let back = from_spectral(&s);
            let err = lp_norm(&(&back - &f), 2.0).unwrap() / lp_norm(&f, 2.0).unwrap();
            assert!(err < 1e-12, "d={d} n={n} err={err}");
            let l2sq = f.inner(&f);
            assert!((parseval_norm_sq(&s) - l2sq).abs() < 1e-12 * l2sq);
        }
    }

    #[test]
    fn laplacian_of_sine() {
        let g = TorusGrid::new(1, 32).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).sin());
        let lap = laplacian(&f);
        let exact = Field::from_fn(&g, |x| -PI * PI * (PI * x[0]).sin());
        assert!((&lap - &exact).max_abs() < 1e-10);
        assert!(gradient(&Field::constant(&g, 2.0)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn div_grad_is_laplacian() {
        for (d, n) in [(1, 32), (2, 16), (3, 8)] {
            let g = TorusGrid::new(d, n).unwrap();
            let f = smooth_random(&g, 3);
            let dg = divergence(&gradient(&f).unwrap()).unwrap();
            assert!((&dg - &laplacian(&f)).max_abs() < 1e-12 * n as f64 * n as f64);
        }
    }

    #[test]
    fn inverse_laplacian_identities() {
        let g = TorusGrid::new(1, 32).unwrap();
        assert!(inv_laplacian(&Field::constant(&g, 4.0)).unwrap().max_abs() < 1e-15);
        let f = Field::from_fn(&g, |x| (PI * x[0]).sin());
        let il = inv_laplacian(&f).unwrap();
        let exact = Field::from_fn(&g, |x| -(PI * x[0]).sin() / (PI * PI));
        assert!((&il - &exact).max_abs() < 1e-10);

        let g2 = TorusGrid::new(2, 16).unwrap();
        let r = random_field(&g2, 1, 11);
        let centered = r.map(|v| v - r.average());
        let back = laplacian(&inv_laplacian(&r).unwrap());
        assert!(lp_norm(&(&back - &centered), 2.0).unwrap() < 1e-10);
        assert!(inv_laplacian(&r).unwrap().integral().abs() < 1e-12);
    }

    #[test]
    fn sym_gradient_is_symmetric() {
        let g = TorusGrid::new(2, 16).unwrap();
        let v = Field::stack(&[smooth_random(&g, 1), smooth_random(&g, 2)]).unwrap();
        let du = sym_gradient(&v).unwrap();
        assert_eq!(du.component(1), du.component(2));
        let trace = &du.component_field(0) + &du.component_field(3);
        assert!((&trace - &divergence(&v).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn convolution_of_constant() {
        let g = TorusGrid::new(2, 16).unwrap();
        let k = random_field(&g, 1, 5);
        let out = convolve(&Field::constant(&g, 2.0), &k).unwrap();
        let expected = 2.0 * k.integral();
        assert!(out.values().iter().all(|v| (v - expected).abs() < 1e-12));
        let other = TorusGrid::new(2, 8).unwrap();
        assert!(convolve(&Field::constant(&other, 1.0), &k).is_err());
    }

    #[test]
    fn lp_norms() {
        let g = TorusGrid::new(1, 16).unwrap();
        let one = Field::constant(&g, 1.0);
        assert!((lp_norm(&one, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((lp_norm(&one, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(lp_norm(&one.scale(-3.0), f64::INFINITY).unwrap(), 3.0);
        assert!(lp_norm(&one, 0.5).is_err());
    }
}
