use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::spectral::{from_spectral, to_spectral, SpectralField};
use crate::torus::{Field, TorusGrid};

/// Shape of one real Laplacian eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Constant,
    Cos,
    Sin,
}

/// An `L²`-orthonormal real eigenfunction of `-Δ` on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisMode {
    /// Wavevector with positive leading nonzero component (zero for the constant).
    pub wavevector: [i64; 3],
    pub kind: ModeKind,
    /// Eigenvalue `π²|k|²`.
    pub eigenvalue: f64,
}

impl BasisMode {
    fn amplitude(&self, dim: usize) -> f64 {
        let measure = 2f64.powi(dim as i32);
        match self.kind {
            ModeKind::Constant => 1.0 / measure.sqrt(),
            _ => (2.0 / measure).sqrt(),
        }
    }

    /// Point evaluation (used by quadrature oracles).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dim = x.len();
        let phase: f64 = (0..dim).map(|a| PI * self.wavevector[a] as f64 * x[a]).sum();
        let amp = self.amplitude(dim);
        match self.kind {
            ModeKind::Constant => amp,
            ModeKind::Cos => amp * phase.cos(),
            ModeKind::Sin => amp * phase.sin(),
        }
    }
}

/// The first `m` real eigenfunctions ordered by eigenvalue with a
/// lexicographic tie-break on the signed wavevector.
///
/// Each dealiased wavevector `k` contributes one function: `cos(πk·x)` when
/// its leading nonzero component is positive, `sin(-πk·x)` otherwise.
#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    grid: TorusGrid,
    modes: Vec<BasisMode>,
}

impl GalerkinBasis {
    /// Number of eigenfunctions available on the grid after dealiasing.
    pub fn capacity(grid: &TorusGrid) -> usize {
        let per_axis = 2 * grid.dealias_limit() as usize + 1;
        per_axis.pow(grid.dim() as u32)
    }

    pub fn new(grid: &TorusGrid, m: usize) -> Result<Self> {
        let capacity = Self::capacity(grid);
        if m == 0 || m > capacity {
            return Err(Error::ModeCapacity { requested: m, capacity });
        }
        let mut modes = eigenmodes(grid.dim(), grid.dealias_limit());
        modes.truncate(m);
        Ok(Self {
            grid: grid.clone(),
            modes,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    /// Grid samples of basis function `i`.
    pub fn sample(&self, i: usize) -> Field {
        let mode = self.modes[i];
        Field::from_fn(&self.grid, |x| mode.eval(x))
    }

    fn coefficients_from_spectrum(&self, s: &SpectralField, comp: usize) -> Vec<f64> {
        let d = self.grid.dim();
        self.modes
            .iter()
            .map(|mode| {
                let c = s.coefficient(comp, mode.wavevector);
                let amp = mode.amplitude(d);
                match mode.kind {
                    ModeKind::Constant => c.re / amp,
                    ModeKind::Cos => 2.0 * c.re / amp,
                    ModeKind::Sin => -2.0 * c.im / amp,
                }
            })
            .collect()
    }

    /// Coefficients `⟨f_c, w_i⟩` for every component, component-major (`m` per component).
    pub fn analyze(&self, f: &Field) -> Vec<f64> {
        let s = to_spectral(f);
        (0..f.components())
            .flat_map(|c| self.coefficients_from_spectrum(&s, c))
            .collect()
    }

    /// Field with the given component-major coefficients.
    pub fn synthesize(&self, coeffs: &[f64], components: usize) -> Field {
        let m = self.modes.len();
        debug_assert_eq!(coeffs.len(), m * components);
        let d = self.grid.dim();
        let mut s = SpectralField::zeros(&self.grid, components);
        for c in 0..components {
            let dst = s.component_mut(c);
            for (mode, &a) in self.modes.iter().zip(&coeffs[c * m..(c + 1) * m]) {
                let amp = mode.amplitude(d);
                let ip = self.grid.index_of_wavevector(mode.wavevector);
                let neg = mode.wavevector.map(|v| -v);
                let im = self.grid.index_of_wavevector(neg);
                match mode.kind {
                    ModeKind::Constant => dst[ip] += Complex64::new(a * amp, 0.0),
                    ModeKind::Cos => {
                        dst[ip] += Complex64::new(0.5 * a * amp, 0.0);
                        dst[im] += Complex64::new(0.5 * a * amp, 0.0);
                    }
                    ModeKind::Sin => {
                        dst[ip] += Complex64::new(0.0, -0.5 * a * amp);
                        dst[im] += Complex64::new(0.0, 0.5 * a * amp);
                    }
                }
            }
        }
        from_spectral(&s)
    }

    /// Orthogonal projection `Π_m` applied per component.
    pub fn project(&self, f: &Field) -> Field {
        self.synthesize(&self.analyze(f), f.components())
    }
}

/// All real eigenfunctions with `|k_a| ≤ lim`, in basis order.
pub fn eigenmodes(dim: usize, lim: i64) -> Vec<BasisMode> {
    let mut ks: Vec<[i64; 3]> = Vec::new();
    let mut cur = [0i64; 3];
    fn rec(axis: usize, d: usize, lim: i64, cur: &mut [i64; 3], out: &mut Vec<[i64; 3]>) {
        if axis == d {
            out.push(*cur);
            return;
        }
        for k in -lim..=lim {
            cur[axis] = k;
            rec(axis + 1, d, lim, cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, dim, lim, &mut cur, &mut ks);
    ks.sort_by(|a, b| {
        let na: i64 = a.iter().map(|c| c * c).sum();
        let nb: i64 = b.iter().map(|c| c * c).sum();
        na.cmp(&nb).then(a.cmp(b))
    });
    ks.into_iter()
        .map(|k| {
            let eigenvalue = PI * PI * k.iter().map(|c| (c * c) as f64).sum::<f64>();
            match k.iter().copied().find(|&c| c != 0) {
                None => BasisMode {
                    wavevector: k,
                    kind: ModeKind::Constant,
                    eigenvalue,
                },
                Some(c) if c > 0 => BasisMode {
                    wavevector: k,
                    kind: ModeKind::Cos,
                    eigenvalue,
                },
                Some(_) => BasisMode {
                    wavevector: [-k[0], -k[1], -k[2]],
                    kind: ModeKind::Sin,
                    eigenvalue,
                },
            }
        })
        .collect()
}

/// `Π_m f` for a freshly built basis of size `m`.
pub fn project_modes(f: &Field, m: usize) -> Result<Field> {
    Ok(GalerkinBasis::new(f.grid(), m)?.project(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &TorusGrid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::scalar(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn ordering_by_eigenvalue_then_lexicographic() {
        let g = TorusGrid::new(1, 16).unwrap();
        let b = GalerkinBasis::new(&g, 5).unwrap();
        let kinds: Vec<_> = b.modes().iter().map(|m| (m.kind, m.wavevector[0])).collect();
        assert_eq!(
            kinds,
            vec![
                (ModeKind::Constant, 0),
                (ModeKind::Sin, 1),
                (ModeKind::Cos, 1),
                (ModeKind::Sin, 2),
                (ModeKind::Cos, 2)
            ]
        );
        assert_eq!(GalerkinBasis::capacity(&g), 11);
        assert!(GalerkinBasis::new(&g, 12).is_err());
    }

    #[test]
    fn basis_is_orthonormal_on_grid() {
        let g = TorusGrid::new(2, 8).unwrap();
        let b = GalerkinBasis::new(&g, GalerkinBasis::capacity(&g)).unwrap();
        let samples: Vec<Field> = (0..b.len()).map(|i| b.sample(i)).collect();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let ip = samples[i].inner(&samples[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "({i},{j}) -> {ip}");
            }
        }
    }

    #[test]
    fn analyze_matches_inner_products() {
        let g = TorusGrid::new(2, 16).unwrap();
        let b = GalerkinBasis::new(&g, 20).unwrap();
        let f = random_field(&g, 9);
        let coeffs = b.analyze(&f);
        for i in 0..b.len() {
            assert!((coeffs[i] - f.inner(&b.sample(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_properties() {
        let g = TorusGrid::new(1, 32).unwrap();
        let cap = GalerkinBasis::capacity(&g);
        let full = GalerkinBasis::new(&g, cap).unwrap();
        let smooth = Field::from_fn(&g, |x| (PI * x[0]).cos() + 0.3 * (3.0 * PI * x[0]).sin());
        assert!((&full.project(&smooth) - &smooth).max_abs() < 1e-13);

        let b = GalerkinBasis::new(&g, 5).unwrap();
        let high = Field::from_fn(&g, |x| (7.0 * PI * x[0]).sin());
        assert!(b.project(&high).max_abs() < 1e-13);

        let f = random_field(&g, 1);
        let h = random_field(&g, 2);
        let pf = b.project(&f);
        assert!((&b.project(&pf) - &pf).max_abs() < 1e-13);
        assert!((pf.inner(&h) - f.inner(&b.project(&h))).abs() < 1e-12);
    }
}
