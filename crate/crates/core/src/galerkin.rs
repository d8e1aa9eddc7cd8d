//! The velocity space `X_m`, the density-weighted mass operator `M_ϱ`, and
//! the projected deterministic drift.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::constitutive::{
    checked_density, coeff_norm, cutoff_chi, pressure_delta, stress, KernelPair, PressureLaw, ViscosityParams,
};
use crate::error::{Error, Result};
use crate::torus::{
    convolve_with_spectrum, divergence_tensor, gradient, laplacian, sym_gradient, Field, GalerkinBasis, TorusGrid,
};

/// `X_m` together with the grid samples of its basis (rows of `samples`).
#[derive(Clone, Debug)]
pub struct GalerkinSpace {
    basis: GalerkinBasis,
    samples: DMatrix<f64>,
}

impl GalerkinSpace {
    pub fn new(grid: &TorusGrid, m: usize) -> Result<Self> {
        let basis = GalerkinBasis::new(grid, m)?;
        let len = grid.len();
        let mut samples = DMatrix::zeros(m, len);
        for i in 0..m {
            let s = basis.sample(i);
            for (j, v) in s.values().iter().enumerate() {
                samples[(i, j)] = *v;
            }
        }
        Ok(Self { basis, samples })
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn grid(&self) -> &TorusGrid {
        self.basis.grid()
    }

    pub fn m(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    /// Length of a velocity coefficient vector (`m · d`).
    pub fn coeff_len(&self) -> usize {
        self.m() * self.dim()
    }

    /// Velocity field with the given coefficients.
    pub fn velocity(&self, u: &[f64]) -> Field {
        self.basis.synthesize(u, self.dim())
    }

    /// Coefficients of `Π_m f`.
    pub fn coefficients(&self, f: &Field) -> Vec<f64> {
        self.basis.analyze(f)
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }
}

/// `M_ϱ` on `X_m`. The Gram matrix `∫ϱ w_i w_j` is block diagonal over
/// velocity components, so one `m × m` block is stored and factored.
#[derive(Clone, Debug)]
pub struct MassOperator {
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    dim: usize,
}

fn smallest_eigenvalue(g: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(g.clone()).eigenvalues.min()
}

impl MassOperator {
    /// Assembles the Gram block by grid quadrature and factors it. Densities
    /// below `floor` anywhere on the grid are rejected.
    pub fn assemble(space: &GalerkinSpace, rho: &Field, floor: f64) -> Result<Self> {
        rho.expect_components(1)?;
        rho.expect_grid(space.grid())?;
        if !rho.is_finite() {
            return Err(Error::NonFinite("density in mass operator"));
        }
        let gram = Self::gram_matrix(space, rho);
        if rho.min() < floor {
            return Err(Error::MassNotPositive {
                min_eigenvalue: smallest_eigenvalue(&gram),
                floor,
            });
        }
        let factor = Cholesky::new(gram.clone()).ok_or_else(|| Error::MassNotPositive {
            min_eigenvalue: smallest_eigenvalue(&gram),
            floor,
        })?;
        Ok(Self {
            gram,
            factor,
            dim: space.dim(),
        })
    }

    /// Exactly symmetric Gram block `∫ϱ w_i w_j`.
    pub fn gram_matrix(space: &GalerkinSpace, rho: &Field) -> DMatrix<f64> {
        let w = space.samples();
        let cell = space.grid().cell_volume();
        let mut weighted = w.clone();
        for (j, mut col) in weighted.column_iter_mut().enumerate() {
            col *= rho.values()[j] * cell;
        }
        let full = &weighted * w.transpose();
        let m = full.nrows();
        DMatrix::from_fn(m, m, |i, j| if i <= j { full[(i, j)] } else { full[(j, i)] })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        smallest_eigenvalue(&self.gram)
    }

    fn blocks<'a>(&self, v: &'a [f64]) -> impl Iterator<Item = DVector<f64>> + 'a {
        let m = self.gram.nrows();
        (0..self.dim).map(move |c| DVector::from_column_slice(&v[c * m..(c + 1) * m]))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.blocks(v)
            .flat_map(|b| {
                let x: Vec<f64> = (&self.gram * b).data.into();
                x
            })
            .collect()
    }

    pub fn solve(&self, w: &[f64]) -> Vec<f64> {
        self.blocks(w)
            .flat_map(|b| {
                let x: Vec<f64> = self.factor.solve(&b).data.into();
                x
            })
            .collect()
    }
}

/// `M_ϱ v`.
pub fn mass_apply(space: &GalerkinSpace, rho: &Field, v: &[f64]) -> Result<Vec<f64>> {
    let gram = MassOperator::gram_matrix(space, rho);
    let m = space.m();
    Ok((0..space.dim())
        .flat_map(|c| {
            let b = DVector::from_column_slice(&v[c * m..(c + 1) * m]);
            let out: Vec<f64> = (&gram * b).data.into();
            out
        })
        .collect())
}

/// `M_ϱ⁻¹ w`.
pub fn mass_solve(space: &GalerkinSpace, rho: &Field, w: &[f64], floor: f64) -> Result<Vec<f64>> {
    Ok(MassOperator::assemble(space, rho, floor)?.solve(w))
}

/// Empirical Lipschitz data for `ϱ ↦ M_ϱ⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzGap {
    /// `sup_v ‖(M⁻¹_{ϱ₁} - M⁻¹_{ϱ₂}) v‖ / ‖v‖` over the probes.
    pub gap: f64,
    pub l1_distance: f64,
    /// `gap / ‖ϱ₁ - ϱ₂‖_{L¹}` (zero when the densities coincide).
    pub ratio: f64,
}

pub fn mass_lipschitz_gap(
    space: &GalerkinSpace,
    rho1: &Field,
    rho2: &Field,
    probes: &[Vec<f64>],
    floor: f64,
) -> Result<LipschitzGap> {
    let a = MassOperator::assemble(space, rho1, floor)?;
    let b = MassOperator::assemble(space, rho2, floor)?;
    let mut gap: f64 = 0.0;
    for v in probes {
        let nv = coeff_norm(v);
        if nv == 0.0 {
            continue;
        }
        let diff: Vec<f64> = a.solve(v).iter().zip(b.solve(v)).map(|(x, y)| x - y).collect();
        gap = gap.max(coeff_norm(&diff) / nv);
    }
    let l1_distance = (rho1 - rho2).map(f64::abs).integral();
    let ratio = if l1_distance > 0.0 { gap / l1_distance } else { 0.0 };
    Ok(LipschitzGap {
        gap,
        l1_distance,
        ratio,
    })
}

/// Parameters entering the deterministic drift.
#[derive(Clone, Debug)]
pub struct DriftParams<'a> {
    pub law: &'a PressureLaw,
    pub visc: &'a ViscosityParams,
    pub kernels: &'a KernelPair,
    pub eps: f64,
    pub radius: f64,
}

/// The six grouped drift contributions to `d(M_ϱ u)/dt`, in `X_m` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftTerms {
    /// `-Π_m div(ϱ[u]_R ⊗ u)`.
    pub advection: Vec<f64>,
    /// `-Π_m(χ(‖u‖ - R) ∇p_δ(ϱ))`.
    pub pressure: Vec<f64>,
    /// `Π_m(ε Δ(ϱu))`.
    pub artificial_viscosity: Vec<f64>,
    /// `Π_m div S(Du)`.
    pub viscous: Vec<f64>,
    /// `-Π_m(ϱ ∇K * ϱ)`.
    pub interaction: Vec<f64>,
    /// `Π_m(ϱ(ψ * (ϱu)) - ϱu(ψ * ϱ))`.
    pub alignment: Vec<f64>,
    /// `χ(‖u‖ - R)`.
    pub cutoff: f64,
}

impl DriftTerms {
    pub fn total(&self) -> Vec<f64> {
        let mut out = self.advection.clone();
        for part in [
            &self.pressure,
            &self.artificial_viscosity,
            &self.viscous,
            &self.interaction,
            &self.alignment,
        ] {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }
}

/// `ϱ(ψ * (ϱu)) - ϱu(ψ * ϱ)` on the grid.
pub fn alignment_force(rho: &Field, u: &Field, kernels: &KernelPair) -> Field {
    let q = u.mul_scalar_field(rho);
    let psi_q = convolve_with_spectrum(&q, kernels.psi.spectrum());
    let psi_rho = convolve_with_spectrum(rho, kernels.psi.spectrum());
    &psi_q.mul_scalar_field(rho) - &q.mul_scalar_field(&psi_rho)
}

/// Velocity field `[u]_R` and the cutoff factor for coefficients `u`.
pub fn truncated_velocity(space: &GalerkinSpace, u: &[f64], radius: f64) -> (Field, f64) {
    let chi = cutoff_chi(coeff_norm(u) - radius);
    (space.velocity(u).scale(chi), chi)
}

/// All drift terms at density `rho` and frozen velocity coefficients `u`.
pub fn galerkin_rhs(space: &GalerkinSpace, rho: &Field, u: &[f64], p: &DriftParams<'_>) -> Result<DriftTerms> {
    let rho = checked_density(rho)?;
    let grid = space.grid();
    let d = grid.dim();
    let len = grid.len();
    let uf = space.velocity(u);
    let chi = cutoff_chi(coeff_norm(u) - p.radius);
    let zeros = || vec![0.0; space.coeff_len()];

    let advection = {
        let mut t = Field::zeros(grid, d * d);
        for a in 0..d {
            for b in 0..d {
                let (va, ub) = (uf.component(a), uf.component(b));
                let dst = t.component_mut(a * d + b);
                for i in 0..len {
                    dst[i] = rho.values()[i] * chi * va[i] * ub[i];
                }
            }
        }
        space.coefficients(&-&divergence_tensor(&t)?)
    };

    let pressure = {
        let grad = gradient(&pressure_delta(&rho, p.law)?)?;
        space.coefficients(&grad.scale(-chi))
    };

    let q = uf.mul_scalar_field(&rho);
    let artificial_viscosity = if p.eps > 0.0 {
        space.coefficients(&laplacian(&q).scale(p.eps))
    } else {
        zeros()
    };

    let viscous = {
        let s = stress(&sym_gradient(&uf)?, p.visc)?;
        space.coefficients(&divergence_tensor(&s)?)
    };

    let interaction = if p.kernels.k.is_zero() {
        zeros()
    } else {
        let phi = convolve_with_spectrum(&rho, p.kernels.k.spectrum());
        let f = gradient(&phi)?.mul_scalar_field(&rho);
        space.coefficients(&-&f)
    };

    let alignment = if p.kernels.psi.is_zero() {
        zeros()
    } else {
        space.coefficients(&alignment_force(&rho, &uf, p.kernels))
    };

    let out = DriftTerms {
        advection,
        pressure,
        artificial_viscosity,
        viscous,
        interaction,
        alignment,
        cutoff: chi,
    };
    if out.total().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("drift"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{KernelPreset, PeriodicKernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_density(grid: &TorusGrid, rng: &mut ChaCha8Rng) -> Field {
        Field::scalar(grid, (0..grid.len()).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap()
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn unit_density_is_identity() {
        let g = TorusGrid::new(2, 16).unwrap();
        let space = GalerkinSpace::new(&g, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_vec(space.coeff_len(), &mut rng);
        let out = mass_apply(&space, &Field::constant(&g, 1.0), &v).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).abs() < 1e-13);
        }
        let solved = mass_solve(&space, &Field::constant(&g, 4.0), &v, 1e-8).unwrap();
        for (a, b) in solved.iter().zip(&v) {
            assert!((a - b / 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_is_symmetric_and_bounded_below() {
        let g = TorusGrid::new(1, 32).unwrap();
        let space = GalerkinSpace::new(&g, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&g, &mut rng);
        let op = MassOperator::assemble(&space, &rho, 1e-8).unwrap();
        assert_eq!(op.gram(), &op.gram().transpose());
        assert!(op.smallest_eigenvalue() >= 0.9 * rho.min());
    }

    #[test]
    fn non_positive_density_is_rejected() {
        let g = TorusGrid::new(1, 16).unwrap();
        let space = GalerkinSpace::new(&g, 5).unwrap();
        let rho = Field::from_fn(&g, |x| (PI * x[0]).cos());
        match MassOperator::assemble(&space, &rho, 1e-8) {
            Err(Error::MassNotPositive { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_density_lipschitz_gap() {
        let g = TorusGrid::new(1, 16).unwrap();
        let space = GalerkinSpace::new(&g, 5).unwrap();
        let probes = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.3, -0.2, 0.1, 0.5, 0.9]];
        let same = mass_lipschitz_gap(
            &space,
            &Field::constant(&g, 1.5),
            &Field::constant(&g, 1.5),
            &probes,
            1e-8,
        )
        .unwrap();
        assert_eq!(same.gap, 0.0);
        let gap = mass_lipschitz_gap(
            &space,
            &Field::constant(&g, 1.5),
            &Field::constant(&g, 3.0),
            &probes,
            1e-8,
        )
        .unwrap();
        assert!((gap.gap - (1.0 / 1.5 - 1.0 / 3.0)).abs() < 1e-13);
    }

    fn params<'a>(
        law: &'a PressureLaw,
        visc: &'a ViscosityParams,
        kernels: &'a KernelPair,
        eps: f64,
    ) -> DriftParams<'a> {
        DriftParams {
            law,
            visc,
            kernels,
            eps,
            radius: 1e6,
        }
    }

    #[test]
    fn homogeneous_rest_state_has_no_drift() {
        let g = TorusGrid::new(2, 16).unwrap();
        let space = GalerkinSpace::new(&g, 9).unwrap();
        let law = PressureLaw::power(1.0, 2.0, 0.1).unwrap();
        let visc = ViscosityParams::new(0.1, 0.1).unwrap();
        let kernels = KernelPair::default_presets(&g);
        let rhs = galerkin_rhs(
            &space,
            &Field::constant(&g, 1.3),
            &vec![0.0; space.coeff_len()],
            &params(&law, &visc, &kernels, 0.1),
        )
        .unwrap();
        assert!(rhs.total().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn uniform_velocity_is_alignment_equilibrium() {
        let g = TorusGrid::new(1, 32).unwrap();
        let space = GalerkinSpace::new(&g, 7).unwrap();
        let law = PressureLaw::power(1.0, 2.0, 0.0).unwrap();
        let visc = ViscosityParams::new(0.1, 0.1).unwrap();
        let kernels = KernelPair::new(
            PeriodicKernel::from_preset(&g, KernelPreset::Zero),
            PeriodicKernel::from_preset(&g, KernelPreset::RaisedCosine { amplitude: 1.0 }),
        )
        .unwrap();
        let rho = Field::from_fn(&g, |x| 1.0 + 0.4 * (PI * x[0]).sin());
        let mut u = vec![0.0; space.coeff_len()];
        u[0] = 0.8;
        let rhs = galerkin_rhs(&space, &rho, &u, &params(&law, &visc, &kernels, 0.0)).unwrap();
        assert!(rhs.alignment.iter().all(|v| v.abs() < 1e-13));
    }
}
