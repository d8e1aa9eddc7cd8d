//! Instantaneous spatial integrals entering the energy balance, the pressure
//! identity and the renormalized continuity equation.

use crate::constitutive::{
    checked_density, potential_delta, pressure_delta, stress, stress_dissipation, KernelPair, PeriodicKernel,
    PressureLaw, ViscosityParams,
};
use crate::error::Result;
use crate::galerkin::alignment_force;
use crate::torus::{
    convolve_with_spectrum, dealias, divergence, gradient, gradient_components, inv_laplacian, sym_gradient, Field,
};

/// `½∫ϱ|u|²`.
pub fn kinetic_energy(rho: &Field, u: &Field) -> f64 {
    0.5 * u.dot_pointwise(u).mul_pointwise(rho).integral()
}

/// `∫P_δ(ϱ)`.
pub fn potential_energy(rho: &Field, law: &PressureLaw) -> Result<f64> {
    Ok(potential_delta(rho, law)?.integral())
}

/// `½∫ϱ(K * ϱ)`.
pub fn interaction_energy(rho: &Field, k: &PeriodicKernel) -> f64 {
    if k.is_zero() {
        return 0.0;
    }
    0.5 * rho.inner(&convolve_with_spectrum(rho, k.spectrum()))
}

/// `∫S(Du):Du`.
pub fn stress_rate(u: &Field, visc: &ViscosityParams) -> Result<f64> {
    Ok(stress_dissipation(&sym_gradient(u)?, visc)?.integral())
}

/// `ε∫ϱ|∇u|²`.
pub fn viscous_rate(rho: &Field, u: &Field, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let g = gradient_components(u);
    let d = u.grid().dim();
    let len = u.grid().len();
    let sq: Vec<f64> = (0..len)
        .map(|i| (0..d * d).map(|c| g.component(c)[i].powi(2)).sum::<f64>() * rho.values()[i])
        .collect();
    eps * Field::scalar(u.grid(), sq).expect("grid-sized").integral()
}

/// `ε∫|∇ϱ|² P_δ''(ϱ)`.
pub fn density_rate(rho: &Field, law: &PressureLaw, eps: f64) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let rho = checked_density(rho)?;
    let g = gradient(&rho)?;
    let w = rho.map(|z| law.potential_delta_second(z));
    Ok(eps * g.dot_pointwise(&g).mul_pointwise(&w).integral())
}

/// `∫ϱ|u|²(ψ * ϱ) - ∫ϱu·(ψ * (ϱu))`, i.e. half the alignment double integral.
pub fn alignment_rate(rho: &Field, u: &Field, psi: &PeriodicKernel) -> f64 {
    if psi.is_zero() {
        return 0.0;
    }
    let q = u.mul_scalar_field(rho);
    let psi_rho = convolve_with_spectrum(rho, psi.spectrum());
    let psi_q = convolve_with_spectrum(&q, psi.spectrum());
    q.inner(&u.mul_scalar_field(&psi_rho)) - q.inner(&psi_q)
}

/// `-ε∫(∇K * ϱ)·∇ϱ`.
pub fn remainder_viscous_rate(rho: &Field, k: &PeriodicKernel, eps: f64) -> Result<f64> {
    if eps == 0.0 || k.is_zero() {
        return Ok(0.0);
    }
    let gk = gradient(&convolve_with_spectrum(rho, k.spectrum()))?;
    Ok(-eps * gk.inner(&gradient(rho)?))
}

/// `∫(K * ϱ) div(ϱ(u - [u]_R))`; exactly zero while the cutoff is inactive.
pub fn remainder_cutoff_rate(rho: &Field, u: &Field, v: &Field, k: &PeriodicKernel) -> Result<f64> {
    if k.is_zero() || u == v {
        return Ok(0.0);
    }
    let flux = (u - v).mul_scalar_field(rho);
    Ok(convolve_with_spectrum(rho, k.spectrum()).inner(&divergence(&flux)?))
}

/// The test field `φ = ∇Δ⁻¹(ϱ - ϱ̄)`.
pub fn pressure_test_field(rho: &Field) -> Result<Field> {
    gradient(&inv_laplacian(rho)?)
}

/// Integrands of the pressure identity at one instant with frozen velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PressureRates {
    pub lhs: f64,
    pub i1: f64,
    pub i4: f64,
    pub i5: f64,
    pub i6: f64,
    pub i7: f64,
    pub i8: f64,
    pub i9: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn pressure_rates(
    rho: &Field,
    u: &Field,
    v: &Field,
    cutoff: f64,
    rho_bar: f64,
    law: &PressureLaw,
    visc: &ViscosityParams,
    kernels: &KernelPair,
    eps: f64,
) -> Result<PressureRates> {
    let rho = checked_density(rho)?;
    let grid = rho.grid().clone();
    let d = grid.dim();
    let len = grid.len();
    let phi = pressure_test_field(&rho)?;
    let p = pressure_delta(&rho, law)?;
    let q = u.mul_scalar_field(&rho);

    let lhs = cutoff * p.inner(&rho);
    let i5 = cutoff * rho_bar * p.integral();

    let flux = dealias(&v.mul_scalar_field(&rho));
    let i1 = q.inner(&gradient(&inv_laplacian(&divergence(&flux)?)?)?);

    let grad_phi = gradient_components(&phi);
    let mut conv = Field::zeros(&grid, d * d);
    for a in 0..d {
        for b in 0..d {
            let dst = conv.component_mut(a * d + b);
            for i in 0..len {
                dst[i] = rho.values()[i] * v.component(a)[i] * u.component(b)[i];
            }
        }
    }
    let i4 = -conv.inner(&grad_phi);

    let s = stress(&sym_gradient(u)?, visc)?;
    let i6 = s.inner(&sym_gradient(&phi)?);

    let i7 = if eps > 0.0 {
        eps * gradient_components(&q).inner(&grad_phi) - eps * q.inner(&gradient(&rho)?)
    } else {
        0.0
    };

    let i8 = if kernels.k.is_zero() {
        0.0
    } else {
        let gk = gradient(&convolve_with_spectrum(&rho, kernels.k.spectrum()))?;
        gk.mul_scalar_field(&rho).inner(&phi)
    };

    let i9 = if kernels.psi.is_zero() {
        0.0
    } else {
        -alignment_force(&rho, u, kernels).inner(&phi)
    };

    Ok(PressureRates {
        lhs,
        i1,
        i4,
        i5,
        i6,
        i7,
        i8,
        i9,
    })
}

/// `∫ϱu·φ`.
pub fn momentum_against_test_field(rho: &Field, u: &Field) -> Result<f64> {
    Ok(u.mul_scalar_field(rho).inner(&pressure_test_field(rho)?))
}

/// `∫ϱ log ϱ` with the continuous extension `0` at `ϱ = 0`.
pub fn entropy(rho: &Field) -> Result<f64> {
    Ok(checked_density(rho)?
        .map(|z| if z > 0.0 { z * z.ln() } else { 0.0 })
        .integral())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::KernelPreset;
    use crate::torus::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn rest_state_rates_vanish() {
        let g = TorusGrid::new(2, 16).unwrap();
        let rho = Field::constant(&g, 1.4);
        let u = Field::zeros(&g, 2);
        let kp = KernelPair::default_presets(&g);
        let law = PressureLaw::power(1.0, 2.0, 0.1).unwrap();
        assert_eq!(kinetic_energy(&rho, &u), 0.0);
        assert!(alignment_rate(&rho, &u, &kp.psi).abs() < 1e-15);
        assert!(density_rate(&rho, &law, 0.1).unwrap().abs() < 1e-20);
        assert!(remainder_viscous_rate(&rho, &kp.k, 0.1).unwrap().abs() < 1e-20);
    }

    #[test]
    fn entropy_of_constant() {
        let g = TorusGrid::new(2, 8).unwrap();
        let c: f64 = 1.7;
        let e = entropy(&Field::constant(&g, c)).unwrap();
        assert!((e - c * c.ln() * 4.0).abs() < 1e-13);
        assert_eq!(entropy(&Field::constant(&g, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn interaction_energy_of_cosine_kernel() {
        let g = TorusGrid::new(1, 16).unwrap();
        let k = PeriodicKernel::from_preset(&g, KernelPreset::CosineSum { amplitude: 1.0 });
        let rho = Field::from_fn(&g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        // K * ϱ = ∫cos(π(x-y))(1 + ½cos πy) dy = ½cos πx
        assert!((interaction_energy(&rho, &k) - 0.5 * 0.25).abs() < 1e-13);
    }
}
