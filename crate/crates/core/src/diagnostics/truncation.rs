//! The concave truncation `T`, its rescalings `T_k`, and the entropies `L_k`.
//!
//! On `[1, 3]`, `T(σ) = 1 + 2s - 2s³ + s⁴` with `s = (σ - 1)/2`: the quartic
//! matching value, slope and curvature of the two plateaus, so `T ∈ C²`.
//! Expanded, `T(σ) = 5/16 + 9σ²/8 - σ³/2 + σ⁴/16`.

fn t_poly(sigma: f64) -> f64 {
    5.0 / 16.0 + sigma * sigma * (9.0 / 8.0 + sigma * (-0.5 + sigma / 16.0))
}

/// `T(σ)`: identity on `[0, 1]`, constant `2` on `[3, ∞)`.
pub fn truncation_t(sigma: f64) -> f64 {
    if sigma <= 1.0 {
        sigma
    } else if sigma >= 3.0 {
        2.0
    } else {
        t_poly(sigma)
    }
}

pub fn truncation_t_prime(sigma: f64) -> f64 {
    if sigma <= 1.0 {
        1.0
    } else if sigma >= 3.0 {
        0.0
    } else {
        let s = 0.5 * (sigma - 1.0);
        (1.0 - s).powi(2) * (1.0 + 2.0 * s)
    }
}

pub fn truncation_t_second(sigma: f64) -> f64 {
    if sigma <= 1.0 || sigma >= 3.0 {
        0.0
    } else {
        let s = 0.5 * (sigma - 1.0);
        -3.0 * s * (1.0 - s)
    }
}

/// `∫_1^w T(σ)/σ² dσ` for `w ≥ 1`.
fn t_over_sq_integral(w: f64) -> f64 {
    let anti = |s: f64| -5.0 / (16.0 * s) + 9.0 * s / 8.0 - s * s / 4.0 + s.powi(3) / 48.0;
    if w <= 3.0 {
        anti(w) - anti(1.0)
    } else {
        anti(3.0) - anti(1.0) + 2.0 * (1.0 / 3.0 - 1.0 / w)
    }
}

/// `T_k(z) = k T(z/k)`.
pub fn truncation_t_k(z: f64, k: f64) -> f64 {
    k * truncation_t(z / k)
}

pub fn truncation_t_k_prime(z: f64, k: f64) -> f64 {
    truncation_t_prime(z / k)
}

pub fn truncation_t_k_second(z: f64, k: f64) -> f64 {
    truncation_t_second(z / k) / k
}

/// `L_k(z) = z log z` for `z ≤ k`, else `z log k + z ∫_k^z T_k(s)/s² ds`.
pub fn truncation_l_k(z: f64, k: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z <= k {
        z * z.ln()
    } else {
        z * k.ln() + z * t_over_sq_integral(z / k)
    }
}

pub fn truncation_l_k_prime(z: f64, k: f64) -> f64 {
    if z <= k {
        z.ln() + 1.0
    } else {
        k.ln() + t_over_sq_integral(z / k) + truncation_t_k(z, k) / z
    }
}

/// `L_k''(z) = T_k'(z)/z`.
pub fn truncation_l_k_second(z: f64, k: f64) -> f64 {
    truncation_t_k_prime(z, k) / z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_joins() {
        let k = 2.5;
        assert_eq!(truncation_t_k(k / 2.0, k), k / 2.0);
        assert_eq!(truncation_t_k(10.0 * k, k), 2.0 * k);
        assert!((t_poly(1.0) - 1.0).abs() < 1e-15 && (t_poly(3.0) - 2.0).abs() < 1e-15);
        assert_eq!(truncation_t_second(1.0), 0.0);
        assert!(truncation_t_second(2.0) < 0.0);
    }

    #[test]
    fn l_k_is_continuous_at_k() {
        let k = 3.0;
        let below = truncation_l_k(k * (1.0 - 1e-12), k);
        let above = truncation_l_k(k * (1.0 + 1e-12), k);
        assert!((below - above).abs() < 1e-10);
        assert!((truncation_l_k_prime(k - 1e-12, k) - truncation_l_k_prime(k + 1e-12, k)).abs() < 1e-9);
    }

    #[test]
    fn integral_matches_numerical_quadrature() {
        for w in [1.5f64, 2.9, 3.0, 7.0] {
            let f = |s: f64| truncation_t(s) / (s * s);
            let q = quadrature::integrate(f, 1.0, w.min(3.0), 1e-13).integral
                + if w > 3.0 {
                    quadrature::integrate(f, 3.0, w, 1e-13).integral
                } else {
                    0.0
                };
            assert!((t_over_sq_integral(w) - q).abs() < 1e-11, "w = {w}");
        }
    }
}
