//! Direct quadrature of the spherical mixing densities.
//!
//! The inner double integral
//!
//! `I_m(b) = ∫_0^∞∫_0^∞ exp(-(r² + r'²)/2 + b rr') (rr')^m dr dr'`
//!
//! is reduced to one dimension by polar coordinates followed by the
//! substitution `tan φ' ↦ ...` that removes the `(1 - b sin 2φ')` denominator:
//!
//! `I_m(b) = 2 Γ(m+1) (1-b)^{-m-1/2} (1+b)^{-1/2} ∫_0^Φ (cos²φ - κ² sin²φ)^m dφ`
//!
//! with `κ = √((1-b)/(1+b))` and `Φ = arctan(1/κ)`. The remaining integrand is
//! a smooth trigonometric polynomial, so Gauss–Legendre is exact up to
//! rounding for moderate `m`. The outer `t` integral has endpoint
//! singularities as `|α| → 1` and uses tanh-sinh, with `1 - t` supplied
//! directly by the rule.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use super::series::ln_prefactor;
use crate::error::Result;
use crate::quadrature::{tanh_sinh, GaussLegendre};

const TOL: f64 = 1e-12;

fn inner_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(96))
}

/// `ln I_m(b)` from `1 - b` and `1 + b`, both supplied without cancellation.
pub(crate) fn ln_i_m(m: u32, one_minus_b: f64, one_plus_b: f64) -> f64 {
    let kappa2 = one_minus_b / one_plus_b;
    let kappa = kappa2.sqrt();
    let phi = 1.0f64.atan2(kappa);
    let j = if m == 0 {
        phi
    } else {
        inner_rule().integrate(
            |x| {
                let (s, c) = x.sin_cos();
                (c * c - kappa2 * s * s).max(0.0).powi(m as i32)
            },
            0.0,
            phi,
        )
    };
    let mf = m as f64;
    LN_2 + ln_gamma(mf + 1.0) - (mf + 0.5) * one_minus_b.ln() - 0.5 * one_plus_b.ln() + j.ln()
}

/// `ψ` by quadrature, with `gap = 1 - α` passed separately so that values
/// near `α = 1` keep full relative precision.
pub(crate) fn psi_quadrature_gap(n: usize, alpha: f64, gap: f64, order: u8) -> Result<f64> {
    let c = ln_prefactor(n);
    let nf = n as f64;
    let (m, weight_exp) = match order {
        1 => (n as u32 - 2, 0.5 * (nf - 2.0)),
        _ => (n as u32 - 3, 0.5 * (nf - 4.0)),
    };
    let beta = alpha.abs();
    let beta_gap = if alpha >= 0.0 { gap } else { 1.0 + alpha };
    let q = tanh_sinh(
        |t, _, dr| {
            // 1 - t² = dr (1 + t)
            let s2 = dr * (1.0 + t);
            // 1 ∓ tβ = (1 - β) + β(1 - t) on the near-singular side
            let near = beta_gap + beta * dr;
            let far = 1.0 + t * beta;
            let (omb, opb) = if alpha >= 0.0 { (near, far) } else { (far, near) };
            let mut ln_w = weight_exp * s2.ln();
            if order == 2 {
                ln_w += dr.ln();
            }
            let v = (c + ln_w + ln_i_m(m, omb, opb)).exp();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        0.0,
        TOL,
    )?;
    Ok(q.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;
    use std::f64::consts::PI;

    /// `I_m(b)` straight from polar coordinates:
    /// `Γ(m+1) ∫_0^{π/2} sin^m(2φ) / (1 - b sin 2φ)^{m+1} dφ`.
    fn i_m_polar(m: u32, b: f64) -> f64 {
        let g = ln_gamma(m as f64 + 1.0).exp();
        let q = adaptive(
            |p: f64| {
                let s = (2.0 * p).sin();
                s.powi(m as i32) / (1.0 - b * s).powi(m as i32 + 1)
            },
            0.0,
            PI / 2.0,
            0.0,
            1e-13,
        )
        .unwrap();
        g * q.value
    }

    #[test]
    fn reduced_inner_integral_matches_polar_form() {
        assert!((ln_i_m(0, 1.0, 1.0).exp() - PI / 2.0).abs() < 1e-14);
        for &m in &[0u32, 1, 3, 6, 10] {
            for &b in &[-0.97, -0.5, 0.0, 0.4, 0.9, 0.995] {
                let a = ln_i_m(m, 1.0 - b, 1.0 + b).exp();
                let w = i_m_polar(m, b);
                assert!((a - w).abs() < 1e-10 * w, "m={m} b={b}: {a} vs {w}");
            }
        }
    }

    #[test]
    fn circle_values() {
        let v = psi_quadrature_gap(2, 0.0, 1.0, 1).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-11);
        let v = psi_quadrature_gap(2, 1.0, 0.0, 1).unwrap();
        assert!((v - 3.0 * PI * PI / 8.0).abs() < 1e-9, "{v}");
        let v = psi_quadrature_gap(2, -1.0, 2.0, 1).unwrap();
        assert!((v - PI * PI / 8.0).abs() < 1e-9, "{v}");
    }
}
