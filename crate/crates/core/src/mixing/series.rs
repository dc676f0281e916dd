//! Power series for the spherical mixing densities.
//!
//! Expanding `exp(tα rr')` inside the triple integral and integrating term by
//! term gives, with `M_p = ∫_0^∞ r^p e^{-r²/2} dr = 2^{(p-1)/2} Γ((p+1)/2)`,
//!
//! order 1: `ψ_n(α) = C Σ_k α^k/k! · M²_{n-2+k} · ½B((k+1)/2, n/2)`
//!
//! order 2: `ψ_n(α) = C Σ_k α^k/k! · M²_{n-3+k} · ½[B((k+1)/2, (n-2)/2) - B((k+2)/2, (n-2)/2)]`
//!
//! with `C = 1 / (2^{n-2} Γ(n/2)²)`. Terms behave like `k^{n/2-5/2} α^k`, so
//! the series converges for `|α| < 1` only.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};

const MAX_TERMS: usize = 20_000;

/// Series sum together with the absolute sum of its terms, whose ratio
/// measures cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub abs_sum: f64,
    pub terms: usize,
}

impl SeriesValue {
    pub fn cancellation(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.abs_sum / self.value.abs()
        }
    }
}

pub(crate) fn ln_prefactor(n: usize) -> f64 {
    let nf = n as f64;
    -(nf - 2.0) * LN_2 - 2.0 * ln_gamma(nf / 2.0)
}

fn ln_m(p: f64) -> f64 {
    0.5 * (p - 1.0) * LN_2 + ln_gamma(0.5 * (p + 1.0))
}

/// `ln` of the t-factor for term `k`.
fn ln_t_factor(n: usize, order: u8, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    match order {
        1 => ln_beta(0.5 * (kf + 1.0), 0.5 * nf) - LN_2,
        _ => {
            let b = 0.5 * (nf - 2.0);
            let a1 = ln_beta(0.5 * (kf + 1.0), b);
            let a2 = ln_beta(0.5 * (kf + 2.0), b);
            // B1 > B2 since B decreases in its first argument.
            a1 + (-(a2 - a1).exp()).ln_1p() - LN_2
        }
    }
}

type Cache = HashMap<(usize, u8), Arc<Vec<f64>>>;

/// Coefficients `a_k` of `ψ(α) = Σ a_k α^k`; they do not depend on `α`, so
/// they are computed once per `(n, order)`.
fn coefficients(n: usize, order: u8) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<Cache>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("coefficient cache").get(&(n, order)) {
        return v.clone();
    }
    let shift = if order == 1 { 2.0 } else { 3.0 };
    let nf = n as f64;
    let c = ln_prefactor(n);
    let v: Vec<f64> = (0..MAX_TERMS)
        .map(|k| {
            let kf = k as f64;
            (c - ln_gamma(kf + 1.0) + 2.0 * ln_m(nf - shift + kf) + ln_t_factor(n, order, k)).exp()
        })
        .collect();
    let v = Arc::new(v);
    cache.lock().expect("coefficient cache").insert((n, order), v.clone());
    v
}

/// Evaluate the order-`order` series at `α`, `|α| < 1`.
pub fn psi_series(n: usize, alpha: f64, order: u8) -> Result<SeriesValue> {
    if alpha.abs() >= 1.0 {
        return Err(Error::Numerical(format!("series diverges at |alpha| = {}", alpha.abs())));
    }
    let a = coefficients(n, order);
    let mut sum = a[0];
    let mut abs_sum = a[0];
    if alpha == 0.0 {
        return Ok(SeriesValue { value: sum, abs_sum, terms: 1 });
    }
    let r_inf = alpha.abs();
    let mut pow = 1.0;
    let mut prev = a[0];
    for (k, &ak) in a.iter().enumerate().skip(1) {
        pow *= alpha;
        let term = ak * pow;
        let mag = term.abs();
        sum += term;
        abs_sum += mag;
        if mag == 0.0 {
            return Ok(SeriesValue { value: sum, abs_sum, terms: k + 1 });
        }
        if k > 8 {
            // Successive ratios tend to |α|; bound the tail by a geometric
            // series with ratio max(current ratio, |α|).
            let r = (mag / prev).max(r_inf);
            if r < 1.0 && mag * r / (1.0 - r) <= 1e-17 * abs_sum {
                return Ok(SeriesValue { value: sum, abs_sum, terms: k + 1 });
            }
        }
        prev = mag;
    }
    Err(Error::Numerical(format!("series at alpha = {alpha} did not converge in {MAX_TERMS} terms")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_values() {
        // ψ(0) = π/2, and the closed form arcsin(α)(π + arcsin α)/(2α)
        let v = psi_series(2, 0.0, 1).unwrap();
        assert!((v.value - PI / 2.0).abs() < 1e-14);
        for &a in &[-0.9, -0.3, 0.2, 0.7, 0.95] {
            let s: f64 = f64::asin(a);
            let want = s * (PI + s) / (2.0 * a);
            let v = psi_series(2, a, 1).unwrap();
            assert!((v.value - want).abs() < 1e-13 * want, "{a}: {} vs {want}", v.value);
        }
    }

    #[test]
    fn diverges_at_one() {
        assert!(psi_series(3, 1.0, 1).is_err());
    }

    #[test]
    fn negative_alpha_cancellation_is_tracked() {
        let v = psi_series(8, -0.9, 1).unwrap();
        assert!(v.value > 0.0);
        assert!(v.cancellation() > 1.0);
    }
}
