//! Mixing densities and samplers in Gauss space.
//!
//! `p_n(x,y) = (2π)^{-n} ∫_0^1 s^{-n} exp[-(|x|² + |y|² - 2t⟨x,y⟩)/(2s²)] dt`
//! with `s = √(1-t²)`, and `q_n` the same integral with an extra `(1 - t)`
//! weight. The exponent is rewritten as `(|x-y|² + 2(1-t)⟨x,y⟩)/(2s²)` so the
//! behaviour near `t = 1` is computed from `1 - t` directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::montecarlo::{chunk_rng, fill_gaussian, McRng, CHUNK};
use crate::quadrature::tanh_sinh;
use crate::sphere::dot;

/// A density value that may be infinite on a null set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityValue {
    Finite(f64),
    /// The defining integral diverges at this point.
    Unbounded,
}

impl DensityValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            DensityValue::Finite(v) => Some(v),
            DensityValue::Unbounded => None,
        }
    }
}

fn gauss_density(x: &[f64], y: &[f64], second: bool) -> Result<DensityValue> {
    let n = x.len();
    if n == 0 {
        return invalid("Gauss-space density needs n >= 1");
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("Gauss-space density needs finite points");
    }
    let diff2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let xy = dot(x, y);
    let nf = n as f64;
    // On the diagonal the integrand behaves like (1-t)^{-n/2}, divergent for n ≥ 2
    // (the weight (1-t) in q_n moves the threshold to n ≥ 4).
    let critical = if second { 4 } else { 2 };
    if diff2 == 0.0 && n >= critical {
        return Ok(DensityValue::Unbounded);
    }
    let norm = -nf * (2.0 * PI).ln();
    let q = tanh_sinh(
        |t, _, dr| {
            let s2 = dr * (1.0 + t);
            let e = (diff2 + 2.0 * dr * xy) / (2.0 * s2);
            let mut l = norm - 0.5 * nf * s2.ln() - e;
            if second {
                l += dr.ln();
            }
            l.exp()
        },
        0.0,
        1.0,
        1e-300,
        1e-12,
    )?;
    Ok(DensityValue::Finite(q.value))
}

/// Density of the first-order Gaussian mixing measure π_n.
pub fn gauss_density_p(x: &[f64], y: &[f64]) -> Result<DensityValue> {
    gauss_density(x, y, false)
}

/// Density of the second-order measure κ_n (total mass 1/2).
pub fn gauss_density_q(x: &[f64], y: &[f64]) -> Result<DensityValue> {
    gauss_density(x, y, true)
}

/// Standard normal density on R^n.
pub fn gaussian_density(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    (-(0.5 * dot(x, x)) - 0.5 * n * (2.0 * PI).ln()).exp()
}

/// Draw `(X, tX + √(1-t²) Z)` with `t ~ U(0,1)`; returns `t`.
pub fn draw_pi_pair(rng: &mut McRng, x: &mut [f64], y: &mut [f64]) -> f64 {
    let t: f64 = rng.random();
    draw_pair_at(rng, t, x, y);
    t
}

/// Draw a pair from the probability measure `2κ_n`: `t` has density
/// `2(1-t)`; returns `t`.
pub fn draw_kappa_pair(rng: &mut McRng, x: &mut [f64], y: &mut [f64]) -> f64 {
    let u: f64 = rng.random();
    let t = 1.0 - (1.0 - u).sqrt();
    draw_pair_at(rng, t, x, y);
    t
}

fn draw_pair_at(rng: &mut McRng, t: f64, x: &mut [f64], y: &mut [f64]) {
    let s = ((1.0 - t) * (1.0 + t)).sqrt();
    fill_gaussian(rng, x);
    fill_gaussian(rng, y);
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi = t * xi + s * *yi;
    }
}

/// A sampled pair of points in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// A pair from κ_n: drawn from `2κ_n` and carrying weight `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub weight: f64,
}

fn sample_pairs<T>(
    n: usize,
    count: usize,
    seed: u64,
    mut draw: impl FnMut(&mut McRng, Vec<f64>, Vec<f64>) -> T,
) -> Result<Vec<T>> {
    if n == 0 {
        return invalid("pair sampling needs n >= 1");
    }
    let mut out = Vec::with_capacity(count);
    for c in 0..count.div_ceil(CHUNK) {
        let mut rng = chunk_rng(seed, c as u64);
        for _ in 0..CHUNK.min(count - c * CHUNK) {
            out.push(draw(&mut rng, vec![0.0; n], vec![0.0; n]));
        }
    }
    Ok(out)
}

pub fn sample_pi_n(n: usize, count: usize, seed: u64) -> Result<Vec<Pair>> {
    sample_pairs(n, count, seed, |rng, mut x, mut y| {
        draw_pi_pair(rng, &mut x, &mut y);
        Pair { x, y }
    })
}

pub fn sample_kappa_n(n: usize, count: usize, seed: u64) -> Result<Vec<WeightedPair>> {
    sample_pairs(n, count, seed, |rng, mut x, mut y| {
        let t = draw_kappa_pair(rng, &mut x, &mut y);
        WeightedPair { x, y, t, weight: 0.5 }
    })
}

/// Fourier–Stieltjes transform of π_n:
/// `e^{-(|t|²+|s|²)/2} (1 - e^{-⟨t,s⟩}) / ⟨t,s⟩`.
pub fn pi_fourier(t: &[f64], s: &[f64]) -> Complex64 {
    let ts = dot(t, s);
    let g = (-0.5 * (dot(t, t) + dot(s, s))).exp();
    let f = if ts.abs() < 1e-8 { 1.0 - ts / 2.0 } else { -(-ts).exp_m1() / ts };
    Complex64::new(g * f, 0.0)
}
