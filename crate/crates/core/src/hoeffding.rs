//! One-dimensional and periodic covariance representations.
//!
//! For a law μ on the line with distribution function `F`, the Höffding
//! kernel `H(x,y) = F(x∧y)(1 - F(x∨y))` is the density of the unique
//! measure λ with `cov(u(X), v(X)) = ∬ u'(x) v'(y) dλ`. Its marginal
//! density is `h(x) = ∫_x^∞ (y - EX) dF(y)` and the Stein kernel is `h/p`.
//!
//! On the periodic side, `Q(h) = (1 - 4h(1-h))/8` gives the mixing density
//! `Q(|x-y|) + c - 1/24` for 1-periodic functions under the uniform law,
//! and the circle density ψ transfers to the interval as
//! `cos(t-s) ψ(cos(t-s)) / (2π)²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::mixing::psi_circle_exact;
use crate::polynomial::Polynomial;
use crate::quadrature::GaussLegendre;
use crate::verify::VerificationReport;

const TWO_PI: f64 = 2.0 * PI;
const PANEL_ORDER: usize = 20;
/// Half-width of the integration window for Gaussian laws, in standard
/// deviations.
const GAUSS_WINDOW: f64 = 14.0;

/// A probability law on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution1D {
    Uniform { a: f64, b: f64 },
    /// Mass `p` at `a` and `1 - p` at `b`.
    Bernoulli { a: f64, b: f64, p: f64 },
    Gaussian { mean: f64, var: f64 },
    /// Sorted sample; each point carries mass `1/len`.
    Empirical { samples: Vec<f64> },
    /// Piecewise-linear distribution function through `(x_i, cdf_i)`.
    Table { x: Vec<f64>, cdf: Vec<f64> },
}

impl Distribution1D {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid(format!("uniform needs finite a < b, got ({a}, {b})"));
        }
        Ok(Distribution1D::Uniform { a, b })
    }

    pub fn bernoulli(a: f64, b: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid(format!("bernoulli needs finite a < b, got ({a}, {b})"));
        }
        if !(p > 0.0 && p < 1.0) {
            return invalid(format!("bernoulli needs 0 < p < 1, got {p}"));
        }
        Ok(Distribution1D::Bernoulli { a, b, p })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(mean.is_finite() && var.is_finite() && var > 0.0) {
            return invalid(format!("gaussian needs finite mean and var > 0, got ({mean}, {var})"));
        }
        Ok(Distribution1D::Gaussian { mean, var })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
            return invalid("empirical law needs a non-empty finite sample");
        }
        samples.sort_by(f64::total_cmp);
        Ok(Distribution1D::Empirical { samples })
    }

    pub fn table(x: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != cdf.len() {
            return invalid("table needs at least two knots and matching lengths");
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) || x.iter().any(|v| !v.is_finite()) {
            return invalid("table knots must be finite and strictly increasing");
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) {
            return invalid("table cdf must be nondecreasing");
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return invalid("table cdf must run from 0 to 1");
        }
        Ok(Distribution1D::Table { x, cdf })
    }

    /// Parse `x,F` lines; blank lines and `#` comments are skipped.
    pub fn table_from_csv(text: &str) -> Result<Self> {
        let mut x = Vec::new();
        let mut cdf = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad table line {}: {line}", line_no + 1)))
            };
            let (a, b) = (parse(parts.next())?, parse(parts.next())?);
            if parts.next().is_some() {
                return invalid(format!("bad table line {}: {line}", line_no + 1));
            }
            x.push(a);
            cdf.push(b);
        }
        Self::table(x, cdf)
    }

    /// `F(x) = P(X ≤ x)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Distribution1D::Uniform { a, b } => ((t - a) / (b - a)).clamp(0.0, 1.0),
            Distribution1D::Bernoulli { a, b, p } => {
                if t < *a {
                    0.0
                } else if t < *b {
                    *p
                } else {
                    1.0
                }
            }
            Distribution1D::Gaussian { mean, var } => 0.5 * erfc(-(t - mean) / (2.0 * var).sqrt()),
            Distribution1D::Empirical { samples } => {
                samples.partition_point(|&s| s <= t) as f64 / samples.len() as f64
            }
            Distribution1D::Table { x, cdf } => {
                if t < x[0] {
                    return 0.0;
                }
                if t >= x[x.len() - 1] {
                    return 1.0;
                }
                let i = x.partition_point(|&v| v <= t) - 1;
                let f = (t - x[i]) / (x[i + 1] - x[i]);
                cdf[i] + f * (cdf[i + 1] - cdf[i])
            }
        }
    }

    /// Lebesgue density, `None` for laws with atoms.
    pub fn density(&self, t: f64) -> Option<f64> {
        match self {
            Distribution1D::Uniform { a, b } => Some(if *a <= t && t <= *b { 1.0 / (b - a) } else { 0.0 }),
            Distribution1D::Gaussian { mean, var } => {
                Some((-(t - mean).powi(2) / (2.0 * var)).exp() / (TWO_PI * var).sqrt())
            }
            Distribution1D::Table { x, cdf } => {
                if t < x[0] || t >= x[x.len() - 1] {
                    return Some(0.0);
                }
                let i = x.partition_point(|&v| v <= t) - 1;
                Some((cdf[i + 1] - cdf[i]) / (x[i + 1] - x[i]))
            }
            Distribution1D::Bernoulli { .. } | Distribution1D::Empirical { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution1D::Uniform { a, b } => 0.5 * (a + b),
            Distribution1D::Bernoulli { a, b, p } => p * a + (1.0 - p) * b,
            Distribution1D::Gaussian { mean, .. } => *mean,
            Distribution1D::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
            Distribution1D::Table { x, cdf } => segments(x, cdf).map(|(l, r, w)| w * 0.5 * (l + r)).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution1D::Uniform { a, b } => (b - a).powi(2) / 12.0,
            Distribution1D::Bernoulli { a, b, p } => p * (1.0 - p) * (b - a).powi(2),
            Distribution1D::Gaussian { var, .. } => *var,
            Distribution1D::Empirical { samples } => {
                let m = self.mean();
                samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / samples.len() as f64
            }
            Distribution1D::Table { x, cdf } => {
                let m = self.mean();
                segments(x, cdf)
                    .map(|(l, r, w)| {
                        let (l, r) = (l - m, r - m);
                        w * (l * l + l * r + r * r) / 3.0
                    })
                    .sum()
            }
        }
    }

    /// `E|X - EX|`.
    pub fn mean_abs_deviation(&self) -> f64 {
        let m = self.mean();
        match self {
            Distribution1D::Uniform { a, b } => 0.25 * (b - a),
            Distribution1D::Bernoulli { a, b, p } => 2.0 * p * (1.0 - p) * (b - a),
            Distribution1D::Gaussian { var, .. } => (2.0 * var / PI).sqrt(),
            Distribution1D::Empirical { samples } => {
                samples.iter().map(|s| (s - m).abs()).sum::<f64>() / samples.len() as f64
            }
            Distribution1D::Table { x, cdf } => segments(x, cdf)
                .map(|(l, r, w)| {
                    // mean of |y - m| for y uniform on [l, r]
                    let (l, r) = (l - m, r - m);
                    let g = |v: f64| 0.5 * v * v.abs();
                    if r == l {
                        w * l.abs()
                    } else {
                        w * (g(r) - g(l)) / (r - l)
                    }
                })
                .sum(),
        }
    }

    /// Characteristic function `E e^{itX}`.
    pub fn char_fn(&self, t: f64) -> Complex64 {
        let i = Complex64::i();
        let uniform_cf = |l: f64, r: f64| {
            let z = t * (r - l);
            if z.abs() < 1e-8 {
                (i * t * 0.5 * (l + r)).exp()
            } else {
                ((i * t * r).exp() - (i * t * l).exp()) / (i * z)
            }
        };
        match self {
            Distribution1D::Uniform { a, b } => uniform_cf(*a, *b),
            Distribution1D::Bernoulli { a, b, p } => (i * t * a).exp() * p + (i * t * b).exp() * (1.0 - p),
            Distribution1D::Gaussian { mean, var } => (i * t * mean - 0.5 * var * t * t).exp(),
            Distribution1D::Empirical { samples } => {
                samples.iter().map(|s| (i * t * s).exp()).sum::<Complex64>() / samples.len() as f64
            }
            Distribution1D::Table { x, cdf } => segments(x, cdf).map(|(l, r, w)| uniform_cf(l, r) * w).sum(),
        }
    }

    fn has_atoms(&self) -> bool {
        matches!(self, Distribution1D::Bernoulli { .. } | Distribution1D::Empirical { .. })
    }

    /// Interval outside which `H` vanishes (or is negligible for Gaussians).
    fn window(&self) -> (f64, f64) {
        match self {
            Distribution1D::Uniform { a, b } | Distribution1D::Bernoulli { a, b, .. } => (*a, *b),
            Distribution1D::Gaussian { mean, var } => {
                let s = var.sqrt();
                (mean - GAUSS_WINDOW * s, mean + GAUSS_WINDOW * s)
            }
            Distribution1D::Empirical { samples } => (samples[0], samples[samples.len() - 1]),
            Distribution1D::Table { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    /// Points where `F` is not smooth, plus panel breaks for Gaussians.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match self {
            Distribution1D::Uniform { a, b } | Distribution1D::Bernoulli { a, b, .. } => vec![*a, *b],
            Distribution1D::Gaussian { mean, var } => {
                let s = var.sqrt();
                let k = (2.0 * GAUSS_WINDOW) as i32;
                (-k..=k).map(|j| mean + 0.5 * s * j as f64).collect()
            }
            Distribution1D::Empirical { samples } => samples.clone(),
            Distribution1D::Table { x, .. } => x.clone(),
        };
        pts.dedup();
        pts
    }
}

/// `(left, right, mass)` of each table segment.
fn segments<'a>(x: &'a [f64], cdf: &'a [f64]) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    x.windows(2).zip(cdf.windows(2)).map(|(xs, fs)| (xs[0], xs[1], fs[1] - fs[0]))
}

/// `F(x∧y)(1 - F(x∨y))`.
pub fn hoeffding_kernel(d: &Distribution1D, x: f64, y: f64) -> f64 {
    d.cdf(x.min(y)) * (1.0 - d.cdf(x.max(y)))
}

/// Marginal density `h(x) = ∫_{(x,∞)} (y - a) dF(y)`, `a = EX`.
pub fn hoeffding_marginal(d: &Distribution1D, x: f64) -> f64 {
    let m = d.mean();
    match d {
        Distribution1D::Uniform { a, b } => {
            if x <= *a || x >= *b {
                0.0
            } else {
                (b - x) * (x - a) / (2.0 * (b - a))
            }
        }
        Distribution1D::Bernoulli { a, b, p } => {
            if x < *a || x >= *b {
                0.0
            } else {
                p * (1.0 - p) * (b - a)
            }
        }
        Distribution1D::Gaussian { var, .. } => var * d.density(x).unwrap_or(0.0),
        Distribution1D::Empirical { samples } => {
            let k = samples.partition_point(|&s| s <= x);
            samples[k..].iter().map(|s| s - m).sum::<f64>() / samples.len() as f64
        }
        Distribution1D::Table { x: knots, cdf } => segments(knots, cdf)
            .filter(|&(_, r, _)| r > x)
            .map(|(l, r, w)| {
                let lo = l.max(x);
                let dens = w / (r - l);
                0.5 * dens * ((r - m).powi(2) - (lo - m).powi(2))
            })
            .sum(),
    }
}

/// The marginal density computed as `∫ H(x, y) dy`, independent of the
/// closed forms in [`hoeffding_marginal`].
pub fn hoeffding_marginal_quadrature(d: &Distribution1D, x: f64) -> f64 {
    let (lo, hi) = d.window();
    let mut pts = clipped(&d.breakpoints(), lo, hi);
    if x > lo && x < hi {
        insert_point(&mut pts, x);
    }
    integrate_panels(&pts, |y| hoeffding_kernel(d, x, y))
}

/// Stein kernel `τ = h/p`.
pub fn stein_kernel(d: &Distribution1D, x: f64) -> Result<f64> {
    match d.density(x) {
        None => invalid("the Stein kernel needs an absolutely continuous law"),
        Some(p) if p > 0.0 => Ok(hoeffding_marginal(d, x) / p),
        Some(_) => invalid(format!("density vanishes at x = {x}")),
    }
}

/// `λ̂(t,s) = (f(t)f(s) - f(t+s)) / (ts)`.
pub fn hoeffding_fourier(d: &Distribution1D, t: f64, s: f64) -> Result<Complex64> {
    if t == 0.0 || s == 0.0 {
        return invalid("the Fourier transform of the Höffding measure is evaluated at t, s != 0");
    }
    Ok((d.char_fn(t) * d.char_fn(s) - d.char_fn(t + s)) / (t * s))
}

/// `∬ e^{i(tx+sy)} H(x,y) dx dy` by quadrature over the support window.
pub fn hoeffding_fourier_quadrature(d: &Distribution1D, t: f64, s: f64) -> Complex64 {
    let (lo, hi) = d.window();
    let re = kernel_integral(d, (lo, hi), (lo, hi), |x, y| (t * x + s * y).cos());
    let im = kernel_integral(d, (lo, hi), (lo, hi), |x, y| (t * x + s * y).sin());
    Complex64::new(re, im)
}

/// `λ(A × B)` for intervals `A`, `B`. Laws with step distribution
/// functions are summed exactly cell by cell.
pub fn hoeffding_mass(d: &Distribution1D, a: (f64, f64), b: (f64, f64)) -> f64 {
    if !d.has_atoms() {
        return kernel_integral(d, a, b, |_, _| 1.0);
    }
    let (lo, hi) = d.window();
    let bp = d.breakpoints();
    let xs = clipped(&bp, a.0.max(lo), a.1.min(hi));
    let ys = clipped(&bp, b.0.max(lo), b.1.min(hi));
    let mut total = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let (xm, ym) = (0.5 * (xw[0] + xw[1]), 0.5 * (yw[0] + yw[1]));
            total += hoeffding_kernel(d, xm, ym) * (xw[1] - xw[0]) * (yw[1] - yw[0]);
        }
    }
    total
}

/// `cov(X, u(X))` against `E τ(X) u'(X)` (or `∫ h u'` for laws with atoms)
/// for a polynomial `u` in one variable, both by quadrature.
pub fn stein_identity_check(d: &Distribution1D, u: &Polynomial, atol: f64) -> Result<VerificationReport> {
    if u.dimension() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: u.dimension() });
    }
    let du = u.derivative(0);
    let ex = expect(d, |x| x);
    let lhs = expect(d, |x| x * u.eval(&[x])) - ex * expect(d, |x| u.eval(&[x]));
    let (lo, hi) = d.window();
    let pts = clipped(&d.breakpoints(), lo, hi);
    let rhs = if d.has_atoms() {
        integrate_panels(&pts, |x| hoeffding_marginal(d, x) * du.eval(&[x]))
    } else {
        let mut err = None;
        let v = integrate_panels(&pts, |x| {
            let p = d.density(x).unwrap_or(0.0);
            if p <= 0.0 {
                return 0.0;
            }
            match stein_kernel(d, x) {
                Ok(tau) => tau * du.eval(&[x]) * p,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        v
    };
    Ok(VerificationReport::equality("stein", 1, lhs, rhs, 0.0, 0, 0, atol))
}

/// `E g(X)`: exact sums for atoms, Gauss–Legendre panels otherwise.
fn expect(d: &Distribution1D, g: impl Fn(f64) -> f64) -> f64 {
    match d {
        Distribution1D::Bernoulli { a, b, p } => p * g(*a) + (1.0 - p) * g(*b),
        Distribution1D::Empirical { samples } => samples.iter().map(|&s| g(s)).sum::<f64>() / samples.len() as f64,
        _ => {
            let (lo, hi) = d.window();
            let pts = clipped(&d.breakpoints(), lo, hi);
            integrate_panels(&pts, |x| g(x) * d.density(x).unwrap_or(0.0))
        }
    }
}

fn clipped(pts: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if !(lo < hi) {
        return vec![lo, lo];
    }
    let mut out = vec![lo];
    out.extend(pts.iter().copied().filter(|&p| p > lo && p < hi));
    out.push(hi);
    out
}

fn insert_point(pts: &mut Vec<f64>, x: f64) {
    let k = pts.partition_point(|&p| p < x);
    if pts.get(k) != Some(&x) {
        pts.insert(k, x);
    }
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

fn integrate_panels(pts: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let gl = panel_rule();
    pts.windows(2).filter(|w| w[1] > w[0]).map(|w| gl.integrate(&mut f, w[0], w[1])).sum()
}

/// `∫_A ∫_B g(x,y) H(x,y) dy dx`, with inner panels broken at the diagonal.
fn kernel_integral(d: &Distribution1D, a: (f64, f64), b: (f64, f64), g: impl Fn(f64, f64) -> f64) -> f64 {
    let (lo, hi) = d.window();
    let bp = d.breakpoints();
    let xs = clipped(&bp, a.0.max(lo), a.1.min(hi));
    let ys = clipped(&bp, b.0.max(lo), b.1.min(hi));
    integrate_panels(&xs, |x| {
        let mut yp = ys.clone();
        if x > yp[0] && x < yp[yp.len() - 1] {
            insert_point(&mut yp, x);
        }
        integrate_panels(&yp, |y| g(x, y) * hoeffding_kernel(d, x, y))
    })
}

/// `Q(h) = (1 - 4h(1-h)) / 8` on `[0, 1]`.
pub fn periodic_q(h: f64) -> f64 {
    0.125 * (1.0 - 4.0 * h * (1.0 - h))
}

/// Mixing density `Q(|x-y|/T) + (c - 1/24)` for `T`-periodic functions
/// under the uniform law on `[0, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicKernel {
    pub c: f64,
    pub period: f64,
}

impl PeriodicKernel {
    pub fn new(c: f64, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !c.is_finite() {
            return invalid(format!("periodic kernel needs finite c and T > 0, got ({c}, {period})"));
        }
        Ok(PeriodicKernel { c, period })
    }

    pub fn density(&self, x: f64, y: f64) -> Result<f64> {
        let t = self.period;
        if !(0.0..t).contains(&x) || !(0.0..t).contains(&y) {
            return invalid(format!("points must lie in [0, {t}), got ({x}, {y})"));
        }
        Ok(self.density_unchecked(x, y))
    }

    fn density_unchecked(&self, x: f64, y: f64) -> f64 {
        periodic_q((x - y).abs() / self.period) + self.c - 1.0 / 24.0
    }

    /// `Q ≥ 0` with `min Q = Q(1/2) = 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.c >= 1.0 / 24.0
    }

    /// `∫_0^T density(x, y) dy` by quadrature.
    pub fn marginal(&self, x: f64) -> Result<f64> {
        self.density(x, x)?;
        let mut pts = vec![0.0, self.period];
        insert_point(&mut pts, x);
        Ok(integrate_panels(&pts, |y| self.density_unchecked(x, y)))
    }

    /// `∬ u'(x) v'(y) density(x,y) dx dy`.
    pub fn pairing(&self, u: &TrigPolynomial, v: &TrigPolynomial) -> f64 {
        let (du, dv) = (u.derivative(), v.derivative());
        let t = self.period;
        let outer = uniform_panels(0.0, t, 8);
        integrate_panels(&outer, |x| {
            let mut inner = uniform_panels(0.0, t, 8);
            insert_point(&mut inner, x);
            du.eval(x) * integrate_panels(&inner, |y| dv.eval(y) * self.density_unchecked(x, y))
        })
    }
}

fn uniform_panels(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
}

pub fn periodic_mixing_density(c: f64, period: f64, x: f64, y: f64) -> Result<f64> {
    PeriodicKernel::new(c, period)?.density(x, y)
}

/// Density of the measure
/// `λ_μ + (σ² - c) m⊗m + c(μ⊗m + m⊗μ) - (Λ_μ⊗m + m⊗Λ_μ)` on `(0,1)²`,
/// `m` uniform, for an absolutely continuous μ on `[0, 1]`.
pub fn periodic_mixing_from_law(d: &Distribution1D, c: f64, x: f64, y: f64) -> Result<f64> {
    let (p, q) = match (d.density(x), d.density(y)) {
        (Some(p), Some(q)) => (p, q),
        _ => return invalid("the periodic construction is evaluated for laws with a density"),
    };
    let (lo, hi) = d.window();
    if lo < 0.0 || hi > 1.0 {
        return invalid("the law must live on [0, 1]");
    }
    Ok(hoeffding_kernel(d, x, y) + (d.variance() - c) + c * (p + q)
        - (hoeffding_marginal(d, x) + hoeffding_marginal(d, y)))
}

/// `a_0 + Σ_k a_k cos(2πkx/T) + b_k sin(2πkx/T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub period: f64,
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(period: f64, constant: f64, mut cos: Vec<f64>, mut sin: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return invalid(format!("period must be positive, got {period}"));
        }
        let k = cos.len().max(sin.len());
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        Ok(TrigPolynomial { period, constant, cos, sin })
    }

    /// `t ↦ p(cos(2πt/T), sin(2πt/T))` for a polynomial `p` in two variables,
    /// recovered exactly (up to rounding) by a discrete Fourier transform.
    pub fn from_circle_polynomial(p: &Polynomial, period: f64) -> Result<Self> {
        if p.dimension() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: p.dimension() });
        }
        let deg = p.degree() as usize;
        let m = 2 * deg + 2;
        let vals: Vec<f64> = (0..m)
            .map(|j| {
                let (s, c) = (TWO_PI * j as f64 / m as f64).sin_cos();
                p.eval(&[c, s])
            })
            .collect();
        let constant = vals.iter().sum::<f64>() / m as f64;
        let mut cos = Vec::with_capacity(deg);
        let mut sin = Vec::with_capacity(deg);
        for k in 1..=deg {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in vals.iter().enumerate() {
                let (s, c) = (TWO_PI * (k * j) as f64 / m as f64).sin_cos();
                a += v * c;
                b += v * s;
            }
            cos.push(2.0 * a / m as f64);
            sin.push(2.0 * b / m as f64);
        }
        Self::new(period, constant, cos, sin)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = TWO_PI / self.period;
        let mut acc = self.constant;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (s, c) = (w * (k + 1) as f64 * x).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let w = TWO_PI / self.period;
        let mut cos = Vec::with_capacity(self.cos.len());
        let mut sin = Vec::with_capacity(self.sin.len());
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let f = w * (k + 1) as f64;
            cos.push(f * b);
            sin.push(-f * a);
        }
        TrigPolynomial { period: self.period, constant: 0.0, cos, sin }
    }

    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Covariance under the uniform law on one period, by Parseval.
    pub fn covariance(&self, other: &TrigPolynomial) -> Result<f64> {
        if (self.period - other.period).abs() > 1e-12 * self.period {
            return invalid("trigonometric polynomials have different periods");
        }
        let s: f64 = self
            .cos
            .iter()
            .zip(&other.cos)
            .chain(self.sin.iter().zip(&other.sin))
            .map(|(a, b)| a * b)
            .sum();
        Ok(0.5 * s)
    }
}

/// `cov(u, v) = ∬ u'(x) v'(y) [Q(|x-y|/T) + c - 1/24] dx dy`: Parseval on
/// the left, quadrature on the right.
pub fn periodic_covariance_check(
    u: &TrigPolynomial,
    v: &TrigPolynomial,
    c: f64,
    atol: f64,
) -> Result<VerificationReport> {
    let lhs = u.covariance(v)?;
    let rhs = PeriodicKernel::new(c, u.period)?.pairing(u, v);
    Ok(VerificationReport::equality("periodic", 2, lhs, rhs, 0.0, 0, 0, atol)
        .with_note(format!("c = {c}, period = {}", u.period)))
}

/// Interval density `cos(t-s) ψ(cos(t-s)) / (2π)²` of a circle density ψ.
pub fn circle_transfer(psi: impl Fn(f64) -> Result<f64>, t: f64, s: f64) -> Result<f64> {
    let a = (t - s).cos();
    Ok(a * psi(a)? / (TWO_PI * TWO_PI))
}

/// `c` with marginal `c·T` per unit length for the transferred exact circle
/// density, from `(1/2π)² ∫_0^{2π} λ(t, s) ds`.
pub fn circle_marginal_constant(t: f64) -> Result<f64> {
    let mut pts = vec![0.0, TWO_PI];
    for p in [t - PI, t, t + PI] {
        if p > 0.0 && p < TWO_PI {
            insert_point(&mut pts, p);
        }
    }
    let mut err = None;
    let total = integrate_panels(&pts, |s| match circle_transfer(psi_circle_exact, t, s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total / TWO_PI),
    }
}

fn circle_law() -> Distribution1D {
    Distribution1D::Uniform { a: 0.0, b: TWO_PI }
}

/// Total mass of the Höffding measure of the uniform law on `(0, 2π)`.
pub fn circle_hoeffding_total_mass() -> f64 {
    hoeffding_mass(&circle_law(), (0.0, TWO_PI), (0.0, TWO_PI))
}

/// Marginal of that measure at `t`, by quadrature of the kernel.
pub fn circle_hoeffding_marginal(t: f64) -> f64 {
    hoeffding_marginal_quadrature(&circle_law(), t)
}

/// `cov(f, g) = ∬ u'(t) v'(s) F(t∧s)(1 - F(t∨s)) dt ds`, `F(t) = t/2π`,
/// for `u(t) = f(e^{it})`, `v(s) = g(e^{is})` given as 2π-periodic
/// trigonometric polynomials.
pub fn circle_hoeffding_representation(
    u: &TrigPolynomial,
    v: &TrigPolynomial,
    atol: f64,
) -> Result<VerificationReport> {
    if (u.period - TWO_PI).abs() > 1e-12 || (v.period - TWO_PI).abs() > 1e-12 {
        return invalid("circle functions are 2π-periodic");
    }
    let lhs = u.covariance(v)?;
    let (du, dv) = (u.derivative(), v.derivative());
    let d = circle_law();
    let xs = uniform_panels(0.0, TWO_PI, 8);
    let rhs = integrate_panels(&xs, |t| {
        let mut ys = xs.clone();
        insert_point(&mut ys, t);
        du.eval(t) * integrate_panels(&ys, |s| dv.eval(s) * hoeffding_kernel(&d, t, s))
    });
    Ok(VerificationReport::equality("circle_hoeffding", 2, lhs, rhs, 0.0, 0, 0, atol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::circle_kernel_k;
    use crate::montecarlo::chunk_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn poly(s: &str) -> Polynomial {
        Polynomial::parse(s, 1).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert!((hoeffding_kernel(&u, 0.25, 0.5) - 0.125).abs() < 1e-15);
        let mass = hoeffding_mass(&u, (0.0, 1.0), (0.0, 1.0));
        assert!((mass - 1.0 / 12.0).abs() < 1e-13);

        let b = Distribution1D::bernoulli(0.0, 1.0, 0.3).unwrap();
        for &(x, y) in &[(0.1, 0.9), (0.5, 0.5), (0.99, 0.01)] {
            assert!((hoeffding_kernel(&b, x, y) - 0.21).abs() < 1e-15);
        }
        assert_eq!(hoeffding_kernel(&b, -0.1, 0.5), 0.0);
        assert!((hoeffding_mass(&b, (-1.0, 2.0), (-1.0, 2.0)) - b.variance()).abs() < 1e-15);

        let g = Distribution1D::gaussian(0.5, 2.0).unwrap();
        let big = (-40.0, 40.0);
        assert!((hoeffding_mass(&g, big, big) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn marginal_examples() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        for k in 1..20 {
            let x = k as f64 / 20.0;
            let h = hoeffding_marginal(&u, x);
            assert!((h - x * (1.0 - x) / 2.0).abs() < 1e-15);
            assert!((hoeffding_marginal_quadrature(&u, x) - h).abs() < 1e-13);
        }
        assert!((hoeffding_marginal(&u, 0.5) - 0.5 * u.mean_abs_deviation()).abs() < 1e-15);

        let mut rng = chunk_rng(5, 0);
        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        for _ in 0..10 {
            let x: f64 = rng.random_range(-3.0..3.0);
            let phi = g.density(x).unwrap();
            assert!((hoeffding_marginal_quadrature(&g, x) / phi - 1.0).abs() < 1e-8);
            assert!((stein_kernel(&g, x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_at_mean_and_unimodality() {
        let dists = [
            Distribution1D::uniform(-1.0, 3.0).unwrap(),
            Distribution1D::gaussian(1.0, 0.5).unwrap(),
            Distribution1D::table(vec![0.0, 1.0, 1.5, 4.0], vec![0.0, 0.5, 0.6, 1.0]).unwrap(),
            Distribution1D::empirical(vec![0.3, -1.0, 2.5, 0.7, 0.71]).unwrap(),
        ];
        for d in &dists {
            let a = d.mean();
            let (lo, hi) = d.window();
            if !d.has_atoms() {
                assert!((hoeffding_marginal(d, a) - 0.5 * d.mean_abs_deviation()).abs() < 1e-12, "{d:?}");
            }
            let grid: Vec<f64> = (0..=400).map(|k| lo + (hi - lo) * k as f64 / 400.0).collect();
            for w in grid.windows(2) {
                let (h0, h1) = (hoeffding_marginal(d, w[0]), hoeffding_marginal(d, w[1]));
                if w[1] <= a {
                    assert!(h1 >= h0 - 1e-14, "{d:?} at {}", w[0]);
                } else if w[0] >= a {
                    assert!(h1 <= h0 + 1e-14, "{d:?} at {}", w[0]);
                }
            }
            // marginal density integrates to the variance
            let mut pts = clipped(&d.breakpoints(), lo, hi);
            insert_point(&mut pts, a);
            let total = integrate_panels(&pts, |x| hoeffding_marginal(d, x));
            assert!((total - d.variance()).abs() < 1e-10, "{d:?}: {total}");
        }
    }

    #[test]
    fn table_matches_uniform() {
        let t = Distribution1D::table(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert!((t.cdf(x) - u.cdf(x)).abs() < 1e-15);
            assert!((hoeffding_marginal(&t, x) - hoeffding_marginal(&u, x)).abs() < 1e-15);
        }
        assert!((t.variance() - 1.0 / 12.0).abs() < 1e-15);
        let parsed = Distribution1D::table_from_csv("# x,F\n0,0\n0.5,0.5\n\n1,1\n").unwrap();
        assert_eq!(parsed, t);
        assert!(Distribution1D::table_from_csv("0,0\n1,0.9\n").is_err());
    }

    #[test]
    fn stein_identity() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        let r = stein_identity_check(&u, &poly("x1^2"), 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.lhs - 1.0 / 12.0).abs() < 1e-14);
        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        let b = Distribution1D::bernoulli(-1.0, 2.0, 0.4).unwrap();
        let t = Distribution1D::table(vec![0.0, 1.0, 3.0], vec![0.0, 0.7, 1.0]).unwrap();
        for d in [&u, &g, &b, &t] {
            for s in ["x1", "x1^3 - 2*x1", "x1^4", "0.5*x1^5 + x1^2"] {
                let r = stein_identity_check(d, &poly(s), 1e-8).unwrap();
                assert!(r.pass, "{d:?} {s}: {r:?}");
            }
        }
        assert!(stein_kernel(&u, 2.0).is_err());
        assert!(stein_kernel(&b, 0.5).is_err());
    }

    #[test]
    fn fourier_transform() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        let closed = hoeffding_fourier(&u, 1.0, 1.0).unwrap();
        let quad = hoeffding_fourier_quadrature(&u, 1.0, 1.0);
        assert!((closed - quad).norm() < 1e-10);
        let t = Distribution1D::table(vec![-1.0, 0.0, 2.0], vec![0.0, 0.25, 1.0]).unwrap();
        for &(a, b) in &[(0.7, -1.3), (2.0, 0.5)] {
            let c = hoeffding_fourier(&t, a, b).unwrap();
            assert!((c - hoeffding_fourier_quadrature(&t, a, b)).norm() < 1e-6);
            assert!((c - hoeffding_fourier(&t, b, a).unwrap()).norm() < 1e-15);
        }
        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        let v = hoeffding_fourier(&g, 1e-4, 2e-4).unwrap();
        assert!((v.re - 1.0).abs() < 1e-3 && v.im.abs() < 1e-12);
        assert!(hoeffding_fourier(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn periodic_kernel() {
        assert_eq!(periodic_q(0.5), 0.0);
        let k = PeriodicKernel::new(1.0 / 24.0, 1.0).unwrap();
        let pts = uniform_panels(0.0, 1.0, 4);
        let mass = integrate_panels(&pts, |x| {
            let mut ys = pts.clone();
            insert_point(&mut ys, x);
            integrate_panels(&ys, |y| k.density_unchecked(x, y))
        });
        assert!((mass - 1.0 / 24.0).abs() < 1e-14);
        for (c, t) in [(0.1, 1.0), (0.05, 3.0), (1.0 / 96.0, TWO_PI)] {
            let k = PeriodicKernel::new(c, t).unwrap();
            for x in [0.0, 0.3 * t, 0.77 * t] {
                assert!((k.marginal(x).unwrap() - c * t).abs() < 1e-13);
            }
        }
        assert!(k.density(1.0, 0.5).is_err());
        assert!(!PeriodicKernel::new(0.04, 1.0).unwrap().is_nonnegative());
    }

    #[test]
    fn law_construction_reproduces_q() {
        let u = Distribution1D::uniform(0.0, 1.0).unwrap();
        for c in [1.0 / 24.0, 0.0, 0.3] {
            for i in 0..25 {
                for j in 0..25 {
                    let (x, y) = (0.02 + 0.04 * i as f64, 0.013 + 0.04 * j as f64);
                    let a = periodic_mixing_from_law(&u, c, x, y).unwrap();
                    let b = periodic_mixing_density(c, 1.0, x, y).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn periodic_covariance() {
        let s = TrigPolynomial::new(1.0, 0.0, vec![], vec![1.0]).unwrap();
        let c = TrigPolynomial::new(1.0, 0.0, vec![1.0], vec![]).unwrap();
        for cc in [1.0 / 24.0, 0.2, -0.5] {
            let r = periodic_covariance_check(&s, &s, cc, 1e-8).unwrap();
            assert!(r.pass && (r.lhs - 0.5).abs() < 1e-15, "{r:?}");
            let r = periodic_covariance_check(&s, &c, cc, 1e-8).unwrap();
            assert!(r.pass && r.rhs.abs() < 1e-10);
        }
        let u = TrigPolynomial::new(1.0, 3.0, vec![0.5, -1.0, 0.2], vec![1.0, 0.0, 0.3]).unwrap();
        let v = TrigPolynomial::new(1.0, -1.0, vec![0.1, 2.0], vec![0.0, -0.7, 0.4]).unwrap();
        assert!(periodic_covariance_check(&u, &v, 0.1, 1e-9).unwrap().pass);
    }

    #[test]
    fn trig_from_circle_polynomial() {
        let p = Polynomial::parse("x1^3 - 2*x1*x2 + 0.5", 2).unwrap();
        let t = TrigPolynomial::from_circle_polynomial(&p, TWO_PI).unwrap();
        for k in 0..13 {
            let a = 0.37 * k as f64;
            assert!((t.eval(a) - p.eval(&[a.cos(), a.sin()])).abs() < 1e-13);
        }
        let d = t.derivative();
        let h = 1e-5;
        assert!((d.eval(1.0) - (t.eval(1.0 + h) - t.eval(1.0 - h)) / (2.0 * h)).abs() < 1e-8);
    }

    #[test]
    fn circle_transfer_values() {
        let v0 = circle_transfer(psi_circle_exact, 0.0, 0.0).unwrap();
        assert!((v0 - 3.0 / 32.0).abs() < 1e-15);
        let vpi = circle_transfer(psi_circle_exact, PI, 0.0).unwrap();
        assert!((vpi + 1.0 / 32.0).abs() < 1e-15);
        for k in 0..200 {
            let t = TWO_PI * k as f64 / 200.0;
            let s = 0.3;
            let v = circle_transfer(psi_circle_exact, t, s).unwrap();
            let want = circle_kernel_k((t - s).abs() / TWO_PI);
            assert!((v - want).abs() < 1e-10, "{t}");
        }
        assert!((circle_marginal_constant(1.0).unwrap() - 1.0 / 96.0).abs() < 1e-12);
    }

    #[test]
    fn circle_hoeffding() {
        assert!((circle_hoeffding_total_mass() - PI * PI / 3.0).abs() < 1e-10);
        for t in [0.5, 2.0, 5.5] {
            assert!((circle_hoeffding_marginal(t) - t * (TWO_PI - t) / (4.0 * PI)).abs() < 1e-12);
        }
        let x1 = TrigPolynomial::from_circle_polynomial(&Polynomial::parse("x1", 2).unwrap(), TWO_PI).unwrap();
        let r = circle_hoeffding_representation(&x1, &x1, 1e-8).unwrap();
        assert!(r.pass && (r.lhs - 0.5).abs() < 1e-14, "{r:?}");
        let f = Polynomial::parse("x1^2*x2 + x2^3 - x1", 2).unwrap();
        let g = Polynomial::parse("x1*x2 + 2*x2", 2).unwrap();
        let (u, v) = (
            TrigPolynomial::from_circle_polynomial(&f, TWO_PI).unwrap(),
            TrigPolynomial::from_circle_polynomial(&g, TWO_PI).unwrap(),
        );
        assert!(circle_hoeffding_representation(&u, &v, 1e-8).unwrap().pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kernel_is_positive_definite(
            pts in prop::collection::vec((-3.0f64..3.0, -1.0f64..1.0), 1..12),
            which in 0usize..4,
        ) {
            let d = match which {
                0 => Distribution1D::uniform(-1.0, 2.0).unwrap(),
                1 => Distribution1D::gaussian(0.2, 1.5).unwrap(),
                2 => Distribution1D::bernoulli(-0.5, 1.0, 0.35).unwrap(),
                _ => Distribution1D::empirical(vec![-2.0, -0.3, 0.1, 0.1, 1.7]).unwrap(),
            };
            let mut q = 0.0;
            for &(xi, ai) in &pts {
                for &(xj, aj) in &pts {
                    let h = hoeffding_kernel(&d, xi, xj);
                    prop_assert!((h - hoeffding_kernel(&d, xj, xi)).abs() == 0.0);
                    prop_assert!(h >= 0.0);
                    prop_assert!(h * h <= hoeffding_kernel(&d, xi, xi) * hoeffding_kernel(&d, xj, xj) + 1e-15);
                    q += ai * aj * h;
                }
            }
            prop_assert!(q >= -1e-10);
        }

        #[test]
        fn mass_cauchy_schwarz(a0 in -2.0f64..1.0, la in 0.1f64..2.0, b0 in -2.0f64..1.0, lb in 0.1f64..2.0, which in 0usize..3) {
            let d = match which {
                0 => Distribution1D::uniform(-1.0, 2.0).unwrap(),
                1 => Distribution1D::gaussian(0.0, 1.0).unwrap(),
                _ => Distribution1D::empirical(vec![-1.5, -0.2, 0.4, 1.1, 1.9]).unwrap(),
            };
            let (a, b) = ((a0, a0 + la), (b0, b0 + lb));
            let ab = hoeffding_mass(&d, a, b);
            let aa = hoeffding_mass(&d, a, a);
            let bb = hoeffding_mass(&d, b, b);
            prop_assert!(ab * ab <= aa * bb * (1.0 + 1e-9) + 1e-15);
        }
    }
}
