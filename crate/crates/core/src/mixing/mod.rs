//! Mixing densities: Gauss space (`p_n`, `q_n`), the sphere (ψ_n of first
//! and second order) and the exact circle density; total masses `c_n`,
//! boundary asymptotics and samplers.

pub mod gauss;
mod quad;
pub mod sampler;
pub mod series;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_scope, Error, Result};
use crate::quadrature::{adaptive, tanh_sinh};
use crate::sphere::inner_product_norm;

pub use gauss::{
    draw_kappa_pair, draw_pi_pair, gauss_density_p, gauss_density_q, gaussian_density, pi_fourier,
    sample_kappa_n, sample_pi_n, DensityValue, Pair, WeightedPair,
};
pub use sampler::{angle_table, ks_statistic, sample_mu_n, AngleTable, MuSampler};
pub use series::{psi_series, SeriesValue};

/// Largest `|α|` at which the series backend is used by default.
pub const SERIES_RADIUS: f64 = 0.95;

/// Series results whose terms cancel by more than this factor are
/// recomputed by quadrature.
const MAX_CANCELLATION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    GaussFirst,
    GaussSecond,
    SphereFirst,
    SphereSecond,
    CircleExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Series inside [`SERIES_RADIUS`], quadrature outside.
    Auto,
    Series,
    Quadrature,
    ClosedForm,
}

/// A configured density evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingDensity {
    pub kind: MixingKind,
    pub n: usize,
    pub backend: Backend,
}

impl MixingDensity {
    pub fn new(kind: MixingKind, n: usize, backend: Backend) -> Result<Self> {
        match kind {
            MixingKind::SphereFirst => scope_check(n, 1)?,
            MixingKind::SphereSecond => scope_check(n, 2)?,
            MixingKind::CircleExact if n != 2 => return invalid("the exact circle density has n = 2"),
            MixingKind::GaussFirst | MixingKind::GaussSecond if n == 0 => {
                return invalid("Gauss-space densities need n >= 1")
            }
            _ => {}
        }
        let ok = match kind {
            MixingKind::CircleExact => backend == Backend::ClosedForm,
            MixingKind::GaussFirst | MixingKind::GaussSecond => backend == Backend::Quadrature,
            _ => backend != Backend::ClosedForm,
        };
        if !ok {
            return invalid(format!("backend {backend:?} does not apply to {kind:?}"));
        }
        Ok(MixingDensity { kind, n, backend })
    }

    /// `ψ(α)` for the spherical and circle kinds.
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        match self.kind {
            MixingKind::SphereFirst => psi_sphere_with(self.n, alpha, 1, self.backend),
            MixingKind::SphereSecond => psi_sphere_with(self.n, alpha, 2, self.backend),
            MixingKind::CircleExact => psi_circle_exact(alpha),
            _ => invalid("Gauss-space densities take a pair of points"),
        }
    }

    /// `p_n(x,y)` or `q_n(x,y)` for the Gauss-space kinds.
    pub fn eval_pair(&self, x: &[f64], y: &[f64]) -> Result<DensityValue> {
        match self.kind {
            MixingKind::GaussFirst => gauss_density_p(x, y),
            MixingKind::GaussSecond => gauss_density_q(x, y),
            _ => invalid("spherical densities take an inner product"),
        }
    }
}

pub(crate) fn scope_check(n: usize, order: u8) -> Result<()> {
    match order {
        1 if n >= 2 => Ok(()),
        1 => invalid(format!("first-order spherical density needs n >= 2, got {n}")),
        2 if n >= 5 => Ok(()),
        2 => out_of_scope(format!("second-order identity requires n >= 5, got n = {n}")),
        _ => invalid(format!("order must be 1 or 2, got {order}")),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.abs() <= 1.0) {
        return invalid(format!("|alpha| must be at most 1, got {alpha}"));
    }
    Ok(())
}

/// `ψ_n(α)` of order 1 or 2 with the default backend.
pub fn psi_sphere(n: usize, alpha: f64, order: u8) -> Result<f64> {
    psi_sphere_with(n, alpha, order, Backend::Auto)
}

/// `ψ_n(α)` with an explicit backend. `+∞` at `α = 1` whenever the defining
/// integral diverges there (all cases except `n = 2`, order 1).
pub fn psi_sphere_with(n: usize, alpha: f64, order: u8, backend: Backend) -> Result<f64> {
    scope_check(n, order)?;
    check_alpha(alpha)?;
    let gap = 1.0 - alpha;
    match backend {
        Backend::Auto => psi_auto_gap(n, alpha, gap, order),
        Backend::Series => Ok(psi_series(n, alpha, order)?.value),
        Backend::Quadrature => psi_quadrature_gap(n, alpha, gap, order),
        Backend::ClosedForm => invalid("no closed form for the spherical densities"),
    }
}

/// `ψ` by quadrature.
pub fn psi_quadrature(n: usize, alpha: f64, order: u8) -> Result<f64> {
    scope_check(n, order)?;
    check_alpha(alpha)?;
    psi_quadrature_gap(n, alpha, 1.0 - alpha, order)
}

fn psi_quadrature_gap(n: usize, alpha: f64, gap: f64, order: u8) -> Result<f64> {
    if gap == 0.0 && !(n == 2 && order == 1) {
        return Ok(f64::INFINITY);
    }
    quad::psi_quadrature_gap(n, alpha, gap, order)
}

pub(crate) fn psi_auto_gap(n: usize, alpha: f64, gap: f64, order: u8) -> Result<f64> {
    if alpha.abs() <= SERIES_RADIUS {
        let s = psi_series(n, alpha, order)?;
        if s.cancellation() <= MAX_CANCELLATION {
            return Ok(s.value);
        }
    }
    psi_quadrature_gap(n, alpha, gap, order)
}

/// Kernel `K(h) = (4h-1)(4h-3)/32 = Q(h) - 1/32` on `[0, 1]`.
pub fn circle_kernel_k(h: f64) -> f64 {
    (4.0 * h - 1.0) * (4.0 * h - 3.0) / 32.0
}

/// Exact circle density `ψ(cos h) = (2π)² K(h/2π) / cos h`, `h ∈ [0, π]`.
///
/// Near `α = 0` both factors vanish; there the equivalent form
/// `(π/2 + δ/2) δ/α` with `δ = arcsin α` is used.
pub fn psi_circle_exact(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha.abs() < 1e-3 {
        let d = alpha.asin();
        let sinc = if alpha == 0.0 { 1.0 } else { d / alpha };
        return Ok((0.5 * PI + 0.5 * d) * sinc);
    }
    let h = alpha.acos();
    Ok(4.0 * PI * PI * circle_kernel_k(h / (2.0 * PI)) / alpha)
}

/// The circle density as the single integral
/// `(1/α) ∫_0^∞ [log(1+z/2) - log(1+(1-α)z/2)] dz / (z√(1+z))`.
///
/// Evaluated after `1 + z = 1/v²`, which maps the half line onto `(0, 1]`
/// with a bounded integrand
/// `(2/α) log1p(α(1-v²) / (2v² + (1-α)(1-v²))) / (1-v²)`.
pub fn psi_circle_integral(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = tanh_sinh(
        |v, _, dr| {
            let s = dr * (1.0 + v);
            let d = 2.0 * v * v + (1.0 - alpha) * s;
            if alpha == 0.0 {
                return 2.0 / d;
            }
            if d == 0.0 {
                // α = 1 and v below the underflow threshold; weight is nil
                return 0.0;
            }
            2.0 * (alpha * s / d).ln_1p() / (alpha * s)
        },
        0.0,
        1.0,
        1e-15,
        1e-14,
    )?;
    Ok(q.value)
}

/// Total mass of the circle mixing measure,
/// `2(2π)² ∫_0^1 K(h)(1-h)/cos(2πh) dh`. The integrand has removable
/// singularities at `h = 1/4, 3/4`, used as panel breakpoints.
pub fn torus_total_mass() -> Result<f64> {
    let f = |h: f64| circle_kernel_k(h) * (1.0 - h) / (2.0 * PI * h).cos();
    let mut total = 0.0;
    for (a, b) in [(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)] {
        total += adaptive(f, a, b, 1e-15, 1e-13)?.value;
    }
    Ok(8.0 * PI * PI * total)
}

/// Total mass `c_n` with its known two-sided bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConstant {
    pub order: u8,
    pub n: usize,
    pub value: f64,
    pub error: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MixingConstant {
    pub fn within_bounds(&self) -> bool {
        self.lower < self.value && self.value < self.upper
    }
}

/// Bounds for `c_n`: `(1/(n-1), 1/(n-2))` at order 1 (upper bound π on the
/// circle), `(1/(n(n+2)), 1/((n-2)(n-4)))` at order 2.
pub fn constant_bounds(n: usize, order: u8) -> (f64, f64) {
    let nf = n as f64;
    match order {
        1 if n == 2 => (1.0, PI),
        1 => (1.0 / (nf - 1.0), 1.0 / (nf - 2.0)),
        _ => (1.0 / (nf * (nf + 2.0)), 1.0 / ((nf - 2.0) * (nf - 4.0))),
    }
}

/// `∫ α^k ψ(α) w_n(α) dα`, integrated in `θ = arccos α` where the weight
/// becomes `sin^{n-2} θ`. Panels break where the backend switches.
fn weighted_integral(n: usize, order: u8, k: i32, tol: f64) -> Result<(f64, f64)> {
    let norm = inner_product_norm(n);
    let th1 = SERIES_RADIUS.acos();
    let th2 = (-SERIES_RADIUS).acos();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut failure = None;
    for (a, b) in [(0.0, th1), (th1, th2), (th2, PI)] {
        let q = adaptive(
            |th: f64| {
                let half = (0.5 * th).sin();
                let alpha = th.cos();
                match psi_auto_gap(n, alpha, 2.0 * half * half, order) {
                    Ok(psi) => norm * psi * th.sin().powi(n as i32 - 2) * alpha.powi(k),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            a,
            b,
            tol * 1e-2,
            tol,
        )?;
        value += q.value;
        error += q.error;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((value, error))
}

/// `c_n = ∫ ψ(α) w_n(α) dα`.
pub fn mixing_constant(n: usize, order: u8) -> Result<MixingConstant> {
    scope_check(n, order)?;
    let (value, error) = weighted_integral(n, order, 0, 1e-11)?;
    let (lower, upper) = constant_bounds(n, order);
    Ok(MixingConstant { order, n, value, error, lower, upper })
}

/// `E_μ ⟨x,y⟩^k = ∫ α^k ψ w_n dα / c_n`.
pub fn alpha_moment(n: usize, order: u8, k: u32) -> Result<f64> {
    scope_check(n, order)?;
    let (m, _) = weighted_integral(n, order, k as i32, 1e-11)?;
    let (c, _) = weighted_integral(n, order, 0, 1e-11)?;
    Ok(m / c)
}

/// Boundary profile of ψ_n at `α → 1`: `log 1/(1-α)` for n = 3 and
/// `(1-α)^{-(n-3)/2}` for n ≥ 4.
pub fn asymptotic_profile(n: usize, alpha: f64) -> f64 {
    let gap = 1.0 - alpha;
    if n == 3 {
        (1.0 / gap).ln()
    } else {
        gap.powf(-(n as f64 - 3.0) / 2.0)
    }
}

/// `(α, ψ_n(α) / A_n(α))` on a grid in `[0.9, 1)`.
pub fn asymptotic_ratio(n: usize, alpha_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if n < 3 {
        return invalid(format!("boundary asymptotics are stated for n >= 3, got {n}"));
    }
    alpha_grid
        .iter()
        .map(|&a| {
            if !(0.9..1.0).contains(&a) {
                return Err(Error::InvalidArgument(format!("alpha {a} outside [0.9, 1)")));
            }
            Ok((a, psi_sphere(n, a, 1)? / asymptotic_profile(n, a)))
        })
        .collect()
}
