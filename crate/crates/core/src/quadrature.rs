//! One-dimensional quadrature rules.
//!
//! Three tools cover every integral in the crate:
//!
//! * [`GaussLegendre`]: fixed-order rule for smooth integrands on a finite
//!   interval (nodes from Newton iteration on the Legendre recurrence);
//! * [`adaptive`]: globally adaptive Gauss–Kronrod (7/15 points) with
//!   bisection of the worst subinterval;
//! * [`tanh_sinh`]: double-exponential rule for integrands with endpoint
//!   singularities. The integrand receives the distances to both endpoints so
//!   that expressions like `1 - t` stay accurate near `t = 1`.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Value of a numerical integral together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(c + h * x);
        }
        sum * h
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Kronrod 15-point nodes / weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]` to
/// absolute tolerance `abs_tol` or relative tolerance `rel_tol`, whichever is
/// looser.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    const MAX_SEGMENTS: usize = 4000;
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = kronrod15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] did not converge: estimate {total:e}, error {err:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision.
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
    }
    // Re-sum to shed accumulated rounding in the running total.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Quad { value, error, evaluations })
}

/// Adaptive integration over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn adaptive_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    adaptive(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - u;
            let x = a + u / one_minus;
            let jac = 1.0 / (one_minus * one_minus);
            let v = f(x) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Tanh-sinh integration of `f(x, x - a, b - x)` over `[a, b]`.
///
/// The rule never evaluates at the endpoints. Levels are refined by halving
/// the step until two successive estimates agree to `rel_tol` (or to
/// `abs_tol` in absolute terms).
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    const T_MAX: f64 = 4.5;
    const MAX_LEVEL: u32 = 12;
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let mut evaluations = 0usize;

    // Contribution of the symmetric node pair at parameter t > 0, or of the
    // center when t == 0.
    let mut pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        if t == 0.0 {
            evaluations += 1;
            return w * f(center, half, half);
        }
        // 1 - tanh(u), computed without cancellation.
        let comp = 2.0 / ((2.0 * u).exp() + 1.0);
        let d = half * comp;
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = 1.0 - comp;
        evaluations += 2;
        let right = f(center + half * x, b - a - d, d);
        let left = f(center - half * x, d, b - a - d);
        w * (left + right)
    };

    let mut h = 1.0;
    let mut sum = pair(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut fresh = 0.0;
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            fresh += pair(k as f64 * h);
            k += 2;
        }
        sum += fresh;
        let next = sum * h * half;
        let err = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            return Err(Error::Numerical("non-finite integrand in tanh-sinh".into()));
        }
        if err <= abs_tol.max(rel_tol * estimate.abs()) && _level >= 3 {
            return Ok(Quad { value: estimate, error: err, evaluations });
        }
    }
    Err(Error::Numerical(format!(
        "tanh-sinh on [{a}, {b}] did not converge (estimate {estimate:e})"
    )))
}

/// Tanh-sinh with the integrand written in terms of the position only.
pub fn tanh_sinh_simple<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad> {
    tanh_sinh(|x, _, _| f(x), a, b, abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(10);
        // degree 19 integrates exactly
        let v = gl.integrate(|x| x.powi(18) + 3.0 * x.powi(5), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_high_order_nodes_are_sorted() {
        let gl = GaussLegendre::new(97);
        assert!(gl.nodes().windows(2).all(|p| p[0] < p[1]));
        let v = gl.integrate(|x| x.cos(), 0.0, PI / 2.0);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_and_peaks() {
        let q = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert!((q.value - (0.09 / 2.0 + 0.49 / 2.0)).abs() < 1e-12);
        let q = adaptive(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((q.value - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let q = adaptive_semi_infinite(|x| (-x * x / 2.0).exp(), 0.0, 1e-13, 1e-13).unwrap();
        assert!((q.value - (PI / 2.0).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        // ∫_0^1 x^{-1/2} dx = 2
        let q = tanh_sinh(|_, dl, _| dl.powf(-0.5), 0.0, 1.0, 1e-14, 1e-13).unwrap();
        assert!((q.value - 2.0).abs() < 1e-11, "{}", q.value);
        // ∫_0^1 log(1/(1-x)) dx = 1, using the right distance
        let q = tanh_sinh(|_, _, dr| -dr.ln(), 0.0, 1.0, 1e-14, 1e-13).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        // ∫_{-1}^{1} (1-x^2)^{-1/2} dx = π
        let q = tanh_sinh(|_, dl, dr| 1.0 / (dl * dr).sqrt(), -1.0, 1.0, 1e-14, 1e-13).unwrap();
        assert!((q.value - PI).abs() < 1e-11);
    }
}
