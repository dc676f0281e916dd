//! Deviation and exponential-moment experiments on the sphere.
//!
//! For `f` with Lipschitz seminorm at most 1 and mean `m`, the simulated
//! tail `σ{|f - m| ≥ r}` is compared with the classical bound
//! `2 e^{-(n-1) r²/2}` and with `(1/r) e^{-(n-2) r²/2} E|f - m|`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, out_of_scope, Result};
use crate::harmonics::harmonic_decompose;
use crate::mixing::mixing_constant;
use crate::montecarlo::{chunk_rng, fill_sphere, mc_means, run_chunks, Welford};
use crate::polynomial::Polynomial;
use crate::quadrature::tanh_sinh;
use crate::sphere::{dot, inner_product_density_unchecked, SphereDerivatives};
use crate::verify::{CheckOptions, VerificationReport};

/// Lower estimate of `sup |∇_S f|` over probe points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub probes: usize,
    /// Always true: a maximum over finitely many points can only
    /// underestimate the seminorm.
    pub lower_estimate: bool,
}

/// `max |∇_S f|` over the coordinate points `±e_i` and `probes` uniform
/// points.
pub fn lipschitz_estimate(f: &Polynomial, probes: usize, seed: u64) -> Result<LipschitzEstimate> {
    if probes < 1000 {
        return invalid(format!("at least 1000 probes are required, got {probes}"));
    }
    let n = f.dimension();
    let df = SphereDerivatives::new(f);
    let mut g = vec![0.0; n];
    let mut best: f64 = 0.0;
    let mut x = vec![0.0; n];
    for i in 0..n {
        for s in [1.0, -1.0] {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[i] = s;
            df.gradient(&x, &mut g);
            best = best.max(dot(&g, &g).sqrt());
        }
    }
    let mut rng = chunk_rng(seed, 0);
    for _ in 0..probes {
        fill_sphere(&mut rng, &mut x);
        df.gradient(&x, &mut g);
        best = best.max(dot(&g, &g).sqrt());
    }
    Ok(LipschitzEstimate { value: best, probes, lower_estimate: true })
}

/// One radius of a deviation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub r: f64,
    pub empirical: f64,
    /// Binomial standard error `√(p(1-p)/N)`.
    pub std_error: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// `2 e^{-(n-1) r²/2}`.
    pub bound_classical: f64,
    /// `(1/r) e^{-(n-2) r²/2} E|f - m|`, with the simulated `E|f - m|`.
    pub bound_mean_deviation: f64,
    /// `(1/(r√(n-1))) e^{-(n-2) r²/2}`.
    pub bound_poincare: f64,
    /// Exact tail when `f` is linear.
    pub exact_tail: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationExperiment {
    pub n: usize,
    pub lipschitz: f64,
    pub mean: f64,
    pub mean_abs_deviation: f64,
    pub mean_abs_deviation_exact: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<DeviationRow>,
}

impl ConcentrationExperiment {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `σ{|θ_1| ≥ a}` from the density of one coordinate of a uniform point.
pub fn coordinate_tail(n: usize, a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Ok(1.0);
    }
    if a >= 1.0 {
        return Ok(0.0);
    }
    let q = tanh_sinh(|x, _, _| inner_product_density_unchecked(n, x), a, 1.0, 1e-16, 1e-13)?;
    Ok((2.0 * q.value).min(1.0))
}

/// `E|θ_1| = Γ(n/2) / (√π Γ((n+1)/2))`.
pub fn coordinate_abs_mean(n: usize) -> f64 {
    let nf = n as f64;
    (ln_gamma(nf / 2.0) - ln_gamma((nf + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// The vector `a` if `f = ⟨a, θ⟩ + const`.
fn linear_coefficients(f: &Polynomial) -> Option<Vec<f64>> {
    let n = f.dimension();
    let mut a = vec![0.0; n];
    for (m, &c) in f.terms() {
        match m.degree() {
            0 => {}
            1 => {
                let i = m.exponents().iter().position(|&e| e == 1)?;
                a[i] = c;
            }
            _ => return None,
        }
    }
    Some(a)
}

pub fn deviation_experiment(f: &Polynomial, r_grid: &[f64], samples: usize, seed: u64) -> Result<ConcentrationExperiment> {
    let n = f.dimension();
    if n < 3 {
        return invalid("deviation bounds are checked for n >= 3");
    }
    if samples == 0 || r_grid.iter().any(|r| !(*r >= 0.0)) {
        return invalid("need samples > 0 and nonnegative radii");
    }
    let lip = lipschitz_estimate(f, 10_000, seed ^ 0x5eed)?;
    if lip.value > 1.0 + 1e-6 {
        return invalid(format!("f must be 1-Lipschitz; estimated seminorm {}", lip.value));
    }
    let mean = f.to_rational()?.sphere_mean();
    let mean = crate::polynomial::Coefficient::to_f64(&mean);
    let k = r_grid.len();
    let (counts, absdev) = run_chunks(
        samples,
        seed,
        |rng, len, acc: &mut (Vec<u64>, Welford)| {
            acc.0.resize(k, 0);
            let mut x = vec![0.0; n];
            for _ in 0..len {
                fill_sphere(rng, &mut x);
                let d = (f.eval(&x) - mean).abs();
                acc.1.push(d);
                for (c, &r) in acc.0.iter_mut().zip(r_grid) {
                    if d >= r {
                        *c += 1;
                    }
                }
            }
        },
        |total, part| {
            total.0.resize(k, 0);
            for (t, p) in total.0.iter_mut().zip(&part.0) {
                *t += p;
            }
            total.1.merge(&part.1);
        },
    );
    let linear = linear_coefficients(f).map(|a| dot(&a, &a).sqrt());
    let abs_exact = linear.map(|l| l * coordinate_abs_mean(n));
    let nf = n as f64;
    let mut rows = Vec::with_capacity(k);
    for (&r, &c) in r_grid.iter().zip(&counts) {
        let p = c as f64 / samples as f64;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let (lo, hi) = wilson_interval(c, samples as u64);
        let classical = 2.0 * (-(nf - 1.0) * r * r / 2.0).exp();
        let decay = (-(nf - 2.0) * r * r / 2.0).exp();
        let mean_dev = if r > 0.0 { decay * absdev.mean / r } else { f64::INFINITY };
        let poincare = if r > 0.0 { decay / (r * (nf - 1.0).sqrt()) } else { f64::INFINITY };
        let exact_tail = match linear {
            Some(l) if l > 0.0 => Some(coordinate_tail(n, r / l)?),
            Some(_) => Some(if r > 0.0 { 0.0 } else { 1.0 }),
            None => None,
        };
        let bound = classical.min(mean_dev);
        let mut pass = p <= bound + 4.0 * se.max(1.0 / samples as f64);
        if let (Some(t), Some(a)) = (exact_tail, abs_exact) {
            let exact_bound = if r > 0.0 { decay * a / r } else { f64::INFINITY };
            pass &= t <= classical.min(exact_bound) * (1.0 + 1e-9) && t <= poincare * (1.0 + 1e-9);
        }
        rows.push(DeviationRow {
            r,
            empirical: p,
            std_error: se,
            wilson_low: lo,
            wilson_high: hi,
            bound_classical: classical,
            bound_mean_deviation: mean_dev,
            bound_poincare: poincare,
            exact_tail,
            pass,
        });
    }
    Ok(ConcentrationExperiment {
        n,
        lipschitz: lip.value,
        mean,
        mean_abs_deviation: absdev.mean,
        mean_abs_deviation_exact: abs_exact,
        samples,
        seed,
        rows,
    })
}

/// Largest eigenvalue modulus of a symmetric `n × n` matrix, by power
/// iteration on its square.
fn operator_norm(m: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    // perturb to avoid starting orthogonal to the top eigenvector
    for (i, x) in v.iter_mut().enumerate() {
        *x += 1e-3 * (i as f64 + 1.0);
    }
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        for i in 0..n {
            w[i] = dot(&m[i * n..(i + 1) * n], &v);
        }
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
        if (next - lambda).abs() <= 1e-13 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Exponential-moment inequalities.
///
/// Order 1: `E e^f <= E e^{c_n |∇_S f|²}` for mean-zero `f`.
/// Order 2: `E e^f <= E exp{(2‖f''_S‖²_HS + 8|∇_S f|²)/((n-2)(n-4))}` for `f`
/// orthogonal to affine functions, `n >= 5`; when in addition
/// `‖f''_S‖_op <= 1` at every probe, also `E exp{(n-1)|f|/(2(1+b))} <= 2`
/// with `b = E‖f''_S‖²_HS`.
///
/// Both sides use the same sample points; the reported standard error is
/// that of the paired difference.
pub fn exp_moment_check(f: &Polynomial, order: u8, opts: &CheckOptions) -> Result<Vec<VerificationReport>> {
    let n = f.dimension();
    let exact = harmonic_decompose(f)?;
    if exact.mean().abs() > 1e-12 {
        return invalid(format!("f must have mean zero, mean is {}", exact.mean()));
    }
    let coef = match order {
        1 => {
            if n < 2 {
                return invalid("the sphere needs n >= 2");
            }
            mixing_constant(n, 1)?.value
        }
        2 => {
            if n < 5 {
                return out_of_scope(format!("second-order identity requires n >= 5, got n = {n}"));
            }
            if exact.exact_component(1).terms().next().is_some() {
                return invalid("f must be orthogonal to linear functions");
            }
            1.0 / ((n as f64 - 2.0) * (n as f64 - 4.0))
        }
        _ => return invalid(format!("order must be 1 or 2, got {order}")),
    };
    let df = SphereDerivatives::new(f);
    let nf = n as f64;
    // columns: e^f, rhs integrand, difference, ‖f''‖²_HS, operator-norm max (as mean of indicator)
    let st = mc_means(opts.samples, opts.seed, 5, |rng, out| {
        let mut x = vec![0.0; n];
        fill_sphere(rng, &mut x);
        let mut g = vec![0.0; n];
        df.gradient(&x, &mut g);
        let g2 = dot(&g, &g);
        let lhs = df.value(&x).exp();
        let (rhs, hs2, op) = if order == 1 {
            ((coef * g2).exp(), 0.0, 0.0)
        } else {
            let mut h = vec![0.0; n * n];
            df.hessian(&x, &mut h);
            let hs2 = dot(&h, &h);
            ((coef * (2.0 * hs2 + 8.0 * g2)).exp(), hs2, operator_norm(&h, n))
        };
        out[0] = lhs;
        out[1] = rhs;
        out[2] = rhs - lhs;
        out[3] = hs2;
        out[4] = if op <= 1.0 { 0.0 } else { 1.0 };
    });
    let id = if order == 1 { "exp_moment.first_order" } else { "exp_moment.second_order" };
    let d = &st[2];
    let mut main = VerificationReport::inequality(id, n, st[0].mean, st[1].mean, d.std_error(), opts.samples, opts.seed, opts.atol);
    // decide on the paired difference rather than on the two means
    main.pass = d.mean >= -opts.atol.max(4.0 * d.std_error());
    let mut out = vec![main];
    if order == 2 {
        let b = st[3].mean;
        if st[4].mean > 0.0 {
            out[0].notes.push(format!(
                "companion bound skipped: operator norm of f''_S exceeds 1 at {:.3}% of sample points",
                100.0 * st[4].mean
            ));
        } else {
            let k = (nf - 1.0) / (2.0 * (1.0 + b));
            let w = mc_means(opts.samples, opts.seed ^ 0xb0b, 1, |rng, o| {
                let mut x = vec![0.0; n];
                fill_sphere(rng, &mut x);
                o[0] = (k * df.value(&x).abs()).exp();
            });
            out.push(
                VerificationReport::inequality(
                    "exp_moment.companion",
                    n,
                    w[0].mean,
                    2.0,
                    w[0].std_error(),
                    opts.samples,
                    opts.seed ^ 0xb0b,
                    opts.atol,
                )
                .with_note(format!("b = {b}; operator norm <= 1 at all sample points")),
            );
        }
    }
    Ok(out)
}
