//! Named checks of the covariance identities and inequalities, each
//! producing a [`VerificationReport`].
//!
//! Where a side has an exact value (polynomial moments on the sphere or in
//! Gauss space, spectral sums) it is used; the other side is estimated by
//! Monte Carlo or quadrature. Equalities pass when
//! `|lhs - rhs| <= max(atol, 4 σ)`, inequalities when
//! `lhs <= rhs + max(atol, 4 σ)`, σ the standard error of the estimate.

use std::f64::consts::PI;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_scope, Error, Result};
use crate::harmonics::{harmonic_decompose, second_order_semigroup_covariance, semigroup_covariance};
use crate::hoeffding::{periodic_covariance_check, TrigPolynomial};
use crate::mixing::{draw_kappa_pair, draw_pi_pair, mixing_constant, psi_circle_exact, MuSampler};
use crate::montecarlo::{fill_sphere, mc_means, Welford};
use crate::polynomial::{Coefficient, Polynomial};
use crate::quadrature::GaussLegendre;
use crate::sphere::{dot, SphereDerivatives};

/// Half-width of a 95% normal confidence interval, in standard errors.
pub const Z95: f64 = 1.96;
/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Time-quadrature order for the semigroup integrals.
const TIME_QUAD: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub identity_id: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    /// 95% half-width of the Monte Carlo part, `1.96 σ`.
    pub mc_halfwidth: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn build(id: &str, n: usize, lhs: f64, rhs: f64, std_error: f64, samples: usize, seed: u64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        VerificationReport {
            identity_id: id.to_string(),
            n,
            lhs,
            rhs,
            abs_err,
            rel_err: if scale > 0.0 { abs_err / scale } else { 0.0 },
            mc_halfwidth: Z95 * std_error,
            std_error,
            samples,
            seed,
            pass: false,
            notes: Vec::new(),
        }
    }

    /// Two-sided check `|lhs - rhs| <= max(atol, 4σ)`.
    #[allow(clippy::too_many_arguments)]
    pub fn equality(id: &str, n: usize, lhs: f64, rhs: f64, std_error: f64, samples: usize, seed: u64, atol: f64) -> Self {
        let mut r = Self::build(id, n, lhs, rhs, std_error, samples, seed);
        r.pass = r.abs_err <= atol.max(4.0 * std_error);
        r
    }

    /// One-sided check `lhs <= rhs + max(atol, 4σ)`.
    #[allow(clippy::too_many_arguments)]
    pub fn inequality(id: &str, n: usize, lhs: f64, rhs: f64, std_error: f64, samples: usize, seed: u64, atol: f64) -> Self {
        let mut r = Self::build(id, n, lhs, rhs, std_error, samples, seed);
        r.pass = lhs <= rhs + atol.max(4.0 * std_error);
        r.notes.push("inequality: lhs <= rhs".into());
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Fold an extra condition into `pass`, recording why it failed.
    pub fn require(mut self, ok: bool, what: impl Into<String>) -> Self {
        if !ok {
            self.pass = false;
            self.notes.push(format!("failed: {}", what.into()));
        }
        self
    }
}

/// Sampling parameters shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub samples: usize,
    pub seed: u64,
    pub atol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { samples: DEFAULT_SAMPLES, seed: 1, atol: 1e-6 }
    }
}

fn same_dimension(f: &Polynomial, g: &Polynomial) -> Result<usize> {
    if f.dimension() != g.dimension() {
        return Err(Error::DimensionMismatch { expected: f.dimension(), got: g.dimension() });
    }
    Ok(f.dimension())
}

/// `cov_σ(f, g)` on the sphere, exact in rational arithmetic.
pub fn sphere_covariance(f: &Polynomial, g: &Polynomial) -> Result<f64> {
    same_dimension(f, g)?;
    let (fr, gr) = (f.to_rational()?, g.to_rational()?);
    let c: BigRational = (&fr * &gr).sphere_mean() - fr.sphere_mean() * gr.sphere_mean();
    Ok(c.to_f64())
}

/// `cov_γ(u, v)` under the standard Gaussian, exact in rational arithmetic.
pub fn gaussian_covariance(u: &Polynomial, v: &Polynomial) -> Result<f64> {
    same_dimension(u, v)?;
    let (ur, vr) = (u.to_rational()?, v.to_rational()?);
    let c: BigRational = (&ur * &vr).gaussian_mean() - ur.gaussian_mean() * vr.gaussian_mean();
    Ok(c.to_f64())
}

/// `E|∇_S f|²` on the sphere, exact: `|∇u|² - (Σ x_i ∂_i u)²` restricted
/// to the sphere.
pub fn gradient_energy(f: &Polynomial) -> Result<f64> {
    let n = f.dimension();
    let fr = f.to_rational()?;
    let grad = fr.gradient();
    let mut sq = Polynomial::zero(n);
    let mut radial = Polynomial::zero(n);
    for (i, g) in grad.iter().enumerate() {
        sq = &sq + &(g * g);
        radial = &radial + &(&Polynomial::variable(n, i) * g);
    }
    Ok((&sq - &(&radial * &radial)).sphere_mean().to_f64())
}

fn has_linear_component(f: &Polynomial) -> Result<bool> {
    Ok(harmonic_decompose(f)?.exact_component(1).terms().next().is_some())
}

/// Gaussian first-order identity: `cov(u(X), v(X)) = ∬ ⟨∇u(x), ∇v(y)⟩ dπ_n`.
pub fn check_gauss_first(u: &Polynomial, v: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(u, v)?;
    let lhs = gaussian_covariance(u, v)?;
    let (du, dv) = (SphereDerivatives::new(u), SphereDerivatives::new(v));
    let st = mc_means(opts.samples, opts.seed, 1, |rng, out| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        draw_pi_pair(rng, &mut x, &mut y);
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        du.euclidean_gradient(&x, &mut gx);
        dv.euclidean_gradient(&y, &mut gy);
        out[0] = dot(&gx, &gy);
    });
    Ok(VerificationReport::equality("gauss1", n, lhs, st[0].mean, st[0].std_error(), opts.samples, opts.seed, opts.atol))
}

/// Gaussian second-order identity:
/// `cov = ⟨E∇u, E∇v⟩ + ∬ ⟨u''(x), v''(y)⟩ dκ_n`, κ_n of mass 1/2.
pub fn check_gauss_second(u: &Polynomial, v: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(u, v)?;
    let lhs = gaussian_covariance(u, v)?;
    let mean_grad = |p: &Polynomial| -> Vec<f64> { p.gradient().iter().map(|g| g.gaussian_mean()).collect() };
    let first = dot(&mean_grad(u), &mean_grad(v));
    let (du, dv) = (SphereDerivatives::new(u), SphereDerivatives::new(v));
    let st = mc_means(opts.samples, opts.seed, 1, |rng, out| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        draw_kappa_pair(rng, &mut x, &mut y);
        let mut hx = vec![0.0; n * n];
        let mut hy = vec![0.0; n * n];
        du.euclidean_hessian(&x, &mut hx);
        dv.euclidean_hessian(&y, &mut hy);
        out[0] = 0.5 * dot(&hx, &hy);
    });
    Ok(VerificationReport::equality(
        "gauss2",
        n,
        lhs,
        first + st[0].mean,
        st[0].std_error(),
        opts.samples,
        opts.seed,
        opts.atol,
    )
    .with_note(format!("mean-gradient term {first}")))
}

/// Monte Carlo mean of `⟨∇_S f(x), ∇_S g(y)⟩` under μ_n (order 1).
fn mu_gradient_pairing(f: &Polynomial, g: &Polynomial, opts: &CheckOptions) -> Result<Welford> {
    let n = f.dimension();
    let sampler = MuSampler::new(n, 1)?;
    let (df, dg) = (SphereDerivatives::new(f), SphereDerivatives::new(g));
    let st = mc_means(opts.samples, opts.seed, 1, |rng, out| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        sampler.draw(rng, &mut x, &mut y);
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        df.gradient(&x, &mut gx);
        dg.gradient(&y, &mut gy);
        out[0] = dot(&gx, &gy);
    });
    Ok(st[0])
}

/// Spherical first-order identity `cov(f,g) = c_n ∬ ⟨∇_S f(x), ∇_S g(y)⟩ dμ_n`.
pub fn check_sphere_first(f: &Polynomial, g: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(f, g)?;
    if n < 2 {
        return invalid("the sphere needs n >= 2");
    }
    let lhs = sphere_covariance(f, g)?;
    let c = mixing_constant(n, 1)?;
    let w = mu_gradient_pairing(f, g, opts)?;
    Ok(VerificationReport::equality(
        "sphere1",
        n,
        lhs,
        c.value * w.mean,
        c.value * w.std_error(),
        opts.samples,
        opts.seed,
        opts.atol,
    )
    .with_note(format!("c_n = {}", c.value)))
}

/// Spherical second-order identity `cov(f,g) = c_n ∬ ⟨Df(x), Dg(y)⟩ dμ_n`
/// for `f, g` without linear harmonic component.
pub fn check_sphere_second(f: &Polynomial, g: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(f, g)?;
    if n < 5 {
        return out_of_scope(format!("second-order identity requires n >= 5, got n = {n}"));
    }
    for (name, p) in [("f", f), ("g", g)] {
        if has_linear_component(p)? {
            return invalid(format!("{name} has a nonzero linear harmonic component"));
        }
    }
    let lhs = sphere_covariance(f, g)?;
    let c = mixing_constant(n, 2)?;
    let sampler = MuSampler::new(n, 2)?;
    let (df, dg) = (SphereDerivatives::new(f), SphereDerivatives::new(g));
    let st = mc_means(opts.samples, opts.seed, 1, |rng, out| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        sampler.draw(rng, &mut x, &mut y);
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        df.d_operator(&x, &mut a);
        dg.d_operator(&y, &mut b);
        out[0] = dot(&a, &b);
    });
    Ok(VerificationReport::equality(
        "sphere2",
        n,
        lhs,
        c.value * st[0].mean,
        c.value * st[0].std_error(),
        opts.samples,
        opts.seed,
        opts.atol,
    )
    .with_note(format!("c_n = {}", c.value)))
}

/// `Var(f) <= c_n E|∇_S f|²`, both sides exact; notes carry the ratio
/// against the sharp constant `1/(n-1)`.
pub fn check_poincare(f: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = f.dimension();
    if n < 2 {
        return invalid("the sphere needs n >= 2");
    }
    let var = sphere_covariance(f, f)?;
    let energy = gradient_energy(f)?;
    let c = mixing_constant(n, 1)?;
    let mut r = VerificationReport::inequality("poincare", n, var, c.value * energy, 0.0, 0, opts.seed, opts.atol);
    if energy > 0.0 {
        r = r.with_note(format!("Var / E|grad|^2 = {}; sharp constant 1/(n-1) = {}", var / energy, 1.0 / (n as f64 - 1.0)));
    }
    Ok(r)
}

/// Monte Carlo `L^p` norm with a delta-method standard error; `p = ∞` is
/// the sample maximum.
#[derive(Debug, Clone, Copy)]
struct NormEstimate {
    value: f64,
    std_error: f64,
}

fn lp_norm(w: &Welford, max: f64, p: f64) -> NormEstimate {
    if p.is_infinite() {
        return NormEstimate { value: max, std_error: 0.0 };
    }
    let m = w.mean.max(0.0);
    let value = m.powf(1.0 / p);
    let std_error = if m > 0.0 { value / (p * m) * w.std_error() } else { 0.0 };
    NormEstimate { value, std_error }
}

/// Covariance bounds: `|cov| <= c_n ‖∇_S f‖_p ‖∇_S g‖_q`; for functions
/// without linear part and n >= 5 the second-order bound with constant
/// `1/((n-2)(n-4))`; and `Var(f) <= ‖f''_S‖₂² / (2n(n+2))` when `f` has no
/// linear part.
pub fn check_covariance_bounds(
    f: &Polynomial,
    g: &Polynomial,
    p: f64,
    opts: &CheckOptions,
) -> Result<Vec<VerificationReport>> {
    let n = same_dimension(f, g)?;
    if n < 2 {
        return invalid("the sphere needs n >= 2");
    }
    if !(p >= 1.0) {
        return invalid(format!("p must be at least 1, got {p}"));
    }
    let q = if p == 1.0 { f64::INFINITY } else if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let cov = sphere_covariance(f, g)?.abs();
    let c1 = mixing_constant(n, 1)?.value;
    let (df, dg) = (SphereDerivatives::new(f), SphereDerivatives::new(g));
    let pw = |v: f64, e: f64| if e.is_infinite() { 0.0 } else { v.powf(e) };

    // statistics: |∇f|^p, |∇g|^q, ‖f''‖^p, ‖g''‖^q, ‖f''‖², plus running maxima
    let stats = crate::montecarlo::run_chunks(
        opts.samples,
        opts.seed,
        |rng, len, acc: &mut (Vec<Welford>, Vec<f64>)| {
            acc.0.resize(5, Welford::default());
            acc.1.resize(4, 0.0);
            let mut x = vec![0.0; n];
            let mut gr = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            for _ in 0..len {
                fill_sphere(rng, &mut x);
                df.gradient(&x, &mut gr);
                let gf = dot(&gr, &gr).sqrt();
                df.hessian(&x, &mut h);
                let hf2 = dot(&h, &h);
                dg.gradient(&x, &mut gr);
                let gg = dot(&gr, &gr).sqrt();
                dg.hessian(&x, &mut h);
                let hg = dot(&h, &h).sqrt();
                let hf = hf2.sqrt();
                for (k, v) in [pw(gf, p), pw(gg, q), pw(hf, p), pw(hg, q), hf2].into_iter().enumerate() {
                    acc.0[k].push(v);
                }
                for (k, v) in [gf, gg, hf, hg].into_iter().enumerate() {
                    acc.1[k] = acc.1[k].max(v);
                }
            }
        },
        |total, part| {
            total.0.resize(5, Welford::default());
            total.1.resize(4, 0.0);
            for (t, s) in total.0.iter_mut().zip(&part.0) {
                t.merge(s);
            }
            for (t, s) in total.1.iter_mut().zip(&part.1) {
                *t = t.max(*s);
            }
        },
    );
    let (w, mx) = stats;
    let grad_f = lp_norm(&w[0], mx[0], p);
    let grad_g = lp_norm(&w[1], mx[1], q);
    let hess_f = lp_norm(&w[2], mx[2], p);
    let hess_g = lp_norm(&w[3], mx[3], q);

    let mut out = Vec::new();
    let rhs = c1 * grad_f.value * grad_g.value;
    let se = c1 * (grad_f.std_error * grad_g.value + grad_f.value * grad_g.std_error);
    out.push(
        VerificationReport::inequality("covbounds.first_order", n, cov, rhs, se, opts.samples, opts.seed, opts.atol)
            .with_note(format!("p = {p}, q = {q}")),
    );

    let f_lin = has_linear_component(f)?;
    let g_lin = has_linear_component(g)?;
    if n >= 5 && !f_lin && !g_lin {
        let k = 1.0 / ((n as f64 - 2.0) * (n as f64 - 4.0));
        let a = hess_f.value + 2.0 * grad_f.value;
        let b = hess_g.value + 2.0 * grad_g.value;
        let sa = hess_f.std_error + 2.0 * grad_f.std_error;
        let sb = hess_g.std_error + 2.0 * grad_g.std_error;
        out.push(VerificationReport::inequality(
            "covbounds.second_order",
            n,
            cov,
            k * a * b,
            k * (sa * b + a * sb),
            opts.samples,
            opts.seed,
            opts.atol,
        ));
    } else {
        out[0].notes.push("second-order bound not applicable (needs n >= 5 and no linear part)".into());
    }
    if !f_lin {
        let var = sphere_covariance(f, f)?;
        let k = 1.0 / (2.0 * n as f64 * (n as f64 + 2.0));
        out.push(VerificationReport::inequality(
            "covbounds.hessian_variance",
            n,
            var,
            k * w[4].mean,
            k * w[4].std_error(),
            opts.samples,
            opts.seed,
            opts.atol,
        ));
    }
    Ok(out)
}

/// Semigroup identities: the spectral sum, the time integral of
/// `E⟨∇_S f, ∇_S P_t g⟩`, and both second-order forms, against a Monte
/// Carlo covariance.
pub fn check_semigroup_identity(f: &Polynomial, g: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(f, g)?;
    if n < 3 {
        return out_of_scope(format!("the semigroup identity requires n >= 3 (it fails on the circle), got n = {n}"));
    }
    let (ef, eg) = (harmonic_decompose(f)?, harmonic_decompose(g)?);
    let first = semigroup_covariance(&ef, &eg, TIME_QUAD)?;
    let second = second_order_semigroup_covariance(&ef, &eg, TIME_QUAD)?;
    let (mf, mg) = (ef.mean(), eg.mean());
    let st = mc_means(opts.samples, opts.seed, 1, |rng, out| {
        let mut x = vec![0.0; n];
        fill_sphere(rng, &mut x);
        out[0] = (f.eval(&x) - mf) * (g.eval(&x) - mg);
    });
    let spectral = first.spectral;
    let scale = spectral.abs().max(1.0);
    let spread = [first.integrated, second.laplacian_form, second.bilaplacian_form]
        .iter()
        .map(|v| (v - spectral).abs())
        .fold(0.0, f64::max);
    Ok(VerificationReport::equality("semigroup", n, spectral, st[0].mean, st[0].std_error(), opts.samples, opts.seed, opts.atol)
        .with_note(format!(
            "integrated {}, laplacian form {}, bilaplacian form {}",
            first.integrated, second.laplacian_form, second.bilaplacian_form
        ))
        .require(spread <= 1e-10 * scale, format!("deterministic paths differ by {spread}")))
}

/// Circle identity with the exact density:
/// `cov(f,g) = (2π)^{-2} ∬ ⟨∇_S f(e^{it}), ∇_S g(e^{is})⟩ ψ(cos(t-s)) dt ds`,
/// by quadrature with panels broken where ψ∘cos is not smooth.
pub fn check_circle(f: &Polynomial, g: &Polynomial, opts: &CheckOptions) -> Result<VerificationReport> {
    let n = same_dimension(f, g)?;
    if n != 2 {
        return invalid(format!("the circle identity is stated for n = 2, got {n}"));
    }
    let lhs = sphere_covariance(f, g)?;
    let (df, dg) = (SphereDerivatives::new(f), SphereDerivatives::new(g));
    let gl = GaussLegendre::new(48);
    let m = 96;
    let mut err = None;
    let mut rhs = 0.0;
    // periodic trapezoid in t; for each t two smooth panels in s
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let x = [t.cos(), t.sin()];
        let mut gx = [0.0; 2];
        df.gradient(&x, &mut gx);
        let mut inner = 0.0;
        for (a, b) in [(t - PI, t), (t, t + PI)] {
            inner += gl.integrate(
                |s| {
                    let y = [s.cos(), s.sin()];
                    let mut gy = [0.0; 2];
                    dg.gradient(&y, &mut gy);
                    match psi_circle_exact((t - s).cos().clamp(-1.0, 1.0)) {
                        Ok(psi) => dot(&gx, &gy) * psi,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    }
                },
                a,
                b,
            );
        }
        rhs += inner * 2.0 * PI / m as f64;
    }
    if let Some(e) = err {
        return Err(e);
    }
    rhs /= 4.0 * PI * PI;
    Ok(VerificationReport::equality("circle", 2, lhs, rhs, 0.0, 0, opts.seed, opts.atol))
}

/// Periodic identity for `u(x) = f(cos 2πx, sin 2πx)` and the same for `g`,
/// with mixing density `Q(|x-y|) + c - 1/24`.
pub fn check_periodic(f: &Polynomial, g: &Polynomial, c: f64, opts: &CheckOptions) -> Result<VerificationReport> {
    let u = TrigPolynomial::from_circle_polynomial(f, 1.0)?;
    let v = TrigPolynomial::from_circle_polynomial(g, 1.0)?;
    periodic_covariance_check(&u, &v, c, opts.atol)
}

/// Entry of the identity registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityInfo {
    pub id: &'static str,
    pub summary: &'static str,
}

pub const IDENTITIES: [IdentityInfo; 9] = [
    IdentityInfo { id: "gauss1", summary: "Gaussian covariance via the mixing measure pi_n" },
    IdentityInfo { id: "gauss2", summary: "Gaussian second-order covariance via kappa_n" },
    IdentityInfo { id: "sphere1", summary: "spherical covariance via c_n and mu_n (n >= 2)" },
    IdentityInfo { id: "sphere2", summary: "spherical second-order covariance via the D operator (n >= 5)" },
    IdentityInfo { id: "poincare", summary: "Poincare-type inequality Var <= c_n E|grad f|^2" },
    IdentityInfo { id: "covbounds", summary: "L^p covariance bounds of first and second order" },
    IdentityInfo { id: "semigroup", summary: "heat-semigroup covariance identities (n >= 3)" },
    IdentityInfo { id: "circle", summary: "circle identity with the exact density (n = 2)" },
    IdentityInfo { id: "periodic", summary: "periodic identity with the kernel Q (n = 2 input)" },
];

/// Everything a registry check may need.
#[derive(Debug, Clone)]
pub struct CheckRequest {
    pub f: Polynomial,
    pub g: Polynomial,
    pub options: CheckOptions,
    /// Exponent for `covbounds`.
    pub p: f64,
    /// Marginal constant for `periodic`.
    pub c: f64,
}

pub fn run_identity(id: &str, req: &CheckRequest) -> Result<Vec<VerificationReport>> {
    let (f, g, o) = (&req.f, &req.g, &req.options);
    Ok(match id {
        "gauss1" => vec![check_gauss_first(f, g, o)?],
        "gauss2" => vec![check_gauss_second(f, g, o)?],
        "sphere1" => vec![check_sphere_first(f, g, o)?],
        "sphere2" => vec![check_sphere_second(f, g, o)?],
        "poincare" => vec![check_poincare(f, o)?],
        "covbounds" => check_covariance_bounds(f, g, req.p, o)?,
        "semigroup" => vec![check_semigroup_identity(f, g, o)?],
        "circle" => vec![check_circle(f, g, o)?],
        "periodic" => vec![check_periodic(f, g, req.c, o)?],
        other => return invalid(format!("unknown identity '{other}'")),
    })
}
