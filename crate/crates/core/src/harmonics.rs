//! Spherical harmonic decomposition of polynomials and the heat semigroup.
//!
//! Each homogeneous layer `P` of degree `d` splits as `P = h + |x|² Q` with
//! `h` harmonic, using the projection
//!
//! `h = Σ_j (-1)^j |x|^{2j} Δ^j P / (2^j j! Π_{i<j} (n + 2d - 4 - 2i))`.
//!
//! `Q` (degree `d - 2`) is split the same way. On the sphere `|x|² = 1`, so
//! the pieces land in degrees `d, d-2, ...`. All of this runs in exact
//! rational arithmetic; components are stored with rational coefficients.
//!
//! Time integrals in the semigroup identities are evaluated numerically on
//! a composite Gauss–Legendre rule, with integrands built from exact sphere
//! means of polynomial expressions (carré du champ, polynomial Δ_S), so the
//! numerical path does not reuse the spectral shortcut it is compared with.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, out_of_scope, Error, Result};
use crate::montecarlo::{fill_sphere, mc_mean};
use crate::polynomial::{Coefficient, Polynomial};
use crate::quadrature::GaussLegendre;
use crate::sphere::{dot, SphereDerivatives, SpherePoint};

type Exact = Polynomial<BigRational>;

/// Eigenvalue `d(n + d - 2)` of `-Δ_S` on degree-`d` harmonics.
pub fn eigenvalue(n: usize, d: u32) -> f64 {
    d as f64 * (n as f64 + d as f64 - 2.0)
}

/// A function on S^{n-1} as a finite sum of harmonic components.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicExpansion {
    n: usize,
    components: BTreeMap<u32, Exact>,
}

impl HarmonicExpansion {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.components.keys().copied()
    }

    /// Exact component of degree `d` (zero if absent).
    pub fn exact_component(&self, d: u32) -> Exact {
        self.components.get(&d).cloned().unwrap_or_else(|| Polynomial::zero(self.n))
    }

    pub fn component(&self, d: u32) -> Polynomial {
        self.exact_component(d).to_f64()
    }

    pub fn components(&self) -> impl Iterator<Item = (u32, &Exact)> {
        self.components.iter().map(|(d, p)| (*d, p))
    }

    /// Sum of components, as an ambient polynomial.
    pub fn to_polynomial(&self) -> Polynomial {
        self.exact_sum().to_f64()
    }

    pub fn exact_sum(&self) -> Exact {
        self.components.values().fold(Polynomial::zero(self.n), |acc, p| &acc + p)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.components.values().map(|p| p.eval(x)).sum()
    }

    /// σ-mean, i.e. the degree-0 component.
    pub fn mean(&self) -> f64 {
        self.exact_component(0).to_f64().eval(&vec![0.0; self.n])
    }

    /// True when every component has identically zero Euclidean Laplacian.
    pub fn is_harmonic(&self) -> bool {
        self.components.values().all(|p| p.laplacian().is_zero())
    }

    fn map_components(&self, mut scale: impl FnMut(u32) -> BigRational) -> Self {
        let mut components = BTreeMap::new();
        for (&d, p) in &self.components {
            let s = scale(d);
            let q = p.scale(&s);
            if !q.is_zero() {
                components.insert(d, q);
            }
        }
        HarmonicExpansion { n: self.n, components }
    }

    /// JSON document `{n, components: [{degree, polynomial}]}`.
    pub fn to_document(&self) -> ExpansionDocument {
        ExpansionDocument {
            n: self.n,
            components: self
                .components
                .iter()
                .map(|(&degree, p)| ComponentDocument { degree, polynomial: p.to_f64().to_string() })
                .collect(),
        }
    }

    /// Rebuild from a document, checking harmonicity of each component.
    pub fn from_document(doc: &ExpansionDocument) -> Result<Self> {
        let mut components = BTreeMap::new();
        for c in &doc.components {
            let p = Polynomial::parse(&c.polynomial, doc.n)?.to_rational()?;
            if p.is_zero() {
                continue;
            }
            let parts = p.homogeneous_parts();
            if parts.len() != 1 || !parts.contains_key(&c.degree) {
                return invalid(format!("component of degree {} is not homogeneous of that degree", c.degree));
            }
            if !p.laplacian().is_zero() {
                return invalid(format!("component of degree {} is not harmonic", c.degree));
            }
            components.insert(c.degree, p);
        }
        Ok(HarmonicExpansion { n: doc.n, components })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDocument {
    pub n: usize,
    pub components: Vec<ComponentDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDocument {
    pub degree: u32,
    pub polynomial: String,
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

/// Split a homogeneous polynomial of degree `d` into `(h, Q)` with
/// `P = h + |x|² Q` and `Δh = 0`.
fn split_layer(p: &Exact, d: u32) -> (Exact, Exact) {
    let n = p.dimension();
    let r2 = Polynomial::norm_squared(n);
    let mut h = p.clone();
    let mut q = Polynomial::zero(n);
    let mut lap = p.clone();
    let mut coef = BigRational::one();
    let mut r_pow = Polynomial::constant(n, BigRational::one()); // |x|^{2(j-1)}
    let mut j: u32 = 0;
    loop {
        lap = lap.laplacian();
        if lap.is_zero() {
            break;
        }
        j += 1;
        let denom = 2 * j as i64 * (n as i64 + 2 * d as i64 - 4 - 2 * (j as i64 - 1));
        coef = -coef * BigRational::from_ratio(1, denom as u64);
        let term = (&r_pow * &lap).scale(&coef);
        q = &q - &term;
        h = &h + &(&r2 * &term);
        r_pow = &r_pow * &r2;
    }
    (h, q)
}

/// Harmonic decomposition of `f` restricted to the sphere.
pub fn harmonic_decompose(f: &Polynomial) -> Result<HarmonicExpansion> {
    let n = f.dimension();
    if n < 2 {
        return invalid("harmonic decomposition needs n >= 2");
    }
    let exact = f.to_rational()?;
    let mut components: BTreeMap<u32, Exact> = BTreeMap::new();
    for (d, layer) in exact.homogeneous_parts() {
        let mut p = layer;
        let mut deg = d;
        while !p.is_zero() {
            let (h, q) = split_layer(&p, deg);
            if !h.is_zero() {
                let entry = components.entry(deg).or_insert_with(|| Polynomial::zero(n));
                *entry = &*entry + &h;
            }
            if deg < 2 {
                debug_assert!(q.is_zero());
                break;
            }
            p = q;
            deg -= 2;
        }
    }
    components.retain(|_, p| !p.is_zero());
    let e = HarmonicExpansion { n, components };
    if !e.is_harmonic() {
        return Err(Error::Numerical("harmonic projection left a non-harmonic remainder".into()));
    }
    Ok(e)
}

/// `Δ_S` on an expansion: component `d` scaled by `-d(n+d-2)`.
pub fn apply_laplacian(e: &HarmonicExpansion) -> HarmonicExpansion {
    let n = e.n as i64;
    e.map_components(|d| {
        let d = d as i64;
        BigRational::from_ratio(-d * (n + d - 2), 1)
    })
}

/// `P_t` on an expansion: component `d` scaled by `e^{-d(n+d-2)t}`.
pub fn heat_semigroup(e: &HarmonicExpansion, t: f64) -> Result<HarmonicExpansion> {
    if !(t >= 0.0) {
        return invalid(format!("semigroup time must be non-negative, got {t}"));
    }
    if t.is_infinite() {
        return Ok(e.map_components(|d| if d == 0 { BigRational::one() } else { BigRational::zero() }));
    }
    let mut scales = BTreeMap::new();
    for d in e.degrees() {
        scales.insert(d, rational((-eigenvalue(e.n, d) * t).exp())?);
    }
    Ok(e.map_components(|d| scales[&d].clone()))
}

/// `Δ_S u` on the sphere as an ambient polynomial: on the homogeneous part
/// of degree `k` it acts as `Δu - k(n+k-2)u`.
pub fn sphere_laplacian_polynomial<T: Coefficient>(u: &Polynomial<T>) -> Polynomial<T> {
    let n = u.dimension() as i64;
    let mut out = u.laplacian();
    for (k, layer) in u.homogeneous_parts() {
        let k = k as i64;
        out = &out - &layer.scale(&T::from_ratio(k * (n + k - 2), 1));
    }
    out
}

/// `⟨∇_S f, ∇_S g⟩` on the sphere as an ambient polynomial:
/// `⟨∇f, ∇g⟩ - (x·∇f)(x·∇g)`.
pub fn carre_du_champ<T: Coefficient>(f: &Polynomial<T>, g: &Polynomial<T>) -> Polynomial<T> {
    let n = f.dimension();
    let mut out = Polynomial::zero(n);
    for i in 0..n {
        out = &out + &(&f.derivative(i) * &g.derivative(i));
    }
    &out - &(&euler(f) * &euler(g))
}

/// Euler operator `x·∇u`: multiplies the degree-`k` layer by `k`.
fn euler<T: Coefficient>(u: &Polynomial<T>) -> Polynomial<T> {
    let mut out = Polynomial::zero(u.dimension());
    for (k, layer) in u.homogeneous_parts() {
        out = &out + &layer.scale(&T::from_ratio(k as i64, 1));
    }
    out
}

/// `∫_0^∞ φ(t) dt` for `φ` a combination of `t^k e^{-μt}` with rates in
/// `[rate_min, rate_max]`: Gauss–Legendre of order `order` on geometrically
/// growing panels.
fn integrate_time(mut phi: impl FnMut(f64) -> f64, rate_min: f64, rate_max: f64, order: usize) -> f64 {
    let gl = GaussLegendre::new(order.max(2));
    let mut a = 0.0;
    let mut h = 0.25 / rate_max;
    let t_end = 60.0 / rate_min;
    let mut sum = 0.0;
    while a < t_end {
        sum += gl.integrate(&mut phi, a, a + h);
        a += h;
        h *= 2.0;
    }
    sum
}

/// The two evaluations of a semigroup identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupValue {
    /// Closed-form spectral sum.
    pub spectral: f64,
    /// Numerical time integral of the exact space integrand.
    pub integrated: f64,
}

fn check_pair(f: &HarmonicExpansion, g: &HarmonicExpansion) -> Result<()> {
    if f.n != g.n {
        return Err(Error::DimensionMismatch { expected: f.n, got: g.n });
    }
    if f.n < 3 {
        return out_of_scope(format!(
            "the semigroup covariance identity needs n >= 3 (fails on the circle), got n = {}",
            f.n
        ));
    }
    Ok(())
}

fn rate_range(n: usize, degrees: impl Iterator<Item = u32>) -> Option<(f64, f64)> {
    let rates: Vec<f64> = degrees.filter(|&d| d > 0).map(|d| eigenvalue(n, d)).collect();
    if rates.is_empty() {
        return None;
    }
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    Some((lo, hi))
}

/// `Σ_{d≥1} ⟨f_d, g_d⟩`, exact.
pub fn spectral_covariance(f: &HarmonicExpansion, g: &HarmonicExpansion) -> f64 {
    let mut acc = BigRational::zero();
    for (&d, fd) in &f.components {
        if d == 0 {
            continue;
        }
        if let Some(gd) = g.components.get(&d) {
            acc += (fd * gd).sphere_mean();
        }
    }
    acc.to_f64()
}

/// `cov(f, g) = ∫_0^∞ ∫ ⟨∇_S f, ∇_S P_t g⟩ dσ dt`.
pub fn semigroup_covariance(
    f: &HarmonicExpansion,
    g: &HarmonicExpansion,
    quad_points: usize,
) -> Result<SemigroupValue> {
    check_pair(f, g)?;
    let spectral = spectral_covariance(f, g);
    let fsum = f.exact_sum();
    // E⟨∇_S f, ∇_S g_d⟩ for each degree d of g.
    let weights: Vec<(f64, f64)> = g
        .components
        .iter()
        .filter(|(&d, _)| d > 0)
        .map(|(&d, gd)| (eigenvalue(g.n, d), carre_du_champ(&fsum, gd).sphere_mean().to_f64()))
        .collect();
    let integrated = match rate_range(g.n, g.degrees()) {
        None => 0.0,
        Some((lo, hi)) => integrate_time(
            |t| weights.iter().map(|(l, m)| (-l * t).exp() * m).sum(),
            lo,
            hi,
            quad_points,
        ),
    };
    Ok(SemigroupValue { spectral, integrated })
}

/// Second-order representation evaluated both as
/// `∫_0^∞ t ∫ Δ_S P_t f · Δ_S g dσ dt` and as `∫_0^∞ t ∫ P_t f · Δ_S² g dσ dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderValue {
    pub spectral: f64,
    pub laplacian_form: f64,
    pub bilaplacian_form: f64,
}

pub fn second_order_semigroup_covariance(
    f: &HarmonicExpansion,
    g: &HarmonicExpansion,
    quad_points: usize,
) -> Result<SecondOrderValue> {
    check_pair(f, g)?;
    let spectral = spectral_covariance(f, g);
    let gsum = g.exact_sum();
    let lg = sphere_laplacian_polynomial(&gsum);
    let llg = sphere_laplacian_polynomial(&lg);
    let mut lap_w = Vec::new();
    let mut bilap_w = Vec::new();
    for (&d, fd) in &f.components {
        if d == 0 {
            continue;
        }
        let l = eigenvalue(f.n, d);
        let lfd = sphere_laplacian_polynomial(fd);
        lap_w.push((l, (&lfd * &lg).sphere_mean().to_f64()));
        bilap_w.push((l, (fd * &llg).sphere_mean().to_f64()));
    }
    let (laplacian_form, bilaplacian_form) = match rate_range(f.n, f.degrees()) {
        None => (0.0, 0.0),
        Some((lo, hi)) => {
            let eval = |w: &[(f64, f64)]| {
                integrate_time(|t| w.iter().map(|(l, m)| t * (-l * t).exp() * m).sum(), lo, hi, quad_points)
            };
            (eval(&lap_w), eval(&bilap_w))
        }
    };
    Ok(SecondOrderValue { spectral, laplacian_form, bilaplacian_form })
}

/// `Var(f) = 2 ∫_0^∞ ∫ |∇_S P_t f|² dσ dt`, spectral and integrated.
pub fn semigroup_variance(f: &HarmonicExpansion, quad_points: usize) -> Result<SemigroupValue> {
    check_pair(f, f)?;
    let spectral = spectral_covariance(f, f);
    let mut terms = Vec::new();
    for (&d1, p1) in &f.components {
        for (&d2, p2) in &f.components {
            if d1 == 0 || d2 == 0 {
                continue;
            }
            let m = carre_du_champ(p1, p2).sphere_mean().to_f64();
            terms.push((eigenvalue(f.n, d1) + eigenvalue(f.n, d2), m));
        }
    }
    let integrated = match rate_range(f.n, f.degrees()) {
        None => 0.0,
        Some((lo, hi)) => {
            2.0 * integrate_time(
                |t| terms.iter().map(|(r, m)| (-r * t).exp() * m).sum(),
                2.0 * lo,
                2.0 * hi,
                quad_points,
            )
        }
    };
    Ok(SemigroupValue { spectral, integrated })
}

/// Truncation degree of the zonal heat kernel.
pub const KERNEL_DEGREE: u32 = 40;

/// Dimension of the degree-`d` harmonics on S^{n-1}.
fn harmonic_dimension(n: usize, d: u32) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let (n, d) = (n as f64, d as f64);
    // (2d+n-2)/(d+n-2) · C(d+n-2, d)
    let lc = statrs::function::factorial::ln_binomial((d + n - 2.0) as u64, d as u64);
    (2.0 * d + n - 2.0) / (d + n - 2.0) * lc.exp()
}

/// Normalized Gegenbauer values `C_d^ν(α)/C_d^ν(1)`, `ν = (n-2)/2`, for
/// `d = 0..=deg`.
fn zonal_values(n: usize, alpha: f64, deg: u32) -> Vec<f64> {
    let nu = (n as f64 - 2.0) / 2.0;
    let mut c = vec![0.0; deg as usize + 1];
    let mut c1 = vec![0.0; deg as usize + 1];
    c[0] = 1.0;
    c1[0] = 1.0;
    if deg >= 1 {
        c[1] = 2.0 * nu * alpha;
        c1[1] = 2.0 * nu;
    }
    for k in 2..=deg as usize {
        let kf = k as f64;
        let a = 2.0 * (kf + nu - 1.0);
        let b = kf + 2.0 * nu - 2.0;
        c[k] = (a * alpha * c[k - 1] - b * c[k - 2]) / kf;
        c1[k] = (a * c1[k - 1] - b * c1[k - 2]) / kf;
    }
    c.iter().zip(&c1).map(|(v, w)| v / w).collect()
}

/// Zonal heat kernel `p_t(⟨θ,θ'⟩)` with respect to σ, truncated at
/// [`KERNEL_DEGREE`]. Requires n ≥ 3.
pub fn heat_kernel(n: usize, t: f64, alpha: f64) -> f64 {
    let z = zonal_values(n, alpha, KERNEL_DEGREE);
    (0..=KERNEL_DEGREE)
        .map(|d| (-eigenvalue(n, d) * t).exp() * harmonic_dimension(n, d) * z[d as usize])
        .sum()
}

/// Bound on the truncated kernel tail `Σ_{d > 40} e^{-λ_d t} N(n, d)`.
pub fn heat_kernel_tail_bound(n: usize, t: f64) -> f64 {
    (KERNEL_DEGREE + 1..KERNEL_DEGREE + 400)
        .map(|d| (-eigenvalue(n, d) * t).exp() * harmonic_dimension(n, d))
        .sum()
}

/// One pointwise gradient-commutation check `|∇_S P_t f(θ)| ≤ e^{-(n-2)t} P_t|∇_S f|(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBound {
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
    pub tail_bound: f64,
    pub pass: bool,
}

pub fn gradient_bound_check(
    f: &Polynomial,
    theta: &SpherePoint,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<GradientBound> {
    let n = f.dimension();
    if n < 3 {
        return out_of_scope("the gradient bound is checked for n >= 3");
    }
    if theta.dimension() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta.dimension() });
    }
    if !(t > 0.0) {
        return invalid("gradient bound check needs t > 0");
    }
    let e = harmonic_decompose(f)?;
    let pt = heat_semigroup(&e, t)?.to_polynomial();
    let mut g = vec![0.0; n];
    SphereDerivatives::new(&pt).gradient(theta.coords(), &mut g);
    let lhs = dot(&g, &g).sqrt();
    let df = SphereDerivatives::new(f);
    let x = theta.coords().to_vec();
    let w = mc_mean(samples, seed, |rng| {
        let mut y = vec![0.0; n];
        fill_sphere(rng, &mut y);
        let mut gy = vec![0.0; n];
        df.gradient(&y, &mut gy);
        heat_kernel(n, t, dot(&x, &y)) * dot(&gy, &gy).sqrt()
    });
    let decay = (-(n as f64 - 2.0) * t).exp();
    let rhs = decay * w.mean;
    let std_error = decay * w.std_error();
    let tail_bound = heat_kernel_tail_bound(n, t);
    Ok(GradientBound { lhs, rhs, std_error, tail_bound, pass: lhs <= rhs + 4.0 * std_error })
}
