//! Differential calculus on the unit sphere S^{n-1} for polynomial test
//! functions, uniform sampling, and the law of the inner product of two
//! independent uniform points.
//!
//! The polynomial itself serves as the ambient extension: with `u = f`,
//!
//! * `∇_S f(θ) = ∇u - ⟨∇u, θ⟩ θ`
//! * `f''_S(θ) = P (u'' - ⟨∇u, θ⟩ I) P`, `P = I - θθᵀ`
//! * `Δ_S f(θ) = Δu - (n-1)⟨∇u, θ⟩ - ⟨u''θ, θ⟩`
//! * `Df(θ) = f''_S(θ) - 2 ∇_S f(θ) ⊗ θ`, with `v ⊗ w = (vwᵀ + wvᵀ)/2`.

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::montecarlo::{chunk_rng, fill_sphere, CHUNK};
use crate::polynomial::Polynomial;

const NORM_TOL: f64 = 1e-12;

/// A point of S^{n-1}. Construction renormalizes; the stored norm is 1 to
/// within rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return invalid("sphere point needs finite coordinates");
        }
        let r = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 {
            return invalid("cannot normalize the zero vector");
        }
        let mut p = SpherePoint { coords };
        if (r - 1.0).abs() > NORM_TOL {
            p.coords.iter_mut().for_each(|c| *c /= r);
        }
        Ok(p)
    }

    /// Basis vector `e_{i+1}` in dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        SpherePoint { coords: c }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.coords, &other.coords)
    }
}

/// Tangent data at a basepoint: a vector (order 1) or a symmetric matrix
/// (order 2, stored row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTensor {
    basepoint: SpherePoint,
    values: TensorValues,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorValues {
    Vector(Vec<f64>),
    Matrix(Vec<f64>),
}

impl TangentTensor {
    pub fn basepoint(&self) -> &SpherePoint {
        &self.basepoint
    }

    pub fn order(&self) -> u8 {
        match self.values {
            TensorValues::Vector(_) => 1,
            TensorValues::Matrix(_) => 2,
        }
    }

    pub fn values(&self) -> &TensorValues {
        &self.values
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match &self.values {
            TensorValues::Vector(v) => Some(v),
            TensorValues::Matrix(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&[f64]> {
        match &self.values {
            TensorValues::Matrix(m) => Some(m),
            TensorValues::Vector(_) => None,
        }
    }

    /// Matrix entry `(i, j)`; panics for order 1.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.basepoint.dimension();
        self.matrix().expect("order-2 tensor")[i * n + j]
    }

    /// Euclidean norm (order 1) or Hilbert–Schmidt norm (order 2).
    pub fn norm(&self) -> f64 {
        match &self.values {
            TensorValues::Vector(v) | TensorValues::Matrix(v) => dot(v, v).sqrt(),
        }
    }

    pub fn trace(&self) -> f64 {
        let n = self.basepoint.dimension();
        match &self.values {
            TensorValues::Matrix(m) => (0..n).map(|i| m[i * n + i]).sum(),
            TensorValues::Vector(_) => f64::NAN,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed Euclidean derivatives of a polynomial for repeated
/// evaluation of the spherical operators.
#[derive(Debug, Clone)]
pub struct SphereDerivatives {
    n: usize,
    f: Polynomial,
    grad: Vec<Polynomial>,
    // upper triangle, row-major, i <= j
    hess: Vec<Polynomial>,
    lap: Polynomial,
}

impl SphereDerivatives {
    pub fn new(f: &Polynomial) -> Self {
        let n = f.dimension();
        let grad = f.gradient();
        let mut hess = Vec::with_capacity(n * (n + 1) / 2);
        for (i, gi) in grad.iter().enumerate() {
            for j in i..n {
                hess.push(gi.derivative(j));
            }
        }
        SphereDerivatives { n, f: f.clone(), grad, hess, lap: f.laplacian() }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.f
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }

    /// Euclidean gradient.
    pub fn euclidean_gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.grad) {
            *o = g.eval(x);
        }
    }

    /// Euclidean Hessian, full row-major.
    pub fn euclidean_hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let v = self.hess[k].eval(x);
                out[i * n + j] = v;
                out[j * n + i] = v;
                k += 1;
            }
        }
    }

    /// Tangential gradient at the unit vector `x`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.euclidean_gradient(x, out);
        let r = dot(out, x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= r * xi;
        }
    }

    /// Spherical Hessian `P(u'' - ⟨∇u,x⟩I)P` at the unit vector `x`.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut g = vec![0.0; n];
        self.euclidean_gradient(x, &mut g);
        let r = dot(&g, x);
        self.euclidean_hessian(x, out);
        for i in 0..n {
            out[i * n + i] -= r;
        }
        project_both_sides(out, x);
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut g = vec![0.0; n];
        self.euclidean_gradient(x, &mut g);
        let mut h = vec![0.0; n * n];
        self.euclidean_hessian(x, &mut h);
        let mut hxx = 0.0;
        for i in 0..n {
            hxx += x[i] * dot(&h[i * n..(i + 1) * n], x);
        }
        self.lap.eval(x) - (n as f64 - 1.0) * dot(&g, x) - hxx
    }

    /// `Df = f''_S - 2 ∇_S f ⊗ x` at the unit vector `x`.
    pub fn d_operator(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        self.hessian(x, out);
        let mut g = vec![0.0; n];
        self.gradient(x, &mut g);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] -= g[i] * x[j] + x[i] * g[j];
            }
        }
    }
}

/// Replace `m` by `P m P` with `P = I - xxᵀ`.
fn project_both_sides(m: &mut [f64], x: &[f64]) {
    let n = x.len();
    // m x
    let mx: Vec<f64> = (0..n).map(|i| dot(&m[i * n..(i + 1) * n], x)).collect();
    let xmx = dot(&mx, x);
    for i in 0..n {
        for j in 0..n {
            // (P m P)_ij = m_ij - x_i (mx)_j - (mx)_i x_j + x_i x_j xmx  (m symmetric)
            m[i * n + j] += -x[i] * mx[j] - mx[i] * x[j] + x[i] * x[j] * xmx;
        }
    }
}

fn check_dims(f: &Polynomial, theta: &SpherePoint) -> Result<()> {
    if f.dimension() != theta.dimension() {
        return Err(Error::DimensionMismatch { expected: f.dimension(), got: theta.dimension() });
    }
    Ok(())
}

pub fn spherical_gradient(f: &Polynomial, theta: &SpherePoint) -> Result<TangentTensor> {
    check_dims(f, theta)?;
    let d = SphereDerivatives::new(f);
    let mut v = vec![0.0; f.dimension()];
    d.gradient(theta.coords(), &mut v);
    Ok(TangentTensor { basepoint: theta.clone(), values: TensorValues::Vector(v) })
}

pub fn spherical_hessian(f: &Polynomial, theta: &SpherePoint) -> Result<TangentTensor> {
    check_dims(f, theta)?;
    let n = f.dimension();
    let d = SphereDerivatives::new(f);
    let mut m = vec![0.0; n * n];
    d.hessian(theta.coords(), &mut m);
    Ok(TangentTensor { basepoint: theta.clone(), values: TensorValues::Matrix(m) })
}

pub fn spherical_laplacian(f: &Polynomial, theta: &SpherePoint) -> Result<f64> {
    check_dims(f, theta)?;
    Ok(SphereDerivatives::new(f).laplacian(theta.coords()))
}

pub fn d_operator(f: &Polynomial, theta: &SpherePoint) -> Result<TangentTensor> {
    check_dims(f, theta)?;
    let n = f.dimension();
    let d = SphereDerivatives::new(f);
    let mut m = vec![0.0; n * n];
    d.d_operator(theta.coords(), &mut m);
    Ok(TangentTensor { basepoint: theta.clone(), values: TensorValues::Matrix(m) })
}

/// `count` i.i.d. uniform points on S^{n-1}.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if n < 2 {
        return invalid(format!("sphere sampling needs n >= 2, got {n}"));
    }
    let mut out = Vec::with_capacity(count);
    for c in 0..count.div_ceil(CHUNK) {
        let mut rng = chunk_rng(seed, c as u64);
        let len = CHUNK.min(count - c * CHUNK);
        for _ in 0..len {
            let mut x = vec![0.0; n];
            fill_sphere(&mut rng, &mut x);
            out.push(SpherePoint { coords: x });
        }
    }
    Ok(out)
}

/// Density of `⟨θ, θ'⟩` for independent uniform θ, θ' on S^{n-1}:
/// `Γ(n/2) / (√π Γ((n-1)/2)) (1-α²)^{(n-3)/2}`.
pub fn inner_product_density(n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return invalid(format!("inner product law needs n >= 2, got {n}"));
    }
    if !(alpha.abs() <= 1.0) {
        return invalid(format!("|alpha| must be at most 1, got {alpha}"));
    }
    Ok(inner_product_density_unchecked(n, alpha))
}

pub(crate) fn inner_product_norm(n: usize) -> f64 {
    let nf = n as f64;
    (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

pub(crate) fn inner_product_density_unchecked(n: usize, alpha: f64) -> f64 {
    let e = (n as f64 - 3.0) / 2.0;
    if e == 0.0 {
        return inner_product_norm(n);
    }
    let s = (1.0 - alpha) * (1.0 + alpha);
    inner_product_norm(n) * s.powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{chunk_rng, fill_sphere};
    use crate::quadrature::{adaptive, tanh_sinh};

    fn p(s: &str, n: usize) -> Polynomial {
        Polynomial::parse(s, n).unwrap()
    }

    fn random_point(n: usize, seed: u64) -> SpherePoint {
        let mut rng = chunk_rng(seed, 0);
        let mut x = vec![0.0; n];
        fill_sphere(&mut rng, &mut x);
        SpherePoint::new(x).unwrap()
    }

    /// Point reached from θ by moving arc length `s` along the unit tangent `e`.
    fn geodesic(theta: &[f64], e: &[f64], s: f64) -> Vec<f64> {
        theta.iter().zip(e).map(|(t, v)| t * s.cos() + v * s.sin()).collect()
    }

    #[test]
    fn linear_function_gradient_and_hessian() {
        let n = 4;
        let v = [0.3, -1.2, 0.5, 2.0];
        let f = p("0.3*x1 - 1.2*x2 + 0.5*x3 + 2*x4", n);
        let th = random_point(n, 3);
        let vt = dot(&v, th.coords());
        let g = spherical_gradient(&f, &th).unwrap();
        for (i, vi) in v.iter().enumerate() {
            assert!((g.vector().unwrap()[i] - (vi - vt * th.coords()[i])).abs() < 1e-14);
        }
        let h = spherical_hessian(&f, &th).unwrap();
        for i in 0..n {
            for j in 0..n {
                let pij = if i == j { 1.0 } else { 0.0 } - th.coords()[i] * th.coords()[j];
                assert!((h.entry(i, j) + vt * pij).abs() < 1e-14);
            }
        }
        let axis = SpherePoint::new(v.to_vec()).unwrap();
        assert!(spherical_gradient(&f, &axis).unwrap().norm() < 1e-14);
    }

    #[test]
    fn gradient_of_x1_squared_vanishes_at_e2() {
        let f = p("x1^2", 3);
        let g = spherical_gradient(&f, &SpherePoint::basis(3, 1)).unwrap();
        assert!(g.norm() == 0.0);
        // finite differences along great circles
        let th = random_point(3, 11);
        let gv = spherical_gradient(&f, &th).unwrap();
        let gv = gv.vector().unwrap();
        let e = normalize(gv);
        let h = 1e-5;
        let fd = (f.eval(&geodesic(th.coords(), &e, h)) - f.eval(&geodesic(th.coords(), &e, -h)))
            / (2.0 * h);
        assert!((fd - dot(gv, &e)).abs() < 1e-8);
    }

    fn normalize(v: &[f64]) -> Vec<f64> {
        let r = dot(v, v).sqrt();
        v.iter().map(|x| x / r).collect()
    }

    #[test]
    fn hessian_of_x1x2_at_e3() {
        let f = p("x1*x2", 4);
        let h = spherical_hessian(&f, &SpherePoint::basis(4, 2)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (0, 1) || (i, j) == (1, 0) { 1.0 } else { 0.0 };
                assert_eq!(h.entry(i, j), want);
            }
        }
        // second differences along orthonormal tangent directions e1, e2
        let th = SpherePoint::basis(4, 2);
        let step = 1e-4;
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0, 0.0];
        let mixed: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| (a + b) / 2f64.sqrt()).collect();
        let second = |e: &[f64]| {
            (f.eval(&geodesic(th.coords(), e, step)) - 2.0 * f.eval(th.coords())
                + f.eval(&geodesic(th.coords(), e, -step)))
                / (step * step)
        };
        // along (e1+e2)/√2 the quadratic form is h12 = 1
        assert!((second(&mixed) - 1.0).abs() < 1e-6);
        assert!(second(&e1).abs() < 1e-6);
    }

    #[test]
    fn laplacian_examples() {
        let n = 5;
        let th = random_point(n, 5);
        let l = spherical_laplacian(&p("x1", n), &th).unwrap();
        assert!((l + (n as f64 - 1.0) * th.coords()[0]).abs() < 1e-13);
        let l = spherical_laplacian(&p("x1^2", n), &th).unwrap();
        let t1 = th.coords()[0];
        assert!((l - (2.0 - 2.0 * n as f64 * t1 * t1)).abs() < 1e-13);
        assert_eq!(spherical_laplacian(&p("7", n), &th).unwrap(), 0.0);
    }

    #[test]
    fn d_operator_linear_closed_form() {
        let n = 3;
        let v = [1.0, 2.0, -0.5];
        let f = p("x1 + 2*x2 - 0.5*x3", n);
        let th = random_point(n, 8);
        let x = th.coords();
        let vt = dot(&v, x);
        let d = d_operator(&f, &th).unwrap();
        for i in 0..n {
            for j in 0..n {
                let pij = if i == j { 1.0 } else { 0.0 } - x[i] * x[j];
                let gi = v[i] - vt * x[i];
                let gj = v[j] - vt * x[j];
                let want = -vt * pij - (gi * x[j] + x[i] * gj);
                assert!((d.entry(i, j) - want).abs() < 1e-14);
            }
        }
        assert!(d_operator(&p("3", n), &th).unwrap().norm() == 0.0);
    }

    #[test]
    fn d_operator_matches_hessian_of_zero_homogeneous_extension() {
        // Hessian of x ↦ f(x/|x|) at a unit point, by central differences.
        let n = 4;
        let f = p("x1^3*x2 - 2*x3^2*x4 + x1*x4 + 0.5*x2^2", n);
        for seed in 0..5 {
            let th = random_point(n, 100 + seed);
            let x = th.coords();
            let g = |y: &[f64]| {
                let r = dot(y, y).sqrt();
                let u: Vec<f64> = y.iter().map(|v| v / r).collect();
                f.eval(&u)
            };
            let d = d_operator(&f, &th).unwrap();
            let h = 1e-4;
            for i in 0..n {
                for j in 0..n {
                    let at = |si: f64, sj: f64| {
                        let mut y = x.to_vec();
                        y[i] += si * h;
                        y[j] += sj * h;
                        g(&y)
                    };
                    let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0))
                        / (4.0 * h * h);
                    assert!((fd - d.entry(i, j)).abs() < 1e-5, "{i}{j}: {fd} vs {}", d.entry(i, j));
                }
            }
        }
    }

    #[test]
    fn sampling_moments_and_determinism() {
        let pts = sample_sphere(5, 1_000_000, 42).unwrap();
        let m: f64 = pts.iter().map(|q| q.coords()[0].powi(2)).sum::<f64>() / pts.len() as f64;
        assert!((m - 0.2).abs() < 0.003);
        let pts = sample_sphere(3, 1_000_000, 1).unwrap();
        for i in 0..3 {
            let m: f64 = pts.iter().map(|q| q.coords()[i]).sum::<f64>() / pts.len() as f64;
            assert!(m.abs() < 4e-3);
        }
        assert_eq!(sample_sphere(2, 4, 7).unwrap(), sample_sphere(2, 4, 7).unwrap());
        assert!(sample_sphere(1, 4, 7).is_err());
    }

    #[test]
    fn inner_product_law() {
        assert!((inner_product_density(3, 0.37).unwrap() - 0.5).abs() < 1e-14);
        assert!((inner_product_density(2, 0.0).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!(inner_product_density(4, 1.01).is_err());
        let q = adaptive(|a| inner_product_density(5, a).unwrap(), -1.0, 1.0, 1e-13, 1e-13).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        let q = tanh_sinh(
            |a, dl, dr| inner_product_norm(2) / (dl * dr).sqrt() * (a * 0.0 + 1.0),
            -1.0,
            1.0,
            1e-14,
            1e-12,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial> {
            prop::collection::vec((-3i32..=3, prop::collection::vec(0u32..4, n)), 1..6).prop_map(
                move |ts| {
                    Polynomial::from_terms(n, ts.into_iter().map(|(c, e)| (c as f64, e))).unwrap()
                },
            )
        }

        fn arb_point(n: usize) -> impl Strategy<Value = SpherePoint> {
            prop::collection::vec(-1.0f64..1.0, n)
                .prop_filter("nonzero", |v| dot(v, v) > 1e-3)
                .prop_map(|v| SpherePoint::new(v).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn tangency_kernel_and_trace((f, th) in (2usize..6).prop_flat_map(|n| (arb_poly(n), arb_point(n)))) {
                let g = spherical_gradient(&f, &th).unwrap();
                let scale = 1.0 + g.norm();
                prop_assert!(dot(g.vector().unwrap(), th.coords()).abs() <= 1e-10 * scale);
                let h = spherical_hessian(&f, &th).unwrap();
                let n = th.dimension();
                let m = h.matrix().unwrap();
                let hs = 1.0 + h.norm();
                for i in 0..n {
                    prop_assert!(dot(&m[i*n..(i+1)*n], th.coords()).abs() <= 1e-10 * hs);
                    for j in 0..n {
                        prop_assert!((m[i*n+j] - m[j*n+i]).abs() <= 1e-12 * hs);
                    }
                }
                let l = spherical_laplacian(&f, &th).unwrap();
                prop_assert!((h.trace() - l).abs() <= 1e-10 * hs);
                let d = d_operator(&f, &th).unwrap();
                prop_assert!(d.norm() <= h.norm() + 2.0 * g.norm() + 1e-12);
            }

            #[test]
            fn product_rule_and_carre_du_champ(
                (f, g, th) in (2usize..5).prop_flat_map(|n| (arb_poly(n), arb_poly(n), arb_point(n)))
            ) {
                let fg = &f * &g;
                let a = spherical_gradient(&fg, &th).unwrap();
                let gf = spherical_gradient(&f, &th).unwrap();
                let gg = spherical_gradient(&g, &th).unwrap();
                let fv = f.eval(th.coords());
                let gv = g.eval(th.coords());
                let scale = 1.0 + a.norm() + fv.abs() * gg.norm() + gv.abs() * gf.norm();
                for i in 0..th.dimension() {
                    let rhs = fv * gg.vector().unwrap()[i] + gv * gf.vector().unwrap()[i];
                    prop_assert!((a.vector().unwrap()[i] - rhs).abs() <= 1e-10 * scale);
                }
                let lfg = spherical_laplacian(&fg, &th).unwrap();
                let lf = spherical_laplacian(&f, &th).unwrap();
                let lg = spherical_laplacian(&g, &th).unwrap();
                let gamma = 0.5 * (lfg - fv * lg - gv * lf);
                let ip = dot(gf.vector().unwrap(), gg.vector().unwrap());
                let s2 = 1.0 + lfg.abs() + (fv * lg).abs() + (gv * lf).abs();
                prop_assert!((gamma - ip).abs() <= 1e-9 * s2);
            }
        }
    }
}
