//! Sparse multivariate polynomials with exact differentiation.
//!
//! A [`Polynomial`] stores only non-zero terms, keyed by exponent multi-index,
//! and is generic over its coefficient ring. `f64` is the working type;
//! [`BigRational`] is used where identities must hold exactly (harmonic
//! projection). Every finite `f64` is a dyadic rational, so the conversion
//! [`Polynomial::to_rational`] is lossless.
//!
//! Text form: `3.5*x1^2*x3 - x2`, 1-based variable indices. Products,
//! integer powers, parentheses and division by constants are accepted on
//! input; output is a canonical sum of monomials in descending graded order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

/// Coefficient ring for [`Polynomial`].
pub trait Coefficient:
    Clone
    + fmt::Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_ratio(num: i64, den: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn div_ratio(&self, num: u64, den: u64) -> Self {
        self.clone() * Self::from_ratio(den as i64, num)
    }
}

impl Coefficient for f64 {
    fn from_ratio(num: i64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coefficient for BigRational {
    fn from_ratio(num: i64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exponent multi-index, ordered by total degree and then lexicographically
/// so that `x1` sorts above `x2` among monomials of equal degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Coefficient = f64> {
    n: usize,
    terms: BTreeMap<Monomial, T>,
}

impl<T: Coefficient> Polynomial<T> {
    pub fn zero(n: usize) -> Self {
        Polynomial { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: T) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    /// The coordinate function `x_{i+1}` (0-based index `i`).
    pub fn variable(n: usize, i: usize) -> Self {
        assert!(i < n, "variable index {i} out of range for dimension {n}");
        let mut e = vec![0; n];
        e[i] = 1;
        Self::monomial(T::one(), e)
    }

    pub fn monomial(c: T, exponents: Vec<u32>) -> Self {
        let n = exponents.len();
        let mut p = Self::zero(n);
        p.add_term(Monomial(exponents), c);
        p
    }

    /// `|x|^2 = x_1^2 + ... + x_n^2`.
    pub fn norm_squared(n: usize) -> Self {
        let mut p = Self::zero(n);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 2;
            p.add_term(Monomial(e), T::one());
        }
        p
    }

    /// Build from `(coefficient, exponents)` pairs, collecting like terms.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (T, Vec<u32>)>) -> Result<Self> {
        let mut p = Self::zero(n);
        for (c, e) in terms {
            if e.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: e.len() });
            }
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> T {
        self.terms
            .get(&Monomial(exponents.to_vec()))
            .cloned()
            .unwrap_or_else(T::zero)
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut p = Self::zero(self.n);
        for (m, v) in &self.terms {
            p.add_term(m.clone(), v.clone() * c.clone());
        }
        p
    }

    /// Partial derivative with respect to the 0-based variable `i`.
    pub fn derivative(&self, i: usize) -> Self {
        assert!(i < self.n, "variable index {i} out of range");
        let mut p = Self::zero(self.n);
        for (m, c) in &self.terms {
            let k = m.0[i];
            if k == 0 {
                continue;
            }
            let mut e = m.0.clone();
            e[i] -= 1;
            p.add_term(Monomial(e), c.clone() * T::from_ratio(k as i64, 1));
        }
        p
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.n).map(|i| self.derivative(i)).collect()
    }

    /// Matrix of second partial derivatives (symmetric, stored in full).
    pub fn hessian(&self) -> Vec<Vec<Self>> {
        let g = self.gradient();
        (0..self.n)
            .map(|i| (0..self.n).map(|j| g[i].derivative(j)).collect())
            .collect()
    }

    /// Euclidean Laplacian.
    pub fn laplacian(&self) -> Self {
        let mut p = Self::zero(self.n);
        for i in 0..self.n {
            p = &p + &self.derivative(i).derivative(i);
        }
        p
    }

    /// Homogeneous components keyed by degree.
    pub fn homogeneous_parts(&self) -> BTreeMap<u32, Self> {
        let mut out: BTreeMap<u32, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.degree())
                .or_insert_with(|| Self::zero(self.n))
                .add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.n, T::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Mean over the uniform probability measure on the unit sphere,
    /// computed exactly from monomial moments:
    /// `E θ^a = Π (a_i - 1)!! / Π_{j < |a|/2} (n + 2j)` when every `a_i` is even.
    pub fn sphere_mean(&self) -> T {
        let mut acc = T::zero();
        for (m, c) in &self.terms {
            if let Some((num, den)) = sphere_moment(self.n, m.exponents()) {
                acc = acc + c.clone() * T::from_ratio(1, 1).div_ratio(den, num);
            }
        }
        acc
    }

    /// Mean under the standard Gaussian measure on R^n: `E X^a = Π (a_i - 1)!!`.
    pub fn gaussian_mean(&self) -> T {
        let mut acc = T::zero();
        for (m, c) in &self.terms {
            if let Some(v) = gaussian_moment(m.exponents()) {
                acc = acc + c.clone() * T::from_ratio(v as i64, 1);
            }
        }
        acc
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        let mut p = Polynomial::zero(self.n);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c.to_f64());
        }
        p
    }

    /// Evaluate at `x` in floating point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64();
            for (xi, &k) in x.iter().zip(m.exponents()) {
                if k != 0 {
                    t *= xi.powi(k as i32);
                }
            }
            sum += t;
        }
        sum
    }
}

impl Polynomial<f64> {
    /// Exact conversion of every coefficient to a rational.
    pub fn to_rational(&self) -> Result<Polynomial<BigRational>> {
        let mut p = Polynomial::zero(self.n);
        for (m, c) in &self.terms {
            let r = BigRational::from_float(*c)
                .ok_or_else(|| Error::InvalidArgument(format!("non-finite coefficient {c}")))?;
            p.add_term(m.clone(), r);
        }
        Ok(p)
    }

    /// Parse the text grammar in dimension `n`.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("polynomial dimension must be positive");
        }
        let mut parser = Parser { src: text.as_bytes(), pos: 0, n };
        let p = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(p)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Drop terms whose absolute coefficient is at most `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        let mut p = Self::zero(self.n);
        for (m, c) in &self.terms {
            if c.abs() > tol {
                p.add_term(m.clone(), *c);
            }
        }
        p
    }
}

fn double_factorial_odd(k: u32) -> u64 {
    // (k - 1)!! for even k
    let mut v = 1u64;
    let mut j = k as i64 - 1;
    while j > 1 {
        v *= j as u64;
        j -= 2;
    }
    v
}

fn gaussian_moment(exps: &[u32]) -> Option<u64> {
    if exps.iter().any(|k| k % 2 == 1) {
        return None;
    }
    Some(exps.iter().map(|&k| double_factorial_odd(k)).product())
}

/// Sphere moment as a reduced-free `(numerator, denominator)` pair, or `None`
/// when an exponent is odd.
fn sphere_moment(n: usize, exps: &[u32]) -> Option<(u64, u64)> {
    let num = gaussian_moment(exps)?;
    let half: u32 = exps.iter().sum::<u32>() / 2;
    let den: u64 = (0..half as u64).map(|j| n as u64 + 2 * j).product();
    Some((num, den))
}

impl<T: Coefficient> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        assert_eq!(self.n, rhs.n, "polynomial dimensions differ");
        let mut p = self.clone();
        for (m, c) in &rhs.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }
}

impl<T: Coefficient> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        assert_eq!(self.n, rhs.n, "polynomial dimensions differ");
        let mut p = self.clone();
        for (m, c) in &rhs.terms {
            p.add_term(m.clone(), -c.clone());
        }
        p
    }
}

impl<T: Coefficient> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        assert_eq!(self.n, rhs.n, "polynomial dimensions differ");
        let mut p = Polynomial::zero(self.n);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                p.add_term(m1.mul(m2), c1.clone() * c2.clone());
            }
        }
        p
    }
}

impl<T: Coefficient> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.scale(&(-T::one()))
    }
}

impl<T: Coefficient> Add for Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        &self + &rhs
    }
}

impl<T: Coefficient> Sub for Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        &self - &rhs
    }
}

impl<T: Coefficient> Mul for Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Polynomial<T> {
        &self * &rhs
    }
}

impl fmt::Display for Polynomial<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, &c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            if idx == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if mag != 1.0 || m.degree() == 0 {
                factors.push(format!("{mag:?}").trim_end_matches(".0").to_string());
            }
            for (i, &k) in m.exponents().iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(format!("x{}", i + 1)),
                    _ => factors.push(format!("x{}^{}", i + 1, k)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for Polynomial<BigRational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let sep = if c.is_negative() { " - " } else { " + " };
            if idx == 0 {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{sep}")?;
            }
            write!(f, "({})", c.abs())?;
            for (i, &k) in m.exponents().iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, k)?,
                }
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial<f64>> {
        let mut acc = Polynomial::zero(self.n);
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                sign = -1.0;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = &acc + &t.scale(&sign);
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial<f64>> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.power()?;
                    acc = &acc * &rhs;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.power()?;
                    if rhs.degree() != 0 || rhs.is_zero() {
                        return Err(self.error("division only by a non-zero constant"));
                    }
                    let c = rhs.coefficient(&vec![0; self.n]);
                    acc = acc.scale(&(1.0 / c));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Polynomial<f64>> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.integer()?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial<f64>> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'x') => {
                self.pos += 1;
                let idx = self.integer()? as usize;
                if idx == 0 || idx > self.n {
                    return Err(self.error(&format!(
                        "variable x{idx} outside 1..={} for this dimension",
                        self.n
                    )));
                }
                Ok(Polynomial::variable(self.n, idx - 1))
            }
            Some(b'-') => {
                self.pos += 1;
                let a = self.power()?;
                Ok(-&a)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(Polynomial::constant(self.n, v))
            }
            _ => Err(self.error("expected a number, variable or '('")),
        }
    }

    fn integer(&mut self) -> Result<u32> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.error("integer out of range"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let bytes = self.src;
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'-' || bytes[self.pos] == b'+') {
                self.pos += 1;
            }
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        std::str::from_utf8(&bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse { pos: start, msg: "malformed number".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> Polynomial {
        Polynomial::parse(s, n).unwrap()
    }

    #[test]
    fn parse_and_print_canonical() {
        let f = p("3.5*x1^2*x3 - x2", 3);
        assert_eq!(f.len(), 2);
        assert_eq!(f.coefficient(&[2, 0, 1]), 3.5);
        assert_eq!(f.coefficient(&[0, 1, 0]), -1.0);
        assert_eq!(f.to_string(), "3.5*x1^2*x3 - x2");
        assert_eq!(p("x2 + x1", 2).to_string(), "x1 + x2");
        assert_eq!(p("-2", 2).to_string(), "-2");
        assert_eq!(p("0*x1", 2).to_string(), "0");
    }

    #[test]
    fn parse_products_and_powers() {
        let f = p("(x1 + x2)^2 - x1^2 - x2^2", 2);
        assert_eq!(f, p("2*x1*x2", 2));
        let g = p("x1^3 - 3/7*x1", 5);
        assert!((g.coefficient(&[1, 0, 0, 0, 0]) + 3.0 / 7.0).abs() < 1e-16);
        assert!(Polynomial::parse("x4", 3).is_err());
        assert!(Polynomial::parse("x1 +", 3).is_err());
        assert!(Polynomial::parse("x1/x2", 3).is_err());
    }

    #[test]
    fn zero_terms_are_never_stored() {
        let f = p("x1*x2", 3);
        let d = &f - &f;
        assert!(d.is_zero());
        assert_eq!(f.derivative(2).len(), 0);
    }

    #[test]
    fn derivatives_are_exact() {
        let f = p("x1^3*x2 + 2*x2^2 - 5", 2);
        assert_eq!(f.derivative(0), p("3*x1^2*x2", 2));
        assert_eq!(f.derivative(1), p("x1^3 + 4*x2", 2));
        assert_eq!(f.laplacian(), p("6*x1*x2 + 4", 2));
        let h = f.hessian();
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn sphere_and_gauss_moments() {
        let n = 5;
        let f = p("x1^2", n);
        assert_eq!(f.sphere_mean(), 0.2);
        let g = p("x1^2*x2^2", n).to_rational().unwrap();
        assert_eq!(g.sphere_mean(), BigRational::from_ratio(1, 35));
        let q = p("x1^4", 3).to_rational().unwrap();
        assert_eq!(q.sphere_mean(), BigRational::from_ratio(3, 15));
        assert_eq!(p("x1^4*x2^2", 2).gaussian_mean(), 3.0);
        assert_eq!(p("x1^3", 2).gaussian_mean(), 0.0);
    }

    #[test]
    fn rational_roundtrip_is_lossless() {
        let f = p("0.1*x1 - 1e-7*x2^3", 2);
        assert_eq!(f.to_rational().unwrap().to_f64(), f);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial> {
            prop::collection::vec((-5i32..=5, prop::collection::vec(0u32..4, n)), 0..6).prop_map(
                move |ts| {
                    Polynomial::from_terms(n, ts.into_iter().map(|(c, e)| (c as f64 * 0.5, e)))
                        .unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn text_roundtrip(f in arb_poly(3)) {
                let back = Polynomial::parse(&f.to_string(), 3).unwrap();
                prop_assert_eq!(back, f);
            }

            #[test]
            fn leibniz_rule(f in arb_poly(3), g in arb_poly(3), i in 0usize..3) {
                let lhs = (&f * &g).derivative(i);
                let rhs = &(&f.derivative(i) * &g) + &(&f * &g.derivative(i));
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
