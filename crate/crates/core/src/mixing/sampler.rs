//! Sampling the normalized spherical mixing measures μ_n.
//!
//! `x` is uniform; `α = ⟨x,y⟩` has density `ψ(α) w_n(α) / c_n`; `y` is then
//! `αx + √(1-α²) u` with `u` uniform on the great sphere orthogonal to `x`.
//! The law of `α` is tabulated in the angle `θ = arccos α` on 2048 equal
//! cells with a piecewise-linear CDF, built once per `(n, order)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use super::{psi_auto_gap, scope_check};
use crate::error::{invalid, Result};
use crate::montecarlo::{chunk_rng, fill_gaussian, fill_sphere, McRng, CHUNK};
use crate::quadrature::GaussLegendre;
use crate::sphere::{dot, inner_product_norm, SpherePoint};

pub const KNOTS: usize = 2048;

/// Tabulated CDF of `θ = arccos⟨x,y⟩` under μ_n.
#[derive(Debug, Clone)]
pub struct AngleTable {
    pub n: usize,
    pub order: u8,
    /// Knots `θ_0 = 0 < ... < θ_K = π`.
    theta: Vec<f64>,
    /// Normalized CDF at the knots.
    cdf: Vec<f64>,
    /// Unnormalized total, an estimate of c_n.
    total: f64,
}

impl AngleTable {
    fn build(n: usize, order: u8) -> Result<Self> {
        let gl = GaussLegendre::new(8);
        let h = std::f64::consts::PI / KNOTS as f64;
        let norm = inner_product_norm(n);
        let mut theta = Vec::with_capacity(KNOTS + 1);
        let mut cdf = Vec::with_capacity(KNOTS + 1);
        theta.push(0.0);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..KNOTS {
            let a = k as f64 * h;
            let b = a + h;
            let mut cell = 0.0;
            for (th, w) in gl.mapped(a, b) {
                let half = (0.5 * th).sin();
                let psi = psi_auto_gap(n, th.cos(), 2.0 * half * half, order)?;
                cell += w * psi * norm * th.sin().powi(n as i32 - 2);
            }
            acc += cell;
            theta.push(b);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(AngleTable { n, order, theta, cdf, total })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Tabulated `P(⟨x,y⟩ ≤ α)`.
    pub fn alpha_cdf(&self, alpha: f64) -> f64 {
        let th = alpha.clamp(-1.0, 1.0).acos();
        1.0 - self.theta_cdf(th)
    }

    fn theta_cdf(&self, th: f64) -> f64 {
        let h = self.theta[1];
        let k = ((th / h) as usize).min(KNOTS - 1);
        let f = (th - self.theta[k]) / h;
        self.cdf[k] + f * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Inverse CDF in θ by bisection on knots and linear interpolation.
    pub fn theta_quantile(&self, u: f64) -> f64 {
        let k = match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => return self.theta[i],
            Err(i) => i.clamp(1, KNOTS) - 1,
        };
        let span = self.cdf[k + 1] - self.cdf[k];
        let f = if span > 0.0 { (u - self.cdf[k]) / span } else { 0.0 };
        self.theta[k] + f * (self.theta[k + 1] - self.theta[k])
    }
}

type TableCache = HashMap<(usize, u8), Arc<AngleTable>>;

/// Shared table for `(n, order)`, built on first use.
pub fn angle_table(n: usize, order: u8) -> Result<Arc<AngleTable>> {
    scope_check(n, order)?;
    static CACHE: OnceLock<Mutex<TableCache>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache").get(&(n, order)) {
        return Ok(t.clone());
    }
    let t = Arc::new(AngleTable::build(n, order)?);
    cache.lock().expect("table cache").insert((n, order), t.clone());
    Ok(t)
}

/// Streaming sampler for μ_n.
#[derive(Debug, Clone)]
pub struct MuSampler {
    table: Arc<AngleTable>,
}

impl MuSampler {
    pub fn new(n: usize, order: u8) -> Result<Self> {
        Ok(MuSampler { table: angle_table(n, order)? })
    }

    pub fn table(&self) -> &AngleTable {
        &self.table
    }

    /// Fill `x`, `y` with a μ_n pair; returns `⟨x,y⟩`.
    pub fn draw(&self, rng: &mut McRng, x: &mut [f64], y: &mut [f64]) -> f64 {
        fill_sphere(rng, x);
        let th = self.table.theta_quantile(rng.random::<f64>());
        let (s, alpha) = th.sin_cos();
        // u uniform on the unit sphere of x⊥
        loop {
            fill_gaussian(rng, y);
            let r = dot(y, x);
            y.iter_mut().zip(x.iter()).for_each(|(v, xi)| *v -= r * xi);
            let norm = dot(y, y).sqrt();
            if norm > 1e-150 {
                let c = s / norm;
                y.iter_mut().zip(x.iter()).for_each(|(v, xi)| *v = alpha * xi + c * *v);
                break;
            }
        }
        alpha
    }
}

/// `count` pairs from μ_n.
pub fn sample_mu_n(n: usize, count: usize, seed: u64, order: u8) -> Result<Vec<(SpherePoint, SpherePoint)>> {
    if count == 0 {
        return invalid("count must be positive");
    }
    let sampler = MuSampler::new(n, order)?;
    let mut out = Vec::with_capacity(count);
    for c in 0..count.div_ceil(CHUNK) {
        let mut rng = chunk_rng(seed, c as u64);
        for _ in 0..CHUNK.min(count - c * CHUNK) {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            sampler.draw(&mut rng, &mut x, &mut y);
            out.push((SpherePoint::new(x)?, SpherePoint::new(y)?));
        }
    }
    Ok(out)
}

/// Kolmogorov–Smirnov distance between the empirical law of `alphas` and
/// the tabulated CDF.
pub fn ks_statistic(table: &AngleTable, alphas: &mut [f64]) -> f64 {
    alphas.sort_by(|a, b| a.total_cmp(b));
    let m = alphas.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &a) in alphas.iter().enumerate() {
        let f = table.alpha_cdf(a);
        d = d.max((f - i as f64 / m).abs()).max(((i + 1) as f64 / m - f).abs());
    }
    d
}
