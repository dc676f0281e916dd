//! Batch front end: argument parsing, run configuration and report output.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or schema
//! error, 3 input outside the scope of an identity.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::concentration::deviation_experiment;
use crate::error::{invalid, Error, Result};
use crate::hoeffding::{
    hoeffding_fourier, hoeffding_fourier_quadrature, hoeffding_kernel, hoeffding_marginal,
    hoeffding_marginal_quadrature, stein_identity_check, stein_kernel, Distribution1D,
};
use crate::mixing::{mixing_constant, psi_quadrature, psi_series, SERIES_RADIUS};
use crate::polynomial::Polynomial;
use crate::verify::{check_semigroup_identity, run_identity, CheckOptions, CheckRequest, VerificationReport, IDENTITIES};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPHERECOV_OUT_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCOPE: i32 = 3;

/// Subcommand registry, in `--help` order.
pub const SUBCOMMANDS: [(&str, &str); 6] = [
    ("density", "mixing density on an alpha grid, series against quadrature"),
    ("constants", "total masses c_n and their two-sided bounds"),
    ("verify", "one identity check from the registry"),
    ("concentration", "deviation probabilities against the Gaussian-type bounds"),
    ("hoeffding", "one-dimensional Hoeffding kernels, Stein kernels and transforms"),
    ("semigroup", "heat-semigroup covariance representations"),
];

#[derive(Debug, Parser)]
#[command(name = "spherecov", version, about = "Covariance representations on the sphere and in Gauss space")]
pub struct Cli {
    /// Read the run configuration from a JSON file instead of the arguments.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mixing density on an alpha grid, series against quadrature (CSV)
    Density(DensityArgs),
    /// Total masses c_n and their two-sided bounds (CSV)
    Constants(ConstantsArgs),
    /// One identity check from the registry (JSON report)
    Verify(VerifyArgs),
    /// Deviation probabilities against the Gaussian-type bounds (CSV)
    Concentration(ConcentrationArgs),
    /// One-dimensional Hoeffding kernels, Stein kernels and transforms
    Hoeffding(HoeffdingArgs),
    /// Heat-semigroup covariance representations (JSON report)
    Semigroup(SemigroupArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; defaults to $SPHERECOV_OUT_DIR/<subcommand>.<ext>, else stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long = "out", value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    /// Dimensions, e.g. `2,3,4` or `2:8`.
    #[arg(long, default_value = "2")]
    pub n: String,
    #[arg(long, default_value_t = 1)]
    pub order: u8,
    /// Alpha values, a list `a,b,c` or `start:stop:count`.
    #[arg(long, default_value = "-0.95:0.95:39")]
    pub alpha: String,
    /// Relative tolerance between the series and quadrature values.
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConstantsArgs {
    /// Dimensions; default `3:10` for order 1 and `5:10` for order 2.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub order: u8,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = crate::verify::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Absolute tolerance; checks pass within max(atol, 4 standard errors).
    #[arg(long, default_value_t = 1e-6)]
    pub atol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Identity id: gauss1, gauss2, sphere1, sphere2, poincare, covbounds,
    /// semigroup, circle, periodic.
    #[arg(long)]
    pub identity: String,
    #[arg(long)]
    pub n: usize,
    /// First polynomial, e.g. `x1*x2 - 0.5*x3^2`.
    #[arg(long)]
    pub f: String,
    /// Second polynomial; defaults to `f`.
    #[arg(long)]
    pub g: Option<String>,
    /// Exponent for covbounds.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Marginal constant of the periodic kernel.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[command(flatten)]
    pub sampling: SampleArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConcentrationArgs {
    /// Dimensions, e.g. `10,50`.
    #[arg(long)]
    pub n: String,
    /// 1-Lipschitz polynomial.
    #[arg(long, default_value = "x1")]
    pub f: String,
    /// Deviation radii.
    #[arg(long, default_value = "0.1:1:10")]
    pub r: String,
    #[command(flatten)]
    pub sampling: SampleArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HoeffdingArgs {
    /// `uniform`, `bernoulli`, `gauss` or `table:<file>` (lines `x,F(x)`).
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_enum)]
    pub op: HoeffdingOp,
    /// Left end (uniform) or first atom (bernoulli).
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Right end (uniform) or second atom (bernoulli).
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Mass at `a` (bernoulli).
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub var: f64,
    /// Points (frequencies t for `fourier`); default spans the bulk of the law.
    #[arg(long)]
    pub x: Option<String>,
    /// Second points (frequencies s for `fourier`); defaults to `x`.
    #[arg(long)]
    pub y: Option<String>,
    /// Test polynomial in `x1` for `stein`/`verify`.
    #[arg(long, default_value = "x1^3 - x1")]
    pub u: String,
    #[arg(long, default_value_t = 1e-8)]
    pub atol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SemigroupArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub g: Option<String>,
    #[command(flatten)]
    pub sampling: SampleArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HoeffdingOp {
    Kernel,
    Marginal,
    Stein,
    Fourier,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcommandKind {
    Density,
    Constants,
    Verify,
    Concentration,
    Hoeffding,
    Semigroup,
}

impl SubcommandKind {
    pub fn name(self) -> &'static str {
        match self {
            SubcommandKind::Density => "density",
            SubcommandKind::Constants => "constants",
            SubcommandKind::Verify => "verify",
            SubcommandKind::Concentration => "concentration",
            SubcommandKind::Hoeffding => "hoeffding",
            SubcommandKind::Semigroup => "semigroup",
        }
    }

    fn default_format(self, op: Option<HoeffdingOp>) -> Format {
        match self {
            SubcommandKind::Verify | SubcommandKind::Semigroup => Format::Json,
            SubcommandKind::Hoeffding if op == Some(HoeffdingOp::Verify) => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Complete description of one run. Every field is explicit, so a saved
/// configuration reproduces its report byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: SubcommandKind,
    pub n: Vec<usize>,
    pub order: u8,
    pub identity: Option<String>,
    pub f: Option<String>,
    pub g: Option<String>,
    /// Alpha values, radii, points or frequencies depending on the subcommand.
    pub grid: Vec<f64>,
    /// Second grid of the two-variable Hoeffding operations.
    pub grid2: Vec<f64>,
    pub dist: Option<Distribution1D>,
    pub op: Option<HoeffdingOp>,
    pub p: f64,
    pub c: f64,
    pub samples: usize,
    pub seed: u64,
    pub atol: f64,
    pub rtol: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    fn base(subcommand: SubcommandKind) -> Self {
        RunConfig {
            subcommand,
            n: Vec::new(),
            order: 1,
            identity: None,
            f: None,
            g: None,
            grid: Vec::new(),
            grid2: Vec::new(),
            dist: None,
            op: None,
            p: 2.0,
            c: 0.1,
            samples: crate::verify::DEFAULT_SAMPLES,
            seed: 0,
            atol: 1e-6,
            rtol: 1e-6,
            output: None,
            format: subcommand.default_format(None),
        }
    }

    /// Schema checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.atol.is_finite() && self.rtol > 0.0 && self.rtol.is_finite()) {
            return invalid("tolerances must be positive and finite");
        }
        if self.samples < 1000 {
            return invalid(format!("samples must be at least 1000, got {}", self.samples));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return invalid("at least one positive dimension is required");
        }
        if !matches!(self.order, 1 | 2) {
            return invalid(format!("order must be 1 or 2, got {}", self.order));
        }
        if self.grid.iter().chain(&self.grid2).any(|v| !v.is_finite()) {
            return invalid("grid values must be finite");
        }
        let single = || -> Result<()> {
            if self.n.len() != 1 {
                return invalid("exactly one dimension is required");
            }
            if self.f.is_none() {
                return invalid("a polynomial f is required");
            }
            Ok(())
        };
        match self.subcommand {
            SubcommandKind::Density | SubcommandKind::Concentration => {
                if self.grid.is_empty() {
                    return invalid("the grid is empty");
                }
                if self.subcommand == SubcommandKind::Concentration && self.f.is_none() {
                    return invalid("a polynomial f is required");
                }
            }
            SubcommandKind::Constants => {}
            SubcommandKind::Verify => {
                single()?;
                match &self.identity {
                    Some(id) if IDENTITIES.iter().any(|i| i.id == id) => {}
                    Some(id) => return invalid(format!("unknown identity '{id}'")),
                    None => return invalid("an identity id is required"),
                }
            }
            SubcommandKind::Semigroup => single()?,
            SubcommandKind::Hoeffding => {
                if self.dist.is_none() || self.op.is_none() {
                    return invalid("hoeffding needs a distribution and an operation");
                }
                if self.op != Some(HoeffdingOp::Verify) && self.grid.is_empty() {
                    return invalid("the grid is empty");
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Build from parsed arguments; `table:<file>` is read here.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        if let Some(path) = &cli.config {
            return Self::from_json(&std::fs::read_to_string(path)?);
        }
        let Some(cmd) = &cli.command else {
            return invalid("a subcommand or --config is required");
        };
        let (mut cfg, out) = match cmd {
            Command::Density(a) => {
                let mut c = Self::base(SubcommandKind::Density);
                c.n = parse_usize_grid(&a.n)?;
                c.order = a.order;
                c.grid = parse_grid(&a.alpha)?;
                c.rtol = a.rtol;
                (c, &a.out)
            }
            Command::Constants(a) => {
                let mut c = Self::base(SubcommandKind::Constants);
                c.order = a.order;
                let default = if a.order == 2 { "5:10" } else { "3:10" };
                c.n = parse_usize_grid(a.n.as_deref().unwrap_or(default))?;
                (c, &a.out)
            }
            Command::Verify(a) => {
                let mut c = Self::base(SubcommandKind::Verify);
                c.identity = Some(a.identity.clone());
                c.n = vec![a.n];
                c.f = Some(a.f.clone());
                c.g = a.g.clone();
                c.p = a.p;
                c.c = a.c;
                c.apply_sampling(&a.sampling);
                (c, &a.out)
            }
            Command::Concentration(a) => {
                let mut c = Self::base(SubcommandKind::Concentration);
                c.n = parse_usize_grid(&a.n)?;
                c.f = Some(a.f.clone());
                c.grid = parse_grid(&a.r)?;
                c.apply_sampling(&a.sampling);
                (c, &a.out)
            }
            Command::Hoeffding(a) => {
                let mut c = Self::base(SubcommandKind::Hoeffding);
                let dist = parse_dist(a)?;
                c.n = vec![1];
                c.op = Some(a.op);
                c.f = Some(a.u.clone());
                c.atol = a.atol;
                c.grid = match &a.x {
                    Some(s) => parse_grid(s)?,
                    None => default_points(&dist, a.op),
                };
                c.grid2 = match &a.y {
                    Some(s) => parse_grid(s)?,
                    None => c.grid.clone(),
                };
                c.dist = Some(dist);
                c.format = SubcommandKind::Hoeffding.default_format(Some(a.op));
                (c, &a.out)
            }
            Command::Semigroup(a) => {
                let mut c = Self::base(SubcommandKind::Semigroup);
                c.n = vec![a.n];
                c.f = Some(a.f.clone());
                c.g = a.g.clone();
                c.apply_sampling(&a.sampling);
                (c, &a.out)
            }
        };
        cfg.output = out.output.clone();
        if let Some(f) = out.format {
            cfg.format = f;
        }
        Ok(cfg)
    }

    fn apply_sampling(&mut self, s: &SampleArgs) {
        self.samples = s.samples;
        self.seed = s.seed;
        self.atol = s.atol;
    }

    fn options(&self) -> CheckOptions {
        CheckOptions { samples: self.samples, seed: self.seed, atol: self.atol }
    }

    fn polys(&self, n: usize) -> Result<(Polynomial, Polynomial)> {
        let f = Polynomial::parse(self.f.as_deref().unwrap_or("0"), n)?;
        let g = match &self.g {
            Some(g) => Polynomial::parse(g, n)?,
            None => f.clone(),
        };
        Ok((f, g))
    }
}

/// `a,b,c` or `start:stop:count` (inclusive, equally spaced).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad grid '{text}'"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, k] => {
            let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            let k: usize = k.parse().map_err(|_| bad())?;
            match k {
                0 => Err(bad()),
                1 => Ok(vec![a]),
                _ => {
                    let m = (k - 1) as f64;
                    // rounded so that e.g. 0.1:1:10 prints as 0.1, 0.2, ..., 1
                    Ok((0..k).map(|i| ((a * (m - i as f64) + b * i as f64) / m * 1e12).round() / 1e12).collect())
                }
            }
        }
        [_] => text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect(),
        _ => Err(bad()),
    }
}

/// `a,b,c` or an inclusive range `a:b`.
pub fn parse_usize_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad dimension list '{text}'"));
    if let Some((a, b)) = text.split_once(':') {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn parse_dist(a: &HoeffdingArgs) -> Result<Distribution1D> {
    match a.dist.as_str() {
        "uniform" => Distribution1D::uniform(a.a, a.b),
        "bernoulli" => Distribution1D::bernoulli(a.a, a.b, a.p),
        "gauss" => Distribution1D::gaussian(a.mean, a.var),
        other => match other.strip_prefix("table:") {
            Some(path) => Distribution1D::table_from_csv(&std::fs::read_to_string(path)?),
            None => invalid(format!("unknown distribution '{other}'")),
        },
    }
}

fn default_points(d: &Distribution1D, op: HoeffdingOp) -> Vec<f64> {
    if op == HoeffdingOp::Fourier {
        return vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    }
    let (m, s) = (d.mean(), d.variance().sqrt());
    let (lo, hi) = match d {
        Distribution1D::Uniform { a, b } | Distribution1D::Bernoulli { a, b, .. } => (a.min(*b), a.max(*b)),
        Distribution1D::Table { x, .. } | Distribution1D::Empirical { samples: x } => (x[0], x[x.len() - 1]),
        _ => (m - 3.0 * s, m + 3.0 * s),
    };
    (0..=10).map(|i| lo + (hi - lo) * i as f64 / 10.0).collect()
}

/// Rendered output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub body: String,
    pub format: Format,
    pub pass: bool,
}

#[derive(Serialize)]
struct DensityRow {
    n: usize,
    order: u8,
    alpha: f64,
    psi_series: Option<f64>,
    psi_quadrature: f64,
    rel_diff: Option<f64>,
}

#[derive(Serialize)]
struct ConstantRow {
    n: usize,
    order: u8,
    c_n: f64,
    error: f64,
    lower: f64,
    upper: f64,
    inside: bool,
}

#[derive(Serialize)]
struct ConcentrationRow {
    n: usize,
    r: f64,
    empirical: f64,
    bound17: f64,
    bound18: f64,
    pass: bool,
}

/// Flat view of a report for CSV.
#[derive(Serialize)]
struct ReportRow<'a> {
    identity_id: &'a str,
    n: usize,
    lhs: f64,
    rhs: f64,
    abs_err: f64,
    rel_err: f64,
    mc_halfwidth: f64,
    std_error: f64,
    samples: usize,
    seed: u64,
    pass: bool,
    notes: String,
}

#[derive(Serialize)]
struct PointRow {
    x: f64,
    value: f64,
}

#[derive(Serialize)]
struct KernelRow {
    x: f64,
    y: f64,
    h: f64,
}

#[derive(Serialize)]
struct MarginalRow {
    x: f64,
    closed_form: f64,
    quadrature: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct FourierRow {
    t: f64,
    s: f64,
    re: f64,
    im: f64,
    re_quadrature: f64,
    im_quadrature: f64,
    abs_diff: f64,
}

fn render<T: Serialize>(rows: &[T], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

fn render_reports(reports: &[VerificationReport], format: Format) -> Result<String> {
    match format {
        Format::Json => render(reports, format),
        Format::Csv => {
            let rows: Vec<ReportRow> = reports
                .iter()
                .map(|r| ReportRow {
                    identity_id: &r.identity_id,
                    n: r.n,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    abs_err: r.abs_err,
                    rel_err: r.rel_err,
                    mc_halfwidth: r.mc_halfwidth,
                    std_error: r.std_error,
                    samples: r.samples,
                    seed: r.seed,
                    pass: r.pass,
                    notes: r.notes.join("; "),
                })
                .collect();
            render(&rows, format)
        }
    }
}

/// Compute the output of a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let fmt = cfg.format;
    let (body, pass) = match cfg.subcommand {
        SubcommandKind::Density => {
            let mut rows = Vec::new();
            for &n in &cfg.n {
                for &alpha in &cfg.grid {
                    let q = psi_quadrature(n, alpha, cfg.order)?;
                    let s = if alpha.abs() <= SERIES_RADIUS { Some(psi_series(n, alpha, cfg.order)?.value) } else { None };
                    let rel_diff = s.map(|s| (s - q).abs() / q.abs());
                    rows.push(DensityRow { n, order: cfg.order, alpha, psi_series: s, psi_quadrature: q, rel_diff });
                }
            }
            let pass = rows.iter().all(|r| r.rel_diff.is_none_or(|d| d <= cfg.rtol));
            (render(&rows, fmt)?, pass)
        }
        SubcommandKind::Constants => {
            let mut rows = Vec::new();
            for &n in &cfg.n {
                let c = mixing_constant(n, cfg.order)?;
                rows.push(ConstantRow {
                    n,
                    order: cfg.order,
                    c_n: c.value,
                    error: c.error,
                    lower: c.lower,
                    upper: c.upper,
                    inside: c.within_bounds(),
                });
            }
            let pass = rows.iter().all(|r| r.inside);
            (render(&rows, fmt)?, pass)
        }
        SubcommandKind::Verify => {
            let n = cfg.n[0];
            let (f, g) = cfg.polys(n)?;
            let req = CheckRequest { f, g, options: cfg.options(), p: cfg.p, c: cfg.c };
            let reports = run_identity(cfg.identity.as_deref().unwrap_or_default(), &req)?;
            (render_reports(&reports, fmt)?, reports.iter().all(|r| r.pass))
        }
        SubcommandKind::Semigroup => {
            let (f, g) = cfg.polys(cfg.n[0])?;
            let r = check_semigroup_identity(&f, &g, &cfg.options())?;
            let pass = r.pass;
            (render_reports(&[r], fmt)?, pass)
        }
        SubcommandKind::Concentration => {
            let mut exps = Vec::new();
            for &n in &cfg.n {
                let f = Polynomial::parse(cfg.f.as_deref().unwrap_or("x1"), n)?;
                exps.push(deviation_experiment(&f, &cfg.grid, cfg.samples, cfg.seed)?);
            }
            let pass = exps.iter().all(|e| e.pass());
            let body = match fmt {
                Format::Json => render(&exps, fmt)?,
                Format::Csv => {
                    let rows: Vec<ConcentrationRow> = exps
                        .iter()
                        .flat_map(|e| {
                            e.rows.iter().map(|r| ConcentrationRow {
                                n: e.n,
                                r: r.r,
                                empirical: r.empirical,
                                bound17: r.bound_classical,
                                bound18: r.bound_mean_deviation,
                                pass: r.pass,
                            })
                        })
                        .collect();
                    render(&rows, fmt)?
                }
            };
            (body, pass)
        }
        SubcommandKind::Hoeffding => run_hoeffding(cfg)?,
    };
    Ok(RunOutput { body, format: fmt, pass })
}

fn run_hoeffding(cfg: &RunConfig) -> Result<(String, bool)> {
    let d = cfg.dist.as_ref().expect("validated");
    let fmt = cfg.format;
    let close = |a: f64, b: f64| (a - b).abs() <= cfg.atol.max(cfg.rtol * a.abs());
    Ok(match cfg.op.expect("validated") {
        HoeffdingOp::Kernel => {
            let rows: Vec<KernelRow> = cfg
                .grid
                .iter()
                .flat_map(|&x| cfg.grid2.iter().map(move |&y| KernelRow { x, y, h: hoeffding_kernel(d, x, y) }))
                .collect();
            (render(&rows, fmt)?, true)
        }
        HoeffdingOp::Marginal => {
            let rows: Vec<MarginalRow> = cfg
                .grid
                .iter()
                .map(|&x| {
                    let (c, q) = (hoeffding_marginal(d, x), hoeffding_marginal_quadrature(d, x));
                    MarginalRow { x, closed_form: c, quadrature: q, abs_diff: (c - q).abs() }
                })
                .collect();
            let pass = rows.iter().all(|r| close(r.closed_form, r.quadrature));
            (render(&rows, fmt)?, pass)
        }
        HoeffdingOp::Stein => {
            let rows = cfg
                .grid
                .iter()
                .map(|&x| Ok(PointRow { x, value: stein_kernel(d, x)? }))
                .collect::<Result<Vec<_>>>()?;
            (render(&rows, fmt)?, true)
        }
        HoeffdingOp::Fourier => {
            let mut rows = Vec::new();
            for &t in &cfg.grid {
                for &s in &cfg.grid2 {
                    let a = hoeffding_fourier(d, t, s)?;
                    let b = hoeffding_fourier_quadrature(d, t, s);
                    rows.push(FourierRow { t, s, re: a.re, im: a.im, re_quadrature: b.re, im_quadrature: b.im, abs_diff: (a - b).norm() });
                }
            }
            let pass = rows.iter().all(|r| r.abs_diff <= cfg.atol);
            (render(&rows, fmt)?, pass)
        }
        HoeffdingOp::Verify => {
            let u = Polynomial::parse(cfg.f.as_deref().unwrap_or("x1^3"), 1)?;
            let r = stein_identity_check(d, &u, cfg.atol)?;
            let pass = r.pass;
            (render_reports(&[r], fmt)?, pass)
        }
    })
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfScope(_) => EXIT_SCOPE,
        Error::Numerical(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// Where the output goes: the explicit path, the default directory, or
/// `None` for stdout.
pub fn destination(cfg: &RunConfig) -> Option<PathBuf> {
    if let Some(p) = &cfg.output {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUT_DIR_ENV)?;
    Some(Path::new(&dir).join(format!("{}.{}", cfg.subcommand.name(), cfg.format.extension())))
}

/// Write through a temporary file in the target directory and rename.
pub fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Run a configuration end to end and return the process exit code.
pub fn execute(cfg: &RunConfig) -> i32 {
    let out = match run(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("spherecov: {e}");
            return exit_code(&e);
        }
    };
    match destination(cfg) {
        Some(path) => {
            if let Err(e) = write_atomic(&path, &out.body) {
                eprintln!("spherecov: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => print!("{}", out.body),
    }
    if out.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Parse process arguments and run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match RunConfig::from_cli(&cli) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            eprintln!("spherecov: {e}");
            exit_code(&e)
        }
    }
}
