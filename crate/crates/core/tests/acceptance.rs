//! Acceptance criteria 1-10. Each prints one PASS/FAIL line; the process
//! fails if a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use rand::Rng;
use spherecov::concentration::{coordinate_abs_mean, coordinate_tail, deviation_experiment, exp_moment_check};
use spherecov::hoeffding::{
    circle_hoeffding_representation, circle_hoeffding_total_mass, circle_marginal_constant, circle_transfer,
    hoeffding_kernel, hoeffding_marginal, hoeffding_marginal_quadrature, stein_identity_check, stein_kernel,
    Distribution1D, TrigPolynomial,
};
use spherecov::mixing::{
    asymptotic_ratio, draw_pi_pair, mixing_constant, pi_fourier, psi_circle_exact, psi_circle_integral, psi_sphere,
};
use spherecov::montecarlo::{chunk_rng, fill_sphere, mc_mean, mc_means};
use spherecov::verify::{
    check_gauss_first, check_gauss_second, check_semigroup_identity, check_sphere_first, check_sphere_second,
    CheckOptions,
};
use spherecov::Polynomial;

/// Criteria expected to fail, with the reason recorded in the project notes.
/// 2: the order-2 lower bound 1/(n(n+2)) is violated at n = 10.
const KNOWN_FAILURES: &[usize] = &[2];

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            self.details.push(what());
        }
    }
}

fn p(s: &str, n: usize) -> Polynomial {
    Polynomial::parse(s, n).unwrap()
}

fn random_poly(rng: &mut impl Rng, n: usize, max_degree: u32, terms: usize) -> Polynomial {
    let t: Vec<(f64, Vec<u32>)> = (0..terms)
        .map(|_| {
            let mut e = vec![0u32; n];
            let d = rng.random_range(1..=max_degree);
            for _ in 0..d {
                e[rng.random_range(0..n)] += 1;
            }
            (rng.random_range(-1.0..1.0), e)
        })
        .collect();
    Polynomial::from_terms(n, t).unwrap()
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    for (a, want) in [(-1.0, PI * PI / 8.0), (0.0, PI / 2.0), (1.0, 3.0 * PI * PI / 8.0)] {
        let v = psi_circle_exact(a).unwrap();
        o.check((v - want).abs() <= 1e-12, || format!("closed form at {a}: {v} vs {want}"));
    }
    for k in 0..=100 {
        let a = -1.0 + 2.0 * k as f64 / 100.0;
        let exact = psi_circle_exact(a).unwrap();
        let sphere = psi_sphere(2, a, 1).unwrap();
        let integral = psi_circle_integral(a).unwrap();
        o.check((sphere - exact).abs() <= 1e-6, || format!("psi_sphere(2, {a}) = {sphere}, exact {exact}"));
        o.check((integral - exact).abs() <= 1e-6, || format!("1D integral at {a} = {integral}, exact {exact}"));
    }
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    for n in 3..=10usize {
        let c = mixing_constant(n, 1).unwrap();
        let (lo, hi) = (1.0 / (n as f64 - 1.0), 1.0 / (n as f64 - 2.0));
        o.check(c.error <= 1e-8, || format!("order 1, n = {n}: quadrature error {}", c.error));
        o.check(lo < c.value && c.value < hi, || format!("order 1, n = {n}: c = {} not in ({lo}, {hi})", c.value));
    }
    for n in 5..=10usize {
        let c = mixing_constant(n, 2).unwrap();
        let nf = n as f64;
        let (lo, hi) = (1.0 / (nf * (nf + 2.0)), 1.0 / ((nf - 2.0) * (nf - 4.0)));
        o.check(c.error <= 1e-8, || format!("order 2, n = {n}: quadrature error {}", c.error));
        o.check(lo < c.value && c.value < hi, || format!("order 2, n = {n}: c = {} not in ({lo}, {hi})", c.value));
    }
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = chunk_rng(2024, 0);
    for n in 3..=5usize {
        let opts = CheckOptions { samples: 1_000_000, seed: 100 + n as u64, atol: 1e-3 };
        let cubic = format!("x1^3 - {}*x1", 3.0 / (n as f64 + 2.0));
        let mut suite = vec![p("x1", n), p("x1*x2", n), p("x1^2", n), p(&cubic, n)];
        suite.push(random_poly(&mut rng, n, 3, 6));
        for f in &suite {
            let r = check_sphere_first(f, f, &opts).unwrap();
            o.check(r.pass, || format!("n = {n}, f = {f:?}: lhs {} rhs {} se {}", r.lhs, r.rhs, r.std_error));
        }
        let r = check_sphere_first(&suite[0], &suite[0], &opts).unwrap();
        let want = 1.0 / n as f64;
        o.check((r.rhs - want).abs() <= 4.0 * r.std_error, || format!("n = {n}: x1 rhs {} vs 1/n", r.rhs));
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    for n in [5usize, 6, 8] {
        let f = p("x1*x2", n);
        let opts = CheckOptions { samples: 1_000_000, seed: 40 + n as u64, atol: 1e-3 };
        let r = check_sphere_second(&f, &f, &opts).unwrap();
        o.check(r.pass, || format!("n = {n}: lhs {} rhs {} se {}", r.lhs, r.rhs, r.std_error));
        // Var(x1 x2) by plain sampling
        let w = mc_mean(1_000_000, 400 + n as u64, |rng| {
            let mut x = vec![0.0; n];
            fill_sphere(rng, &mut x);
            (x[0] * x[1]).powi(2)
        });
        let want = 1.0 / (n as f64 * (n as f64 + 2.0));
        o.check((w.mean - want).abs() <= 4.0 * w.std_error(), || format!("n = {n}: MC variance {} vs {want}", w.mean));
        o.check((r.lhs - want).abs() <= 1e-12, || format!("n = {n}: exact lhs {} vs {want}", r.lhs));
    }
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = chunk_rng(55, 0);
    for n in 3..=5usize {
        for k in 0..20 {
            let f = random_poly(&mut rng, n, 3, 4);
            let g = random_poly(&mut rng, n, 3, 4);
            let opts = CheckOptions { samples: 200_000, seed: 1000 * n as u64 + k, atol: 1e-9 };
            let r = check_semigroup_identity(&f, &g, &opts).unwrap();
            o.check(r.pass, || format!("n = {n}, pair {k}: {:?}", r));
        }
    }
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    for n in 1..=3usize {
        let mut suite = vec!["x1", "x1^2", "x1^3"];
        if n >= 2 {
            suite.extend(["x1*x2", "x1^2*x2"]);
        }
        if n >= 3 {
            suite.push("x1*x2*x3");
        }
        let polys: Vec<Polynomial> = suite.iter().map(|s| p(s, n)).collect();
        for (i, f) in polys.iter().enumerate() {
            let g = &polys[(i + 1) % polys.len()];
            for (j, g) in [f, g].into_iter().enumerate() {
                let opts = CheckOptions { samples: 1_000_000, seed: (100 * n + 10 * i + j) as u64, atol: 1e-6 };
                let r = check_gauss_first(f, g, &opts).unwrap();
                o.check(r.pass, || format!("gauss1 n = {n} {} {}: {r:?}", suite[i], j));
                let r = check_gauss_second(f, g, &opts).unwrap();
                o.check(r.pass, || format!("gauss2 n = {n} {} {}: {r:?}", suite[i], j));
            }
        }
    }
    // Fourier transform of the mixing measure at random frequency pairs
    let mut rng = chunk_rng(66, 0);
    for k in 0..5u64 {
        let n = 1 + (k as usize % 3);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let st = mc_means(1_000_000, 600 + k, 2, |r, out| {
            let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
            draw_pi_pair(r, &mut x, &mut y);
            let phase: f64 = t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                + s.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            out[0] = phase.cos();
            out[1] = phase.sin();
        });
        let want = pi_fourier(&t, &s);
        o.check((st[0].mean - want.re).abs() <= 4.0 * st[0].std_error(), || {
            format!("fourier {k}: re {} vs {}", st[0].mean, want.re)
        });
        o.check((st[1].mean - want.im).abs() <= 4.0 * st[1].std_error(), || {
            format!("fourier {k}: im {} vs {}", st[1].mean, want.im)
        });
    }
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let grid = [0.9, 0.99, 0.999, 0.9999];
    for n in 3..=6usize {
        let ratios = asymptotic_ratio(n, &grid).unwrap();
        let hi = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        let lo = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        o.check(lo > 0.0 && hi / lo <= 50.0, || format!("n = {n}: ratios {ratios:?}"));
    }
    for k in 0..=1000 {
        let a = -1.0 + 2.0 * k as f64 / 1000.0;
        let v = psi_sphere(2, a, 1).unwrap();
        o.check(v <= 2.0 * PI, || format!("psi_2({a}) = {v} > 2 pi"));
    }
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let u = Distribution1D::uniform(0.0, 1.0).unwrap();
    for k in 0..=50 {
        let x = k as f64 / 50.0;
        let want = x * (1.0 - x) / 2.0;
        let (c, q) = (hoeffding_marginal(&u, x), hoeffding_marginal_quadrature(&u, x));
        o.check((c - want).abs() <= 1e-10 && (q - want).abs() <= 1e-10, || format!("uniform h({x}) = {c}, {q}"));
    }
    let mut rng = chunk_rng(88, 0);
    for pr in [0.2, 0.5, 0.7] {
        let b = Distribution1D::bernoulli(0.0, 1.0, pr).unwrap();
        for _ in 0..20 {
            let (x, y) = (rng.random_range(1e-9..1.0), rng.random_range(1e-9..1.0));
            let h = hoeffding_kernel(&b, x, y);
            o.check((h - pr * (1.0 - pr)).abs() <= 1e-15, || format!("bernoulli p = {pr}: H({x}, {y}) = {h}"));
        }
    }
    let laws = [u.clone(), Distribution1D::gaussian(0.3, 2.0).unwrap(), Distribution1D::bernoulli(-1.0, 2.0, 0.3).unwrap()];
    for d in &laws {
        for s in ["x1", "x1^2", "x1^3 - 2*x1", "x1^4 + x1", "0.5*x1^5 - x1^2"] {
            let r = stein_identity_check(d, &p(s, 1), 1e-8).unwrap();
            o.check(r.pass, || format!("stein {d:?} u = {s}: {} vs {}", r.lhs, r.rhs));
        }
    }
    let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
    for k in 0..10 {
        let x = -3.0 + 6.0 * k as f64 / 9.0;
        let tau = stein_kernel(&g, x).unwrap();
        o.check((tau - 1.0).abs() <= 1e-8, || format!("gaussian tau({x}) = {tau}"));
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let q = |h: f64| (1.0 - 4.0 * h * (1.0 - h)) / 8.0;
    for k in 0..1000 {
        let t = TAU * k as f64 / 1000.0;
        let s = TAU * ((k * 37) % 1000) as f64 / 1000.0 + 0.01;
        let h = (t - s).abs() / TAU;
        let h = h - h.floor();
        let v = circle_transfer(psi_circle_exact, t, s).unwrap();
        o.check((v - (q(h) - 1.0 / 32.0)).abs() <= 1e-10, || format!("transfer at ({t}, {s}): {v}"));
    }
    for t in [0.0, 1.0, 4.0] {
        let c = circle_marginal_constant(t).unwrap();
        o.check((c - 1.0 / 96.0).abs() <= 1e-10, || format!("marginal constant at {t}: {c}"));
    }
    let m = circle_hoeffding_total_mass();
    o.check((m - PI * PI / 3.0).abs() <= 1e-8, || format!("total mass {m}"));
    let tp = |c0: f64, cos: &[f64], sin: &[f64]| TrigPolynomial::new(TAU, c0, cos.to_vec(), sin.to_vec()).unwrap();
    let pairs = [
        (tp(0.0, &[1.0], &[]), tp(0.0, &[1.0], &[])),
        (tp(1.0, &[0.0], &[1.0]), tp(0.0, &[0.5, 0.0], &[0.0, 2.0])),
        (tp(0.0, &[0.3, -1.0], &[0.2]), tp(2.0, &[1.0, 1.0, 1.0], &[])),
        (tp(0.0, &[], &[0.0, 0.0, 1.0]), tp(0.0, &[0.0, 0.0, 1.0], &[1.0])),
        (tp(0.5, &[1.0, 0.5, 0.25, 0.125], &[-0.5]), tp(0.0, &[0.0, 1.0], &[0.3, 0.0, -0.7])),
    ];
    for (i, (u, v)) in pairs.iter().enumerate() {
        let r = circle_hoeffding_representation(u, v, 1e-10).unwrap();
        o.check(r.pass, || format!("pair {i}: {} vs {}", r.lhs, r.rhs));
    }
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    for n in [10usize, 50] {
        let e = deviation_experiment(&p("x1", n), &grid, 10_000_000, 7 + n as u64).unwrap();
        let nf = n as f64;
        for row in &e.rows {
            let slack = 4.0 * row.std_error;
            o.check(row.empirical <= row.bound_classical + slack, || format!("n = {n}, r = {}: classical", row.r));
            o.check(row.empirical <= row.bound_mean_deviation + slack, || format!("n = {n}, r = {}: mean-deviation", row.r));
            // noise-free: exact tail of θ1 against both bounds with exact E|θ1|
            let tail = coordinate_tail(n, row.r).unwrap();
            let b18 = (-(nf - 2.0) * row.r * row.r / 2.0).exp() * coordinate_abs_mean(n) / row.r;
            o.check(tail <= row.bound_classical && tail <= b18, || format!("n = {n}, r = {}: exact tail {tail}", row.r));
            o.check(row.pass, || format!("n = {n}, r = {}: row {row:?}", row.r));
        }
    }
    let opts = CheckOptions { samples: 200_000, seed: 11, atol: 1e-9 };
    for n in [5usize, 10] {
        let q = format!("x1^2 - {}", 1.0 / n as f64);
        for s in ["x1", "x1*x2", q.as_str(), "0.5*x1 - x2*x3"] {
            for r in exp_moment_check(&p(s, n), 1, &opts).unwrap() {
                o.check(r.pass, || format!("order 1, n = {n}, f = {s}: {} vs {}", r.lhs, r.rhs));
            }
        }
    }
    for n in [6usize, 10] {
        let q = format!("x1^2 - {}", 1.0 / n as f64);
        for s in ["x1*x2", q.as_str(), "x1*x2*x3", "0.5*x1*x2 - x3^2 + x4^2"] {
            for r in exp_moment_check(&p(s, n), 2, &opts).unwrap() {
                o.check(r.pass, || format!("order 2, n = {n}, f = {s}: {} {} vs {}", r.identity_id, r.lhs, r.rhs));
            }
        }
    }
    o
}

type Criterion = (usize, &'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "circle golden values", criterion_1, Duration::from_secs(5)),
        (2, "mixing constant bounds", criterion_2, Duration::from_secs(10)),
        (3, "first-order spherical identity", criterion_3, Duration::from_secs(120)),
        (4, "second-order spherical identity", criterion_4, Duration::from_secs(120)),
        (5, "semigroup consistency", criterion_5, Duration::from_secs(120)),
        (6, "Gaussian representations", criterion_6, Duration::from_secs(120)),
        (7, "boundary asymptotics", criterion_7, Duration::from_secs(60)),
        (8, "Hoeffding suite", criterion_8, Duration::from_secs(60)),
        (9, "periodic and circle chain", criterion_9, Duration::from_secs(60)),
        (10, "concentration", criterion_10, Duration::from_secs(180)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let mut out = run();
        let took = start.elapsed();
        out.check(took <= budget, || format!("runtime {took:?} exceeds {budget:?}"));
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let known = if !out.pass && KNOWN_FAILURES.contains(&id) { " (known)" } else { "" };
        println!("criterion {id:>2} {tag}{known}: {name} [{:.1} s]", took.as_secs_f64());
        for d in &out.details {
            println!("    {d}");
        }
        if !out.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
