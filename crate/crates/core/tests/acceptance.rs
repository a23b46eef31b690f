//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any FAIL.

use std::f64::consts::PI;
use std::fs;
use std::panic;
use std::process::Command;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use warpcheck::cases::{case_residuals, incompatibility_witness, CaseParams, CaseTag};
use warpcheck::catalog::{
    case2b_constant_f, make_entry, polar_pullback_check, CatalogEntry, CatalogId, CatalogParams,
};
use warpcheck::expr::{Constants, Expression};
use warpcheck::geometry::{gauss_curvature, ricci, Domain, Metric2D, Sign};
use warpcheck::pde::{newton_solve, GridProblem, Init};
use warpcheck::warped::{trace_residuals, Dims, WarpedProduct};

type Outcome = Result<String, String>;

fn entry(id: CatalogId, lambda: f64, big_a: f64) -> CatalogEntry {
    make_entry(id, CatalogParams { lambda, big_a }).unwrap()
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Entries of criterion 1 and 2: eq12, eq20 for three λ, case 1b for A = ±1.
fn closed_form_entries() -> Vec<(String, CatalogEntry)> {
    let mut v = vec![("eq12".to_string(), entry(CatalogId::Eq12, 0.0, 0.0))];
    for lambda in [-1.0, 0.5, 2.0] {
        v.push((format!("eq20(lambda={lambda})"), entry(CatalogId::Eq20, lambda, 0.0)));
    }
    for a in [1.0, -1.0] {
        v.push((format!("case1b(A={a})"), entry(CatalogId::Case1bMetric, 0.0, a)));
    }
    v
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, e) in closed_form_entries() {
        let grid = e.default_grid();
        assert_eq!(grid.shape, (40, 16));
        for p in &grid.points {
            let k = gauss_curvature(&e.metric, p).unwrap();
            let closed = e.closed_k.eval(p).unwrap();
            let rel = (k - closed).abs() / closed.abs();
            if rel > worst || rel.is_nan() {
                worst = if rel.is_nan() { f64::INFINITY } else { rel };
                worst_at = name.clone();
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-6 && secs <= 5.0,
        format!("max relative |K - K_closed| = {worst:.2e} ({worst_at}), tol 1e-6; {secs:.2} s of 5 s"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, e) in closed_form_entries() {
        let params = match e.id {
            CatalogId::Eq12 => CaseParams::new(CaseTag::OneA, 0.0, 0.0, -2.0),
            CatalogId::Eq20 => CaseParams::new(CaseTag::TwoB, e.params.lambda, 0.0, -2.0),
            // h = -1, so A = mu
            _ => CaseParams::new(CaseTag::OneB, 0.0, e.params.big_a, -2.0),
        }
        .unwrap();
        for p in &e.default_grid().points {
            let r = case_residuals(&e.metric, &e.u_field, &params, p).unwrap();
            let m = r.max_abs();
            if m > worst || m.is_nan() {
                worst = if m.is_nan() { f64::INFINITY } else { m };
                worst_at = name.clone();
            }
        }
    }
    ensure(
        worst <= 1e-9,
        format!("max |case residual| = {worst:.2e} ({worst_at}), tol 1e-9"),
    )
}

/// Random smooth positive metric component and field over `(x, y)` near
/// `[0.5, 1.5]²`.
fn random_metric(rng: &mut ChaCha8Rng, vars: [&str; 2]) -> Metric2D {
    let [x, y] = vars;
    let a = rng.random_range(0.3..2.0);
    let b = rng.random_range(-0.5..0.5);
    let c = rng.random_range(0.3..2.0);
    let d = rng.random_range(-0.5..0.5);
    let e = format!("{a} + {x}^2*exp({b}*{y})");
    let g = match rng.random_range(0..3) {
        0 => format!("{c} + ({x}*{y})^2 + {d}*sin({x})"),
        1 => format!("{x}^4*exp({d}*{x}*{y}) + {c}"),
        _ => format!("({c} + {x}^2 + {y}^2)^(3/2)"),
    };
    Metric2D::new(
        vars,
        &e,
        &g,
        &Constants::new(),
        [Sign::Plus, Sign::Plus],
        Domain::new([0.5, 0.5], [1.5, 1.5], false),
    )
    .unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, vars: [&str; 2]) -> Expression {
    let [x, y] = vars;
    let p = rng.random_range(-1.0..1.0);
    let q = rng.random_range(-1.0..1.0);
    let s = rng.random_range(0.5..2.0);
    let text = format!("{s} + {p}*{x}^3*{y} + exp({q}*{x}) - 0.2*{y}^2");
    Expression::parse_vars(&text, &vars).unwrap()
}

/// Strictly positive on `[0.5, 1.5]²`.
fn random_warp(rng: &mut ChaCha8Rng) -> Expression {
    let p = rng.random_range(-1.0..1.0);
    let q = rng.random_range(-1.0..1.0);
    let s = rng.random_range(0.5..2.0);
    let text = format!("{s} + exp({q}*x)*(1 + 0.5*sin({p}*x*y))");
    Expression::parse_vars(&text, &["x", "y"]).unwrap()
}

fn rel_gap(lhs: f64, rhs: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    (lhs - rhs).abs() / scale
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut t4, mut t9, mut t18) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let g = random_metric(&mut rng, ["x", "y"]);
        let f = random_field(&mut rng, ["x", "y"]);
        let lambda = rng.random_range(-2.0..2.0);
        let mu = rng.random_range(-2.0..2.0);
        let m = rng.random_range(2..6usize);
        let p = [rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)];

        let t = trace_residuals(&g, &f, Dims { m, n: 2 }, lambda, mu, &p).unwrap();
        let mm = (m * (m - 1)) as f64;
        t4 = t4.max(rel_gap(mm * t.res4, t.res2 + t.res3, &[mm * t.res4, t.res2, t.res3]));

        let u = f.eval(&p).unwrap();
        let a = case_residuals(&g, &f, &CaseParams::new(CaseTag::OneA, 0.0, 0.0, -2.0).unwrap(), &p)
            .unwrap();
        t9 = t9.max(rel_gap(a.second, u * a.first + a.third, &[a.second, u * a.first, a.third]));
        let b = case_residuals(&g, &f, &CaseParams::new(CaseTag::TwoB, lambda, 0.0, -2.0).unwrap(), &p)
            .unwrap();
        t18 = t18.max(rel_gap(b.second, u * b.first + b.third, &[b.second, u * b.first, b.third]));
    }
    let worst = t4.max(t9).max(t18);
    ensure(
        worst <= 1e-12,
        format!(
            "100 random inputs: trace identity {t4:.1e}, res9 recombination {t9:.1e}, res18 recombination {t18:.1e} (relative to the largest term), tol 1e-12"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let e = entry(CatalogId::Eq12, 0.0, 0.0);
    let w = incompatibility_witness(&e.metric, &e.u_field, &e.default_grid().points, 1e-6).unwrap();
    let bound = 4.0 * w.min_u;
    ok &= w.pass && w.min_u > 0.0 && w.min_abs_gap >= bound * (1.0 - 1e-12);
    lines.push(format!("1a min gap {:.4} vs 4 min u {:.4}", w.min_abs_gap, bound));
    for a in [1.0, -1.0] {
        let e = entry(CatalogId::Case1bMetric, 0.0, a);
        let w = incompatibility_witness(&e.metric, &e.u_field, &e.default_grid().points, 1e-6).unwrap();
        ok &= w.pass && w.min_abs_gap > 0.0;
        lines.push(format!("1b(A={a}) min gap {:.3e} frac {:.3}", w.min_abs_gap, w.fraction_exceeding));
    }
    for lambda in [-1.0, 0.5, 2.0] {
        let e = entry(CatalogId::Eq20, lambda, 0.0);
        let w = incompatibility_witness(&e.metric, &e.u_field, &e.default_grid().points, 1e-6).unwrap();
        ok &= w.pass && w.min_abs_gap > 0.0;
        lines.push(format!("2b(lambda={lambda}) min gap {:.3e} frac {:.3}", w.min_abs_gap, w.fraction_exceeding));
    }
    ensure(ok, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut blocks, mut mixed) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let base = random_metric(&mut rng, ["x", "y"]);
        let fiber = random_metric(&mut rng, ["p", "q"]);
        let f = random_warp(&mut rng);
        let wp = WarpedProduct::new(base, fiber, f).unwrap();
        let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.5..1.5));
        let gaps = wp.block_identity_check(&p).unwrap();
        blocks = blocks.max(gaps.base.max(gaps.fiber));
        mixed = mixed.max(gaps.mixed);
    }
    ensure(
        blocks <= 1e-5 && mixed <= 1e-5,
        format!("20 random warped products: block gap {blocks:.2e}, mixed {mixed:.2e}, tol 1e-5"),
    )
}

fn criterion_6() -> Outcome {
    let base = Metric2D::flat(
        ["x", "y"],
        [Sign::Plus, Sign::Plus],
        Domain::new([0.5, 0.5], [1.5, 1.5], false),
    );
    let fiber = Metric2D::new(
        ["psi", "phi"],
        "1",
        "sin(psi)^2",
        &Constants::new(),
        [Sign::Plus, Sign::Plus],
        Domain::new([0.3, 0.0], [PI - 0.3, 2.0 * PI], true),
    )
    .unwrap();
    let f = Expression::parse_vars("x", &["x", "y"]).unwrap();
    let wp = WarpedProduct::new(base, fiber, f).unwrap();
    let full = wp.assemble().unwrap();
    let (mut res, mut ric) = (0.0f64, 0.0f64);
    for pb in &wp.base().domain().grid(5, 5, false).points {
        for pf in &wp.fiber().domain().grid(4, 4, false).points {
            res = res.max(wp.einstein_residuals(0.0, 1.0, pb, pf).unwrap().max_abs());
            let r = ricci(&full, &[pb[0], pb[1], pf[0], pf[1]]).unwrap();
            ric = ric.max(r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    ensure(
        res <= 1e-7 && ric <= 1e-5,
        format!("Einstein residuals {res:.2e} (tol 1e-7), sup |Ric| {ric:.2e} (tol 1e-5)"),
    )
}

fn criterion_7() -> Outcome {
    let eq12 = Metric2D::new(
        ["r", "theta"],
        "1",
        "r^10",
        &Constants::new(),
        [Sign::Plus, Sign::Plus],
        Domain::new([1.0, 0.0], [3.0, 2.0 * PI], true),
    )
    .unwrap();
    let u = Expression::parse_vars("4/r^2", &["r", "theta"]).unwrap();
    let solve = |n1, n2| newton_solve(&GridProblem::new(eq12.clone(), 1.0, 0.0, n1, n2, u.clone()), 1e-10, 50);
    let coarse = solve(64, 32).map_err(|e| e.to_string())?;
    let fine = solve(128, 64).map_err(|e| e.to_string())?;
    let (e1, e2) = (coarse.max_error(&u).unwrap(), fine.max_error(&u).unwrap());
    let ratio = e1 / e2;

    let square = Metric2D::flat(
        ["x", "y"],
        [Sign::Plus, Sign::Plus],
        Domain::new([0.0, 0.0], [1.0, 1.0], false),
    );
    let affine = Expression::parse_vars("1 + 2*x", &["x", "y"]).unwrap();
    let flat = newton_solve(
        &GridProblem::new(square, 0.0, 0.0, 33, 33, affine.clone()).with_init(Init::Zero),
        1e-10,
        50,
    )
    .map_err(|e| e.to_string())?;
    let affine_err = flat.max_error(&affine).unwrap();

    ensure(
        coarse.newton_iterations() <= 8
            && coarse.final_residual <= 1e-9
            && ratio >= 3.5
            && affine_err <= 1e-11,
        format!(
            "{} Newton iterations, residual {:.2e}; nodal error {e1:.2e} -> {e2:.2e} (ratio {ratio:.2}, need 3.5); affine error {affine_err:.1e}",
            coarse.newton_iterations(),
            coarse.final_residual
        ),
    )
}

fn criterion_8() -> Outcome {
    let grid = Domain::new([0.5, 0.0], [5.0, 2.0 * PI], true).grid(40, 16, true);
    let r = polar_pullback_check(&grid.points, 1e-10).unwrap();
    ensure(
        r.pass,
        format!(
            "componentwise gap {:.2e} relative to max(1, |g_eq12|) (absolute {:.2e}), tol 1e-10",
            r.max_scaled, r.max_abs
        ),
    )
}

fn criterion_9() -> Outcome {
    let (plus, minus) = case2b_constant_f(8.0, 1.0).map_err(|e| e.to_string())?;
    let s = 57f64.sqrt();
    let gap = (plus - (11.0 + s)).abs().max((minus - (11.0 - s)).abs());
    ensure(gap <= 1e-12, format!("({plus:.6}, {minus:.6}) vs 11 +- sqrt(57), gap {gap:.1e}"))
}

fn criterion_10() -> Outcome {
    let dir = std::env::temp_dir().join(format!("warpcheck-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_warpcheck"))
            .args(["verify-case", "1a", "--c", "-2", "--out"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("verify-case exited with {status}"));
        }
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let body: Vec<&str> = text.lines().filter(|l| !l.contains("timestamp")).collect();
        texts.push(body.join("\n"));
    }
    let _ = fs::remove_dir_all(&dir);
    ensure(
        texts[0] == texts[1],
        format!("two verify-case 1a reports, {} bytes each, identical modulo the timestamp line", texts[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form curvature", criterion_1),
        ("case-system residuals", criterion_2),
        ("derivation identities", criterion_3),
        ("incompatibility witnesses", criterion_4),
        ("block identity", criterion_5),
        ("Ricci-flat example", criterion_6),
        ("PDE recovery", criterion_7),
        ("polar substitution", criterion_8),
        ("reported constants", criterion_9),
        ("determinism", criterion_10),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of 10 passed in {:.1} s",
        10 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
