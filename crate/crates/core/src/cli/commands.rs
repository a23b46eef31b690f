use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::config::{Common, GridSize, Merged, MetricSpec, Range};
use super::report::{emit_bytes, Check, Csv, Report};
use super::{CliError, EXIT_FAIL, EXIT_PASS};
use crate::cases::{
    case_residuals, equation_tags, f_equation_residuals, f_equation_tags, incompatibility_witness,
    recover_f, substitution_factors, CaseParams, CaseTag,
};
use crate::catalog::{
    case2b_constant_f, coframe_norm_check, factorization_check, make_entry, polar_curvature_check,
    polar_pullback_check, reconstruct_f, verify_closed_k, CatalogEntry, CatalogId, CatalogParams,
    GapReport,
};
use crate::expr::{BinOp, Constants, Expression};
use crate::geometry::{gauss_curvature, ricci, Domain, Grid2D, Metric2D, Sign};
use crate::pde::{newton_solve, GridProblem, Init, PdeError, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::warped::{estimate_mu, trace_residuals, Dims, WarpedProduct};

/// `c = -2` makes `h = -1`, so `f = u` and `A = μ`.
const DEFAULT_C: f64 = -2.0;

const TOL_CLOSED_K: f64 = 1e-6;
const TOL_RESIDUAL: f64 = 1e-9;
const TOL_COFRAME: f64 = 1e-9;
const TOL_FACTORIZATION: f64 = 1e-12;
const TOL_PULLBACK: f64 = 1e-10;
const TOL_GAP: f64 = 1e-6;
const TOL_EINSTEIN: f64 = 1e-7;
const TOL_BLOCK: f64 = 1e-5;
const TOL_TRACE: f64 = 1e-10;

struct Tolerances<'a>(&'a BTreeMap<String, f64>);

impl<'a> Tolerances<'a> {
    fn new(m: &'a Merged) -> Result<Self, CliError> {
        for (k, v) in &m.file.tolerances {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance for `{k}` must be positive")));
            }
        }
        Ok(Self(&m.file.tolerances))
    }

    fn get(&self, id: &str, default: f64) -> f64 {
        self.0.get(id).copied().unwrap_or(default)
    }
}

fn exit_code(ok: bool) -> i32 {
    if ok {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn gap_check(id: &str, equation: Option<&str>, description: &str, r: &GapReport) -> Check {
    Check::at_most(id, equation, description, r.max_scaled, r.tol).with_detail(r)
}

fn parse_tag(tag: Option<String>, m: &Merged) -> Result<CaseTag, CliError> {
    let s = tag
        .or_else(|| m.file.case.clone())
        .ok_or_else(|| CliError::Config("missing case tag (1a, 1b or 2b)".into()))?;
    Ok(s.parse()?)
}

fn case_params(tag: CaseTag, m: &Merged) -> Result<CaseParams, CliError> {
    let c = m.c.unwrap_or(DEFAULT_C);
    if c == 0.0 {
        return Err(CliError::Config(
            "c = 0 gives h = 0, where the substitution u = -h f is singular".into(),
        ));
    }
    Ok(CaseParams::new(tag, m.lambda.unwrap_or(0.0), m.mu.unwrap_or(0.0), c)?)
}

fn entry_for(params: &CaseParams) -> Result<CatalogEntry, CliError> {
    let id = match params.tag {
        CaseTag::OneA => CatalogId::Eq12,
        CaseTag::OneB => CatalogId::Case1bMetric,
        CaseTag::TwoB => CatalogId::Eq20,
    };
    Ok(make_entry(
        id,
        CatalogParams {
            lambda: params.lambda,
            big_a: params.big_a,
        },
    )?)
}

fn override_first_axis(metric: &Metric2D, range: Option<Range>) -> Metric2D {
    match range {
        Some(r) => {
            let d = metric.domain();
            metric.with_domain(Domain::new([r.lo, d.lo[1]], [r.hi, d.hi[1]], d.periodic))
        }
        None => metric.clone(),
    }
}

fn sample_grid(metric: &Metric2D, size: GridSize, log_first: bool) -> Grid2D {
    let d = metric.domain();
    d.grid(size.n1, size.n2, log_first && d.lo[0] > 0.0)
}

fn entry_grid(entry: &mut CatalogEntry, m: &Merged) -> Grid2D {
    entry.metric = override_first_axis(&entry.metric, m.domain);
    let size = m.grid.unwrap_or(GridSize {
        n1: entry.grid_spec.n1,
        n2: entry.grid_spec.n2,
    });
    sample_grid(&entry.metric, size, entry.grid_spec.log_first)
}

fn domain_json(d: &Domain) -> Value {
    json!({ "lo": d.lo, "hi": d.hi, "periodic": d.periodic })
}

fn residual_maxima(
    entry: &CatalogEntry,
    params: &CaseParams,
    points: &[[f64; 2]],
) -> Result<[f64; 3], CliError> {
    let mut max = [0.0f64; 3];
    for p in points {
        let r = case_residuals(&entry.metric, &entry.u_field, params, p)?.as_array();
        for i in 0..3 {
            max[i] = max[i].max(r[i].abs());
        }
    }
    Ok(max)
}

/// `|u-residual - k f-residual|` with `f = -u/h`, scaled by
/// `max(1, |u-residual|)`. Evaluated on `u + 1/4`, which solves nothing, so
/// the residuals being compared are not both zero.
fn substitution_maxima(
    entry: &CatalogEntry,
    params: &CaseParams,
    points: &[[f64; 2]],
) -> Result<[f64; 3], CliError> {
    let shift = Expression::constant(0.25, entry.u_field.vars());
    let u = Expression::combine(BinOp::Add, &entry.u_field, &shift);
    let f = recover_f(&u, params.h)?;
    let k = substitution_factors(params);
    let mut max = [0.0f64; 3];
    for p in points {
        let ur = case_residuals(&entry.metric, &u, params, p)?.as_array();
        let fr = f_equation_residuals(&entry.metric, &f, params, p)?;
        for i in 0..3 {
            max[i] = max[i].max((ur[i] - k[i] * fr[i]).abs() / ur[i].abs().max(1.0));
        }
    }
    Ok(max)
}

/// Largest entry of `Ric - λ ḡ` of the assembled warped product.
fn einstein_4d_gap(wp: &WarpedProduct, lambda: f64, p: &[f64; 4]) -> Result<f64, CliError> {
    let full = wp.assemble()?;
    let ric = ricci(&full, p)?;
    let diag = full.diagonal(p)?;
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { lambda * diag[i] } else { 0.0 };
            worst = worst.max((ric[i][j] - target).abs());
        }
    }
    Ok(worst)
}

fn consts(pairs: &[(&str, f64)]) -> Constants {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn sphere(radius_sq: f64, signs: [Sign; 2]) -> Result<Metric2D, CliError> {
    Ok(Metric2D::new(
        ["psi", "phi"],
        "R2",
        "R2*sin(psi)^2",
        &consts(&[("R2", radius_sq)]),
        signs,
        Domain::new([0.3, 0.0], [PI - 0.3, 2.0 * PI], true),
    )?)
}

/// The Einstein warped product of the `h = 0` branch: flat base, linear
/// (or constant) warping function, Einstein fiber with constant `μ`.
fn flat_branch(tag: CaseTag, mu: f64) -> Result<(WarpedProduct, &'static str), CliError> {
    let pp = [Sign::Plus, Sign::Plus];
    let mm = [Sign::Minus, Sign::Minus];
    let unit = Domain::new([0.5, 0.5], [1.5, 1.5], false);
    let xy = ["x", "y"];
    let (base, warp, fiber, label) = if tag == CaseTag::OneA {
        (
            Metric2D::flat(xy, pp, unit),
            "1",
            Metric2D::flat(["p", "q"], mm, Domain::new([0.0, 0.0], [1.0, 1.0], false)),
            "flat base, f = 1, flat (-,-) fiber",
        )
    } else if mu > 0.0 {
        (
            Metric2D::flat(xy, pp, unit),
            "k*x",
            sphere(1.0 / mu, pp)?,
            "flat base, f = sqrt(mu) x, sphere of radius 1/sqrt(mu)",
        )
    } else {
        (
            Metric2D::flat(xy, [Sign::Plus, Sign::Minus], unit),
            "k*y",
            sphere(1.0 / -mu, mm)?,
            "flat (+,-) base, f = sqrt(|mu|) y, negated sphere of radius 1/sqrt(|mu|)",
        )
    };
    let warp = Expression::parse(warp, &xy, &consts(&[("k", mu.abs().sqrt())]))?;
    Ok((WarpedProduct::new(base, fiber, warp)?, label))
}

fn flat_branch_checks(
    report: &mut Report,
    tag: CaseTag,
    mu: f64,
    tols: &Tolerances,
) -> Result<(), CliError> {
    let (wp, label) = flat_branch(tag, mu)?;
    let base_points = wp.base().domain().grid(4, 4, false).points;
    let fiber_points = wp.fiber().domain().grid(3, 3, false).points;
    let (mut residual, mut ricci_gap) = (0.0f64, 0.0f64);
    for pb in &base_points {
        for pf in &fiber_points {
            residual = residual.max(wp.einstein_residuals(0.0, mu, pb, pf)?.max_abs());
            ricci_gap = ricci_gap.max(einstein_4d_gap(&wp, 0.0, &[pb[0], pb[1], pf[0], pf[1]])?);
        }
    }
    let full = wp.assemble()?;
    let (pos, neg) = full.signature();
    let id = format!("flat_branch_{tag}");
    let detail = json!({ "construction": label, "signature": format!("({pos}+{neg})"), "mu": mu });
    report.push(
        Check::at_most(
            &id,
            Some("eq1"),
            "Einstein residuals of the flat-base branch",
            residual,
            tols.get(&id, TOL_EINSTEIN),
        )
        .with_detail(&detail),
    );
    let id4 = format!("{id}_ricci4d");
    report.push(Check::at_most(
        &id4,
        Some("eq1"),
        "sup |Ric| of the assembled 4D metric",
        ricci_gap,
        tols.get(&id4, TOL_BLOCK),
    ));
    Ok(())
}

pub fn verify_case(tag: Option<String>, common: &Common) -> Result<i32, CliError> {
    let m = Merged::new(common)?;
    let tag = parse_tag(tag, &m)?;
    let params = case_params(tag, &m)?;
    let tols = Tolerances::new(&m)?;
    let res_tol = m.tol.unwrap_or(TOL_RESIDUAL);
    let mut entry = entry_for(&params)?;
    let grid = entry_grid(&mut entry, &m);
    let id = entry.id.as_str();

    let config = json!({
        "case": tag,
        "c": params.c,
        "lambda": params.lambda,
        "mu": params.mu,
        "grid": { "n1": grid.shape.0, "n2": grid.shape.1 },
        "domain": domain_json(entry.domain()),
        "tol": res_tol,
        "tolerances": m.file.tolerances,
        "catalog_entry": id,
    });
    let mut report = Report::new("verify-case", config);
    let pts = &grid.points;

    let closed = verify_closed_k(&entry, pts, tols.get(&format!("closedK_{id}"), TOL_CLOSED_K))?;
    report.push(gap_check(
        &format!("closedK_{id}"),
        Some(id).filter(|s| s.starts_with("eq")),
        "numerical Gauss curvature vs closed form (scaled by max(1,|K|))",
        &closed,
    ));
    if tag == CaseTag::OneA {
        let pb = polar_pullback_check(pts, tols.get("pullback_eq11", TOL_PULLBACK))?;
        report.push(gap_check(
            "pullback_eq11",
            Some("eq11"),
            "eq11 pulled back by u = 4/r^2, v = 32 theta vs eq12, componentwise",
            &pb,
        ));
        let kc = polar_curvature_check(pts, tols.get("closedK_eq11", TOL_CLOSED_K))?;
        report.push(gap_check(
            "closedK_eq11",
            Some("eq11"),
            "K of eq11 at (4/r^2, 32 theta) vs K of eq12 at (r, theta)",
            &kc,
        ));
    }
    let cf = coframe_norm_check(&entry, pts, tols.get(&format!("coframe_norm_{id}"), TOL_COFRAME))?;
    report.push(gap_check(
        &format!("coframe_norm_{id}"),
        None,
        "|grad u|^2 - (u^3 + A), the unit normalization of omega_1",
        &cf,
    ));
    if tag == CaseTag::OneB {
        let fc = factorization_check(&entry, pts, tols.get("factorization", TOL_FACTORIZATION))?;
        report.push(gap_check(
            "factorization",
            None,
            "(u - a)(u^2 + u a + a^2) - (u^3 + A) with A = -a^3",
            &fc,
        ));
    }

    let tags = equation_tags(tag);
    let maxima = residual_maxima(&entry, &params, pts)?;
    for (i, eq) in tags.iter().enumerate().filter(|(_, t)| !t.is_empty()) {
        let cid = format!("{eq}_residual");
        report.push(Check::at_most(
            &cid,
            Some(eq),
            "max |residual| over the grid",
            maxima[i],
            tols.get(&cid, res_tol),
        ));
    }
    let ftags = f_equation_tags(tag);
    let subst = substitution_maxima(&entry, &params, pts)?;
    for i in (0..3).filter(|&i| !tags[i].is_empty()) {
        let cid = format!("subst_{}_{}", ftags[i], tags[i]);
        report.push(Check::at_most(
            &cid,
            Some(tags[i]),
            "u-equation residual minus its factor times the f-equation residual (f = -u/h, u shifted off the solution)",
            subst[i],
            tols.get(&cid, res_tol),
        ));
    }

    let gap_tol = tols.get("gap_K_plus_u", TOL_GAP);
    let w = incompatibility_witness(&entry.metric, &entry.u_field, pts, gap_tol)?;
    report.push(
        Check::at_least(
            "gap_K_plus_u",
            Some(id).filter(|s| s.starts_with("eq")),
            "min |K + u| over the grid; PASS when at least 99% of points exceed tol",
            w.min_abs_gap,
            gap_tol,
        )
        .with_status(w.pass)
        .with_detail(&w),
    );
    if tag == CaseTag::OneA {
        let ratio = w.min_abs_gap / (4.0 * w.min_u);
        report.push(
            Check::at_least(
                "gap_lower_bound",
                Some("eq12"),
                "min |K + u| / (4 min u); K = -5u gives at least 1",
                ratio,
                1.0,
            )
            .with_status(w.min_u > 0.0 && ratio >= 1.0 - 1e-12),
        );
    }
    if matches!(tag, CaseTag::OneA | CaseTag::OneB) {
        flat_branch_checks(&mut report, tag, params.mu, &tols)?;
    }

    let f0 = reconstruct_f(params.h, &entry, &pts[0])?;
    let mut values = json!({
        "h": params.h,
        "A": params.big_a,
        "a": params.a,
        "f_at_first_point": { "point": pts[0], "f": f0.f, "admissible": f0.admissible },
    });
    if tag == CaseTag::TwoB {
        let (plus, minus) = case2b_constant_f(params.lambda, params.c)?;
        values["constant_f"] = json!({ "plus": plus, "minus": minus, "note": "reported as stated, not derived" });
    }
    report.values = values;
    if let Some(w) = params.sign_warning() {
        report.warnings.push(w);
    }
    let ok = report.finish();
    report.emit(m.out.as_deref())?;
    Ok(exit_code(ok))
}

fn parse_signs(s: &str) -> Result<[Sign; 2], CliError> {
    let chars: Vec<char> = s.chars().collect();
    match chars.as_slice() {
        [a, b] => match (Sign::from_symbol(*a), Sign::from_symbol(*b)) {
            (Some(a), Some(b)) => Ok([a, b]),
            _ => Err(CliError::Config(format!("signs `{s}` must use + and -"))),
        },
        _ => Err(CliError::Config(format!("signs `{s}` must have two characters"))),
    }
}

fn metric_from_spec(spec: &MetricSpec) -> Result<Metric2D, CliError> {
    let vars = [spec.vars[0].as_str(), spec.vars[1].as_str()];
    Ok(Metric2D::new(
        vars,
        &spec.e,
        &spec.g,
        &spec.constants,
        parse_signs(&spec.signs)?,
        Domain::new(spec.lo, spec.hi, spec.periodic),
    )?)
}

pub struct CurvatureArgs {
    pub preset: Option<String>,
    pub vars: Option<Vec<String>>,
    pub e: Option<String>,
    pub g: Option<String>,
    pub signs: Option<String>,
    pub consts: Vec<String>,
}

fn parse_consts(items: &[String]) -> Result<Constants, CliError> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("constant `{s}` is not NAME=VALUE")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("constant `{s}`: bad value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

pub fn curvature(args: CurvatureArgs, common: &Common) -> Result<i32, CliError> {
    let m = Merged::new(common)?;
    let tols = Tolerances::new(&m)?;
    let preset = args.preset.clone().or_else(|| m.file.preset.clone());
    let custom = args.e.is_some() || args.g.is_some() || args.vars.is_some();
    let mut entry = None;
    let (metric, source, log_first) = if custom {
        let (Some(e), Some(g), Some(vars)) = (&args.e, &args.g, &args.vars) else {
            return Err(CliError::Config("a custom metric needs --vars, --e and --g".into()));
        };
        if vars.len() != 2 {
            return Err(CliError::Config("--vars needs two names".into()));
        }
        let Some(r) = m.domain else {
            return Err(CliError::Config("a custom metric needs --domain".into()));
        };
        let signs = parse_signs(args.signs.as_deref().unwrap_or("++"))?;
        let metric = Metric2D::new(
            [vars[0].as_str(), vars[1].as_str()],
            e,
            g,
            &parse_consts(&args.consts)?,
            signs,
            Domain::new([r.lo, 0.0], [r.hi, 1.0], false),
        )?;
        (metric, json!({ "vars": vars, "e": e, "g": g, "signs": args.signs, "constants": args.consts }), false)
    } else if let Some(spec) = &m.file.metric {
        (metric_from_spec(spec)?, serde_json::to_value(spec).unwrap_or(Value::Null), false)
    } else {
        let name = preset.as_deref().unwrap_or("eq12");
        if name == "flat" {
            let d = Domain::new([0.0, 0.0], [1.0, 1.0], false);
            (Metric2D::flat(["x", "y"], [Sign::Plus, Sign::Plus], d), json!("flat"), false)
        } else {
            let id: CatalogId = name.parse()?;
            let c = m.c.unwrap_or(DEFAULT_C);
            let e = make_entry(
                id,
                CatalogParams {
                    lambda: m.lambda.unwrap_or(0.0),
                    big_a: (c / 2.0).powi(2) * m.mu.unwrap_or(0.0),
                },
            )?;
            let log = e.grid_spec.log_first;
            let metric = e.metric.clone();
            entry = Some(e);
            (metric, json!(id), log)
        }
    };
    let metric = override_first_axis(&metric, m.domain);
    let size = m.grid.unwrap_or(GridSize { n1: 40, n2: 16 });
    let grid = sample_grid(&metric, size, log_first);
    let vars = metric.vars().clone();
    let mut csv = Csv::new(&[&vars[0], &vars[1], "K", "R"]);
    let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ks = Vec::with_capacity(grid.len());
    for p in &grid.points {
        let k = gauss_curvature(&metric, p)?;
        kmin = kmin.min(k);
        kmax = kmax.max(k);
        ks.push(k);
        csv.row(&[p[0], p[1], k, 2.0 * k]);
    }

    let config = json!({
        "metric": source,
        "domain": domain_json(metric.domain()),
        "grid": { "n1": grid.shape.0, "n2": grid.shape.1 },
        "lambda": m.lambda,
        "mu": m.mu,
        "c": m.c,
        "out": m.out,
    });
    let mut report = Report::new("curvature", config);
    if let Some(mut e) = entry {
        e.metric = metric.clone();
        let cid = format!("closedK_{}", e.id);
        let r = verify_closed_k(&e, &grid.points, tols.get(&cid, m.tol.unwrap_or(TOL_CLOSED_K)))?;
        report.push(gap_check(&cid, Some(e.id.as_str()), "numerical K vs closed form", &r));
    }
    report.values = json!({ "points": grid.len(), "min_K": kmin, "max_K": kmax });
    let ok = report.finish();
    match &m.out {
        Some(path) => {
            emit_bytes(Some(path), &csv.into_bytes())?;
            report.emit(None)?;
        }
        None => {
            emit_bytes(None, &csv.into_bytes())?;
            eprintln!("K in [{kmin:e}, {kmax:e}] over {} points", grid.len());
        }
    }
    Ok(exit_code(ok))
}

fn base_preset(name: &str, m: &Merged) -> Result<(Metric2D, &'static str), CliError> {
    let unit = Domain::new([0.5, 0.5], [1.5, 1.5], false);
    let pp = [Sign::Plus, Sign::Plus];
    let catalog = |id: CatalogId| -> Result<Metric2D, CliError> {
        let c = m.c.unwrap_or(DEFAULT_C);
        Ok(make_entry(
            id,
            CatalogParams {
                lambda: m.lambda.unwrap_or(0.0),
                big_a: (c / 2.0).powi(2) * m.mu.unwrap_or(0.0),
            },
        )?
        .metric)
    };
    Ok(match name {
        "flat" => (Metric2D::flat(["x", "y"], pp, unit), "x"),
        "flat-lorentz" => (Metric2D::flat(["x", "y"], [Sign::Plus, Sign::Minus], unit), "y"),
        "eq12" => (catalog(CatalogId::Eq12)?, "4/r^2"),
        "eq20" => (catalog(CatalogId::Eq20)?, "4/r^2"),
        "case1b" | "case1b_metric" => (catalog(CatalogId::Case1bMetric)?, "u"),
        other => {
            return Err(CliError::Config(format!(
                "unknown base `{other}` (flat, flat-lorentz, eq12, eq20, case1b)"
            )))
        }
    })
}

fn fiber_preset(name: &str) -> Result<Metric2D, CliError> {
    let pq = Domain::new([0.0, 0.0], [1.0, 1.0], false);
    let pp = [Sign::Plus, Sign::Plus];
    let mm = [Sign::Minus, Sign::Minus];
    match name {
        "flat" => Ok(Metric2D::flat(["p", "q"], pp, pq)),
        "flat-neg" => Ok(Metric2D::flat(["p", "q"], mm, pq)),
        "sphere" => sphere(1.0, pp),
        "sphere-neg" => sphere(1.0, mm),
        other => Err(CliError::Config(format!(
            "unknown fiber `{other}` (flat, flat-neg, sphere, sphere-neg)"
        ))),
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, d: &Domain) -> [f64; 2] {
    [
        rng.random_range(d.lo[0]..d.hi[0]),
        rng.random_range(d.lo[1]..d.hi[1]),
    ]
}

pub fn blockcheck(
    base: Option<String>,
    fiber: Option<String>,
    warp: Option<String>,
    samples: Option<usize>,
    common: &Common,
) -> Result<i32, CliError> {
    let m = Merged::new(common)?;
    let tols = Tolerances::new(&m)?;
    let lambda = m.lambda.unwrap_or(0.0);
    let mu = m.mu.unwrap_or(0.0);
    let seed = m.seed.unwrap_or(0);
    let samples = samples.or(m.file.samples).unwrap_or(16);
    if samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    let (base_metric, base_name, default_warp) = match (&m.file.base_metric, base.or(m.file.base.clone())) {
        (_, Some(name)) => {
            let (g, w) = base_preset(&name, &m)?;
            (g, json!(name), Some(w))
        }
        (Some(spec), None) => (metric_from_spec(spec)?, serde_json::to_value(spec).unwrap_or(Value::Null), None),
        (None, None) => {
            let (g, w) = base_preset("flat", &m)?;
            (g, json!("flat"), Some(w))
        }
    };
    let (fiber_metric, fiber_name) = match (&m.file.fiber_metric, fiber.or(m.file.fiber.clone())) {
        (_, Some(name)) => (fiber_preset(&name)?, json!(name)),
        (Some(spec), None) => (metric_from_spec(spec)?, serde_json::to_value(spec).unwrap_or(Value::Null)),
        (None, None) => (fiber_preset("sphere")?, json!("sphere")),
    };
    let base_metric = override_first_axis(&base_metric, m.domain);
    let warp_text = warp
        .or(m.file.warp.clone())
        .or(default_warp.map(str::to_string))
        .ok_or_else(|| CliError::Config("a custom base needs --warp".into()))?;
    let bv = base_metric.vars();
    let warp_expr = Expression::parse(&warp_text, &[bv[0].as_str(), bv[1].as_str()], &Constants::new())?;
    let wp = WarpedProduct::new(base_metric, fiber_metric, warp_expr)?;
    wp.check_positive_warp()?;
    let full = wp.assemble()?;
    let (pos, neg) = full.signature();

    let einstein_tol = m.tol.unwrap_or(TOL_EINSTEIN);
    let config = json!({
        "base": base_name,
        "fiber": fiber_name,
        "warp": warp_text,
        "lambda": lambda,
        "mu": mu,
        "c": m.c,
        "samples": samples,
        "seed": seed,
        "base_domain": domain_json(wp.base().domain()),
        "tol": einstein_tol,
        "tolerances": m.file.tolerances,
    });
    let mut report = Report::new("blockcheck", config);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap_bf, mut gap_mixed) = (0.0f64, 0.0f64);
    let (mut r_base, mut r_fiber, mut r_scalar) = (0.0f64, 0.0f64, 0.0f64);
    let (mut ric4, mut trace_gap) = (0.0f64, 0.0f64);
    let mut fiber_points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let pb = uniform_point(&mut rng, wp.base().domain());
        let pf = uniform_point(&mut rng, wp.fiber().domain());
        let p4 = [pb[0], pb[1], pf[0], pf[1]];
        let gaps = wp.block_identity_check(&p4)?;
        gap_bf = gap_bf.max(gaps.base.max(gaps.fiber));
        gap_mixed = gap_mixed.max(gaps.mixed);
        let er = wp.einstein_residuals(lambda, mu, &pb, &pf)?;
        r_base = r_base.max(er.base_max());
        r_fiber = r_fiber.max(er.fiber_max());
        r_scalar = r_scalar.max(er.r_scalar.abs());
        ric4 = ric4.max(einstein_4d_gap(&wp, lambda, &p4)?);
        let t = trace_residuals(wp.base(), wp.warp(), Dims::default(), lambda, mu, &pb)?;
        let scale = (t.res2.abs() + t.res3.abs()).max(1.0);
        trace_gap = trace_gap.max((2.0 * t.res4 - t.res2 - t.res3).abs() / scale);
        fiber_points.push(pf);
    }
    report.push(Check::at_most(
        "block_identity",
        Some("eq1"),
        "numerical 4D Ricci vs base and fiber block formulas",
        gap_bf,
        tols.get("block_identity", TOL_BLOCK),
    ));
    report.push(Check::at_most(
        "block_identity_mixed",
        Some("eq1"),
        "mixed base-fiber Ricci components",
        gap_mixed,
        tols.get("block_identity_mixed", TOL_BLOCK),
    ));
    report.push(
        Check::at_most(
            "einstein_residuals",
            Some("eq1"),
            "max Einstein residual over the base, fiber and scalar lines",
            r_base.max(r_fiber).max(r_scalar),
            einstein_tol,
        )
        .with_detail(&json!({ "base_block": r_base, "fiber_block": r_fiber, "scalar": r_scalar })),
    );
    report.push(Check::at_most(
        "ricci4d_einstein",
        Some("eq1"),
        "sup |Ric - lambda g| of the assembled 4D metric",
        ric4,
        tols.get("ricci4d_einstein", TOL_BLOCK),
    ));
    report.push(Check::at_most(
        "trace_identity",
        Some("eq4"),
        "|m(m-1) res4 - res2 - res3| scaled by max(1, |res2| + |res3|)",
        trace_gap,
        tols.get("trace_identity", TOL_TRACE),
    ));
    let mu_fit = estimate_mu(wp.fiber(), &fiber_points)?;
    report.values = json!({
        "signature": format!("({pos}+{neg})"),
        "fiber_mu_estimate": mu_fit,
    });
    let ok = report.finish();
    report.emit(m.out.as_deref())?;
    Ok(exit_code(ok))
}

struct SolvePreset {
    problem: GridProblem,
    exact: Expression,
}

fn solve_preset(name: &str, m: &Merged, size: GridSize) -> Result<SolvePreset, CliError> {
    let pp = [Sign::Plus, Sign::Plus];
    let annulus = Domain::new([1.0, 0.0], [3.0, 2.0 * PI], true);
    let rt = ["r", "theta"];
    let (metric, a, b, exact, init) = match name {
        "eq12-u" => (
            Metric2D::new(rt, "1", "r^10", &Constants::new(), pp, annulus)?,
            1.0,
            0.0,
            Expression::parse_vars("4/r^2", &rt)?,
            Init::Harmonic,
        ),
        "eq20-u" => {
            let lambda = m.lambda.unwrap_or(1.0);
            (
                Metric2D::new(rt, "1", "r^10*exp((lambda/2)*r^2)", &consts(&[("lambda", lambda)]), pp, annulus)?,
                1.0,
                lambda,
                Expression::parse_vars("4/r^2", &rt)?,
                Init::Harmonic,
            )
        }
        "flat-affine" => (
            Metric2D::flat(["x", "y"], pp, Domain::new([0.0, 0.0], [1.0, 1.0], false)),
            0.0,
            0.0,
            Expression::parse_vars("1 + 2*x", &["x", "y"])?,
            Init::Zero,
        ),
        other => {
            return Err(CliError::Config(format!(
                "unknown solve preset `{other}` (eq12-u, eq20-u, flat-affine)"
            )))
        }
    };
    let metric = override_first_axis(&metric, m.domain);
    let problem = GridProblem::new(metric, a, b, size.n1, size.n2, exact.clone()).with_init(init);
    Ok(SolvePreset { problem, exact })
}

pub fn solve(
    preset: Option<String>,
    max_iter: Option<usize>,
    report_path: Option<PathBuf>,
    common: &Common,
) -> Result<i32, CliError> {
    let m = Merged::new(common)?;
    let tols = Tolerances::new(&m)?;
    let name = preset
        .or(m.file.preset.clone())
        .ok_or_else(|| CliError::Config("missing --preset (eq12-u, eq20-u, flat-affine)".into()))?;
    let size = m.grid.unwrap_or(GridSize { n1: 64, n2: 32 });
    let tol = m.tol.unwrap_or(DEFAULT_TOL);
    let max_iter = max_iter.or(m.file.max_iter).unwrap_or(DEFAULT_MAX_ITER);
    let report_path = report_path.or(m.file.report.clone());
    let sp = solve_preset(&name, &m, size)?;
    let p = &sp.problem;

    let config = json!({
        "preset": name,
        "metric": { "e": p.metric.e().to_string(), "g": p.metric.g().to_string() },
        "domain": domain_json(p.metric.domain()),
        "a": p.a,
        "b": p.b,
        "boundary": p.boundary.to_string(),
        "grid": { "n1": size.n1, "n2": size.n2 },
        "tol": tol,
        "max_iter": max_iter,
        "lambda": m.lambda,
        "tolerances": m.file.tolerances,
    });
    let mut report = Report::new("solve", config);
    let result = match newton_solve(p, tol, max_iter) {
        Ok(r) => r,
        Err(PdeError::NoConvergence(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    report.push(
        Check::at_most(
            "newton_converged",
            None,
            "final sup-norm residual of the discrete equation",
            result.final_residual,
            tol,
        )
        .with_status(result.converged),
    );
    let d = p.metric.domain();
    let h1 = (d.hi[0] - d.lo[0]) / (size.n1 - 1) as f64;
    let error = result.max_error(&sp.exact)?;
    let bound = tols.get("nodal_error", h1 * h1);
    report.push(Check::at_most(
        "nodal_error",
        None,
        "max nodal error vs the exact solution (tol h^2, h the first-axis spacing)",
        error,
        bound,
    ));
    report.values = json!({
        "newton_iterations": result.newton_iterations(),
        "residual_trace": result.residual_trace,
        "step_norms": result.step_norms,
        "final_residual": result.final_residual,
        "converged": result.converged,
        "max_nodal_error": error,
        "h": h1,
    });
    if !result.converged {
        report.warnings.push(format!(
            "Newton did not converge in {} iterations",
            result.newton_iterations()
        ));
    }
    let ok = report.finish();
    if let Some(out) = &m.out {
        let mut buf = Vec::new();
        result
            .write_csv(&mut buf)
            .map_err(|e| CliError::Io(e.to_string()))?;
        emit_bytes(Some(out), &buf)?;
    }
    report.emit(report_path.as_deref())?;
    Ok(exit_code(ok))
}

pub fn residuals(tag: Option<String>, common: &Common) -> Result<i32, CliError> {
    let m = Merged::new(common)?;
    let tag = parse_tag(tag, &m)?;
    let params = case_params(tag, &m)?;
    let mut entry = entry_for(&params)?;
    let grid = entry_grid(&mut entry, &m);
    let tags: Vec<&str> = equation_tags(tag).into_iter().filter(|t| !t.is_empty()).collect();
    let vars = entry.metric.vars().clone();
    let mut header = vec![vars[0].as_str(), vars[1].as_str(), "u"];
    header.extend(&tags);
    let mut csv = Csv::new(&header);
    for p in &grid.points {
        let r = case_residuals(&entry.metric, &entry.u_field, &params, p)?;
        let mut row = vec![p[0], p[1], r.u];
        row.extend(&r.as_array()[..tags.len()]);
        csv.row(&row);
    }
    emit_bytes(m.out.as_deref(), &csv.into_bytes())?;
    Ok(EXIT_PASS)
}
