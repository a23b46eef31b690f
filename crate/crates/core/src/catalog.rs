//! Closed-form base metrics, their curvature formulas, and the checks tying
//! them together (coframe normalization, the polar change of variables).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::{CaseError, CaseTag};
use crate::expr::{Constants, Expression};
use crate::geometry::{
    field_derivatives, gauss_curvature, Domain, GeometryError, Grid2D, Metric2D, Sign,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("unknown catalog id `{0}` (expected eq11, eq12, case1b_metric or eq20)")]
    UnknownId(String),
    #[error("empty grid")]
    EmptyGrid,
    #[error("h = 0: f = -u/h is undefined")]
    ZeroH,
    #[error("c = 0: the constant values are undefined")]
    ZeroC,
}

impl From<crate::expr::ExprError> for CatalogError {
    fn from(e: crate::expr::ExprError) -> Self {
        CatalogError::Geometry(e.into())
    }
}

impl From<CaseError> for CatalogError {
    fn from(e: CaseError) -> Self {
        match e {
            CaseError::Geometry(g) => CatalogError::Geometry(g),
            CaseError::ZeroH => CatalogError::ZeroH,
            CaseError::EmptyGrid => CatalogError::EmptyGrid,
            other => CatalogError::BadParams(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogId {
    #[serde(rename = "eq11")]
    Eq11,
    #[serde(rename = "eq12")]
    Eq12,
    #[serde(rename = "case1b_metric")]
    Case1bMetric,
    #[serde(rename = "eq20")]
    Eq20,
}

impl CatalogId {
    pub const ALL: [CatalogId; 4] = [
        CatalogId::Eq11,
        CatalogId::Eq12,
        CatalogId::Case1bMetric,
        CatalogId::Eq20,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogId::Eq11 => "eq11",
            CatalogId::Eq12 => "eq12",
            CatalogId::Case1bMetric => "case1b_metric",
            CatalogId::Eq20 => "eq20",
        }
    }

    /// The case system the entry solves.
    pub fn case(self) -> CaseTag {
        match self {
            CatalogId::Eq11 | CatalogId::Eq12 => CaseTag::OneA,
            CatalogId::Case1bMetric => CaseTag::OneB,
            CatalogId::Eq20 => CaseTag::TwoB,
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogId {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eq11" => Ok(CatalogId::Eq11),
            "eq12" => Ok(CatalogId::Eq12),
            "case1b_metric" | "case1b" => Ok(CatalogId::Case1bMetric),
            "eq20" => Ok(CatalogId::Eq20),
            other => Err(CatalogError::UnknownId(other.to_string())),
        }
    }
}

/// The parameters a catalog entry depends on: `λ` for eq20, `A` for the
/// case-1b metric. Others ignore them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogParams {
    pub lambda: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
}

/// Default sampling of an entry: `n1` points on the first axis (log-spaced
/// when `log_first`) by `n2` on the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub log_first: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: CatalogId,
    pub params: CatalogParams,
    pub metric: Metric2D,
    pub closed_k: Expression,
    pub u_field: Expression,
    pub grid_spec: GridSpec,
}

impl CatalogEntry {
    pub fn domain(&self) -> &Domain {
        self.metric.domain()
    }

    pub fn default_grid(&self) -> Grid2D {
        self.grid(self.grid_spec.n1, self.grid_spec.n2)
    }

    pub fn grid(&self, n1: usize, n2: usize) -> Grid2D {
        self.domain().grid(n1, n2, self.grid_spec.log_first)
    }

    /// `A` in the normalization `|du|² = u³ + A` (zero for the case-1a and
    /// case-2b entries).
    pub fn norm_shift(&self) -> f64 {
        match self.id {
            CatalogId::Case1bMetric => self.params.big_a,
            _ => 0.0,
        }
    }
}

/// Lower bound of the case-1b `u`-range: clear of the singular locus
/// `u³ = -A` and of `u = 0`.
pub fn case1b_u_range(big_a: f64) -> (f64, f64) {
    let lo = (1.1 * (-big_a).cbrt()).max(0.5);
    (lo, 4.0f64.max(2.0 * lo))
}

const POLAR_GRID: GridSpec = GridSpec {
    n1: 40,
    n2: 16,
    log_first: true,
};

pub fn make_entry(id: CatalogId, params: CatalogParams) -> Result<CatalogEntry, CatalogError> {
    if !params.lambda.is_finite() || !params.big_a.is_finite() {
        return Err(CatalogError::BadParams("parameters must be finite".into()));
    }
    let pp = [Sign::Plus, Sign::Plus];
    let polar = Domain::new([0.5, 0.0], [5.0, 2.0 * PI], true);
    let rt = ["r", "theta"];
    let uv = ["u", "v"];
    let none = Constants::new();
    let (metric, closed_k, u_field, grid_spec) = match id {
        CatalogId::Eq11 => {
            let dom = Domain::new([4.0 / 25.0, 0.0], [16.0, 64.0 * PI], true);
            (
                Metric2D::new(uv, "u^-3", "u^-5", &none, pp, dom)?,
                Expression::parse("-5*u", &uv, &none)?,
                Expression::parse("u", &uv, &none)?,
                POLAR_GRID,
            )
        }
        CatalogId::Eq12 => (
            Metric2D::new(rt, "1", "r^10", &none, pp, polar)?,
            Expression::parse("-20/r^2", &rt, &none)?,
            Expression::parse("4/r^2", &rt, &none)?,
            POLAR_GRID,
        ),
        CatalogId::Case1bMetric => {
            if params.big_a == 0.0 {
                return Err(CatalogError::BadParams(
                    "the case-1b metric needs A != 0 (A = 0 is case 1a)".into(),
                ));
            }
            let consts = Constants::from([("A".to_string(), params.big_a)]);
            let (lo, hi) = case1b_u_range(params.big_a);
            let dom = Domain::new([lo, 0.0], [hi, 1.0], false);
            (
                Metric2D::new(uv, "(u^3+A)^-1", "(u^3+A)^(-5/3)", &consts, pp, dom)?,
                Expression::parse("5*u-10*u^4/(u^3+A)", &uv, &consts)?,
                Expression::parse("u", &uv, &consts)?,
                GridSpec {
                    n1: 40,
                    n2: 16,
                    log_first: false,
                },
            )
        }
        CatalogId::Eq20 => {
            let consts = Constants::from([("lambda".to_string(), params.lambda)]);
            (
                Metric2D::new(rt, "1", "r^10*exp((lambda/2)*r^2)", &consts, pp, polar)?,
                Expression::parse("-20/r^2-(11/2)*lambda-(lambda^2/4)*r^2", &rt, &consts)?,
                Expression::parse("4/r^2", &rt, &consts)?,
                POLAR_GRID,
            )
        }
    };
    Ok(CatalogEntry {
        id,
        params,
        metric,
        closed_k,
        u_field,
        grid_spec,
    })
}

/// Maximum discrepancy over a grid. `max_scaled` divides each gap by
/// `max(1, |reference|)`; checks pass on the scaled value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub points: usize,
    pub max_abs: f64,
    pub max_scaled: f64,
    pub worst_point: [f64; 2],
    pub tol: f64,
    pub pass: bool,
}

struct GapAccumulator {
    points: usize,
    max_abs: f64,
    max_scaled: f64,
    worst_point: [f64; 2],
}

impl GapAccumulator {
    fn new() -> Self {
        Self {
            points: 0,
            max_abs: 0.0,
            max_scaled: 0.0,
            worst_point: [f64::NAN; 2],
        }
    }

    fn push(&mut self, p: [f64; 2], gap: f64, reference: f64) {
        self.points += 1;
        let scaled = gap.abs() / reference.abs().max(1.0);
        self.max_abs = self.max_abs.max(gap.abs());
        // NaN gaps must not slip through as passes
        if scaled > self.max_scaled || scaled.is_nan() {
            self.max_scaled = if scaled.is_nan() { f64::INFINITY } else { scaled };
            self.worst_point = p;
        }
    }

    fn finish(self, tol: f64) -> GapReport {
        GapReport {
            points: self.points,
            max_abs: self.max_abs,
            max_scaled: self.max_scaled,
            worst_point: self.worst_point,
            tol,
            pass: self.max_scaled <= tol,
        }
    }
}

fn require_points(grid: &[[f64; 2]]) -> Result<(), CatalogError> {
    if grid.is_empty() {
        Err(CatalogError::EmptyGrid)
    } else {
        Ok(())
    }
}

/// Numerical Gauss curvature against the entry's closed-form `K`.
pub fn verify_closed_k(
    entry: &CatalogEntry,
    grid: &[[f64; 2]],
    tol: f64,
) -> Result<GapReport, CatalogError> {
    require_points(grid)?;
    let mut acc = GapAccumulator::new();
    for p in grid {
        let k = gauss_curvature(&entry.metric, p)?;
        let closed = entry.closed_k.eval(p)?;
        acc.push(*p, k - closed, closed);
    }
    Ok(acc.finish(tol))
}

/// `|∇u|²_g - (u³ + A)`, the normalization making `ω₁ = (u³+A)^(-1/2) du`
/// a unit 1-form.
pub fn coframe_norm_check(
    entry: &CatalogEntry,
    grid: &[[f64; 2]],
    tol: f64,
) -> Result<GapReport, CatalogError> {
    require_points(grid)?;
    let shift = entry.norm_shift();
    let mut acc = GapAccumulator::new();
    for p in grid {
        let d = field_derivatives(&entry.metric, &entry.u_field, p)?;
        let target = d.value.powi(3) + shift;
        acc.push(*p, d.grad_norm_sq - target, target);
    }
    Ok(acc.finish(tol))
}

/// `(u - a)(u² + ua + a²) - (u³ + A)` with `A = -a³`, on the case-1b entry.
pub fn factorization_check(
    entry: &CatalogEntry,
    grid: &[[f64; 2]],
    tol: f64,
) -> Result<GapReport, CatalogError> {
    require_points(grid)?;
    let big_a = entry.norm_shift();
    let a = -big_a.cbrt();
    let mut acc = GapAccumulator::new();
    for p in grid {
        let u = entry.u_field.eval(p)?;
        let target = u.powi(3) + big_a;
        acc.push(*p, (u - a) * (u * u + u * a + a * a) - target, target);
    }
    Ok(acc.finish(tol))
}

/// Pullback of the eq11 metric through `(u, v) = (4 r⁻², 32 θ)` compared
/// componentwise with eq12. Points are `(r, θ)`.
pub fn polar_pullback_check(grid: &[[f64; 2]], tol: f64) -> Result<GapReport, CatalogError> {
    require_points(grid)?;
    let eq11 = make_entry(CatalogId::Eq11, CatalogParams::default())?;
    let eq12 = make_entry(CatalogId::Eq12, CatalogParams::default())?;
    let rt = ["r", "theta"];
    let u_of = Expression::parse_vars("4/r^2", &rt)?;
    let v_of = Expression::parse_vars("32*theta", &rt)?;
    let mut acc = GapAccumulator::new();
    for p in grid {
        let ju = u_of.eval_jet(p)?;
        let jv = v_of.eval_jet(p)?;
        let q = [ju.value(), jv.value()];
        let [e11, g11] = eq11.metric.components(&q)?;
        // diagonal target, so the Jacobian of the map is diagonal as well
        let pulled = [
            e11 * ju.grad()[0].powi(2) + g11 * jv.grad()[0].powi(2),
            e11 * ju.grad()[1].powi(2) + g11 * jv.grad()[1].powi(2),
        ];
        let cross = e11 * ju.grad()[0] * ju.grad()[1] + g11 * jv.grad()[0] * jv.grad()[1];
        let target = eq12.metric.components(p)?;
        for i in 0..2 {
            acc.push(*p, pulled[i] - target[i], target[i]);
        }
        acc.push(*p, cross, 0.0);
    }
    Ok(acc.finish(tol))
}

/// Gauss curvature of eq11 at `(4r⁻², 32θ)` against eq12 at `(r, θ)`.
pub fn polar_curvature_check(grid: &[[f64; 2]], tol: f64) -> Result<GapReport, CatalogError> {
    require_points(grid)?;
    let eq11 = make_entry(CatalogId::Eq11, CatalogParams::default())?;
    let eq12 = make_entry(CatalogId::Eq12, CatalogParams::default())?;
    let mut acc = GapAccumulator::new();
    for p in grid {
        let q = [4.0 / (p[0] * p[0]), 32.0 * p[1]];
        let k12 = gauss_curvature(&eq12.metric, p)?;
        let k11 = gauss_curvature(&eq11.metric, &q)?;
        acc.push(*p, k11 - k12, k12);
    }
    Ok(acc.finish(tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructedF {
    pub f: f64,
    /// `f > 0`, as the warping function requires.
    pub admissible: bool,
}

/// `f = -u/h` at `p`.
pub fn reconstruct_f(h: f64, entry: &CatalogEntry, p: &[f64]) -> Result<ReconstructedF, CatalogError> {
    if h == 0.0 {
        return Err(CatalogError::ZeroH);
    }
    let f = -entry.u_field.eval(p)? / h;
    Ok(ReconstructedF {
        f,
        admissible: f > 0.0,
    })
}

/// The two constant values `(11 ± √57) λ / (8c)` stated for case 2b.
/// Report-only: they are evaluated as written, not derived here.
pub fn case2b_constant_f(lambda: f64, c: f64) -> Result<(f64, f64), CatalogError> {
    if c == 0.0 {
        return Err(CatalogError::ZeroC);
    }
    let s = 57f64.sqrt();
    Ok(((11.0 + s) * lambda / (8.0 * c), (11.0 - s) * lambda / (8.0 * c)))
}
