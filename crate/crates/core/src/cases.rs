//! Case systems in the substituted variable `u = -h f` and the
//! f-curvature-Base compatibility gap.
//!
//! With `R_B = c f` and `h = c/2`, the traced Einstein equations reduce to
//! small PDE systems for `u`:
//!
//! | case | λ, μ        | residuals                                        |
//! |------|-------------|--------------------------------------------------|
//! | 1a   | λ = μ = 0   | `Δu + u²`, `uΔu + \|∇u\|²`, `\|∇u\|² - u³`        |
//! | 1b   | λ = 0, μ ≠ 0| `Δu + u²`, `\|∇u\|² - u³ - A` with `A = h²μ`      |
//! | 2b   | μ = 0, λ ≠ 0| `Δu + u² + λu`, `uΔu + \|∇u\|² + λu²`, `\|∇u\|² - u³` |
//!
//! The hypothesis `R_B = c f` itself reads `K = -u`; [`f_curvature_gap`]
//! measures how far a base metric is from it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expression;
use crate::geometry::{field_derivatives, gauss_curvature, GeometryError, Metric2D};

/// Fraction of grid points whose gap must exceed the tolerance.
pub const WITNESS_PASS_FRACTION: f64 = 0.99;

/// Minimum grid size for an incompatibility witness.
pub const WITNESS_MIN_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("h = 0: the substitution u = -h f is singular (flat/constant branch)")]
    ZeroH,
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid has {0} points, a witness needs at least {WITNESS_MIN_POINTS}")]
    GridTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "1a")]
    OneA,
    #[serde(rename = "1b")]
    OneB,
    #[serde(rename = "2b")]
    TwoB,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::OneA => "1a",
            CaseTag::OneB => "1b",
            CaseTag::TwoB => "2b",
        })
    }
}

impl FromStr for CaseTag {
    type Err = CaseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1a" => Ok(CaseTag::OneA),
            "1b" => Ok(CaseTag::OneB),
            "2b" => Ok(CaseTag::TwoB),
            other => Err(CaseError::InvalidParams(format!(
                "unknown case `{other}` (expected 1a, 1b or 2b)"
            ))),
        }
    }
}

/// Scalar constants of a case: `h = c/2`, `A = h²μ`, `A = -a³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseParams {
    pub tag: CaseTag,
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub h: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub a: f64,
}

impl CaseParams {
    pub fn new(tag: CaseTag, lambda: f64, mu: f64, c: f64) -> Result<Self, CaseError> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("c", c)] {
            if !v.is_finite() {
                return Err(CaseError::InvalidParams(format!("{name} must be finite")));
            }
        }
        let h = c / 2.0;
        match tag {
            CaseTag::OneA if lambda != 0.0 || mu != 0.0 => {
                return Err(CaseError::InvalidParams(
                    "case 1a requires lambda = 0 and mu = 0".into(),
                ))
            }
            CaseTag::OneB if lambda != 0.0 => {
                return Err(CaseError::InvalidParams("case 1b requires lambda = 0".into()))
            }
            CaseTag::OneB if mu == 0.0 => {
                return Err(CaseError::InvalidParams(
                    "case 1b requires mu != 0 (mu = 0 is case 1a)".into(),
                ))
            }
            CaseTag::TwoB if mu != 0.0 => {
                return Err(CaseError::InvalidParams("case 2b requires mu = 0".into()))
            }
            CaseTag::TwoB if lambda == 0.0 => {
                return Err(CaseError::InvalidParams(
                    "case 2b requires lambda != 0 (lambda = 0 is case 1a)".into(),
                ))
            }
            CaseTag::TwoB if h == 0.0 => {
                return Err(CaseError::InvalidParams(
                    "case 2b requires c != 0 (h = 0 forces lambda = 0)".into(),
                ))
            }
            _ => {}
        }
        let big_a = h * h * mu;
        Ok(Self {
            tag,
            lambda,
            mu,
            c,
            h,
            big_a,
            a: 0.0 - big_a.cbrt(),
        })
    }

    /// Positive `u` gives positive `f = -u/h` only when `h < 0`.
    pub fn sign_warning(&self) -> Option<String> {
        (self.h > 0.0).then(|| {
            format!(
                "h = {} > 0: f = -u/h is negative wherever u > 0, violating f > 0",
                self.h
            )
        })
    }
}

/// `u = -h f`.
pub fn substitute_u(f: &Expression, h: f64) -> Result<Expression, CaseError> {
    if h == 0.0 {
        return Err(CaseError::ZeroH);
    }
    Ok(f.scaled(-h))
}

/// `f = -u / h`.
pub fn recover_f(u: &Expression, h: f64) -> Result<Expression, CaseError> {
    if h == 0.0 {
        return Err(CaseError::ZeroH);
    }
    Ok(u.scaled(-1.0 / h))
}

/// The three residuals of a case system at one point (the third is 0 for
/// case 1b, which has two equations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseResiduals {
    pub first: f64,
    pub second: f64,
    pub third: f64,
    /// `u` at the point; a Riemannian solution of `|∇u|² = u³` needs `u ≥ 0`.
    pub u: f64,
}

impl CaseResiduals {
    pub fn max_abs(&self) -> f64 {
        self.first.abs().max(self.second.abs()).max(self.third.abs())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.first, self.second, self.third]
    }
}

/// Equation tags of the three residual slots for each case.
pub fn equation_tags(tag: CaseTag) -> [&'static str; 3] {
    match tag {
        CaseTag::OneA => ["eq8", "eq9", "eq10"],
        CaseTag::OneB => ["eq15", "eq16", ""],
        CaseTag::TwoB => ["eq17", "eq18", "eq19"],
    }
}

/// Tags of the corresponding equations written in `f`.
pub fn f_equation_tags(tag: CaseTag) -> [&'static str; 3] {
    match tag {
        CaseTag::OneA | CaseTag::TwoB => ["eq5", "eq6", "eq7"],
        CaseTag::OneB => ["eq13", "eq14", ""],
    }
}

pub fn case_residuals(
    g: &Metric2D,
    u: &Expression,
    params: &CaseParams,
    p: &[f64],
) -> Result<CaseResiduals, CaseError> {
    let d = field_derivatives(g, u, p)?;
    let (uv, lap, norm) = (d.value, d.laplacian, d.grad_norm_sq);
    let lambda = params.lambda;
    let (first, second, third) = match params.tag {
        CaseTag::OneA => (lap + uv * uv, uv * lap + norm, norm - uv.powi(3)),
        CaseTag::OneB => (lap + uv * uv, norm - uv.powi(3) - params.big_a, 0.0),
        CaseTag::TwoB => (
            lap + uv * uv + lambda * uv,
            uv * lap + norm + lambda * uv * uv,
            norm - uv.powi(3),
        ),
    };
    Ok(CaseResiduals {
        first,
        second,
        third,
        u: uv,
    })
}

/// The same systems written in `f` (before substituting `u = -hf`):
/// 1a/2b: `Δf - hf² + λf`, `fΔf + |∇f|² + λf²`, `|∇f|² + hf³`;
/// 1b: `Δf - hf²`, `|∇f|² + hf³ - μ`.
pub fn f_equation_residuals(
    g: &Metric2D,
    f: &Expression,
    params: &CaseParams,
    p: &[f64],
) -> Result<[f64; 3], CaseError> {
    let d = field_derivatives(g, f, p)?;
    let (fv, lap, norm) = (d.value, d.laplacian, d.grad_norm_sq);
    let (h, lambda) = (params.h, params.lambda);
    Ok(match params.tag {
        CaseTag::OneA | CaseTag::TwoB => [
            lap - h * fv * fv + lambda * fv,
            fv * lap + norm + lambda * fv * fv,
            norm + h * fv.powi(3),
        ],
        CaseTag::OneB => [lap - h * fv * fv, norm + h * fv.powi(3) - params.mu, 0.0],
    })
}

/// Factors `k` with `u-residual = k * f-residual` under `u = -hf`.
pub fn substitution_factors(params: &CaseParams) -> [f64; 3] {
    let h = params.h;
    match params.tag {
        CaseTag::OneA | CaseTag::TwoB => [-h, h * h, h * h],
        CaseTag::OneB => [-h, h * h, 0.0],
    }
}

/// Gauss curvature, `u`, and the two forms of the compatibility gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureGap {
    pub k: f64,
    pub u: f64,
    /// `K + u`; zero iff `R_B = c f` holds at the point.
    pub k_plus_u: f64,
    /// `R_B - c f = 2K + 2u` (since `c f = -2u`).
    pub rb_minus_cf: f64,
}

pub fn curvature_gap(g: &Metric2D, u: &Expression, p: &[f64]) -> Result<CurvatureGap, CaseError> {
    let k = gauss_curvature(g, p)?;
    let uv = u.eval(p).map_err(GeometryError::from)?;
    Ok(CurvatureGap {
        k,
        u: uv,
        k_plus_u: k + uv,
        rb_minus_cf: 2.0 * (k + uv),
    })
}

/// `K + u` at `p`.
pub fn f_curvature_gap(g: &Metric2D, u: &Expression, p: &[f64]) -> Result<f64, CaseError> {
    Ok(curvature_gap(g, u, p)?.k_plus_u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub points: usize,
    pub tol: f64,
    pub min_abs_gap: f64,
    pub max_abs_gap: f64,
    /// Minimum of `u` over the grid.
    pub min_u: f64,
    pub fraction_exceeding: f64,
    /// Points with `u < 0`, where `|∇u|² = u³` cannot hold on a Riemannian base.
    pub negative_u_points: usize,
    pub pass: bool,
}

/// Samples `|K + u|` over `grid`; PASS when at least
/// [`WITNESS_PASS_FRACTION`] of the points exceed `tol`, i.e. the metric is
/// numerically incompatible with `R_B = c f` wherever it was sampled.
pub fn incompatibility_witness(
    g: &Metric2D,
    u: &Expression,
    grid: &[[f64; 2]],
    tol: f64,
) -> Result<WitnessReport, CaseError> {
    if grid.is_empty() {
        return Err(CaseError::EmptyGrid);
    }
    if grid.len() < WITNESS_MIN_POINTS {
        return Err(CaseError::GridTooSmall(grid.len()));
    }
    let mut min_abs_gap = f64::INFINITY;
    let mut max_abs_gap = 0.0f64;
    let mut min_u = f64::INFINITY;
    let mut exceeding = 0usize;
    let mut negative_u_points = 0usize;
    for p in grid {
        let gap = curvature_gap(g, u, p)?;
        let a = gap.k_plus_u.abs();
        min_abs_gap = min_abs_gap.min(a);
        max_abs_gap = max_abs_gap.max(a);
        min_u = min_u.min(gap.u);
        if a > tol {
            exceeding += 1;
        }
        if gap.u < 0.0 {
            negative_u_points += 1;
        }
    }
    let fraction_exceeding = exceeding as f64 / grid.len() as f64;
    Ok(WitnessReport {
        points: grid.len(),
        tol,
        min_abs_gap,
        max_abs_gap,
        min_u,
        fraction_exceeding,
        negative_u_points,
        pass: fraction_exceeding >= WITNESS_PASS_FRACTION,
    })
}
