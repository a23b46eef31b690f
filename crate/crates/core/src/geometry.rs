//! Metric-aware differential operators on diagonal metrics.
//!
//! Metric components are [`Expression`]s, so every first and second partial
//! derivative of the metric comes from a forward-mode jet. Christoffel symbols
//! and their first derivatives (all that the Riemann tensor needs) are then
//! assembled in closed form. A second route differentiates the Christoffel
//! symbols numerically (central differences plus one Richardson step); it is
//! kept as an independent cross-check of the exact route.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Constants, ExprError, Expression, Jet};

/// Metric components with magnitude below this are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Largest supported dimension for block metrics.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("degenerate metric: component {component} = {value:e} at {point:?}")]
    DegenerateMetric {
        component: usize,
        value: f64,
        point: Vec<f64>,
    },
    #[error("metric component {component} = {value:e} is not positive at {point:?}; use the sign flags for negative directions")]
    NonPositiveComponent {
        component: usize,
        value: f64,
        point: Vec<f64>,
    },
    #[error("chart mismatch: expected variables {expected:?}, found {found:?}")]
    ChartMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("invalid metric: {0}")]
    Invalid(String),
}

/// Sign flag multiplying a diagonal metric component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// Rectangular chart domain; the second coordinate may be periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    #[serde(default)]
    pub periodic: bool,
}

impl Domain {
    pub fn new(lo: [f64; 2], hi: [f64; 2], periodic: bool) -> Self {
        Self { lo, hi, periodic }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..2).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn is_valid(&self) -> bool {
        (0..2).all(|i| self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] < self.hi[i])
    }

    /// `n1 x n2` tensor grid. The second axis omits its upper endpoint when
    /// periodic. `log_first` spaces the first axis geometrically (needs
    /// `lo[0] > 0`).
    pub fn grid(&self, n1: usize, n2: usize, log_first: bool) -> Grid2D {
        let xs = if log_first {
            logspace(self.lo[0], self.hi[0], n1)
        } else {
            linspace(self.lo[0], self.hi[0], n1, true)
        };
        let ys = linspace(self.lo[1], self.hi[1], n2, !self.periodic);
        Grid2D::tensor(&xs, &ys)
    }
}

/// `n` evenly spaced samples on `[lo, hi]` (or `[lo, hi)` when
/// `include_end` is false).
pub fn linspace(lo: f64, hi: f64, n: usize, include_end: bool) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let div = if include_end { n - 1 } else { n } as f64;
            (0..n).map(|i| lo + (hi - lo) * i as f64 / div).collect()
        }
    }
}

/// `n` geometrically spaced samples on `[lo, hi]`, `0 < lo < hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    linspace(a, b, n, true)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            // pin the endpoints exactly
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                t.exp()
            }
        })
        .collect()
}

/// Sample points of a structured 2D grid, first index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub shape: (usize, usize),
    pub points: Vec<[f64; 2]>,
}

impl Grid2D {
    pub fn tensor(xs: &[f64], ys: &[f64]) -> Self {
        let points = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| [x, y]))
            .collect();
        Self {
            shape: (xs.len(), ys.len()),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A metric whose coordinate representation is diagonal.
pub trait DiagonalMetric {
    fn dim(&self) -> usize;

    fn coords(&self) -> Vec<String>;

    /// Signed diagonal components `g_ii` and their jets at `p`.
    fn component_jets(&self, p: &[f64]) -> Result<Vec<Jet>, GeometryError>;
}

fn signed_component(
    expr: &Expression,
    sign: Sign,
    index: usize,
    p: &[f64],
) -> Result<Jet, GeometryError> {
    let jet = expr.eval_jet(p)?;
    check_component(jet.value(), index, p)?;
    Ok(match sign {
        Sign::Plus => jet,
        Sign::Minus => -&jet,
    })
}

fn check_component(v: f64, index: usize, p: &[f64]) -> Result<f64, GeometryError> {
    if v.abs() < DEGENERACY_THRESHOLD {
        return Err(GeometryError::DegenerateMetric {
            component: index,
            value: v,
            point: p.to_vec(),
        });
    }
    if v < 0.0 {
        return Err(GeometryError::NonPositiveComponent {
            component: index,
            value: v,
            point: p.to_vec(),
        });
    }
    Ok(v)
}

/// Diagonal 2D metric `s0 E dx^2 + s1 G dy^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric2D {
    vars: [String; 2],
    e: Expression,
    g: Expression,
    signs: [Sign; 2],
    domain: Domain,
}

impl Metric2D {
    pub fn new(
        vars: [&str; 2],
        e: &str,
        g: &str,
        consts: &Constants,
        signs: [Sign; 2],
        domain: Domain,
    ) -> Result<Self, GeometryError> {
        let e = Expression::parse(e, &vars, consts)?;
        let g = Expression::parse(g, &vars, consts)?;
        Self::from_expressions(e, g, signs, domain)
    }

    pub fn from_expressions(
        e: Expression,
        g: Expression,
        signs: [Sign; 2],
        domain: Domain,
    ) -> Result<Self, GeometryError> {
        if e.vars().len() != 2 {
            return Err(GeometryError::Invalid(format!(
                "a 2D metric needs exactly two chart variables, got {:?}",
                e.vars()
            )));
        }
        if e.vars() != g.vars() {
            return Err(GeometryError::ChartMismatch {
                expected: e.vars().to_vec(),
                found: g.vars().to_vec(),
            });
        }
        if !domain.is_valid() {
            return Err(GeometryError::Invalid(format!("empty or non-finite domain {domain:?}")));
        }
        let vars = [e.vars()[0].clone(), e.vars()[1].clone()];
        Ok(Self {
            vars,
            e,
            g,
            signs,
            domain,
        })
    }

    /// Flat metric `dx^2 + dy^2` (with the given signs).
    pub fn flat(vars: [&str; 2], signs: [Sign; 2], domain: Domain) -> Self {
        Self::new(vars, "1", "1", &Constants::new(), signs, domain)
            .expect("flat metric is always valid")
    }

    pub fn vars(&self) -> &[String; 2] {
        &self.vars
    }

    pub fn e(&self) -> &Expression {
        &self.e
    }

    pub fn g(&self) -> &Expression {
        &self.g
    }

    pub fn signs(&self) -> [Sign; 2] {
        self.signs
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn with_signs(&self, signs: [Sign; 2]) -> Self {
        Self {
            signs,
            ..self.clone()
        }
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        Self {
            domain,
            ..self.clone()
        }
    }

    /// `-g`: both sign flags flipped.
    pub fn negated(&self) -> Self {
        self.with_signs([self.signs[0].flipped(), self.signs[1].flipped()])
    }

    /// Signed component values at `p`.
    pub fn components(&self, p: &[f64]) -> Result<[f64; 2], GeometryError> {
        Ok([
            self.signs[0].factor() * check_component(self.e.eval(p)?, 0, p)?,
            self.signs[1].factor() * check_component(self.g.eval(p)?, 1, p)?,
        ])
    }

    fn check_field(&self, f: &Expression) -> Result<(), GeometryError> {
        if f.vars() != self.vars.as_slice() {
            return Err(GeometryError::ChartMismatch {
                expected: self.vars.to_vec(),
                found: f.vars().to_vec(),
            });
        }
        Ok(())
    }
}

impl DiagonalMetric for Metric2D {
    fn dim(&self) -> usize {
        2
    }

    fn coords(&self) -> Vec<String> {
        self.vars.to_vec()
    }

    fn component_jets(&self, p: &[f64]) -> Result<Vec<Jet>, GeometryError> {
        Ok(vec![
            signed_component(&self.e, self.signs[0], 0, p)?,
            signed_component(&self.g, self.signs[1], 1, p)?,
        ])
    }
}

/// One diagonal block: its coordinates, components over *all* coordinates
/// of the enclosing metric, and sign flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub coords: Vec<String>,
    pub components: Vec<Expression>,
    pub signs: Vec<Sign>,
}

/// Block-diagonal metric of dimension at most [`MAX_DIM`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMetricND {
    blocks: Vec<MetricBlock>,
    coords: Vec<String>,
}

impl BlockMetricND {
    pub fn new(blocks: Vec<MetricBlock>) -> Result<Self, GeometryError> {
        let coords: Vec<String> = blocks.iter().flat_map(|b| b.coords.clone()).collect();
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(GeometryError::Invalid(format!(
                "block metric dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(GeometryError::Invalid(format!("coordinate `{c}` appears twice")));
            }
        }
        for b in &blocks {
            if b.components.len() != b.coords.len() || b.signs.len() != b.coords.len() {
                return Err(GeometryError::Invalid(
                    "each block needs one component and one sign per coordinate".into(),
                ));
            }
            for comp in &b.components {
                if comp.vars() != coords.as_slice() {
                    return Err(GeometryError::ChartMismatch {
                        expected: coords.clone(),
                        found: comp.vars().to_vec(),
                    });
                }
            }
        }
        Ok(Self { blocks, coords })
    }

    /// A 2D metric seen as a single block.
    pub fn from_metric2d(g: &Metric2D) -> Self {
        Self::new(vec![MetricBlock {
            coords: g.vars.to_vec(),
            components: vec![g.e.clone(), g.g.clone()],
            signs: g.signs.to_vec(),
        }])
        .expect("a Metric2D is a valid single block")
    }

    pub fn blocks(&self) -> &[MetricBlock] {
        &self.blocks
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.blocks.iter().flat_map(|b| b.signs.clone()).collect()
    }

    /// Number of positive and negative directions.
    pub fn signature(&self) -> (usize, usize) {
        let signs = self.signs();
        let pos = signs.iter().filter(|s| **s == Sign::Plus).count();
        (pos, signs.len() - pos)
    }

    /// Signed diagonal values at `p`.
    pub fn diagonal(&self, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut out = Vec::with_capacity(self.coords.len());
        for b in &self.blocks {
            for (c, s) in b.components.iter().zip(&b.signs) {
                out.push(s.factor() * c.eval(p)?);
            }
        }
        Ok(out)
    }
}

impl DiagonalMetric for BlockMetricND {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn coords(&self) -> Vec<String> {
        self.coords.clone()
    }

    fn component_jets(&self, p: &[f64]) -> Result<Vec<Jet>, GeometryError> {
        let mut out = Vec::with_capacity(self.coords.len());
        for b in &self.blocks {
            for (c, s) in b.components.iter().zip(&b.signs) {
                out.push(signed_component(c, *s, out.len(), p)?);
            }
        }
        Ok(out)
    }
}

/// Christoffel symbols of the second kind, `get(k, i, j) = Γ^k_{ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How the first derivatives of the Christoffel symbols are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConnectionDerivative {
    /// From the second-order jets of the metric components (exact).
    Exact,
    /// Central differences of exact Christoffels with one Richardson step.
    /// `None` uses `h = 1e-4 (1 + |p|)`.
    Richardson { step: Option<f64> },
}

#[inline]
fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn christoffel_from_jets(comps: &[Jet]) -> Christoffel {
    let n = comps.len();
    let mut gamma = Christoffel::zeros(n);
    for k in 0..n {
        let inv = 0.5 / comps[k].value();
        for i in 0..n {
            for j in 0..n {
                let v = delta(j, k) * comps[k].grad()[i] + delta(i, k) * comps[k].grad()[j]
                    - delta(i, j) * comps[i].grad()[k];
                gamma.set(k, i, j, inv * v);
            }
        }
    }
    gamma
}

/// `d[l][(k, i, j)] = ∂_l Γ^k_{ij}`, exact from the metric jets.
fn christoffel_derivatives_exact(comps: &[Jet]) -> Vec<Christoffel> {
    let n = comps.len();
    (0..n)
        .map(|l| {
            let mut d = Christoffel::zeros(n);
            for k in 0..n {
                let gk = comps[k].value();
                let dinv = -comps[k].grad()[l] / (gk * gk);
                for i in 0..n {
                    for j in 0..n {
                        let first = delta(j, k) * comps[k].grad()[i]
                            + delta(i, k) * comps[k].grad()[j]
                            - delta(i, j) * comps[i].grad()[k];
                        let second = delta(j, k) * comps[k].hess(i, l)
                            + delta(i, k) * comps[k].hess(j, l)
                            - delta(i, j) * comps[i].hess(k, l);
                        d.set(k, i, j, 0.5 * (dinv * first + second / gk));
                    }
                }
            }
            d
        })
        .collect()
}

fn christoffel_derivatives_fd<M: DiagonalMetric + ?Sized>(
    g: &M,
    p: &[f64],
    step: Option<f64>,
) -> Result<Vec<Christoffel>, GeometryError> {
    let n = g.dim();
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = step.unwrap_or(1e-4 * (1.0 + norm));
    let central = |l: usize, h: f64| -> Result<Vec<f64>, GeometryError> {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[l] += h;
        b[l] -= h;
        let ga = christoffel_from_jets(&g.component_jets(&a)?);
        let gb = christoffel_from_jets(&g.component_jets(&b)?);
        Ok(ga
            .data
            .iter()
            .zip(&gb.data)
            .map(|(x, y)| (x - y) / (2.0 * h))
            .collect())
    };
    (0..n)
        .map(|l| {
            let coarse = central(l, h)?;
            let fine = central(l, h / 2.0)?;
            let data = fine
                .iter()
                .zip(&coarse)
                .map(|(f, c)| (4.0 * f - c) / 3.0)
                .collect();
            Ok(Christoffel { n, data })
        })
        .collect()
}

/// Γ^k_{ij} at `p`.
pub fn christoffel<M: DiagonalMetric + ?Sized>(g: &M, p: &[f64]) -> Result<Christoffel, GeometryError> {
    Ok(christoffel_from_jets(&g.component_jets(p)?))
}

/// Riemann tensor `R^ρ_{σμν}` indexed `[ρ][σ][μ][ν]` (flattened).
struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    fn get(&self, r: usize, s: usize, m: usize, v: usize) -> f64 {
        let n = self.n;
        self.data[((r * n + s) * n + m) * n + v]
    }
}

fn riemann(gamma: &Christoffel, dgamma: &[Christoffel]) -> Riemann {
    let n = gamma.n;
    let mut data = vec![0.0; n * n * n * n];
    for r in 0..n {
        for s in 0..n {
            for m in 0..n {
                for v in 0..n {
                    let mut val = dgamma[m].get(r, v, s) - dgamma[v].get(r, m, s);
                    for l in 0..n {
                        val += gamma.get(r, m, l) * gamma.get(l, v, s)
                            - gamma.get(r, v, l) * gamma.get(l, m, s);
                    }
                    data[((r * n + s) * n + m) * n + v] = val;
                }
            }
        }
    }
    Riemann { n, data }
}

fn connection<M: DiagonalMetric + ?Sized>(
    g: &M,
    p: &[f64],
    method: ConnectionDerivative,
) -> Result<(Vec<Jet>, Riemann), GeometryError> {
    let comps = g.component_jets(p)?;
    let gamma = christoffel_from_jets(&comps);
    let dgamma = match method {
        ConnectionDerivative::Exact => christoffel_derivatives_exact(&comps),
        ConnectionDerivative::Richardson { step } => christoffel_derivatives_fd(g, p, step)?,
    };
    Ok((comps, riemann(&gamma, &dgamma)))
}

/// Ricci tensor `R_{σν} = R^ρ_{σρν}` at `p`.
pub fn ricci<M: DiagonalMetric + ?Sized>(g: &M, p: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
    ricci_with(g, p, ConnectionDerivative::Exact)
}

pub fn ricci_with<M: DiagonalMetric + ?Sized>(
    g: &M,
    p: &[f64],
    method: ConnectionDerivative,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let (_, riem) = connection(g, p, method)?;
    let n = riem.n;
    Ok((0..n)
        .map(|s| (0..n).map(|v| (0..n).map(|r| riem.get(r, s, r, v)).sum()).collect())
        .collect())
}

/// Gauss curvature of a 2D metric, `K = R_{0101} / det g`.
pub fn gauss_curvature(g: &Metric2D, p: &[f64]) -> Result<f64, GeometryError> {
    gauss_curvature_with(g, p, ConnectionDerivative::Exact)
}

pub fn gauss_curvature_with(
    g: &Metric2D,
    p: &[f64],
    method: ConnectionDerivative,
) -> Result<f64, GeometryError> {
    let (comps, riem) = connection(g, p, method)?;
    // R_{0101} = g_00 R^0_{101}
    Ok(riem.get(0, 1, 0, 1) / comps[1].value())
}

/// Scalar curvature `R = 2K` of a 2D metric.
pub fn scalar_curvature(g: &Metric2D, p: &[f64]) -> Result<f64, GeometryError> {
    Ok(2.0 * gauss_curvature(g, p)?)
}

/// First and second covariant derivatives of a scalar field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldDerivatives {
    pub value: f64,
    /// Chart partials `∂_i f`.
    pub grad: [f64; 2],
    /// Covariant Hessian `∂_i∂_j f - Γ^k_{ij} ∂_k f`.
    pub hessian: [[f64; 2]; 2],
    /// `g^{ij} (∇²f)_{ij}`.
    pub laplacian: f64,
    /// `g^{ij} ∂_i f ∂_j f`; negative values are possible for indefinite metrics.
    pub grad_norm_sq: f64,
}

pub fn field_derivatives(
    g: &Metric2D,
    f: &Expression,
    p: &[f64],
) -> Result<FieldDerivatives, GeometryError> {
    g.check_field(f)?;
    let comps = g.component_jets(p)?;
    let gamma = christoffel_from_jets(&comps);
    let fj = f.eval_jet(p)?;
    let df = fj.grad();
    let mut hessian = [[0.0; 2]; 2];
    for (i, row) in hessian.iter_mut().enumerate() {
        for (j, h) in row.iter_mut().enumerate() {
            *h = fj.hess(i, j) - (0..2).map(|k| gamma.get(k, i, j) * df[k]).sum::<f64>();
        }
    }
    let inv = [1.0 / comps[0].value(), 1.0 / comps[1].value()];
    let laplacian = inv[0] * hessian[0][0] + inv[1] * hessian[1][1];
    let grad_norm_sq = inv[0] * df[0] * df[0] + inv[1] * df[1] * df[1];
    Ok(FieldDerivatives {
        value: fj.value(),
        grad: [df[0], df[1]],
        hessian,
        laplacian,
        grad_norm_sq,
    })
}

pub fn laplacian(g: &Metric2D, f: &Expression, p: &[f64]) -> Result<f64, GeometryError> {
    Ok(field_derivatives(g, f, p)?.laplacian)
}

pub fn grad_norm_sq(g: &Metric2D, f: &Expression, p: &[f64]) -> Result<f64, GeometryError> {
    Ok(field_derivatives(g, f, p)?.grad_norm_sq)
}

pub fn hessian(g: &Metric2D, f: &Expression, p: &[f64]) -> Result<[[f64; 2]; 2], GeometryError> {
    Ok(field_derivatives(g, f, p)?.hessian)
}
