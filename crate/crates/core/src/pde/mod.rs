//! Finite-difference Newton solver for `Δf + a f² + b f = q` on a
//! structured grid over a diagonal 2D metric, with Dirichlet data on the
//! non-periodic edges.
//!
//! The Laplace–Beltrami operator is discretized in divergence form,
//! `(1/√|g|) ∂_i(√|g| g^{ii} ∂_i f)`, with the flux coefficients evaluated
//! at cell faces. Unknowns are ordered with the second axis fastest, so the
//! Jacobian is banded with bandwidth `n2` and is solved directly.

mod band;

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::geometry::{linspace, Domain, GeometryError, Metric2D, Sign};

pub use band::{BandLu, BandMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;
pub const MAX_HALVINGS: usize = 20;
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("grid {n1}x{n2} too small (each axis needs at least {MIN_NODES} nodes)")]
    GridTooSmall { n1: usize, n2: usize },
    #[error("non-finite {what} at ({x}, {y})")]
    NonFinite { what: &'static str, x: f64, y: f64 },
    #[error("field expression chart {found:?} does not match the metric chart {expected:?}")]
    ChartMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("singular Jacobian (zero pivot in column {column})")]
    SingularJacobian { column: usize },
    #[error("Newton did not converge in {} iterations (residual {:e})", .0.newton_iterations(), .0.final_residual)]
    NoConvergence(Box<SolveResult>),
}

impl From<ExprError> for PdeError {
    fn from(e: ExprError) -> Self {
        PdeError::Geometry(e.into())
    }
}

/// Initial interior values for Newton.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Discrete harmonic extension of the boundary data (`Lf = 0`).
    Harmonic,
    Zero,
    Field(Expression),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridProblem {
    pub metric: Metric2D,
    pub a: f64,
    pub b: f64,
    pub rhs: Option<Expression>,
    /// Nodes on the first axis, endpoints included.
    pub n1: usize,
    /// Nodes on the second axis; endpoints included unless periodic, in
    /// which case the upper endpoint is identified with the lower.
    pub n2: usize,
    /// Dirichlet data, sampled at boundary nodes.
    pub boundary: Expression,
    pub init: Init,
}

impl GridProblem {
    pub fn new(metric: Metric2D, a: f64, b: f64, n1: usize, n2: usize, boundary: Expression) -> Self {
        Self {
            metric,
            a,
            b,
            rhs: None,
            n1,
            n2,
            boundary,
            init: Init::Harmonic,
        }
    }

    pub fn with_rhs(mut self, rhs: Expression) -> Self {
        self.rhs = Some(rhs);
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }
}

/// Assembled 5-point operator. Nodes are stored row-major (first axis
/// slowest) on the full `n1 x n2` grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub n1: usize,
    pub n2: usize,
    pub periodic: bool,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `√|g|` at every node.
    pub weights: Vec<f64>,
    /// Node index to unknown index (`None` on Dirichlet nodes).
    unknown: Vec<Option<usize>>,
    /// Unknown index to node index.
    nodes: Vec<usize>,
    /// Per unknown: `[west, east, south, north]` neighbour node indices and
    /// coefficients; the centre coefficient is minus their sum.
    neighbours: Vec<[usize; 4]>,
    coeffs: Vec<[f64; 4]>,
    bandwidth: usize,
}

impl DiscreteOperator {
    pub fn node_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn unknown_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn point(&self, node: usize) -> [f64; 2] {
        [self.xs[node / self.n2], self.ys[node % self.n2]]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.unknown[node].is_none()
    }

    pub fn unknown_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// `(Lf)` at every interior node (0 on Dirichlet nodes).
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (k, &node) in self.nodes.iter().enumerate() {
            out[node] = self.apply_at(k, f);
        }
        out
    }

    fn apply_at(&self, k: usize, f: &[f64]) -> f64 {
        let centre = f[self.nodes[k]];
        self.neighbours[k]
            .iter()
            .zip(&self.coeffs[k])
            .map(|(&nb, &c)| c * (f[nb] - centre))
            .sum()
    }

    /// `L` restricted to the unknowns, plus `diag` on the diagonal.
    pub fn matrix(&self, diag: &[f64]) -> BandMatrix {
        let n = self.unknown_count();
        let bw = self.bandwidth.min(n.saturating_sub(1));
        let mut m = BandMatrix::zeros(n, bw, bw);
        for k in 0..n {
            let mut centre = diag[k];
            for (&nb, &c) in self.neighbours[k].iter().zip(&self.coeffs[k]) {
                centre -= c;
                if let Some(col) = self.unknown[nb] {
                    m.add(k, col, c);
                }
            }
            m.add(k, k, centre);
        }
        m
    }
}

fn sqrt_det_and_inverse(metric: &Metric2D, p: &[f64]) -> Result<(f64, [f64; 2]), PdeError> {
    let [g1, g2] = metric.components(p)?;
    let w = (g1 * g2).abs().sqrt();
    Ok((w, [1.0 / g1, 1.0 / g2]))
}

fn check_finite(what: &'static str, v: f64, p: [f64; 2]) -> Result<f64, PdeError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PdeError::NonFinite { what, x: p[0], y: p[1] })
    }
}

/// Builds the conservative 5-point stencil of the Laplace–Beltrami operator.
pub fn discretize(p: &GridProblem) -> Result<DiscreteOperator, PdeError> {
    let (n1, n2) = (p.n1, p.n2);
    if n1 < MIN_NODES || n2 < MIN_NODES {
        return Err(PdeError::GridTooSmall { n1, n2 });
    }
    let dom: &Domain = p.metric.domain();
    let periodic = dom.periodic;
    let xs = linspace(dom.lo[0], dom.hi[0], n1, true);
    let ys = linspace(dom.lo[1], dom.hi[1], n2, !periodic);
    let dx = xs[1] - xs[0];
    let dy = ys[1] - ys[0];

    let mut weights = Vec::with_capacity(n1 * n2);
    let mut unknown = vec![None; n1 * n2];
    let mut nodes = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let pt = [xs[i], ys[j]];
            let (w, _) = sqrt_det_and_inverse(&p.metric, &pt)?;
            weights.push(check_finite("metric", w, pt)?);
            let interior = i > 0 && i + 1 < n1 && (periodic || (j > 0 && j + 1 < n2));
            if interior {
                unknown[i * n2 + j] = Some(nodes.len());
                nodes.push(i * n2 + j);
            }
        }
    }

    let flux = |pt: [f64; 2], axis: usize| -> Result<f64, PdeError> {
        let (w, inv) = sqrt_det_and_inverse(&p.metric, &pt)?;
        check_finite("metric", w * inv[axis], pt)
    };
    let mut neighbours = Vec::with_capacity(nodes.len());
    let mut coeffs = Vec::with_capacity(nodes.len());
    for &node in &nodes {
        let (i, j) = (node / n2, node % n2);
        let (x, y) = (xs[i], ys[j]);
        let jm = if j == 0 { n2 - 1 } else { j - 1 };
        let jp = if j + 1 == n2 { 0 } else { j + 1 };
        let inv_w = 1.0 / weights[node];
        let west = flux([x - dx / 2.0, y], 0)? / (dx * dx);
        let east = flux([x + dx / 2.0, y], 0)? / (dx * dx);
        let south = flux([x, y - dy / 2.0], 1)? / (dy * dy);
        let north = flux([x, y + dy / 2.0], 1)? / (dy * dy);
        neighbours.push([(i - 1) * n2 + j, (i + 1) * n2 + j, i * n2 + jm, i * n2 + jp]);
        coeffs.push([west * inv_w, east * inv_w, south * inv_w, north * inv_w]);
    }
    let bandwidth = if periodic { n2 } else { n2 - 2 };
    Ok(DiscreteOperator {
        n1,
        n2,
        periodic,
        xs,
        ys,
        weights,
        unknown,
        nodes,
        neighbours,
        coeffs,
        bandwidth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub vars: [String; 2],
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Field on the full grid, first axis slowest.
    pub values: Vec<f64>,
    /// Pointwise `Lf + af² + bf - q` (0 on Dirichlet nodes).
    pub residual: Vec<f64>,
    /// Sup-norm residual before each Newton step and after the last one.
    pub residual_trace: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
}

impl SolveResult {
    pub fn newton_iterations(&self) -> usize {
        self.residual_trace.len().saturating_sub(1)
    }

    pub fn n2(&self) -> usize {
        self.ys.len()
    }

    pub fn point(&self, node: usize) -> [f64; 2] {
        [self.xs[node / self.n2()], self.ys[node % self.n2()]]
    }

    /// Largest nodal deviation from `exact`.
    pub fn max_error(&self, exact: &Expression) -> Result<f64, PdeError> {
        let mut worst = 0.0f64;
        for (node, v) in self.values.iter().enumerate() {
            let e = exact.eval(&self.point(node))?;
            worst = worst.max((v - e).abs());
        }
        Ok(worst)
    }

    /// One row per node: `coord1,coord2,value,residual`, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{},{},value,residual", self.vars[0], self.vars[1])?;
        for (node, (v, r)) in self.values.iter().zip(&self.residual).enumerate() {
            let [x, y] = self.point(node);
            writeln!(w, "{x:.16e},{y:.16e},{v:.16e},{r:.16e}")?;
        }
        Ok(())
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

fn field_matches_chart(e: &Expression, metric: &Metric2D) -> Result<(), PdeError> {
    if e.vars() != metric.vars().as_slice() {
        return Err(PdeError::ChartMismatch {
            expected: metric.vars().to_vec(),
            found: e.vars().to_vec(),
        });
    }
    Ok(())
}

struct Newton<'a> {
    op: &'a DiscreteOperator,
    a: f64,
    b: f64,
    q: Vec<f64>,
}

impl Newton<'_> {
    fn residual(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (k, &node) in self.op.nodes.iter().enumerate() {
            let v = f[node];
            out[node] = self.op.apply_at(k, f) + self.a * v * v + self.b * v - self.q[node];
        }
        out
    }

    fn step(&self, f: &[f64], res: &[f64]) -> Result<Vec<f64>, PdeError> {
        let diag: Vec<f64> = self.op.nodes.iter().map(|&n| 2.0 * self.a * f[n] + self.b).collect();
        let jac = self.op.matrix(&diag);
        let lu = jac
            .clone()
            .factorize()
            .map_err(|column| PdeError::SingularJacobian { column })?;
        let rhs: Vec<f64> = self.op.nodes.iter().map(|&n| -res[n]).collect();
        let mut delta = lu.solve(&rhs);
        // one sweep of iterative refinement
        let jd = jac.mul_vec(&delta);
        let r: Vec<f64> = rhs.iter().zip(&jd).map(|(b, a)| b - a).collect();
        for (d, c) in delta.iter_mut().zip(lu.solve(&r)) {
            *d += c;
        }
        Ok(delta)
    }
}

/// Damped Newton on `F(f) = Lf + af² + bf - q` with Jacobian
/// `L + diag(2af + b)`. A step is halved (at most [`MAX_HALVINGS`] times)
/// while it fails to reduce the sup-norm residual. Converged once the
/// residual is at most `tol`.
pub fn newton_solve(p: &GridProblem, tol: f64, max_iter: usize) -> Result<SolveResult, PdeError> {
    field_matches_chart(&p.boundary, &p.metric)?;
    if let Some(q) = &p.rhs {
        field_matches_chart(q, &p.metric)?;
    }
    if let Init::Field(e) = &p.init {
        field_matches_chart(e, &p.metric)?;
    }
    let op = discretize(p)?;
    let n = op.node_count();

    let mut f = vec![0.0; n];
    let mut q = vec![0.0; n];
    for node in 0..n {
        let pt = op.point(node);
        if op.is_boundary(node) {
            f[node] = check_finite("boundary value", p.boundary.eval(&pt)?, pt)?;
        } else if let Init::Field(e) = &p.init {
            f[node] = check_finite("initial value", e.eval(&pt)?, pt)?;
        }
        if let Some(rhs) = &p.rhs {
            q[node] = check_finite("right-hand side", rhs.eval(&pt)?, pt)?;
        }
    }
    if p.init == Init::Harmonic {
        let lin = Newton {
            op: &op,
            a: 0.0,
            b: 0.0,
            q: vec![0.0; n],
        };
        let delta = lin.step(&f, &lin.residual(&f))?;
        for (k, &node) in op.nodes.iter().enumerate() {
            f[node] += delta[k];
        }
    }

    let newton = Newton {
        op: &op,
        a: p.a,
        b: p.b,
        q,
    };
    let mut res = newton.residual(&f);
    let mut rn = sup(&res);
    let mut trace = vec![rn];
    let mut step_norms = Vec::new();
    let mut iter = 0;
    while !(rn <= tol) && iter < max_iter {
        let delta = newton.step(&f, &res)?;
        let mut t = 1.0;
        let mut halvings = 0;
        let (next, next_res, next_rn) = loop {
            let mut trial = f.clone();
            for (k, &node) in op.nodes.iter().enumerate() {
                trial[node] += t * delta[k];
            }
            let r = newton.residual(&trial);
            let s = sup(&r);
            if s < rn || halvings == MAX_HALVINGS {
                break (trial, r, s);
            }
            t *= 0.5;
            halvings += 1;
        };
        step_norms.push(t * sup(&delta));
        f = next;
        res = next_res;
        rn = next_rn;
        trace.push(rn);
        iter += 1;
    }

    let result = SolveResult {
        vars: p.metric.vars().clone(),
        xs: op.xs.clone(),
        ys: op.ys.clone(),
        values: f,
        residual: res,
        residual_trace: trace,
        step_norms,
        final_residual: rn,
        converged: rn <= tol,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(PdeError::NoConvergence(Box::new(result)))
    }
}

/// Solves on the flat unit square `[0,1]²` with constant Dirichlet data
/// `k`.
pub fn flat_probe(a: f64, b: f64, k: f64, n1: usize, n2: usize) -> Result<SolveResult, PdeError> {
    let metric = Metric2D::flat(
        ["x", "y"],
        [Sign::Plus, Sign::Plus],
        Domain::new([0.0, 0.0], [1.0, 1.0], false),
    );
    let vars = metric.vars().to_vec();
    let boundary = Expression::constant(k, &vars);
    newton_solve(
        &GridProblem::new(metric, a, b, n1, n2, boundary),
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
}
