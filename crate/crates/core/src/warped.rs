//! Warped products `ḡ = g + f² g_F` of two 2D diagonal metrics.
//!
//! The Einstein condition `Ric(ḡ) = λ ḡ` splits into a base equation, a fiber
//! equation and a scalar equation for the warping function:
//!
//! ```text
//! Ric_B - (m/f) ∇²f            = λ g
//! Ric_F                        = μ g_F
//! f Δf + (m-1)|∇f|² + λ f²     = μ
//! ```
//!
//! [`WarpedProduct::einstein_residuals`] evaluates the three lines as
//! residuals. [`WarpedProduct::block_identity_check`] verifies the block
//! decomposition behind them by comparing the numerical 4D Ricci tensor of the
//! assembled metric with the 2D block formulas.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{BinOp, Expression};
use crate::geometry::{
    field_derivatives, gauss_curvature, linspace, ricci, BlockMetricND, GeometryError, Metric2D,
    MetricBlock,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpedError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("base and fiber charts share the coordinate name `{0}`")]
    NameClash(String),
    #[error("warping function must be positive, found f = {value:e} at {point:?}")]
    NonPositiveWarp { value: f64, point: Vec<f64> },
    #[error("warping function is defined over {found:?}, expected the base chart {expected:?}")]
    WarpChart {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("trace identities need fiber dimension m > 1, got m = {0}")]
    FiberDimension(usize),
}

/// Samples per axis used to check `f > 0` over the base domain.
const POSITIVITY_SAMPLES: usize = 16;

/// Fiber and base dimensions entering the trace identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    /// Fiber dimension.
    pub m: usize,
    /// Base dimension.
    pub n: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { m: 2, n: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct WarpedProduct {
    base: Metric2D,
    fiber: Metric2D,
    warp: Expression,
    dims: Dims,
}

/// Residuals of the three lines of the Einstein system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EinsteinResiduals {
    /// `Ric_B - (m/f)∇²f - λ g` at the base point.
    pub r_base: [[f64; 2]; 2],
    /// `Ric_F - μ g_F` at the fiber point.
    pub r_fiber: [[f64; 2]; 2],
    /// `f Δf + (m-1)|∇f|² + λ f² - μ` at the base point.
    pub r_scalar: f64,
    pub lambda: f64,
    pub mu: f64,
}

fn max_abs2(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

impl EinsteinResiduals {
    pub fn max_abs(&self) -> f64 {
        max_abs2(&self.r_base)
            .max(max_abs2(&self.r_fiber))
            .max(self.r_scalar.abs())
    }

    pub fn base_max(&self) -> f64 {
        max_abs2(&self.r_base)
    }

    pub fn fiber_max(&self) -> f64 {
        max_abs2(&self.r_fiber)
    }
}

/// Gaps between the numerical 4D Ricci tensor and the 2D block formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockIdentityGaps {
    pub base: f64,
    pub mixed: f64,
    pub fiber: f64,
}

impl BlockIdentityGaps {
    pub fn max(&self) -> f64 {
        self.base.max(self.mixed).max(self.fiber)
    }
}

/// Traced forms of the Einstein system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceResiduals {
    /// `R_B f² - m f Δf - n λ f²`
    pub res2: f64,
    /// `m f Δf + m(m-1)|∇f|² + m λ f² - m μ`
    pub res3: f64,
    /// `|∇f|² + [(λ(m-n) + R_B)/(m(m-1))] f² - μ/(m-1)`
    pub res4: f64,
}

impl WarpedProduct {
    /// `warp` must be an expression over the base chart.
    pub fn new(base: Metric2D, fiber: Metric2D, warp: Expression) -> Result<Self, WarpedError> {
        if warp.vars() != base.vars().as_slice() {
            return Err(WarpedError::WarpChart {
                expected: base.vars().to_vec(),
                found: warp.vars().to_vec(),
            });
        }
        Ok(Self {
            base,
            fiber,
            warp,
            dims: Dims::default(),
        })
    }

    pub fn base(&self) -> &Metric2D {
        &self.base
    }

    pub fn fiber(&self) -> &Metric2D {
        &self.fiber
    }

    pub fn warp(&self) -> &Expression {
        &self.warp
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn check_charts(&self) -> Result<(), WarpedError> {
        for v in self.fiber.vars() {
            if self.base.vars().contains(v) {
                return Err(WarpedError::NameClash(v.clone()));
            }
        }
        Ok(())
    }

    /// Checks `f > 0` on a sample grid covering the base domain.
    pub fn check_positive_warp(&self) -> Result<(), WarpedError> {
        let d = self.base.domain();
        let xs = linspace(d.lo[0], d.hi[0], POSITIVITY_SAMPLES, true);
        let ys = linspace(d.lo[1], d.hi[1], POSITIVITY_SAMPLES, !d.periodic);
        for &x in &xs {
            for &y in &ys {
                self.warp_at(&[x, y])?;
            }
        }
        Ok(())
    }

    fn warp_at(&self, p: &[f64]) -> Result<f64, WarpedError> {
        let value = self.warp.eval(p).map_err(GeometryError::from)?;
        if value <= 0.0 {
            return Err(WarpedError::NonPositiveWarp {
                value,
                point: p.to_vec(),
            });
        }
        Ok(value)
    }

    /// The 4D metric: base block, then `f²`-scaled fiber block.
    pub fn assemble(&self) -> Result<BlockMetricND, WarpedError> {
        self.check_charts()?;
        self.check_positive_warp()?;
        let all: Vec<String> = self
            .base
            .vars()
            .iter()
            .chain(self.fiber.vars())
            .cloned()
            .collect();
        let base_pos = [0, 1];
        let fiber_pos = [2, 3];
        let f = self.warp.embed(&all, &base_pos);
        let f_sq = Expression::combine(BinOp::Pow, &f, &Expression::constant(2.0, &all));
        let warped = |e: &Expression| Expression::combine(BinOp::Mul, &f_sq, &e.embed(&all, &fiber_pos));
        let blocks = vec![
            MetricBlock {
                coords: self.base.vars().to_vec(),
                components: vec![
                    self.base.e().embed(&all, &base_pos),
                    self.base.g().embed(&all, &base_pos),
                ],
                signs: self.base.signs().to_vec(),
            },
            MetricBlock {
                coords: self.fiber.vars().to_vec(),
                components: vec![warped(self.fiber.e()), warped(self.fiber.g())],
                signs: self.fiber.signs().to_vec(),
            },
        ];
        Ok(BlockMetricND::new(blocks)?)
    }

    /// Residuals of the Einstein system at a base point and a fiber point.
    pub fn einstein_residuals(
        &self,
        lambda: f64,
        mu: f64,
        p_base: &[f64],
        p_fiber: &[f64],
    ) -> Result<EinsteinResiduals, WarpedError> {
        let f = self.warp_at(p_base)?;
        let m = self.dims.m as f64;
        let d = field_derivatives(&self.base, &self.warp, p_base)?;
        let kb = gauss_curvature(&self.base, p_base)?;
        let gb = self.base.components(p_base)?;
        let mut r_base = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let g_ij = if i == j { gb[i] } else { 0.0 };
                r_base[i][j] = kb * g_ij - (m / f) * d.hessian[i][j] - lambda * g_ij;
            }
        }
        let kf = gauss_curvature(&self.fiber, p_fiber)?;
        let gf = self.fiber.components(p_fiber)?;
        let mut r_fiber = [[0.0; 2]; 2];
        for i in 0..2 {
            r_fiber[i][i] = (kf - mu) * gf[i];
        }
        let r_scalar = f * d.laplacian + (m - 1.0) * d.grad_norm_sq + lambda * f * f - mu;
        Ok(EinsteinResiduals {
            r_base,
            r_fiber,
            r_scalar,
            lambda,
            mu,
        })
    }

    /// Compares the numerical Ricci tensor of [`assemble`](Self::assemble) at
    /// the 4D point `p = (base, fiber)` with the block formulas. This is an
    /// identity for every smooth positive `f`, not an Einstein condition.
    pub fn block_identity_check(&self, p: &[f64; 4]) -> Result<BlockIdentityGaps, WarpedError> {
        let full = self.assemble()?;
        let ric = ricci(&full, p)?;
        let (pb, pf) = (&p[..2], &p[2..]);
        let f = self.warp_at(pb)?;
        let m = self.dims.m as f64;
        let d = field_derivatives(&self.base, &self.warp, pb)?;
        let kb = gauss_curvature(&self.base, pb)?;
        let gb = self.base.components(pb)?;
        let kf = gauss_curvature(&self.fiber, pf)?;
        let gf = self.fiber.components(pf)?;
        let warp_term = f * d.laplacian + (m - 1.0) * d.grad_norm_sq;

        let mut gaps = BlockIdentityGaps {
            base: 0.0,
            mixed: 0.0,
            fiber: 0.0,
        };
        for i in 0..2 {
            for j in 0..2 {
                let diag = i == j;
                let base_expect = if diag { kb * gb[i] } else { 0.0 } - (m / f) * d.hessian[i][j];
                gaps.base = gaps.base.max((ric[i][j] - base_expect).abs());
                let fiber_expect = if diag { (kf - warp_term) * gf[i] } else { 0.0 };
                gaps.fiber = gaps.fiber.max((ric[2 + i][2 + j] - fiber_expect).abs());
                gaps.mixed = gaps
                    .mixed
                    .max(ric[i][2 + j].abs())
                    .max(ric[2 + j][i].abs());
            }
        }
        Ok(gaps)
    }

    pub fn trace_residuals(
        &self,
        lambda: f64,
        mu: f64,
        p_base: &[f64],
    ) -> Result<TraceResiduals, WarpedError> {
        self.warp_at(p_base)?;
        trace_residuals(&self.base, &self.warp, self.dims, lambda, mu, p_base)
    }
}

/// Traced equations for base metric `g` and warping function `f` with
/// arbitrary dimensions `m > 1`, `n`.
pub fn trace_residuals(
    g: &Metric2D,
    f: &Expression,
    dims: Dims,
    lambda: f64,
    mu: f64,
    p: &[f64],
) -> Result<TraceResiduals, WarpedError> {
    if dims.m <= 1 {
        return Err(WarpedError::FiberDimension(dims.m));
    }
    let (m, n) = (dims.m as f64, dims.n as f64);
    let d = field_derivatives(g, f, p)?;
    let r_b = 2.0 * gauss_curvature(g, p)?;
    let fv = d.value;
    let res2 = r_b * fv * fv - m * fv * d.laplacian - n * lambda * fv * fv;
    let res3 = m * fv * d.laplacian + m * (m - 1.0) * d.grad_norm_sq + m * lambda * fv * fv - m * mu;
    let res4 = d.grad_norm_sq + (lambda * (m - n) + r_b) / (m * (m - 1.0)) * fv * fv - mu / (m - 1.0);
    Ok(TraceResiduals { res2, res3, res4 })
}

/// Least-squares fit of `Ric_F ≈ μ g_F` over sample points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub mu: f64,
    /// `max |Ric_F - μ g_F|` over the samples; zero for an Einstein fiber.
    pub max_deviation: f64,
}

pub fn estimate_mu(fiber: &Metric2D, points: &[[f64; 2]]) -> Result<MuEstimate, WarpedError> {
    let mut samples = Vec::with_capacity(points.len());
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        // 2D Ricci is K g; diagonal entries K g_ii
        let k = gauss_curvature(fiber, p)?;
        let g = fiber.components(p)?;
        for gi in g {
            num += k * gi * gi;
            den += gi * gi;
            samples.push((k * gi, gi));
        }
    }
    let mu = if den > 0.0 { num / den } else { 0.0 };
    let max_deviation = samples
        .iter()
        .fold(0.0f64, |m, (r, g)| m.max((r - mu * g).abs()));
    Ok(MuEstimate { mu, max_deviation })
}
