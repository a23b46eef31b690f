//! Numerical verification engine for Einstein warped products
//! `(B, g) x_f (F, g_F)` with two-dimensional base and fiber.
//!
//! The crate evaluates curvature operators on diagonal 2D metrics given as
//! expression text, assembles the 4D warped metric, evaluates the Einstein
//! system and its trace identities as residuals, reproduces a catalog of
//! closed-form base metrics, and solves the elliptic family
//! `Δf + a f² + b f = q` by Newton iteration on structured grids.

pub mod expr;
pub mod geometry;
pub mod warped;
pub mod cases;
pub mod catalog;
pub mod pde;
pub mod cli;
