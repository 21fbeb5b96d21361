//! Curved transition fronts of bistable reaction-diffusion equations
//! `u_t = div(A(x) grad u) + f(x, u)` in spatially periodic media.
//!
//! The crate is organised bottom-up:
//!
//! - [`medium`]: periodic diffusion and bistable reaction fields.
//! - [`solver`]: monotone finite-difference Cauchy solver, residuals, snapshots.
//! - [`pulsating`]: planar pulsating fronts, speeds, profiles and diagnostics.
//! - [`speedmap`]: tabulated anisotropic speeds, `g(x)` and the existence conditions.
//! - [`geometry`]: polytopes and the mollified surface `sum exp(-q_i) = 1`.
//! - [`fronts`]: sub/supersolutions, front construction and stability runs.
//! - [`cli`]: experiment configuration, orchestration and artifacts.

pub mod cli;
pub mod error;
pub mod fronts;
pub mod geometry;
pub mod medium;
pub mod pulsating;
pub mod solver;
pub mod speedmap;
pub mod tolerances;

mod isotonic;
mod linalg;

pub use error::{Error, Result};
