//! Boundary-layer steady states of the singular Keller–Segel system
//!
//! ```text
//! u_t = Δu - ∇·(p u ∇ log w),   w_t = ε Δw - u w,
//! ```
//!
//! with zero flux for `u` and `w = b` on the boundary. The steady state reduces
//! to the nonlocal problem `ε ΔW = (m / ∫W^p) W^{1+p}`, `U = (m / ∫W^p) W^p`,
//! which this crate solves on balls (radial meshes) and on general planar
//! domains (masked Cartesian grids). It also integrates the radial
//! time-dependent system and reports stability diagnostics.

pub mod asymptotics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod nonlocal;
pub mod params;
pub mod planar;
pub mod radial;
pub mod stats;
mod tridiag;

pub use error::{Error, Result};
pub use grid::{integrate_radial, interpolate_monotone, make_graded_grid, RadialGrid, RadialProfile};
pub use nonlocal::{solve_nonlocal, LocalDomain, NonlocalConfig, NonlocalResult, RadialDomain};
pub use params::{Params, SteadyState};
