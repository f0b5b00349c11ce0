//! Nonlocal steady states on planar domains discretized by a masked
//! Cartesian lattice, and layer thickness measured along boundary normals.

mod domain;
mod solver;
mod thickness;

pub use domain::{boundary_samples, build_domain, BoundarySample, MaskedGrid, NodeKind, Shape, MIN_CELLS_ACROSS};
pub use solver::{
    integrate_field, solve_local_2d, solve_nonlocal_2d, PlanarDomain, PlanarField, PlanarSolveConfig, Stencil,
};
pub use thickness::{curvature_thickness_report, ThicknessReport, ThicknessRow};
