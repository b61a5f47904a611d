//! Height-field reconstruction from normals.
//!
//! Normals become target gradients, an auxiliary surface supplies a base
//! shape, and a screened Poisson solve balances the two under zero Dirichlet
//! conditions on the background and the image frame.

mod aux_surface;
mod gradient;
mod solver;

pub use aux_surface::{build_aux_surface, AuxSurface, LabelMap};
pub use gradient::{divergence, gradient_from_normals, stagger, MIN_NORMAL_Z};
pub use solver::{
    rescale_height, shade, solve_screened_poisson, solve_with_stats, HeightField, SolveStats, SolverConfig,
};
