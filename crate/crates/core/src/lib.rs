//! Normal-image editing and bas-relief reconstruction.
//!
//! The engine works on normal images: it splits them into detail and base
//! layers with a bilateral band-pass filter, edits and recombines the layers
//! with quaternion operators, builds normals from photographs and sketches,
//! and finally integrates the normals into a height field by solving a
//! screened Poisson equation biased toward an auxiliary base surface.

pub mod algebra;
pub mod bandpass;
pub mod error;
pub mod from_image;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod relief;

pub use algebra::{nlerp, ominus, oplus, rotation_between, Rotation, UnitNormal};
pub use error::{ReliefError, Result};
pub use grid::{GradientField, Grid, Mask, NormalImage, ScalarField, VectorField};
