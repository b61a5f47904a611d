use std::collections::BTreeMap;

use crate::error::{ReliefError, Result};
use crate::grid::{Grid, Mask, ScalarField};

/// Per-pixel integer layer labels.
pub type LabelMap = Grid<u32>;

/// The base surface a relief is pulled toward.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxSurface {
    Constant(f64),
    /// Linear from `from` to `to` along `direction` (in pixel axes), spanning
    /// the whole image.
    Ramp {
        from: f64,
        to: f64,
        direction: [f64; 2],
    },
    /// Spherical cap `scale·√(r² − d²)`, zero outside the radius.
    Radial {
        center: [f64; 2],
        radius: f64,
        scale: f64,
    },
    /// Piecewise constant: each label maps to a height offset.
    Layered {
        labels: LabelMap,
        offsets: BTreeMap<u32, f64>,
    },
}

impl AuxSurface {
    pub fn horizontal_ramp(from: f64, to: f64) -> Self {
        AuxSurface::Ramp {
            from,
            to,
            direction: [1.0, 0.0],
        }
    }

    /// Hemisphere centered in a `width × height` image touching its shorter side.
    pub fn centered_hemisphere(width: usize, height: usize, scale: f64) -> Self {
        AuxSurface::Radial {
            center: [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0],
            radius: (width.min(height) as f64 - 1.0) / 2.0,
            scale,
        }
    }
}

/// Samples `surface` over the grid of `domain`.
///
/// Layered surfaces need an offset for every foreground label; background
/// pixels without one read as zero.
pub fn build_aux_surface(surface: &AuxSurface, domain: &Mask) -> Result<ScalarField> {
    let (w, h) = domain.dims();
    match surface {
        AuxSurface::Constant(value) => Ok(Grid::filled(w, h, *value)),
        AuxSurface::Ramp { from, to, direction } => {
            let len = direction[0].hypot(direction[1]);
            if !(len > 0.0 && len.is_finite()) {
                return Err(ReliefError::InvalidParameter(
                    "ramp direction must be a non-zero vector".into(),
                ));
            }
            let (dx, dy) = (direction[0] / len, direction[1] / len);
            let project = |x: f64, y: f64| x * dx + y * dy;
            let corners = [
                project(0.0, 0.0),
                project(w as f64 - 1.0, 0.0),
                project(0.0, h as f64 - 1.0),
                project(w as f64 - 1.0, h as f64 - 1.0),
            ];
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            Ok(Grid::from_fn(w, h, |x, y| {
                let t = if span > 0.0 {
                    (project(x as f64, y as f64) - lo) / span
                } else {
                    0.0
                };
                from + (to - from) * t
            }))
        }
        AuxSurface::Radial { center, radius, scale } => {
            if radius.is_nan() || *radius <= 0.0 {
                return Err(ReliefError::InvalidParameter(format!(
                    "radial surface radius must be positive, got {radius}"
                )));
            }
            Ok(Grid::from_fn(w, h, |x, y| {
                let d2 = (x as f64 - center[0]).powi(2) + (y as f64 - center[1]).powi(2);
                scale * (radius * radius - d2).max(0.0).sqrt()
            }))
        }
        AuxSurface::Layered { labels, offsets } => {
            domain.ensure_dims(labels.dims())?;
            let mut out = Grid::filled(w, h, 0.0);
            for y in 0..h {
                for x in 0..w {
                    match offsets.get(labels.get(x, y)) {
                        Some(offset) => out.set(x, y, *offset),
                        None if domain.is_foreground(x, y) => return Err(ReliefError::LabelGap { x, y }),
                        None => {}
                    }
                }
            }
            Ok(out)
        }
    }
}
