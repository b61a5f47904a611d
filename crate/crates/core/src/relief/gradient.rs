use crate::error::{ReliefError, Result};
use crate::grid::{GradientField, Grid, NormalImage, ScalarField};

/// Lower clamp on `N_z` before it is raised to the attenuation exponent.
pub const MIN_NORMAL_Z: f64 = 1e-4;

/// Target gradients `(N_x, N_y)·N_z^α` of a normal image.
///
/// `α = 0` keeps the raw tilt; larger `α` shrinks gradients where the normal
/// is steep, which flattens silhouettes and occlusion boundaries.
pub fn gradient_from_normals(normals: &NormalImage, alpha: f64) -> Result<GradientField> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(ReliefError::InvalidParameter(format!(
            "alpha must be non-negative, got {alpha}"
        )));
    }
    Ok(normals.map(|n| {
        let k = n.z().max(MIN_NORMAL_Z).powf(alpha);
        [n.x() * k, n.y() * k]
    }))
}

/// Moves pixel-centered gradient samples onto the edges of the pixel grid.
///
/// `x` at `(i, j)` becomes the mean of the samples at `(i, j)` and `(i+1, j)`,
/// i.e. the target for `z(i+1, j) − z(i, j)`; likewise for `y`. The last
/// column (row) keeps its own sample.
pub fn stagger(g: &GradientField) -> GradientField {
    let (w, h) = g.dims();
    Grid::from_fn(w, h, |x, y| {
        let c = g.get(x, y);
        let gx = if x + 1 < w {
            0.5 * (c[0] + g.get(x + 1, y)[0])
        } else {
            c[0]
        };
        let gy = if y + 1 < h {
            0.5 * (c[1] + g.get(x, y + 1)[1])
        } else {
            c[1]
        };
        [gx, gy]
    })
}

/// Backward-difference divergence of an edge-located field.
///
/// Paired with forward differences for the height gradient, `divergence ∘
/// gradient` is exactly the 5-point Laplacian. Samples outside the image
/// count as zero.
pub fn divergence(g: &GradientField) -> ScalarField {
    Grid::from_fn(g.width(), g.height(), |x, y| {
        let c = g.get(x, y);
        let left = if x > 0 { g.get(x - 1, y)[0] } else { 0.0 };
        let up = if y > 0 { g.get(x, y - 1)[1] } else { 0.0 };
        (c[0] - left) + (c[1] - up)
    })
}
