use std::fmt::Write;

use crate::error::{ReliefError, Result};
use crate::grid::{Mask, ScalarField};

/// Element counts of an exported mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshStats {
    pub vertices: usize,
    pub faces: usize,
}

/// Foreground-only derivative along one axis: central where both neighbours
/// are foreground, one-sided where only one is.
fn slope(z: &ScalarField, domain: &Mask, x: usize, y: usize, axis: usize) -> f64 {
    let (w, h) = z.dims();
    let step = |forward: bool| -> Option<(usize, usize)> {
        let (nx, ny) = match (axis, forward) {
            (0, true) => (x + 1, y),
            (0, false) => (x.checked_sub(1)?, y),
            (_, true) => (x, y + 1),
            (_, false) => (x, y.checked_sub(1)?),
        };
        (nx < w && ny < h && domain.is_foreground(nx, ny)).then_some((nx, ny))
    };
    let at = |(px, py): (usize, usize)| *z.get(px, py);
    match (step(true), step(false)) {
        (Some(f), Some(b)) => 0.5 * (at(f) - at(b)),
        (Some(f), None) => at(f) - at((x, y)),
        (None, Some(b)) => at((x, y)) - at(b),
        (None, None) => 0.0,
    }
}

/// Wavefront OBJ of the height field over the foreground of `domain`.
///
/// Each foreground pixel `(u, v)` becomes the vertex `(u·s, v·s, z)` with a
/// normal from the local height gradient. Every 2×2 block of foreground
/// pixels contributes two triangles wound so that a flat field faces `+z`.
/// A domain without any such block is [`ReliefError::EmptyDomain`].
pub fn export_mesh_obj(z: &ScalarField, domain: &Mask, xy_scale: f64) -> Result<(String, MeshStats)> {
    domain.ensure_dims(z.dims())?;
    if !(xy_scale > 0.0 && xy_scale.is_finite()) {
        return Err(ReliefError::InvalidParameter(format!(
            "xy scale must be positive, got {xy_scale}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(ReliefError::InvalidParameter("height field is not finite".into()));
    }
    let (w, h) = z.dims();
    let mut index = vec![0usize; w * h];
    let mut vertices = 0;
    let mut out = String::from("# bas-relief height field\n");
    for y in 0..h {
        for x in 0..w {
            if domain.is_foreground(x, y) {
                vertices += 1;
                index[y * w + x] = vertices;
                let _ = writeln!(out, "v {} {} {}", x as f64 * xy_scale, y as f64 * xy_scale, z.get(x, y));
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if domain.is_foreground(x, y) {
                // Subtracting from zero keeps -0 out of the text.
                let nx = 0.0 - slope(z, domain, x, y, 0) / xy_scale;
                let ny = 0.0 - slope(z, domain, x, y, 1) / xy_scale;
                let len = (nx * nx + ny * ny + 1.0).sqrt();
                let _ = writeln!(out, "vn {} {} {}", nx / len, ny / len, 1.0 / len);
            }
        }
    }
    let mut faces = 0;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let [a, b, c, d] = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)].map(|(px, py)| index[py * w + px]);
            if a == 0 || b == 0 || c == 0 || d == 0 {
                continue;
            }
            let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
            let _ = writeln!(out, "f {b}//{b} {d}//{d} {c}//{c}");
            faces += 2;
        }
    }
    if faces == 0 {
        return Err(ReliefError::EmptyDomain);
    }
    Ok((out, MeshStats { vertices, faces }))
}
