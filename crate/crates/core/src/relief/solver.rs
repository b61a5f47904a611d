use serde::{Deserialize, Serialize};

use super::gradient::{divergence, stagger};
use crate::error::{ReliefError, Result};
use crate::grid::{GradientField, Grid, Mask, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Weight of the pull toward the auxiliary surface; squared in the system.
    #[serde(default)]
    pub lambda: f64,
    /// Gradient attenuation exponent used when deriving gradients from normals.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Relative residual `‖Az − b‖ / ‖b‖` at which CG stops.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Defaults to `10·√(W·H) + 1000`.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            alpha: default_alpha(),
            tolerance: default_tolerance(),
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(ReliefError::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    fn iteration_cap(&self, pixels: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| (10.0 * (pixels as f64).sqrt()) as usize + 1000)
    }
}

/// Solved heights together with the domain they were solved on.
/// Background pixels are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    heights: ScalarField,
    domain: Mask,
}

impl HeightField {
    /// Wraps `heights`, zeroing every pixel outside `domain`.
    pub fn new(mut heights: ScalarField, domain: Mask) -> Result<Self> {
        domain.ensure_dims(heights.dims())?;
        for y in 0..heights.height() {
            for x in 0..heights.width() {
                if !domain.is_foreground(x, y) {
                    heights.set(x, y, 0.0);
                }
            }
        }
        Ok(Self { heights, domain })
    }

    pub fn zeros(domain: Mask) -> Self {
        let (w, h) = domain.dims();
        Self {
            heights: Grid::filled(w, h, 0.0),
            domain,
        }
    }

    pub fn heights(&self) -> &ScalarField {
        &self.heights
    }

    pub fn domain(&self) -> &Mask {
        &self.domain
    }

    pub fn width(&self) -> usize {
        self.heights.width()
    }

    pub fn height(&self) -> usize {
        self.heights.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        *self.heights.get(x, y)
    }

    /// Root of the sum of squared heights.
    pub fn l2_norm(&self) -> f64 {
        self.heights.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Iteration count and final relative residual of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Pixels solved for: foreground and off the image frame. Everything else is
/// a zero Dirichlet condition.
fn unknown_index(domain: &Mask) -> (Vec<usize>, Vec<(usize, usize)>) {
    let (w, h) = domain.dims();
    let mut index = vec![usize::MAX; w * h];
    let mut pixels = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if domain.is_foreground(x, y) {
                index[y * w + x] = pixels.len();
                pixels.push((x, y));
            }
        }
    }
    (index, pixels)
}

/// The SPD system `((4 + λ²)I − adjacency) z = λ²h − ∇·g` over unknown pixels.
struct ScreenedSystem {
    width: usize,
    diagonal: f64,
    index: Vec<usize>,
    pixels: Vec<(usize, usize)>,
}

impl ScreenedSystem {
    fn apply(&self, z: &[f64], out: &mut [f64]) {
        let w = self.width;
        for (k, &(x, y)) in self.pixels.iter().enumerate() {
            let mut acc = self.diagonal * z[k];
            for n in [y * w + x - 1, y * w + x + 1, (y - 1) * w + x, (y + 1) * w + x] {
                let j = self.index[n];
                if j != usize::MAX {
                    acc -= z[j];
                }
            }
            out[k] = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(Δ − λ²) z = ∇·g − λ² h` on the foreground of `domain`.
///
/// Background pixels and the one-pixel image frame are held at zero. The
/// gradient samples are moved to grid edges before taking the divergence, so
/// the system is the normal equations of
/// `Σ_edges (Δz − ḡ)² + λ² Σ_pixels (z − h)²`.
pub fn solve_screened_poisson(
    gradients: &GradientField,
    aux: &ScalarField,
    config: &SolverConfig,
    domain: &Mask,
) -> Result<HeightField> {
    solve_with_stats(gradients, aux, config, domain).map(|(z, _)| z)
}

/// [`solve_screened_poisson`] that also reports convergence statistics.
pub fn solve_with_stats(
    gradients: &GradientField,
    aux: &ScalarField,
    config: &SolverConfig,
    domain: &Mask,
) -> Result<(HeightField, SolveStats)> {
    config.validate()?;
    domain.ensure_dims(gradients.dims())?;
    domain.ensure_dims(aux.dims())?;
    if gradients.iter().any(|g| !(g[0].is_finite() && g[1].is_finite())) {
        return Err(ReliefError::InvalidParameter("gradient field is not finite".into()));
    }

    let (w, h) = domain.dims();
    let (index, pixels) = unknown_index(domain);
    if pixels.is_empty() {
        return Err(ReliefError::EmptyDomain);
    }
    let lambda2 = config.lambda * config.lambda;
    let div = divergence(&stagger(gradients));
    let b: Vec<f64> = pixels
        .iter()
        .map(|&(x, y)| lambda2 * aux.get(x, y) - div.get(x, y))
        .collect();
    let system = ScreenedSystem {
        width: w,
        diagonal: 4.0 + lambda2,
        index,
        pixels,
    };

    let (z, stats) = conjugate_gradient(&system, &b, config.tolerance, config.iteration_cap(w * h))?;
    let mut heights = Grid::filled(w, h, 0.0);
    for (k, &(x, y)) in system.pixels.iter().enumerate() {
        heights.set(x, y, z[k]);
    }
    log::debug!(
        "screened poisson: {} unknowns, {} iterations, residual {:e}",
        system.pixels.len(),
        stats.iterations,
        stats.residual
    );
    Ok((HeightField::new(heights, domain.clone())?, stats))
}

/// Jacobi-preconditioned CG from a zero initial guess.
fn conjugate_gradient(
    system: &ScreenedSystem,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut z = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            z,
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag = 1.0 / system.diagonal;
    let mut r = b.to_vec();
    let mut s: Vec<f64> = r.iter().map(|v| v * inv_diag).collect();
    let mut p = s.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &s);

    for iteration in 1..=max_iterations {
        system.apply(&p, &mut ap);
        let step = rs / dot(&p, &ap);
        for i in 0..n {
            z[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= tolerance {
            return Ok((
                z,
                SolveStats {
                    iterations: iteration,
                    residual,
                },
            ));
        }
        for i in 0..n {
            s[i] = r[i] * inv_diag;
        }
        let rs_next = dot(&r, &s);
        let beta = rs_next / rs;
        rs = rs_next;
        for i in 0..n {
            p[i] = s[i] + beta * p[i];
        }
    }
    Err(ReliefError::NonConvergence {
        iterations: max_iterations,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}

/// Affinely maps foreground heights onto `[0, target_range]`.
///
/// A constant foreground cannot be stretched and yields
/// [`ReliefError::ConstantField`]; [`HeightField::zeros`] is then the result.
pub fn rescale_height(z: &HeightField, target_range: f64) -> Result<HeightField> {
    if !(target_range >= 0.0 && target_range.is_finite()) {
        return Err(ReliefError::InvalidParameter(format!(
            "target range must be non-negative, got {target_range}"
        )));
    }
    let domain = z.domain();
    let (w, h) = domain.dims();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in 0..h {
        for x in 0..w {
            if domain.is_foreground(x, y) {
                lo = lo.min(z.get(x, y));
                hi = hi.max(z.get(x, y));
            }
        }
    }
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(ReliefError::ConstantField);
    }
    let scale = target_range / (hi - lo);
    let heights = Grid::from_fn(w, h, |x, y| (z.get(x, y) - lo) * scale);
    HeightField::new(heights, domain.clone())
}

/// Lambertian shading under a headlight: the z-component of each pixel's
/// normal `normalize(−∂z/∂u, −∂z/∂v, 1)`, central differences inside.
pub fn shade(z: &HeightField) -> ScalarField {
    let heights = z.heights();
    Grid::from_fn(z.width(), z.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let dx = central(heights, x, y, (1, 0));
        let dy = central(heights, x, y, (0, 1));
        1.0 / (1.0 + dx * dx + dy * dy).sqrt()
    })
}

fn central(field: &ScalarField, x: isize, y: isize, dir: (isize, isize)) -> f64 {
    let (w, h) = (field.width() as isize, field.height() as isize);
    let inside = |px: isize, py: isize| px >= 0 && py >= 0 && px < w && py < h;
    let at = |px: isize, py: isize| *field.get(px as usize, py as usize);
    let fwd = (x + dir.0, y + dir.1);
    let back = (x - dir.0, y - dir.1);
    match (inside(fwd.0, fwd.1), inside(back.0, back.1)) {
        (true, true) => 0.5 * (at(fwd.0, fwd.1) - at(back.0, back.1)),
        (true, false) => at(fwd.0, fwd.1) - at(x, y),
        (false, true) => at(x, y) - at(back.0, back.1),
        (false, false) => 0.0,
    }
}
