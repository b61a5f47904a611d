//! Normal images from a single photograph or sketch.
//!
//! Fine detail comes from Sobel derivatives of the grayscale image. The base
//! shape comes from a sketch: the gradient of the stroke map is diffused over
//! the image (gradient-vector-flow style) and read back as normals.

use serde::{Deserialize, Serialize};

use crate::algebra::UnitNormal;
use crate::error::{ReliefError, Result};
use crate::grid::{Grid, NormalImage, ScalarField, VectorField};

/// Linear RGB samples in `[0, 1]`.
pub type RgbImage = Grid<[f64; 3]>;

/// Rec. 601 luma.
pub fn grayscale(rgb: &RgbImage) -> ScalarField {
    rgb.map(|&[r, g, b]| 0.299 * r + 0.587 * g + 0.114 * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobelParams {
    /// z-component for a flat region.
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    /// Decay base of the z-component with gradient magnitude, in `(0, 1]`.
    #[serde(default = "default_alpha2")]
    pub alpha2: f64,
}

fn default_alpha1() -> f64 {
    1.0
}

fn default_alpha2() -> f64 {
    0.5
}

impl Default for SobelParams {
    fn default() -> Self {
        Self {
            alpha1: default_alpha1(),
            alpha2: default_alpha2(),
        }
    }
}

impl SobelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "alpha1 must be positive, got {}",
                self.alpha1
            )));
        }
        if !(self.alpha2 > 0.0 && self.alpha2 <= 1.0) {
            return Err(ReliefError::InvalidParameter(format!(
                "alpha2 must lie in (0, 1], got {}",
                self.alpha2
            )));
        }
        Ok(())
    }
}

/// 3×3 Sobel derivatives with 1/8-normalized weights and replicated borders.
///
/// A ramp `g = c·x` yields `dx = c` away from the border.
pub fn sobel(image: &ScalarField) -> VectorField {
    Grid::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let p = |dx: isize, dy: isize| *image.get_clamped(x + dx, y + dy);
        let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        [gx / 8.0, gy / 8.0]
    })
}

/// Detail normals of a grayscale image: `normalize(-dx, -dy, α₁·α₂^|(dx,dy)|)`.
pub fn normal_from_image(gray: &ScalarField, params: &SobelParams) -> Result<NormalImage> {
    params.validate()?;
    Ok(sobel(gray).map(|&[dx, dy]| {
        let dz = params.alpha1 * params.alpha2.powf(dx.hypot(dy));
        UnitNormal::new(-dx, -dy, dz).unwrap_or(UnitNormal::UP)
    }))
}

/// Separable Gaussian blur with a `⌈3σ⌉` kernel and replicated borders.
pub fn gaussian_blur(image: &ScalarField, sigma: f64) -> ScalarField {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let pass = |src: &ScalarField, horizontal: bool| {
        Grid::from_fn(src.width(), src.height(), |x, y| {
            kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, i)| {
                    let (sx, sy) = if horizontal {
                        (x as isize + i, y as isize)
                    } else {
                        (x as isize, y as isize + i)
                    };
                    k * src.get_clamped(sx, sy)
                })
                .sum()
        })
    };
    pass(&pass(image, true), false)
}

/// Canny edge map: 1 on edge pixels, 0 elsewhere.
///
/// Gaussian blur (σ = 1), Sobel gradient, non-maximum suppression along the
/// gradient direction, then hysteresis with 8-connectivity. Thresholds apply
/// to the gradient magnitude in intensity units per pixel.
pub fn canny_edges(gray: &ScalarField, low: f64, high: f64) -> Result<ScalarField> {
    if !(low >= 0.0 && low <= high) {
        return Err(ReliefError::InvalidParameter(format!(
            "canny thresholds must satisfy 0 <= low <= high, got {low}, {high}"
        )));
    }
    let (w, h) = gray.dims();
    let grad = sobel(&gaussian_blur(gray, 1.0));
    let magnitude = grad.map(|g| g[0].hypot(g[1]));

    // Thinned magnitude: zero wherever a pixel is not a local maximum.
    let thin = Grid::from_fn(w, h, |x, y| {
        let m = *magnitude.get(x, y);
        if m <= 0.0 {
            return 0.0;
        }
        let [gx, gy] = *grad.get(x, y);
        let (ox, oy) = gradient_step(gx, gy);
        let (x, y) = (x as isize, y as isize);
        let sample = |dx: isize, dy: isize| {
            let (sx, sy) = (x + dx, y + dy);
            if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                0.0
            } else {
                *magnitude.get(sx as usize, sy as usize)
            }
        };
        // Ties go to the pixel on the negative side of the gradient.
        if m > sample(-ox, -oy) && m >= sample(ox, oy) {
            m
        } else {
            0.0
        }
    });

    let mut edges = Grid::filled(w, h, 0.0);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *thin.get(x, y) >= high && *thin.get(x, y) > 0.0 && *edges.get(x, y) == 0.0 {
                edges.set(x, y, 1.0);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for ny in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                        for nx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                            let m = *thin.get(nx, ny);
                            if m > 0.0 && m >= low && *edges.get(nx, ny) == 0.0 {
                                edges.set(nx, ny, 1.0);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(edges)
}

/// Gradient direction quantized to one of the 8 neighbour offsets.
fn gradient_step(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Largest stable diffusion step for the 5-point Laplacian.
pub const MAX_GVF_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GvfParams {
    /// Weight of the edge-fidelity term.
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Constant z-component of the assembled normals; smaller values lift more.
    #[serde(default = "default_z_const")]
    pub z_const: f64,
    #[serde(default = "default_step")]
    pub step_size: f64,
}

fn default_omega() -> f64 {
    2.0
}

fn default_iterations() -> usize {
    500
}

fn default_z_const() -> f64 {
    0.1
}

fn default_step() -> f64 {
    0.2
}

impl Default for GvfParams {
    fn default() -> Self {
        Self {
            omega: default_omega(),
            iterations: default_iterations(),
            z_const: default_z_const(),
            step_size: default_step(),
        }
    }
}

impl GvfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "omega must be non-negative, got {}",
                self.omega
            )));
        }
        if !(self.z_const > 0.0 && self.z_const.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "z_const must be positive, got {}",
                self.z_const
            )));
        }
        if !(self.step_size > 0.0 && self.step_size <= MAX_GVF_STEP) {
            return Err(ReliefError::UnstableStep {
                step: self.step_size,
                bound: MAX_GVF_STEP,
            });
        }
        Ok(())
    }
}

/// Central-difference gradient with replicated borders.
pub fn central_gradient(field: &ScalarField) -> VectorField {
    Grid::from_fn(field.width(), field.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        [
            0.5 * (field.get_clamped(x + 1, y) - field.get_clamped(x - 1, y)),
            0.5 * (field.get_clamped(x, y + 1) - field.get_clamped(x, y - 1)),
        ]
    })
}

/// Iterative minimizer of
/// `Σ ‖∇x‖² + ‖∇y‖² + ω‖∇e‖²‖g − ∇e‖²` over the vector field `g = (x, y)`.
///
/// Each step is an explicit diffusion step on the smoothness term followed by
/// an exact (implicit) update of the pointwise edge term, which divides the
/// explicit update by `1 + Δt·ω‖∇e‖²`.
#[derive(Debug, Clone)]
pub struct GradientVectorFlow {
    edge_gradient: VectorField,
    /// `ω‖∇e‖²` per pixel.
    coupling: ScalarField,
    omega: f64,
    step: f64,
    field: VectorField,
    scratch: VectorField,
    iterations: usize,
}

impl GradientVectorFlow {
    /// Starts the flow from `∇e`, where `e` is `edges` after a σ = 1 blur.
    pub fn new(edges: &ScalarField, omega: f64, step: f64) -> Result<Self> {
        GvfParams {
            omega,
            step_size: step,
            ..GvfParams::default()
        }
        .validate()?;
        let edge_gradient = central_gradient(&gaussian_blur(edges, 1.0));
        let coupling = edge_gradient.map(|g| omega * (g[0] * g[0] + g[1] * g[1]));
        Ok(Self {
            field: edge_gradient.clone(),
            scratch: edge_gradient.clone(),
            edge_gradient,
            coupling,
            omega,
            step,
            iterations: 0,
        })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn into_field(self) -> VectorField {
        self.field
    }

    pub fn edge_gradient(&self) -> &VectorField {
        &self.edge_gradient
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn step(&mut self) {
        let (w, h) = self.field.dims();
        let t = self.step;
        for y in 0..h {
            for x in 0..w {
                let center = *self.field.get(x, y);
                let mut lap = [0.0, 0.0];
                let mut add = |q: &[f64; 2]| {
                    lap[0] += q[0] - center[0];
                    lap[1] += q[1] - center[1];
                };
                if x > 0 {
                    add(self.field.get(x - 1, y));
                }
                if x + 1 < w {
                    add(self.field.get(x + 1, y));
                }
                if y > 0 {
                    add(self.field.get(x, y - 1));
                }
                if y + 1 < h {
                    add(self.field.get(x, y + 1));
                }
                let c = *self.coupling.get(x, y);
                let target = self.edge_gradient.get(x, y);
                let denom = 1.0 + t * c;
                self.scratch.set(
                    x,
                    y,
                    [
                        (center[0] + t * (lap[0] + c * target[0])) / denom,
                        (center[1] + t * (lap[1] + c * target[1])) / denom,
                    ],
                );
            }
        }
        std::mem::swap(&mut self.field, &mut self.scratch);
        self.iterations += 1;
    }

    /// Discrete energy of the current field; forward differences inside the image.
    pub fn energy(&self) -> f64 {
        gvf_energy(&self.field, &self.edge_gradient, self.omega)
    }
}

/// `Σ_edges ‖g_q − g_p‖² + ω Σ_p ‖∇e_p‖² ‖g_p − ∇e_p‖²`.
pub fn gvf_energy(field: &VectorField, edge_gradient: &VectorField, omega: f64) -> f64 {
    let (w, h) = field.dims();
    let mut smooth = 0.0;
    let mut data = 0.0;
    for y in 0..h {
        for x in 0..w {
            let p = field.get(x, y);
            if x + 1 < w {
                let q = field.get(x + 1, y);
                smooth += (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            }
            if y + 1 < h {
                let q = field.get(x, y + 1);
                smooth += (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            }
            let e = edge_gradient.get(x, y);
            let mag2 = e[0] * e[0] + e[1] * e[1];
            data += mag2 * ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2));
        }
    }
    smooth + omega * data
}

/// Runs the flow for `params.iterations` steps and returns the vector field.
pub fn gvf_field(edges: &ScalarField, params: &GvfParams) -> Result<VectorField> {
    params.validate()?;
    let mut flow = GradientVectorFlow::new(edges, params.omega, params.step_size)?;
    for _ in 0..params.iterations {
        flow.step();
    }
    Ok(flow.into_field())
}

/// Base normals from a sketch: `normalize(−x, −y, z_const)` of the diffused field.
pub fn gvf_base_normal(edges: &ScalarField, params: &GvfParams) -> Result<NormalImage> {
    let field = gvf_field(edges, params)?;
    Ok(field.map(|&[gx, gy]| UnitNormal::new(-gx, -gy, params.z_const).unwrap_or(UnitNormal::UP)))
}
