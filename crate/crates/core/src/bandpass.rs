//! Bilateral smoothing of normal images and the detail/base split built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{nlerp, ominus, oplus, UnitNormal};
use crate::error::{ReliefError, Result};
use crate::grid::{Grid, Mask, NormalImage};

/// Range standard deviation used throughout the normal-editing workflow.
pub const DEFAULT_SIGMA_S: f64 = 0.9;

/// Largest angle from `+z` a tuned detail normal may reach.
pub const MAX_TUNED_ANGLE: f64 = 89.9 * std::f64::consts::PI / 180.0;

const DEGENERATE_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilateralParams {
    /// Spatial standard deviation, pixels.
    pub sigma_c: f64,
    /// Range standard deviation, in units of Euclidean normal distance.
    #[serde(default = "default_sigma_s")]
    pub sigma_s: f64,
}

fn default_sigma_s() -> f64 {
    DEFAULT_SIGMA_S
}

impl BilateralParams {
    pub fn new(sigma_c: f64, sigma_s: f64) -> Self {
        Self { sigma_c, sigma_s }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "sigma_c must be positive, got {}",
                self.sigma_c
            )));
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "sigma_s must be positive, got {}",
                self.sigma_s
            )));
        }
        Ok(())
    }

    /// Half-width of the truncated Gaussian window.
    pub fn radius(&self) -> usize {
        (3.0 * self.sigma_c).ceil() as usize
    }
}

/// Parameters of the detail/base decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    pub sigma_c: f64,
    #[serde(default = "default_sigma_s")]
    pub sigma_s: f64,
    /// Optional denoising pass applied to the input before splitting.
    #[serde(default)]
    pub pre: Option<BilateralParams>,
}

impl FilterParams {
    pub fn new(sigma_c: f64, sigma_s: f64) -> Self {
        Self {
            sigma_c,
            sigma_s,
            pre: None,
        }
    }

    pub fn with_pre_smoothing(mut self, sigma_c: f64, sigma_s: f64) -> Self {
        self.pre = Some(BilateralParams::new(sigma_c, sigma_s));
        self
    }

    pub fn smoothing(&self) -> BilateralParams {
        BilateralParams::new(self.sigma_c, self.sigma_s)
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothing().validate()?;
        if let Some(pre) = &self.pre {
            pre.validate()?;
        }
        Ok(())
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self::new(3.0, DEFAULT_SIGMA_S)
    }
}

/// Gain and exponent of the detail-angle remap `θ ↦ β·θ_m·(θ/θ_m)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetailTuning {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for DetailTuning {
    fn default() -> Self {
        Self { beta: 1.0, gamma: 1.0 }
    }
}

impl DetailTuning {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ReliefError::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Remapped angle for `theta` given the layer maximum `theta_max`.
    fn remap(&self, theta: f64, theta_max: f64) -> f64 {
        // β·θ·(θ/θ_m)^(γ-1) equals β·θ_m·(θ/θ_m)^γ and is exact for β = γ = 1.
        (self.beta * theta * (theta / theta_max).powf(self.gamma - 1.0)).min(MAX_TUNED_ANGLE)
    }
}

/// Edge-preserving smoothing of a normal image.
///
/// Each output pixel is the normalized sum of its window neighbours weighted by
/// a spatial Gaussian and a Gaussian of the Euclidean distance between normals.
/// The window is `⌈3σ_c⌉` pixels in each direction, clipped at the border.
pub fn bilateral_filter(image: &NormalImage, params: &BilateralParams) -> Result<NormalImage> {
    params.validate()?;
    let (out, degenerate) = bilateral_with_fallback(image, params);
    if degenerate > 0 {
        return Err(ReliefError::DegenerateSum {
            count: degenerate,
            fallback: Box::new(out),
        });
    }
    Ok(out)
}

/// Like [`bilateral_filter`], but keeps the input normal wherever the weighted
/// sum vanishes and reports how many pixels did.
pub fn bilateral_with_fallback(image: &NormalImage, params: &BilateralParams) -> (NormalImage, usize) {
    let (w, h) = image.dims();
    let radius = params.radius().min(w.max(h) - 1);
    let spatial = spatial_weights(radius, params.sigma_c);
    let range_denom = 2.0 * params.sigma_s * params.sigma_s;

    let mut out = vec![UnitNormal::UP; w * h];
    let degenerate: usize = out
        .par_chunks_mut(w)
        .enumerate()
        .map(|(y, row)| {
            let y0 = y.saturating_sub(radius);
            let y1 = (y + radius).min(h - 1);
            let mut bad = 0;
            for (x, slot) in row.iter_mut().enumerate() {
                let center = image.get(x, y);
                let x0 = x.saturating_sub(radius);
                let x1 = (x + radius).min(w - 1);
                let mut sum = [0.0f64; 3];
                let mut total = 0.0;
                for qy in y0..=y1 {
                    let wy = &spatial[qy.abs_diff(y) * (radius + 1)..];
                    for qx in x0..=x1 {
                        let q = image.get(qx, qy);
                        let d = center.distance(q);
                        let weight = wy[qx.abs_diff(x)] * (-d * d / range_denom).exp();
                        sum[0] += weight * q.x();
                        sum[1] += weight * q.y();
                        sum[2] += weight * q.z();
                        total += weight;
                    }
                }
                let len = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
                *slot = if len < DEGENERATE_NORM * total {
                    bad += 1;
                    *center
                } else {
                    UnitNormal::new(sum[0], sum[1], sum[2]).unwrap_or(*center)
                };
            }
            bad
        })
        .sum();
    (Grid::from_vec(w, h, out).expect("dims preserved"), degenerate)
}

fn spatial_weights(radius: usize, sigma_c: f64) -> Vec<f64> {
    let denom = 2.0 * sigma_c * sigma_c;
    let side = radius + 1;
    let mut table = vec![0.0; side * side];
    for dy in 0..side {
        for dx in 0..side {
            let r2 = (dx * dx + dy * dy) as f64;
            table[dy * side + dx] = (-r2 / denom).exp();
        }
    }
    table
}

/// A normal image split into a detail layer and a base layer.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub detail: NormalImage,
    pub base: NormalImage,
}

/// Splits `image` into `detail = N' ⊖ smooth(N')` and `base = smooth(N')`,
/// where `N'` is `image` or its pre-smoothed version.
pub fn decompose(image: &NormalImage, params: &FilterParams) -> Result<Decomposition> {
    params.validate()?;
    let source = match &params.pre {
        Some(pre) => bilateral_filter(image, pre)?,
        None => image.clone(),
    };
    let base = bilateral_filter(&source, &params.smoothing())?;
    let detail = source.zip_map(&base, ominus)?;
    Ok(Decomposition { detail, base })
}

/// Re-attaches a detail layer to a base layer pixel by pixel.
pub fn compose(detail: &NormalImage, base: &NormalImage) -> Result<NormalImage> {
    detail.zip_map(base, oplus)
}

/// Largest angle between a pixel and `+z`.
pub fn max_detail_angle(detail: &NormalImage) -> f64 {
    detail.iter().map(UnitNormal::angle_from_up).fold(0.0, f64::max)
}

/// Mean angle between a pixel and `+z`.
pub fn mean_detail_angle(detail: &NormalImage) -> f64 {
    detail.iter().map(UnitNormal::angle_from_up).sum::<f64>() / detail.len() as f64
}

/// Boosts or attenuates a detail layer by remapping each pixel's angle from
/// `+z`, keeping its tilt direction.
///
/// Returns [`ReliefError::FlatDetail`] when the layer carries no detail; the
/// input is then already its own result.
pub fn tune_detail(detail: &NormalImage, tuning: &DetailTuning) -> Result<NormalImage> {
    tuning.validate()?;
    let theta_max = max_detail_angle(detail);
    if theta_max < 1e-12 {
        return Err(ReliefError::FlatDetail);
    }
    Ok(detail.map(|n| {
        let theta = n.angle_from_up();
        if theta == 0.0 {
            return *n;
        }
        let remapped = tuning.remap(theta, theta_max);
        if remapped == theta {
            return *n;
        }
        let planar = n.x().hypot(n.y());
        let s = remapped.sin() / planar;
        UnitNormal::new(n.x() * s, n.y() * s, remapped.cos()).unwrap_or(*n)
    }))
}

/// Blends `image` toward its bilateral smoothing, weighted per pixel by `mask`.
pub fn partial_smooth(image: &NormalImage, mask: &Mask, params: &BilateralParams) -> Result<NormalImage> {
    mask.ensure_dims(image.dims())?;
    let smoothed = bilateral_filter(image, params)?;
    Ok(blend(image, &smoothed, mask))
}

/// Blends `image` toward the flat normal `+z`, weighted per pixel by `mask`.
///
/// A stronger way to suppress a base layer than [`partial_smooth`]: masked
/// regions lose their low-frequency shape instead of just being smoothed.
pub fn flatten(image: &NormalImage, mask: &Mask) -> Result<NormalImage> {
    mask.ensure_dims(image.dims())?;
    let flat = Grid::filled(image.width(), image.height(), UnitNormal::UP);
    Ok(blend(image, &flat, mask))
}

fn blend(from: &NormalImage, to: &NormalImage, mask: &Mask) -> NormalImage {
    Grid::from_fn(from.width(), from.height(), |x, y| {
        nlerp(from.get(x, y), to.get(x, y), mask.weight(x, y))
    })
}

/// Plants a detail patch onto `base` with its top-left corner at `offset`.
///
/// Inside the patch mask the output is `patch ⊕ base`, so the detail follows
/// the base orientation; fractional mask weights blend toward `base`.
/// Pixels outside the patch are copied from `base`.
pub fn transfer_detail(
    patch: &NormalImage,
    patch_mask: &Mask,
    base: &NormalImage,
    offset: (i64, i64),
) -> Result<NormalImage> {
    patch_mask.ensure_dims(patch.dims())?;
    let (bw, bh) = (base.width() as i64, base.height() as i64);
    let (pw, ph) = (patch.width() as i64, patch.height() as i64);
    let x0 = offset.0.max(0);
    let y0 = offset.1.max(0);
    let x1 = (offset.0 + pw).min(bw);
    let y1 = (offset.1 + ph).min(bh);
    if x0 >= x1 || y0 >= y1 {
        return Err(ReliefError::EmptyOverlap);
    }

    let mut out = base.clone();
    for y in y0..y1 {
        for x in x0..x1 {
            let (px, py) = ((x - offset.0) as usize, (y - offset.1) as usize);
            let weight = patch_mask.weight(px, py);
            if weight <= 0.0 {
                continue;
            }
            let (x, y) = (x as usize, y as usize);
            let b = base.get(x, y);
            let planted = oplus(patch.get(px, py), b);
            out.set(x, y, nlerp(b, &planted, weight));
        }
    }
    Ok(out)
}
