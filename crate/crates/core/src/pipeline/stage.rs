use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::artifact::{Artifact, Artifacts};
use crate::bandpass::{self, BilateralParams, DetailTuning, FilterParams, DEFAULT_SIGMA_S};
use crate::error::{ReliefError, Result};
use crate::from_image::{self, GvfParams, SobelParams};
use crate::grid::{Grid, Mask};
use crate::relief::{self, AuxSurface, HeightField, SolverConfig};

fn sigma_s() -> f64 {
    DEFAULT_SIGMA_S
}
fn three() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn tolerance() -> f64 {
    1e-10
}
fn canny_low() -> f64 {
    0.05
}
fn canny_high() -> f64 {
    0.1
}
fn x_axis() -> [f64; 2] {
    [1.0, 0.0]
}
fn gvf_omega() -> f64 {
    GvfParams::default().omega
}
fn gvf_iterations() -> usize {
    GvfParams::default().iterations
}
fn gvf_z_const() -> f64 {
    GvfParams::default().z_const
}
fn gvf_step() -> f64 {
    GvfParams::default().step_size
}

macro_rules! name_default {
    ($($f:ident => $v:literal),* $(,)?) => {
        $(fn $f() -> String {
            $v.to_string()
        })*
    };
}

name_default! {
    normals_name => "normals",
    detail_name => "detail",
    base_name => "base",
    composite_name => "composite",
    smoothed_name => "smoothed",
    flattened_name => "flattened",
    gray_name => "gray",
    edges_name => "edges",
    gradient_name => "gradient",
    height_name => "height",
    mesh_name => "mesh",
    preview_name => "preview",
}

/// Auxiliary surface of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuxSpec {
    Constant {
        #[serde(default)]
        value: f64,
    },
    Ramp {
        from: f64,
        to: f64,
        #[serde(default = "x_axis")]
        direction: [f64; 2],
    },
    /// Spherical cap; centered and touching the shorter side unless given.
    Radial {
        #[serde(default)]
        center: Option<[f64; 2]>,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Step surface from a label artifact. `offsets` override its sidecar.
    Layered {
        labels: String,
        #[serde(default)]
        offsets: Option<BTreeMap<String, f64>>,
    },
    /// Any height or gray artifact used as is.
    Field { input: String },
}

impl Default for AuxSpec {
    fn default() -> Self {
        AuxSpec::Constant { value: 0.0 }
    }
}

impl AuxSpec {
    fn referenced(&self) -> Option<&str> {
        match self {
            AuxSpec::Layered { labels, .. } => Some(labels),
            AuxSpec::Field { input } => Some(input),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(ReliefError::InvalidParameter(msg));
        match self {
            AuxSpec::Constant { value } if !value.is_finite() => invalid("constant h must be finite".into()),
            AuxSpec::Radial { radius: Some(r), .. } if r.is_nan() || *r <= 0.0 => {
                invalid(format!("radial h radius must be positive, got {r}"))
            }
            AuxSpec::Layered {
                offsets: Some(offsets), ..
            } => {
                for key in offsets.keys() {
                    if key.trim().parse::<u32>().is_err() {
                        return invalid(format!("bad label {key:?} in offsets"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn realize(&self, artifacts: &Artifacts, domain: &Mask) -> Result<Grid<f64>> {
        let (w, h) = domain.dims();
        let surface = match self {
            AuxSpec::Constant { value } => AuxSurface::Constant(*value),
            AuxSpec::Ramp { from, to, direction } => AuxSurface::Ramp {
                from: *from,
                to: *to,
                direction: *direction,
            },
            AuxSpec::Radial { center, radius, scale } => {
                let AuxSurface::Radial {
                    center: c, radius: r, ..
                } = AuxSurface::centered_hemisphere(w, h, *scale)
                else {
                    unreachable!("centered hemisphere is radial")
                };
                AuxSurface::Radial {
                    center: center.unwrap_or(c),
                    radius: radius.unwrap_or(r),
                    scale: *scale,
                }
            }
            AuxSpec::Layered { labels, offsets } => {
                let (map, sidecar) = artifacts.labels(labels)?;
                let offsets = match offsets {
                    Some(given) => given
                        .iter()
                        .map(|(k, v)| (k.trim().parse::<u32>().unwrap_or(u32::MAX), *v))
                        .collect(),
                    None => sidecar.clone(),
                };
                AuxSurface::Layered {
                    labels: map.clone(),
                    offsets,
                }
            }
            AuxSpec::Field { input } => {
                let field = artifacts.scalar(input)?;
                domain.ensure_dims(field.dims())?;
                return Ok(field.clone());
            }
        };
        relief::build_aux_surface(&surface, domain)
    }
}

/// One pipeline operation. In TOML each stage is a table whose `op` key
/// selects the variant; artifact names default to the conventional ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stage {
    /// Split normals into detail and base layers.
    Decompose {
        #[serde(default = "normals_name")]
        input: String,
        #[serde(default = "three")]
        sigma_c: f64,
        #[serde(default = "sigma_s")]
        sigma_s: f64,
        #[serde(default)]
        pre: Option<BilateralParams>,
        #[serde(default = "detail_name")]
        detail: String,
        #[serde(default = "base_name")]
        base: String,
    },
    /// Attach a detail layer to a base.
    Compose {
        #[serde(default = "detail_name")]
        detail: String,
        #[serde(default = "base_name")]
        base: String,
        #[serde(default = "composite_name")]
        output: String,
    },
    /// Boost or attenuate a detail layer. A flat layer passes through.
    Tune {
        #[serde(default = "detail_name")]
        input: String,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "detail_name")]
        output: String,
    },
    /// Bilateral smoothing blended in by a mask (everywhere without one).
    Smooth {
        #[serde(default = "base_name")]
        input: String,
        #[serde(default)]
        mask: Option<String>,
        #[serde(default = "three")]
        sigma_c: f64,
        #[serde(default = "sigma_s")]
        sigma_s: f64,
        #[serde(default = "smoothed_name")]
        output: String,
    },
    /// Pull normals toward `+z` by a mask.
    Flatten {
        #[serde(default = "base_name")]
        input: String,
        mask: String,
        #[serde(default = "flattened_name")]
        output: String,
    },
    /// Plant a detail patch onto a base at a pixel offset.
    Transfer {
        patch: String,
        #[serde(default)]
        patch_mask: Option<String>,
        #[serde(default = "base_name")]
        base: String,
        #[serde(default)]
        offset: [i64; 2],
        #[serde(default = "composite_name")]
        output: String,
    },
    Grayscale {
        input: String,
        #[serde(default = "gray_name")]
        output: String,
    },
    /// Sobel normals from a gray or RGB image.
    Img2normal {
        input: String,
        #[serde(default = "one")]
        alpha1: f64,
        #[serde(default = "half")]
        alpha2: f64,
        #[serde(default = "detail_name")]
        output: String,
    },
    Canny {
        input: String,
        #[serde(default = "canny_low")]
        low: f64,
        #[serde(default = "canny_high")]
        high: f64,
        #[serde(default = "edges_name")]
        output: String,
    },
    /// Base normals from a sketch or edge map by gradient vector flow.
    Sketch2base {
        #[serde(default = "edges_name")]
        input: String,
        #[serde(default = "gvf_omega")]
        omega: f64,
        #[serde(default = "gvf_iterations")]
        iterations: usize,
        #[serde(default = "gvf_z_const")]
        z_const: f64,
        #[serde(default = "gvf_step")]
        step_size: f64,
        #[serde(default = "base_name")]
        output: String,
    },
    /// Target gradients of a normal image, kept for inspection.
    Gradient {
        #[serde(default = "composite_name")]
        input: String,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "gradient_name")]
        output: String,
    },
    /// Screened Poisson reconstruction. The domain is `mask` if given,
    /// otherwise the alpha mask of the input normals.
    Solve {
        #[serde(default = "composite_name")]
        input: String,
        #[serde(default)]
        lambda: f64,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default)]
        h: AuxSpec,
        #[serde(default)]
        mask: Option<String>,
        #[serde(default = "tolerance")]
        tolerance: f64,
        #[serde(default)]
        max_iterations: Option<usize>,
        /// Stretch the foreground heights onto `[0, rescale]` afterwards.
        #[serde(default)]
        rescale: Option<f64>,
        #[serde(default = "height_name")]
        output: String,
    },
    Mesh {
        #[serde(default = "height_name")]
        input: String,
        #[serde(default = "one")]
        xy_scale: f64,
        #[serde(default = "mesh_name")]
        output: String,
    },
    /// Headlight shading of a height field.
    Preview {
        #[serde(default = "height_name")]
        input: String,
        #[serde(default = "preview_name")]
        output: String,
    },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Decompose { .. } => "decompose",
            Stage::Compose { .. } => "compose",
            Stage::Tune { .. } => "tune",
            Stage::Smooth { .. } => "smooth",
            Stage::Flatten { .. } => "flatten",
            Stage::Transfer { .. } => "transfer",
            Stage::Grayscale { .. } => "grayscale",
            Stage::Img2normal { .. } => "img2normal",
            Stage::Canny { .. } => "canny",
            Stage::Sketch2base { .. } => "sketch2base",
            Stage::Gradient { .. } => "gradient",
            Stage::Solve { .. } => "solve",
            Stage::Mesh { .. } => "mesh",
            Stage::Preview { .. } => "preview",
        }
    }

    /// Artifact names read by this stage.
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            Stage::Decompose { input, .. }
            | Stage::Tune { input, .. }
            | Stage::Grayscale { input, .. }
            | Stage::Img2normal { input, .. }
            | Stage::Canny { input, .. }
            | Stage::Sketch2base { input, .. }
            | Stage::Gradient { input, .. }
            | Stage::Mesh { input, .. }
            | Stage::Preview { input, .. } => vec![input],
            Stage::Compose { detail, base, .. } => vec![detail, base],
            Stage::Smooth { input, mask, .. } => std::iter::once(input.as_str()).chain(mask.as_deref()).collect(),
            Stage::Flatten { input, mask, .. } => vec![input, mask],
            Stage::Transfer {
                patch,
                patch_mask,
                base,
                ..
            } => [Some(patch.as_str()), patch_mask.as_deref(), Some(base.as_str())]
                .into_iter()
                .flatten()
                .collect(),
            Stage::Solve { input, h, mask, .. } => [Some(input.as_str()), h.referenced(), mask.as_deref()]
                .into_iter()
                .flatten()
                .collect(),
        }
    }

    /// Artifact names written by this stage.
    pub fn outputs(&self) -> Vec<&str> {
        match self {
            Stage::Decompose { detail, base, .. } => vec![detail, base],
            Stage::Compose { output, .. }
            | Stage::Tune { output, .. }
            | Stage::Smooth { output, .. }
            | Stage::Flatten { output, .. }
            | Stage::Transfer { output, .. }
            | Stage::Grayscale { output, .. }
            | Stage::Img2normal { output, .. }
            | Stage::Canny { output, .. }
            | Stage::Sketch2base { output, .. }
            | Stage::Gradient { output, .. }
            | Stage::Solve { output, .. }
            | Stage::Mesh { output, .. }
            | Stage::Preview { output, .. } => vec![output],
        }
    }

    /// Parameter checks that need no data.
    pub fn validate(&self) -> Result<()> {
        match self {
            Stage::Decompose {
                sigma_c, sigma_s, pre, ..
            } => FilterParams {
                sigma_c: *sigma_c,
                sigma_s: *sigma_s,
                pre: *pre,
            }
            .validate(),
            Stage::Tune { beta, gamma, .. } => DetailTuning {
                beta: *beta,
                gamma: *gamma,
            }
            .validate(),
            Stage::Smooth { sigma_c, sigma_s, .. } => BilateralParams::new(*sigma_c, *sigma_s).validate(),
            Stage::Img2normal { alpha1, alpha2, .. } => SobelParams {
                alpha1: *alpha1,
                alpha2: *alpha2,
            }
            .validate(),
            Stage::Canny { low, high, .. } => {
                if *low >= 0.0 && low <= high {
                    Ok(())
                } else {
                    Err(ReliefError::InvalidParameter(format!(
                        "canny thresholds must satisfy 0 <= low <= high, got {low}, {high}"
                    )))
                }
            }
            Stage::Sketch2base {
                omega,
                iterations,
                z_const,
                step_size,
                ..
            } => GvfParams {
                omega: *omega,
                iterations: *iterations,
                z_const: *z_const,
                step_size: *step_size,
            }
            .validate(),
            Stage::Gradient { alpha, .. } => {
                if *alpha >= 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(ReliefError::InvalidParameter(format!(
                        "alpha must be non-negative, got {alpha}"
                    )))
                }
            }
            Stage::Solve {
                lambda,
                alpha,
                h,
                tolerance,
                max_iterations,
                rescale,
                ..
            } => {
                SolverConfig {
                    lambda: *lambda,
                    alpha: *alpha,
                    tolerance: *tolerance,
                    max_iterations: *max_iterations,
                }
                .validate()?;
                h.validate()?;
                match rescale {
                    Some(r) if !(*r >= 0.0 && r.is_finite()) => Err(ReliefError::InvalidParameter(format!(
                        "rescale range must be non-negative, got {r}"
                    ))),
                    _ => Ok(()),
                }
            }
            Stage::Mesh { xy_scale, .. } => {
                if *xy_scale > 0.0 && xy_scale.is_finite() {
                    Ok(())
                } else {
                    Err(ReliefError::InvalidParameter(format!(
                        "xy scale must be positive, got {xy_scale}"
                    )))
                }
            }
            Stage::Compose { .. }
            | Stage::Flatten { .. }
            | Stage::Transfer { .. }
            | Stage::Grayscale { .. }
            | Stage::Preview { .. } => Ok(()),
        }
    }

    /// Runs the stage, reading and writing `artifacts`.
    pub fn apply(&self, artifacts: &mut Artifacts) -> Result<()> {
        self.validate()?;
        match self {
            Stage::Decompose {
                input,
                sigma_c,
                sigma_s,
                pre,
                detail,
                base,
            } => {
                let (image, mask) = artifacts.normals(input)?;
                let params = FilterParams {
                    sigma_c: *sigma_c,
                    sigma_s: *sigma_s,
                    pre: *pre,
                };
                let parts = bandpass::decompose(image, &params)?;
                let mask = mask.clone();
                artifacts.insert(
                    detail.clone(),
                    Artifact::Normals {
                        image: parts.detail,
                        mask: mask.clone(),
                    },
                );
                artifacts.insert(
                    base.clone(),
                    Artifact::Normals {
                        image: parts.base,
                        mask,
                    },
                );
            }
            Stage::Compose { detail, base, output } => {
                let (d, _) = artifacts.normals(detail)?;
                let (b, mask) = artifacts.normals(base)?;
                let image = bandpass::compose(d, b)?;
                let mask = mask.clone();
                artifacts.insert(output.clone(), Artifact::Normals { image, mask });
            }
            Stage::Tune {
                input,
                beta,
                gamma,
                output,
            } => {
                let (image, mask) = artifacts.normals(input)?;
                let tuning = DetailTuning {
                    beta: *beta,
                    gamma: *gamma,
                };
                let tuned = match bandpass::tune_detail(image, &tuning) {
                    Err(ReliefError::FlatDetail) => {
                        log::warn!("detail layer {input:?} is flat; tuning leaves it unchanged");
                        image.clone()
                    }
                    other => other?,
                };
                let mask = mask.clone();
                artifacts.insert(output.clone(), Artifact::Normals { image: tuned, mask });
            }
            Stage::Smooth {
                input,
                mask,
                sigma_c,
                sigma_s,
                output,
            } => {
                let (image, domain) = artifacts.normals(input)?;
                let weights = match mask {
                    Some(name) => artifacts.mask(name)?.clone(),
                    None => Mask::full(image.width(), image.height()),
                };
                let smoothed = bandpass::partial_smooth(image, &weights, &BilateralParams::new(*sigma_c, *sigma_s))?;
                let domain = domain.clone();
                artifacts.insert(
                    output.clone(),
                    Artifact::Normals {
                        image: smoothed,
                        mask: domain,
                    },
                );
            }
            Stage::Flatten { input, mask, output } => {
                let (image, domain) = artifacts.normals(input)?;
                let flat = bandpass::flatten(image, artifacts.mask(mask)?)?;
                let domain = domain.clone();
                artifacts.insert(
                    output.clone(),
                    Artifact::Normals {
                        image: flat,
                        mask: domain,
                    },
                );
            }
            Stage::Transfer {
                patch,
                patch_mask,
                base,
                offset,
                output,
            } => {
                let (patch_image, patch_domain) = artifacts.normals(patch)?;
                let weights = match patch_mask {
                    Some(name) => artifacts.mask(name)?,
                    None => patch_domain,
                };
                let (base_image, base_domain) = artifacts.normals(base)?;
                let image = bandpass::transfer_detail(patch_image, weights, base_image, (offset[0], offset[1]))?;
                let mask = base_domain.clone();
                artifacts.insert(output.clone(), Artifact::Normals { image, mask });
            }
            Stage::Grayscale { input, output } => {
                let gray = artifacts.gray(input)?;
                artifacts.insert(output.clone(), Artifact::Gray(gray));
            }
            Stage::Img2normal {
                input,
                alpha1,
                alpha2,
                output,
            } => {
                let gray = artifacts.gray(input)?;
                let params = SobelParams {
                    alpha1: *alpha1,
                    alpha2: *alpha2,
                };
                let image = from_image::normal_from_image(&gray, &params)?;
                let mask = Mask::full(gray.width(), gray.height());
                artifacts.insert(output.clone(), Artifact::Normals { image, mask });
            }
            Stage::Canny {
                input,
                low,
                high,
                output,
            } => {
                let gray = artifacts.gray(input)?;
                let edges = from_image::canny_edges(&gray, *low, *high)?;
                artifacts.insert(output.clone(), Artifact::Gray(edges));
            }
            Stage::Sketch2base {
                input,
                omega,
                iterations,
                z_const,
                step_size,
                output,
            } => {
                let edges = artifacts.gray(input)?;
                let params = GvfParams {
                    omega: *omega,
                    iterations: *iterations,
                    z_const: *z_const,
                    step_size: *step_size,
                };
                let image = from_image::gvf_base_normal(&edges, &params)?;
                let mask = Mask::full(edges.width(), edges.height());
                artifacts.insert(output.clone(), Artifact::Normals { image, mask });
            }
            Stage::Gradient { input, alpha, output } => {
                let (image, _) = artifacts.normals(input)?;
                let g = relief::gradient_from_normals(image, *alpha)?;
                artifacts.insert(output.clone(), Artifact::Gradient(g));
            }
            Stage::Solve {
                input,
                lambda,
                alpha,
                h,
                mask,
                tolerance,
                max_iterations,
                rescale,
                output,
            } => {
                let (image, alpha_mask) = artifacts.normals(input)?;
                let domain = match mask {
                    Some(name) => artifacts.mask(name)?,
                    None => alpha_mask,
                };
                domain.ensure_dims(image.dims())?;
                let config = SolverConfig {
                    lambda: *lambda,
                    alpha: *alpha,
                    tolerance: *tolerance,
                    max_iterations: *max_iterations,
                };
                let g = relief::gradient_from_normals(image, config.alpha)?;
                let aux = h.realize(artifacts, domain)?;
                let mut z = relief::solve_screened_poisson(&g, &aux, &config, domain)?;
                if let Some(range) = rescale {
                    z = match relief::rescale_height(&z, *range) {
                        Err(ReliefError::ConstantField) => {
                            log::warn!("solved heights are constant; rescaling yields zeros");
                            HeightField::zeros(domain.clone())
                        }
                        other => other?,
                    };
                }
                artifacts.insert(output.clone(), Artifact::Height(z));
            }
            Stage::Mesh {
                input,
                xy_scale,
                output,
            } => {
                let z = artifacts.height(input)?;
                let (text, _) = crate::io::export_mesh_obj(z.heights(), z.domain(), *xy_scale)?;
                artifacts.insert(output.clone(), Artifact::Mesh(text));
            }
            Stage::Preview { input, output } => {
                let shaded = relief::shade(artifacts.height(input)?);
                artifacts.insert(output.clone(), Artifact::Gray(shaded));
            }
        }
        Ok(())
    }
}
