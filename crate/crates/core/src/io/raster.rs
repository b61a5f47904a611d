use std::collections::BTreeMap;

use super::{read_png, write_png, RawImage};
use crate::error::{ReliefError, Result};
use crate::from_image::{grayscale, RgbImage};
use crate::grid::{GradientField, Grid, Mask, ScalarField};
use crate::relief::LabelMap;

/// tEXt keyword holding the `min max` range of a height PNG.
pub const HEIGHT_RANGE_KEY: &str = "relief:range";

fn normalized(raw: &RawImage, x: usize, y: usize, channel: usize) -> f64 {
    f64::from(raw.pixel(x, y)[channel]) / f64::from(raw.max)
}

fn color_channels(raw: &RawImage) -> Result<usize> {
    if raw.indexed {
        return Err(ReliefError::BadFormat(
            "palette images are only accepted as label maps".into(),
        ));
    }
    Ok(if raw.channels >= 3 { 3 } else { 1 })
}

/// Decodes any non-palette PNG as RGB in `[0, 1]`; gray is replicated, alpha ignored.
pub fn decode_rgb_image(bytes: &[u8]) -> Result<RgbImage> {
    let raw = read_png(bytes)?;
    let colors = color_channels(&raw)?;
    Ok(Grid::from_fn(raw.width, raw.height, |x, y| {
        if colors == 3 {
            [0, 1, 2].map(|c| normalized(&raw, x, y, c))
        } else {
            [normalized(&raw, x, y, 0); 3]
        }
    }))
}

/// Decodes any non-palette PNG as luminance in `[0, 1]`.
pub fn decode_gray_image(bytes: &[u8]) -> Result<ScalarField> {
    let raw = read_png(bytes)?;
    if color_channels(&raw)? == 3 {
        return Ok(grayscale(&decode_rgb_image(bytes)?));
    }
    Ok(Grid::from_fn(raw.width, raw.height, |x, y| normalized(&raw, x, y, 0)))
}

/// 8-bit RGB of values in `[0, 1]`, clamped.
pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>> {
    let samples: Vec<u16> = image
        .iter()
        .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u16))
        .collect();
    write_png(
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &samples,
        &[],
    )
}

/// Affinely maps `[lo, hi]` of `field` onto 8-bit gray, clamping outside.
pub fn encode_scalar_png(field: &ScalarField, lo: f64, hi: f64) -> Result<Vec<u8>> {
    let span = hi - lo;
    let samples: Vec<u16> = field
        .iter()
        .map(|v| {
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            (t.clamp(0.0, 1.0) * 255.0).round() as u16
        })
        .collect();
    write_png(
        field.width(),
        field.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &samples,
        &[],
    )
}

/// 16-bit gray with `[min, max]` stretched to `[0, 65535]`; the range is
/// stored alongside so [`decode_height_png`] restores absolute heights.
pub fn encode_height_png(z: &ScalarField) -> Result<Vec<u8>> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(ReliefError::InvalidParameter("height field is not finite".into()));
    }
    let (lo, hi) = z.min_max();
    let span = hi - lo;
    let samples: Vec<u16> = z
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v - lo) / span * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    write_png(
        z.width(),
        z.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &samples,
        &[(HEIGHT_RANGE_KEY, format!("{lo:?} {hi:?}"))],
    )
}

/// Inverse of [`encode_height_png`]. Without a stored range, samples map to `[0, 1]`.
pub fn decode_height_png(bytes: &[u8]) -> Result<ScalarField> {
    let raw = read_png(bytes)?;
    if color_channels(&raw)? != 1 {
        return Err(ReliefError::BadFormat("height maps must be grayscale".into()));
    }
    let (lo, hi) = match raw.text.iter().find(|(k, _)| k == HEIGHT_RANGE_KEY) {
        Some((_, text)) => parse_range(text)?,
        None => (0.0, 1.0),
    };
    Ok(Grid::from_fn(raw.width, raw.height, |x, y| {
        lo + (hi - lo) * normalized(&raw, x, y, 0)
    }))
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let bad = || ReliefError::BadFormat(format!("malformed height range {text:?}"));
    let mut parts = text.split_whitespace().map(|s| s.parse::<f64>().map_err(|_| bad()));
    let lo = parts.next().ok_or_else(bad)??;
    let hi = parts.next().ok_or_else(bad)??;
    if parts.next().is_some() || lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    encode_scalar_png(mask.weights(), 0.0, 1.0)
}

/// Gray value (or RGB luminance) over the maximum sample becomes the weight.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    Mask::new(decode_gray_image(bytes)?)
}

/// Palette indices, or raw gray sample values, as labels.
pub fn decode_label_png(bytes: &[u8]) -> Result<LabelMap> {
    let raw = read_png(bytes)?;
    if !raw.indexed && raw.channels > 2 {
        return Err(ReliefError::BadFormat("label maps must be grayscale or indexed".into()));
    }
    Ok(Grid::from_fn(raw.width, raw.height, |x, y| {
        u32::from(raw.pixel(x, y)[0])
    }))
}

/// 8-bit gray when every label fits, 16-bit otherwise.
pub fn encode_label_png(labels: &LabelMap) -> Result<Vec<u8>> {
    let top = labels.iter().copied().max().unwrap_or(0);
    let depth = match top {
        0..=255 => png::BitDepth::Eight,
        256..=65535 => png::BitDepth::Sixteen,
        _ => {
            return Err(ReliefError::InvalidParameter(format!(
                "label {top} does not fit a 16-bit PNG"
            )))
        }
    };
    let samples: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
    write_png(
        labels.width(),
        labels.height(),
        png::ColorType::Grayscale,
        depth,
        &samples,
        &[],
    )
}

/// Reads a sidecar of the form `{"0": 0.0, "1": 0.3}`.
pub fn parse_label_offsets(json: &str) -> Result<BTreeMap<u32, f64>> {
    let raw: BTreeMap<String, f64> =
        serde_json::from_str(json).map_err(|e| ReliefError::BadFormat(format!("label offsets: {e}")))?;
    raw.into_iter()
        .map(|(k, v)| {
            let label = k
                .trim()
                .parse::<u32>()
                .map_err(|_| ReliefError::BadFormat(format!("label offsets: bad label {k:?}")))?;
            if !v.is_finite() {
                return Err(ReliefError::BadFormat(format!("label offsets: {k} is not finite")));
            }
            Ok((label, v))
        })
        .collect()
}

pub fn write_label_offsets(offsets: &BTreeMap<u32, f64>) -> String {
    let as_strings: BTreeMap<String, f64> = offsets.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    serde_json::to_string_pretty(&as_strings).expect("string keys serialize")
}

/// Gradient visualization: x in red, y in green, both centered on 128 and
/// scaled by the largest component magnitude; blue is fixed at 128.
pub fn encode_gradient_png(g: &GradientField) -> Result<Vec<u8>> {
    let peak = g.iter().flat_map(|v| [v[0].abs(), v[1].abs()]).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 127.0 / peak } else { 0.0 };
    let samples: Vec<u16> = g
        .iter()
        .flat_map(|v| {
            [
                (128.0 + v[0] * scale).round() as u16,
                (128.0 + v[1] * scale).round() as u16,
                128,
            ]
        })
        .collect();
    write_png(
        g.width(),
        g.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &samples,
        &[("relief:peak", format!("{peak:?}"))],
    )
}
