use serde::{Deserialize, Serialize};

use super::{read_png, write_png};
use crate::algebra::UnitNormal;
use crate::error::{ReliefError, Result};
use crate::grid::{Grid, Mask, NormalImage};

/// Pre-normalization length deviation beyond which a decoded pixel counts as non-unit.
pub const NON_UNIT_TOLERANCE: f64 = 0.1;

/// Bits per channel of an encoded normal map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Depth {
    #[serde(rename = "8")]
    Eight,
    #[default]
    #[serde(rename = "16")]
    Sixteen,
}

impl Depth {
    fn max(self) -> u16 {
        match self {
            Depth::Eight => 255,
            Depth::Sixteen => 65535,
        }
    }

    fn png(self) -> png::BitDepth {
        match self {
            Depth::Eight => png::BitDepth::Eight,
            Depth::Sixteen => png::BitDepth::Sixteen,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedNormals {
    pub normals: NormalImage,
    /// Alpha as weights; full when the image has no alpha channel.
    pub mask: Mask,
    pub depth: Depth,
    /// Foreground pixels whose raw length was off by more than [`NON_UNIT_TOLERANCE`].
    pub non_unit: usize,
}

fn decode_code(code: [u16; 3], max: u16) -> [f64; 3] {
    let m = f64::from(max);
    code.map(|c| 2.0 * f64::from(c) / m - 1.0)
}

fn decode_pixel(code: [u16; 3], max: u16) -> Option<UnitNormal> {
    let [x, y, z] = decode_code(code, max);
    UnitNormal::new(x, y, z)
}

fn round_code(n: [f64; 3], max: u16) -> [u16; 3] {
    let m = f64::from(max);
    n.map(|v| ((v + 1.0) * 0.5 * m).round().clamp(0.0, m) as u16)
}

fn is_fixed_point(code: [u16; 3], max: u16) -> bool {
    decode_pixel(code, max).is_some_and(|n| round_code(n.to_array(), max) == code)
}

/// Code whose decoded normal re-encodes to itself, closest to `n`.
///
/// Plain rounding is usually such a code. When it is not, the nearest of its
/// 26 neighbours that is takes over, so decoding and re-encoding never drifts.
fn encode_pixel(n: UnitNormal, max: u16) -> [u16; 3] {
    let target = n.to_array();
    let rounded = round_code(target, max);
    if is_fixed_point(rounded, max) {
        return rounded;
    }
    let mut best: Option<(f64, [u16; 3])> = None;
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let shifted = [dx, dy, dz];
                let mut code = rounded;
                let mut valid = true;
                for (c, d) in code.iter_mut().zip(shifted) {
                    let v = i32::from(*c) + d;
                    valid &= (0..=i32::from(max)).contains(&v);
                    *c = v.clamp(0, i32::from(max)) as u16;
                }
                if !valid || !is_fixed_point(code, max) {
                    continue;
                }
                let decoded = decode_pixel(code, max).expect("fixed point decodes").to_array();
                let deviation = (0..3).map(|i| (decoded[i] - target[i]).abs()).fold(0.0, f64::max);
                if best.is_none_or(|(d, _)| deviation < d) {
                    best = Some((deviation, code));
                }
            }
        }
    }
    if let Some((_, code)) = best {
        return code;
    }
    // Walk the rounding map until it settles.
    let mut code = rounded;
    for _ in 0..16 {
        let Some(n) = decode_pixel(code, max) else {
            break;
        };
        let next = round_code(n.to_array(), max);
        if next == code {
            break;
        }
        code = next;
    }
    code
}

/// Decodes an RGB(A) PNG, 8 or 16 bits per channel, as normals.
///
/// Channels map through `n = 2c/max − 1` and are renormalized. Alpha becomes
/// the mask; fully transparent pixels decode to `(0, 0, 1)`.
pub fn decode_normal_png(bytes: &[u8]) -> Result<DecodedNormals> {
    let raw = read_png(bytes)?;
    if raw.indexed || raw.channels < 3 {
        return Err(ReliefError::BadFormat("normal maps must be RGB or RGBA".into()));
    }
    let depth = match raw.max {
        255 => Depth::Eight,
        65535 => Depth::Sixteen,
        _ => return Err(ReliefError::BadFormat("unsupported bit depth".into())),
    };
    let has_alpha = raw.channels == 4;
    let mut non_unit = 0;
    let mut weights = Vec::with_capacity(raw.width * raw.height);
    let mut normals = Vec::with_capacity(raw.width * raw.height);
    for y in 0..raw.height {
        for x in 0..raw.width {
            let p = raw.pixel(x, y);
            let alpha = if has_alpha {
                f64::from(p[3]) / f64::from(raw.max)
            } else {
                1.0
            };
            weights.push(alpha);
            if alpha == 0.0 {
                normals.push(UnitNormal::UP);
                continue;
            }
            let v = decode_code([p[0], p[1], p[2]], raw.max);
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (len - 1.0).abs() > NON_UNIT_TOLERANCE {
                non_unit += 1;
            }
            normals.push(UnitNormal::new(v[0], v[1], v[2]).unwrap_or(UnitNormal::UP));
        }
    }
    if non_unit > 0 {
        log::warn!("{non_unit} normal-map pixels were far from unit length");
    }
    Ok(DecodedNormals {
        normals: Grid::from_vec(raw.width, raw.height, normals)?,
        mask: Mask::new(Grid::from_vec(raw.width, raw.height, weights)?)?,
        depth,
        non_unit,
    })
}

/// Encodes normals as RGB, or RGBA when `mask` has any non-foreground weight.
///
/// Output is canonical: decoding and re-encoding reproduces the same bytes.
pub fn encode_normal_png(normals: &NormalImage, mask: Option<&Mask>, depth: Depth) -> Result<Vec<u8>> {
    if let Some(mask) = mask {
        mask.ensure_dims(normals.dims())?;
    }
    let max = depth.max();
    let alpha = mask.filter(|m| !m.is_full());
    let channels = if alpha.is_some() { 4 } else { 3 };
    let mut samples = Vec::with_capacity(normals.len() * channels);
    for y in 0..normals.height() {
        for x in 0..normals.width() {
            let a = alpha.map(|m| (m.weight(x, y) * f64::from(max)).round() as u16);
            let n = if a == Some(0) {
                UnitNormal::UP
            } else {
                *normals.get(x, y)
            };
            samples.extend(encode_pixel(n, max));
            samples.extend(a);
        }
    }
    let color = if alpha.is_some() {
        png::ColorType::Rgba
    } else {
        png::ColorType::Rgb
    };
    write_png(normals.width(), normals.height(), color, depth.png(), &samples, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_normal() -> impl Strategy<Value = UnitNormal> {
        (0.0f64..1.5, -3.2f64..3.2).prop_map(|(a, b)| UnitNormal::from_spherical(a, b))
    }

    fn arb_image() -> impl Strategy<Value = (NormalImage, Mask)> {
        (1usize..7, 1usize..7).prop_flat_map(|(w, h)| {
            (
                prop::collection::vec(arb_normal(), w * h),
                prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 0.5]), w * h),
            )
                .prop_map(move |(n, m)| {
                    (
                        Grid::from_vec(w, h, n).unwrap(),
                        Mask::new(Grid::from_vec(w, h, m).unwrap()).unwrap(),
                    )
                })
        })
    }

    fn rgb_png(pixels: &[u16], depth: png::BitDepth) -> Vec<u8> {
        write_png(pixels.len() / 3, 1, png::ColorType::Rgb, depth, pixels, &[]).unwrap()
    }

    #[test]
    fn midpoint_decodes_to_up() {
        let d = decode_normal_png(&rgb_png(&[128, 128, 255], png::BitDepth::Eight)).unwrap();
        let n = d.normals.get(0, 0);
        assert!((n.x() - 1.0 / 255.0).abs() < 1e-4);
        assert!(n.angle_from_up() < 0.01);
        assert!(d.mask.is_full());
        assert_eq!(d.depth, Depth::Eight);
        assert_eq!(d.non_unit, 0);
    }

    #[test]
    fn red_is_positive_x() {
        let d = decode_normal_png(&rgb_png(&[255, 128, 128], png::BitDepth::Eight)).unwrap();
        let n = d.normals.get(0, 0);
        assert!(n.x() > 0.9999);
        assert!((n.to_array().iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(d.non_unit, 0);
    }

    #[test]
    fn short_vectors_are_counted() {
        let d = decode_normal_png(&rgb_png(&[128, 128, 128, 128, 128, 255], png::BitDepth::Eight)).unwrap();
        assert_eq!(d.non_unit, 1);
    }

    #[test]
    fn transparent_pixels_become_background() {
        let samples = [255, 0, 128, 0, 128, 128, 255, 255];
        let bytes = write_png(2, 1, png::ColorType::Rgba, png::BitDepth::Eight, &samples, &[]).unwrap();
        let d = decode_normal_png(&bytes).unwrap();
        assert_eq!(*d.normals.get(0, 0), UnitNormal::UP);
        assert!(!d.mask.is_foreground(0, 0));
        assert!(d.mask.is_foreground(1, 0));
    }

    #[test]
    fn grayscale_is_rejected() {
        let bytes = write_png(1, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[9], &[]).unwrap();
        assert!(matches!(decode_normal_png(&bytes), Err(ReliefError::BadFormat(_))));
        assert!(matches!(
            decode_normal_png(b"not a png"),
            Err(ReliefError::BadFormat(_))
        ));
    }

    #[test]
    fn full_mask_writes_rgb() {
        let n = Grid::filled(3, 2, UnitNormal::UP);
        let bytes = encode_normal_png(&n, Some(&Mask::full(3, 2)), Depth::Eight).unwrap();
        let raw = read_png(&bytes).unwrap();
        assert_eq!(raw.channels, 3);
        let bytes = encode_normal_png(&n, Some(&Mask::empty(3, 2)), Depth::Eight).unwrap();
        assert_eq!(read_png(&bytes).unwrap().channels, 4);
    }

    #[test]
    fn every_8bit_code_reached_by_encoding_is_stable() {
        let mut moved = 0;
        for a in 0..40 {
            for b in 0..40 {
                let n = UnitNormal::from_spherical(a as f64 * 0.038, b as f64 * 0.157);
                let code = encode_pixel(n, 255);
                assert!(is_fixed_point(code, 255), "{n:?}");
                moved += usize::from(code != round_code(n.to_array(), 255));
            }
        }
        assert!(moved < 160, "{moved}");
    }

    proptest! {
        #[test]
        fn encode_decode_encode_is_byte_identical((n, m) in arb_image(), sixteen in any::<bool>()) {
            let depth = if sixteen { Depth::Sixteen } else { Depth::Eight };
            let first = encode_normal_png(&n, Some(&m), depth).unwrap();
            let d = decode_normal_png(&first).unwrap();
            let second = encode_normal_png(&d.normals, Some(&d.mask), depth).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn decoded_normals_stay_within_one_code_step((n, _) in arb_image(), sixteen in any::<bool>()) {
            let depth = if sixteen { Depth::Sixteen } else { Depth::Eight };
            let step = 2.0 / f64::from(depth.max());
            let d = decode_normal_png(&encode_normal_png(&n, None, depth).unwrap()).unwrap();
            for (a, b) in n.iter().zip(d.normals.iter()) {
                for (x, y) in a.to_array().iter().zip(b.to_array()) {
                    prop_assert!((x - y).abs() <= step);
                }
                let raw = decode_code(encode_pixel(*a, depth.max()), depth.max());
                for (x, r) in a.to_array().iter().zip(raw) {
                    prop_assert!((x - r).abs() <= step);
                }
            }
        }
    }
}
