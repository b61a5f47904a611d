//! PNG and OBJ codecs for normal maps, masks, height fields and meshes.

mod normal_png;
mod obj;
mod raster;

use std::io::Cursor;

pub use normal_png::{decode_normal_png, encode_normal_png, DecodedNormals, Depth, NON_UNIT_TOLERANCE};
pub use obj::{export_mesh_obj, MeshStats};
pub use raster::{
    decode_gray_image, decode_height_png, decode_label_png, decode_mask_png, decode_rgb_image, encode_gradient_png,
    encode_height_png, encode_label_png, encode_mask_png, encode_rgb_png, encode_scalar_png, parse_label_offsets,
    write_label_offsets, HEIGHT_RANGE_KEY,
};

use crate::error::{ReliefError, Result};

/// Decoded samples of any PNG, widened to `u16`, interleaved per pixel.
#[derive(Debug, Clone)]
pub(crate) struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Largest sample value for the stored bit depth.
    pub max: u16,
    pub samples: Vec<u16>,
    pub indexed: bool,
    pub text: Vec<(String, String)>,
}

impl RawImage {
    pub fn pixel(&self, x: usize, y: usize) -> &[u16] {
        let i = (y * self.width + x) * self.channels;
        &self.samples[i..i + self.channels]
    }
}

fn bad_png(e: impl std::fmt::Display) -> ReliefError {
    ReliefError::BadFormat(format!("png: {e}"))
}

/// Palette images keep their raw indices; everything else is expanded to
/// 8 or 16 bits per sample.
pub(crate) fn read_png(bytes: &[u8]) -> Result<RawImage> {
    let mut probe = png::Decoder::new(Cursor::new(bytes));
    let indexed = probe.read_header_info().map_err(bad_png)?.color_type == png::ColorType::Indexed;

    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    if !indexed {
        decoder.set_transformations(png::Transformations::EXPAND);
    }
    let mut reader = decoder.read_info().map_err(bad_png)?;
    let size = reader.output_buffer_size().ok_or_else(|| bad_png("image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(bad_png)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let channels = frame.color_type.samples();
    let bits = frame.bit_depth as usize;
    let text = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .map(|t| (t.keyword.clone(), t.text.clone()))
        .collect();

    let mut samples = Vec::with_capacity(width * height * channels);
    for row in buf.chunks(frame.line_size).take(height) {
        match bits {
            16 => samples.extend(
                row.chunks_exact(2)
                    .take(width * channels)
                    .map(|b| u16::from_be_bytes([b[0], b[1]])),
            ),
            8 => samples.extend(row.iter().take(width * channels).map(|&b| u16::from(b))),
            _ => {
                let per_byte = 8 / bits;
                let low = (1u16 << bits) - 1;
                for i in 0..width * channels {
                    let shift = 8 - bits * (i % per_byte + 1);
                    samples.push((u16::from(row[i / per_byte]) >> shift) & low);
                }
            }
        }
    }
    Ok(RawImage {
        width,
        height,
        channels,
        max: ((1u32 << bits) - 1) as u16,
        samples,
        indexed,
        text,
    })
}

/// Writes a non-palette PNG. `samples` are interleaved and must fit `depth`.
pub(crate) fn write_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    samples: &[u16],
    text: &[(&str, String)],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        for (key, value) in text {
            encoder
                .add_text_chunk(key.to_string(), value.clone())
                .map_err(bad_png)?;
        }
        let mut writer = encoder.write_header().map_err(bad_png)?;
        let data: Vec<u8> = match depth {
            png::BitDepth::Sixteen => samples.iter().flat_map(|s| s.to_be_bytes()).collect(),
            _ => samples.iter().map(|&s| s as u8).collect(),
        };
        writer.write_image_data(&data).map_err(bad_png)?;
        writer.finish().map_err(bad_png)?;
    }
    Ok(out)
}
