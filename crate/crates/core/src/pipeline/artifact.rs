use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ReliefError, Result};
use crate::from_image::{grayscale, RgbImage};
use crate::grid::{GradientField, Mask, NormalImage, ScalarField};
use crate::io;
use crate::relief::{HeightField, LabelMap};

/// How an input file is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// RGB(A) normal map; alpha becomes the domain mask.
    Normals,
    Rgb,
    Gray,
    Mask,
    /// Gray or indexed label image, optionally with a JSON offset sidecar.
    Labels,
    /// 16-bit height PNG with its stored range.
    Height,
}

/// A named intermediate or final value of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Normals {
        image: NormalImage,
        mask: Mask,
    },
    Rgb(RgbImage),
    /// Gray image, edge map or shaded preview, nominally in `[0, 1]`.
    Gray(ScalarField),
    Mask(Mask),
    Labels {
        labels: LabelMap,
        offsets: BTreeMap<u32, f64>,
    },
    Gradient(GradientField),
    Height(HeightField),
    /// Wavefront OBJ text.
    Mesh(String),
}

impl Artifact {
    pub fn decode(kind: InputKind, bytes: &[u8], offsets: Option<&str>) -> Result<Self> {
        Ok(match kind {
            InputKind::Normals => {
                let decoded = io::decode_normal_png(bytes)?;
                Artifact::Normals {
                    image: decoded.normals,
                    mask: decoded.mask,
                }
            }
            InputKind::Rgb => Artifact::Rgb(io::decode_rgb_image(bytes)?),
            InputKind::Gray => Artifact::Gray(io::decode_gray_image(bytes)?),
            InputKind::Mask => Artifact::Mask(io::decode_mask_png(bytes)?),
            InputKind::Labels => Artifact::Labels {
                labels: io::decode_label_png(bytes)?,
                offsets: offsets.map(io::parse_label_offsets).transpose()?.unwrap_or_default(),
            },
            InputKind::Height => {
                let z = io::decode_height_png(bytes)?;
                let (w, h) = z.dims();
                Artifact::Height(HeightField::new(z, Mask::full(w, h))?)
            }
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Artifact::Normals { .. } => "normals",
            Artifact::Rgb(_) => "rgb",
            Artifact::Gray(_) => "gray",
            Artifact::Mask(_) => "mask",
            Artifact::Labels { .. } => "labels",
            Artifact::Gradient(_) => "gradient",
            Artifact::Height(_) => "height",
            Artifact::Mesh(_) => "mesh",
        }
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        match self {
            Artifact::Normals { image, .. } => Some(image.dims()),
            Artifact::Rgb(g) => Some(g.dims()),
            Artifact::Gray(g) => Some(g.dims()),
            Artifact::Mask(m) => Some(m.dims()),
            Artifact::Labels { labels, .. } => Some(labels.dims()),
            Artifact::Gradient(g) => Some(g.dims()),
            Artifact::Height(z) => Some(z.heights().dims()),
            Artifact::Mesh(_) => None,
        }
    }

    /// File bytes: PNG for rasters, OBJ text for meshes.
    pub fn encode(&self, depth: io::Depth) -> Result<Vec<u8>> {
        match self {
            Artifact::Normals { image, mask } => io::encode_normal_png(image, Some(mask), depth),
            Artifact::Rgb(image) => io::encode_rgb_png(image),
            Artifact::Gray(field) => io::encode_scalar_png(field, 0.0, 1.0),
            Artifact::Mask(mask) => io::encode_mask_png(mask),
            Artifact::Labels { labels, .. } => io::encode_label_png(labels),
            Artifact::Gradient(g) => io::encode_gradient_png(g),
            Artifact::Height(z) => io::encode_height_png(z.heights()),
            Artifact::Mesh(text) => Ok(text.clone().into_bytes()),
        }
    }

    /// Media type of [`Artifact::encode`]'s output.
    pub fn media_type(&self) -> &'static str {
        match self {
            Artifact::Mesh(_) => "model/obj",
            _ => "image/png",
        }
    }
}

/// Named artifacts of one run or session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    items: BTreeMap<String, Artifact>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, artifact: Artifact) {
        self.items.insert(name.into(), artifact);
    }

    pub fn get(&self, name: &str) -> Option<&Artifact> {
        self.items.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.items.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.items.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn require(&self, name: &str) -> Result<&Artifact> {
        self.get(name)
            .ok_or_else(|| ReliefError::InvalidParameter(format!("no artifact named {name:?}")))
    }

    fn wrong_kind(name: &str, found: &Artifact, wanted: &str) -> ReliefError {
        ReliefError::InvalidParameter(format!("artifact {name:?} is {}, expected {wanted}", found.kind_name()))
    }

    /// Normal image plus its domain mask.
    pub fn normals(&self, name: &str) -> Result<(&NormalImage, &Mask)> {
        match self.require(name)? {
            Artifact::Normals { image, mask } => Ok((image, mask)),
            other => Err(Self::wrong_kind(name, other, "normals")),
        }
    }

    pub fn mask(&self, name: &str) -> Result<&Mask> {
        match self.require(name)? {
            Artifact::Mask(mask) => Ok(mask),
            Artifact::Normals { mask, .. } => Ok(mask),
            Artifact::Height(z) => Ok(z.domain()),
            other => Err(Self::wrong_kind(name, other, "a mask")),
        }
    }

    /// Gray value; RGB inputs are converted to luminance.
    pub fn gray(&self, name: &str) -> Result<ScalarField> {
        match self.require(name)? {
            Artifact::Gray(g) => Ok(g.clone()),
            Artifact::Rgb(rgb) => Ok(grayscale(rgb)),
            other => Err(Self::wrong_kind(name, other, "a gray or rgb image")),
        }
    }

    pub fn rgb(&self, name: &str) -> Result<&RgbImage> {
        match self.require(name)? {
            Artifact::Rgb(rgb) => Ok(rgb),
            other => Err(Self::wrong_kind(name, other, "an rgb image")),
        }
    }

    pub fn labels(&self, name: &str) -> Result<(&LabelMap, &BTreeMap<u32, f64>)> {
        match self.require(name)? {
            Artifact::Labels { labels, offsets } => Ok((labels, offsets)),
            other => Err(Self::wrong_kind(name, other, "labels")),
        }
    }

    pub fn height(&self, name: &str) -> Result<&HeightField> {
        match self.require(name)? {
            Artifact::Height(z) => Ok(z),
            other => Err(Self::wrong_kind(name, other, "a height field")),
        }
    }

    /// Heights of a height artifact or values of a gray one.
    pub fn scalar(&self, name: &str) -> Result<&ScalarField> {
        match self.require(name)? {
            Artifact::Height(z) => Ok(z.heights()),
            Artifact::Gray(g) => Ok(g),
            other => Err(Self::wrong_kind(name, other, "a scalar field")),
        }
    }
}
