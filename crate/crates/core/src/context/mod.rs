//! Structural context: actor regions, flow images and feature vectors.
//!
//! A frame (or flow image) is summarized by seven region features ordered
//! from global to local: the region holding both actors, each actor's whole
//! body, then the upper and lower halves of the left and right actors.

mod features;
mod flow;
mod record;
mod regions;

pub use features::{FeatureExtractor, GridExtractor};
pub use flow::{block_matching_flow, encode_flow, FlowField, FlowImage};
pub use record::{load_feature_file, write_feature_file, VideoRecord};
pub use regions::{build_context_regions, context_boxes, BoundingBox};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of regions in a context sequence.
pub const CONTEXT_LEN: usize = 7;

/// Position of each region inside a [`ContextSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Global,
    LeftWhole,
    RightWhole,
    LeftUpper,
    LeftLower,
    RightUpper,
    RightLower,
}

impl Region {
    pub const ORDER: [Region; CONTEXT_LEN] = [
        Region::Global,
        Region::LeftWhole,
        Region::RightWhole,
        Region::LeftUpper,
        Region::LeftLower,
        Region::RightUpper,
        Region::RightLower,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Interleaved RGB image with real intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FrameImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image with zero extent".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::shape(
                "FrameImage::new",
                width * height * 3,
                data.len(),
            ));
        }
        Ok(FrameImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        FrameImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies the pixels inside `bbox`. The box must lie inside the image.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<FrameImage> {
        bbox.check_within(self.width, self.height)?;
        let (x0, y0) = (bbox.x_min as usize, bbox.y_min as usize);
        let (w, h) = (bbox.width() as usize, bbox.height() as usize);
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        FrameImage::new(w, h, data)
    }
}

/// Fixed-dimension descriptor of one image region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty feature vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector entry".into()));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The seven region features of one frame, in [`Region::ORDER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureVector>", into = "Vec<FeatureVector>")]
pub struct ContextSequence {
    regions: Vec<FeatureVector>,
}

impl ContextSequence {
    pub fn new(regions: Vec<FeatureVector>) -> Result<Self> {
        if regions.len() != CONTEXT_LEN {
            return Err(Error::shape(
                "ContextSequence",
                format!("{CONTEXT_LEN} regions"),
                regions.len(),
            ));
        }
        let dim = regions[0].dim();
        if let Some(bad) = regions.iter().find(|r| r.dim() != dim) {
            return Err(Error::shape(
                "ContextSequence region dimension",
                dim,
                bad.dim(),
            ));
        }
        Ok(ContextSequence { regions })
    }

    pub fn dim(&self) -> usize {
        self.regions[0].dim()
    }

    pub fn region(&self, region: Region) -> &FeatureVector {
        &self.regions[region.index()]
    }

    pub fn global(&self) -> &FeatureVector {
        self.region(Region::Global)
    }

    pub fn steps(&self) -> &[FeatureVector] {
        &self.regions
    }
}

impl TryFrom<Vec<FeatureVector>> for ContextSequence {
    type Error = Error;

    fn try_from(regions: Vec<FeatureVector>) -> Result<Self> {
        ContextSequence::new(regions)
    }
}

impl From<ContextSequence> for Vec<FeatureVector> {
    fn from(seq: ContextSequence) -> Self {
        seq.regions
    }
}
