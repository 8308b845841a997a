use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, FrameImage};
use crate::error::{Error, Result};

/// Maps an image region to a fixed-dimension descriptor.
pub trait FeatureExtractor: Send + Sync {
    fn dim(&self) -> usize;

    fn extract(&self, region: &FrameImage) -> Result<FeatureVector>;
}

/// Hand-crafted grid descriptor. The region is divided into `grid × grid`
/// cells; each cell contributes its mean R, G, B (scaled to `[0, 1]`)
/// followed by a magnitude-weighted histogram of gradient orientations of
/// the gray image with `bins` bins centered on multiples of `2π / bins`
/// (bin 0 points along +x). Histogram entries are normalized by the cell's
/// pixel count. Resolution independent: any crop size works.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridExtractor {
    pub grid: usize,
    pub bins: usize,
}

impl Default for GridExtractor {
    fn default() -> Self {
        GridExtractor { grid: 4, bins: 8 }
    }
}

impl GridExtractor {
    pub fn new(grid: usize, bins: usize) -> Result<Self> {
        if grid == 0 || bins == 0 {
            return Err(Error::InvalidInput(
                "extractor grid and bins must be positive".into(),
            ));
        }
        Ok(GridExtractor { grid, bins })
    }

    fn cell_len(&self) -> usize {
        3 + self.bins
    }
}

impl FeatureExtractor for GridExtractor {
    fn dim(&self) -> usize {
        self.grid * self.grid * self.cell_len()
    }

    fn extract(&self, region: &FrameImage) -> Result<FeatureVector> {
        let (w, h) = (region.width(), region.height());
        let gray: Vec<f64> = region
            .data()
            .chunks_exact(3)
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0))
            .collect();
        let g = |x: usize, y: usize| gray[y * w + x];

        let cell_of = |pos: usize, extent: usize| (pos * self.grid / extent).min(self.grid - 1);
        let mut sums = vec![0.0f64; self.dim()];
        let mut counts = vec![0usize; self.grid * self.grid];
        let bin_width = TAU / self.bins as f64;

        for y in 0..h {
            let cy = cell_of(y, h);
            for x in 0..w {
                let cell = cy * self.grid + cell_of(x, w);
                counts[cell] += 1;
                let base = cell * self.cell_len();
                let px = region.pixel(x, y);
                for c in 0..3 {
                    sums[base + c] += px[c] as f64 / 255.0;
                }
                let gx = (g((x + 1).min(w - 1), y) - g(x.saturating_sub(1), y)) / 2.0;
                let gy = (g(x, (y + 1).min(h - 1)) - g(x, y.saturating_sub(1))) / 2.0;
                let mag = gx.hypot(gy);
                if mag > 0.0 {
                    let angle = gy.atan2(gx).rem_euclid(TAU);
                    let bin = ((angle / bin_width).round() as usize) % self.bins;
                    sums[base + 3 + bin] += mag;
                }
            }
        }
        for (cell, &n) in counts.iter().enumerate() {
            if n > 0 {
                let base = cell * self.cell_len();
                sums[base..base + self.cell_len()]
                    .iter_mut()
                    .for_each(|v| *v /= n as f64);
            }
        }
        FeatureVector::new(sums)
    }
}
