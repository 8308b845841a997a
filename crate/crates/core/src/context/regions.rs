use serde::{Deserialize, Serialize};

use super::{FrameImage, CONTEXT_LEN};
use crate::error::{Error, Result};

/// Half-open pixel rectangle `[x_min, x_max) × [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidInput(format!(
                "empty bounding box [{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.x_max as usize > width || self.y_max as usize > height {
            return Err(Error::InvalidInput(format!(
                "bounding box {:?} exceeds {width}x{height} frame",
                self.as_array()
            )));
        }
        Ok(())
    }

    /// Smallest box containing both boxes.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    /// Splits at the vertical midpoint. Both halves must be at least two
    /// pixels tall.
    pub fn split_halves(&self) -> Result<(BoundingBox, BoundingBox)> {
        let mid = self.y_min + self.height() / 2;
        if mid - self.y_min < 2 || self.y_max - mid < 2 {
            return Err(Error::InvalidInput(format!(
                "bounding box {:?} too short to split into upper/lower halves",
                self.as_array()
            )));
        }
        Ok((
            BoundingBox {
                y_max: mid,
                ..*self
            },
            BoundingBox {
                y_min: mid,
                ..*self
            },
        ))
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl TryFrom<[u32; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [u32; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        b.as_array()
    }
}

/// The seven context boxes in region order. The two actor boxes may be
/// passed in either order; the one with the smaller `x_min` is "left".
pub fn context_boxes(
    a: &BoundingBox,
    b: &BoundingBox,
    width: usize,
    height: usize,
) -> Result<[BoundingBox; CONTEXT_LEN]> {
    a.check_within(width, height)?;
    b.check_within(width, height)?;
    let (left, right) = if b.x_min < a.x_min { (b, a) } else { (a, b) };
    let (left_upper, left_lower) = left.split_halves()?;
    let (right_upper, right_lower) = right.split_halves()?;
    Ok([
        left.union(right),
        *left,
        *right,
        left_upper,
        left_lower,
        right_upper,
        right_lower,
    ])
}

/// Crops the seven context regions from `frame`.
pub fn build_context_regions(
    left: &BoundingBox,
    right: &BoundingBox,
    frame: &FrameImage,
) -> Result<Vec<FrameImage>> {
    context_boxes(left, right, frame.width(), frame.height())?
        .iter()
        .map(|b| frame.crop(b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(v: [u32; 4]) -> BoundingBox {
        BoundingBox::try_from(v).unwrap()
    }

    #[test]
    fn global_region_is_union() {
        let boxes = context_boxes(&bb([10, 10, 30, 50]), &bb([60, 10, 80, 50]), 100, 60).unwrap();
        // coordinate-wise min/max
        let expected = [10.min(60), 10.min(10), 30.max(80), 50.max(50)];
        assert_eq!(boxes[0].as_array(), expected);
        assert_eq!(boxes[1].as_array(), [10, 10, 30, 50]);
        assert_eq!(boxes[2].as_array(), [60, 10, 80, 50]);
    }

    #[test]
    fn halves_split_at_midpoint() {
        let boxes = context_boxes(&bb([10, 10, 30, 50]), &bb([60, 10, 80, 50]), 100, 60).unwrap();
        assert_eq!(boxes[3].as_array(), [10, 10, 30, 30]);
        assert_eq!(boxes[4].as_array(), [10, 30, 30, 50]);
        assert_eq!(boxes[5].as_array(), [60, 10, 80, 30]);
        assert_eq!(boxes[6].as_array(), [60, 30, 80, 50]);
    }

    #[test]
    fn left_right_resorted_by_x_min() {
        let a = bb([60, 10, 80, 50]);
        let b = bb([10, 12, 30, 40]);
        let boxes = context_boxes(&a, &b, 100, 60).unwrap();
        assert_eq!(boxes[1], b);
        assert_eq!(boxes[2], a);
    }

    #[test]
    fn identical_boxes_allowed() {
        let a = bb([5, 5, 20, 25]);
        let boxes = context_boxes(&a, &a, 30, 30).unwrap();
        assert_eq!(boxes[0], a);
    }

    #[test]
    fn rejects_degenerate_halves_and_out_of_frame() {
        let short = bb([0, 0, 10, 3]);
        assert!(context_boxes(&short, &bb([20, 0, 30, 10]), 40, 40).is_err());
        let outside = bb([35, 0, 45, 10]);
        assert!(context_boxes(&outside, &bb([0, 0, 10, 10]), 40, 40).is_err());
        assert!(BoundingBox::new(5, 5, 5, 9).is_err());
    }

    #[test]
    fn crops_follow_region_order() {
        let mut frame = FrameImage::filled(40, 20, [0.0; 3]);
        frame.set_pixel(2, 2, [200.0, 0.0, 0.0]);
        let crops =
            build_context_regions(&bb([20, 0, 30, 10]), &bb([0, 0, 10, 10]), &frame).unwrap();
        assert_eq!(crops.len(), 7);
        assert_eq!((crops[0].width(), crops[0].height()), (30, 10));
        // left whole body holds the marked pixel at the same offset
        assert_eq!(crops[1].pixel(2, 2), [200.0, 0.0, 0.0]);
        assert_eq!(crops[3].height(), 5);
    }
}
