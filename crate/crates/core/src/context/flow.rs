use super::FrameImage;
use crate::error::{Error, Result};

/// Dense displacement field, interleaved `(dx, dy)` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 2 {
            return Err(Error::shape(
                "FlowField::new",
                width * height * 2,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow component".into()));
        }
        Ok(FlowField {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            data: vec![0.0; width * height * 2],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = (y * self.width + x) * 2;
        (self.data[i], self.data[i + 1])
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize, d: (f32, f32)) {
        let i = (y * self.width + x) * 2;
        self.data[i] = d.0;
        self.data[i + 1] = d.1;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Three-channel rendering of a flow field: x and y components rescaled to
/// `[0, 255]`, third channel zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowImage(FrameImage);

impl FlowImage {
    pub fn image(&self) -> &FrameImage {
        &self.0
    }

    pub fn into_image(self) -> FrameImage {
        self.0
    }
}

/// Maps each flow component linearly onto `[0, 255]` using that
/// component's min and max over the image. A constant component maps to 128.
pub fn encode_flow(flow: &FlowField) -> FlowImage {
    let mut ranges = [(f32::INFINITY, f32::NEG_INFINITY); 2];
    for px in flow.data.chunks_exact(2) {
        for (r, &v) in ranges.iter_mut().zip(px) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    let scale = |v: f32, (lo, hi): (f32, f32)| {
        if hi > lo {
            255.0 * (v - lo) / (hi - lo)
        } else {
            128.0
        }
    };
    let data = flow
        .data
        .chunks_exact(2)
        .flat_map(|px| [scale(px[0], ranges[0]), scale(px[1], ranges[1]), 0.0])
        .collect();
    FlowImage(FrameImage {
        width: flow.width,
        height: flow.height,
        data,
    })
}

/// Block-matching motion estimate from `frame_a` to `frame_b`.
///
/// The frame is tiled into `block`-sized blocks (edge blocks may be
/// smaller). Each block gets the integer displacement within `±search` that
/// minimizes the sum of absolute differences over all channels; candidates
/// that leave the frame are skipped. Ties prefer smaller displacement
/// magnitude, then smaller `dx`, then smaller `dy`. The winning
/// displacement is written to every pixel of the block.
pub fn block_matching_flow(
    frame_a: &FrameImage,
    frame_b: &FrameImage,
    block: usize,
    search: usize,
) -> Result<FlowField> {
    let (w, h) = (frame_a.width(), frame_a.height());
    if (frame_b.width(), frame_b.height()) != (w, h) {
        return Err(Error::shape(
            "block_matching_flow",
            format!("{w}x{h}"),
            format!("{}x{}", frame_b.width(), frame_b.height()),
        ));
    }
    if block < 4 || search < 1 {
        return Err(Error::InvalidInput(format!(
            "block matching needs block >= 4 and search >= 1 (got {block}, {search})"
        )));
    }
    let s = search as i64;
    let mut flow = FlowField::zeros(w, h);
    for by in (0..h).step_by(block) {
        let bh = block.min(h - by);
        for bx in (0..w).step_by(block) {
            let bw = block.min(w - bx);
            let mut best: Option<(f64, i64, i64, i64)> = None;
            for dy in -s..=s {
                let y0 = by as i64 + dy;
                if y0 < 0 || y0 + bh as i64 > h as i64 {
                    continue;
                }
                for dx in -s..=s {
                    let x0 = bx as i64 + dx;
                    if x0 < 0 || x0 + bw as i64 > w as i64 {
                        continue;
                    }
                    let sad = block_sad(
                        frame_a,
                        frame_b,
                        (bx, by),
                        (x0 as usize, y0 as usize),
                        (bw, bh),
                    );
                    let key = (sad, dx * dx + dy * dy, dx, dy);
                    if best.map_or(true, |b| key < b) {
                        best = Some(key);
                    }
                }
            }
            let (_, _, dx, dy) = best.expect("zero displacement is always a candidate");
            for y in by..by + bh {
                for x in bx..bx + bw {
                    flow.set(x, y, (dx as f32, dy as f32));
                }
            }
        }
    }
    Ok(flow)
}

fn block_sad(
    a: &FrameImage,
    b: &FrameImage,
    (ax, ay): (usize, usize),
    (bx, by): (usize, usize),
    (bw, bh): (usize, usize),
) -> f64 {
    let width = a.width();
    let mut sad = 0.0f64;
    for row in 0..bh {
        let ia = ((ay + row) * width + ax) * 3;
        let ib = ((by + row) * width + bx) * 3;
        let ra = &a.data()[ia..ia + bw * 3];
        let rb = &b.data()[ib..ib + bw * 3];
        sad += ra
            .iter()
            .zip(rb)
            .map(|(p, q)| (p - q).abs() as f64)
            .sum::<f64>();
    }
    sad
}
