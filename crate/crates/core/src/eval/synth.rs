//! Desk-scale synthetic interaction videos.
//!
//! Two striped rectangular actors stand on a static textured background.
//! Each actor carries an "arm" bar in the upper half of its box and a "leg"
//! block in the lower half. A class script moves whole actors or single
//! limbs; every video draws its own colors, positions, speeds and phases.
//! All intensities are integers so frames survive an 8-bit PNG round trip.

use serde::{Deserialize, Serialize};

use crate::context::{BoundingBox, FrameImage};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Class scripts in label order.
pub const CLASS_NAMES: [&str; 8] = [
    "approach",
    "depart",
    "left_upper_oscillation",
    "left_lower_oscillation",
    "right_upper_oscillation",
    "right_lower_oscillation",
    "joint_oscillation",
    "push_back",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub videos_per_class: usize,
    pub frames_per_video: usize,
    pub groups: u32,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
    pub seed: u64,
}

fn default_width() -> usize {
    80
}

fn default_height() -> usize {
    48
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > CLASS_NAMES.len() {
            return Err(Error::InvalidInput(format!(
                "synthetic classes must be in 1..={}, got {}",
                CLASS_NAMES.len(),
                self.num_classes
            )));
        }
        if self.videos_per_class == 0 || self.groups == 0 {
            return Err(Error::InvalidInput(
                "video and group counts must be positive".into(),
            ));
        }
        if self.frames_per_video < 2 {
            return Err(Error::InvalidInput(
                "synthetic videos need at least 2 frames".into(),
            ));
        }
        if self.width < 2 * (ACTOR_W_MAX + 2) || self.height < ACTOR_H_MAX + 4 {
            return Err(Error::InvalidInput(format!(
                "frame {}x{} too small for two actors",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Raw frames and actor boxes of one video. `boxes[t]` is `[left, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideo {
    pub id: String,
    /// Zero-based class.
    pub label: usize,
    pub group: u32,
    pub frames: Vec<FrameImage>,
    pub boxes: Vec<[BoundingBox; 2]>,
}

const ACTOR_W_MAX: usize = 13;
const ACTOR_H_MAX: usize = 32;
const ARM_H: usize = 4;
const LEG_W: usize = 4;

/// Generates `videos_per_class` videos for each of the first
/// `num_classes` scripts. Video `j` of every class belongs to group
/// `j % groups`. Bitwise deterministic in the seed.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<RawVideo>> {
    cfg.validate()?;
    let mut master = Rng::new(cfg.seed);
    let mut videos = Vec::with_capacity(cfg.num_classes * cfg.videos_per_class);
    for label in 0..cfg.num_classes {
        for j in 0..cfg.videos_per_class {
            let mut rng = master.fork();
            let id = format!("c{}_v{j:03}", label + 1);
            let group = j as u32 % cfg.groups;
            videos.push(render_video(cfg, id, label, group, &mut rng)?);
        }
    }
    Ok(videos)
}

struct Actor {
    w: usize,
    h: usize,
    y: usize,
    body: [f64; 3],
    arm: [f64; 3],
    leg: [f64; 3],
    texture: Vec<f64>,
    arm_rest: f64,
    leg_rest: f64,
}

impl Actor {
    fn random(rng: &mut Rng, frame_h: usize) -> Actor {
        let w = rng.int_inclusive(11, ACTOR_W_MAX as i64) as usize;
        let h = rng.int_inclusive(28, ACTOR_H_MAX as i64) as usize;
        let y = rng.int_inclusive(2, (frame_h - h - 2) as i64) as usize;
        let color = |rng: &mut Rng| [0; 3].map(|_: i32| rng.uniform(40.0, 220.0));
        let body = color(rng);
        let mut arm = color(rng);
        let mut leg = color(rng);
        // keep limbs visibly different from the body
        for limb in [&mut arm, &mut leg] {
            let diff: f64 = limb.iter().zip(&body).map(|(a, b)| (a - b).abs()).sum();
            if diff < 90.0 {
                limb.iter_mut().for_each(|v| *v = 255.0 - *v);
            }
        }
        let texture = (0..w * h).map(|_| rng.uniform(-12.0, 12.0)).collect();
        Actor {
            w,
            h,
            y,
            body,
            arm,
            leg,
            texture,
            arm_rest: rng.uniform(1.0, 3.0),
            leg_rest: rng.uniform(1.0, 2.0),
        }
    }

    fn upper_h(&self) -> usize {
        self.h / 2
    }

    fn arm_span(&self) -> f64 {
        (self.upper_h() - ARM_H - 1) as f64
    }

    fn leg_span(&self) -> f64 {
        (self.w - LEG_W - 1) as f64
    }

    /// Draws the actor with its left edge at `x`; `arm` and `leg` are limb
    /// offsets inside the box.
    fn draw(&self, frame: &mut FrameImage, x: usize, arm: f64, leg: f64) {
        let arm_top = 1 + (arm.round() as usize).min(self.upper_h() - ARM_H - 1);
        let leg_left = 1 + (leg.round() as usize).min(self.w - LEG_W - 1);
        let leg_top = self.upper_h() + 3;
        for j in 0..self.h {
            for i in 0..self.w {
                let n = self.texture[j * self.w + i];
                let color = if (arm_top..arm_top + ARM_H).contains(&j) && i >= 1 && i + 1 < self.w {
                    self.arm.map(|c| c + 0.5 * n)
                } else if j >= leg_top && (leg_left..leg_left + LEG_W).contains(&i) {
                    self.leg.map(|c| c + 0.5 * n)
                } else {
                    let stripe = if (j / 3) % 2 == 0 { 18.0 } else { -18.0 };
                    self.body.map(|c| c + stripe + n)
                };
                frame.set_pixel(x + i, self.y + j, color.map(quantize));
            }
        }
    }

    fn bbox(&self, x: usize) -> BoundingBox {
        BoundingBox {
            x_min: x as u32,
            y_min: self.y as u32,
            x_max: (x + self.w) as u32,
            y_max: (self.y + self.h) as u32,
        }
    }
}

fn quantize(v: f64) -> f32 {
    v.round().clamp(0.0, 255.0) as f32
}

fn background(cfg: &SynthConfig, rng: &mut Rng) -> FrameImage {
    let base = rng.uniform(90.0, 140.0);
    let tint = [0; 3].map(|_: i32| rng.uniform(-20.0, 20.0));
    let (p1, p2) = (rng.uniform(0.0, 6.3), rng.uniform(0.0, 6.3));
    let mut frame = FrameImage::filled(cfg.width, cfg.height, [0.0; 3]);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let (xf, yf) = (x as f64, y as f64);
            let v = base
                + 25.0 * (0.9 * xf + 0.4 * yf + p1).sin()
                + 15.0 * (0.3 * xf - 1.1 * yf + p2).sin()
                + rng.uniform(-10.0, 10.0);
            frame.set_pixel(x, y, tint.map(|t| quantize(v + t)));
        }
    }
    frame
}

/// Horizontal positions and limb offsets of both actors at every frame.
struct Script {
    left_x: Vec<f64>,
    right_x: Vec<f64>,
    arms: [Vec<f64>; 2],
    legs: [Vec<f64>; 2],
}

fn oscillation(rng: &mut Rng, n: usize, span: f64) -> Vec<f64> {
    let omega = rng.uniform(0.7, 1.1);
    let phase = rng.uniform(0.0, 6.3);
    let center = span / 2.0;
    (0..n)
        .map(|t| center + center * (omega * t as f64 + phase).sin())
        .collect()
}

fn script(label: usize, cfg: &SynthConfig, actors: &[Actor; 2], rng: &mut Rng) -> Script {
    let n = cfg.frames_per_video;
    let w = cfg.width as f64;
    let (lw, rw) = (actors[0].w as f64, actors[1].w as f64);
    let left_max = w - lw - rw - 1.0;
    let mut arms = [vec![actors[0].arm_rest; n], vec![actors[1].arm_rest; n]];
    let mut legs = [vec![actors[0].leg_rest; n], vec![actors[1].leg_rest; n]];
    let mut left_x = vec![0.0; n];
    let mut right_x = vec![0.0; n];

    // standing positions for the scripts without translation
    let stand_l = rng.uniform(4.0, w / 2.0 - lw - 8.0);
    let stand_r = rng.uniform(w / 2.0 + 8.0, w - rw - 4.0);
    match label {
        0 => {
            let v = rng.uniform(0.8, 1.2);
            let (l0, r0) = (rng.uniform(1.0, 6.0), w - rw - rng.uniform(1.0, 6.0));
            for t in 0..n {
                let step = v * t as f64;
                // stop at contact, one pixel apart
                let gap = (r0 - l0 - lw - 1.0) / 2.0;
                let s = step.min(gap.max(0.0));
                left_x[t] = l0 + s;
                right_x[t] = r0 - s;
            }
        }
        1 => {
            let v = rng.uniform(0.8, 1.2);
            let mid = w / 2.0 + rng.uniform(-4.0, 4.0);
            let gap = rng.uniform(1.0, 4.0);
            let l0 = mid - gap / 2.0 - lw;
            let r0 = mid + gap / 2.0;
            for t in 0..n {
                let step = v * t as f64;
                left_x[t] = (l0 - step).max(0.0);
                right_x[t] = (r0 + step).min(w - rw);
            }
        }
        2..=6 => {
            left_x.fill(stand_l);
            right_x.fill(stand_r);
            let moving: &[(usize, bool)] = match label {
                2 => &[(0, true)],
                3 => &[(0, false)],
                4 => &[(1, true)],
                5 => &[(1, false)],
                _ => &[(0, true), (1, true)],
            };
            for &(actor, upper) in moving {
                if upper {
                    arms[actor] = oscillation(rng, n, actors[actor].arm_span());
                } else {
                    legs[actor] = oscillation(rng, n, actors[actor].leg_span());
                }
            }
        }
        _ => {
            // still, then the left actor closes in and shoves the right one
            let start = (n as f64 * rng.uniform(0.3, 0.45)).round();
            let v = rng.uniform(1.8, 2.4);
            let push = rng.uniform(1.2, 1.8);
            let (mut l, mut r) = (stand_l, stand_r);
            for t in 0..n {
                if t as f64 >= start {
                    if r - (l + lw) > 1.0 {
                        l = (l + v).min(r - lw - 1.0);
                    } else {
                        r = (r + push).min(w - rw);
                        l = (l + 0.5 * push).min(r - lw - 1.0);
                    }
                }
                left_x[t] = l;
                right_x[t] = r;
            }
        }
    }
    for t in 0..n {
        left_x[t] = left_x[t].clamp(0.0, left_max);
        right_x[t] = right_x[t].clamp(left_x[t] + lw, w - rw);
    }
    Script {
        left_x,
        right_x,
        arms,
        legs,
    }
}

fn render_video(
    cfg: &SynthConfig,
    id: String,
    label: usize,
    group: u32,
    rng: &mut Rng,
) -> Result<RawVideo> {
    let bg = background(cfg, rng);
    let actors = [
        Actor::random(rng, cfg.height),
        Actor::random(rng, cfg.height),
    ];
    let s = script(label, cfg, &actors, rng);
    let mut frames = Vec::with_capacity(cfg.frames_per_video);
    let mut boxes = Vec::with_capacity(cfg.frames_per_video);
    for t in 0..cfg.frames_per_video {
        let mut frame = bg.clone();
        let xs = [s.left_x[t].round() as usize, s.right_x[t].round() as usize];
        for (a, actor) in actors.iter().enumerate() {
            actor.draw(&mut frame, xs[a], s.arms[a][t], s.legs[a][t]);
        }
        let pair = [actors[0].bbox(xs[0]), actors[1].bbox(xs[1])];
        for b in &pair {
            b.check_within(cfg.width, cfg.height)?;
        }
        frames.push(frame);
        boxes.push(pair);
    }
    Ok(RawVideo {
        id,
        label,
        group,
        frames,
        boxes,
    })
}
