//! On-disk raw videos: `meta.json` plus one PNG per frame under
//! `<dataset>/<video id>/frame_NNN.png`.

use std::fs;
use std::path::Path;

use image::RgbImage;
use ipred_core::context::{BoundingBox, FrameImage};
use ipred_core::eval::RawVideo;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub num_classes: usize,
    pub width: usize,
    pub height: usize,
    pub videos: Vec<VideoMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMeta {
    pub id: String,
    /// One-based class.
    pub label: usize,
    pub group: u32,
    /// `[left, right]` boxes per frame, each `[x_min, y_min, x_max, y_max]`.
    pub boxes: Vec<[BoundingBox; 2]>,
}

fn frame_path(dir: &Path, id: &str, t: usize) -> std::path::PathBuf {
    dir.join(id).join(format!("frame_{t:03}.png"))
}

pub fn write_dataset(dir: &Path, videos: &[RawVideo], num_classes: usize) -> CliResult<()> {
    let (width, height) = videos
        .first()
        .and_then(|v| v.frames.first())
        .map_or((0, 0), |f| (f.width(), f.height()));
    for v in videos {
        let vdir = dir.join(&v.id);
        fs::create_dir_all(&vdir).map_err(|e| io_err(&vdir, e))?;
        for (t, frame) in v.frames.iter().enumerate() {
            let bytes: Vec<u8> = frame
                .data()
                .iter()
                .map(|&p| p.round().clamp(0.0, 255.0) as u8)
                .collect();
            let img = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, bytes)
                .expect("buffer matches frame size");
            let path = frame_path(dir, &v.id, t);
            img.save(&path)
                .map_err(|source| CliError::Image { path, source })?;
        }
    }
    let meta = DatasetMeta {
        num_classes,
        width,
        height,
        videos: videos
            .iter()
            .map(|v| VideoMeta {
                id: v.id.clone(),
                label: v.label + 1,
                group: v.group,
                boxes: v.boxes.clone(),
            })
            .collect(),
    };
    let path = dir.join("meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| io_err(&path, e))
}

pub fn read_dataset(dir: &Path) -> CliResult<(Vec<RawVideo>, usize)> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text)?;
    let mut videos = Vec::with_capacity(meta.videos.len());
    for v in meta.videos {
        if v.label == 0 || v.label > meta.num_classes {
            return Err(CliError::Config(format!(
                "video {:?}: label {} outside 1..={}",
                v.id, v.label, meta.num_classes
            )));
        }
        let mut frames = Vec::with_capacity(v.boxes.len());
        for t in 0..v.boxes.len() {
            let path = frame_path(dir, &v.id, t);
            let img = image::open(&path)
                .map_err(|source| CliError::Image {
                    path: path.clone(),
                    source,
                })?
                .to_rgb8();
            let (w, h) = img.dimensions();
            let data = img.into_raw().into_iter().map(f32::from).collect();
            frames.push(FrameImage::new(w as usize, h as usize, data)?);
        }
        videos.push(RawVideo {
            id: v.id,
            label: v.label - 1,
            group: v.group,
            frames,
            boxes: v.boxes,
        });
    }
    Ok((videos, meta.num_classes))
}
