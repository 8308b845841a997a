use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ContextSequence, FeatureVector};
use crate::error::{Error, Result};

/// Featurized video: one context sequence per frame, and per flow image
/// (flow between consecutive frames) a context sequence plus the flow
/// feature consumed by the temporal model.
///
/// `label` is zero-based in memory and one-based in files.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub label: usize,
    pub group: u32,
    pub frame_contexts: Vec<ContextSequence>,
    pub flow_feats: Vec<FeatureVector>,
    pub flow_contexts: Vec<ContextSequence>,
}

impl VideoRecord {
    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frame_contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_contexts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frame_contexts.first().map_or(0, ContextSequence::dim)
    }

    /// Checks stream lengths (flow streams hold one entry fewer than the
    /// frame stream) and that every feature has dimension `dim`.
    pub fn validate(&self, dim: usize) -> std::result::Result<(), String> {
        let n = self.len();
        if n < 2 {
            return Err(format!(
                "video {:?} has {n} frames; at least 2 are required",
                self.id
            ));
        }
        if self.flow_feats.len() != n - 1 || self.flow_contexts.len() != n - 1 {
            return Err(format!(
                "video {:?}: {n} frames need {} flow entries, got flow_feats={} flow_context_seq={}",
                self.id,
                n - 1,
                self.flow_feats.len(),
                self.flow_contexts.len()
            ));
        }
        let bad_seq = self
            .frame_contexts
            .iter()
            .chain(&self.flow_contexts)
            .map(ContextSequence::dim)
            .chain(self.flow_feats.iter().map(FeatureVector::dim))
            .find(|&d| d != dim);
        if let Some(d) = bad_seq {
            return Err(format!(
                "video {:?}: feature dimension {d} differs from dataset dimension {dim}",
                self.id
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    label: usize,
    group: u32,
    context_seq: Vec<ContextSequence>,
    flow_feats: Vec<FeatureVector>,
    flow_context_seq: Vec<ContextSequence>,
}

/// Writes one JSON object per line. Floats are written in shortest
/// round-trip form, so reading the file back is bit-exact.
pub fn write_feature_file(path: &Path, videos: &[VideoRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in videos {
        let line = RecordLine {
            id: v.id.clone(),
            label: v.label + 1,
            group: v.group,
            context_seq: v.frame_contexts.clone(),
            flow_feats: v.flow_feats.clone(),
            flow_context_seq: v.flow_contexts.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature file. Blank lines are skipped; an empty file yields an
/// empty dataset. Errors carry the zero-based record index.
pub fn load_feature_file(path: &Path) -> Result<Vec<VideoRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut videos: Vec<VideoRecord> = Vec::new();
    let mut dim = None;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = videos.len();
        let schema = |message: String| Error::Schema { record, message };
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if parsed.label == 0 {
            return Err(schema("label must be >= 1".into()));
        }
        let video = VideoRecord {
            id: parsed.id,
            label: parsed.label - 1,
            group: parsed.group,
            frame_contexts: parsed.context_seq,
            flow_feats: parsed.flow_feats,
            flow_contexts: parsed.flow_context_seq,
        };
        let d = *dim.get_or_insert(video.dim());
        video.validate(d).map_err(schema)?;
        if videos.iter().any(|v| v.id == video.id) {
            return Err(schema(format!("duplicate video id {:?}", video.id)));
        }
        videos.push(video);
    }
    Ok(videos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn seq(rng: &mut Rng, dim: usize) -> ContextSequence {
        let regions = (0..7)
            .map(|_| {
                FeatureVector::new((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
            })
            .collect();
        ContextSequence::new(regions).unwrap()
    }

    fn video(rng: &mut Rng, id: &str, frames: usize, dim: usize) -> VideoRecord {
        VideoRecord {
            id: id.into(),
            label: rng.below(3),
            group: rng.below(4) as u32,
            frame_contexts: (0..frames).map(|_| seq(rng, dim)).collect(),
            flow_feats: (1..frames)
                .map(|_| {
                    FeatureVector::new((0..dim).map(|_| rng.uniform(0.0, 1.0)).collect()).unwrap()
                })
                .collect(),
            flow_contexts: (1..frames).map(|_| seq(rng, dim)).collect(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = Rng::new(11);
        let videos: Vec<_> = (0..3)
            .map(|i| video(&mut rng, &format!("v{i}"), 4 + i, 5))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        write_feature_file(&path, &videos).unwrap();
        assert_eq!(load_feature_file(&path).unwrap(), videos);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_feature_file(&path).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch_names_record() {
        let mut rng = Rng::new(3);
        let videos = vec![video(&mut rng, "a", 3, 4), video(&mut rng, "b", 3, 6)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        write_feature_file(&path, &videos).unwrap();
        match load_feature_file(&path) {
            Err(Error::Schema { record, message }) => {
                assert_eq!(record, 1);
                assert!(message.contains("\"b\""), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_and_inconsistent_records_rejected() {
        let mut rng = Rng::new(4);
        let mut v = video(&mut rng, "a", 3, 2);
        v.flow_feats.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        write_feature_file(&path, &[v]).unwrap();
        assert!(matches!(
            load_feature_file(&path),
            Err(Error::Schema { record: 0, .. })
        ));

        std::fs::write(&path, "{\"id\": \"x\"}\n").unwrap();
        assert!(matches!(
            load_feature_file(&path),
            Err(Error::Schema { record: 0, .. })
        ));
    }
}
