use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, IngestError};

/// CrowdPose keypoint count.
pub const KEYPOINT_COUNT: usize = 14;

/// Embeddings within this distance of unit norm are renormalized; further away they are rejected.
const RENORM_LIMIT: f64 = 1e-3;
/// Norm deviation below which an embedding is kept bit-for-bit.
const UNIT_EXACT: f64 = 1e-12;

/// One per-camera 2D observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub camera_id: u32,
    pub frame: u32,
    /// `(x1, y1, x2, y2)` in pixels.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
    pub class_id: u32,
    pub embedding: Vec<f64>,
    /// `(u, v, confidence)` triples in CrowdPose order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<[f64; 3]>>,
    /// Precomputed single-camera track id, used when the internal tracker is bypassed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_track_id: Option<u64>,
}

impl Detection2D {
    pub fn width(&self) -> f64 {
        self.bbox[2] - self.bbox[0]
    }

    pub fn height(&self) -> f64 {
        self.bbox[3] - self.bbox[1]
    }

    /// Clamp the box to a `width × height` image.
    pub fn clamp_to_image(&mut self, width: u32, height: u32) {
        let (w, h) = (width as f64, height as f64);
        self.bbox[0] = self.bbox[0].clamp(0.0, w);
        self.bbox[2] = self.bbox[2].clamp(0.0, w);
        self.bbox[1] = self.bbox[1].clamp(0.0, h);
        self.bbox[3] = self.bbox[3].clamp(0.0, h);
    }

    /// Check invariants, renormalizing a nearly-unit embedding in place.
    pub fn validate(&mut self) -> Result<(), String> {
        let finite = self.bbox.iter().all(|v| v.is_finite())
            && self.score.is_finite()
            && self.embedding.iter().all(|v| v.is_finite())
            && self.keypoints.iter().flatten().flatten().all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value".into());
        }
        let [x1, y1, x2, y2] = self.bbox;
        if !(x1 < x2 && y1 < y2) {
            return Err(format!("degenerate box {:?}", self.bbox));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("score {} outside [0, 1]", self.score));
        }
        if let Some(kps) = &self.keypoints {
            if kps.len() != KEYPOINT_COUNT {
                return Err(format!("expected {KEYPOINT_COUNT} keypoints, got {}", kps.len()));
            }
        }
        if self.embedding.is_empty() {
            return Err("empty embedding".into());
        }
        let norm = self.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dev = (norm - 1.0).abs();
        if dev >= RENORM_LIMIT {
            return Err(format!("embedding norm {norm} deviates from 1 by {dev}"));
        }
        if dev > UNIT_EXACT {
            self.embedding.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(())
    }
}

/// All detections of one frame, keyed by camera in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameDetections {
    pub frame: u32,
    pub cameras: BTreeMap<u32, Vec<Detection2D>>,
}

impl FrameDetections {
    pub fn len(&self) -> usize {
        self.cameras.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection2D> {
        self.cameras.values().flatten()
    }
}

/// Group detections by `(frame, camera)`, keeping their relative order.
pub fn group_detections(dets: impl IntoIterator<Item = Detection2D>) -> Vec<FrameDetections> {
    let mut frames: BTreeMap<u32, FrameDetections> = BTreeMap::new();
    for d in dets {
        frames
            .entry(d.frame)
            .or_insert_with(|| FrameDetections { frame: d.frame, ..Default::default() })
            .cameras
            .entry(d.camera_id)
            .or_default()
            .push(d);
    }
    frames.into_values().collect()
}

/// Read a JSON-lines detection file. Blank lines are ignored.
pub fn load_detections(path: &Path) -> Result<Vec<FrameDetections>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut dets = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut det: Detection2D =
            serde_json::from_str(&line).map_err(|e| IngestError::parse(path, line_no, e.to_string()))?;
        det.validate().map_err(|m| IngestError::parse(path, line_no, m))?;
        match dim {
            None => dim = Some(det.embedding.len()),
            Some(d) if d != det.embedding.len() => {
                return Err(IngestError::parse(
                    path,
                    line_no,
                    format!("embedding dimension {} differs from {d}", det.embedding.len()),
                ))
            }
            _ => {}
        }
        dets.push(det);
    }
    Ok(group_detections(dets))
}

pub fn write_detections<'a>(path: &Path, dets: impl IntoIterator<Item = &'a Detection2D>) -> Result<(), IngestError> {
    let mut w = create(path)?;
    for d in dets {
        serde_json::to_writer(&mut w, d).map_err(|e| IngestError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}
