use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, IngestError};

/// Dense binary mask over a full image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.data[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, on: bool) {
        let w = self.width as usize;
        self.data[v as usize * w + u as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Set pixels as `(u, v)`, row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    /// Tight pixel bounds `(u_min, v_min, u_max, v_max)`, inclusive.
    pub fn bounds(&self) -> Option<(u32, u32, u32, u32)> {
        self.pixels().fold(None, |acc, (u, v)| match acc {
            None => Some((u, v, u, v)),
            Some((a, b, c, d)) => Some((a.min(u), b.min(v), c.max(u), d.max(v))),
        })
    }

    /// True when every set pixel lies inside `bbox` grown by `margin` pixels.
    pub fn within_box(&self, bbox: &[f64; 4], margin: f64) -> bool {
        match self.bounds() {
            None => true,
            Some((u0, v0, u1, v1)) => {
                u0 as f64 >= bbox[0] - margin
                    && v0 as f64 >= bbox[1] - margin
                    && (u1 + 1) as f64 <= bbox[2] + margin
                    && (v1 + 1) as f64 <= bbox[3] + margin
            }
        }
    }

    /// COCO uncompressed RLE: column-major run lengths starting with a zero run.
    pub fn to_rle(&self) -> Vec<u32> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for u in 0..w {
            for v in 0..h {
                let b = self.data[v * w + u];
                if b != current {
                    counts.push(run);
                    run = 0;
                    current = b;
                }
                run += 1;
            }
        }
        counts.push(run);
        counts
    }

    pub fn from_rle(width: u32, height: u32, counts: &[u32]) -> Result<Self, String> {
        let (w, h) = (width as usize, height as usize);
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != (w * h) as u64 {
            return Err(format!("RLE covers {total} pixels, image has {}", w * h));
        }
        let mut mask = Self::empty(width, height);
        let mut idx = 0usize;
        let mut on = false;
        for &c in counts {
            if on {
                for k in idx..idx + c as usize {
                    let (u, v) = (k / h, k % h);
                    mask.data[v * w + u] = true;
                }
            }
            idx += c as usize;
            on = !on;
        }
        Ok(mask)
    }
}

/// One 3×3 erosion: a pixel survives iff it and all 8 neighbors are set.
/// Pixels outside the image count as unset.
pub fn erode_mask(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut out = BinaryMask::empty(mask.width, mask.height);
    if w < 3 || h < 3 {
        return out;
    }
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            if !mask.data[v * w + u] {
                continue;
            }
            let keep = (v - 1..=v + 1).all(|y| mask.data[y * w + u - 1..=y * w + u + 1].iter().all(|b| *b));
            out.data[v * w + u] = keep;
        }
    }
    out
}

/// `(frame, camera_id, det_index)`; `det_index` is the detection's position
/// among that camera's detections for the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MaskKey {
    pub frame: u32,
    pub camera_id: u32,
    pub det_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub frame: u32,
    pub camera_id: u32,
    pub det_index: u32,
    /// `[height, width]` as in COCO.
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl MaskRecord {
    pub fn encode(key: MaskKey, mask: &BinaryMask) -> Self {
        Self {
            frame: key.frame,
            camera_id: key.camera_id,
            det_index: key.det_index,
            size: [mask.height, mask.width],
            counts: mask.to_rle(),
        }
    }

    pub fn key(&self) -> MaskKey {
        MaskKey { frame: self.frame, camera_id: self.camera_id, det_index: self.det_index }
    }

    pub fn decode(&self) -> Result<BinaryMask, String> {
        BinaryMask::from_rle(self.size[1], self.size[0], &self.counts)
    }
}

pub fn load_masks(path: &Path) -> Result<BTreeMap<MaskKey, MaskRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MaskRecord = serde_json::from_str(&line).map_err(|e| IngestError::parse(path, idx + 1, e.to_string()))?;
        let total: u64 = rec.counts.iter().map(|&c| c as u64).sum();
        if total != rec.size[0] as u64 * rec.size[1] as u64 {
            return Err(IngestError::parse(path, idx + 1, "RLE length does not match size"));
        }
        if out.insert(rec.key(), rec).is_some() {
            return Err(IngestError::parse(path, idx + 1, "duplicate mask key"));
        }
    }
    Ok(out)
}

pub fn write_masks<'a>(path: &Path, masks: impl IntoIterator<Item = &'a MaskRecord>) -> Result<(), IngestError> {
    let mut w = create(path)?;
    for m in masks {
        serde_json::to_writer(&mut w, m).map_err(|e| IngestError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}
