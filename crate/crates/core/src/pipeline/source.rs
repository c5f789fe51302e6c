use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use crate::geometry::Calibration;
use crate::ingest::{
    load_calibrations, load_class_stats, load_detections, load_masks, read_depth, ClassStats, FrameDetections, FrameInput,
    IngestError, MaskKey, MaskRecord, SceneLayout,
};
use crate::synth::SyntheticScene;

/// Frames delivered strictly in order; `load` never sees a later frame before an earlier one.
pub trait FrameSource {
    fn calibrations(&self) -> &[Calibration<f64>];
    fn class_stats(&self) -> &ClassStats;
    /// Frame numbers to process, in order.
    fn frames(&self) -> Range<u32>;
    /// Inputs for `frame`. Masks and depth are only needed when `pixels` is set.
    fn load(&mut self, frame: u32, pixels: bool) -> Result<FrameInput, IngestError>;
}

/// A scene directory on disk. Detections and mask run-lengths are indexed up
/// front; masks are decoded and depth maps read one frame at a time.
pub struct SceneDir {
    layout: SceneLayout,
    calibrations: Vec<Calibration<f64>>,
    class_stats: ClassStats,
    detections: BTreeMap<u32, FrameDetections>,
    masks: BTreeMap<MaskKey, MaskRecord>,
}

impl SceneDir {
    pub fn open(root: &Path, pixels: bool) -> Result<Self, IngestError> {
        let layout = SceneLayout::new(root);
        let calibrations = load_calibrations(&layout.calibration())?;
        let class_stats = load_class_stats(&layout.class_stats())?;
        let detections: BTreeMap<u32, FrameDetections> =
            load_detections(&layout.detections())?.into_iter().map(|f| (f.frame, f)).collect();
        for fd in detections.values() {
            for &cam in fd.cameras.keys() {
                if !calibrations.iter().any(|c| c.camera_id == cam) {
                    return Err(IngestError::Validation {
                        path: layout.detections(),
                        message: format!("frame {}: camera {cam} has no calibration", fd.frame),
                    });
                }
            }
        }
        let masks = if pixels && layout.masks().exists() {
            load_masks(&layout.masks())?
        } else {
            if pixels {
                log::warn!("{} is missing; every 3D box will fall back to class means", layout.masks().display());
            }
            BTreeMap::new()
        };
        Ok(Self { layout, calibrations, class_stats, detections, masks })
    }
}

impl FrameSource for SceneDir {
    fn calibrations(&self) -> &[Calibration<f64>] {
        &self.calibrations
    }

    fn class_stats(&self) -> &ClassStats {
        &self.class_stats
    }

    fn frames(&self) -> Range<u32> {
        self.detections.keys().next_back().map_or(0..0, |&last| 0..last + 1)
    }

    fn load(&mut self, frame: u32, pixels: bool) -> Result<FrameInput, IngestError> {
        let mut input = FrameInput::empty(frame);
        if let Some(fd) = self.detections.get(&frame) {
            input.detections = fd.cameras.clone();
        }
        if !pixels {
            return Ok(input);
        }
        let lo = MaskKey { frame, camera_id: 0, det_index: 0 };
        let hi = MaskKey { frame, camera_id: u32::MAX, det_index: u32::MAX };
        for (key, rec) in self.masks.range(lo..=hi) {
            let mask = rec.decode().map_err(|m| IngestError::Validation { path: self.layout.masks(), message: m })?;
            let det = input.detections.get(&key.camera_id).and_then(|d| d.get(key.det_index as usize));
            match det {
                Some(d) if mask.within_box(&d.bbox, 2.0) => {
                    input.masks.insert(*key, mask);
                }
                Some(_) => {
                    return Err(IngestError::Validation {
                        path: self.layout.masks(),
                        message: format!("mask {key:?} extends beyond its detection box"),
                    })
                }
                None => {
                    return Err(IngestError::Validation {
                        path: self.layout.masks(),
                        message: format!("mask {key:?} has no detection"),
                    })
                }
            }
        }
        for calib in &self.calibrations {
            if !input.detections.contains_key(&calib.camera_id) {
                continue;
            }
            let path = self.layout.depth(calib.camera_id, frame);
            match read_depth(&path, calib.camera_id, frame) {
                Ok(d) => {
                    input.depths.insert(calib.camera_id, d);
                }
                Err(IngestError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(input)
    }
}

/// Frames rendered on demand from a synthetic scene.
pub struct SyntheticSource {
    pub scene: SyntheticScene,
}

impl FrameSource for SyntheticSource {
    fn calibrations(&self) -> &[Calibration<f64>] {
        &self.scene.calibrations
    }

    fn class_stats(&self) -> &ClassStats {
        &self.scene.class_stats
    }

    fn frames(&self) -> Range<u32> {
        0..self.scene.config.frames
    }

    fn load(&mut self, frame: u32, _pixels: bool) -> Result<FrameInput, IngestError> {
        Ok(self.scene.frame(frame).input)
    }
}

/// Prepared frames held in memory.
pub struct MemorySource {
    pub calibrations: Vec<Calibration<f64>>,
    pub class_stats: ClassStats,
    pub frames: BTreeMap<u32, FrameInput>,
}

impl FrameSource for MemorySource {
    fn calibrations(&self) -> &[Calibration<f64>] {
        &self.calibrations
    }

    fn class_stats(&self) -> &ClassStats {
        &self.class_stats
    }

    fn frames(&self) -> Range<u32> {
        self.frames.keys().next_back().map_or(0..0, |&last| 0..last + 1)
    }

    fn load(&mut self, frame: u32, _pixels: bool) -> Result<FrameInput, IngestError> {
        Ok(self.frames.get(&frame).cloned().unwrap_or_else(|| FrameInput::empty(frame)))
    }
}
