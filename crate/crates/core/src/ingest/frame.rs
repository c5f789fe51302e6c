use std::collections::BTreeMap;

use super::{BinaryMask, DepthMap, Detection2D, MaskKey};

/// Every input the tracker consumes for one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameInput {
    pub frame: u32,
    /// Per camera, in detection-index order.
    pub detections: BTreeMap<u32, Vec<Detection2D>>,
    pub masks: BTreeMap<MaskKey, BinaryMask>,
    pub depths: BTreeMap<u32, DepthMap>,
}

impl FrameInput {
    pub fn empty(frame: u32) -> Self {
        Self { frame, ..Default::default() }
    }

    pub fn detection_count(&self) -> usize {
        self.detections.values().map(Vec::len).sum()
    }

    pub fn mask(&self, camera_id: u32, det_index: usize) -> Option<&BinaryMask> {
        self.masks.get(&MaskKey { frame: self.frame, camera_id, det_index: det_index as u32 })
    }
}
