//! Loading, validation and writing of every on-disk format used by the
//! pipeline: calibration, detections, depth maps, instance masks, class
//! statistics and result files.

mod calibration;
mod class_stats;
mod depth;
mod detections;
mod frame;
mod mask;
mod results;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use calibration::{load_calibrations, write_calibrations, CalibrationRecord};
pub use class_stats::{load_class_stats, write_class_stats, ClassInfo, ClassStats};
pub use depth::{read_depth, write_depth, DepthMap, DEPTH_MAGIC};
pub use detections::{group_detections, load_detections, write_detections, Detection2D, FrameDetections, KEYPOINT_COUNT};
pub use frame::FrameInput;
pub use mask::{erode_mask, load_masks, write_masks, BinaryMask, MaskKey, MaskRecord};
pub use results::{
    load_results, load_results_2d, write_results, write_results_2d, Result2DRecord, ResultRecord, ResultWriter,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: validation failed: {message}")]
    Validation { path: PathBuf, message: String },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), line, message: message.into() }
    }

    pub(crate) fn invalid(path: &Path, message: impl Into<String>) -> Self {
        Self::Validation { path: path.to_path_buf(), message: message.into() }
    }
}

/// File names inside a scene directory.
#[derive(Debug, Clone)]
pub struct SceneLayout {
    pub root: PathBuf,
}

impl SceneLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn calibration(&self) -> PathBuf {
        self.root.join("calibration.json")
    }

    pub fn detections(&self) -> PathBuf {
        self.root.join("detections.jsonl")
    }

    pub fn masks(&self) -> PathBuf {
        self.root.join("masks.jsonl")
    }

    pub fn class_stats(&self) -> PathBuf {
        self.root.join("class_stats.json")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("gt.txt")
    }

    pub fn scenario(&self) -> PathBuf {
        self.root.join("scenario.json")
    }

    pub fn depth_dir(&self) -> PathBuf {
        self.root.join("depth")
    }

    pub fn depth(&self, camera_id: u32, frame: u32) -> PathBuf {
        self.depth_dir().join(format!("c{camera_id:03}_f{frame:06}.dpth"))
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, IngestError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| IngestError::io(parent, e))?;
        }
    }
    std::fs::File::create(path).map(std::io::BufWriter::new).map_err(|e| IngestError::io(path, e))
}
