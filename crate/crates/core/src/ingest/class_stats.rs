use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, read_to_string, IngestError};

/// Per-class size statistics and association thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub class_id: u32,
    #[serde(default)]
    pub name: String,
    /// Pedestrians cluster on appearance; every other class on top-down distance.
    #[serde(default)]
    pub pedestrian: bool,
    pub mean_length: f64,
    pub mean_width: f64,
    pub mean_height: f64,
    /// Mean volume of the class; stored independently of the mean dimensions.
    pub mean_volume: f64,
    /// DBSCAN neighborhood radius, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Maximum top-down distance for cross-camera association, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_gate: Option<f64>,
    /// Agglomerative clustering cut (cosine distance for pedestrians, meters otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_cut: Option<f64>,
}

pub const DEFAULT_SPATIAL_GATE: f64 = 3.0;
pub const DEFAULT_PEDESTRIAN_CUT: f64 = 0.35;
pub const DEFAULT_VEHICLE_CUT: f64 = 1.5;

impl ClassInfo {
    pub fn mean_dims(&self) -> [f64; 3] {
        [self.mean_length, self.mean_width, self.mean_height]
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.mean_dims().iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Explicit epsilon, else one inversely proportional to the class size:
    /// smaller classes produce sparser clouds and get a wider radius.
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| (0.75 / self.mean_diagonal()).clamp(0.05, 0.5))
    }

    /// Diagonal of the mean ground footprint.
    pub fn footprint_diagonal(&self) -> f64 {
        self.mean_length.hypot(self.mean_width)
    }

    /// Explicit gate, else one wide enough for box-bottom foot points of
    /// large classes, which move with the viewing direction.
    pub fn spatial_gate(&self) -> f64 {
        self.spatial_gate.unwrap_or_else(|| DEFAULT_SPATIAL_GATE.max(1.5 * self.footprint_diagonal()))
    }

    /// Explicit cut, else the pedestrian cosine cut or, for other classes, a
    /// distance cut of at least the footprint diagonal.
    pub fn cluster_cut(&self) -> f64 {
        self.cluster_cut.unwrap_or_else(|| {
            if self.pedestrian {
                DEFAULT_PEDESTRIAN_CUT
            } else {
                DEFAULT_VEHICLE_CUT.max(self.footprint_diagonal())
            }
        })
    }

    fn validate(&self) -> Result<(), String> {
        let mut values = vec![self.mean_length, self.mean_width, self.mean_height, self.mean_volume];
        values.extend(self.epsilon);
        values.extend(self.spatial_gate);
        values.extend(self.cluster_cut);
        if values.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(format!("class {}: all statistics must be positive and finite", self.class_id))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassStats {
    pub classes: BTreeMap<u32, ClassInfo>,
}

#[derive(Serialize, Deserialize)]
struct ClassStatsFile {
    classes: Vec<ClassInfo>,
}

impl ClassStats {
    pub fn new(classes: impl IntoIterator<Item = ClassInfo>) -> Self {
        Self { classes: classes.into_iter().map(|c| (c.class_id, c)).collect() }
    }

    pub fn get(&self, class_id: u32) -> Option<&ClassInfo> {
        self.classes.get(&class_id)
    }

    pub fn is_pedestrian(&self, class_id: u32) -> bool {
        self.get(class_id).is_some_and(|c| c.pedestrian)
    }
}

pub fn load_class_stats(path: &Path) -> Result<ClassStats, IngestError> {
    let text = read_to_string(path)?;
    let file: ClassStatsFile = serde_json::from_str(&text).map_err(|e| IngestError::parse(path, e.line(), e.to_string()))?;
    let mut stats = ClassStats::default();
    for c in file.classes {
        c.validate().map_err(|m| IngestError::invalid(path, m))?;
        let id = c.class_id;
        if stats.classes.insert(id, c).is_some() {
            return Err(IngestError::invalid(path, format!("duplicate class_id {id}")));
        }
    }
    Ok(stats)
}

pub fn write_class_stats(path: &Path, stats: &ClassStats) -> Result<(), IngestError> {
    let file = ClassStatsFile { classes: stats.classes.values().cloned().collect() };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(|e| IngestError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| IngestError::io(path, e))
}
