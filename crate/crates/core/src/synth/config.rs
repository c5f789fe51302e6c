use serde::{Deserialize, Serialize};

/// Everything that defines a synthetic scene. The seed fixes all randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub frames: u32,
    pub fps: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Focal length in pixels, shared by both axes.
    pub focal_px: f64,
    pub cameras: CameraRig,
    pub classes: Vec<ClassSpec>,
    pub layout: Layout,
    /// Targets with hand-placed waypoints, added after the generated ones.
    pub targets: Vec<TargetSpec>,
    pub noise: NoiseConfig,
    pub embedding_dim: usize,
    /// Fewer visible pixels than this and a target is not detected.
    pub min_visible_pixels: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 300,
            fps: 10.0,
            image_width: 480,
            image_height: 270,
            focal_px: 380.0,
            cameras: CameraRig::default(),
            classes: vec![
                ClassSpec::new(0, "person", true, [0.5, 0.5, 1.75], 2, 1.0),
                ClassSpec::new(1, "forklift", false, [2.2, 1.2, 2.0], 2, 1.2),
                ClassSpec::new(2, "nova_carter", false, [0.7, 0.5, 0.5], 2, 1.0),
            ],
            layout: Layout::default(),
            targets: Vec::new(),
            noise: NoiseConfig::default(),
            embedding_dim: 64,
            min_visible_pixels: 25,
        }
    }
}

/// Cameras on a horizontal ring, all looking at the same point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraRig {
    pub count: u32,
    pub radius: f64,
    pub height: f64,
    pub look_at: [f64; 3],
    /// Azimuth of the first camera, degrees.
    pub azimuth_offset_deg: f64,
    /// Explicit poses; when non-empty these replace the ring.
    pub poses: Vec<CameraPose>,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self { count: 4, radius: 14.0, height: 6.0, look_at: [0.0, 0.0, 0.0], azimuth_offset_deg: 45.0, poses: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class_id: u32,
    pub name: String,
    #[serde(default)]
    pub pedestrian: bool,
    /// `(length, width, height)`, meters.
    pub dims: [f64; 3],
    /// Number of generated targets of this class.
    #[serde(default)]
    pub count: u32,
    /// Meters per second.
    pub speed: f64,
}

impl ClassSpec {
    pub fn new(class_id: u32, name: &str, pedestrian: bool, dims: [f64; 3], count: u32, speed: f64) -> Self {
        Self { class_id, name: name.into(), pedestrian, dims, count, speed }
    }
}

/// Generated targets each move inside their own square cell of a grid
/// centered on the origin, so trajectories never intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Layout {
    pub cell_size: f64,
    /// Waypoints per target; the path visits them in a loop. Two gives back-and-forth motion.
    pub waypoints: u32,
    /// Minimum distance between consecutive waypoints as a fraction of the usable cell side.
    pub min_leg_fraction: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self { cell_size: 5.0, waypoints: 2, min_leg_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub class_id: u32,
    pub waypoints: Vec<[f64; 2]>,
    /// Overrides the class speed.
    #[serde(default)]
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Probability a visible target is not detected in a camera.
    pub miss_rate: f64,
    /// Standard deviation of the box corner jitter, pixels.
    pub box_jitter_px: f64,
    /// Standard deviation of the per-detection embedding perturbation, relative to the unit identity vector.
    pub embedding_noise: f64,
    /// Cosine similarity between the identity vectors of two different targets.
    pub identity_similarity: f64,
    /// Per-frame probability that a camera's local id for a target changes.
    pub id_switch_rate: f64,
    /// Per-frame probability that a camera emits one spurious detection.
    pub false_positive_rate: f64,
    pub occlusions: Vec<Occlusion>,
    pub score: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            miss_rate: 0.0,
            box_jitter_px: 0.0,
            embedding_noise: 0.0,
            identity_similarity: 0.2,
            id_switch_rate: 0.0,
            false_positive_rate: 0.0,
            occlusions: Vec::new(),
            score: 0.9,
        }
    }
}

/// Target `target` is undetected in `cameras` (all when empty) for frames `start..=end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    pub target: usize,
    pub start: u32,
    pub end: u32,
    #[serde(default)]
    pub cameras: Vec<u32>,
}

impl ScenarioConfig {
    pub fn target_count(&self) -> usize {
        self.classes.iter().map(|c| c.count as usize).sum::<usize>() + self.targets.len()
    }

    pub fn camera_count(&self) -> usize {
        if self.cameras.poses.is_empty() {
            self.cameras.count as usize
        } else {
            self.cameras.poses.len()
        }
    }

    pub fn class(&self, class_id: u32) -> Option<&ClassSpec> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = &self.noise;
        for (name, v) in [
            ("miss_rate", n.miss_rate),
            ("id_switch_rate", n.id_switch_rate),
            ("false_positive_rate", n.false_positive_rate),
            ("score", n.score),
            ("identity_similarity", n.identity_similarity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("noise.{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(n.box_jitter_px >= 0.0 && n.embedding_noise >= 0.0) {
            return Err("noise magnitudes must be non-negative".into());
        }
        if self.camera_count() == 0 {
            return Err("at least one camera is required".into());
        }
        if self.image_width < 2 || self.image_height < 2 || !(self.focal_px > 0.0) || !(self.fps > 0.0) {
            return Err("image size, focal length and fps must be positive".into());
        }
        if self.classes.is_empty() {
            return Err("at least one class is required".into());
        }
        for c in &self.classes {
            if !c.dims.iter().all(|d| *d > 0.0) || !(c.speed >= 0.0) {
                return Err(format!("class {}: dims must be positive and speed non-negative", c.class_id));
            }
            if self.classes.iter().filter(|o| o.class_id == c.class_id).count() > 1 {
                return Err(format!("class {} listed twice", c.class_id));
            }
        }
        for t in &self.targets {
            if self.class(t.class_id).is_none() {
                return Err(format!("target uses unknown class {}", t.class_id));
            }
            if t.waypoints.is_empty() {
                return Err("explicit targets need at least one waypoint".into());
            }
        }
        for o in &self.noise.occlusions {
            if o.target >= self.target_count() || o.start > o.end {
                return Err(format!("bad occlusion {o:?}"));
            }
        }
        if self.layout.waypoints < 2 || !(self.layout.cell_size > 0.0) {
            return Err("layout needs a positive cell size and at least two waypoints".into());
        }
        if self.embedding_dim < self.target_count() + 2 {
            return Err(format!("embedding_dim must be at least {}", self.target_count() + 2));
        }
        Ok(())
    }
}
