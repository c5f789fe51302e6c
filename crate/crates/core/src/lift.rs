//! Masked depth pixels to a world point cloud, density clustering, and box fitting.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::Box3;
use crate::geometry::{backproject_pixel, camera_to_world, Calibration};
use crate::ingest::{BinaryMask, ClassInfo, DepthMap, Detection2D};

#[derive(Debug, Error, PartialEq)]
pub enum LiftError {
    #[error("no usable depth pixels for target {global_id}")]
    EmptyCloud { global_id: u64 },
    #[error("every point of target {global_id} is noise")]
    NoCluster { global_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub position: [f64; 3],
    pub camera_id: u32,
}

/// World-frame points of one globally identified target at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCloud {
    pub points: Vec<CloudPoint>,
    /// Mean 2D detection score over the contributing cameras.
    pub score: f64,
    pub class_id: u32,
    pub global_id: u64,
}

impl TargetCloud {
    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.points.iter().map(|p| Point3::from(p.position)).collect()
    }

    /// Number of distinct cameras that contributed points.
    pub fn camera_count(&self) -> usize {
        let mut ids: Vec<u32> = self.points.iter().map(|p| p.camera_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Everything needed to lift one detection.
#[derive(Debug, Clone, Copy)]
pub struct LiftView<'a> {
    pub calibration: &'a Calibration<f64>,
    pub detection: &'a Detection2D,
    pub mask: &'a BinaryMask,
    pub depth: &'a DepthMap,
}

/// Backproject every set mask pixel with a depth sample and move it to world
/// coordinates. Pixel `(u, v)` is sampled at its integer coordinates, matching
/// the convention the depth maps are rendered with. `stride > 1` keeps every
/// `stride`-th pixel along each image axis.
pub fn lift_target(views: &[LiftView<'_>], class_id: u32, global_id: u64, stride: u32) -> Result<TargetCloud, LiftError> {
    let stride = stride.max(1);
    let mut points = Vec::new();
    for view in views {
        let calib = view.calibration;
        for (u, v) in view.mask.pixels() {
            if u % stride != 0 || v % stride != 0 {
                continue;
            }
            let Some(z) = view.depth.get(u, v) else { continue };
            let Ok(cam) = backproject_pixel(u as f64, v as f64, z as f64, calib) else { continue };
            let w = camera_to_world(&cam, calib);
            points.push(CloudPoint { position: [w.x, w.y, w.z], camera_id: calib.camera_id });
        }
    }
    if points.is_empty() {
        return Err(LiftError::EmptyCloud { global_id });
    }
    let score = views.iter().map(|v| v.detection.score).sum::<f64>() / views.len() as f64;
    Ok(TargetCloud { points, score, class_id, global_id })
}

pub const NOISE: i32 = -1;

/// Points bucketed into cubic cells of side `eps / √3`, so any two points
/// sharing a cell are neighbors. Points are stored cell by cell.
struct Grid {
    eps2: f64,
    /// Positions in cell order.
    coords: Vec<[f64; 3]>,
    /// Original index of each stored point.
    order: Vec<usize>,
    /// Stored range of each cell.
    ranges: Vec<(usize, usize)>,
    /// Cells that can hold a neighbor of a point in each cell, itself included.
    adjacent: Vec<Vec<usize>>,
    /// Cell of each stored point.
    cell_of: Vec<usize>,
}

impl Grid {
    fn new(points: &[Point3<f64>], eps: f64) -> Self {
        let side = eps / 3f64.sqrt();
        let key = |p: &Point3<f64>| ((p.x / side).floor() as i64, (p.y / side).floor() as i64, (p.z / side).floor() as i64);
        let mut keyed: Vec<((i64, i64, i64), usize)> = points.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
        keyed.sort_unstable();
        let mut ranges = Vec::new();
        let mut keys = Vec::new();
        let mut cell_of = Vec::with_capacity(points.len());
        for (pos, (k, _)) in keyed.iter().enumerate() {
            if keys.last() != Some(k) {
                keys.push(*k);
                ranges.push((pos, pos));
            }
            ranges.last_mut().expect("pushed above").1 = pos + 1;
            cell_of.push(keys.len() - 1);
        }
        // Offsets whose closest approach stays within eps: per axis the gap is (|d| - 1) cells.
        // Keys are sorted, so each (dx, dy) column is one contiguous run of cells.
        let gap = |d: i64| (d.abs() - 1).max(0) as f64;
        let mut columns = Vec::new();
        for dx in -2i64..=2 {
            for dy in -2i64..=2 {
                let dz: Vec<i64> = (-2i64..=2)
                    .filter(|&dz| (gap(dx).powi(2) + gap(dy).powi(2) + gap(dz).powi(2)) * side * side <= eps * eps)
                    .collect();
                if let (Some(&lo), Some(&hi)) = (dz.first(), dz.last()) {
                    columns.push((dx, dy, lo, hi));
                }
            }
        }
        let adjacent = keys
            .iter()
            .map(|&(x, y, z)| {
                let mut out = Vec::new();
                for &(dx, dy, lo, hi) in &columns {
                    let start = keys.partition_point(|k| *k < (x + dx, y + dy, z + lo));
                    out.extend((start..keys.len()).take_while(|&c| keys[c] <= (x + dx, y + dy, z + hi)));
                }
                out
            })
            .collect();
        Self {
            eps2: eps * eps,
            coords: keyed.iter().map(|&(_, i)| [points[i].x, points[i].y, points[i].z]).collect(),
            order: keyed.iter().map(|&(_, i)| i).collect(),
            ranges,
            adjacent,
            cell_of,
        }
    }

    fn close(&self, a: usize, b: usize) -> bool {
        let (p, q) = (&self.coords[a], &self.coords[b]);
        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= self.eps2
    }

    /// Whether stored point `a` has at least `min_samples` neighbors, itself included.
    fn is_core(&self, a: usize, min_samples: usize) -> bool {
        let cell = self.cell_of[a];
        let (s, e) = self.ranges[cell];
        let mut count = e - s;
        if count >= min_samples {
            return true;
        }
        for &c in &self.adjacent[cell] {
            if c == cell {
                continue;
            }
            let (s, e) = self.ranges[c];
            for b in s..e {
                if self.close(a, b) {
                    count += 1;
                    if count >= min_samples {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// DBSCAN with Euclidean `eps` and a core threshold of `min_samples` points
/// counting the point itself. Clusters are numbered in order of their
/// lowest-index core point; a border point reachable from several clusters
/// takes the lowest-numbered one.
pub fn dbscan(points: &[Point3<f64>], eps: f64, min_samples: usize) -> Vec<i32> {
    assert!(eps > 0.0 && min_samples >= 1, "dbscan needs eps > 0 and min_samples >= 1");
    let n = points.len();
    let mut labels = vec![NOISE; n];
    if n == 0 {
        return labels;
    }
    let grid = Grid::new(points, eps);
    let core: Vec<bool> = (0..n).map(|a| grid.is_core(a, min_samples)).collect();
    let cells = grid.ranges.len();
    let core_in: Vec<Vec<usize>> = grid.ranges.iter().map(|&(s, e)| (s..e).filter(|&a| core[a]).collect()).collect();

    // Core points sharing a cell are connected; join cells with any close core pair.
    let mut parent: Vec<usize> = (0..cells).collect();
    for c in 0..cells {
        if core_in[c].is_empty() {
            continue;
        }
        for &d in &grid.adjacent[c] {
            if d <= c || core_in[d].is_empty() || find(&mut parent, c) == find(&mut parent, d) {
                continue;
            }
            if core_in[c].iter().any(|&a| core_in[d].iter().any(|&b| grid.close(a, b))) {
                let (rc, rd) = (find(&mut parent, c), find(&mut parent, d));
                parent[rc] = rd;
            }
        }
    }

    // Number components by their lowest original core index.
    let mut first = vec![usize::MAX; cells];
    for (a, &is_core) in core.iter().enumerate() {
        if is_core {
            let root = find(&mut parent, grid.cell_of[a]);
            first[root] = first[root].min(grid.order[a]);
        }
    }
    let mut roots: Vec<(usize, usize)> = (0..cells).filter(|&c| first[c] != usize::MAX).map(|c| (first[c], c)).collect();
    roots.sort_unstable();
    let mut number = vec![NOISE; cells];
    for (k, &(_, root)) in roots.iter().enumerate() {
        number[root] = k as i32;
    }

    for a in 0..n {
        let label = if core[a] {
            number[find(&mut parent, grid.cell_of[a])]
        } else {
            let mut best = NOISE;
            for &c in &grid.adjacent[grid.cell_of[a]] {
                if core_in[c].iter().any(|&b| grid.close(a, b)) {
                    let l = number[find(&mut parent, c)];
                    if best == NOISE || l < best {
                        best = l;
                    }
                }
            }
            best
        };
        labels[grid.order[a]] = label;
    }
    labels
}

/// Linear interpolation between order statistics; `p` in `[0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Where the fitted box is centered on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Mean x and y of the cluster points.
    Mean,
    /// Midpoint between the low and high percentiles along each extent axis.
    /// Unlike the mean, it does not lean toward the faces that most pixels see.
    ExtentMidpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub min_samples: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub low_percentile: f64,
    pub high_percentile: f64,
    /// Measure length and width along and across the track's current yaw
    /// instead of along the world axes.
    pub yaw_aligned_extents: bool,
    pub center: CenterMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_samples: 50,
            alpha_lower: 0.7,
            alpha_upper: 1.5,
            low_percentile: 5.0,
            high_percentile: 95.0,
            yaw_aligned_extents: true,
            center: CenterMode::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedBox {
    pub bbox: Box3<f64>,
    /// The measured volume fell outside the sanity band and class mean dims were used.
    pub dims_replaced: bool,
    pub cluster_size: usize,
}

/// Index of the largest cluster; ties go to the lowest label.
pub fn largest_cluster(labels: &[i32]) -> Option<i32> {
    let max = labels.iter().copied().max()?;
    if max < 0 {
        return None;
    }
    let mut counts = vec![0usize; max as usize + 1];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        counts[l as usize] += 1;
    }
    let best = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    Some(best.0 as i32)
}

/// Fit a box to the largest cluster of `points`.
///
/// `extent_yaw` is the heading the extents are measured along; pass 0 for
/// world-axis extents. The returned box has yaw 0; the caller stamps the
/// refined heading later.
pub fn fit_box(
    points: &[Point3<f64>],
    labels: &[i32],
    class: &ClassInfo,
    cfg: &FitConfig,
    extent_yaw: f64,
    score: f64,
    global_id: u64,
) -> Result<FittedBox, LiftError> {
    let label = largest_cluster(labels).ok_or(LiftError::NoCluster { global_id })?;
    let members: Vec<&Point3<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == label).map(|(p, _)| p).collect();
    let (s, c) = extent_yaw.sin_cos();
    let mut along: Vec<f64> = members.iter().map(|p| c * p.x + s * p.y).collect();
    let mut across: Vec<f64> = members.iter().map(|p| -s * p.x + c * p.y).collect();
    along.sort_by(f64::total_cmp);
    across.sort_by(f64::total_cmp);
    let extent = |v: &[f64]| percentile(v, cfg.high_percentile) - percentile(v, cfg.low_percentile);
    let (cx, cy) = match cfg.center {
        CenterMode::Mean => {
            let n = members.len() as f64;
            (members.iter().map(|p| p.x).sum::<f64>() / n, members.iter().map(|p| p.y).sum::<f64>() / n)
        }
        CenterMode::ExtentMidpoint => {
            let mid = |v: &[f64]| (percentile(v, cfg.high_percentile) + percentile(v, cfg.low_percentile)) / 2.0;
            let (a, b) = (mid(&along), mid(&across));
            (c * a - s * b, s * a + c * b)
        }
    };
    let mut dims = [extent(&along), extent(&across), members.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max)];
    let volume = dims[0] * dims[1] * dims[2];
    let dims_replaced = !(volume >= cfg.alpha_lower * class.mean_volume && volume <= cfg.alpha_upper * class.mean_volume)
        || dims.iter().any(|d| *d <= 0.0);
    if dims_replaced {
        dims = class.mean_dims();
    }
    let bbox = Box3::new([cx, cy, dims[2] / 2.0], dims, 0.0, score, class.class_id, global_id);
    Ok(FittedBox { bbox, dims_replaced, cluster_size: members.len() })
}

/// Class-mean box standing on the ground at a top-down location.
pub fn fallback_box(topdown: [f64; 2], class: &ClassInfo, score: f64, global_id: u64) -> Box3<f64> {
    let dims = class.mean_dims();
    Box3::new([topdown[0], topdown[1], dims[2] / 2.0], dims, 0.0, score, class.class_id, global_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ClassInfo;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn class() -> ClassInfo {
        ClassInfo {
            class_id: 1,
            name: "box".into(),
            pedestrian: false,
            mean_length: 2.0,
            mean_width: 1.0,
            mean_height: 1.0,
            mean_volume: 2.0,
            epsilon: None,
            spatial_gate: None,
            cluster_cut: None,
        }
    }

    #[test]
    fn principal_point_pixel_lifts_to_optical_axis() {
        let calib = Calibration::with_intrinsics(0, 100.0, 100.0, 2.0, 1.0, 5, 3);
        let mut mask = BinaryMask::empty(5, 3);
        mask.set(2, 1, true);
        let mut depth = DepthMap { camera_id: 0, frame: 0, width: 5, height: 3, data: vec![0.0; 15] };
        depth.data[5 + 2] = 2.0;
        let det = Detection2D {
            camera_id: 0,
            frame: 0,
            bbox: [1.0, 0.0, 3.0, 2.0],
            score: 0.8,
            class_id: 1,
            embedding: vec![1.0],
            keypoints: None,
            local_track_id: None,
        };
        let view = LiftView { calibration: &calib, detection: &det, mask: &mask, depth: &depth };
        let cloud = lift_target(&[view], 1, 4, 1).unwrap();
        assert_eq!(cloud.points, vec![CloudPoint { position: [0.0, 0.0, 2.0], camera_id: 0 }]);
        assert_eq!(cloud.score, 0.8);

        depth.data[5 + 2] = 0.0;
        let view = LiftView { calibration: &calib, detection: &det, mask: &mask, depth: &depth };
        assert_eq!(lift_target(&[view], 1, 4, 1), Err(LiftError::EmptyCloud { global_id: 4 }));
    }

    #[test]
    fn coincident_points_form_one_cluster() {
        let pts = vec![Point3::new(1.0, 2.0, 3.0); 60];
        assert!(dbscan(&pts, 0.1, 50).iter().all(|&l| l == 0));
        assert!(dbscan(&pts[..10], 0.1, 50).iter().all(|&l| l == NOISE));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.0);
        assert_relative_eq!(percentile(&v, 95.0), 3.8);
        assert_relative_eq!(percentile(&v, 5.0), 0.2);
    }

    #[test]
    fn unit_cube_grid() {
        let mut pts = Vec::new();
        for i in 0..=10 {
            for j in 0..=10 {
                for k in 0..=10 {
                    pts.push(Point3::new(i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0));
                }
            }
        }
        let labels = vec![0; pts.len()];
        let cls = ClassInfo { mean_length: 1.0, mean_width: 1.0, mean_volume: 1.0, ..class() };
        let fit = fit_box(&pts, &labels, &cls, &FitConfig::default(), 0.0, 1.0, 1).unwrap();
        // 121 points share each x value, so the 5th and 95th percentiles land on 0 and 1.
        assert_relative_eq!(fit.bbox.center, nalgebra::Vector3::new(0.5, 0.5, 0.5), epsilon = 1e-12);
        assert_relative_eq!(fit.bbox.dims, nalgebra::Vector3::new(1.0, 1.0, 1.0), epsilon = 1e-12);
        assert!(!fit.dims_replaced);
    }

    fn slab(volume_ratio: f64) -> Vec<Point3<f64>> {
        // Dense box of size (2r, 1, 1) so p95 - p5 gives length exactly 2r * 0.9 / 0.9.
        let len = 2.0 * volume_ratio;
        let mut pts = Vec::new();
        for i in 0..=20 {
            for j in 0..=20 {
                for k in 1..=10 {
                    let x = len / 0.9 * (i as f64 / 20.0 - 0.5);
                    let y = 1.0 / 0.9 * (j as f64 / 20.0 - 0.5);
                    pts.push(Point3::new(x, y, k as f64 / 10.0));
                }
            }
        }
        pts
    }

    #[test]
    fn volume_band_replaces_outliers_only() {
        let cls = class();
        for (ratio, replaced) in [(0.5, true), (0.69, true), (0.71, false), (1.0, false), (1.49, false), (1.51, true)] {
            let pts = slab(ratio);
            let fit = fit_box(&pts, &vec![0; pts.len()], &cls, &FitConfig::default(), 0.0, 1.0, 1).unwrap();
            assert_eq!(fit.dims_replaced, replaced, "ratio {ratio}");
            if replaced {
                assert_eq!(fit.bbox.dims, nalgebra::Vector3::new(2.0, 1.0, 1.0));
                assert_eq!(fit.bbox.center.z, 0.5);
            } else {
                assert_relative_eq!(fit.bbox.volume(), ratio * 2.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn yaw_aligned_extents_follow_heading() {
        // A 2 x 1 slab rotated to heading 90 degrees.
        let pts: Vec<_> = slab(1.0).into_iter().map(|p| Point3::new(-p.y, p.x, p.z)).collect();
        let labels = vec![0; pts.len()];
        let cls = class();
        let world = fit_box(&pts, &labels, &cls, &FitConfig::default(), 0.0, 1.0, 1).unwrap();
        assert_relative_eq!(world.bbox.dims.x, 1.0, epsilon = 1e-9);
        let aligned = fit_box(&pts, &labels, &cls, &FitConfig::default(), std::f64::consts::FRAC_PI_2, 1.0, 1).unwrap();
        assert_relative_eq!(aligned.bbox.dims.x, 2.0, epsilon = 1e-9);
        assert_relative_eq!(aligned.bbox.dims.y, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn center_modes_differ_on_one_sided_clouds() {
        // An L of points: a dense face at x = 0 and a sparse edge along y = 0 up to x = 2.
        let mut pts = Vec::new();
        for i in 0..=100 {
            pts.push(Point3::new(0.0, i as f64 / 100.0, 0.5));
        }
        for i in 1..=20 {
            pts.push(Point3::new(i as f64 / 10.0, 0.0, 0.5));
        }
        let labels = vec![0; pts.len()];
        let mean_cfg = FitConfig { alpha_lower: 1e-3, alpha_upper: 1e3, ..FitConfig::default() };
        let mid_cfg = FitConfig { center: CenterMode::ExtentMidpoint, ..mean_cfg.clone() };
        let mean = fit_box(&pts, &labels, &class(), &mean_cfg, 0.0, 1.0, 1).unwrap().bbox;
        let mid = fit_box(&pts, &labels, &class(), &mid_cfg, 0.0, 1.0, 1).unwrap().bbox;
        let n = pts.len() as f64;
        assert_relative_eq!(mean.center.x, pts.iter().map(|p| p.x).sum::<f64>() / n, epsilon = 1e-12);
        let xs: Vec<f64> = {
            let mut v: Vec<f64> = pts.iter().map(|p| p.x).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_relative_eq!(mid.center.x, (percentile(&xs, 95.0) + percentile(&xs, 5.0)) / 2.0, epsilon = 1e-12);
        assert!(mid.center.x > mean.center.x + 0.3);
        assert_eq!(mean.dims, mid.dims);
    }

    #[test]
    fn all_noise_is_an_error() {
        let pts = vec![Point3::origin(); 3];
        assert_eq!(
            fit_box(&pts, &[NOISE; 3], &class(), &FitConfig::default(), 0.0, 1.0, 9),
            Err(LiftError::NoCluster { global_id: 9 })
        );
        let b = fallback_box([3.0, 4.0], &class(), 0.5, 9);
        assert!(b.is_valid());
        assert_eq!(b.center, nalgebra::Vector3::new(3.0, 4.0, 0.5));
    }

    #[test]
    fn largest_cluster_ties_to_lowest_label() {
        assert_eq!(largest_cluster(&[1, 1, 0, 0, NOISE, NOISE, NOISE]), Some(0));
        assert_eq!(largest_cluster(&[1, 1, 1, 0, 0]), Some(1));
        assert_eq!(largest_cluster(&[NOISE]), None);
        assert_eq!(largest_cluster(&[]), None);
    }

    fn core_partition(points: &[Point3<f64>], labels: &[i32], eps: f64, min_samples: usize) -> Vec<Vec<usize>> {
        let core: Vec<usize> = (0..points.len())
            .filter(|&i| points.iter().filter(|q| (*q - points[i]).norm() <= eps).count() >= min_samples)
            .collect();
        let mut groups: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for &i in &core {
            groups.entry(labels[i]).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn partition_of_core_points_is_order_independent(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..200);
            let pts: Vec<Point3<f64>> = (0..n).map(|_| Point3::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..0.5))).collect();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let shuffled: Vec<Point3<f64>> = order.iter().map(|&i| pts[i]).collect();
            let a = dbscan(&pts, 0.25, 5);
            let b = dbscan(&shuffled, 0.25, 5);
            let mut b_orig = vec![0; n];
            for (k, &i) in order.iter().enumerate() {
                b_orig[i] = b[k];
            }
            prop_assert_eq!(core_partition(&pts, &a, 0.25, 5), core_partition(&pts, &b_orig, 0.25, 5));
            for i in 0..n {
                prop_assert_eq!(a[i] == NOISE, b_orig[i] == NOISE);
            }
        }
    }
}
