//! Duplicate-box fusion by intersection over the smaller volume, and yaw from
//! trajectory heading.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::boxes::Box3;
use crate::scalar::Real;

/// Intersection volume over the smaller of the two volumes, on axis-aligned extents.
pub fn ioa3d<T: Real>(a: &Box3<T>, b: &Box3<T>) -> T {
    let (amin, amax) = a.aabb();
    let (bmin, bmax) = b.aabb();
    let mut inter = T::one();
    for k in 0..3 {
        let lo = amin[k].max(bmin[k]);
        let hi = amax[k].min(bmax[k]);
        if hi <= lo {
            return T::zero();
        }
        inter *= hi - lo;
    }
    let denom = a.volume().min(b.volume());
    (inter / denom).min(T::one())
}

/// One fused output box and the input boxes it absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGroup<T: Real> {
    /// Indices into the input slice, seed first.
    pub members: Vec<usize>,
    pub fused: Box3<T>,
}

/// Greedy fusion: boxes are visited largest first, each unused box seeds a
/// group, and every later unused box whose IoA with the seed exceeds `thr`
/// joins it. A group's center and dims are volume-weighted means; it keeps the
/// smallest global id and the score, class and yaw of the box carrying it.
pub fn fuse_groups<T: Real>(boxes: &[Box3<T>], thr: T) -> Vec<FusionGroup<T>> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j]
            .volume()
            .partial_cmp(&boxes[i].volume())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(boxes[i].global_id.cmp(&boxes[j].global_id))
    });
    let mut used = vec![false; boxes.len()];
    let mut groups = Vec::new();
    for (pos, &seed) in order.iter().enumerate() {
        if used[seed] {
            continue;
        }
        used[seed] = true;
        let mut members = vec![seed];
        for &cand in &order[pos + 1..] {
            if !used[cand] && ioa3d(&boxes[seed], &boxes[cand]) > thr {
                used[cand] = true;
                members.push(cand);
            }
        }
        groups.push(FusionGroup { fused: merge(boxes, &members), members });
    }
    groups
}

fn merge<T: Real>(boxes: &[Box3<T>], members: &[usize]) -> Box3<T> {
    let mut total = T::zero();
    let mut center = nalgebra::Vector3::zeros();
    let mut dims = nalgebra::Vector3::zeros();
    for &i in members {
        let v = boxes[i].volume();
        total += v;
        center += boxes[i].center * v;
        dims += boxes[i].dims * v;
    }
    let owner = members.iter().map(|&i| &boxes[i]).min_by_key(|b| b.global_id).expect("group is never empty");
    Box3 { center: center / total, dims: dims / total, ..*owner }
}

pub fn fuse<T: Real>(boxes: &[Box3<T>], thr: T) -> Vec<Box3<T>> {
    fuse_groups(boxes, thr).into_iter().map(|g| g.fused).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct YawConfig {
    pub enabled: bool,
    /// Frames between position samples; updates happen on multiples of this.
    pub period: u32,
    /// Minimum displacement over one period, meters.
    pub min_distance: f64,
}

impl Default for YawConfig {
    fn default() -> Self {
        Self { enabled: true, period: 10, min_distance: 0.15 }
    }
}

#[derive(Debug, Clone, Default)]
struct History {
    samples: VecDeque<(u32, [f64; 2])>,
    yaw: f64,
}

/// Recent top-down positions and current heading of every output track.
#[derive(Debug, Clone, Default)]
pub struct TrackHistory {
    cfg: YawConfig,
    tracks: BTreeMap<u64, History>,
}

impl TrackHistory {
    pub fn new(cfg: YawConfig) -> Self {
        Self { cfg, tracks: BTreeMap::new() }
    }

    /// Current heading; 0 for tracks never seen.
    pub fn yaw(&self, global_id: u64) -> f64 {
        self.tracks.get(&global_id).map_or(0.0, |h| h.yaw)
    }

    /// Store the position of `global_id` at `frame`. Frames must increase per track.
    pub fn record(&mut self, global_id: u64, frame: u32, xy: [f64; 2]) {
        let keep = self.cfg.period.max(1);
        let h = self.tracks.entry(global_id).or_default();
        if let Some(&(last, _)) = h.samples.back() {
            assert!(frame > last, "history frames must increase");
        }
        h.samples.push_back((frame, xy));
        while h.samples.front().is_some_and(|&(f, _)| f + keep < frame) {
            h.samples.pop_front();
        }
    }

    /// Update the heading of `global_id` from its last period of motion and return it.
    pub fn refine_yaw(&mut self, global_id: u64, frame: u32) -> f64 {
        let cfg = self.cfg.clone();
        let Some(h) = self.tracks.get_mut(&global_id) else { return 0.0 };
        if !cfg.enabled || cfg.period == 0 || frame % cfg.period != 0 || frame < cfg.period {
            return h.yaw;
        }
        let now = h.samples.iter().find(|s| s.0 == frame).map(|s| s.1);
        let before = h.samples.iter().find(|s| s.0 == frame - cfg.period).map(|s| s.1);
        if let (Some(now), Some(before)) = (now, before) {
            let (dx, dy) = (now[0] - before[0], now[1] - before[1]);
            if dx.hypot(dy) > cfg.min_distance {
                h.yaw = dy.atan2(dx);
            }
        }
        h.yaw
    }

    pub fn forget(&mut self, global_id: u64) {
        self.tracks.remove(&global_id);
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn bx(c: [f64; 3], d: [f64; 3], id: u64) -> Box3<f64> {
        Box3::new(c, d, 0.0, 0.5 + id as f64 / 100.0, id as u32 % 3, id)
    }

    #[test]
    fn ioa_basics() {
        let a = bx([0.0, 0.0, 1.0], [2.0, 2.0, 2.0], 1);
        assert_eq!(ioa3d(&a, &a), 1.0);
        let inner = bx([0.2, 0.0, 1.0], [0.5, 0.5, 0.5], 2);
        assert_eq!(ioa3d(&a, &inner), 1.0);
        let far = bx([5.0, 0.0, 1.0], [1.0, 1.0, 1.0], 3);
        assert_eq!(ioa3d(&a, &far), 0.0);
        let half = bx([1.0, 0.0, 1.0], [2.0, 2.0, 2.0], 4);
        assert_relative_eq!(ioa3d(&a, &half), 0.5);
    }

    #[test]
    fn equal_boxes_average() {
        let a = bx([0.0, 0.0, 1.0], [3.0, 1.0, 2.0], 7);
        let b = bx([2.0, 0.0, 1.0], [3.0, 1.0, 2.0], 4);
        let out = fuse(&[a, b], 0.1);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].center, nalgebra::Vector3::new(1.0, 0.0, 1.0));
        assert_eq!(out[0].dims, a.dims);
        assert_eq!(out[0].global_id, 4);
        assert_eq!(out[0].score, b.score);
        assert_eq!(out[0].class_id, b.class_id);
    }

    #[test]
    fn disjoint_boxes_pass_through_sorted_by_volume() {
        let a = bx([0.0, 0.0, 0.5], [1.0, 1.0, 1.0], 1);
        let b = bx([5.0, 0.0, 1.0], [2.0, 2.0, 2.0], 2);
        let c = bx([10.0, 0.0, 0.5], [1.0, 1.0, 1.0], 0);
        assert_eq!(fuse(&[a, b, c], 0.1), vec![b, c, a]);
    }

    #[test]
    fn threshold_is_strict() {
        // Overlap exactly 0.1 of the smaller box does not fuse.
        let a = bx([0.0, 0.0, 0.5], [1.0, 1.0, 1.0], 1);
        let b = bx([0.9, 0.0, 0.5], [1.0, 1.0, 1.0], 2);
        assert_relative_eq!(ioa3d(&a, &b), 0.1, epsilon = 1e-12);
        let thr = ioa3d(&a, &b);
        assert_eq!(fuse(&[a, b], thr).len(), 2);
    }

    #[test]
    fn yaw_follows_heading() {
        let mut h = TrackHistory::new(YawConfig::default());
        for f in 0..=10 {
            h.record(1, f, [f as f64 * 0.1, 0.0]);
            h.record(2, f, [0.0, f as f64 * 0.1]);
            h.record(3, f, [f as f64 * 0.01, 0.0]);
            h.record(4, f, [-(f as f64) * 0.1, 0.0]);
        }
        assert_eq!(h.refine_yaw(1, 10), 0.0);
        assert_relative_eq!(h.refine_yaw(2, 10), FRAC_PI_2);
        assert_eq!(h.refine_yaw(3, 10), 0.0);
        assert_relative_eq!(h.refine_yaw(4, 10), std::f64::consts::PI);
        // Off-period frames leave the heading alone.
        h.record(2, 11, [5.0, 0.0]);
        assert_relative_eq!(h.refine_yaw(2, 11), FRAC_PI_2);
    }

    #[test]
    fn yaw_keeps_previous_value_on_small_motion() {
        let mut h = TrackHistory::new(YawConfig::default());
        for f in 0..=20 {
            let x = if f <= 10 { f as f64 * 0.1 } else { 1.0 };
            let y = if f <= 10 { 0.0 } else { (f - 10) as f64 * 0.01 };
            h.record(1, f, [x, y]);
        }
        assert_eq!(h.refine_yaw(1, 10), 0.0);
        h.refine_yaw(1, 20);
        assert_eq!(h.yaw(1), 0.0);
    }

    #[test]
    fn missing_sample_skips_update() {
        let mut h = TrackHistory::new(YawConfig::default());
        h.record(1, 3, [0.0, 0.0]);
        h.record(1, 10, [0.0, 5.0]);
        assert_eq!(h.refine_yaw(1, 10), 0.0);
    }

    fn arb_box() -> impl Strategy<Value = Box3<f64>> {
        (-3.0f64..3.0, -3.0f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0u64..50)
            .prop_map(|(x, y, l, w, h, id)| bx([x, y, h / 2.0], [l, w, h], id))
    }

    proptest! {
        #[test]
        fn ioa_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = ioa3d(&a, &b);
            prop_assert_eq!(ab, ioa3d(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ioa3d(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn groups_partition_input(boxes in prop::collection::vec(arb_box(), 0..15)) {
            let groups = fuse_groups(&boxes, 0.1);
            let mut seen: Vec<usize> = groups.iter().flat_map(|g| g.members.clone()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..boxes.len()).collect::<Vec<_>>());
            for g in &groups {
                for k in 0..3 {
                    let lo = g.members.iter().map(|&i| boxes[i].center[k]).fold(f64::INFINITY, f64::min);
                    let hi = g.members.iter().map(|&i| boxes[i].center[k]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(g.fused.center[k] >= lo - 1e-9 && g.fused.center[k] <= hi + 1e-9);
                }
            }
        }
    }
}
