//! Independent reference implementations used by the integration tests.
//!
//! Each oracle spells out its algorithm step by step, favouring
//! obviousness over speed, and shares no code with the library beyond the
//! plain data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mtmc3d::boxes::Box3;
use mtmc3d::config::PipelineConfig;
use mtmc3d::synth::{NoiseConfig, ScenarioConfig};
use nalgebra::{Point3, Vector3};
use rand::Rng;

/// Fusion as a literal sequence of steps.
///
/// 1. Sort the boxes by volume, largest first (equal volumes: lower id first).
/// 2. Take the first box not yet used as the seed of a new group.
/// 3. Compare every later unused box with the seed by intersection over the smaller volume.
/// 4. Boxes above the threshold join the group and are marked used.
/// 5. The fused box is the volume-weighted mean of centers and dims, with the
///    id, score, class and heading of the member holding the smallest id.
/// 6. Repeat from step 2 until every box is used.
///
/// Returns, per group, the global ids of its members and the fused box.
pub fn literal_fuse(boxes: &[Box3<f64>], thr: f64) -> Vec<(Vec<u64>, Box3<f64>)> {
    let volume = |b: &Box3<f64>| b.dims[0] * b.dims[1] * b.dims[2];
    let mut sorted: Vec<Box3<f64>> = boxes.to_vec();
    // Insertion sort keeps the comparison rule in plain view.
    for i in 1..sorted.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&sorted[j - 1], &sorted[j]);
            let swap = volume(b) > volume(a) || (volume(b) == volume(a) && b.global_id < a.global_id);
            if !swap {
                break;
            }
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    let overlap = |a: &Box3<f64>, b: &Box3<f64>| -> f64 {
        let mut inter = 1.0;
        for k in 0..3 {
            let a_lo = a.center[k] - a.dims[k] * 0.5;
            let a_hi = a.center[k] + a.dims[k] * 0.5;
            let b_lo = b.center[k] - b.dims[k] * 0.5;
            let b_hi = b.center[k] + b.dims[k] * 0.5;
            let lo = if a_lo > b_lo { a_lo } else { b_lo };
            let hi = if a_hi < b_hi { a_hi } else { b_hi };
            if hi <= lo {
                return 0.0;
            }
            inter *= hi - lo;
        }
        let smaller = if volume(a) < volume(b) { volume(a) } else { volume(b) };
        let r = inter / smaller;
        if r > 1.0 {
            1.0
        } else {
            r
        }
    };
    let mut used = vec![false; sorted.len()];
    let mut out = Vec::new();
    loop {
        let Some(i) = (0..sorted.len()).find(|&i| !used[i]) else { break };
        used[i] = true;
        let mut group = vec![i];
        for j in i + 1..sorted.len() {
            if !used[j] && overlap(&sorted[i], &sorted[j]) > thr {
                used[j] = true;
                group.push(j);
            }
        }
        let mut total = 0.0;
        let mut center = [0.0; 3];
        let mut dims = [0.0; 3];
        for &k in &group {
            let v = volume(&sorted[k]);
            total += v;
            for d in 0..3 {
                center[d] += sorted[k].center[d] * v;
                dims[d] += sorted[k].dims[d] * v;
            }
        }
        let owner = group.iter().map(|&k| sorted[k]).min_by_key(|b| b.global_id).unwrap();
        let fused = Box3 {
            center: Vector3::new(center[0] / total, center[1] / total, center[2] / total),
            dims: Vector3::new(dims[0] / total, dims[1] / total, dims[2] / total),
            ..owner
        };
        out.push((group.iter().map(|&k| sorted[k].global_id).collect(), fused));
    }
    out
}

/// Random axis-aligned boxes in a small volume so that many overlap.
pub fn random_boxes(rng: &mut impl Rng, n: usize) -> Vec<Box3<f64>> {
    (0..n)
        .map(|i| {
            let dims = [rng.gen_range(0.3..3.0), rng.gen_range(0.3..2.0), rng.gen_range(0.5..2.5)];
            let center = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), dims[2] / 2.0 + rng.gen_range(0.0..0.3)];
            Box3::new(center, dims, rng.gen_range(-3.1..3.1), rng.gen_range(0.1..1.0), rng.gen_range(0..3), 1 + i as u64)
        })
        .collect()
}

/// Textbook DBSCAN: visit points in index order, grow a cluster from every
/// unvisited core point by breadth-first expansion over all pairs. A border
/// point belongs to the first cluster that reaches it.
pub fn naive_dbscan(points: &[Point3<f64>], eps: f64, min_samples: usize) -> Vec<i32> {
    let n = points.len();
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| {
                let d = points[i] - points[j];
                d.x * d.x + d.y * d.y + d.z * d.z <= eps * eps
            })
            .collect()
    };
    let mut labels = vec![-1i32; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        let ns = neighbors(i);
        if ns.len() < min_samples {
            continue;
        }
        visited[i] = true;
        labels[i] = next;
        let mut queue: std::collections::VecDeque<usize> = ns.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == -1 {
                labels[j] = next;
            }
            if visited[j] {
                continue;
            }
            let nj = neighbors(j);
            if nj.len() >= min_samples {
                visited[j] = true;
                labels[j] = next;
                queue.extend(nj);
            }
        }
        next += 1;
    }
    labels
}

/// Relabel clusters in order of first appearance so that two labelings that
/// differ only by a permutation compare equal. Noise stays -1.
pub fn canonical_labels(labels: &[i32]) -> Vec<i32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                -1
            } else {
                let k = map.len() as i32;
                *map.entry(l).or_insert(k)
            }
        })
        .collect()
}

/// Gaussian blobs plus uniform background points.
pub fn blob_cloud(rng: &mut impl Rng, n: usize) -> Vec<Point3<f64>> {
    let blobs = rng.gen_range(1..5);
    let centers: Vec<[f64; 3]> =
        (0..blobs).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)]).collect();
    let spread: f64 = rng.gen_range(0.05..0.4);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.15) {
                Point3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-1.0..3.0))
            } else {
                let c = centers[rng.gen_range(0..blobs)];
                let mut g = || -> f64 { (0..6).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * spread / 1.41 };
                Point3::new(c[0] + g(), c[1] + g(), c[2] + g())
            }
        })
        .collect()
}

fn inside(b: &Box3<f64>, p: [f64; 3]) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dy) = (p[0] - b.center[0], p[1] - b.center[1]);
    let along = c * dx + s * dy;
    let across = -s * dx + c * dy;
    along.abs() <= b.dims[0] / 2.0 && across.abs() <= b.dims[1] / 2.0 && (p[2] - b.center[2]).abs() <= b.dims[2] / 2.0
}

/// Monte-Carlo IoU: jittered-grid samples over `a` (`per_axis`³ of them) give
/// the fraction of `a` inside `b`, hence the intersection volume.
pub fn monte_carlo_iou(a: &Box3<f64>, b: &Box3<f64>, per_axis: usize, rng: &mut impl Rng) -> f64 {
    let (s, c) = a.yaw.sin_cos();
    let mut hits = 0usize;
    let step = 1.0 / per_axis as f64;
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let u = (i as f64 + rng.gen::<f64>()) * step - 0.5;
                let v = (j as f64 + rng.gen::<f64>()) * step - 0.5;
                let w = (k as f64 + rng.gen::<f64>()) * step - 0.5;
                let (l, wd) = (u * a.dims[0], v * a.dims[1]);
                let p = [a.center[0] + c * l - s * wd, a.center[1] + s * l + c * wd, a.center[2] + w * a.dims[2]];
                if inside(b, p) {
                    hits += 1;
                }
            }
        }
    }
    let va = a.dims[0] * a.dims[1] * a.dims[2];
    let vb = b.dims[0] * b.dims[1] * b.dims[2];
    let inter = va * hits as f64 / (per_axis * per_axis * per_axis) as f64;
    inter / (va + vb - inter)
}

/// Per-frame similarity tables: ground-truth ids, predicted ids and IoU matrix.
pub struct ToyFrame {
    pub gt: Vec<u64>,
    pub pred: Vec<u64>,
    pub iou: Vec<Vec<f64>>,
}

/// Every partial one-to-one matching of a frame restricted to pairs with
/// similarity at least `alpha`, by recursion over ground-truth rows.
fn all_matchings(iou: &[Vec<f64>], alpha: f64) -> Vec<Vec<(usize, usize)>> {
    fn go(row: usize, iou: &[Vec<f64>], alpha: f64, taken: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if row == iou.len() {
            out.push(cur.clone());
            return;
        }
        go(row + 1, iou, alpha, taken, cur, out);
        for j in 0..taken.len() {
            if !taken[j] && iou[row][j] >= alpha && iou[row][j] > 0.0 {
                taken[j] = true;
                cur.push((row, j));
                go(row + 1, iou, alpha, taken, cur, out);
                cur.pop();
                taken[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    let cols = iou.first().map_or(0, |r| r.len());
    go(0, iou, alpha, &mut vec![false; cols], &mut Vec::new(), &mut out);
    out
}

/// HOTA by exhaustive search: per frame and threshold the matching with the
/// largest similarity sum wins. Returns (HOTA, DetA, AssA, LocA) averaged over `alphas`.
pub fn brute_force_hota(frames: &[ToyFrame], alphas: &[f64]) -> (f64, f64, f64, f64) {
    let mut sums = (0.0, 0.0, 0.0, 0.0);
    for &alpha in alphas {
        let mut gt_count: BTreeMap<u64, f64> = BTreeMap::new();
        let mut pred_count: BTreeMap<u64, f64> = BTreeMap::new();
        let mut pairs: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut matches = Vec::new();
        let (mut n_gt, mut n_pred, mut loc) = (0.0, 0.0, 0.0);
        for f in frames {
            for g in &f.gt {
                *gt_count.entry(*g).or_default() += 1.0;
            }
            for p in &f.pred {
                *pred_count.entry(*p).or_default() += 1.0;
            }
            n_gt += f.gt.len() as f64;
            n_pred += f.pred.len() as f64;
            let score = |m: &Vec<(usize, usize)>| m.iter().map(|&(i, j)| f.iou[i][j]).sum::<f64>();
            let best = all_matchings(&f.iou, alpha)
                .into_iter()
                .max_by(|a, b| score(a).partial_cmp(&score(b)).unwrap())
                .unwrap_or_default();
            for (i, j) in best {
                let key = (f.gt[i], f.pred[j]);
                *pairs.entry(key).or_default() += 1.0;
                matches.push(key);
                loc += f.iou[i][j];
            }
        }
        let tp = matches.len() as f64;
        let (fn_, fp) = (n_gt - tp, n_pred - tp);
        let deta = if tp + fn_ + fp == 0.0 { 0.0 } else { tp / (tp + fn_ + fp) };
        let assa = if tp == 0.0 {
            0.0
        } else {
            matches.iter().map(|k| pairs[k] / (gt_count[&k.0] + pred_count[&k.1] - pairs[k])).sum::<f64>() / tp
        };
        let loca = if tp == 0.0 { 0.0 } else { loc / tp };
        sums.0 += (deta * assa).sqrt();
        sums.1 += deta;
        sums.2 += assa;
        sums.3 += loca;
    }
    let n = alphas.len() as f64;
    (sums.0 / n, sums.1 / n, sums.2 / n, sums.3 / n)
}

/// Distinct ids in a set of records, for counting tracks.
pub fn distinct<I: IntoIterator<Item = u64>>(ids: I) -> BTreeSet<u64> {
    ids.into_iter().collect()
}

/// The noisy scene used by the ablation comparisons.
pub fn noisy_scenario() -> ScenarioConfig {
    ScenarioConfig {
        seed: 11,
        noise: NoiseConfig {
            miss_rate: 0.05,
            box_jitter_px: 1.5,
            embedding_noise: 0.35,
            identity_similarity: 0.6,
            id_switch_rate: 0.01,
            false_positive_rate: 0.02,
            ..NoiseConfig::default()
        },
        ..ScenarioConfig::default()
    }
}

/// Tracker settings for the ablations: stored local ids and 5% cluster corruption.
pub fn corrupted_config() -> PipelineConfig {
    let mut cfg = PipelineConfig { bypass_sct: true, ..PipelineConfig::default() };
    cfg.corruption.rate = 0.05;
    cfg.corruption.seed = 3;
    cfg
}

/// A small scene for tests that write to disk: three cameras, one target per
/// class and a reduced image size.
pub fn small_scenario(frames: u32, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        seed,
        frames,
        image_width: 160,
        image_height: 90,
        focal_px: 127.0,
        min_visible_pixels: 10,
        ..ScenarioConfig::default()
    };
    cfg.cameras.count = 3;
    for c in &mut cfg.classes {
        c.count = 1;
    }
    cfg
}
