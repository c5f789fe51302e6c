//! The binary driven end to end: exit codes, generation, scoring and dumps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtmc3d::boxes::Box3;
use mtmc3d::fuse::fuse_groups;
use serde_json::Value;

const SMALL: &str = r#"{"frames": 20, "image_width": 160, "image_height": 90, "focal_px": 127.0,
    "min_visible_pixels": 10, "cameras": {"count": 3}}"#;

/// A person and a small robot walking side by side, so their boxes overlap.
const SIDE_BY_SIDE: &str = r#"{"frames": 12, "image_width": 160, "image_height": 90, "focal_px": 127.0,
    "min_visible_pixels": 10, "cameras": {"count": 3},
    "classes": [
        {"class_id": 0, "name": "person", "pedestrian": true, "dims": [0.5, 0.5, 1.75], "speed": 1.0},
        {"class_id": 2, "name": "nova_carter", "dims": [0.7, 0.5, 0.5], "speed": 1.0}],
    "targets": [
        {"class_id": 0, "waypoints": [[-2.0, 0.0], [2.0, 0.0]]},
        {"class_id": 2, "waypoints": [[-2.0, 0.3], [2.0, 0.3]]}]}"#;

fn mtmc3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtmc3d")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a scenario file and generates its scene under `dir`.
fn generate(dir: &Path, name: &str, scenario: &str, extra: &[&str]) -> PathBuf {
    let config = dir.join(format!("{name}.json"));
    std::fs::write(&config, scenario).unwrap();
    let scene = dir.join(name);
    let mut args = vec!["gen", "--config", s(&config), "--out", s(&scene)];
    args.extend_from_slice(extra);
    let out = mtmc3d(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    scene
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn summary_scores(line: &str) -> BTreeMap<String, f64> {
    let words: Vec<&str> = line.split_whitespace().collect();
    words.chunks(2).map(|kv| (kv[0].to_string(), kv[1].parse().unwrap())).collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&mtmc3d(&["--help"])), 0);
    assert_eq!(code(&mtmc3d(&["run", "--help"])), 0);
    assert_eq!(code(&mtmc3d(&["--version"])), 0);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&mtmc3d(&[])), 1);
    assert_eq!(code(&mtmc3d(&["run", "--bogus"])), 1);
    assert_eq!(code(&mtmc3d(&["run", "--scene", "x", "--out", "y", "--mode", "4d"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"fusion": {"thr": -1.0}}"#).unwrap();
    let out = mtmc3d(&["run", "--scene", "x", "--out", "y", "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("thr"));
}

#[test]
fn missing_scene_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtmc3d(&["run", "--scene", s(&dir.path().join("absent")), "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(code(&out), 2);
    let missing = dir.path().join("missing.txt");
    assert_eq!(code(&mtmc3d(&["eval", "--gt", s(&missing), "--pred", s(&missing)])), 2);
}

#[test]
fn print_config_lists_effective_values() {
    let out = mtmc3d(&["run", "--scene", "unused", "--out", "unused", "--print-config", "--mode", "2d", "--workers", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let value: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["config"]["mode"], "2d");
    assert_eq!(value["config"]["workers"], 2);
    assert!(value.to_string().contains("rejoin_radius"));
    let out = mtmc3d(&["gen", "--out", "unused", "--print-config", "--seed", "9"]);
    let scenario: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(scenario["seed"], 9);
}

#[test]
fn same_seed_generates_identical_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a", SMALL, &["--seed", "7"]);
    let b = generate(dir.path(), "b", SMALL, &["--seed", "7"]);
    let c = generate(dir.path(), "c", SMALL, &["--seed", "8"]);
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    assert!(ta.len() > 5);
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
}

#[test]
fn run_then_eval_scores_a_tracked_scene() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(dir.path(), "scene", SMALL, &[]);
    let gt = scene.join("gt.txt");
    let out = mtmc3d(&["eval", "--gt", s(&gt), "--pred", s(&gt)]);
    assert_eq!(code(&out), 0);
    assert!(summary_scores(&stdout(&out)).values().all(|&v| v == 1.0));

    let result = dir.path().join("result.txt");
    let log = dir.path().join("log.jsonl");
    let out = mtmc3d(&["run", "--scene", s(&scene), "--out", s(&result), "--log", s(&log), "--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["frames"], 20);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 20);
    let csv = dir.path().join("alphas.csv");
    let out = mtmc3d(&["eval", "--scene", s(&scene), "--pred", s(&result), "--out", s(&csv)]);
    assert_eq!(code(&out), 0);
    let scores = summary_scores(&stdout(&out));
    assert!(scores["HOTA"] > 0.5, "{scores:?}");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 20);
}

#[test]
fn two_d_mode_writes_image_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(dir.path(), "scene", SMALL, &[]);
    std::fs::remove_dir_all(scene.join("depth")).unwrap();
    let result = dir.path().join("result.txt");
    let out = mtmc3d(&["run", "--scene", s(&scene), "--out", s(&result), "--mode", "2d"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&result).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let fields: Vec<f64> = line.split_whitespace().map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 7, "{line}");
        assert!(fields[3] < fields[5] && fields[4] < fields[6], "{line}");
        assert!(fields[5] <= 160.0 && fields[6] <= 90.0, "{line}");
    }
}

#[test]
fn scene_without_detections_runs_empty() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(dir.path(), "scene", SMALL, &[]);
    std::fs::write(scene.join("detections.jsonl"), "").unwrap();
    std::fs::write(scene.join("masks.jsonl"), "").unwrap();
    let result = dir.path().join("result.txt");
    let out = mtmc3d(&["run", "--scene", s(&scene), "--out", s(&result)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&result).unwrap(), "");
    let out = mtmc3d(&["eval", "--scene", s(&scene), "--pred", s(&result)]);
    assert_eq!(code(&out), 0);
    assert_eq!(summary_scores(&stdout(&out))["DetA"], 0.0);
}

fn box_from(v: &Value) -> Box3<f64> {
    let triple = |k: &str| -> [f64; 3] {
        let a = v[k].as_array().unwrap();
        [a[0].as_f64().unwrap(), a[1].as_f64().unwrap(), a[2].as_f64().unwrap()]
    };
    Box3::new(
        triple("center"),
        triple("dims"),
        v["yaw"].as_f64().unwrap(),
        v["score"].as_f64().unwrap(),
        v["class_id"].as_u64().unwrap() as u32,
        v["global_id"].as_u64().unwrap(),
    )
}

#[test]
fn inspect_dump_reports_the_frame_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(dir.path(), "scene", SIDE_BY_SIDE, &[]);
    assert_eq!(code(&mtmc3d(&["inspect", "--scene", s(&scene), "--frame", "12"])), 1);
    let mut fused_frames = 0;
    for frame in 0..12 {
        let out = mtmc3d(&["inspect", "--scene", s(&scene), "--frame", &frame.to_string()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let dump: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(dump["frame"], frame);
        let detail = &dump["detail"];
        let boxes: Vec<Box3<f64>> = detail["boxes_before_fusion"].as_array().unwrap().iter().map(box_from).collect();
        let expected: Vec<(Vec<u64>, Box3<f64>)> = fuse_groups(&boxes, 0.1)
            .into_iter()
            .filter(|g| g.members.len() > 1)
            .map(|g| {
                let mut ids: Vec<u64> = g.members.iter().map(|&i| boxes[i].global_id).collect();
                ids.sort_unstable();
                (ids, g.fused)
            })
            .collect();
        let reported: Vec<(Vec<u64>, Box3<f64>)> = detail["fusion_groups"]
            .as_array()
            .unwrap()
            .iter()
            .map(|g| (serde_json::from_value(g["global_ids"].clone()).unwrap(), box_from(&g["fused"])))
            .collect();
        assert_eq!(reported, expected, "frame {frame}");
        assert_eq!(dump["results"].as_array().unwrap().len(), boxes.len() - expected.iter().map(|g| g.0.len() - 1).sum::<usize>());
        fused_frames += usize::from(!expected.is_empty());
    }
    assert!(fused_frames > 0);
}
