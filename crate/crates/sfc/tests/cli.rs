use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sfc_core::env::VoxelMap;

fn sfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfc")).args(args).output().expect("spawn sfc")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn empty_map(path: &Path) {
    let map = VoxelMap::new([40, 20, 10], 0.1, [0.0; 3]).unwrap();
    sfc::sfcmap::save(path, &map).unwrap();
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.sfcmap");
    let b = dir.path().join("b.sfcmap");
    for path in [&a, &b] {
        let out = sfc(&["gen", "--size", "20,20,5", "--res", "0.1", "--obstacles", "30", "--seed", "3", "--out", p(path)]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let map = sfc::sfcmap::parse(&text).unwrap();
    assert_eq!(map.dims(), [200, 200, 50]);
    assert!(map.occupied_count() > 0);
}

#[test]
fn gen_without_obstacles_is_free() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sfcmap");
    let out = sfc(&["gen", "--size", "4,3,2", "--res", "0.5", "--obstacles", "0", "--out", p(&path)]);
    assert!(out.status.success());
    let map = sfc::sfcmap::load(&path).unwrap();
    assert_eq!(map.dims(), [8, 6, 4]);
    assert_eq!(map.occupied_count(), 0);
}

#[test]
fn gen_into_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope").join("m.sfcmap");
    let out = sfc(&["gen", "--obstacles", "0", "--size", "2,2,2", "--out", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("m.sfcmap");
    let report = dir.path().join("r.json");
    empty_map(&map);
    let out = sfc(&["run", "--map", p(&map), "--start", "0.55,1.05,0.55", "--goal", "3.45,1.05,0.55", "--out", p(&report), "--outer-max", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["meta"]["planner"], "astar26-shortcut");
    assert_eq!(v["meta"]["config"]["eps"], 0.1);
    assert_eq!(v["meta"]["config"]["outer_max"], 3);
    assert!(v["timing"]["total_s"].is_f64());

    let iterations = v["iterations"].as_array().unwrap();
    assert!(!iterations.is_empty() && iterations.len() <= 4);
    assert_eq!(iterations[0]["it"], 0);
    for key in ["vol_e", "vol_p", "path_len", "traj_cost"] {
        assert!(iterations[0][key].is_f64(), "{key}");
    }
    let path_len = iterations.last().unwrap()["path_len"].as_f64().unwrap();
    assert!((path_len - 2.9).abs() < 1e-6, "{path_len}");
    let norm = v["normalized"]["vol_e"].as_array().unwrap();
    assert_eq!(norm.len(), iterations.len());
    assert!(norm.iter().any(|x| x.as_f64() == Some(1.0)));

    let polytopes = v["sfc"]["polytopes"].as_array().unwrap();
    let ellipsoids = v["ellipsoids"].as_array().unwrap();
    let waypoints = v["waypoints"].as_array().unwrap();
    let segments = v["trajectory"]["segments"].as_array().unwrap();
    assert_eq!(polytopes.len(), ellipsoids.len());
    assert_eq!(waypoints.len(), polytopes.len() + 1);
    assert_eq!(segments.len(), polytopes.len());
    assert_eq!(v["trajectory"]["s"], 3);
    for poly in polytopes {
        let rows = poly["A"].as_array().unwrap();
        assert_eq!(rows.len(), poly["b"].as_array().unwrap().len());
        for row in rows {
            let n: f64 = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap().powi(2)).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-9);
        }
    }
    for e in ellipsoids {
        let rows: Vec<usize> = e["L"].as_array().unwrap().iter().map(|r| r.as_array().unwrap().len()).collect();
        assert_eq!(rows, vec![1, 2, 3]);
    }
    for s in segments {
        assert_eq!(s["coeffs"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn run_with_missing_map_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.sfcmap");
    let out = sfc(&["run", "--map", p(&missing), "--start", "1,1,1", "--goal", "15,15,2", "--out", p(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("missing.sfcmap"), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1);
}

#[test]
fn run_with_malformed_map_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("bad.sfcmap");
    std::fs::write(&map, "SFCMAP 1\ndims 2 2 1\nres 0.1\norigin 0 0 0\n011\n").unwrap();
    let out = sfc(&["run", "--map", p(&map), "--start", "0,0,0", "--goal", "0.1,0.1,0", "--out", p(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("data"));
}

#[test]
fn run_from_inside_an_obstacle_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sfcmap");
    let mut map = VoxelMap::new([40, 20, 10], 0.1, [0.0; 3]).unwrap();
    map.set_occupied([5, 10, 5], true);
    sfc::sfcmap::save(&path, &map).unwrap();
    let report = dir.path().join("r.json");
    let out = sfc(&["run", "--map", p(&path), "--start", "0.55,1.05,0.55", "--goal", "3.45,1.05,0.55", "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!report.exists());
}

#[test]
fn run_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("m.sfcmap");
    empty_map(&map);
    let r = dir.path().join("r.json");
    let out = sfc(&["run", "--map", p(&map), "--start", "0.55,1.05", "--goal", "3.45,1.05,0.55", "--out", p(&r)]);
    assert_eq!(out.status.code(), Some(1));
    let out = sfc(&["run", "--map", p(&map), "--start", "0.55,1.05,0.55", "--goal", "3.45,1.05,0.55", "--out", p(&r), "--rho=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("rho"));
}

fn strip_timing(line: &str) -> Value {
    let mut v: Value = serde_json::from_str(line).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn bench_records_are_seed_determined() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for (path, jobs) in [(&a, "1"), (&b, "2")] {
        let out = sfc(&["bench", "--trials", "2", "--seed", "7", "--jobs", jobs, "--out", p(path)]);
        assert!(out.status.success(), "{}", stderr(&out));
        let table = String::from_utf8(out.stdout).unwrap();
        assert!(table.starts_with("heur"));
        assert!(table.contains("jerk"));
    }
    let la: Vec<Value> = std::fs::read_to_string(&a).unwrap().lines().map(strip_timing).collect();
    let lb: Vec<Value> = std::fs::read_to_string(&b).unwrap().lines().map(strip_timing).collect();
    assert_eq!(la.len(), 2);
    assert_eq!(la, lb);
    for rec in &la {
        assert!(rec["error"].is_null());
        assert!(rec["baseline"]["traj_cost"].is_f64());
        assert!(rec["final"]["vol_e"].is_f64());
        let s: Vec<f64> = rec["start"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let g: Vec<f64> = rec["goal"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let d: f64 = s.iter().zip(&g).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(d >= 10.0);
    }
}

#[test]
fn bench_pairs_heuristics_and_sweeps() {
    let out = sfc(&["bench", "--trials", "1", "--seed", "3", "--heuristic", "both", "--sweep", "l=1.5,2 alpha=2,3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let records: Vec<Value> = stdout.lines().filter(|l| l.starts_with('{')).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 8);
    let dist = records.iter().filter(|r| r["heuristic"] == "dist").count();
    assert_eq!(dist, 4);
    let configs: std::collections::BTreeSet<String> =
        records.iter().map(|r| format!("{} {} {}", r["heuristic"], r["local_range"], r["alpha"])).collect();
    assert_eq!(configs.len(), 8);
    assert!(records.iter().all(|r| r["start"] == records[0]["start"]));
}

#[test]
fn bench_rejects_a_bad_sweep() {
    let out = sfc(&["bench", "--trials", "1", "--sweep", "gamma=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sweep"));
}
