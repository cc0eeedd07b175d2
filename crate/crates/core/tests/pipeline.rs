use sfc_core::ellipsoid_opt::{max_ellipsoid, EllipsoidProblem, SegmentDuals};
use sfc_core::env::VoxelMap;
use sfc_core::frontend::{init_ellipsoids, plan_path, upsample, PlanQuery};
use sfc_core::inflate::{inflate_polytope, local_window, InflateConfig};
use sfc_core::solver::{optimize_cover, CoverResult, SolverConfig};
use sfc_core::traj::{corridor_check, TimeAllocation};
use sfc_core::waypoint_opt::{overlap_violation, HeuristicKind};

/// 6 × 3 × 2 m room split by a wall at x ≈ 3 with a 0.8 m square opening.
fn wall_with_gap() -> VoxelMap {
    let mut map = VoxelMap::new([60, 30, 20], 0.1, [0.0; 3]).unwrap();
    for y in 0..30 {
        for z in 0..20 {
            let in_gap = (18..26).contains(&y) && (6..14).contains(&z);
            if !in_gap {
                map.set_occupied([30, y, z], true);
                map.set_occupied([31, y, z], true);
            }
        }
    }
    map
}

fn query() -> PlanQuery {
    PlanQuery { start: [0.85, 0.75, 0.55], goal: [5.25, 0.85, 1.45], clearance: 0.1 }
}

fn check_safe(map: &VoxelMap, r: &CoverResult) {
    let m = r.segment_count();
    assert_eq!(r.sfc.len(), m);
    assert_eq!(r.ellipsoids.len(), m);
    assert_eq!(r.waypoints.points().len(), m + 1);
    for (i, (poly, window)) in r.sfc.iter().zip(&r.windows).enumerate() {
        for q in map.occupied_points(window).points() {
            assert!(poly.max_violation(q) >= -1e-9, "cell {i} contains obstacle point {q:?}");
        }
        assert!(poly.ellipsoid_violation(&r.ellipsoids[i]) <= 1e-9);
    }
    let w = r.waypoints.points();
    for i in 1..m {
        assert!(overlap_violation(&w[i], &r.sfc[i - 1], &r.sfc[i]) <= 1e-6);
    }
    assert!(r.sfc[0].max_violation(&w[0]) <= 1e-6);
    assert!(r.sfc[m - 1].max_violation(&w[m]) <= 1e-6);
    assert!(corridor_check(&r.trajectory, &r.sfc, 64).unwrap().max_violation() <= 1e-4);
    assert!(r.duals.iter().all(|y| y.0[0] >= 0.0 && y.0[1] >= 0.0));
}

#[test]
fn corridor_threads_the_gap() {
    let map = wall_with_gap();
    let r = optimize_cover(&map, &query(), &SolverConfig::default()).unwrap();
    check_safe(&map, &r);
    assert_eq!(r.waypoints.first(), r.initial_path.first());
    assert_eq!(r.waypoints.last(), r.initial_path.last());
    let crossing = r.waypoints.points().windows(2).any(|s| (s[0][0] - 3.1) * (s[1][0] - 3.1) <= 0.0);
    assert!(crossing);
    for pair in r.metrics.windows(2) {
        assert!(pair[1].vol_e >= pair[0].vol_e);
        assert_eq!(pair[1].iteration, pair[0].iteration + 1);
    }
    assert!(r.metrics.len() <= SolverConfig::default().outer_max + 1);
}

#[test]
fn one_alternation_by_hand() {
    let map = wall_with_gap();
    let q = query();
    let path = upsample(&plan_path(&map, &q).unwrap().path, 2.0).unwrap();
    let seeds = init_ellipsoids(&path, q.clearance).unwrap();
    let cfg = InflateConfig::new(2.0, map.extent());
    let p = path.points();
    for (i, e) in seeds.iter().enumerate() {
        let window = local_window(e, 2.0, &map.extent());
        let cell = inflate_polytope(e, map.occupied_points(&window).points(), &cfg).unwrap();
        assert!(cell.ellipsoid_violation(e) <= 1e-9);
        let problem = EllipsoidProblem {
            polytope: &cell,
            p_prev: p[i],
            p_cur: p[i + 1],
            duals: SegmentDuals::default(),
            w_v: 1.0,
            rho: 1.0,
            corridor_weight: 1e3,
        };
        let grown = max_ellipsoid(&problem, e, &[]).unwrap();
        assert!(grown.volume() >= e.volume());
        assert!(cell.ellipsoid_violation(&grown) <= 1e-9);
    }
}

#[test]
fn alternative_settings_stay_safe() {
    let map = wall_with_gap();
    let variants = [
        SolverConfig { heuristic: HeuristicKind::MinDist, ..SolverConfig::default() },
        SolverConfig { recompute_tau: false, time_allocation: TimeAllocation::Proportional, ..SolverConfig::default() },
        SolverConfig { order: 2, alpha: 1.0, ..SolverConfig::default() },
        SolverConfig { order: 4, k_max: 2, local_range: 1.0, ..SolverConfig::default() },
    ];
    for cfg in &variants {
        let r = optimize_cover(&map, &query(), cfg).unwrap();
        check_safe(&map, &r);
        assert_eq!(r.trajectory.order(), cfg.order);
    }
}

#[test]
fn loose_tolerance_stops_after_one_pass() {
    let map = wall_with_gap();
    let cfg = SolverConfig { volume_rel_tol: 1e9, ..SolverConfig::default() };
    let r = optimize_cover(&map, &query(), &cfg).unwrap();
    assert_eq!(r.metrics.len(), 2);
}

#[test]
fn invalid_config_is_rejected() {
    let map = wall_with_gap();
    let cfg = SolverConfig { alpha: 0.0, ..SolverConfig::default() };
    assert!(optimize_cover(&map, &query(), &cfg).is_err());
}
