//! Corridor optimization: alternating polytope inflation, waypoint updates,
//! per-segment ellipsoid updates and scaled multiplier updates.

pub mod lbfgs;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::ellipsoid_opt::{interior_point, max_ellipsoid, EllipsoidProblem, SegmentDuals};
use crate::env::VoxelMap;
use crate::frontend::{init_ellipsoids, plan_path, upsample, PlanQuery};
use crate::geom::{hinge_sq, Aabb, Ellipsoid, Polyline, Polytope, MIN_POINT_SEPARATION};
use crate::inflate::{inflate_polytope, local_window, InflateConfig};
use crate::linalg::{dist, dot, sub};
use crate::traj::{solve_in_corridor, PiecewiseTrajectory, TimeAllocation, DEFAULT_ORDER};
use crate::waypoint_opt::{evaluate_heuristic, overlap_violation, update_waypoints, HeuristicKind, WaypointParams, WITNESS_TOL};
use crate::{Error, Result};

pub use lbfgs::{minimize, LbfgsOptions, Minimum, Status};

/// Source of wall-clock time in seconds.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub w_v: f64,
    pub w_c: f64,
    pub rho: f64,
    pub k_max: usize,
    pub outer_max: usize,
    /// Stop when `|ΔΣvol(E)| / Σvol(E)` falls below this.
    pub volume_rel_tol: f64,
    pub heuristic: HeuristicKind,
    /// Upsample threshold α (m).
    pub alpha: f64,
    /// Local range l (m).
    pub local_range: f64,
    /// Clearance ε of the initial path and ellipsoids (m).
    pub eps: f64,
    /// Nominal speed for time allocation (m/s).
    pub v_nom: f64,
    /// Weight of the corridor and overlap hinge penalties.
    pub mu_corr: f64,
    /// Smoothing length of the path-length heuristic (m).
    pub delta: f64,
    /// Seed of the Monte Carlo volume estimates.
    pub seed: u64,
    pub order: usize,
    /// Recompute durations from the current path each outer iteration
    /// instead of keeping the initial allocation.
    pub recompute_tau: bool,
    pub time_allocation: TimeAllocation,
    pub volume_samples: usize,
    /// Trajectory samples per segment in the final corridor check.
    pub check_samples: usize,
    /// Accepted corridor violation of the final trajectory (m).
    pub check_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            w_v: 1.0,
            w_c: 1.0,
            rho: 1.0,
            k_max: 1,
            outer_max: 10,
            volume_rel_tol: 1e-3,
            heuristic: HeuristicKind::MinJerk,
            alpha: 2.0,
            local_range: 2.0,
            eps: 0.1,
            v_nom: 2.0,
            mu_corr: 1e3,
            delta: 1e-4,
            seed: 0,
            order: DEFAULT_ORDER,
            recompute_tau: true,
            time_allocation: TimeAllocation::Uniform,
            volume_samples: 4096,
            check_samples: 64,
            check_tol: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("w_v", self.w_v),
            ("w_c", self.w_c),
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("local_range", self.local_range),
            ("eps", self.eps),
            ("v_nom", self.v_nom),
            ("mu_corr", self.mu_corr),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.outer_max == 0 || self.k_max == 0 {
            return Err(Error::InvalidArgument("outer_max and k_max must be at least 1".into()));
        }
        if !(2..=4).contains(&self.order) {
            return Err(Error::InvalidArgument(format!("order {} not in 2..=4", self.order)));
        }
        if !(self.volume_rel_tol >= 0.0) || self.check_samples == 0 {
            return Err(Error::InvalidArgument("bad stopping or checking tolerance".into()));
        }
        Ok(())
    }

    fn waypoint_params(&self) -> WaypointParams {
        WaypointParams {
            w_c: self.w_c,
            rho: self.rho,
            corridor_weight: self.mu_corr,
            delta: self.delta,
            order: self.order,
            ..WaypointParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Σ vol(E_i) (m³).
    pub vol_e: f64,
    /// Σ vol(P_i), Monte Carlo (m³).
    pub vol_p: f64,
    /// vol(P_i ∩ P_{i+1}) for each consecutive pair, Monte Carlo (m³).
    pub overlap: Vec<f64>,
    /// J̃₁ (m).
    pub path_len: f64,
    /// Control effort of the corridor-respecting trajectory through the current waypoints.
    pub traj_cost: f64,
    /// Augmented Lagrangian after each inner step.
    pub lagrangian: Vec<f64>,
    /// Seconds since the start of the run.
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct CoverResult {
    pub sfc: Vec<Polytope<3>>,
    /// Window box of each polytope.
    pub windows: Vec<Aabb<3>>,
    pub ellipsoids: Vec<Ellipsoid<3>>,
    pub waypoints: Polyline<3>,
    pub duals: Vec<SegmentDuals>,
    pub trajectory: PiecewiseTrajectory<3>,
    pub metrics: Vec<IterationMetrics>,
    /// Path returned by the planner before upsampling.
    pub initial_path: Polyline<3>,
    /// Largest sampled corridor violation of the final trajectory (m).
    pub corridor_violation: f64,
    /// Interior knots whose derivatives were pinned to keep the trajectory in the corridor.
    pub pinned_knots: usize,
}

impl CoverResult {
    pub fn segment_count(&self) -> usize {
        self.sfc.len()
    }
}

/// Scaled augmented Lagrangian
/// `w_v Σ −log det L_i + w_c J̃ − (ρ/2)‖y‖² + Σ (ρ/2)‖[g(h₀(E_i,p_i)), g(h₀(E_i,p_{i−1}))] + y_i‖²`.
pub fn augmented_lagrangian(
    ellipsoids: &[Ellipsoid<3>],
    p: &Polyline<3>,
    y: &[SegmentDuals],
    tau: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    let m = ellipsoids.len();
    if p.segment_count() != m || y.len() != m {
        return Err(Error::InconsistentSizes(format!("{m} ellipsoids, {} segments, {} duals", p.segment_count(), y.len())));
    }
    let heuristic = evaluate_heuristic(p, tau, cfg.heuristic, cfg.order)?;
    let pts = p.points();
    let mut total = cfg.w_c * heuristic;
    for (i, (e, yi)) in ellipsoids.iter().zip(y).enumerate() {
        total -= cfg.w_v * e.log_det();
        let g = [hinge_sq(e.residual(&pts[i + 1])), hinge_sq(e.residual(&pts[i]))];
        for k in 0..2 {
            total += 0.5 * cfg.rho * ((g[k] + yi.0[k]).powi(2) - yi.0[k].powi(2));
        }
    }
    Ok(total)
}

/// `y_i ← y_i + [g(h₀(E_i,p_i)), g(h₀(E_i,p_{i−1}))]`.
pub fn dual_update(ellipsoids: &[Ellipsoid<3>], p: &Polyline<3>, y: &[SegmentDuals]) -> Result<Vec<SegmentDuals>> {
    let m = ellipsoids.len();
    if p.segment_count() != m || y.len() != m {
        return Err(Error::InconsistentSizes(format!("{m} ellipsoids, {} segments, {} duals", p.segment_count(), y.len())));
    }
    let pts = p.points();
    Ok(ellipsoids
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (e, yi))| {
            SegmentDuals([
                yi.0[0] + hinge_sq(e.residual(&pts[i + 1])),
                yi.0[1] + hinge_sq(e.residual(&pts[i])),
            ])
        })
        .collect())
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Deterministic per-purpose seed.
fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
struct Cell {
    poly: Polytope<3>,
    window: Aabb<3>,
}

fn inflate_all(map: &VoxelMap, ellipsoids: &[Ellipsoid<3>], cfg: &SolverConfig) -> Result<Vec<Cell>> {
    let world = map.extent();
    let icfg = InflateConfig::new(cfg.local_range, world);
    map_indices(ellipsoids.len(), |i| {
        let e = &ellipsoids[i];
        let window = local_window(e, cfg.local_range, &world);
        let cloud = map.occupied_points(&window);
        let poly = inflate_polytope(e, cloud.points(), &icfg)?;
        Ok(Cell { poly, window })
    })
    .into_iter()
    .collect()
}

/// Replaces a waypoint that left the overlap of its neighbours by the point
/// of the overlap closest to it along the ray from an interior point.
fn re_anchor(p: &[f64; 3], left: &Polytope<3>, right: &Polytope<3>) -> Option<[f64; 3]> {
    let both = left.intersect(right);
    let (c, _) = interior_point(&both, p).ok()?;
    let d = sub(p, &c);
    let mut t = 1.0f64;
    for (a, b) in both.rows() {
        let rate = dot(a, &d);
        if rate > 0.0 {
            t = t.min((b - dot(a, &c)) / rate);
        }
    }
    let q: [f64; 3] = core::array::from_fn(|k| c[k] + t.max(0.0) * d[k]);
    (overlap_violation(&q, left, right) <= WITNESS_TOL).then_some(q)
}

/// Installs freshly inflated cells while keeping every interior waypoint in
/// the overlap of its two cells. Waypoints are re-anchored when possible;
/// otherwise the offending pair falls back to the previous cells, which the
/// current ellipsoids and waypoints are known to satisfy.
fn reconcile(old: &[Cell], fresh: Vec<Cell>, points: &mut [[f64; 3]]) -> Vec<Cell> {
    let m = old.len();
    let original = points.to_vec();
    let mut cells = fresh;
    let mut reverted = vec![false; m];
    for _ in 0..=2 * m + 2 {
        let mut changed = false;
        if !cells[0].poly.contains(&points[0], WITNESS_TOL) && !reverted[0] {
            cells[0] = old[0].clone();
            reverted[0] = true;
            changed = true;
        }
        if !cells[m - 1].poly.contains(&points[m], WITNESS_TOL) && !reverted[m - 1] {
            cells[m - 1] = old[m - 1].clone();
            reverted[m - 1] = true;
            changed = true;
        }
        for i in 1..m {
            let (l, r) = (&cells[i - 1].poly, &cells[i].poly);
            if overlap_violation(&points[i], l, r) <= WITNESS_TOL {
                continue;
            }
            let moved = re_anchor(&points[i], l, r).filter(|q| {
                dist(q, &points[i - 1]) > MIN_POINT_SEPARATION && dist(q, &points[i + 1]) > MIN_POINT_SEPARATION
            });
            if let Some(q) = moved {
                points[i] = q;
            } else {
                points[i] = original[i];
                for k in [i - 1, i] {
                    if !reverted[k] {
                        cells[k] = old[k].clone();
                        reverted[k] = true;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            return cells;
        }
    }
    points.copy_from_slice(&original);
    old.to_vec()
}

struct Snapshot<'a> {
    cells: &'a [Cell],
    ellipsoids: &'a [Ellipsoid<3>],
    path: &'a Polyline<3>,
    lagrangian: Vec<f64>,
}

fn record(it: usize, snap: Snapshot<'_>, cfg: &SolverConfig, clock: &dyn Clock, t0: f64) -> Result<IterationMetrics> {
    let cells = snap.cells;
    let vols = map_indices(cells.len(), |i| {
        cells[i].poly.volume_mc(&cells[i].window, cfg.volume_samples, mix_seed(cfg.seed, 1, i as u64))
    });
    let overlap = map_indices(cells.len().saturating_sub(1), |i| {
        let bx = cells[i].window.intersection(&cells[i + 1].window);
        if bx.is_empty() {
            return 0.0;
        }
        cells[i]
            .poly
            .intersect(&cells[i + 1].poly)
            .volume_mc(&bx, cfg.volume_samples, mix_seed(cfg.seed, 2, i as u64))
    });
    let tau = cfg.time_allocation.durations(snap.path, cfg.v_nom)?;
    let sfc: Vec<Polytope<3>> = cells.iter().map(|c| c.poly.clone()).collect();
    let fit = solve_in_corridor(snap.path, &tau, cfg.order, &sfc, cfg.check_samples, cfg.check_tol)?;
    Ok(IterationMetrics {
        iteration: it,
        vol_e: snap.ellipsoids.iter().map(|e| e.volume()).sum(),
        vol_p: vols.iter().sum(),
        overlap,
        path_len: snap.path.length(),
        traj_cost: fit.solution.cost(),
        lagrangian: snap.lagrangian,
        elapsed: clock.seconds() - t0,
    })
}

/// Corridor optimization without timing.
pub fn optimize_cover(map: &VoxelMap, query: &PlanQuery, cfg: &SolverConfig) -> Result<CoverResult> {
    optimize_cover_with_clock(map, query, cfg, &NoClock)
}

/// Plans a path, seeds ellipsoids along it and alternates polytope inflation,
/// waypoint updates, ellipsoid updates and multiplier updates. Iteration 0
/// of the metrics is the corridor inflated around the seed ellipsoids.
pub fn optimize_cover_with_clock(
    map: &VoxelMap,
    query: &PlanQuery,
    cfg: &SolverConfig,
    clock: &dyn Clock,
) -> Result<CoverResult> {
    cfg.validate()?;
    let t0 = clock.seconds();
    let planned = plan_path(map, &PlanQuery { clearance: cfg.eps, ..*query })?;
    let mut path = upsample(&planned.path, cfg.alpha)?;
    let mut ellipsoids = init_ellipsoids(&path, cfg.eps)?;
    let m = ellipsoids.len();
    let mut cells = inflate_all(map, &ellipsoids, cfg)?;
    let mut duals = vec![SegmentDuals::default(); m];
    let wp = cfg.waypoint_params();

    let mut tau = cfg.time_allocation.durations(&path, cfg.v_nom)?;
    let mut metrics = vec![record(
        0,
        Snapshot {
            cells: &cells,
            ellipsoids: &ellipsoids,
            path: &path,
            lagrangian: vec![augmented_lagrangian(&ellipsoids, &path, &duals, &tau, cfg)?],
        },
        cfg,
        clock,
        t0,
    )?];
    let mut prev_vol: f64 = ellipsoids.iter().map(|e| e.volume()).sum();

    for it in 1..=cfg.outer_max {
        if it > 1 {
            let fresh = inflate_all(map, &ellipsoids, cfg)?;
            let mut pts = path.points().to_vec();
            cells = reconcile(&cells, fresh, &mut pts);
            path = Polyline::new(pts)?;
        }
        if cfg.recompute_tau {
            tau = cfg.time_allocation.durations(&path, cfg.v_nom)?;
        }
        let mut lagrangian = Vec::with_capacity(cfg.k_max);
        for _ in 0..cfg.k_max {
            let sfc: Vec<Polytope<3>> = cells.iter().map(|c| c.poly.clone()).collect();
            path = update_waypoints(&path, &ellipsoids, &sfc, &duals, &tau, cfg.heuristic, &wp)?;
            let pts = path.points();
            let updated: Result<Vec<Ellipsoid<3>>> = map_indices(m, |i| {
                let problem = EllipsoidProblem {
                    polytope: &sfc[i],
                    p_prev: pts[i],
                    p_cur: pts[i + 1],
                    duals: duals[i],
                    w_v: cfg.w_v,
                    rho: cfg.rho,
                    corridor_weight: cfg.mu_corr,
                };
                let mut keep = Vec::new();
                if i == 0 {
                    keep.push(pts[0]);
                }
                if i + 1 == m {
                    keep.push(pts[m]);
                }
                max_ellipsoid(&problem, &ellipsoids[i], &keep)
            })
            .into_iter()
            .collect();
            ellipsoids = updated?;
            duals = dual_update(&ellipsoids, &path, &duals)?;
            lagrangian.push(augmented_lagrangian(&ellipsoids, &path, &duals, &tau, cfg)?);
        }
        metrics.push(record(
            it,
            Snapshot { cells: &cells, ellipsoids: &ellipsoids, path: &path, lagrangian },
            cfg,
            clock,
            t0,
        )?);
        let vol: f64 = ellipsoids.iter().map(|e| e.volume()).sum();
        let change = (vol - prev_vol).abs() / vol.max(f64::MIN_POSITIVE);
        prev_vol = vol;
        if change < cfg.volume_rel_tol {
            break;
        }
    }

    let sfc: Vec<Polytope<3>> = cells.iter().map(|c| c.poly.clone()).collect();
    let tau_final = cfg.time_allocation.durations(&path, cfg.v_nom)?;
    let fit = solve_in_corridor(&path, &tau_final, cfg.order, &sfc, cfg.check_samples, cfg.check_tol)?;
    Ok(CoverResult {
        windows: cells.iter().map(|c| c.window).collect(),
        sfc,
        ellipsoids,
        waypoints: path,
        duals,
        trajectory: fit.solution.trajectory(),
        metrics,
        initial_path: planned.path,
        corridor_violation: fit.report.max_violation(),
        pinned_knots: fit.pinned.iter().filter(|p| **p).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_random_env, EnvParams};

    fn ball(r: f64) -> Ellipsoid<3> {
        Ellipsoid::ball([0.0; 3], r).unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let p = Polyline::new(vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]).unwrap();
        let cfg = SolverConfig { heuristic: HeuristicKind::MinDist, ..Default::default() };
        let e = vec![ball(2.0)];
        let y = vec![SegmentDuals::default()];
        let v = augmented_lagrangian(&e, &p, &y, &[1.0], &cfg).unwrap();
        assert!((v - (-3.0 * 2f64.ln() + 1.0)).abs() < 1e-12);

        // only the multiplier term survives: (ρ/2)(‖0 + y‖² − ‖y‖²) = 0 with the penalty sum
        // cancelling the −(ρ/2)‖y‖² term, so shrink weights and check the remainder
        let tiny = SolverConfig { w_v: 1e-300, w_c: 1e-300, heuristic: HeuristicKind::MinDist, ..Default::default() };
        let y2 = vec![SegmentDuals([0.3, 0.4])];
        let v2 = augmented_lagrangian(&e, &p, &y2, &[1.0], &tiny).unwrap();
        assert!(v2.abs() < 1e-12);

        // unit ball, waypoint on the boundary
        let on = Polyline::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let v3 = augmented_lagrangian(&[ball(1.0)], &on, &[SegmentDuals([-0.7, 0.0])], &[1.0], &cfg).unwrap();
        assert!((v3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_update_examples() {
        let p = Polyline::new(vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let y = vec![SegmentDuals([0.5, 0.25])];
        let inside = dual_update(&[ball(3.0)], &p, &y).unwrap();
        assert_eq!(inside, y);
        let once = dual_update(&[ball(1.0)], &p, &y).unwrap();
        assert_eq!(once, vec![SegmentDuals([1.5, 0.25])]);
        let twice = dual_update(&[ball(1.0)], &p, &once).unwrap();
        assert_eq!(twice, vec![SegmentDuals([2.5, 0.25])]);
        assert!(dual_update(&[ball(1.0), ball(1.0)], &p, &y).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { outer_max: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { order: 5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_map_straight_query() {
        let map = VoxelMap::new([60, 30, 30], 0.1, [0.0; 3]).unwrap();
        let q = PlanQuery { start: [0.55, 1.55, 1.55], goal: [5.55, 1.55, 1.55], clearance: 0.1 };
        let cfg = SolverConfig { heuristic: HeuristicKind::MinDist, ..Default::default() };
        let r = optimize_cover(&map, &q, &cfg).unwrap();
        let last = r.metrics.last().unwrap();
        assert!((last.path_len - 5.0).abs() < 1e-6, "{}", last.path_len);
        assert!(r.corridor_violation <= 1e-4);
        for k in 0..=50 {
            let x = r.trajectory.eval(r.trajectory.total_time() * k as f64 / 50.0, 0).unwrap();
            assert!((x[1] - 1.55).abs() < 1e-6 && (x[2] - 1.55).abs() < 1e-6);
        }
    }

    #[test]
    fn random_map_is_deterministic_and_safe() {
        let params = EnvParams {
            size: [12.0, 12.0, 4.0],
            obstacle_count: 12,
            keep_clear: vec![[1.0, 1.0, 2.0], [11.0, 11.0, 2.0]],
            seed: 4,
            ..Default::default()
        };
        let map = gen_random_env(&params).unwrap();
        let q = PlanQuery { start: [1.0, 1.0, 2.0], goal: [11.0, 11.0, 2.0], clearance: 0.1 };
        let cfg = SolverConfig { outer_max: 4, ..Default::default() };
        let a = optimize_cover(&map, &q, &cfg).unwrap();
        let b = optimize_cover(&map, &q, &cfg).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.waypoints, b.waypoints);
        for (p, w) in a.sfc.iter().zip(&a.windows) {
            for x in map.occupied_points(w).points() {
                assert!(p.max_violation(x) >= -1e-9);
            }
        }
        let pts = a.waypoints.points();
        for i in 1..pts.len() - 1 {
            assert!(overlap_violation(&pts[i], &a.sfc[i - 1], &a.sfc[i]) <= 1e-6);
        }
        assert!(a.corridor_violation <= 1e-4);
        for (e, p) in a.ellipsoids.iter().zip(&a.sfc) {
            assert!(p.ellipsoid_violation(e) <= 1e-9);
        }
    }
}
