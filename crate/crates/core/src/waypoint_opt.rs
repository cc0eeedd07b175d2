//! Waypoint update of the alternating scheme under the path-length and
//! control-effort heuristics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::ellipsoid_opt::SegmentDuals;
use crate::geom::{hinge_sq, hinge_sq_grad, Ellipsoid, Polyline, Polytope};
use crate::linalg::{dot, norm, sub};
use crate::solver::lbfgs::{minimize, LbfgsOptions};
use crate::traj::{BoundaryState, MinEffort, DEFAULT_ORDER};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeuristicKind {
    /// Path length.
    MinDist,
    /// Control effort of the rest-to-rest minimum-effort trajectory.
    MinJerk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub w_c: f64,
    pub rho: f64,
    /// Weight of the overlap and sampled-corridor hinge penalties.
    pub corridor_weight: f64,
    /// Smoothing length of the path-length term (m).
    pub delta: f64,
    /// Corridor samples per segment for the control-effort heuristic.
    pub corridor_samples: usize,
    pub order: usize,
}

impl Default for WaypointParams {
    fn default() -> Self {
        Self {
            w_c: 1.0,
            rho: 1.0,
            corridor_weight: 1e3,
            delta: 1e-4,
            corridor_samples: 8,
            order: DEFAULT_ORDER,
        }
    }
}

/// `√(‖v‖² + δ²) − δ`.
pub fn smooth_len<const N: usize>(v: &[f64; N], delta: f64) -> f64 {
    (dot(v, v) + delta * delta).sqrt() - delta
}

fn smooth_len_grad<const N: usize>(v: &[f64; N], delta: f64) -> [f64; N] {
    let r = (dot(v, v) + delta * delta).sqrt();
    v.map(|c| c / r)
}

/// Raw heuristic value: path length, or control effort with durations `tau`.
pub fn evaluate_heuristic<const N: usize>(p: &Polyline<N>, tau: &[f64], kind: HeuristicKind, order: usize) -> Result<f64> {
    if p.segment_count() == 0 {
        return Ok(0.0);
    }
    match kind {
        HeuristicKind::MinDist => Ok(p.length()),
        HeuristicKind::MinJerk => {
            let pts = p.points();
            let sol = MinEffort::solve(
                pts,
                tau,
                &BoundaryState::rest(pts[0], order),
                &BoundaryState::rest(*p.last(), order),
                order,
                &[],
            )?;
            Ok(sol.cost())
        }
    }
}

/// Waypoint-stage objective over the interior waypoints, flattened.
#[derive(Debug, Clone, Copy)]
pub struct WaypointObjective<'a, const N: usize> {
    pub start: [f64; N],
    pub goal: [f64; N],
    pub ellipsoids: &'a [Ellipsoid<N>],
    pub sfc: &'a [Polytope<N>],
    pub duals: &'a [SegmentDuals],
    pub tau: &'a [f64],
    pub kind: HeuristicKind,
    pub params: WaypointParams,
}

impl<const N: usize> WaypointObjective<'_, N> {
    pub fn segment_count(&self) -> usize {
        self.ellipsoids.len()
    }

    /// Full waypoint list from the interior variables.
    pub fn unpack(&self, x: &[f64]) -> Vec<[f64; N]> {
        let mut pts = Vec::with_capacity(self.segment_count() + 1);
        pts.push(self.start);
        pts.extend(x.chunks_exact(N).map(|c| core::array::from_fn(|k| c[k])));
        pts.push(self.goal);
        pts
    }

    pub fn pack(points: &[[f64; N]]) -> Vec<f64> {
        points[1..points.len() - 1].iter().flatten().copied().collect()
    }

    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let pts = self.unpack(x);
        let mut g = vec![[0.0; N]; pts.len()];
        let f = self.eval_points(&pts, &mut g);
        for (i, gi) in g[1..pts.len() - 1].iter().enumerate() {
            grad[i * N..(i + 1) * N].copy_from_slice(gi);
        }
        f
    }

    /// Value and gradient with respect to every waypoint (endpoint entries included).
    pub fn eval_points(&self, pts: &[[f64; N]], g: &mut [[f64; N]]) -> f64 {
        let prm = &self.params;
        let mut f = 0.0;
        match self.kind {
            HeuristicKind::MinDist => {
                for i in 1..pts.len() {
                    let v = sub(&pts[i], &pts[i - 1]);
                    f += prm.w_c * smooth_len(&v, prm.delta);
                    let dv = smooth_len_grad(&v, prm.delta);
                    for k in 0..N {
                        g[i][k] += prm.w_c * dv[k];
                        g[i - 1][k] -= prm.w_c * dv[k];
                    }
                }
            }
            HeuristicKind::MinJerk => f += self.effort_terms(pts, g),
        }

        for (i, (e, y)) in self.ellipsoids.iter().zip(self.duals).enumerate() {
            for (slot, idx) in [(0usize, i + 1), (1usize, i)] {
                let (r, dr) = e.residual_with_grad(&pts[idx]);
                let gv = hinge_sq(r);
                f += 0.5 * prm.rho * (gv + y.0[slot]).powi(2);
                let coef = prm.rho * (gv + y.0[slot]) * hinge_sq_grad(r);
                if coef != 0.0 {
                    for k in 0..N {
                        g[idx][k] += coef * dr[k];
                    }
                }
            }
        }

        for i in 1..pts.len() - 1 {
            for poly in [&self.sfc[i - 1], &self.sfc[i]] {
                for (a, b) in poly.rows() {
                    let v = dot(a, &pts[i]) - b;
                    if v > 0.0 {
                        f += prm.corridor_weight * hinge_sq(v);
                        let c = prm.corridor_weight * hinge_sq_grad(v);
                        for k in 0..N {
                            g[i][k] += c * a[k];
                        }
                    }
                }
            }
        }
        f
    }

    /// `w_c · J̃₂` plus the sampled corridor penalties, with gradients.
    fn effort_terms(&self, pts: &[[f64; N]], g: &mut [[f64; N]]) -> f64 {
        let prm = &self.params;
        let s = prm.order;
        let m = pts.len() - 1;
        let Ok(sol) = MinEffort::solve(
            pts,
            self.tau,
            &BoundaryState::rest(pts[0], s),
            &BoundaryState::rest(pts[m], s),
            s,
            &[],
        ) else {
            return f64::NAN;
        };
        let mut f = prm.w_c * sol.cost();
        let mut dz = vec![[0.0; N]; sol.knot_states().len()];
        let mut any = false;
        for (seg, poly) in self.sfc.iter().enumerate() {
            for k in 0..prm.corridor_samples {
                let u = (k as f64 + 0.5) / prm.corridor_samples as f64;
                let (x, w) = sol.sample(seg, u);
                for (a, b) in poly.rows() {
                    let v = dot(a, &x) - b;
                    if v > 0.0 {
                        any = true;
                        f += prm.corridor_weight * hinge_sq(v);
                        let c = prm.corridor_weight * hinge_sq_grad(v);
                        for (j, wj) in w.iter().enumerate() {
                            for d in 0..N {
                                dz[seg * s + j][d] += c * wj * a[d];
                            }
                        }
                    }
                }
            }
        }
        for (gi, ci) in g.iter_mut().zip(sol.position_gradient()) {
            for d in 0..N {
                gi[d] += prm.w_c * ci[d];
            }
        }
        if any {
            for (gi, ci) in g.iter_mut().zip(sol.pullback(&dz)) {
                for d in 0..N {
                    gi[d] += ci[d];
                }
            }
        }
        f
    }

    pub fn value(&self, pts: &[[f64; N]]) -> f64 {
        let mut g = vec![[0.0; N]; pts.len()];
        self.eval_points(pts, &mut g)
    }
}

/// Overlap violation accepted for a waypoint to count as lying in both neighbours.
pub const WITNESS_TOL: f64 = 1e-9;

/// Largest violation of the rows of either neighbouring polytope at `p`.
pub fn overlap_violation<const N: usize>(p: &[f64; N], left: &Polytope<N>, right: &Polytope<N>) -> f64 {
    left.max_violation(p).max(right.max_violation(p))
}

/// Largest step `t ∈ [0, 1]` along `from → to` keeping `from` feasible rows satisfied.
fn ratio_test<const N: usize>(from: &[f64; N], to: &[f64; N], polys: [&Polytope<N>; 2]) -> f64 {
    let d = sub(to, from);
    let mut t = 1.0f64;
    for poly in polys {
        for (a, b) in poly.rows() {
            let rate = dot(a, &d);
            if rate > 0.0 {
                let slack = (b - dot(a, from)).max(0.0);
                t = t.min(slack / rate);
            }
        }
    }
    t.max(0.0)
}

/// One waypoint update. The start and goal are kept bit-identical; interior
/// waypoints that held the overlap constraint on input still hold it on output.
#[allow(clippy::too_many_arguments)]
pub fn update_waypoints<const N: usize>(
    p: &Polyline<N>,
    ellipsoids: &[Ellipsoid<N>],
    sfc: &[Polytope<N>],
    duals: &[SegmentDuals],
    tau: &[f64],
    kind: HeuristicKind,
    params: &WaypointParams,
) -> Result<Polyline<N>> {
    let m = p.segment_count();
    if ellipsoids.len() != m || sfc.len() != m || duals.len() != m || (kind == HeuristicKind::MinJerk && tau.len() != m) {
        return Err(Error::InconsistentSizes(format!(
            "{m} segments with {} ellipsoids, {} polytopes, {} duals, {} durations",
            ellipsoids.len(),
            sfc.len(),
            duals.len(),
            tau.len()
        )));
    }
    if m <= 1 {
        return Ok(p.clone());
    }
    let objective = WaypointObjective {
        start: *p.first(),
        goal: *p.last(),
        ellipsoids,
        sfc,
        duals,
        tau,
        kind,
        params: *params,
    };
    let anchors = p.points();
    let x0 = WaypointObjective::pack(anchors);
    let opts = LbfgsOptions { max_iters: 200, grad_tol: 1e-8, f_rel_tol: 1e-12, ..Default::default() };
    let res = minimize(|x, g| objective.eval(x, g), &x0, &opts)?;
    let target = objective.unpack(&res.x);

    let feasible: Vec<bool> = (1..m).map(|i| overlap_violation(&anchors[i], &sfc[i - 1], &sfc[i]) <= WITNESS_TOL).collect();
    let steps: Vec<f64> = (1..m)
        .map(|i| {
            if feasible[i - 1] && overlap_violation(&target[i], &sfc[i - 1], &sfc[i]) > 0.0 {
                ratio_test(&anchors[i], &target[i], [&sfc[i - 1], &sfc[i]])
            } else {
                1.0
            }
        })
        .collect();
    let place = |step: &dyn Fn(usize) -> f64| -> Vec<[f64; N]> {
        let mut pts = target.clone();
        for i in 1..m {
            let t = step(i);
            if t < 1.0 {
                pts[i] = core::array::from_fn(|k| anchors[i][k] + t * (target[i][k] - anchors[i][k]));
            }
        }
        pts
    };
    let f0 = objective.value(anchors);
    let mut pts = place(&|i| steps[i - 1]);
    if objective.value(&pts) > f0 {
        // a common step keeps the descent guarantee of the convex objective
        let t = steps.iter().copied().fold(1.0f64, f64::min);
        pts = place(&|_| t);
        if objective.value(&pts) > f0 {
            pts = anchors.to_vec();
        }
    }
    pts[0] = *p.first();
    pts[m] = *p.last();
    dedupe_into_polyline(pts, anchors)
}

/// Builds the output polyline, falling back to the input position for any
/// waypoint that collapsed onto its predecessor.
fn dedupe_into_polyline<const N: usize>(mut pts: Vec<[f64; N]>, anchors: &[[f64; N]]) -> Result<Polyline<N>> {
    let m = pts.len() - 1;
    for i in 1..=m {
        if norm(&sub(&pts[i], &pts[i - 1])) < crate::geom::MIN_POINT_SEPARATION {
            if i < m {
                pts[i] = anchors[i];
            } else {
                pts[m - 1] = anchors[m - 1];
            }
        }
    }
    Polyline::new(pts.clone()).or_else(|_| Polyline::new(anchors.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(points: Vec<[f64; 2]>) -> (Polyline<2>, Vec<Ellipsoid<2>>, Vec<Polytope<2>>, Vec<SegmentDuals>) {
        let p = Polyline::new(points).unwrap();
        let m = p.segment_count();
        let e = (0..m).map(|_| Ellipsoid::ball([0.0, 0.0], 10.0).unwrap()).collect();
        let sfc = (0..m).map(|_| Polytope::from_box(&Aabb::new([-10.0; 2], [10.0; 2]))).collect();
        (p, e, sfc, vec![SegmentDuals::default(); m])
    }

    #[test]
    fn smooth_len_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v: [f64; 3] = core::array::from_fn(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-6..2)));
            let d = 1e-4;
            assert!((smooth_len(&v, d) - norm(&v)).abs() <= d);
        }
        assert_eq!(smooth_len(&[0.0, 0.0], 1e-4), 0.0);
    }

    #[test]
    fn heuristic_examples() {
        let sq = Polyline::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(evaluate_heuristic(&sq, &[], HeuristicKind::MinDist, 3).unwrap(), 3.0);
        let straight = Polyline::new(vec![[0.0], [1.0], [2.0]]).unwrap();
        let j = evaluate_heuristic(&straight, &[1.0, 1.0], HeuristicKind::MinJerk, 3).unwrap();
        assert!(j > 0.0 && j.is_finite());
        let single = Polyline::new(vec![[0.5, 0.5]]).unwrap();
        assert_eq!(evaluate_heuristic(&single, &[], HeuristicKind::MinJerk, 3).unwrap(), 0.0);
    }

    #[test]
    fn min_dist_straightens() {
        let (p, e, sfc, y) = setup(vec![[0.0, 0.0], [1.0, 0.8], [2.0, -0.5], [3.0, 0.0]]);
        let prm = WaypointParams { rho: 1e-9, ..Default::default() };
        let out = update_waypoints(&p, &e, &sfc, &y, &[], HeuristicKind::MinDist, &prm).unwrap();
        for q in out.points() {
            assert!(q[1].abs() < 1e-3, "{q:?}");
        }
        assert_eq!(out.first(), p.first());
        assert_eq!(out.last(), p.last());
    }

    #[test]
    fn single_segment_is_unchanged() {
        let (p, e, sfc, y) = setup(vec![[0.0, 0.0], [1.0, 1.0]]);
        let out = update_waypoints(&p, &e, &sfc, &y, &[1.0], HeuristicKind::MinJerk, &WaypointParams::default()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn min_jerk_straightens_bent_path() {
        let (p, e, sfc, y) = setup(vec![[0.0, 0.0], [1.0, 0.6], [2.0, 0.0]]);
        let tau = [1.0, 1.0];
        let before = evaluate_heuristic(&p, &tau, HeuristicKind::MinJerk, 3).unwrap();
        let out = update_waypoints(&p, &e, &sfc, &y, &tau, HeuristicKind::MinJerk, &WaypointParams::default()).unwrap();
        let after = evaluate_heuristic(&out, &tau, HeuristicKind::MinJerk, 3).unwrap();
        assert!(after <= before);
        assert!(out.points()[1][1].abs() < 1e-4, "{:?}", out.points());
    }

    #[test]
    fn overlap_is_preserved() {
        // interior waypoint must stay in the thin overlap [0.9, 1.1] × [−1, 1] despite pull toward the chord
        let p = Polyline::new(vec![[0.0, 0.0], [1.0, 0.9], [2.0, 0.0]]).unwrap();
        let sfc = vec![
            Polytope::from_box(&Aabb::new([-1.0, -1.0], [1.1, 1.0])),
            Polytope::from_box(&Aabb::new([0.9, 0.5], [3.0, 1.0])),
        ];
        let e = vec![Ellipsoid::ball([0.0; 2], 5.0).unwrap(); 2];
        let y = vec![SegmentDuals::default(); 2];
        for kind in [HeuristicKind::MinDist, HeuristicKind::MinJerk] {
            let prm = WaypointParams { corridor_weight: 10.0, ..Default::default() };
            let out = update_waypoints(&p, &e, &sfc, &y, &[1.0, 1.0], kind, &prm).unwrap();
            let q = out.points()[1];
            assert!(overlap_violation(&q, &sfc[0], &sfc[1]) <= 1e-9, "{kind:?} {q:?}");
        }
    }

    #[test]
    fn sizes_are_checked() {
        let (p, e, sfc, y) = setup(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]);
        assert!(update_waypoints(&p, &e[..1], &sfc, &y, &[], HeuristicKind::MinDist, &WaypointParams::default()).is_err());
        assert!(update_waypoints(&p, &e, &sfc, &y, &[1.0], HeuristicKind::MinJerk, &WaypointParams::default()).is_err());
    }

    fn check_gradient(kind: HeuristicKind, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let m = rng.random_range(2..6usize);
            let pts: Vec<[f64; 3]> = (0..=m).map(|i| [i as f64 + rng.random_range(-0.3..0.3), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let ellipsoids: Vec<Ellipsoid<3>> = (0..m)
                .map(|i| Ellipsoid::ball([i as f64 + 0.5, 0.0, 0.0], rng.random_range(0.3..0.8)).unwrap())
                .collect();
            let sfc: Vec<Polytope<3>> = (0..m)
                .map(|i| {
                    let c = i as f64 + 0.5;
                    Polytope::from_box(&Aabb::new([c - 0.7, -0.6, -0.6], [c + 0.7, 0.6, 0.6]))
                })
                .collect();
            let duals: Vec<SegmentDuals> = (0..m).map(|_| SegmentDuals([rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])).collect();
            let tau: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.2)).collect();
            let obj = WaypointObjective {
                start: pts[0],
                goal: pts[m],
                ellipsoids: &ellipsoids,
                sfc: &sfc,
                duals: &duals,
                tau: &tau,
                kind,
                params: WaypointParams { corridor_weight: 10.0, ..Default::default() },
            };
            let x = WaypointObjective::pack(&pts);
            let mut g = vec![0.0; x.len()];
            obj.eval(&x, &mut g);
            let mut scratch = vec![0.0; x.len()];
            let h = 1e-6;
            let fd: Vec<f64> = (0..x.len())
                .map(|k| {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[k] += h;
                    b[k] -= h;
                    (obj.eval(&a, &mut scratch) - obj.eval(&b, &mut scratch)) / (2.0 * h)
                })
                .collect();
            let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            assert!(err / scale < 1e-4, "{kind:?}: {}", err / scale);
        }
    }

    #[test]
    fn min_dist_gradient() {
        check_gradient(HeuristicKind::MinDist, 3);
    }

    #[test]
    fn min_jerk_gradient() {
        check_gradient(HeuristicKind::MinJerk, 4);
    }
}
