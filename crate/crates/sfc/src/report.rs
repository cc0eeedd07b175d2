//! JSON run reports. Wall-clock values live only under `timing`.

use serde::{Deserialize, Serialize};
use sfc_core::frontend::{PlanQuery, PLANNER_ID};
use sfc_core::solver::{CoverResult, IterationMetrics, SolverConfig};
use sfc_core::traj::TimeAllocation;
use sfc_core::waypoint_opt::HeuristicKind;

pub fn heuristic_name(kind: HeuristicKind) -> &'static str {
    match kind {
        HeuristicKind::MinDist => "dist",
        HeuristicKind::MinJerk => "jerk",
    }
}

pub fn parse_heuristic(s: &str) -> Option<HeuristicKind> {
    match s {
        "dist" => Some(HeuristicKind::MinDist),
        "jerk" => Some(HeuristicKind::MinJerk),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub heuristic: String,
    pub w_v: f64,
    pub w_c: f64,
    pub rho: f64,
    pub k_max: usize,
    pub outer_max: usize,
    pub volume_rel_tol: f64,
    pub alpha: f64,
    pub local_range: f64,
    pub eps: f64,
    pub v_nom: f64,
    pub mu_corr: f64,
    pub delta: f64,
    pub order: usize,
    pub recompute_tau: bool,
    pub time_allocation: String,
    pub volume_samples: usize,
    pub check_samples: usize,
    pub check_tol: f64,
}

impl From<&SolverConfig> for ConfigEcho {
    fn from(c: &SolverConfig) -> Self {
        Self {
            heuristic: heuristic_name(c.heuristic).into(),
            w_v: c.w_v,
            w_c: c.w_c,
            rho: c.rho,
            k_max: c.k_max,
            outer_max: c.outer_max,
            volume_rel_tol: c.volume_rel_tol,
            alpha: c.alpha,
            local_range: c.local_range,
            eps: c.eps,
            v_nom: c.v_nom,
            mu_corr: c.mu_corr,
            delta: c.delta,
            order: c.order,
            recompute_tau: c.recompute_tau,
            time_allocation: match c.time_allocation {
                TimeAllocation::Proportional => "proportional",
                TimeAllocation::Uniform => "uniform",
            }
            .into(),
            volume_samples: c.volume_samples,
            check_samples: c.check_samples,
            check_tol: c.check_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEcho {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    /// Distance from the requested endpoints to the voxel centers planned from.
    pub start_snap: f64,
    pub goal_snap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub planner: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub query: QueryEcho,
    pub segments: usize,
    pub corridor_violation: f64,
    pub pinned_knots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub it: usize,
    pub vol_e: f64,
    pub vol_p: f64,
    pub overlap: Vec<f64>,
    pub path_len: f64,
    pub traj_cost: f64,
    pub lagrangian: Vec<f64>,
}

impl From<&IterationMetrics> for IterationRecord {
    fn from(m: &IterationMetrics) -> Self {
        Self {
            it: m.iteration,
            vol_e: m.vol_e,
            vol_p: m.vol_p,
            overlap: m.overlap.clone(),
            path_len: m.path_len,
            traj_cost: m.traj_cost,
            lagrangian: m.lagrangian.clone(),
        }
    }
}

/// Series divided by their per-run maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub vol_e: Vec<f64>,
    pub vol_p: Vec<f64>,
}

pub fn normalize(series: &[f64]) -> Vec<f64> {
    let max = series.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        series.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; series.len()]
    }
}

impl Normalized {
    pub fn from_metrics(metrics: &[IterationMetrics]) -> Self {
        let e: Vec<f64> = metrics.iter().map(|m| m.vol_e).collect();
        let p: Vec<f64> = metrics.iter().map(|m| m.vol_p).collect();
        Self { vol_e: normalize(&e), vol_p: normalize(&p) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeRecord {
    #[serde(rename = "A")]
    pub a: Vec<[f64; 3]>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfcRecord {
    pub polytopes: Vec<PolytopeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    /// Lower-triangular rows of L.
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    pub d: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub dt: f64,
    pub coeffs: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub s: usize,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_s: f64,
    pub per_iteration_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: Meta,
    pub iterations: Vec<IterationRecord>,
    pub normalized: Normalized,
    pub sfc: SfcRecord,
    pub ellipsoids: Vec<EllipsoidRecord>,
    pub waypoints: Vec<[f64; 3]>,
    pub trajectory: TrajectoryRecord,
    pub timing: Timing,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl RunReport {
    pub fn new(result: &CoverResult, query: &PlanQuery, cfg: &SolverConfig, total_s: f64) -> Self {
        let meta = Meta {
            version: env!("CARGO_PKG_VERSION").into(),
            planner: PLANNER_ID.into(),
            seed: cfg.seed,
            config: cfg.into(),
            query: QueryEcho {
                start: query.start,
                goal: query.goal,
                start_snap: dist(&query.start, result.initial_path.first()),
                goal_snap: dist(&query.goal, result.initial_path.last()),
            },
            segments: result.segment_count(),
            corridor_violation: result.corridor_violation,
            pinned_knots: result.pinned_knots,
        };
        let polytopes = result
            .sfc
            .iter()
            .map(|p| PolytopeRecord { a: p.normals().to_vec(), b: p.offsets().to_vec() })
            .collect();
        let ellipsoids = result
            .ellipsoids
            .iter()
            .map(|e| {
                let l = e.factor();
                EllipsoidRecord { l: (0..3).map(|i| l[i][..=i].to_vec()).collect(), d: *e.center() }
            })
            .collect();
        let trajectory = TrajectoryRecord {
            s: result.trajectory.order(),
            segments: result
                .trajectory
                .segments()
                .iter()
                .map(|s| SegmentRecord { dt: s.dt, coeffs: s.coeffs.clone() })
                .collect(),
        };
        Self {
            meta,
            iterations: result.metrics.iter().map(IterationRecord::from).collect(),
            normalized: Normalized::from_metrics(&result.metrics),
            sfc: SfcRecord { polytopes },
            ellipsoids,
            waypoints: result.waypoints.points().to_vec(),
            trajectory,
            timing: Timing { total_s, per_iteration_s: result.metrics.iter().map(|m| m.elapsed).collect() },
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// JSON with the `timing` object removed.
    pub fn metrics_json(&self) -> serde_json::Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string(&v)
    }
}
