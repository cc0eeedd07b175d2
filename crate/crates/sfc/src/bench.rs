//! Seeded benchmark batches on random environments.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfc_core::env::{gen_random_env, EnvParams, VoxelMap};
use sfc_core::frontend::{plan_path, PlanQuery};
use sfc_core::solver::{optimize_cover_with_clock, CoverResult, IterationMetrics, SolverConfig};
use sfc_core::waypoint_opt::HeuristicKind;

use crate::report::{heuristic_name, Normalized};
use crate::{Result, SfcError, WallClock};

/// Keeps sampled endpoints away from the world boundary.
pub const ENDPOINT_MARGIN: f64 = 0.5;
const MAX_PAIR_DRAWS: usize = 10_000;
const MAX_ENV_ATTEMPTS: usize = 50;

/// One random environment with a feasible start/goal query.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub env_seed: u64,
    pub map: VoxelMap,
    pub query: PlanQuery,
    /// Environments drawn before one admitted a path.
    pub attempts: usize,
}

fn draw_point(rng: &mut ChaCha8Rng, size: &[f64; 3]) -> [f64; 3] {
    core::array::from_fn(|k| rng.random_range(ENDPOINT_MARGIN..size[k] - ENDPOINT_MARGIN))
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Draws trial `index` of the batch seeded by `seed`. Start and goal are
/// uniform in the world box shrunk by [`ENDPOINT_MARGIN`] and at least
/// `min_dist` apart; environments without a path at clearance `eps` are
/// redrawn.
pub fn sample_trial(seed: u64, index: usize, min_dist: f64, env: &EnvParams, eps: f64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let size = env.size;
    if size.iter().any(|&s| s <= 2.0 * ENDPOINT_MARGIN) {
        return Err(SfcError::parse("size", "world too small for the endpoint margin"));
    }
    let mut last_err = None;
    for attempt in 1..=MAX_ENV_ATTEMPTS {
        let (start, goal) = (0..MAX_PAIR_DRAWS)
            .map(|_| (draw_point(&mut rng, &size), draw_point(&mut rng, &size)))
            .find(|(s, g)| dist(s, g) >= min_dist)
            .ok_or_else(|| SfcError::parse("min-dist", format!("no endpoint pair {min_dist} m apart fits the world")))?;
        let env_seed = rng.random::<u64>();
        let params = EnvParams { keep_clear: vec![start, goal], seed: env_seed, ..env.clone() };
        let map = gen_random_env(&params)?;
        let query = PlanQuery { start, goal, clearance: eps };
        match plan_path(&map, &query) {
            Ok(_) => return Ok(Trial { index, env_seed, map, query, attempts: attempt }),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt").into())
}

/// Per-trial solver variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub heuristic: HeuristicKind,
    pub local_range: f64,
    pub alpha: f64,
}

impl Variant {
    pub fn apply(&self, base: &SolverConfig) -> SolverConfig {
        SolverConfig { heuristic: self.heuristic, local_range: self.local_range, alpha: self.alpha, ..base.clone() }
    }
}

/// Values swept per key; `None` keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sweep {
    pub local_range: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
}

/// Parses `l=1.5,2 alpha=2,3`.
pub fn parse_sweep(s: &str) -> Result<Sweep> {
    let (mut l, mut alpha) = (None, None);
    for part in s.split_whitespace() {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| SfcError::parse("sweep", format!("expected key=values, got '{part}'")))?;
        let values = values
            .split(',')
            .map(|v| v.parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| SfcError::parse("sweep", format!("bad values in '{part}'")))?;
        match key {
            "l" => l = Some(values),
            "alpha" => alpha = Some(values),
            other => return Err(SfcError::parse("sweep", format!("unknown key '{other}'"))),
        }
    }
    Ok(Sweep { local_range: l, alpha })
}

/// Cartesian product heuristic × l × alpha, in that nesting order.
pub fn variants(heuristics: &[HeuristicKind], ls: &[f64], alphas: &[f64]) -> Vec<Variant> {
    let mut out = Vec::new();
    for &heuristic in heuristics {
        for &local_range in ls {
            for &alpha in alphas {
                out.push(Variant { heuristic, local_range, alpha });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub vol_e: f64,
    pub vol_p: f64,
    pub path_len: f64,
    pub traj_cost: f64,
    pub segments: usize,
}

impl Snapshot {
    fn of(m: &IterationMetrics) -> Self {
        Self {
            vol_e: m.vol_e,
            vol_p: m.vol_p,
            path_len: m.path_len,
            traj_cost: m.traj_cost,
            segments: m.overlap.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub heuristic: String,
    pub local_range: f64,
    pub alpha: f64,
    pub env_seed: Option<u64>,
    pub start: Option<[f64; 3]>,
    pub goal: Option<[f64; 3]>,
    pub error: Option<String>,
    pub baseline: Option<Snapshot>,
    #[serde(rename = "final")]
    pub last: Option<Snapshot>,
    pub iterations: usize,
    pub normalized: Option<Normalized>,
    pub corridor_violation: Option<f64>,
    pub pinned_knots: Option<usize>,
    pub timing: TrialTiming,
}

impl TrialRecord {
    fn failed(trial: usize, v: &Variant, error: String) -> Self {
        Self {
            trial,
            heuristic: heuristic_name(v.heuristic).into(),
            local_range: v.local_range,
            alpha: v.alpha,
            env_seed: None,
            start: None,
            goal: None,
            error: Some(error),
            baseline: None,
            last: None,
            iterations: 0,
            normalized: None,
            corridor_violation: None,
            pinned_knots: None,
            timing: TrialTiming { total_s: 0.0 },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// JSON line with the `timing` object removed.
    pub fn metrics_json(&self) -> serde_json::Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string(&v)
    }
}

/// Runs one variant on one trial and returns the result with its wall time.
pub fn run_variant(trial: &Trial, cfg: &SolverConfig) -> (sfc_core::Result<CoverResult>, f64) {
    let clock = WallClock::start();
    let result = optimize_cover_with_clock(&trial.map, &trial.query, cfg, &clock);
    (result, sfc_core::solver::Clock::seconds(&clock))
}

pub fn record(trial: &Trial, v: &Variant, result: sfc_core::Result<CoverResult>, total_s: f64) -> TrialRecord {
    let mut rec = TrialRecord::failed(trial.index, v, String::new());
    rec.env_seed = Some(trial.env_seed);
    rec.start = Some(trial.query.start);
    rec.goal = Some(trial.query.goal);
    rec.timing.total_s = total_s;
    match result {
        Ok(r) => {
            rec.error = None;
            rec.baseline = r.metrics.first().map(Snapshot::of);
            rec.last = r.metrics.last().map(|m| Snapshot { segments: r.segment_count(), ..Snapshot::of(m) });
            rec.iterations = r.metrics.len().saturating_sub(1);
            rec.normalized = Some(Normalized::from_metrics(&r.metrics));
            rec.corridor_violation = Some(r.corridor_violation);
            rec.pinned_knots = Some(r.pinned_knots);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub trials: usize,
    pub seed: u64,
    pub min_dist: f64,
    pub env: EnvParams,
    pub solver: SolverConfig,
    pub variants: Vec<Variant>,
    pub jobs: usize,
}

/// Runs every variant on every trial. Records come back ordered by
/// (trial, variant) regardless of `jobs`; failures are recorded, not raised.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<TrialRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| SfcError::parse("jobs", e.to_string()))?;
    let records = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .flat_map_iter(|i| {
                let trial = sample_trial(cfg.seed, i, cfg.min_dist, &cfg.env, cfg.solver.eps);
                cfg.variants
                    .iter()
                    .map(|v| match &trial {
                        Ok(t) => {
                            let (result, secs) = run_variant(t, &v.apply(&cfg.solver));
                            log::info!("trial {i} {} l={} alpha={} done in {secs:.2}s", heuristic_name(v.heuristic), v.local_range, v.alpha);
                            record(t, v, result, secs)
                        }
                        Err(e) => TrialRecord::failed(i, v, e.to_string()),
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    Ok(records)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Mean and sample variance per variant.
pub fn summary_table(records: &[TrialRecord], variants: &[Variant]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<5} {:>5} {:>5} {:>4} {:>4}  {:>21}  {:>21}  {:>21}  {:>21}  {:>15}  {:>15}",
        "heur", "l", "alpha", "ok", "fail", "vol_e mean/var", "vol_p mean/var", "J0 mean/var", "J mean/var", "M mean/var", "time mean/var"
    );
    for v in variants {
        let name = heuristic_name(v.heuristic);
        let group: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.heuristic == name && r.local_range == v.local_range && r.alpha == v.alpha)
            .collect();
        let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
        let col = |f: &dyn Fn(&TrialRecord) -> f64| mean_var(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let fin = |r: &TrialRecord| r.last.clone().expect("ok record has metrics");
        let ve = col(&|r| fin(r).vol_e);
        let vp = col(&|r| fin(r).vol_p);
        let j0 = col(&|r| r.baseline.as_ref().map_or(f64::NAN, |b| b.traj_cost));
        let j = col(&|r| fin(r).traj_cost);
        let m = col(&|r| fin(r).segments as f64);
        let t = col(&|r| r.timing.total_s);
        let _ = writeln!(
            out,
            "{:<5} {:>5} {:>5} {:>4} {:>4}  {:>10.3} {:>10.3}  {:>10.3} {:>10.3}  {:>10.3} {:>10.3}  {:>10.3} {:>10.3}  {:>7.2} {:>7.2}  {:>7.3} {:>7.3}",
            name,
            v.local_range,
            v.alpha,
            ok.len(),
            group.len() - ok.len(),
            ve.0,
            ve.1,
            vp.0,
            vp.1,
            j0.0,
            j0.1,
            j.0,
            j.1,
            m.0,
            m.1,
            t.0,
            t.1
        );
    }
    out
}
