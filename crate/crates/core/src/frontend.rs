//! Initial path generation, waypoint upsampling and ellipsoid seeding.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::env::VoxelMap;
use crate::geom::{Ellipsoid, Polyline};
use crate::linalg::{cholesky, dist, lerp, norm, sub};
use crate::{Error, Result};

/// Identifier recorded in run metadata.
pub const PLANNER_ID: &str = "astar26-shortcut";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanQuery {
    pub start: [f64; 3],
    pub goal: [f64; 3],
    /// Required clearance ε (m).
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub path: Polyline<3>,
    /// Distance from the requested start/goal to the voxel centers used.
    pub start_snap: f64,
    pub goal_snap: f64,
}

/// Inflation radius used for planning: ε plus the voxel half-diagonal, so
/// every point of a free-voxel walk keeps ε from occupied voxel centers.
pub fn planning_radius(map: &VoxelMap, clearance: f64) -> f64 {
    clearance + map.resolution() * 3f64.sqrt() / 2.0
}

/// Map used by the planner: occupied voxels grown by [`planning_radius`] and
/// the border treated as an obstacle.
pub fn planning_map(map: &VoxelMap, clearance: f64) -> VoxelMap {
    let r = planning_radius(map, clearance);
    let mut m = map.inflate(r);
    m.block_border(r);
    m
}

#[derive(Clone, Copy, PartialEq)]
struct Node {
    f: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then on index for determinism
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over the 26-connected grid without corner cutting, followed by greedy
/// line-of-sight shortcutting.
pub fn plan_path(map: &VoxelMap, q: &PlanQuery) -> Result<PlannedPath> {
    if !(q.clearance >= 0.0) {
        return Err(Error::InvalidArgument("clearance must be non-negative".into()));
    }
    let grid = planning_map(map, q.clearance);
    let start = grid
        .voxel_of(&q.start)
        .ok_or_else(|| Error::InfeasibleQuery("start outside the map".into()))?;
    let goal = grid
        .voxel_of(&q.goal)
        .ok_or_else(|| Error::InfeasibleQuery("goal outside the map".into()))?;
    if grid.is_occupied(start) {
        return Err(Error::InfeasibleQuery(format!("start {:?} is not free", q.start)));
    }
    if grid.is_occupied(goal) {
        return Err(Error::InfeasibleQuery(format!("goal {:?} is not free", q.goal)));
    }
    if start == goal {
        return Err(Error::InfeasibleQuery("start and goal share a voxel".into()));
    }

    let cells = astar(&grid, start, goal)
        .ok_or_else(|| Error::InfeasibleQuery("no path on the grid".into()))?;
    let centers: Vec<[f64; 3]> = cells.iter().map(|&c| grid.center(c)).collect();
    let path = shortcut(&grid, &centers)?;
    Ok(PlannedPath {
        start_snap: dist(&q.start, &path[0]),
        goal_snap: dist(&q.goal, &path[path.len() - 1]),
        path: Polyline::new(path)?,
    })
}

fn astar(grid: &VoxelMap, start: [usize; 3], goal: [usize; 3]) -> Option<Vec<[usize; 3]>> {
    let dims = grid.dims().map(|d| d as isize);
    let mut g_cost = vec![f64::INFINITY; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let h = |c: [usize; 3]| {
        let d: [f64; 3] = core::array::from_fn(|k| c[k] as f64 - goal[k] as f64);
        norm(&d)
    };
    let mut moves = Vec::with_capacity(26);
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    let len = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    moves.push(([dx, dy, dz], len));
                }
            }
        }
    }
    let s = grid.index(start);
    let t = grid.index(goal);
    g_cost[s] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Node { f: h(start), idx: s });
    while let Some(Node { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        if idx == t {
            break;
        }
        closed[idx] = true;
        let c = grid.coords(idx).map(|v| v as isize);
        'moves: for (m, len) in &moves {
            let n = [c[0] + m[0], c[1] + m[1], c[2] + m[2]];
            if (0..3).any(|k| n[k] < 0 || n[k] >= dims[k]) {
                continue;
            }
            // every voxel of the unit cube spanned by the move must be free
            for mask in 1u8..8 {
                let mut v = c;
                let mut valid = true;
                for k in 0..3 {
                    if mask & (1 << k) != 0 {
                        if m[k] == 0 {
                            valid = false;
                            break;
                        }
                        v[k] += m[k];
                    }
                }
                if valid && grid.is_occupied(v.map(|x| x as usize)) {
                    continue 'moves;
                }
            }
            let nu = n.map(|x| x as usize);
            let ni = grid.index(nu);
            if closed[ni] {
                continue;
            }
            let cand = g_cost[idx] + len;
            if cand < g_cost[ni] {
                g_cost[ni] = cand;
                parent[ni] = idx;
                open.push(Node { f: cand + h(nu), idx: ni });
            }
        }
    }
    if !g_cost[t].is_finite() {
        return None;
    }
    let mut cells = vec![goal];
    let mut cur = t;
    while cur != s {
        cur = parent[cur];
        cells.push(grid.coords(cur));
    }
    cells.reverse();
    Some(cells)
}

/// Greedy line-of-sight pruning: from each kept vertex jump to the farthest
/// later vertex that is still visible.
fn shortcut(grid: &VoxelMap, pts: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let mut out = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut next = i + 1;
        for j in (i + 2..pts.len()).rev() {
            if grid.segment_free(&pts[i], &pts[j])? {
                next = j;
                break;
            }
        }
        out.push(pts[next]);
        i = next;
    }
    Ok(out)
}

/// Splits every segment of length `ℓ` into `⌈ℓ/α⌉` equal pieces.
pub fn upsample<const N: usize>(path: &Polyline<N>, alpha: f64) -> Result<Polyline<N>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("upsample threshold must be > 0, got {alpha}")));
    }
    let pts = path.points();
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let len = dist(&w[0], &w[1]);
        let pieces = ((len / alpha) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for k in 1..pieces {
            out.push(lerp(&w[0], &w[1], k as f64 / pieces as f64));
        }
        out.push(w[1]);
    }
    Polyline::new(out)
}

/// One ellipsoid per segment, centered at the segment midpoint with
/// `L Lᵀ = μμᵀ ℓ²/4 + (I − μμᵀ) ε²`.
pub fn init_ellipsoids<const N: usize>(path: &Polyline<N>, eps: f64) -> Result<Vec<Ellipsoid<N>>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("clearance must be > 0, got {eps}")));
    }
    path.points()
        .windows(2)
        .map(|w| {
            let delta = sub(&w[1], &w[0]);
            let len = norm(&delta);
            if !(len > 0.0) {
                return Err(Error::InvalidArgument("zero-length segment".into()));
            }
            let mu: [f64; N] = core::array::from_fn(|k| delta[k] / len);
            let shape: [[f64; N]; N] = core::array::from_fn(|i| {
                core::array::from_fn(|j| {
                    let outer = mu[i] * mu[j];
                    let eye = if i == j { 1.0 } else { 0.0 };
                    outer * len * len / 4.0 + (eye - outer) * eps * eps
                })
            });
            let l = cholesky(&shape).ok_or(Error::Singular("ellipsoid shape matrix"))?;
            Ellipsoid::new(l, lerp(&w[0], &w[1], 0.5))
        })
        .collect()
}
