//! Occupancy grids, robot-radius inflation, obstacle point extraction and a
//! seeded synthetic environment generator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Aabb;
use crate::linalg::dist;
use crate::{Error, Result};

/// Dense 3-D occupancy grid, x-fastest then y then z.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    dims: [usize; 3],
    resolution: f64,
    origin: [f64; 3],
    occupancy: Vec<bool>,
}

impl VoxelMap {
    /// All-free map.
    pub fn new(dims: [usize; 3], resolution: f64, origin: [f64; 3]) -> Result<Self> {
        let cells = Self::check_header(dims, resolution, origin)?;
        Ok(Self { dims, resolution, origin, occupancy: vec![false; cells] })
    }

    pub fn from_occupancy(
        dims: [usize; 3],
        resolution: f64,
        origin: [f64; 3],
        occupancy: Vec<bool>,
    ) -> Result<Self> {
        let cells = Self::check_header(dims, resolution, origin)?;
        if occupancy.len() != cells {
            return Err(Error::InconsistentSizes(format!(
                "data length mismatch: dims declare {cells} cells, got {}",
                occupancy.len()
            )));
        }
        Ok(Self { dims, resolution, origin, occupancy })
    }

    fn check_header(dims: [usize; 3], resolution: f64, origin: [f64; 3]) -> Result<usize> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("dims must be >= 1, got {dims:?}")));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidArgument(format!("resolution must be > 0, got {resolution}")));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("origin must be finite".into()));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("dims overflow".into()))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    #[inline]
    pub fn is_occupied(&self, c: [usize; 3]) -> bool {
        self.occupancy[self.index(c)]
    }

    pub fn set_occupied(&mut self, c: [usize; 3], value: bool) {
        let i = self.index(c);
        self.occupancy[i] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// World-space box covered by the grid.
    pub fn extent(&self) -> Aabb<3> {
        Aabb::new(
            self.origin,
            core::array::from_fn(|k| self.origin[k] + self.dims[k] as f64 * self.resolution),
        )
    }

    /// Center of the voxel at integer coordinates `c`.
    pub fn center(&self, c: [usize; 3]) -> [f64; 3] {
        core::array::from_fn(|k| self.origin[k] + (c[k] as f64 + 0.5) * self.resolution)
    }

    /// Voxel containing `x`; points on the upper faces map to the last voxel.
    pub fn voxel_of(&self, x: &[f64; 3]) -> Option<[usize; 3]> {
        let tol = 1e-9 * self.resolution.max(1.0);
        let mut out = [0usize; 3];
        for k in 0..3 {
            let g = (x[k] - self.origin[k]) / self.resolution;
            let hi = self.dims[k] as f64;
            if !(g >= -tol && g <= hi + tol) {
                return None;
            }
            out[k] = (g.floor().max(0.0) as usize).min(self.dims[k] - 1);
        }
        Some(out)
    }

    /// Marks every voxel whose center lies within `radius` of an occupied
    /// voxel center.
    pub fn inflate(&self, radius: f64) -> VoxelMap {
        let reach = (radius / self.resolution + 1e-9).floor() as isize;
        if reach <= 0 || radius <= 0.0 {
            return self.clone();
        }
        let r2 = (radius / self.resolution) * (radius / self.resolution) + 1e-9;
        let mut offsets = Vec::new();
        for dz in -reach..=reach {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    if ((dx * dx + dy * dy + dz * dz) as f64) <= r2 {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
        let mut out = self.clone();
        let dims = self.dims.map(|d| d as isize);
        for (idx, _) in self.occupancy.iter().enumerate().filter(|(_, &o)| o) {
            let c = self.coords(idx).map(|v| v as isize);
            for off in &offsets {
                let n = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
                if (0..3).all(|k| n[k] >= 0 && n[k] < dims[k]) {
                    let i = out.index(n.map(|v| v as usize));
                    out.occupancy[i] = true;
                }
            }
        }
        out
    }

    /// Marks voxels whose centers lie within `radius` of the outer faces of
    /// the grid, treating the boundary as an obstacle.
    pub fn block_border(&mut self, radius: f64) {
        let ext = self.extent();
        for idx in 0..self.occupancy.len() {
            let c = self.center(self.coords(idx));
            let near = (0..3).any(|k| c[k] - ext.min[k] < radius || ext.max[k] - c[k] < radius);
            if near {
                self.occupancy[idx] = true;
            }
        }
    }

    /// Centers of occupied voxels inside `window`, x-fastest.
    pub fn occupied_points(&self, window: &Aabb<3>) -> ObstacleCloud {
        let mut points = Vec::new();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for k in 0..3 {
            let a = ((window.min[k] - self.origin[k]) / self.resolution - 0.5).ceil();
            let b = ((window.max[k] - self.origin[k]) / self.resolution - 0.5).floor();
            if b < 0.0 || a > (self.dims[k] - 1) as f64 || a > b {
                return ObstacleCloud { points };
            }
            lo[k] = a.max(0.0) as usize;
            hi[k] = (b as usize).min(self.dims[k] - 1);
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                let row = self.index([0, y, z]);
                for x in lo[0]..=hi[0] {
                    if self.occupancy[row + x] {
                        let c = self.center([x, y, z]);
                        if window.contains(&c) {
                            points.push(c);
                        }
                    }
                }
            }
        }
        ObstacleCloud { points }
    }

    /// Supercover walk from `a` to `b`: true iff every voxel the segment
    /// touches is free. Where the segment crosses an edge or corner exactly,
    /// the voxels sharing that edge are checked as well.
    pub fn segment_free(&self, a: &[f64; 3], b: &[f64; 3]) -> Result<bool> {
        let va = self.voxel_of(a).ok_or(Error::OutOfBounds)?;
        let vb = self.voxel_of(b).ok_or(Error::OutOfBounds)?;
        let ga: [f64; 3] = core::array::from_fn(|k| (a[k] - self.origin[k]) / self.resolution);
        let gb: [f64; 3] = core::array::from_fn(|k| (b[k] - self.origin[k]) / self.resolution);
        let dims = self.dims.map(|d| d as isize);
        let mut v = va.map(|c| c as isize);
        let end = vb.map(|c| c as isize);
        let mut step = [0isize; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for k in 0..3 {
            let d = gb[k] - ga[k];
            if d > 0.0 {
                step[k] = 1;
                t_max[k] = ((v[k] + 1) as f64 - ga[k]) / d;
                t_delta[k] = 1.0 / d;
            } else if d < 0.0 {
                step[k] = -1;
                t_max[k] = (v[k] as f64 - ga[k]) / d;
                t_delta[k] = -1.0 / d;
            }
        }
        let in_bounds = |c: &[isize; 3]| (0..3).all(|k| c[k] >= 0 && c[k] < dims[k]);
        let occupied = |c: &[isize; 3]| self.is_occupied(c.map(|x| x as usize));
        let budget = (0..3).map(|k| (end[k] - v[k]).unsigned_abs()).sum::<usize>() + 4;
        for _ in 0..=budget {
            if occupied(&v) {
                return Ok(false);
            }
            if v == end {
                return Ok(true);
            }
            let t = t_max.iter().copied().fold(f64::INFINITY, f64::min);
            if t > 1.0 + 1e-12 {
                return Ok(true);
            }
            let tied: Vec<usize> =
                (0..3).filter(|&k| step[k] != 0 && (t_max[k] - t).abs() <= 1e-12).collect();
            if tied.len() > 1 {
                for &k in &tied {
                    let mut side = v;
                    side[k] += step[k];
                    if in_bounds(&side) && occupied(&side) {
                        return Ok(false);
                    }
                }
            }
            for &k in &tied {
                v[k] += step[k];
                t_max[k] += t_delta[k];
            }
            if !in_bounds(&v) {
                return Ok(true);
            }
        }
        Ok(true)
    }
}

/// Centers of occupied voxels, used as point obstacles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleCloud {
    points: Vec<[f64; 3]>,
}

impl ObstacleCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Primitive shapes placed by the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Box(Aabb<3>),
    /// Vertical cylinder.
    Cylinder { center: [f64; 2], radius: f64, z_min: f64, z_max: f64 },
}

impl Obstacle {
    pub fn contains(&self, x: &[f64; 3]) -> bool {
        match *self {
            Obstacle::Box(b) => b.contains(x),
            Obstacle::Cylinder { center, radius, z_min, z_max } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy <= radius * radius && x[2] >= z_min && x[2] <= z_max
            }
        }
    }

    pub fn bounding_box(&self) -> Aabb<3> {
        match *self {
            Obstacle::Box(b) => b,
            Obstacle::Cylinder { center, radius, z_min, z_max } => Aabb::new(
                [center[0] - radius, center[1] - radius, z_min],
                [center[0] + radius, center[1] + radius, z_max],
            ),
        }
    }
}

/// Knobs of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    /// World extent (m), anchored at the origin.
    pub size: [f64; 3],
    pub resolution: f64,
    pub obstacle_count: usize,
    /// Fraction of boxes; the remainder are vertical cylinders.
    pub box_fraction: f64,
    /// Footprint side length / diameter range (m).
    pub min_extent: f64,
    pub max_extent: f64,
    /// Voxels with centers within this radius of a `keep_clear` point are freed.
    pub clearance: f64,
    pub keep_clear: Vec<[f64; 3]>,
    pub seed: u64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            size: [20.0, 20.0, 5.0],
            resolution: 0.1,
            obstacle_count: 30,
            box_fraction: 0.5,
            min_extent: 0.5,
            max_extent: 2.5,
            clearance: 1.0,
            keep_clear: Vec::new(),
            seed: 0,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        if self.size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument(format!("size must be positive, got {:?}", self.size)));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.box_fraction) {
            return Err(Error::InvalidArgument("box fraction must lie in [0, 1]".into()));
        }
        if !(self.min_extent > 0.0 && self.max_extent >= self.min_extent) {
            return Err(Error::InvalidArgument("obstacle extents must satisfy 0 < min <= max".into()));
        }
        if self.clearance < 0.0 {
            return Err(Error::InvalidArgument("clearance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.size.map(|s| ((s / self.resolution).round() as usize).max(1))
    }
}

/// Draws the obstacle shapes for `params` (deterministic in the seed).
pub fn sample_obstacles(params: &EnvParams) -> Vec<Obstacle> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let [sx, sy, sz] = params.size;
    let (lo, hi) = (params.min_extent, params.max_extent);
    (0..params.obstacle_count)
        .map(|_| {
            let is_box = rng.random::<f64>() < params.box_fraction;
            let cx = rng.random::<f64>() * sx;
            let cy = rng.random::<f64>() * sy;
            if is_box {
                let wx = rng.random_range(lo..=hi);
                let wy = rng.random_range(lo..=hi);
                let wz = rng.random_range(lo..=hi);
                let cz = rng.random::<f64>() * sz;
                Obstacle::Box(Aabb::new(
                    [cx - wx / 2.0, cy - wy / 2.0, cz - wz / 2.0],
                    [cx + wx / 2.0, cy + wy / 2.0, cz + wz / 2.0],
                ))
            } else {
                let radius = rng.random_range(lo..=hi) / 2.0;
                let height = rng.random_range(0.5..=1.0) * sz;
                Obstacle::Cylinder { center: [cx, cy], radius, z_min: 0.0, z_max: height }
            }
        })
        .collect()
}

/// Marks every voxel whose center lies inside `obstacle`.
pub fn rasterize(map: &mut VoxelMap, obstacle: &Obstacle) {
    let bb = obstacle.bounding_box().intersection(&map.extent());
    if bb.is_empty() {
        return;
    }
    let res = map.resolution();
    let origin = map.origin();
    let dims = map.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        lo[k] = ((bb.min[k] - origin[k]) / res - 0.5).ceil().max(0.0) as usize;
        let h = ((bb.max[k] - origin[k]) / res - 0.5).floor();
        if h < 0.0 {
            return;
        }
        hi[k] = (h as usize).min(dims[k] - 1);
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let c = [x, y, z];
                if obstacle.contains(&map.center(c)) {
                    map.set_occupied(c, true);
                }
            }
        }
    }
}

/// Seeded random environment: rasterized boxes and cylinders, with spheres of
/// `clearance` around each `keep_clear` point forced free.
pub fn gen_random_env(params: &EnvParams) -> Result<VoxelMap> {
    params.validate()?;
    let mut map = VoxelMap::new(params.dims(), params.resolution, [0.0; 3])?;
    for obstacle in sample_obstacles(params) {
        rasterize(&mut map, &obstacle);
    }
    if params.clearance > 0.0 && !params.keep_clear.is_empty() {
        for idx in 0..map.len() {
            if map.occupancy[idx] {
                let c = map.center(map.coords(idx));
                if params.keep_clear.iter().any(|p| dist(p, &c) <= params.clearance) {
                    map.occupancy[idx] = false;
                }
            }
        }
    }
    Ok(map)
}
