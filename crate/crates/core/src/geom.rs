//! Geometric primitives: ellipsoids, H-polytopes, polylines and boxes.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dist, dot, mul_lower, mul_lower_t, norm, solve_lower, solve_lower_t, sub};
use crate::{Error, Result};

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<const N: usize> {
    pub min: [f64; N],
    pub max: [f64; N],
}

impl<const N: usize> Aabb<N> {
    pub fn new(min: [f64; N], max: [f64; N]) -> Self {
        Self { min, max }
    }

    /// Product of the (non-negative) extents.
    pub fn volume(&self) -> f64 {
        (0..N).map(|k| (self.max[k] - self.min[k]).max(0.0)).product()
    }

    pub fn is_empty(&self) -> bool {
        (0..N).any(|k| self.max[k] < self.min[k])
    }

    pub fn contains(&self, x: &[f64; N]) -> bool {
        (0..N).all(|k| x[k] >= self.min[k] && x[k] <= self.max[k])
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            min: core::array::from_fn(|k| self.min[k] - margin),
            max: core::array::from_fn(|k| self.max[k] + margin),
        }
    }

    /// Intersection; may be empty (check with [`Aabb::is_empty`]).
    pub fn intersection(&self, other: &Self) -> Self {
        Self {
            min: core::array::from_fn(|k| self.min[k].max(other.min[k])),
            max: core::array::from_fn(|k| self.max[k].min(other.max[k])),
        }
    }

    pub fn diagonal(&self) -> f64 {
        norm(&sub(&self.max, &self.min))
    }
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// `max(0, v)²`
#[inline]
pub fn hinge_sq(v: f64) -> f64 {
    let m = v.max(0.0);
    m * m
}

/// Derivative of [`hinge_sq`].
#[inline]
pub fn hinge_sq_grad(v: f64) -> f64 {
    2.0 * v.max(0.0)
}

/// Ellipsoid `{d + L u : ‖u‖ ≤ 1}` with `L` lower triangular and a strictly
/// positive diagonal. Its shape matrix is `L Lᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid<const N: usize> {
    l: [[f64; N]; N],
    d: [f64; N],
}

impl<const N: usize> Ellipsoid<N> {
    /// Validates the Cholesky factor. Strict-upper entries must be zero
    /// (to 1e-12) and diagonal entries positive.
    pub fn new(l: [[f64; N]; N], d: [f64; N]) -> Result<Self> {
        let mut l = l;
        for i in 0..N {
            if !(l[i][i] > 1e-12) || !l[i][i].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "ellipsoid factor diagonal entry {i} is {} (must be > 0)",
                    l[i][i]
                )));
            }
            for j in i + 1..N {
                if l[i][j].abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "ellipsoid factor is not lower triangular at ({i},{j})"
                    )));
                }
                l[i][j] = 0.0;
            }
        }
        if l.iter().flatten().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite ellipsoid parameter".into()));
        }
        Ok(Self { l, d })
    }

    /// Construction without validation; callers guarantee the invariant.
    pub(crate) fn from_parts(l: [[f64; N]; N], d: [f64; N]) -> Self {
        debug_assert!((0..N).all(|i| l[i][i] > 0.0));
        Self { l, d }
    }

    pub fn is_finite(&self) -> bool {
        self.l.iter().flatten().chain(self.d.iter()).all(|v| v.is_finite())
    }

    pub fn ball(center: [f64; N], radius: f64) -> Result<Self> {
        let mut l = [[0.0; N]; N];
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = radius;
        }
        Self::new(l, center)
    }

    pub fn factor(&self) -> &[[f64; N]; N] {
        &self.l
    }

    pub fn center(&self) -> &[f64; N] {
        &self.d
    }

    /// Unit-ball coordinates `L⁻¹(x − d)`.
    pub fn to_unit(&self, x: &[f64; N]) -> [f64; N] {
        solve_lower(&self.l, &sub(x, &self.d))
    }

    /// `d + L u`
    pub fn from_unit(&self, u: &[f64; N]) -> [f64; N] {
        let v = mul_lower(&self.l, u);
        core::array::from_fn(|k| self.d[k] + v[k])
    }

    /// `‖L⁻¹(x − d)‖ − 1`: negative inside, zero on the boundary.
    pub fn residual(&self, x: &[f64; N]) -> f64 {
        norm(&self.to_unit(x)) - 1.0
    }

    /// Residual and its gradient with respect to `x`. At the center the
    /// gradient is set to zero.
    pub fn residual_with_grad(&self, x: &[f64; N]) -> (f64, [f64; N]) {
        let y = self.to_unit(x);
        let r = norm(&y);
        if r == 0.0 {
            return (-1.0, [0.0; N]);
        }
        let g = solve_lower_t(&self.l, &core::array::from_fn(|k| y[k] / r));
        (r - 1.0, g)
    }

    pub fn log_det(&self) -> f64 {
        (0..N).map(|i| self.l[i][i].ln()).sum()
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(N) * (0..N).map(|i| self.l[i][i]).product::<f64>()
    }

    /// `max_{x∈E} a·x = ‖Lᵀ a‖ + a·d`
    pub fn support(&self, a: &[f64; N]) -> f64 {
        norm(&mul_lower_t(&self.l, a)) + dot(a, &self.d)
    }

    /// Per-axis half extents (row norms of `L`).
    pub fn half_extents(&self) -> [f64; N] {
        core::array::from_fn(|i| norm(&self.l[i]))
    }

    pub fn bounding_box(&self) -> Aabb<N> {
        let h = self.half_extents();
        Aabb::new(
            core::array::from_fn(|k| self.d[k] - h[k]),
            core::array::from_fn(|k| self.d[k] + h[k]),
        )
    }
}

/// Convenience alias for [`Ellipsoid::residual`].
pub fn ellipsoid_residual<const N: usize>(e: &Ellipsoid<N>, x: &[f64; N]) -> f64 {
    e.residual(x)
}

/// Polytope `{x : a_j·x ≤ b_j}` with unit-norm rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polytope<const N: usize> {
    a: Vec<[f64; N]>,
    b: Vec<f64>,
}

impl<const N: usize> Polytope<N> {
    pub fn new() -> Self {
        Self { a: Vec::new(), b: Vec::new() }
    }

    /// Builds from raw rows, normalizing each to unit norm.
    pub fn from_rows(a: Vec<[f64; N]>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InconsistentSizes(format!(
                "{} normals but {} offsets",
                a.len(),
                b.len()
            )));
        }
        let mut p = Self::new();
        for (row, off) in a.into_iter().zip(b) {
            p.push(row, off)?;
        }
        Ok(p)
    }

    /// The `2N` faces of a box.
    pub fn from_box(bx: &Aabb<N>) -> Self {
        let mut p = Self::new();
        p.push_box_faces(bx);
        p
    }

    pub(crate) fn push_box_faces(&mut self, bx: &Aabb<N>) {
        for k in 0..N {
            let mut up = [0.0; N];
            up[k] = 1.0;
            self.push_unit(up, bx.max[k]);
            let mut down = [0.0; N];
            down[k] = -1.0;
            self.push_unit(down, -bx.min[k]);
        }
    }

    /// Appends `a·x ≤ b`, normalizing `a`.
    pub fn push(&mut self, a: [f64; N], b: f64) -> Result<()> {
        let n = norm(&a);
        if !(n > 1e-300) || !b.is_finite() {
            return Err(Error::InvalidArgument("zero or non-finite halfspace normal".into()));
        }
        self.push_unit(core::array::from_fn(|k| a[k] / n), b / n);
        Ok(())
    }

    pub(crate) fn push_unit(&mut self, a: [f64; N], b: f64) {
        debug_assert!((norm(&a) - 1.0).abs() < 1e-9);
        self.a.push(a);
        self.b.push(b);
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn normals(&self) -> &[[f64; N]] {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64; N], f64)> + '_ {
        self.a.iter().zip(self.b.iter().copied())
    }

    /// `max_j (a_j·x − b_j)`; `-∞` for an empty row set.
    pub fn max_violation(&self, x: &[f64; N]) -> f64 {
        self.rows().map(|(a, b)| dot(a, x) - b).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64; N], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    /// Row concatenation; no redundancy removal.
    pub fn intersect(&self, other: &Self) -> Self {
        let mut a = self.a.clone();
        a.extend_from_slice(&other.a);
        let mut b = self.b.clone();
        b.extend_from_slice(&other.b);
        Self { a, b }
    }

    /// Largest uniform violation of `E ⊂ P`: `max_j (‖Lᵀa_j‖ + a_j·d − b_j)`.
    pub fn ellipsoid_violation(&self, e: &Ellipsoid<N>) -> f64 {
        self.rows().map(|(a, b)| e.support(a) - b).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Seeded Monte Carlo volume estimate over `bx`, which must contain the
    /// polytope. The standard error is `O(1/√n_samples)`.
    pub fn volume_mc(&self, bx: &Aabb<N>, n_samples: usize, seed: u64) -> f64 {
        let box_volume = bx.volume();
        if box_volume <= 0.0 || n_samples == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        for _ in 0..n_samples {
            let x: [f64; N] =
                core::array::from_fn(|k| bx.min[k] + rng.random::<f64>() * (bx.max[k] - bx.min[k]));
            if self.contains(&x, 0.0) {
                hits += 1;
            }
        }
        box_volume * hits as f64 / n_samples as f64
    }
}

/// Row concatenation of two polytopes.
pub fn intersect<const N: usize>(p1: &Polytope<N>, p2: &Polytope<N>) -> Polytope<N> {
    p1.intersect(p2)
}

/// Minimum separation between consecutive polyline points.
pub const MIN_POINT_SEPARATION: f64 = 1e-9;

/// Ordered waypoints `p_0 … p_M` joined by straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<const N: usize> {
    points: Vec<[f64; N]>,
}

impl<const N: usize> Polyline<N> {
    pub fn new(points: Vec<[f64; N]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("polyline needs at least one point".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(dist(&w[0], &w[1]) > MIN_POINT_SEPARATION) {
                return Err(Error::InvalidArgument(format!(
                    "polyline points {i} and {} coincide",
                    i + 1
                )));
            }
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite polyline point".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; N]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; N]> {
        self.points
    }

    /// Number of segments `M`.
    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| dist(&w[0], &w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().sum()
    }

    pub fn first(&self) -> &[f64; N] {
        &self.points[0]
    }

    pub fn last(&self) -> &[f64; N] {
        &self.points[self.points.len() - 1]
    }
}
