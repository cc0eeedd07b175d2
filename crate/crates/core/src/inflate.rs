//! Polytope inflation around an ellipsoid: one pass of tangent separating
//! hyperplanes against point obstacles inside a local window.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::geom::{Aabb, Ellipsoid, Polytope};
use crate::linalg::{dot, norm, solve_lower_t, sub};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflateConfig<const N: usize> {
    /// Margin `l` added around the ellipsoid's bounding box (m).
    pub local_range: f64,
    pub world: Aabb<N>,
    /// Obstacle points with residual in `[-tol, 0)` are treated as touching
    /// the ellipsoid rather than inside it.
    pub tangency_tol: f64,
}

impl<const N: usize> InflateConfig<N> {
    pub fn new(local_range: f64, world: Aabb<N>) -> Self {
        Self { local_range, world, tangency_tol: 1e-7 }
    }
}

/// Bounding box of `e` grown by `l` on every axis, clipped to `world`.
pub fn local_window<const N: usize>(e: &Ellipsoid<N>, l: f64, world: &Aabb<N>) -> Aabb<N> {
    e.bounding_box().expanded(l).intersection(world)
}

/// Plane through `q` tangent to the level set of `e` that contains `q`.
/// The normal is the metric gradient `(L Lᵀ)⁻¹ (q − d)`, unit-normalized.
pub fn separating_halfspace<const N: usize>(e: &Ellipsoid<N>, q: &[f64; N]) -> Result<([f64; N], f64)> {
    let v = sub(q, e.center());
    if norm(&v) == 0.0 {
        return Err(Error::SeedInObstacle);
    }
    let y = e.to_unit(q);
    let n = solve_lower_t(e.factor(), &y);
    let len = norm(&n);
    let a: [f64; N] = core::array::from_fn(|k| n[k] / len);
    Ok((a, dot(&a, q)))
}

/// Grows an obstacle-free polytope around `e`. Window points are processed
/// in ascending ellipsoid residual; points already cut off by an earlier
/// plane add nothing. The window faces close the polytope.
pub fn inflate_polytope<const N: usize>(
    e: &Ellipsoid<N>,
    cloud: &[[f64; N]],
    cfg: &InflateConfig<N>,
) -> Result<Polytope<N>> {
    let window = local_window(e, cfg.local_range, &cfg.world);
    let mut candidates: Vec<(f64, &[f64; N])> = Vec::new();
    for q in cloud.iter().filter(|q| window.contains(q)) {
        let r = e.residual(q);
        if r < -cfg.tangency_tol {
            return Err(Error::SeedInCollision(format!("{q:?} (residual {r:.3e})")));
        }
        candidates.push((r, q));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut poly = Polytope::new();
    for (_, q) in candidates {
        if poly.rows().any(|(a, b)| dot(a, q) >= b) {
            continue;
        }
        let (a, b) = separating_halfspace(e, q)?;
        poly.push_unit(a, b);
    }
    poly.push_box_faces(&window);
    Ok(poly)
}
