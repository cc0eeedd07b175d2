//! Per-segment maximum-volume inscribed ellipsoid with waypoint attachment.
//!
//! The ellipsoid is parameterized by its center and the lower triangle of
//! `L`, with the diagonal stored as logarithms so positivity is structural.
//! Corridor rows `‖Lᵀa_j‖ + a_j·d ≤ b_j` enter as quadratic hinge penalties;
//! the minimizer is followed by a shrink-and-retract repair that restores
//! `E ⊂ P` exactly.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::geom::{hinge_sq, hinge_sq_grad, Aabb, Ellipsoid, Polytope};
use crate::linalg::{dot, lerp, mul_lower_t, norm, solve_lower_t};
use crate::solver::lbfgs::{minimize, LbfgsOptions};
use crate::{Error, Result};

/// Scaled multipliers of one segment: `[current endpoint p_i, previous endpoint p_{i−1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentDuals(pub [f64; 2]);

/// Default weight of the corridor hinge penalties.
pub const DEFAULT_CORRIDOR_WEIGHT: f64 = 1e3;

/// Inputs of one ellipsoid subproblem.
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidProblem<'a, const N: usize> {
    pub polytope: &'a Polytope<N>,
    pub p_prev: [f64; N],
    pub p_cur: [f64; N],
    pub duals: SegmentDuals,
    pub w_v: f64,
    pub rho: f64,
    pub corridor_weight: f64,
}

/// Number of free parameters for dimension `N`.
pub const fn param_count(n: usize) -> usize {
    n + n * (n + 1) / 2
}

/// Parameter vector `[d, lower triangle of L row by row]` with `ln L_ii` on the diagonal.
pub fn encode<const N: usize>(e: &Ellipsoid<N>) -> Vec<f64> {
    let mut x = Vec::with_capacity(param_count(N));
    x.extend_from_slice(e.center());
    let l = e.factor();
    for (i, row) in l.iter().enumerate() {
        for (j, &v) in row.iter().enumerate().take(i + 1) {
            x.push(if i == j { v.ln() } else { v });
        }
    }
    x
}

pub fn decode<const N: usize>(x: &[f64]) -> Ellipsoid<N> {
    let d: [f64; N] = core::array::from_fn(|k| x[k]);
    let mut l = [[0.0; N]; N];
    let mut k = N;
    for (i, row) in l.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate().take(i + 1) {
            *v = if i == j { x[k].exp() } else { x[k] };
            k += 1;
        }
    }
    Ellipsoid::from_parts(l, d)
}

#[inline]
fn tri_index<const N: usize>(i: usize, j: usize) -> usize {
    N + i * (i + 1) / 2 + j
}

impl<const N: usize> EllipsoidProblem<'_, N> {
    /// `−w_v log det L + (ρ/2)‖[g(h₀(E,p_i)), g(h₀(E,p_{i−1}))] + y‖²`,
    /// the objective without corridor penalties.
    pub fn attached_objective(&self, e: &Ellipsoid<N>) -> f64 {
        let gc = hinge_sq(e.residual(&self.p_cur));
        let gp = hinge_sq(e.residual(&self.p_prev));
        let y = self.duals.0;
        -self.w_v * e.log_det() + 0.5 * self.rho * ((gc + y[0]).powi(2) + (gp + y[1]).powi(2))
    }

    /// Penalized objective on the parameter vector, with its gradient.
    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let e = decode::<N>(x);
        if !e.is_finite() {
            return f64::INFINITY;
        }
        let l = e.factor();
        let d = e.center();

        let mut f = 0.0;
        for i in 0..N {
            f -= self.w_v * x[tri_index::<N>(i, i)];
            grad[tri_index::<N>(i, i)] -= self.w_v;
        }

        // raw gradient with respect to the entries of L, chained to ln L_ii below
        let mut g_l = [[0.0; N]; N];
        let mut g_d = [0.0; N];

        for (p, y) in [(&self.p_cur, self.duals.0[0]), (&self.p_prev, self.duals.0[1])] {
            let u = e.to_unit(p);
            let r = norm(&u);
            let h = r - 1.0;
            let g = hinge_sq(h);
            f += 0.5 * self.rho * (g + y).powi(2);
            let coef = self.rho * (g + y) * hinge_sq_grad(h);
            if coef != 0.0 && r > 0.0 {
                // ∂r/∂d = −w, ∂r/∂L_ij = −w_i u_j with w = L⁻ᵀu/r
                let w = solve_lower_t(l, &core::array::from_fn(|k| u[k] / r));
                for i in 0..N {
                    g_d[i] -= coef * w[i];
                    for j in 0..=i {
                        g_l[i][j] -= coef * w[i] * u[j];
                    }
                }
            }
        }

        for (a, b) in self.polytope.rows() {
            let z = mul_lower_t(l, a);
            let zn = norm(&z);
            let s = zn + dot(a, d) - b;
            if s <= 0.0 {
                continue;
            }
            f += self.corridor_weight * hinge_sq(s);
            let coef = self.corridor_weight * hinge_sq_grad(s);
            for i in 0..N {
                g_d[i] += coef * a[i];
                if zn > 0.0 {
                    for k in 0..=i {
                        g_l[i][k] += coef * a[i] * z[k] / zn;
                    }
                }
            }
        }

        grad[..N].iter_mut().zip(&g_d).for_each(|(g, v)| *g += v);
        for i in 0..N {
            for j in 0..=i {
                let chain = if i == j { l[i][i] } else { 1.0 };
                grad[tri_index::<N>(i, j)] += g_l[i][j] * chain;
            }
        }
        f
    }
}

/// Box spanned by the axis-aligned rows of `p`, if it has all `2N` of them.
fn axis_bounds<const N: usize>(p: &Polytope<N>) -> Option<Aabb<N>> {
    let mut lo = [f64::NEG_INFINITY; N];
    let mut hi = [f64::INFINITY; N];
    for (a, b) in p.rows() {
        for k in 0..N {
            if (a[k] - 1.0).abs() < 1e-12 {
                hi[k] = hi[k].min(b);
            } else if (a[k] + 1.0).abs() < 1e-12 {
                lo[k] = lo[k].max(-b);
            }
        }
    }
    (lo.iter().chain(hi.iter()).all(|v| v.is_finite())).then(|| Aabb::new(lo, hi))
}

/// Approximate Chebyshev center: minimizes the log-sum-exp smoothed maximum
/// of `a_j·x − b_j` (temperature 1% of the bounding-box diagonal). Returns
/// the point and its exact margin `min_j (b_j − a_j·x)`.
pub fn interior_point<const N: usize>(p: &Polytope<N>, start: &[f64; N]) -> Result<([f64; N], f64)> {
    if p.is_empty() {
        return Err(Error::DegeneratePolytope);
    }
    let scale = axis_bounds(p)
        .map(|bx| bx.diagonal())
        .unwrap_or_else(|| 1.0 + p.offsets().iter().fold(0.0f64, |m, b| m.max(b.abs())));
    let temp = (1e-2 * scale).max(1e-9);
    let mut weights = vec![0.0; p.len()];
    let lse = |x: &[f64], g: &mut [f64]| -> f64 {
        let xa: [f64; N] = core::array::from_fn(|k| x[k]);
        let mut peak = f64::NEG_INFINITY;
        for (w, (a, b)) in weights.iter_mut().zip(p.rows()) {
            *w = (dot(a, &xa) - b) / temp;
            peak = peak.max(*w);
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            *w = (*w - peak).exp();
            total += *w;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for (w, a) in weights.iter().zip(p.normals()) {
            for k in 0..N {
                g[k] += w / total * a[k];
            }
        }
        temp * (peak + total.ln())
    };
    let opts = LbfgsOptions { max_iters: 200, grad_tol: 1e-10, f_rel_tol: 1e-14, ..Default::default() };
    let res = minimize(lse, start, &opts)?;
    let x: [f64; N] = core::array::from_fn(|k| res.x[k]);
    let margin = -p.max_violation(&x);
    if !(margin > 1e-12) || !margin.is_finite() {
        return Err(Error::DegeneratePolytope);
    }
    Ok((x, margin))
}

/// Restores `E ⊂ P`: keeps `E` if no row is violated by more than 1e-9,
/// otherwise retracts the center toward an interior point and shrinks `L`
/// by the largest uniform factor that fits.
pub fn repair<const N: usize>(p: &Polytope<N>, e: &Ellipsoid<N>) -> Result<Ellipsoid<N>> {
    if !e.is_finite() {
        return Err(Error::NonFinite);
    }
    if p.ellipsoid_violation(e) <= 1e-9 {
        return Ok(*e);
    }
    let (c, _) = interior_point(p, e.center())?;
    let l = e.factor();
    let norms: Vec<f64> = p.normals().iter().map(|a| norm(&mul_lower_t(l, a))).collect();
    // largest uniform scale that fits with the center at c + λ(d − c); concave in λ
    let fit = |lambda: f64| -> f64 {
        let d = lerp(&c, e.center(), lambda);
        p.rows()
            .zip(&norms)
            .map(|((a, b), n)| (b - dot(a, &d)) / n)
            .fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if fit(m1) < fit(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mut lambda = 0.5 * (lo + hi);
    if fit(0.0) > fit(lambda) {
        lambda = 0.0;
    }
    let mut scale = fit(lambda);
    if scale >= 1.0 {
        // the full-size ellipsoid fits; move the center back toward d as far as possible
        let (mut a, mut b) = (lambda, 1.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if fit(m) >= 1.0 {
                a = m;
            } else {
                b = m;
            }
        }
        lambda = a;
        scale = 1.0;
    } else {
        scale *= 1.0 - 1e-12;
    }
    if !(scale > 0.0) {
        return Err(Error::DegeneratePolytope);
    }
    let mut ls = *l;
    ls.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(Ellipsoid::from_parts(ls, lerp(&c, e.center(), lambda)))
}

/// Solves one ellipsoid subproblem from the warm start `warm`.
///
/// The result lies in the polytope, and neither its volume nor its attached
/// objective is worse than the repaired warm start. Points in `keep_inside`
/// that the warm start contains stay contained.
pub fn max_ellipsoid<const N: usize>(
    problem: &EllipsoidProblem<'_, N>,
    warm: &Ellipsoid<N>,
    keep_inside: &[[f64; N]],
) -> Result<Ellipsoid<N>> {
    let base = repair(problem.polytope, warm)?;
    let opts = LbfgsOptions { max_iters: 300, grad_tol: 1e-9, f_rel_tol: 1e-13, ..Default::default() };
    let res = minimize(|x, g| problem.eval(x, g), &encode(&base), &opts)?;
    let candidate = match repair(problem.polytope, &decode::<N>(&res.x)) {
        Ok(c) => c,
        Err(Error::NonFinite) => base,
        Err(e) => return Err(e),
    };

    let base_obj = problem.attached_objective(&base);
    let base_vol = base.volume();
    let pinned: Vec<&[f64; N]> = keep_inside.iter().filter(|q| base.residual(q) <= 1e-9).collect();
    let acceptable = |e: &Ellipsoid<N>| {
        e.is_finite()
            && e.volume() >= base_vol
            && problem.attached_objective(e) <= base_obj
            && pinned.iter().all(|q| e.residual(q) <= 1e-9)
            && problem.polytope.ellipsoid_violation(e) <= 1e-9
    };
    let mut t = 1.0;
    for _ in 0..8 {
        let blended = blend(&base, &candidate, t);
        if acceptable(&blended) {
            return Ok(blended);
        }
        t *= 0.5;
    }
    Ok(base)
}

/// Convex combination of two ellipsoid parameterizations.
fn blend<const N: usize>(a: &Ellipsoid<N>, b: &Ellipsoid<N>, t: f64) -> Ellipsoid<N> {
    let l: [[f64; N]; N] =
        core::array::from_fn(|i| lerp(&a.factor()[i], &b.factor()[i], t));
    Ellipsoid::from_parts(l, lerp(a.center(), b.center(), t))
}

/// Residuals `h₀(E, p_i)` and `h₀(E, p_{i−1})` for reporting.
pub fn attachment_residuals<const N: usize>(e: &Ellipsoid<N>, p_prev: &[f64; N], p_cur: &[f64; N]) -> [f64; 2] {
    [e.residual(p_cur), e.residual(p_prev)]
}
