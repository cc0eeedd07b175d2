//! Piecewise polynomial trajectories of degree `2s − 1` minimizing
//! `∫‖σ^{(s)}‖² dt` through fixed waypoints with free interior derivatives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::geom::{Polyline, Polytope};
use crate::linalg::{dot, solve_dense, BandedCholesky, BandedSpd};
use crate::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const MIN_DURATION: f64 = 1e-3;

/// `k! / (k − m)!`, zero when `m > k`.
fn falling(k: usize, m: usize) -> f64 {
    if m > k {
        return 0.0;
    }
    ((k - m + 1)..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// One polynomial piece on local time `[0, dt]`; `coeffs[k]` multiplies `t^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<const N: usize> {
    pub dt: f64,
    pub coeffs: Vec<[f64; N]>,
}

impl<const N: usize> Segment<N> {
    pub fn eval(&self, t: f64, deriv: usize) -> [f64; N] {
        let mut out = [0.0; N];
        for k in (deriv..self.coeffs.len()).rev() {
            let f = falling(k, deriv);
            for (o, c) in out.iter_mut().zip(&self.coeffs[k]) {
                *o = *o * t + f * c;
            }
        }
        out
    }

    /// Exact `∫₀^dt ‖p^{(s)}‖² dt` by squaring the derivative polynomial.
    pub fn effort(&self, s: usize) -> f64 {
        let deg = self.coeffs.len();
        if deg <= s {
            return 0.0;
        }
        let e: Vec<[f64; N]> = (s..deg)
            .map(|k| self.coeffs[k].map(|c| c * falling(k, s)))
            .collect();
        let mut total = 0.0;
        for (j, ej) in e.iter().enumerate() {
            for (k, ek) in e.iter().enumerate() {
                let p = (j + k + 1) as i32;
                total += dot(ej, ek) * self.dt.powi(p) / p as f64;
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory<const N: usize> {
    s: usize,
    segments: Vec<Segment<N>>,
}

impl<const N: usize> PiecewiseTrajectory<N> {
    pub fn new(s: usize, segments: Vec<Segment<N>>) -> Result<Self> {
        if s == 0 || segments.is_empty() {
            return Err(Error::InvalidArgument(format!("order {s} with {} segments", segments.len())));
        }
        for seg in &segments {
            if !(seg.dt > 0.0) || seg.coeffs.len() != 2 * s {
                return Err(Error::InvalidArgument(format!("bad segment: dt {} with {} coefficients", seg.dt, seg.coeffs.len())));
            }
        }
        Ok(Self { s, segments })
    }

    pub fn order(&self) -> usize {
        self.s
    }

    pub fn segments(&self) -> &[Segment<N>] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.dt).collect()
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.dt).sum()
    }

    /// Derivative `deriv` at global time `t ∈ [0, T]`.
    pub fn eval(&self, t: f64, deriv: usize) -> Result<[f64; N]> {
        let total = self.total_time();
        if !(t >= 0.0 && t <= total * (1.0 + 1e-12)) || deriv >= 2 * self.s {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, {total}] or derivative {deriv}")));
        }
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if t <= start + seg.dt || i + 1 == self.segments.len() {
                return Ok(seg.eval((t - start).clamp(0.0, seg.dt), deriv));
            }
            start += seg.dt;
        }
        unreachable!("trajectory has at least one segment")
    }

    pub fn control_cost(&self) -> f64 {
        self.segments.iter().map(|seg| seg.effort(self.s)).sum()
    }

    /// Largest mismatch of derivatives `0..s` across interior joints,
    /// relative to the magnitude of the values compared.
    pub fn continuity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.segments.windows(2) {
            for m in 0..self.s {
                let a = w[0].eval(w[0].dt, m);
                let b = w[1].eval(0.0, m);
                for k in 0..N {
                    let scale = 1.0 + a[k].abs().max(b[k].abs());
                    worst = worst.max((a[k] - b[k]).abs() / scale);
                }
            }
        }
        worst
    }

    /// Same geometric image traversed `factor` times slower.
    pub fn time_rescale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidArgument(format!("time factor {factor}")));
        }
        let segments = self
            .segments
            .iter()
            .map(|seg| Segment {
                dt: seg.dt * factor,
                coeffs: seg
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c.map(|v| v / factor.powi(k as i32)))
                    .collect(),
            })
            .collect();
        Ok(Self { s: self.s, segments })
    }
}

/// Position plus derivatives `1..s` (velocity, acceleration, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState<const N: usize> {
    pub position: [f64; N],
    pub derivatives: Vec<[f64; N]>,
}

impl<const N: usize> BoundaryState<N> {
    pub fn rest(position: [f64; N], s: usize) -> Self {
        Self { position, derivatives: vec![[0.0; N]; s.saturating_sub(1)] }
    }
}

/// Durations proportional to segment length at speed `v_nom`, floored at 1 ms.
pub fn time_allocation<const N: usize>(path: &Polyline<N>, v_nom: f64) -> Result<Vec<f64>> {
    if !(v_nom > 0.0) || !v_nom.is_finite() {
        return Err(Error::InvalidArgument(format!("nominal speed {v_nom}")));
    }
    Ok(path.segment_lengths().map(|l| (l / v_nom).max(MIN_DURATION)).collect())
}

/// Equal durations summing to `length / v_nom`, floored at 1 ms.
pub fn uniform_time_allocation<const N: usize>(path: &Polyline<N>, v_nom: f64) -> Result<Vec<f64>> {
    if !(v_nom > 0.0) || !v_nom.is_finite() {
        return Err(Error::InvalidArgument(format!("nominal speed {v_nom}")));
    }
    let m = path.segment_count();
    let dt = (path.length() / v_nom / m.max(1) as f64).max(MIN_DURATION);
    Ok(vec![dt; m])
}

/// How segment durations are derived from a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeAllocation {
    /// Each segment gets its own length over the nominal speed.
    Proportional,
    /// The total time is the path length over the nominal speed, split equally.
    Uniform,
}

impl TimeAllocation {
    pub fn durations<const N: usize>(self, path: &Polyline<N>, v_nom: f64) -> Result<Vec<f64>> {
        match self {
            Self::Proportional => time_allocation(path, v_nom),
            Self::Uniform => uniform_time_allocation(path, v_nom),
        }
    }
}

/// Hermite data on the unit interval for order `s`.
#[derive(Debug, Clone)]
struct UnitBasis {
    s: usize,
    /// `2s × 2s` row-major map from scaled endpoint derivatives to monomial coefficients.
    a_inv: Vec<f64>,
    /// Effort Gram matrix in scaled endpoint derivatives.
    q: Vec<f64>,
}

impl UnitBasis {
    fn new(s: usize) -> Result<Self> {
        let n = 2 * s;
        let mut a = vec![0.0; n * n];
        for m in 0..s {
            a[m * n + m] = falling(m, m);
            for k in m..n {
                a[(s + m) * n + k] = falling(k, m);
            }
        }
        let mut a_inv = vec![0.0; n * n];
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let x = solve_dense(a.clone(), e, n).ok_or(Error::Singular("hermite basis"))?;
            for row in 0..n {
                a_inv[row * n + col] = x[row];
            }
        }
        let mut c = vec![0.0; n * n];
        for j in s..n {
            for k in s..n {
                c[j * n + k] = falling(j, s) * falling(k, s) / (j + k + 1 - 2 * s) as f64;
            }
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += a_inv[k * n + i] * c[k * n + l] * a_inv[l * n + j];
                    }
                }
                q[i * n + j] = acc;
            }
        }
        Ok(Self { s, a_inv, q })
    }

    fn dim(&self) -> usize {
        2 * self.s
    }

    /// Monomial coefficients in local time of a segment of length `dt`
    /// from its endpoint derivative stacks.
    fn coefficients<const N: usize>(&self, dt: f64, stacks: &[[f64; N]]) -> Vec<[f64; N]> {
        let n = self.dim();
        let scaled: Vec<[f64; N]> = stacks
            .iter()
            .enumerate()
            .map(|(j, v)| v.map(|c| c * dt.powi((j % self.s) as i32)))
            .collect();
        (0..n)
            .map(|k| {
                let mut c = [0.0; N];
                for (j, v) in scaled.iter().enumerate() {
                    let w = self.a_inv[k * n + j];
                    for d in 0..N {
                        c[d] += w * v[d];
                    }
                }
                c.map(|v| v / dt.powi(k as i32))
            })
            .collect()
    }

    /// Weights of the endpoint stacks in the position at fraction `u` of the segment.
    fn position_weights(&self, dt: f64, u: f64) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for k in (0..n).rev() {
                    acc = acc * u + self.a_inv[k * n + j];
                }
                acc * dt.powi((j % self.s) as i32)
            })
            .collect()
    }

    /// Entry `(a, b)` of the effort matrix of a segment of length `dt`.
    fn effort_entry(&self, dt: f64, a: usize, b: usize) -> f64 {
        let p = (a % self.s + b % self.s) as i32 + 1 - 2 * self.s as i32;
        self.q[a * self.dim() + b] * dt.powi(p)
    }
}

/// Solved minimum-effort problem with the data needed for waypoint gradients.
///
/// Knot `i` carries the stack `[x, x', …, x^{(s−1)}]`; the flattened index of
/// derivative `m` at knot `i` is `i·s + m`.
#[derive(Debug, Clone)]
pub struct MinEffort<const N: usize> {
    basis: UnitBasis,
    tau: Vec<f64>,
    free: Vec<Option<usize>>,
    factor: Option<BandedCholesky>,
    z: Vec<[f64; N]>,
}

impl<const N: usize> MinEffort<N> {
    /// Solves with interior positions fixed at `waypoints` and interior
    /// derivatives free except at knots flagged in `pinned`, where they are zero.
    pub fn solve(
        waypoints: &[[f64; N]],
        tau: &[f64],
        bc0: &BoundaryState<N>,
        bcf: &BoundaryState<N>,
        s: usize,
        pinned: &[bool],
    ) -> Result<Self> {
        let m = tau.len();
        if m == 0 || waypoints.len() != m + 1 {
            return Err(Error::InconsistentSizes(format!("{} waypoints for {} durations", waypoints.len(), m)));
        }
        if !pinned.is_empty() && pinned.len() != m + 1 {
            return Err(Error::InconsistentSizes(format!("{} pin flags for {} knots", pinned.len(), m + 1)));
        }
        if s == 0 || bc0.derivatives.len() + 1 != s || bcf.derivatives.len() + 1 != s {
            return Err(Error::InconsistentSizes(format!("boundary stacks for order {s}")));
        }
        if tau.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Singular("non-positive duration"));
        }
        let basis = UnitBasis::new(s)?;
        let knots = m + 1;
        let mut z = vec![[0.0; N]; knots * s];
        let mut free = vec![None; knots * s];
        let mut nfree = 0;
        for (i, p) in waypoints.iter().enumerate() {
            z[i * s] = *p;
            if i > 0 && i < m && !pinned.get(i).copied().unwrap_or(false) {
                for d in 1..s {
                    free[i * s + d] = Some(nfree);
                    nfree += 1;
                }
            }
        }
        for d in 1..s {
            z[d] = bc0.derivatives[d - 1];
            z[m * s + d] = bcf.derivatives[d - 1];
        }

        let mut out = Self { basis, tau: tau.to_vec(), free, factor: None, z };
        if nfree > 0 {
            let mut k = BandedSpd::zeros(nfree, (2 * s).saturating_sub(1));
            let mut rhs = vec![[0.0; N]; nfree];
            out.for_each_entry(|g, h, v| {
                if let Some(fg) = out.free[g] {
                    match out.free[h] {
                        Some(fh) if fh <= fg => k.add(fg, fh, v),
                        Some(_) => {}
                        None => {
                            for d in 0..N {
                                rhs[fg][d] -= v * out.z[h][d];
                            }
                        }
                    }
                }
            });
            let factor = k.factor().ok_or(Error::Singular("minimum-effort system"))?;
            for d in 0..N {
                let col: Vec<f64> = rhs.iter().map(|r| r[d]).collect();
                let x = factor.solve(&col);
                for (g, f) in out.free.iter().enumerate() {
                    if let Some(f) = f {
                        out.z[g][d] = x[*f];
                    }
                }
            }
            out.factor = Some(factor);
        }
        Ok(out)
    }

    /// Calls `f(g, h, K_gh)` for every nonzero of the assembled effort matrix,
    /// once per segment contribution.
    fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        let s = self.basis.s;
        let n = self.basis.dim();
        for (i, &dt) in self.tau.iter().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    f(i * s + a, i * s + b, self.basis.effort_entry(dt, a, b));
                }
            }
        }
    }

    fn apply(&self, v: &[[f64; N]]) -> Vec<[f64; N]> {
        let mut out = vec![[0.0; N]; v.len()];
        self.for_each_entry(|g, h, k| {
            for d in 0..N {
                out[g][d] += k * v[h][d];
            }
        });
        out
    }

    pub fn order(&self) -> usize {
        self.basis.s
    }

    pub fn durations(&self) -> &[f64] {
        &self.tau
    }

    /// Full knot stacks, flattened.
    pub fn knot_states(&self) -> &[[f64; N]] {
        &self.z
    }

    pub fn cost(&self) -> f64 {
        let kz = self.apply(&self.z);
        self.z.iter().zip(&kz).map(|(a, b)| dot(a, b)).sum()
    }

    pub fn trajectory(&self) -> PiecewiseTrajectory<N> {
        hermite_segments(&self.basis, &self.tau, &self.z)
    }

    /// Gradient of the optimal cost with respect to every waypoint position.
    pub fn position_gradient(&self) -> Vec<[f64; N]> {
        let s = self.basis.s;
        let kz = self.apply(&self.z);
        (0..=self.tau.len()).map(|i| kz[i * s].map(|v| 2.0 * v)).collect()
    }

    /// Total derivative with respect to waypoint positions of a function
    /// whose partial derivatives in the knot stacks are `dz`, accounting for
    /// the free derivatives moving with the waypoints.
    pub fn pullback(&self, dz: &[[f64; N]]) -> Vec<[f64; N]> {
        let s = self.basis.s;
        let mut out: Vec<[f64; N]> = (0..=self.tau.len()).map(|i| dz[i * s]).collect();
        let Some(factor) = &self.factor else {
            return out;
        };
        let nfree = self.free.iter().flatten().count();
        let mut lam = vec![[0.0; N]; self.z.len()];
        for d in 0..N {
            let mut col = vec![0.0; nfree];
            for (g, f) in self.free.iter().enumerate() {
                if let Some(f) = f {
                    col[*f] = dz[g][d];
                }
            }
            let x = factor.solve(&col);
            for (g, f) in self.free.iter().enumerate() {
                if let Some(f) = f {
                    lam[g][d] = x[*f];
                }
            }
        }
        let klam = self.apply(&lam);
        for (i, o) in out.iter_mut().enumerate() {
            for d in 0..N {
                o[d] -= klam[i * s][d];
            }
        }
        out
    }

    /// Position at fraction `u ∈ [0, 1]` of segment `seg`, with the weights
    /// of the `2s` knot-stack entries starting at flattened index `seg·s`.
    pub fn sample(&self, seg: usize, u: f64) -> ([f64; N], Vec<f64>) {
        let s = self.basis.s;
        let w = self.basis.position_weights(self.tau[seg], u);
        let mut x = [0.0; N];
        for (j, wj) in w.iter().enumerate() {
            for d in 0..N {
                x[d] += wj * self.z[seg * s + j][d];
            }
        }
        (x, w)
    }
}

fn hermite_segments<const N: usize>(basis: &UnitBasis, tau: &[f64], z: &[[f64; N]]) -> PiecewiseTrajectory<N> {
    let s = basis.s;
    let segments = tau
        .iter()
        .enumerate()
        .map(|(i, &dt)| Segment { dt, coeffs: basis.coefficients(dt, &z[i * s..(i + 2) * s]) })
        .collect();
    PiecewiseTrajectory { s, segments }
}

/// Trajectory interpolating arbitrary knot stacks (flattened, `s` entries per knot).
pub fn hermite_trajectory<const N: usize>(knots: &[[f64; N]], tau: &[f64], s: usize) -> Result<PiecewiseTrajectory<N>> {
    if s == 0 || tau.is_empty() || knots.len() != (tau.len() + 1) * s {
        return Err(Error::InconsistentSizes(format!("{} knot entries for {} segments of order {s}", knots.len(), tau.len())));
    }
    let basis = UnitBasis::new(s)?;
    Ok(hermite_segments(&basis, tau, knots))
}

/// Minimum-effort trajectory through `waypoints` with durations `tau`.
pub fn solve_min_effort<const N: usize>(
    waypoints: &Polyline<N>,
    tau: &[f64],
    bc0: &BoundaryState<N>,
    bcf: &BoundaryState<N>,
    s: usize,
) -> Result<PiecewiseTrajectory<N>> {
    if waypoints.first() != &bc0.position || waypoints.last() != &bcf.position {
        return Err(Error::InconsistentSizes("boundary positions differ from the path ends".into()));
    }
    Ok(MinEffort::solve(waypoints.points(), tau, bc0, bcf, s, &[])?.trajectory())
}

pub fn control_cost<const N: usize>(traj: &PiecewiseTrajectory<N>) -> f64 {
    traj.control_cost()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorViolation {
    pub segment: usize,
    /// Local time within the segment.
    pub t: f64,
    pub row: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorridorReport {
    /// Largest `a_j·σ_i(t) − b_j` over the samples of each segment.
    pub segment_max: Vec<f64>,
    /// Every sampled row with a positive value.
    pub violations: Vec<CorridorViolation>,
}

impl CorridorReport {
    pub fn max_violation(&self) -> f64 {
        self.segment_max.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples each segment at the midpoints of `n_samples` equal subintervals.
pub fn corridor_check<const N: usize>(
    traj: &PiecewiseTrajectory<N>,
    sfc: &[Polytope<N>],
    n_samples: usize,
) -> Result<CorridorReport> {
    if sfc.len() != traj.segment_count() {
        return Err(Error::InconsistentSizes(format!("{} polytopes for {} segments", sfc.len(), traj.segment_count())));
    }
    let mut report = CorridorReport::default();
    for (i, (seg, poly)) in traj.segments().iter().zip(sfc).enumerate() {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n_samples {
            let t = seg.dt * (k as f64 + 0.5) / n_samples as f64;
            let x = seg.eval(t, 0);
            for (row, (a, b)) in poly.rows().enumerate() {
                let v = dot(a, &x) - b;
                worst = worst.max(v);
                if v > 0.0 {
                    report.violations.push(CorridorViolation { segment: i, t, row, amount: v });
                }
            }
        }
        report.segment_max.push(worst);
    }
    Ok(report)
}

/// Outcome of [`solve_in_corridor`].
#[derive(Debug, Clone)]
pub struct CorridorFit<const N: usize> {
    pub solution: MinEffort<N>,
    pub report: CorridorReport,
    /// Interior knots whose derivatives were pinned to zero.
    pub pinned: Vec<bool>,
}

/// Rest-to-rest minimum-effort solve that pins the derivatives at both ends
/// of every segment leaving its polytope by more than `tol`, repeating until
/// the check passes. A segment with both ends pinned is the straight chord,
/// so this terminates with a corridor-respecting trajectory whenever each
/// polytope contains its two waypoints.
pub fn solve_in_corridor<const N: usize>(
    waypoints: &Polyline<N>,
    tau: &[f64],
    s: usize,
    sfc: &[Polytope<N>],
    n_samples: usize,
    tol: f64,
) -> Result<CorridorFit<N>> {
    let pts = waypoints.points();
    let bc0 = BoundaryState::rest(pts[0], s);
    let bcf = BoundaryState::rest(*waypoints.last(), s);
    let mut pinned = vec![false; pts.len()];
    loop {
        let solution = MinEffort::solve(pts, tau, &bc0, &bcf, s, &pinned)?;
        let report = corridor_check(&solution.trajectory(), sfc, n_samples)?;
        let mut changed = false;
        for (i, v) in report.segment_max.iter().enumerate() {
            if *v > tol {
                for k in [i, i + 1] {
                    if !pinned[k] {
                        pinned[k] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return Ok(CorridorFit { solution, report, pinned });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[[f64; 1]]) -> Polyline<1> {
        Polyline::new(points.to_vec()).unwrap()
    }

    fn quintic() -> PiecewiseTrajectory<1> {
        let p = line(&[[0.0], [1.0]]);
        solve_min_effort(&p, &[1.0], &BoundaryState::rest([0.0], 3), &BoundaryState::rest([1.0], 3), 3).unwrap()
    }

    #[test]
    fn rest_to_rest_quintic() {
        let t = quintic();
        let expect = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (c, e) in t.segments()[0].coeffs.iter().zip(expect) {
            assert!((c[0] - e).abs() < 1e-8, "{c:?} vs {e}");
        }
        assert!((t.control_cost() - 720.0).abs() < 1e-6);
        assert!(t.eval(0.0, 0).unwrap()[0].abs() < 1e-12);
        assert!((t.eval(1.0, 0).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((t.eval(0.5, 0).unwrap()[0] - 0.5).abs() < 1e-12);
        assert!(t.eval(0.0, 1).unwrap()[0].abs() < 1e-12);
        assert!(t.eval(1.5, 0).is_err());
    }

    #[test]
    fn time_allocation_examples() {
        let p = Polyline::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [4.0, 2.0]]).unwrap();
        assert_eq!(time_allocation(&p, 1.0).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(time_allocation(&p, 2.0).unwrap(), vec![0.5, 1.0, 1.5]);
        let short = Polyline::new(vec![[0.0, 0.0], [1e-5, 0.0]]).unwrap();
        assert_eq!(time_allocation(&short, 1.0).unwrap(), vec![MIN_DURATION]);
        assert!(time_allocation(&p, 0.0).is_err());
        assert_eq!(uniform_time_allocation(&p, 2.0).unwrap(), vec![1.0; 3]);
        assert_eq!(TimeAllocation::Proportional.durations(&p, 1.0).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn collinear_waypoints_stay_on_line() {
        let p = Polyline::new(vec![[0.0, 0.0, 0.0], [1.0, 2.0, 0.5], [3.0, 6.0, 1.5], [4.0, 8.0, 2.0]]).unwrap();
        let tau = [1.0, 1.5, 0.7];
        let t = solve_min_effort(&p, &tau, &BoundaryState::rest(p.points()[0], 3), &BoundaryState::rest(*p.last(), 3), 3).unwrap();
        for k in 0..=100 {
            let x = t.eval(t.total_time() * k as f64 / 100.0, 0).unwrap();
            assert!((x[1] - 2.0 * x[0]).abs() < 1e-9 && (x[2] - 0.5 * x[0]).abs() < 1e-9);
        }
        assert!(t.continuity_error() < 1e-9);
    }

    #[test]
    fn constant_velocity_costs_nothing() {
        let p = Polyline::new(vec![[0.0, 0.0], [2.0, 1.0]]).unwrap();
        let v = [[2.0, 1.0], [0.0, 0.0]];
        let bc0 = BoundaryState { position: [0.0, 0.0], derivatives: v.to_vec() };
        let bcf = BoundaryState { position: [2.0, 1.0], derivatives: v.to_vec() };
        let t = solve_min_effort(&p, &[1.0], &bc0, &bcf, 3).unwrap();
        assert!(t.control_cost().abs() < 1e-20);
        assert!((t.eval(0.5, 0).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cost_is_additive() {
        let t = quintic();
        let two = PiecewiseTrajectory::new(3, [t.segments(), t.segments()].concat()).unwrap();
        assert!((two.control_cost() - 1440.0).abs() < 1e-6);
    }

    #[test]
    fn rescale_scales_derivatives_and_cost() {
        let t = quintic();
        assert_eq!(t.time_rescale(1.0).unwrap(), t);
        let slow = t.time_rescale(2.0).unwrap();
        for k in 0..=20 {
            let u = k as f64 / 20.0;
            let a = t.eval(u, 0).unwrap()[0];
            let b = slow.eval(2.0 * u, 0).unwrap()[0];
            assert!((a - b).abs() < 1e-9);
            assert!((t.eval(u, 1).unwrap()[0] / 2.0 - slow.eval(2.0 * u, 1).unwrap()[0]).abs() < 1e-9);
            assert!((t.eval(u, 2).unwrap()[0] / 4.0 - slow.eval(2.0 * u, 2).unwrap()[0]).abs() < 1e-9);
        }
        assert!((slow.control_cost() - 720.0 * 2f64.powi(-5)).abs() < 1e-9);
        assert!(t.time_rescale(0.0).is_err());
    }

    #[test]
    fn corridor_check_examples() {
        let p = Polyline::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let tau = [1.0, 1.0];
        let t = solve_min_effort(&p, &tau, &BoundaryState::rest([0.0, 0.0], 3), &BoundaryState::rest([1.0, 1.0], 3), 3).unwrap();
        let roomy = vec![
            Polytope::from_box(&Aabb::new([-1.0, -1.0], [2.0, 2.0])),
            Polytope::from_box(&Aabb::new([-1.0, -1.0], [2.0, 2.0])),
        ];
        let r = corridor_check(&t, &roomy, 64).unwrap();
        assert!(r.violations.is_empty());
        // the corner is rounded off, so the first piece overshoots past x = 1 or below y = 0
        let tight = vec![
            Polytope::from_box(&Aabb::new([-0.01, -0.001], [1.0, 0.001])),
            Polytope::from_box(&Aabb::new([0.999, -0.01], [1.001, 1.01])),
        ];
        let r = corridor_check(&t, &tight, 64).unwrap();
        assert!(!r.violations.is_empty());
        let mid = corridor_check(&t, &roomy, 1).unwrap();
        assert_eq!(mid.segment_max.len(), 2);
        assert!(corridor_check(&t, &roomy[..1], 4).is_err());
    }

    #[test]
    fn corridor_ladder_pins_violating_segments() {
        let p = Polyline::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let tight = vec![
            Polytope::from_box(&Aabb::new([-0.01, -0.001], [1.001, 0.001])),
            Polytope::from_box(&Aabb::new([0.999, -0.01], [1.001, 1.01])),
        ];
        let fit = solve_in_corridor(&p, &[1.0, 1.0], 3, &tight, 64, 1e-4).unwrap();
        assert!(fit.report.max_violation() <= 1e-4);
        assert!(fit.pinned[1]);
    }

    #[test]
    fn perturbation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = rng.random_range(1..=3usize);
            let pts: Vec<[f64; 2]> = (0..=m).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let tau: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..2.0)).collect();
            let s = 3;
            let sol = MinEffort::solve(&pts, &tau, &BoundaryState::rest(pts[0], s), &BoundaryState::rest(pts[m], s), s, &[]).unwrap();
            let best = sol.cost();
            assert!((best - sol.trajectory().control_cost()).abs() <= 1e-8 * best.max(1.0));
            for _ in 0..1000 {
                let mut z = sol.knot_states().to_vec();
                for i in 1..m {
                    for d in 1..s {
                        for c in z[i * s + d].iter_mut() {
                            *c += rng.random_range(-0.5..0.5);
                        }
                    }
                }
                let other = hermite_trajectory(&z, &tau, s).unwrap().control_cost();
                assert!(other >= best - 1e-9 * best.max(1.0));
            }
        }
    }

    fn jerk_cost(pts: &[[f64; 3]], tau: &[f64]) -> f64 {
        let m = tau.len();
        MinEffort::solve(pts, tau, &BoundaryState::rest(pts[0], 3), &BoundaryState::rest(pts[m], 3), 3, &[])
            .unwrap()
            .cost()
    }

    #[test]
    fn waypoint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = rng.random_range(2..=5usize);
            let pts: Vec<[f64; 3]> = (0..=m).map(|_| core::array::from_fn(|_| rng.random_range(-3.0..3.0))).collect();
            let tau: Vec<f64> = (0..m).map(|_| rng.random_range(0.4..1.5)).collect();
            let sol = MinEffort::solve(&pts, &tau, &BoundaryState::rest(pts[0], 3), &BoundaryState::rest(pts[m], 3), 3, &[]).unwrap();
            let g = sol.position_gradient();
            let h = 1e-5;
            for i in 0..=m {
                for d in 0..3 {
                    let mut a = pts.clone();
                    let mut b = pts.clone();
                    a[i][d] += h;
                    b[i][d] -= h;
                    let fd = (jerk_cost(&a, &tau) - jerk_cost(&b, &tau)) / (2.0 * h);
                    assert!((fd - g[i][d]).abs() <= 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g[i][d]);
                }
            }
        }
    }

    #[test]
    fn pullback_matches_finite_differences() {
        // f = Σ samples of a fixed linear functional of positions along the trajectory
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<[f64; 2]> = (0..5).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let tau = [0.8, 1.1, 0.6, 1.3];
        let c = [0.7, -1.3];
        let f = |p: &[[f64; 2]]| -> (f64, Vec<[f64; 2]>) {
            let sol = MinEffort::solve(p, &tau, &BoundaryState::rest(p[0], 3), &BoundaryState::rest(p[4], 3), 3, &[]).unwrap();
            let mut dz = vec![[0.0; 2]; sol.knot_states().len()];
            let mut total = 0.0;
            for seg in 0..4 {
                for k in 0..5 {
                    let (x, w) = sol.sample(seg, (k as f64 + 0.5) / 5.0);
                    let v = dot(&c, &x);
                    total += v * v;
                    for (j, wj) in w.iter().enumerate() {
                        for d in 0..2 {
                            dz[seg * 3 + j][d] += 2.0 * v * c[d] * wj;
                        }
                    }
                }
            }
            (total, sol.pullback(&dz))
        };
        let (_, g) = f(&pts);
        let h = 1e-6;
        for i in 0..5 {
            for d in 0..2 {
                let mut a = pts.clone();
                let mut b = pts.clone();
                a[i][d] += h;
                b[i][d] -= h;
                let fd = (f(&a).0 - f(&b).0) / (2.0 * h);
                assert!((fd - g[i][d]).abs() <= 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g[i][d]);
            }
        }
    }

    #[test]
    fn snap_order_is_supported() {
        let p = line(&[[0.0], [1.0], [3.0]]);
        let t = solve_min_effort(&p, &[1.0, 1.0], &BoundaryState::rest([0.0], 4), &BoundaryState::rest([3.0], 4), 4).unwrap();
        assert!(t.continuity_error() < 1e-9);
        assert_eq!(t.segments()[0].coeffs.len(), 8);
        let acc = line(&[[0.0], [1.0]]);
        let t2 = solve_min_effort(&acc, &[1.0], &BoundaryState::rest([0.0], 2), &BoundaryState::rest([1.0], 2), 2).unwrap();
        // minimum-acceleration rest-to-rest cubic 3t² − 2t³, cost ∫(6 − 12t)² = 12
        assert!((t2.control_cost() - 12.0).abs() < 1e-9);
    }
}
