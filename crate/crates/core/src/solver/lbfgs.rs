//! Limited-memory BFGS with a strong-Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `‖∇f‖∞ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop when the relative decrease of one iteration drops below this.
    /// Zero disables the test.
    pub f_rel_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iters: 500,
            grad_tol: 1e-8,
            f_rel_tol: 0.0,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Gradient (or relative decrease) tolerance met.
    Converged,
    MaxIterations,
    /// Line search could not make progress; the best iterate is returned.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub status: Status,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x0: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    opts: &'a LbfgsOptions,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn probe(&mut self, alpha: f64) -> Probe {
        let x: Vec<f64> = self.x0.iter().zip(self.dir).map(|(x, d)| x + alpha * d).collect();
        let mut g = vec![0.0; x.len()];
        let f = (self.objective)(&x, &mut g);
        let slope = dot(&g, self.dir);
        Probe { alpha, f, slope, x, g }
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.f.is_finite() && p.f <= self.f0 + self.opts.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.opts.c2 * self.slope0
    }

    /// Returns an accepted probe, or the best Armijo point if the strong
    /// Wolfe conditions could not be met.
    fn run(&mut self, alpha0: f64) -> Option<Probe> {
        let mut prev = Probe {
            alpha: 0.0,
            f: self.f0,
            slope: self.slope0,
            x: self.x0.to_vec(),
            g: Vec::new(),
        };
        let mut alpha = alpha0;
        for i in 0..self.opts.max_line_search {
            let p = self.probe(alpha);
            if !p.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&p) || (i > 0 && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha = 2.0 * p.alpha;
            prev = p;
        }
        (prev.alpha > 0.0).then_some(prev)
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Option<Probe> {
        for _ in 0..self.opts.max_line_search {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= 1e-16 * b.max(1.0) {
                break;
            }
            let trial = cubic_min(&lo, &hi)
                .filter(|t| *t > a + 0.1 * width && *t < b - 0.1 * width)
                .unwrap_or(0.5 * (a + b));
            let p = self.probe(trial);
            if !self.armijo(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Some(p);
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        (lo.alpha > 0.0).then_some(lo)
    }
}

/// Minimizer of the cubic interpolating value and slope at two probes.
fn cubic_min(p: &Probe, q: &Probe) -> Option<f64> {
    if !q.f.is_finite() || !q.slope.is_finite() {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let t = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the value.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if n == 0 || inf_norm(&g) <= opts.grad_tol {
            status = Status::Converged;
            break;
        }

        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if history.is_empty() {
            (1.0 / inf_norm(&dir)).min(1.0)
        } else {
            1.0
        };

        let accepted = LineSearch {
            objective: &mut objective,
            x0: &x,
            dir: &dir,
            f0: f,
            slope0: slope,
            opts,
        }
        .run(alpha0);
        let Some(p) = accepted else {
            status = Status::Stalled;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = f - p.f;
        x = p.x;
        g = p.g;
        f = p.f;
        if opts.f_rel_tol > 0.0 && decrease <= opts.f_rel_tol * f.abs().max(1.0) {
            status = Status::Converged;
            break;
        }
    }
    if status == Status::MaxIterations && inf_norm(&g) <= opts.grad_tol {
        status = Status::Converged;
    }
    Ok(Minimum { x, f, iterations, status })
}
