//! Small fixed-size vector helpers and dense/banded solvers.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // float methods under no_std
use num_traits::Float;

#[inline]
pub fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sub<const N: usize>(a: &[f64; N], b: &[f64; N]) -> [f64; N] {
    core::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    core::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

#[inline]
pub fn norm<const N: usize>(a: &[f64; N]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    norm(&sub(a, b))
}

/// Solves `L x = v` for lower-triangular `L`.
pub fn solve_lower<const N: usize>(l: &[[f64; N]; N], v: &[f64; N]) -> [f64; N] {
    let mut x = [0.0; N];
    for i in 0..N {
        let mut acc = v[i];
        for j in 0..i {
            acc -= l[i][j] * x[j];
        }
        x[i] = acc / l[i][i];
    }
    x
}

/// Solves `Lᵀ x = v` for lower-triangular `L`.
pub fn solve_lower_t<const N: usize>(l: &[[f64; N]; N], v: &[f64; N]) -> [f64; N] {
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let mut acc = v[i];
        for j in i + 1..N {
            acc -= l[j][i] * x[j];
        }
        x[i] = acc / l[i][i];
    }
    x
}

/// `L v`
pub fn mul_lower<const N: usize>(l: &[[f64; N]; N], v: &[f64; N]) -> [f64; N] {
    core::array::from_fn(|i| (0..=i).map(|j| l[i][j] * v[j]).sum())
}

/// `Lᵀ v`
pub fn mul_lower_t<const N: usize>(l: &[[f64; N]; N], v: &[f64; N]) -> [f64; N] {
    core::array::from_fn(|j| (j..N).map(|i| l[i][j] * v[i]).sum())
}

/// Cholesky factor of a symmetric positive definite matrix. Returns `None`
/// when a pivot is not strictly positive.
pub fn cholesky<const N: usize>(m: &[[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut l = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut acc = m[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(acc > 0.0) {
                    return None;
                }
                l[i][i] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Some(l)
}

/// Dense row-major square solve with partial pivoting. `a` is `n×n`.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / diag;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Symmetric positive definite matrix in lower band storage.
///
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `data[i * (bw + 1) + (j + bw - i)]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`; the symmetric partner is implied.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place banded Cholesky. Fails on a non-positive pivot.
    pub fn factor(mut self) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut acc = self.data[self.idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    acc -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(acc > 0.0) || !acc.is_finite() {
                        return None;
                    }
                    let k = self.idx(i, i);
                    self.data[k] = acc.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = acc / self.data[self.idx(j, j)];
                }
            }
        }
        Some(BandedCholesky { inner: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    inner: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.inner;
        let (n, bw) = (m.n, m.bw);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in i.saturating_sub(bw)..i {
                acc -= m.data[m.idx(i, k)] * y[k];
            }
            y[i] = acc / m.data[m.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                acc -= m.data[m.idx(k, i)] * y[k];
            }
            y[i] = acc / m.data[m.idx(i, i)];
        }
        y
    }
}
