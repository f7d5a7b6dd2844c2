//! Banded matrices and a partially pivoted banded LU factorization.

use num_complex::Complex64;
use std::ops::{Add, Mul};

/// Row-major band storage: row `i` keeps columns `i - kl ..= i + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

pub trait BandScalar: Copy + Add<Output = Self> + Mul<Output = Self> + PartialEq {
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
}

impl BandScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl BandScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

impl<T: BandScalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    /// Diagonal matrix.
    pub fn diagonal(d: &[T]) -> Self {
        let mut out = Self::zeros(d.len(), 0, 0);
        for (i, &v) in d.iter().enumerate() {
            out.set(i, i, v);
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    /// Total number of stored diagonals.
    pub fn bandwidth(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && i < self.n && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[i * self.width() + (j + self.kl - i)]
        } else {
            T::zero()
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Column range stored in row `i`.
    pub fn row_columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.row_columns(i)
                    .fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
            })
            .collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_columns(i) {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn conj_transpose(&self) -> Self {
        self.transpose().map(T::conj)
    }

    /// `diag(left) · self · diag(right)`.
    pub fn scale_rows_cols(&self, left: &[T], right: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in self.row_columns(i) {
                out.set(i, j, left[i] * self.get(i, j) * right[j]);
            }
        }
        out
    }

    /// Matrix product; bandwidths add.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_columns(i) {
                let a = self.get(i, k);
                for j in other.row_columns(k) {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// Sum with another band matrix, widening to the larger bandwidths.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for m in [self, other] {
            for i in 0..m.n {
                for j in m.row_columns(i) {
                    out.add_to(i, j, m.get(i, j));
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.row_columns(i)
                    .map(|j| self.get(i, j).modulus())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl BandMatrix<f64> {
    pub fn to_complex(&self) -> BandMatrix<Complex64> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

impl BandMatrix<Complex64> {
    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|v| v * s)
    }
}

/// Failure of [`BandLu::factor`]: the pivot of column `column` fell below threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
    pub pivot: f64,
    pub threshold: f64,
}

/// LU factorization with partial pivoting of a complex band matrix.
///
/// Row swaps widen the upper band of `U` to `kl + ku`; each working row stores
/// columns `i - kl ..= i + kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Complex64>,
    pivots: Vec<usize>,
    min_pivot: f64,
}

impl BandLu {
    /// Pivots below `rel_tol · ‖A‖_∞` are reported as singular.
    pub fn factor(a: &BandMatrix<Complex64>, rel_tol: f64) -> Result<Self, SingularPivot> {
        let n = a.n();
        let kl = a.lower_bandwidth();
        let ku = a.upper_bandwidth();
        let width = 2 * kl + ku + 1;
        let threshold = rel_tol * a.norm_inf();
        let zero = Complex64::new(0.0, 0.0);
        let mut rows = vec![zero; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for i in 0..n {
            for j in a.row_columns(i) {
                rows[idx(i, j)] = a.get(i, j);
            }
        }
        let mut pivots = vec![0; n];
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = rows[idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = rows[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            min_pivot = min_pivot.min(best);
            if !(best > threshold) {
                return Err(SingularPivot {
                    column: k,
                    pivot: best,
                    threshold,
                });
            }
            if p != k {
                for j in k..=last_col {
                    rows.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = rows[idx(k, k)];
            for i in k + 1..=last_row {
                let l = rows[idx(i, k)] / piv;
                rows[idx(i, k)] = l;
                if l != zero {
                    for j in k + 1..=last_col {
                        let u = rows[idx(k, j)];
                        rows[idx(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            rows,
            pivots,
            min_pivot,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let width = 2 * kl + ku + 1;
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.rows[idx(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.rows[idx(i, j)] * b[j];
            }
            b[i] = s / self.rows[idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
