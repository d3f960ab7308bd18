//! Small dense complex linear algebra.
//!
//! Sized for K×K channel matrices (K = 6) and the normal equations of the
//! training-sequence fit (a few hundred unknowns). Row-major storage.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{czero, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| *v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).fold(czero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// Determinant by partially pivoted LU.
    pub fn det(&self) -> Complex<T> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Complex::new(T::one(), T::zero());
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].norm().partial_cmp(&a[(y, k)].norm()).unwrap())
                .unwrap();
            if a[(p, k)].norm_sqr() == T::zero() {
                return czero();
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            let piv = a[(k, k)];
            det = det * piv;
            for i in k + 1..n {
                let f = a[(i, k)] / piv;
                if f.norm_sqr() == T::zero() {
                    continue;
                }
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
            }
        }
        det
    }

    /// Inverse by Gauss–Jordan elimination; `None` when a pivot underflows
    /// `rel_tol` times the largest entry.
    pub fn inverse(&self, rel_tol: T) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let scale = self.data.iter().map(|v| v.norm()).fold(T::zero(), T::max);
        if scale == T::zero() {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].norm().partial_cmp(&a[(y, k)].norm()).unwrap())
                .unwrap();
            if a[(p, k)].norm() <= rel_tol * scale {
                return None;
            }
            a.swap_rows(p, k);
            inv.swap_rows(p, k);
            let piv = a[(k, k)].inv();
            for j in 0..n {
                a[(k, j)] = a[(k, j)] * piv;
                inv[(k, j)] = inv[(k, j)] * piv;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let akj = a[(k, j)];
                    let ikj = inv[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * akj;
                    inv[(i, j)] = inv[(i, j)] - f * ikj;
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Singular values in descending order (square roots of the eigenvalues
    /// of `AᴴA`).
    pub fn singular_values(&self) -> Vec<T> {
        let gram = &self.adjoint() * self;
        let (mut ev, _) = hermitian_eigen(&gram);
        ev.iter_mut().for_each(|v| *v = v.max(T::zero()).sqrt());
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }
}

impl<T: Real> Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product: inner dimensions differ");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns `(eigenvalues, eigenvectors)` with eigenvectors as
/// columns; eigenvalues are not sorted.
pub fn hermitian_eigen<T: Real>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a = m.clone();
    let mut v = CMat::identity(n);
    let tol = T::epsilon() * T::lit(0.5);
    let total = a.frobenius();
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= tol * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= T::min_positive_value() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (T::lit(2.0) * mag);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    let sgn = if theta > T::zero() { T::one() } else { -T::one() };
                    sgn / (Float::abs(theta) + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // J = D·R with D = diag(1, e^{-iφ}) on (p, q); J^H A J zeroes a_pq.
                let ph = apq.conj() / mag;
                let jpp = Complex::new(c, T::zero());
                let jpq = Complex::new(s, T::zero());
                let jqp = ph * (-s);
                let jqq = ph * c;
                // A ← A J (columns p, q)
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * jpp + aiq * jqp;
                    a[(i, q)] = aip * jpq + aiq * jqq;
                }
                // A ← J^H A (rows p, q)
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = jpp.conj() * apj + jqp.conj() * aqj;
                    a[(q, j)] = jpq.conj() * apj + jqq.conj() * aqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * jpp + viq * jqp;
                    v[(i, q)] = vip * jpq + viq * jqq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Haar-distributed random unitary matrix (QR of a complex Gaussian matrix
/// with the phase of R's diagonal divided out).
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat<T> {
    let mut cols: Vec<Vec<Complex<f64>>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex::new(re, im)
                })
                .collect()
        })
        .collect();
    // modified Gram–Schmidt; the positive-real normalisation of each column
    // realises R with a positive diagonal.
    for k in 0..n {
        for j in 0..k {
            let (head, tail) = cols.split_at_mut(k);
            let qj = &head[j];
            let proj: Complex<f64> = qj.iter().zip(tail[0].iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, q) in tail[0].iter_mut().zip(qj) {
                *x -= proj * q;
            }
        }
        let norm = cols[k].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        cols[k].iter_mut().for_each(|v| *v /= norm);
    }
    CMat::from_fn(n, n, |i, j| {
        Complex::new(T::lit(cols[j][i].re), T::lit(cols[j][i].im))
    })
}

/// `exp(i·G)` for Hermitian `G`, a unitary matrix.
pub fn expm_i_hermitian<T: Real>(g: &CMat<T>) -> CMat<T> {
    let (ev, v) = hermitian_eigen(g);
    let n = g.rows();
    let phases: Vec<Complex<T>> = ev.iter().map(|&l| Complex::new(l.cos(), l.sin())).collect();
    CMat::from_fn(n, n, |i, j| {
        (0..n).fold(czero(), |acc, k| acc + v[(i, k)] * phases[k] * v[(j, k)].conj())
    })
}

/// Cholesky factorisation `A = L Lᴴ` of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T: Real> {
    n: usize,
    l: Vec<Complex<T>>,
}

impl<T: Real> Cholesky<T> {
    /// Factorises `a`; fails (returns the offending pivot index) when a pivot
    /// falls below `rel_tol` times the largest diagonal entry.
    pub fn factor(a: &CMat<T>, rel_tol: T) -> Result<Self, usize> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let dmax = (0..n).map(|i| a[(i, i)].re).fold(T::zero(), T::max);
        let mut l = vec![czero::<T>(); n * n];
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > rel_tol * dmax) || dmax <= T::zero() {
                return Err(j);
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i].conj() * b[k];
            }
            b[i] = s / self.l[i * n + i].re;
        }
    }
}
