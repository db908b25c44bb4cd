//! Dense complex linear algebra shared by every module.
//!
//! Matrices are column-major [`CMat`]s. Hot products go through [`gemm`],
//! which works on strided views so that transposes and the tall/wide
//! reinterpretations of stacked operators cost nothing.

use alloc::vec;
use alloc::vec::Vec;

use matrixmultiply::CGemmOption;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

fn extent(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// Borrowed strided matrix view.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    data: &'a [Complex64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [Complex64], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(extent(rows, cols, rs, cs) <= data.len(), "view exceeds buffer");
        Self { data, rows, cols, rs, cs }
    }

    pub fn col_major(data: &'a [Complex64], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, 1, rows)
    }

    pub fn from_mat(m: &'a CMat) -> Self {
        Self::col_major(m.as_slice(), m.nrows(), m.ncols())
    }

    /// Transposed view (no conjugation).
    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.rs + j * self.cs]
    }

    pub fn to_mat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Mutable strided matrix view.
#[derive(Debug)]
pub struct MatMut<'a> {
    data: &'a mut [Complex64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [Complex64], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(extent(rows, cols, rs, cs) <= data.len(), "view exceeds buffer");
        Self { data, rows, cols, rs, cs }
    }

    pub fn col_major(data: &'a mut [Complex64], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, 1, rows)
    }

    pub fn from_mat(m: &'a mut CMat) -> Self {
        let (rows, cols) = m.shape();
        Self::col_major(m.as_mut_slice(), rows, cols)
    }
}

/// `c <- alpha * a * b + beta * c`.
pub fn gemm(alpha: Complex64, a: MatRef<'_>, b: MatRef<'_>, beta: Complex64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (a.rows, b.cols), "output shape mismatch");
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    // SAFETY: every view was bounds-checked on construction and `c` is a
    // unique borrow, so it cannot alias `a` or `b`. `Complex64` is
    // `repr(C)` with the same layout as `[f64; 2]`.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            a.rows,
            a.cols,
            b.cols,
            [alpha.re, alpha.im],
            a.data.as_ptr() as *const [f64; 2],
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr() as *const [f64; 2],
            b.rs as isize,
            b.cs as isize,
            [beta.re, beta.im],
            c.data.as_mut_ptr() as *mut [f64; 2],
            c.rs as isize,
            c.cs as isize,
        );
    }
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    gemm(ONE, MatRef::from_mat(a), MatRef::from_mat(b), ZERO, MatMut::from_mat(&mut out));
    out
}

/// `a * b * c`.
pub fn matmul3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    matmul(&matmul(a, b), c)
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `Tr(a† b)`.
pub fn inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Maximum absolute column sum.
pub fn norm_1(m: &CMat) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    libm::sqrt(m.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEig {
    pub fn new(m: &CMat) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        Self { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V f(D) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        let vc = conj(&self.vectors);
        let mut out = CMat::zeros(n, n);
        gemm(
            ONE,
            MatRef::from_mat(&scaled),
            MatRef::from_mat(&vc).t(),
            ZERO,
            MatMut::from_mat(&mut out),
        );
        out
    }
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    HermEig::new(h).apply(|lam| Complex64::new(0.0, -lam * t).exp())
}

/// Matrix exponential of a general square matrix by scaling and squaring
/// of a truncated Taylor series.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = norm_1(a);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = libm::ceil(libm::log2(norm / 0.5)) as u32;
    }
    let scaled = a * Complex64::new(libm::ldexp(1.0, -(squarings as i32)), 0.0);
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=40 {
        term = matmul(&term, &scaled) / Complex64::new(k as f64, 0.0);
        result += &term;
        if max_abs(&term) <= 1e-18 * max_abs(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// `exp(t a) v` for a vector `v`, by substepped Taylor series. Suited to
/// small propagation windows where forming the full exponential would be
/// wasteful.
pub fn expm_action(a: &CMat, t: f64, v: &[Complex64]) -> Vec<Complex64> {
    let n = a.nrows();
    assert_eq!(v.len(), n);
    let norm = norm_1(a) * libm::fabs(t);
    let steps = if norm > 0.5 { libm::ceil(norm / 0.5) as usize } else { 1 };
    let h = t / steps as f64;
    let mut x = v.to_vec();
    let mut term = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    for _ in 0..steps {
        term.copy_from_slice(&x);
        for k in 1..=40 {
            gemm(
                Complex64::new(h / k as f64, 0.0),
                MatRef::from_mat(a),
                MatRef::col_major(&term, n, 1),
                ZERO,
                MatMut::col_major(&mut next, n, 1),
            );
            core::mem::swap(&mut term, &mut next);
            let mut tn = 0.0f64;
            let mut xn = 0.0f64;
            for (xi, ti) in x.iter_mut().zip(term.iter()) {
                *xi += ti;
                tn = tn.max(ti.norm());
                xn = xn.max(xi.norm());
            }
            if tn <= 1e-18 * xn {
                break;
            }
        }
    }
    x
}

/// Square root and inverse square root of a Hermitian positive matrix.
#[derive(Debug, Clone)]
pub struct HermRoots {
    pub sqrt: CMat,
    pub inv_sqrt: CMat,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Whether any eigenvalue was raised to the relative floor.
    pub floored: bool,
}

/// Eigenvalues below `floor_rel * max` are raised to that floor; anything
/// more negative than `-neg_tol * max` is rejected.
pub fn herm_roots(m: &CMat, floor_rel: f64, neg_tol: f64) -> Result<HermRoots> {
    let eig = HermEig::new(&hermitian_part(m));
    let max = eig.max();
    let min = eig.min();
    if !(max > 0.0) || min < -neg_tol * max {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let floor = floor_rel * max;
    let floored = min < floor;
    let clamp = |x: f64| if x < floor { floor } else { x };
    let sqrt = eig.apply(|x| Complex64::new(libm::sqrt(clamp(x)), 0.0));
    let inv_sqrt = eig.apply(|x| Complex64::new(1.0 / libm::sqrt(clamp(x)), 0.0));
    Ok(HermRoots { sqrt, inv_sqrt, min_eigenvalue: min, max_eigenvalue: max, floored })
}
