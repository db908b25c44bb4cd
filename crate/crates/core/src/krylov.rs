//! Krylov–Schur iteration for the rightmost eigenvalue of a matrix-free
//! linear map.
//!
//! Used for the dominant eigenpairs of tilted maps, whose spectral gap can
//! become tiny near dynamical phase coexistence; a thick-restarted Krylov
//! subspace resolves such gaps in far fewer applications than plain power
//! iteration.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::linalg::ZERO;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    /// Maximal Krylov subspace dimension.
    pub dim: usize,
    /// Relative residual `|A x - lambda x| / (|lambda| |x|)` at which to stop.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self { dim: 30, tol: 1e-12, max_restarts: 400 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub value: Complex64,
    /// Unit-norm eigenvector estimate.
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub applications: usize,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [Complex64], s: f64) {
    for z in v.iter_mut() {
        *z *= s;
    }
}

/// `[c s; -conj(s) c] [f; g] = [r; 0]` with real `c`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let nf = f.norm();
    let r = libm::hypot(nf, g.norm());
    (nf / r, (f / nf) * g.conj() / r)
}

/// `x <- c x + s y`, `y <- c y - conj(s) x`.
fn rotate(x: &mut Complex64, y: &mut Complex64, c: f64, s: Complex64) {
    let (a, b) = (*x, *y);
    *x = a * c + s * b;
    *y = b * c - s.conj() * a;
}

/// Swaps the adjacent diagonal entries `k` and `k + 1` of the upper
/// triangular `t`, updating the Schur vectors `q` so that `q t q†` is kept.
fn swap_adjacent(t: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let (mut x, mut y) = (t[(k, j)], t[(k + 1, j)]);
        rotate(&mut x, &mut y, c, s);
        t[(k, j)] = x;
        t[(k + 1, j)] = y;
    }
    for i in 0..k {
        let (mut x, mut y) = (t[(i, k)], t[(i, k + 1)]);
        rotate(&mut x, &mut y, c, s.conj());
        t[(i, k)] = x;
        t[(i, k + 1)] = y;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..q.nrows() {
        let (mut x, mut y) = (q[(i, k)], q[(i, k + 1)]);
        rotate(&mut x, &mut y, c, s.conj());
        q[(i, k)] = x;
        q[(i, k + 1)] = y;
    }
}

/// Reorders a complex Schur form so that diagonal entries appear by
/// decreasing real part.
fn sort_schur(t: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>) {
    let n = t.nrows();
    for target in 0..n {
        let best = (target..n)
            .max_by(|&a, &b| t[(a, a)].re.partial_cmp(&t[(b, b)].re).unwrap_or(core::cmp::Ordering::Equal))
            .unwrap_or(target);
        for k in (target..best).rev() {
            swap_adjacent(t, q, k);
        }
    }
}

/// Rightmost eigenpair (largest real part) of the map `apply`, started
/// from `start`.
pub fn arnoldi_rightmost<F>(mut apply: F, start: &[Complex64], opts: &ArnoldiOptions) -> EigenEstimate
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = start.len();
    let m = opts.dim.max(2).min(n.max(1));
    let keep = (m / 2).max(1);
    let nx = norm(start);
    assert!(nx > 0.0, "starting vector must be nonzero");
    let mut v0 = start.to_vec();
    scale(&mut v0, 1.0 / nx);

    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut h = DMatrix::<Complex64>::zeros(m + 1, m);
    let mut filled = 0;
    let mut applications = 0;
    let mut w = vec![ZERO; n];
    let mut best = EigenEstimate {
        value: ZERO,
        vector: basis[0].clone(),
        residual: f64::INFINITY,
        applications: 0,
        converged: false,
    };

    for _ in 0..=opts.max_restarts {
        let mut size = m;
        let mut invariant = false;
        for j in filled..m {
            apply(&basis[j], &mut w);
            applications += 1;
            let before = norm(&w);
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(v, &w);
                    h[(i, j)] += c;
                    axpy(-c, v, &mut w);
                }
            }
            let after = norm(&w);
            if after <= 1e-13 * before.max(1e-300) || j + 1 == n {
                size = j + 1;
                invariant = true;
                break;
            }
            h[(j + 1, j)] = Complex64::new(after, 0.0);
            let mut next = w.clone();
            scale(&mut next, 1.0 / after);
            basis.truncate(j + 1);
            basis.push(next);
        }

        let hm = h.view((0, 0), (size, size)).into_owned();
        let (mut q, mut t) = Schur::new(hm).unpack();
        sort_schur(&mut t, &mut q);
        let lam = t[(0, 0)];

        let mut ritz = vec![ZERO; n];
        for (i, v) in basis.iter().enumerate().take(size) {
            axpy(q[(i, 0)], v, &mut ritz);
        }
        let nr = norm(&ritz);
        scale(&mut ritz, 1.0 / nr);
        let beta = if invariant { 0.0 } else { h[(size, size - 1)].norm() };
        let estimate = beta * q[(size - 1, 0)].norm() / lam.norm().max(1e-300);

        if estimate <= opts.tol || invariant {
            apply(&ritz, &mut w);
            applications += 1;
            let res: f64 = w.iter().zip(&ritz).map(|(wi, ri)| (wi - lam * ri).norm_sqr()).sum();
            let residual = libm::sqrt(res) / lam.norm().max(1e-300);
            if residual < best.residual {
                best = EigenEstimate { value: lam, vector: ritz.clone(), residual, applications, converged: false };
            }
            best.applications = applications;
            if residual <= opts.tol {
                best.converged = true;
                return best;
            }
            if invariant {
                // Restart from the Ritz vector alone; the subspace was exhausted.
                basis = vec![ritz];
                h.fill(ZERO);
                filled = 0;
                continue;
            }
        } else if estimate < best.residual {
            best = EigenEstimate { value: lam, vector: ritz, residual: estimate, applications, converged: false };
        }
        best.applications = applications;

        // Thick restart on the leading Schur vectors.
        let k = keep.min(size - 1).max(1);
        let mut kept: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        for c in 0..k {
            let mut u = vec![ZERO; n];
            for (i, v) in basis.iter().enumerate().take(size) {
                axpy(q[(i, c)], v, &mut u);
            }
            kept.push(u);
        }
        let residual_vector = basis[size].clone();
        let coupling: Vec<Complex64> = (0..k).map(|c| h[(size, size - 1)] * q[(size - 1, c)]).collect();
        h.fill(ZERO);
        for i in 0..k {
            for j in i..k {
                h[(i, j)] = t[(i, j)];
            }
        }
        for (c, b) in coupling.into_iter().enumerate() {
            h[(k, c)] = b;
        }
        kept.push(residual_vector);
        basis = kept;
        filled = k;
    }
    best
}
