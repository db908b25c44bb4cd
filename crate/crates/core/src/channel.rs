//! Kraus families, the average channel and its dual.
//!
//! All `2^L` operators live in one column-major "tall" buffer of shape
//! `(n d) x d` (block `k` occupies rows `k d .. (k+1) d`) next to its
//! elementwise conjugate. Reinterpreting the same memory as a `d x (n d)`
//! "wide" matrix lets a full channel application run as two large GEMMs
//! instead of `2 n` small ones.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, expm_hermitian, gemm, hermitian_part, identity, matmul, max_abs_diff, trace, CMat, HermEig, MatMut,
    MatRef, ONE, ZERO,
};
use crate::model::{bit, build_collision_block, build_system_hamiltonian, ModelParams};
use crate::wht::fwht_segments;

/// Largest chain the dense `4^L` construction accepts.
pub const DENSE_SIZE_CAP: usize = 4;

/// Default iteration budget for fixed-point searches.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Construction {
    /// Blocks of the exponentiated joint Hamiltonian on `4^L` states.
    Dense4L,
    /// Per-sign-string exponentials combined by a Walsh–Hadamard transform.
    BlockWht,
    /// Doob-transformed family at counting field `s`.
    Biased { s: f64 },
}

/// `n` operators of size `d x d` stored tall, plus conjugate copy.
#[derive(Debug, Clone, PartialEq)]
pub struct OpStack {
    d: usize,
    n: usize,
    tall: Vec<Complex64>,
    conj: Vec<Complex64>,
}

impl OpStack {
    pub fn from_ops(ops: &[CMat]) -> Self {
        let n = ops.len();
        assert!(n > 0);
        let d = ops[0].nrows();
        let mut tall = vec![ZERO; n * d * d];
        for (k, op) in ops.iter().enumerate() {
            assert_eq!(op.shape(), (d, d));
            for j in 0..d {
                for i in 0..d {
                    tall[k * d + i + j * n * d] = op[(i, j)];
                }
            }
        }
        Self::from_tall(d, n, tall)
    }

    /// Takes ownership of a tall buffer laid out as described above.
    pub fn from_tall(d: usize, n: usize, tall: Vec<Complex64>) -> Self {
        assert_eq!(tall.len(), n * d * d);
        let conj = tall.iter().map(|z| z.conj()).collect();
        Self { d, n, tall, conj }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tall(&self) -> &[Complex64] {
        &self.tall
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.tall[k * self.d + i + j * self.n * self.d]
    }

    pub fn op(&self, k: usize) -> CMat {
        CMat::from_fn(self.d, self.d, |i, j| self.get(k, i, j))
    }

    fn tall_ref(&self) -> MatRef<'_> {
        MatRef::col_major(&self.tall, self.n * self.d, self.d)
    }

    fn wide_ref(&self) -> MatRef<'_> {
        MatRef::col_major(&self.tall, self.d, self.n * self.d)
    }

    fn conj_tall_ref(&self) -> MatRef<'_> {
        MatRef::col_major(&self.conj, self.n * self.d, self.d)
    }

    fn conj_wide_ref(&self) -> MatRef<'_> {
        MatRef::col_major(&self.conj, self.d, self.n * self.d)
    }

    fn scale_blocks(&self, buf: &mut [Complex64], weights: &[f64]) {
        let (d, n) = (self.d, self.n);
        for j in 0..d {
            for (k, &w) in weights.iter().enumerate() {
                if w != 1.0 {
                    for z in &mut buf[k * d + j * n * d..(k + 1) * d + j * n * d] {
                        *z *= w;
                    }
                }
            }
        }
    }

    /// `K_k x` for every `k`, in the tall layout.
    pub fn left_products(&self, x: &CMat) -> Vec<Complex64> {
        let (d, n) = (self.d, self.n);
        let mut out = vec![ZERO; n * d * d];
        gemm(ONE, self.tall_ref(), MatRef::from_mat(x), ZERO, MatMut::col_major(&mut out, n * d, d));
        out
    }

    /// `sum_k w_k K_k rho K_k†`.
    pub fn apply_weighted(&self, rho: &CMat, weights: Option<&[f64]>) -> CMat {
        let (d, n) = (self.d, self.n);
        let mut b = self.left_products(rho);
        if let Some(w) = weights {
            self.scale_blocks(&mut b, w);
        }
        let mut out = CMat::zeros(d, d);
        gemm(
            ONE,
            MatRef::col_major(&b, d, n * d),
            self.conj_wide_ref().t(),
            ZERO,
            MatMut::from_mat(&mut out),
        );
        out
    }

    /// `sum_k w_k K_k† x K_k`.
    pub fn apply_dual_weighted(&self, x: &CMat, weights: Option<&[f64]>) -> CMat {
        let (d, n) = (self.d, self.n);
        let mut a = vec![ZERO; n * d * d];
        gemm(ONE, MatRef::from_mat(x), self.wide_ref(), ZERO, MatMut::col_major(&mut a, d, n * d));
        if let Some(w) = weights {
            self.scale_blocks(&mut a, w);
        }
        let mut out = CMat::zeros(d, d);
        gemm(
            ONE,
            self.conj_tall_ref().t(),
            MatRef::col_major(&a, n * d, d),
            ZERO,
            MatMut::from_mat(&mut out),
        );
        out
    }

    /// `sum_k K_k† K_k`.
    pub fn completeness_sum(&self) -> CMat {
        self.apply_dual_weighted(&identity(self.d), None)
    }

    /// `sum_k K_k K_k†`.
    pub fn unitality_sum(&self) -> CMat {
        self.apply_weighted(&identity(self.d), None)
    }
}

/// The `2^L` conditional evolution operators `K_k`, indexed by the outcome
/// string `k` packed with site 0 as the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausFamily {
    pub params: ModelParams,
    pub construction: Construction,
    ops: OpStack,
}

impl KrausFamily {
    pub fn from_stack(params: ModelParams, construction: Construction, ops: OpStack) -> Result<Self> {
        if ops.dim() != params.dim() {
            return Err(Error::Dimension { expected: params.dim(), found: ops.dim() });
        }
        if ops.len() != params.dim() {
            return Err(Error::Dimension { expected: params.dim(), found: ops.len() });
        }
        Ok(Self { params, construction, ops })
    }

    pub fn from_ops(params: ModelParams, construction: Construction, ops: &[CMat]) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Dimension { expected: params.dim(), found: 0 });
        }
        if ops.iter().any(|k| k.shape() != (params.dim(), params.dim())) {
            return Err(Error::Dimension { expected: params.dim(), found: ops[0].nrows() });
        }
        Self::from_stack(params, construction, OpStack::from_ops(ops))
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn sites(&self) -> usize {
        self.params.sites
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn stack(&self) -> &OpStack {
        &self.ops
    }

    pub fn op(&self, k: usize) -> CMat {
        self.ops.op(k)
    }

    pub fn ops(&self) -> Vec<CMat> {
        (0..self.len()).map(|k| self.op(k)).collect()
    }

    pub fn is_unbiased(&self) -> bool {
        !matches!(self.construction, Construction::Biased { .. })
    }

    pub fn completeness_residual(&self) -> f64 {
        max_abs_diff(&self.ops.completeness_sum(), &identity(self.dim()))
    }

    pub fn unitality_residual(&self) -> f64 {
        max_abs_diff(&self.ops.unitality_sum(), &identity(self.dim()))
    }

    /// Largest operator norm over the family.
    pub fn max_operator_norm(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let k = self.op(k);
                libm::sqrt(HermEig::new(&matmul(&adjoint(&k), &k)).max().max(0.0))
            })
            .fold(0.0, f64::max)
    }
}

/// Checks the three axioms every unbiased family must satisfy.
pub fn check_axioms(kf: &KrausFamily, tol: f64) -> Result<()> {
    let c = kf.completeness_residual();
    if c > tol {
        return Err(Error::Numerical(format!("completeness residual {c:e}")));
    }
    if kf.is_unbiased() {
        let u = kf.unitality_residual();
        if u > tol {
            return Err(Error::Numerical(format!("unitality residual {u:e}")));
        }
    }
    let norm = kf.max_operator_norm();
    if norm > 1.0 + tol {
        return Err(Error::Numerical(format!("operator norm {norm} exceeds one")));
    }
    Ok(())
}

/// Joint Hamiltonian `H_S (x) 1 + sqrt(gamma/dt) sum_i P_i (x) tau^x_i` on
/// the `4^L` system-ancilla space, indexed `sys * 2^L + anc`.
pub fn build_joint_hamiltonian(params: &ModelParams) -> Result<CMat> {
    params.validate_with_cap(DENSE_SIZE_CAP)?;
    let hs = build_system_hamiltonian(params)?.data;
    let l = params.sites;
    let n = params.dim();
    let g = Complex64::new(params.coupling(), 0.0);
    let mut h = CMat::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let v = hs[(a, b)];
            if v != ZERO {
                for anc in 0..n {
                    h[(a * n + anc, b * n + anc)] += v;
                }
            }
        }
    }
    for sys in 0..n {
        for site in 0..l {
            if bit(sys, site, l) == 0 {
                let flip = 1 << (l - 1 - site);
                for anc in 0..n {
                    h[(sys * n + (anc ^ flip), sys * n + anc)] += g;
                }
            }
        }
    }
    Ok(h)
}

/// `U = exp(-i H_CM dt)` on the joint space.
pub fn build_joint_unitary(params: &ModelParams) -> Result<CMat> {
    let h = build_joint_hamiltonian(params)?;
    Ok(expm_hermitian(&h, params.dt))
}

/// `<k_A| U |k'_A>` as a system operator.
pub fn joint_block(u: &CMat, n: usize, k: usize, k_prev: usize) -> CMat {
    CMat::from_fn(n, n, |a, b| u[(a * n + k, b * n + k_prev)])
}

/// Reference construction through the full `4^L` unitary.
pub fn build_kraus_dense(params: &ModelParams) -> Result<KrausFamily> {
    let u = build_joint_unitary(params)?;
    let n = params.dim();
    let ops: Vec<CMat> = (0..n).map(|k| joint_block(&u, n, k, 0)).collect();
    KrausFamily::from_ops(*params, Construction::Dense4L, &ops)
}

/// `E_m = exp(-i H_m dt)` for every sign string `m`.
pub fn collision_propagators(params: &ModelParams) -> Result<Vec<CMat>> {
    params.validate()?;
    (0..params.dim()).map(|m| collision_propagator(params, m as u64)).collect()
}

pub fn collision_propagator(params: &ModelParams, signs: u64) -> Result<CMat> {
    let h = build_collision_block(params, signs)?;
    Ok(expm_hermitian(&h.data, params.dt))
}

/// `K_k = 2^-L sum_m (-1)^{popcount(k & m)} E_m`, evaluated by a
/// Walsh–Hadamard transform over the stacked blocks.
pub fn kraus_from_propagators(params: &ModelParams, blocks: &[CMat]) -> Result<KrausFamily> {
    let n = params.dim();
    if blocks.len() != n {
        return Err(Error::Dimension { expected: n, found: blocks.len() });
    }
    let stack = OpStack::from_ops(blocks);
    let mut tall = stack.tall;
    let d = n;
    let scale = 1.0 / n as f64;
    for col in tall.chunks_mut(n * d) {
        fwht_segments(col, d);
        for z in col.iter_mut() {
            *z *= scale;
        }
    }
    KrausFamily::from_stack(*params, Construction::BlockWht, OpStack::from_tall(d, n, tall))
}

pub fn build_kraus_fast(params: &ModelParams) -> Result<KrausFamily> {
    let blocks = collision_propagators(params)?;
    kraus_from_propagators(params, &blocks)
}

/// A state of the chain. Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub data: CMat,
}

impl DensityMatrix {
    pub fn maximally_mixed(dim: usize) -> Self {
        Self { data: identity(dim) * Complex64::new(1.0 / dim as f64, 0.0) }
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut data = CMat::zeros(dim, dim);
        data[(index, index)] = ONE;
        Self { data }
    }

    pub fn pure(amplitudes: &[Complex64]) -> Self {
        let d = amplitudes.len();
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        Self { data: CMat::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj() / norm) }
    }

    /// Validates a candidate matrix against the state invariants.
    pub fn from_matrix(data: CMat) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension { expected: data.nrows(), found: data.ncols() });
        }
        let state = Self { data };
        state.check(1e-12, 1e-10)?;
        Ok(state)
    }

    pub fn check(&self, tol: f64, neg_tol: f64) -> Result<()> {
        let herm = crate::linalg::hermiticity_defect(&self.data);
        if herm > tol {
            return Err(Error::Numerical(format!("state not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::Numerical(format!("state trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -neg_tol {
            return Err(Error::Numerical(format!("state has eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.data).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        HermEig::new(&hermitian_part(&self.data)).min()
    }

    pub fn normalized(mut self) -> Self {
        let tr = self.trace();
        self.data /= Complex64::new(tr, 0.0);
        self
    }

    pub fn trace_distance(&self, other: &Self) -> f64 {
        trace_norm(&(&self.data - &other.data))
    }
}

/// Sum of absolute eigenvalues of the Hermitian part.
pub fn trace_norm(m: &CMat) -> f64 {
    HermEig::new(&hermitian_part(m)).values.iter().map(|x| x.abs()).sum()
}

fn check_dim(kf: &KrausFamily, m: &CMat) -> Result<()> {
    if m.nrows() != kf.dim() || m.ncols() != kf.dim() {
        return Err(Error::Dimension { expected: kf.dim(), found: m.nrows() });
    }
    Ok(())
}

/// `E[rho] = sum_k K_k rho K_k†`, symmetrized.
pub fn apply_channel(kf: &KrausFamily, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dim(kf, &rho.data)?;
    Ok(DensityMatrix { data: hermitian_part(&kf.stack().apply_weighted(&rho.data, None)) })
}

/// `E*[x] = sum_k K_k† x K_k`.
pub fn apply_dual(kf: &KrausFamily, x: &CMat) -> Result<CMat> {
    check_dim(kf, x)?;
    Ok(kf.stack().apply_dual_weighted(x, None))
}

/// Fixed point of the channel. Unbiased families are unital, so the fully
/// mixed state is returned without iterating.
pub fn stationary_state(kf: &KrausFamily, tol: f64) -> Result<DensityMatrix> {
    let mixed = DensityMatrix::maximally_mixed(kf.dim());
    if kf.is_unbiased() {
        return Ok(mixed);
    }
    fixed_point(kf, mixed, tol, DEFAULT_MAX_ITERATIONS)
}

/// Repeated application until the trace-norm increment drops below `tol`.
pub fn fixed_point(kf: &KrausFamily, start: DensityMatrix, tol: f64, max_iterations: usize) -> Result<DensityMatrix> {
    let mut rho = start;
    let mut increment = f64::INFINITY;
    for _ in 0..max_iterations {
        let next = apply_channel(kf, &rho)?.normalized();
        increment = next.trace_distance(&rho);
        rho = next;
        if increment < tol {
            return Ok(rho);
        }
    }
    Err(Error::NoConvergence { iterations: max_iterations, residual: increment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, matmul3};

    fn reference(l: usize) -> ModelParams {
        ModelParams::reference(l)
    }

    fn naive_channel(ops: &[CMat], rho: &CMat) -> CMat {
        ops.iter().fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + matmul3(k, rho, &adjoint(k)))
    }

    fn naive_dual(ops: &[CMat], x: &CMat) -> CMat {
        ops.iter().fold(CMat::zeros(x.nrows(), x.ncols()), |acc, k| acc + matmul3(&adjoint(k), x, k))
    }

    fn pseudo_random_state(d: usize, seed: u64) -> CMat {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMat::from_fn(d, d, |_, _| Complex64::new(next(), next()));
        let m = matmul(&a, &adjoint(&a));
        let tr = trace(&m);
        m / tr
    }

    #[test]
    fn stacked_products_match_naive_sums() {
        let kf = build_kraus_fast(&reference(3)).unwrap();
        let ops = kf.ops();
        let rho = pseudo_random_state(8, 7);
        let weights: Vec<f64> = (0..8).map(|k| 0.3 * k as f64 + 0.1).collect();
        assert!(max_abs_diff(&kf.stack().apply_weighted(&rho, None), &naive_channel(&ops, &rho)) < 1e-14);
        assert!(max_abs_diff(&kf.stack().apply_dual_weighted(&rho, None), &naive_dual(&ops, &rho)) < 1e-14);
        let scaled: Vec<CMat> = ops.iter().zip(&weights).map(|(k, w)| k * Complex64::new(w.sqrt(), 0.0)).collect();
        assert!(max_abs_diff(&kf.stack().apply_weighted(&rho, Some(&weights)), &naive_channel(&scaled, &rho)) < 1e-14);
        assert!(max_abs_diff(&kf.stack().apply_dual_weighted(&rho, Some(&weights)), &naive_dual(&scaled, &rho)) < 1e-14);
    }

    #[test]
    fn fast_matches_dense_for_small_chains() {
        for l in 1..=3 {
            let p = reference(l);
            let dense = build_kraus_dense(&p).unwrap();
            let fast = build_kraus_fast(&p).unwrap();
            for k in 0..p.dim() {
                assert!(max_abs_diff(&dense.op(k), &fast.op(k)) <= 1e-10, "L={l} k={k}");
            }
        }
    }

    #[test]
    fn no_dephasing_leaves_only_the_trivial_outcome() {
        let p = reference(2).with_gamma(0.0);
        let u = expm_hermitian(&build_system_hamiltonian(&p).unwrap().data, p.dt);
        for kf in [build_kraus_dense(&p).unwrap(), build_kraus_fast(&p).unwrap()] {
            assert!(max_abs_diff(&kf.op(0), &u) <= 1e-12);
            for k in 1..4 {
                assert!(crate::linalg::max_abs(&kf.op(k)) <= 1e-12);
            }
        }
    }

    #[test]
    fn short_collisions_approach_identity() {
        let p = ModelParams::new(1, 0.0, 3.0, 1e-8);
        let kf = build_kraus_dense(&p).unwrap();
        let gdt = p.gamma * p.dt;
        assert!(max_abs_diff(&kf.op(0), &identity(2)) <= 10.0 * gdt.sqrt());
        let rest: f64 = (1..2).map(|k| crate::linalg::frobenius(&kf.op(k)).powi(2)).sum();
        assert!(rest <= 10.0 * gdt && rest > 0.01 * gdt);
    }

    #[test]
    fn axioms_hold_at_reference_point() {
        for l in 1..=5 {
            let kf = build_kraus_fast(&reference(l)).unwrap();
            assert!(kf.completeness_residual() <= 1e-10, "L={l}");
            assert!(kf.unitality_residual() <= 1e-10, "L={l}");
            check_axioms(&kf, 1e-10).unwrap();
        }
    }

    #[test]
    fn fully_mixed_state_is_fixed() {
        let kf = build_kraus_fast(&reference(4)).unwrap();
        let mixed = DensityMatrix::maximally_mixed(16);
        let out = apply_channel(&kf, &mixed).unwrap();
        assert!(max_abs_diff(&out.data, &mixed.data) <= 1e-10);
        assert_eq!(stationary_state(&kf, 1e-12).unwrap(), mixed);
    }

    #[test]
    fn unitary_channel_without_dephasing() {
        let p = reference(1).with_gamma(0.0);
        let kf = build_kraus_fast(&p).unwrap();
        let rho = pseudo_random_state(2, 3);
        let u = expm_hermitian(&build_system_hamiltonian(&p).unwrap().data, p.dt);
        let out = apply_channel(&kf, &DensityMatrix { data: rho.clone() }).unwrap();
        assert!(max_abs_diff(&out.data, &matmul3(&u, &rho, &adjoint(&u))) <= 1e-12);
    }

    #[test]
    fn channel_preserves_trace_and_positivity() {
        let kf = build_kraus_fast(&reference(3)).unwrap();
        for seed in 0..100u64 {
            let mut state = seed * 7919 + 1;
            let amps: Vec<Complex64> = (0..8)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let x = (state >> 11) as f64 / (1u64 << 53) as f64;
                    Complex64::from_polar(1.0, 6.283 * x) * x
                })
                .collect();
            let out = apply_channel(&kf, &DensityMatrix::pure(&amps)).unwrap();
            assert!((out.trace() - 1.0).abs() <= 1e-12);
            assert!(out.min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let kf = build_kraus_fast(&reference(2)).unwrap();
        let err = apply_channel(&kf, &DensityMatrix::maximally_mixed(8)).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 4, found: 8 });
        assert!(build_kraus_dense(&reference(5)).is_err());
    }

    #[test]
    fn fixed_point_of_a_non_unital_family() {
        let amplitude_damping = |g: f64| {
            let k0 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::new((1.0 - g).sqrt(), 0.0)]);
            let k1 = CMat::from_row_slice(2, 2, &[ZERO, Complex64::new(g.sqrt(), 0.0), ZERO, ZERO]);
            [k0, k1]
        };
        let kf = KrausFamily::from_ops(reference(1), Construction::Biased { s: 1.0 }, &amplitude_damping(0.3)).unwrap();
        let rho = stationary_state(&kf, 1e-12).unwrap();
        assert!((rho.data[(0, 0)].re - 1.0).abs() < 1e-11);
        let again = apply_channel(&kf, &rho).unwrap();
        assert!(again.trace_distance(&rho) < 1e-12);
    }
}
