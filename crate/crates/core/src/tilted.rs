//! The s-ensemble of the time-integrated activity.
//!
//! `E_s[rho] = sum_k e^{-s popcount(k)} K_k rho K_k†` is the tilted map.
//! Its dominant eigenvalue `Lambda_s` gives the scaled cumulant generating
//! function, and the dual eigen-operator `l_s` defines the
//! trace-preserving biased family
//! `K~_k = e^{-s popcount(k)/2} Lambda_s^{-1/2} l_s^{1/2} K_k l_s^{-1/2}`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{Construction, DensityMatrix, KrausFamily, OpStack};
use crate::error::{Error, Result};
use crate::krylov::{arnoldi_rightmost, ArnoldiOptions};
use crate::linalg::{
    gemm, herm_roots, hermitian_part, identity, inner, max_abs, trace, CMat, MatMut, MatRef, ONE, ZERO,
};
use crate::observables::{CorrelationKernel, SpaceTimeOffset};

/// Relative eigenvalue floor applied to `l_s` before taking roots.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Default iteration cap of the power method.
pub const DEFAULT_POWER_ITERATIONS: usize = 100_000;

/// `e^{-s popcount(k)}` for every outcome string.
pub fn tilt_weights(n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|k| libm::exp(-s * k.count_ones() as f64)).collect()
}

/// `sum_k e^{-s popcount(k)} K_k† x K_k`, symmetrized.
pub fn apply_tilted_dual(kf: &KrausFamily, s: f64, x: &CMat) -> CMat {
    hermitian_part(&kf.stack().apply_dual_weighted(x, Some(&tilt_weights(kf.len(), s))))
}

/// `sum_k e^{-s popcount(k)} K_k rho K_k†`, symmetrized.
pub fn apply_tilted(kf: &KrausFamily, s: f64, rho: &CMat) -> CMat {
    hermitian_part(&kf.stack().apply_weighted(rho, Some(&tilt_weights(kf.len(), s))))
}

/// Dominant eigenpair of the dual tilted map.
#[derive(Debug, Clone)]
pub struct DominantPair {
    pub lambda: f64,
    /// Hermitian, normalized to `Tr l = 2^L`.
    pub left: CMat,
    /// `|E_s*[l] - Lambda l|_max / Lambda`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn eigen_residual(kf: &KrausFamily, s: f64, lambda: f64, x: &CMat, dual: bool) -> f64 {
    let y = if dual { apply_tilted_dual(kf, s, x) } else { apply_tilted(kf, s, x) };
    max_abs(&(y - x * Complex64::new(lambda, 0.0))) / lambda.abs().max(1e-300)
}

/// Power iteration from the identity, renormalizing by the trace. Stops
/// once the relative eigenvalue change falls below `tol` and the eigen
/// residual is within `100 tol`.
pub fn dominant_eigenpair(kf: &KrausFamily, s: f64, tol: f64, max_iter: usize) -> Result<DominantPair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let d = kf.dim();
    let weights = tilt_weights(kf.len(), s);
    let mut x = identity(d);
    let mut lambda_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = hermitian_part(&kf.stack().apply_dual_weighted(&x, Some(&weights)));
        let lambda = trace(&y).re / trace(&x).re;
        residual = max_abs(&(&y - &x * Complex64::new(lambda, 0.0))) / lambda;
        let change = ((lambda - lambda_prev) / lambda).abs();
        x = y * Complex64::new(d as f64 / (lambda * d as f64), 0.0);
        let tr = trace(&x).re;
        x *= Complex64::new(d as f64 / tr, 0.0);
        if change < tol && residual <= 100.0 * tol {
            return Ok(DominantPair { lambda, left: x, residual, iterations: it, converged: true });
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

fn to_vec(m: &CMat) -> Vec<Complex64> {
    m.as_slice().to_vec()
}

/// Fixes the arbitrary complex phase of a vectorized Hermitian eigen-operator
/// and rescales it to the requested trace.
pub(crate) fn hermitian_from_vector(v: &[Complex64], d: usize, target_trace: f64) -> CMat {
    let m = CMat::from_column_slice(d, d, v);
    let tr = trace(&m);
    let phase = if tr.norm() > 1e-8 * max_abs(&m) {
        tr / tr.norm()
    } else {
        let (i, _) = (0..d).map(|i| (i, m[(i, i)].norm())).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        m[(i, i)] / m[(i, i)].norm()
    };
    let h = hermitian_part(&(m / phase));
    let scale = target_trace / trace(&h).re;
    h * Complex64::new(scale, 0.0)
}

/// Krylov–Schur solution for the dominant eigenpair; `dual` selects the
/// Heisenberg-picture map. `start` defaults to the identity.
pub fn dominant_eigenpair_krylov(
    kf: &KrausFamily,
    s: f64,
    dual: bool,
    start: Option<&CMat>,
    opts: &ArnoldiOptions,
) -> DominantPair {
    let d = kf.dim();
    let weights = tilt_weights(kf.len(), s);
    let stack = kf.stack();
    let x0 = start.cloned().unwrap_or_else(|| identity(d));
    let est = arnoldi_rightmost(
        |x, y| {
            let m = CMat::from_column_slice(d, d, x);
            let out = if dual {
                stack.apply_dual_weighted(&m, Some(&weights))
            } else {
                stack.apply_weighted(&m, Some(&weights))
            };
            y.copy_from_slice(out.as_slice());
        },
        &to_vec(&x0),
        opts,
    );
    let lambda = est.value.re;
    let target = if dual { d as f64 } else { 1.0 };
    let op = hermitian_from_vector(&est.vector, d, target);
    let residual = eigen_residual(kf, s, lambda, &op, dual) * if dual { 1.0 } else { d as f64 };
    let converged = est.converged && residual <= 1e-10;
    DominantPair { lambda, left: op, residual, iterations: est.applications, converged }
}

/// Whether every operator of the family equals its own transpose, as for
/// collision blocks generated by real symmetric Hamiltonians.
pub fn transpose_symmetric(kf: &KrausFamily) -> bool {
    let stack = kf.stack();
    let d = kf.dim();
    let scale = kf.max_operator_norm().max(1.0);
    (0..kf.len()).all(|k| {
        (0..d).all(|j| (0..j).all(|i| (stack.get(k, i, j) - stack.get(k, j, i)).norm() <= 1e-13 * scale))
    })
}

/// Biased family from a dominant eigenpair. Returns the family and whether
/// the eigenvalue floor had to be applied to `l_s`.
pub fn build_biased_kraus(kf: &KrausFamily, s: f64, lambda: f64, left: &CMat) -> Result<(KrausFamily, bool)> {
    if !(lambda > 0.0) {
        return Err(Error::Numerical(alloc::format!("dominant eigenvalue {lambda} is not positive")));
    }
    let roots = herm_roots(left, EIGENVALUE_FLOOR, 1e-10)?;
    let d = kf.dim();
    let n = kf.len();
    let stack = kf.stack();
    // Right factor on every block at once through the tall view ...
    let mut right = vec![ZERO; n * d * d];
    gemm(
        ONE,
        MatRef::col_major(stack.tall(), n * d, d),
        MatRef::from_mat(&roots.inv_sqrt),
        ZERO,
        MatMut::col_major(&mut right, n * d, d),
    );
    // ... and the left factor through the wide view of the same buffer.
    let mut both = vec![ZERO; n * d * d];
    gemm(
        Complex64::new(1.0 / libm::sqrt(lambda), 0.0),
        MatRef::from_mat(&roots.sqrt),
        MatRef::col_major(&right, d, n * d),
        ZERO,
        MatMut::col_major(&mut both, d, n * d),
    );
    let half = tilt_weights(n, 0.5 * s);
    for j in 0..d {
        for (k, &w) in half.iter().enumerate() {
            for z in &mut both[k * d + j * n * d..(k + 1) * d + j * n * d] {
                *z *= w;
            }
        }
    }
    let family = KrausFamily::from_stack(kf.params, Construction::Biased { s }, OpStack::from_tall(d, n, both))?;
    Ok((family, roots.floored))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SolverMethod {
    Power,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub krylov: ArnoldiOptions,
    /// Trace-distance tolerance of the biased fixed point (power method).
    pub stationary_tol: f64,
}

impl Default for TiltedOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Krylov,
            tol: 1e-12,
            max_iter: DEFAULT_POWER_ITERATIONS,
            krylov: ArnoldiOptions::default(),
            stationary_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TiltedSolution {
    pub s: f64,
    pub lambda: f64,
    pub left: CMat,
    pub biased: KrausFamily,
    pub biased_stationary: DensityMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// The eigenvalue floor was applied to `l_s`.
    pub ill_conditioned: bool,
    /// `|sum_k K~_k† K~_k - 1|_max`. Bounded by the eigen-residual times the
    /// condition number of `l_s`, which grows quickly near metastability.
    pub completeness: f64,
}

/// Dominant eigenpair, biased family and biased stationary state.
///
/// With the Krylov method the stationary state comes from the right
/// eigen-operator `r_s` of the tilted map as `l^{1/2} r l^{1/2}`
/// (normalized); the power method finds it by iterating the biased channel.
pub fn solve_tilted(kf: &KrausFamily, s: f64, opts: &TiltedOptions) -> Result<TiltedSolution> {
    solve_tilted_from(kf, s, opts, None)
}

/// As [`solve_tilted`], warm-started from operators of a nearby point.
pub fn solve_tilted_from(
    kf: &KrausFamily,
    s: f64,
    opts: &TiltedOptions,
    warm: Option<(&CMat, &CMat)>,
) -> Result<TiltedSolution> {
    let d = kf.dim();
    if s == 0.0 && kf.is_unbiased() {
        let left = identity(d);
        let residual = eigen_residual(kf, 0.0, 1.0, &left, true);
        let (biased, ill) = build_biased_kraus(kf, 0.0, 1.0, &left)?;
        let completeness = biased.completeness_residual();
        return Ok(TiltedSolution {
            s,
            lambda: 1.0,
            left,
            biased,
            biased_stationary: DensityMatrix::maximally_mixed(d),
            iterations: 1,
            residual,
            converged: residual <= 1e-10,
            ill_conditioned: ill,
            completeness,
        });
    }
    match opts.method {
        SolverMethod::Power => {
            let pair = dominant_eigenpair(kf, s, opts.tol, opts.max_iter)?;
            let (biased, ill) = build_biased_kraus(kf, s, pair.lambda, &pair.left)?;
            let stationary = crate::channel::fixed_point(
                &biased,
                DensityMatrix::maximally_mixed(d),
                opts.stationary_tol,
                crate::channel::DEFAULT_MAX_ITERATIONS,
            )?;
            Ok(TiltedSolution {
                s,
                completeness: biased.completeness_residual(),
                lambda: pair.lambda,
                left: pair.left,
                biased,
                biased_stationary: stationary,
                iterations: pair.iterations,
                residual: pair.residual,
                converged: pair.converged,
                ill_conditioned: ill,
            })
        }
        SolverMethod::Krylov => {
            let left = dominant_eigenpair_krylov(kf, s, true, warm.map(|w| w.0), &opts.krylov);
            let right = if transpose_symmetric(kf) {
                // K_k^T = K_k turns the primal map into the complex conjugate
                // of the dual one, so r_s = conj(l_s) up to normalization.
                let r = left.left.map(|z| z.conj()) / Complex64::new(d as f64, 0.0);
                let residual = eigen_residual(kf, s, left.lambda, &r, false) * d as f64;
                DominantPair { lambda: left.lambda, left: r, residual, iterations: 1, converged: residual <= 1e-10 }
            } else {
                dominant_eigenpair_krylov(kf, s, false, warm.map(|w| w.1), &opts.krylov)
            };
            let (biased, ill) = build_biased_kraus(kf, s, left.lambda, &left.left)?;
            let roots = herm_roots(&left.left, EIGENVALUE_FLOOR, 1e-10)?;
            let rho = crate::linalg::matmul3(&roots.sqrt, &right.left, &roots.sqrt);
            let tr = trace(&rho).re;
            let stationary = DensityMatrix { data: hermitian_part(&(rho / Complex64::new(tr, 0.0))) };
            let agree = (left.lambda - right.lambda).abs() <= 1e-10 * left.lambda.abs();
            Ok(TiltedSolution {
                s,
                completeness: biased.completeness_residual(),
                lambda: left.lambda,
                left: left.left,
                biased,
                biased_stationary: stationary,
                iterations: left.iterations + right.iterations,
                residual: left.residual.max(right.residual),
                converged: left.converged && right.converged && agree,
                ill_conditioned: ill,
            })
        }
    }
}

impl TiltedSolution {
    /// Right eigen-operator `l^{-1/2} rho~ l^{-1/2}` recovered from the
    /// biased stationary state, normalized to unit trace.
    pub fn right_operator(&self) -> Result<CMat> {
        let roots = herm_roots(&self.left, EIGENVALUE_FLOOR, 1e-10)?;
        let r = crate::linalg::matmul3(&roots.inv_sqrt, &self.biased_stationary.data, &roots.inv_sqrt);
        let tr = trace(&r).re;
        Ok(r / Complex64::new(tr, 0.0))
    }
}

/// `-d log Lambda_s / ds / L` from the eigen-operators alone:
/// `sum_k popcount(k) e^{-s popcount(k)} Tr[l K_k r K_k†] / (Lambda Tr[l r]) / L`.
pub fn hellmann_feynman_activity(kf: &KrausFamily, s: f64, lambda: f64, left: &CMat, right: &CMat) -> f64 {
    let weights: Vec<f64> =
        (0..kf.len()).map(|k| k.count_ones() as f64 * libm::exp(-s * k.count_ones() as f64)).collect();
    let y = kf.stack().apply_weighted(right, Some(&weights));
    inner(left, &y).re / (lambda * inner(left, right).re) / kf.sites() as f64
}

/// Stationary order parameters of the biased dynamics at one `s`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SEnsemblePoint {
    pub s: f64,
    pub lambda: f64,
    pub activity: f64,
    pub correlations: Vec<(SpaceTimeOffset, f64)>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub ill_conditioned: bool,
}

impl SEnsemblePoint {
    pub fn correlation(&self, offset: &SpaceTimeOffset) -> Option<f64> {
        self.correlations.iter().find(|(o, _)| o == offset).map(|(_, c)| *c)
    }
}

/// Evaluates activity and correlations with the biased family on its
/// stationary state. Unconverged points carry `NaN` observables.
pub fn order_parameters_of(solution: &TiltedSolution, offsets: &[SpaceTimeOffset]) -> Result<SEnsemblePoint> {
    let mut point = SEnsemblePoint {
        s: solution.s,
        lambda: solution.lambda,
        activity: f64::NAN,
        correlations: offsets.iter().filter(|o| !o.is_activity()).map(|o| (*o, f64::NAN)).collect(),
        iterations: solution.iterations,
        residual: solution.residual,
        converged: solution.converged,
        ill_conditioned: solution.ill_conditioned,
    };
    if !solution.converged {
        return Ok(point);
    }
    let kernel = CorrelationKernel::new(&solution.biased, offsets)?;
    let rho = &solution.biased_stationary.data;
    point.activity = kernel.activity(rho);
    point.correlations = kernel.stationary_correlations(rho);
    Ok(point)
}

pub fn s_ensemble_order_parameters(
    kf: &KrausFamily,
    s: f64,
    offsets: &[SpaceTimeOffset],
    opts: &TiltedOptions,
) -> Result<SEnsemblePoint> {
    let solution = solve_tilted(kf, s, opts)?;
    order_parameters_of(&solution, offsets)
}

/// One row of a `(V, s)` phase diagram.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseRow {
    pub v: f64,
    pub point: SEnsemblePoint,
}

/// Scans `s` at fixed family, warm-starting each point from the previous
/// eigen-operators. Convergence failures are recorded, not raised.
pub fn s_scan(
    kf: &KrausFamily,
    s_values: &[f64],
    offsets: &[SpaceTimeOffset],
    opts: &TiltedOptions,
) -> Vec<PhaseRow> {
    let mut warm: Option<(CMat, CMat)> = None;
    let mut rows = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let result = solve_tilted_from(kf, s, opts, warm.as_ref().map(|(l, r)| (l, r)))
            .and_then(|sol| {
                let point = order_parameters_of(&sol, offsets)?;
                if sol.converged && opts.method == SolverMethod::Krylov {
                    warm = sol.right_operator().ok().map(|r| (sol.left.clone(), r));
                }
                Ok(point)
            });
        let point = result.unwrap_or_else(|_| SEnsemblePoint {
            s,
            lambda: f64::NAN,
            activity: f64::NAN,
            correlations: offsets.iter().filter(|o| !o.is_activity()).map(|o| (*o, f64::NAN)).collect(),
            iterations: 0,
            residual: f64::INFINITY,
            converged: false,
            ill_conditioned: false,
        });
        rows.push(PhaseRow { v: kf.params.v, point });
    }
    rows
}

/// `log Z_T(s)` with `Z_T(s) = Tr E_s^T[rho0]`, rescaling every step.
pub fn log_partition_function(kf: &KrausFamily, s: f64, rho0: &DensityMatrix, steps: usize) -> f64 {
    let weights = tilt_weights(kf.len(), s);
    let mut rho = rho0.data.clone();
    let mut log_z = libm::log(trace(&rho).re);
    rho /= trace(&rho);
    for _ in 0..steps {
        rho = hermitian_part(&kf.stack().apply_weighted(&rho, Some(&weights)));
        let tr = trace(&rho).re;
        log_z += libm::log(tr);
        rho /= Complex64::new(tr, 0.0);
    }
    log_z
}

pub fn partition_function(kf: &KrausFamily, s: f64, rho0: &DensityMatrix, steps: usize) -> f64 {
    libm::exp(log_partition_function(kf, s, rho0, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_kraus_fast;
    use crate::linalg::{max_abs_diff, HermEig};
    use crate::model::ModelParams;
    use crate::observables::ensemble_activity;
    use crate::trajectory::path_probabilities;

    fn family(l: usize) -> KrausFamily {
        build_kraus_fast(&ModelParams::reference(l)).unwrap()
    }

    /// `sum_k w_k conj(K_k) (x) K_k` acting on column-major vectorizations.
    fn dense_superoperator(kf: &KrausFamily, s: f64) -> CMat {
        let d = kf.dim();
        let mut sup = CMat::zeros(d * d, d * d);
        for (k, w) in tilt_weights(kf.len(), s).iter().enumerate() {
            let op = kf.op(k);
            sup += op.map(|z| z.conj()).kronecker(&op) * Complex64::new(*w, 0.0);
        }
        sup
    }

    #[test]
    fn tilted_dual_reductions() {
        let kf = family(2);
        assert!(max_abs_diff(&apply_tilted_dual(&kf, 0.0, &identity(4)), &identity(4)) < 1e-12);
        let x = CMat::from_fn(4, 4, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let k0 = kf.op(0);
        let only_zero = k0.adjoint() * &x * &k0;
        assert!(max_abs_diff(&apply_tilted_dual(&kf, 50.0, &x), &hermitian_part(&only_zero)) < 1e-12);
        let free = build_kraus_fast(&ModelParams::reference(2).with_gamma(0.0)).unwrap();
        let u = free.op(0);
        let h = hermitian_part(&x);
        assert!(max_abs_diff(&apply_tilted_dual(&free, 0.7, &h), &(u.adjoint() * &h * &u)) < 1e-12);
    }

    #[test]
    fn power_iteration_at_zero_field() {
        let kf = family(3);
        let pair = dominant_eigenpair(&kf, 0.0, 1e-12, 1000).unwrap();
        assert!((pair.lambda - 1.0).abs() < 1e-12);
        assert!(max_abs_diff(&pair.left, &identity(8)) < 1e-12);
    }

    #[test]
    fn single_site_eigenvalue_against_superoperator() {
        let kf = family(1);
        let pair = dominant_eigenpair(&kf, 0.2, 1e-13, 100_000).unwrap();
        assert!(pair.lambda > 0.0 && pair.lambda < 1.0);
        let eig = nalgebra::Schur::new(dense_superoperator(&kf, 0.2)).eigenvalues().unwrap();
        let top = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((pair.lambda - top).abs() < 1e-11);
        let kry = dominant_eigenpair_krylov(&kf, 0.2, true, None, &ArnoldiOptions::default());
        assert!(kry.converged);
        assert!((kry.lambda - top).abs() < 1e-12);
        assert!(max_abs_diff(&kry.left, &pair.left) < 1e-9);
    }

    #[test]
    fn derivative_of_log_lambda_is_activity() {
        // The slow blockaded mode makes log Lambda strongly curved at L=2,
        // so the step has to be small.
        for (l, h) in [(1, 1e-4), (2, 1e-6)] {
            let kf = family(l);
            let lp = dominant_eigenpair(&kf, h, 1e-14, 100_000).unwrap().lambda;
            let lm = dominant_eigenpair(&kf, -h, 1e-14, 100_000).unwrap().lambda;
            let fd = -(libm::log(lp) - libm::log(lm)) / (2.0 * h);
            let act = ensemble_activity(&kf, &DensityMatrix::maximally_mixed(1 << l)).unwrap() * l as f64;
            assert!(((fd - act) / act).abs() < 1e-6, "{fd} {act}");
        }
    }

    #[test]
    fn biased_family_at_zero_field_is_the_original() {
        let kf = family(3);
        let (biased, ill) = build_biased_kraus(&kf, 0.0, 1.0, &identity(8)).unwrap();
        assert!(!ill);
        for k in 0..8 {
            assert!(max_abs_diff(&biased.op(k), &kf.op(k)) <= 1e-12);
        }
    }

    #[test]
    fn biased_family_is_trace_preserving() {
        for (l, s) in [(1, 1.0), (1, -2.0), (2, 0.5), (3, -0.4), (3, 0.3)] {
            let kf = family(l);
            let sol = solve_tilted(&kf, s, &TiltedOptions::default()).unwrap();
            assert!(sol.converged, "s={s}");
            assert!(sol.completeness <= 1e-10, "L={l} s={s}: {}", sol.completeness);
            let again = crate::channel::apply_channel(&sol.biased, &sol.biased_stationary).unwrap();
            assert!(again.trace_distance(&sol.biased_stationary) < 1e-10);
            assert!(sol.biased_stationary.min_eigenvalue() > -1e-12);
        }
    }

    #[test]
    fn power_and_krylov_agree() {
        let kf = family(2);
        let opts = TiltedOptions { method: SolverMethod::Power, ..Default::default() };
        let a = solve_tilted(&kf, 0.3, &opts).unwrap();
        let b = solve_tilted(&kf, 0.3, &TiltedOptions::default()).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-11);
        assert!(a.biased_stationary.trace_distance(&b.biased_stationary) < 1e-8);
    }

    #[test]
    fn positive_field_suppresses_activity() {
        let kf = family(1);
        let point = s_ensemble_order_parameters(&kf, 0.3, &[], &TiltedOptions::default()).unwrap();
        assert!(point.activity < 0.5447141872182351);
        let sol = solve_tilted(&kf, 0.3, &TiltedOptions::default()).unwrap();
        let stationary = crate::channel::stationary_state(&sol.biased, 1e-12).unwrap();
        assert!(stationary.trace_distance(&sol.biased_stationary) < 1e-9);
        assert!((stationary.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hellmann_feynman_matches_biased_activity() {
        let kf = family(3);
        for &s in &[-0.3, 0.1, 0.5] {
            let sol = solve_tilted(&kf, s, &TiltedOptions::default()).unwrap();
            let r = sol.right_operator().unwrap();
            let hf = hellmann_feynman_activity(&kf, s, sol.lambda, &sol.left, &r);
            let point = order_parameters_of(&sol, &[]).unwrap();
            assert!((hf - point.activity).abs() < 1e-11);
        }
    }

    #[test]
    fn activity_decreases_along_s() {
        let kf = family(3);
        let s: Vec<f64> = (0..21).map(|i| -0.5 + 0.05 * i as f64).collect();
        let rows = s_scan(&kf, &s, &[SpaceTimeOffset::new(0, 1)], &TiltedOptions::default());
        assert!(rows.iter().all(|r| r.point.converged));
        for w in rows.windows(2) {
            assert!(w[1].point.activity <= w[0].point.activity + 1e-12);
        }
    }

    #[test]
    fn partition_function_matches_path_sum() {
        let kf = family(2);
        let rho = DensityMatrix::maximally_mixed(4);
        let paths = path_probabilities(&kf, &rho.data, 3);
        let s = 0.1;
        let brute: f64 = paths
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let ones = (idx % 4).count_ones() + ((idx / 4) % 4).count_ones() + (idx / 16).count_ones();
                p * libm::exp(-s * ones as f64)
            })
            .sum();
        assert!((partition_function(&kf, s, &rho, 3) - brute).abs() < 1e-12);
        assert!((partition_function(&kf, 0.0, &rho, 40) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_partition_function_approaches_scgf() {
        let kf = family(1);
        let lambda = dominant_eigenpair(&kf, 0.2, 1e-13, 100_000).unwrap().lambda;
        let rho = DensityMatrix::maximally_mixed(2);
        let rate = log_partition_function(&kf, 0.2, &rho, 50) / 50.0;
        assert!((rate - libm::log(lambda)).abs() < 1e-3);
    }

    #[test]
    fn left_operator_is_positive() {
        let kf = family(3);
        let sol = solve_tilted(&kf, 0.4, &TiltedOptions::default()).unwrap();
        let eig = HermEig::new(&sol.left);
        assert!(eig.min() > 1e-14 * eig.max());
        assert!((trace(&sol.left).re - 8.0).abs() < 1e-10);
    }

    #[test]
    fn transpose_shortcut_matches_primal_solve() {
        let kf = family(3);
        assert!(transpose_symmetric(&kf));
        let sol = solve_tilted(&kf, 0.25, &TiltedOptions::default()).unwrap();
        let right = dominant_eigenpair_krylov(&kf, 0.25, false, None, &ArnoldiOptions::default());
        assert!(max_abs_diff(&sol.right_operator().unwrap(), &right.left) < 1e-9);
        let u = CMat::from_fn(2, 2, |i, j| Complex64::new((j as f64 - i as f64) * core::f64::consts::FRAC_1_SQRT_2, 0.0));
        let skew = KrausFamily::from_ops(ModelParams::reference(1), Construction::Dense4L, &[u.clone(), u]).unwrap();
        assert!(!transpose_symmetric(&skew));
    }
}
