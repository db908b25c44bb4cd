//! Continuous-time limit of the collision model.
//!
//! Short collisions with weak coupling `sqrt(gamma/dt)` converge to the
//! master equation with Hermitian jump operators `J_i = sqrt(gamma) P_i`:
//! `L[rho] = -i[H_S, rho] + sum_i (J_i rho J_i - {J_i^2, rho}/2)`.
//! The jumps are diagonal in the computational basis, so the dissipator
//! acts elementwise.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{build_kraus_fast, DensityMatrix};
use crate::error::{Error, Result};
use crate::krylov::{arnoldi_rightmost, ArnoldiOptions};
use crate::linalg::{expm, expm_action, identity, inner, max_abs, max_abs_diff, norm_1, trace, CMat, ZERO};
use crate::model::{bit, build_system_hamiltonian, ground_projector, ModelParams};
use crate::trajectory::{trajectory_rng, PureState};

/// Largest chain handled through dense `4^L x 4^L` superoperators.
pub const DENSE_SUPEROPERATOR_CAP: usize = 3;

#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub params: ModelParams,
    pub hamiltonian: CMat,
    /// `sqrt(gamma) P_i`.
    pub jumps: Vec<CMat>,
    /// `H_S - (i/2) sum_i J_i^2`.
    pub effective_hamiltonian: CMat,
    /// `gamma sum_i p_i(a) p_i(b)`, column-major.
    overlap: Vec<f64>,
    /// `gamma sum_i p_i(a)`: total emission rate out of basis state `a`.
    loss: Vec<f64>,
}

impl LindbladModel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let hamiltonian = build_system_hamiltonian(params)?.data;
        let l = params.sites;
        let d = params.dim();
        let g = params.gamma;
        let jumps: Vec<CMat> =
            (0..l).map(|i| ground_projector(i, l).data * Complex64::new(libm::sqrt(g), 0.0)).collect();
        let ground = |a: usize, i: usize| (1 - bit(a, i, l)) as f64;
        let loss: Vec<f64> = (0..d).map(|a| g * (0..l).map(|i| ground(a, i)).sum::<f64>()).collect();
        let mut overlap = vec![0.0; d * d];
        for b in 0..d {
            for a in 0..d {
                overlap[a + b * d] = g * (0..l).map(|i| ground(a, i) * ground(b, i)).sum::<f64>();
            }
        }
        let mut effective_hamiltonian = hamiltonian.clone();
        for a in 0..d {
            effective_hamiltonian[(a, a)] -= Complex64::new(0.0, 0.5 * loss[a]);
        }
        Ok(Self { params: *params, hamiltonian, jumps, effective_hamiltonian, overlap, loss })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn sites(&self) -> usize {
        self.params.sites
    }

    /// Elementwise tilted dissipator `e^{-s} overlap(a,b) - (loss(a) + loss(b))/2`.
    fn dissipator(&self, s: f64) -> Vec<f64> {
        let d = self.dim();
        let tilt = libm::exp(-s);
        let mut out = vec![0.0; d * d];
        for b in 0..d {
            for a in 0..d {
                out[a + b * d] = tilt * self.overlap[a + b * d] - 0.5 * (self.loss[a] + self.loss[b]);
            }
        }
        out
    }

    /// `L_s[rho]`, or its dual when `dual` is set. Both share the
    /// elementwise dissipator; the commutator flips sign.
    fn tilted_action(&self, diss: &[f64], x: &CMat, dual: bool) -> CMat {
        let h = &self.hamiltonian;
        let comm = h * x - x * h;
        let phase = if dual { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
        let mut out = comm * phase;
        let d = self.dim();
        for b in 0..d {
            for a in 0..d {
                out[(a, b)] += x[(a, b)] * diss[a + b * d];
            }
        }
        out
    }

    pub fn generator_apply(&self, rho: &CMat) -> CMat {
        self.tilted_action(&self.dissipator(0.0), rho, false)
    }

    pub fn tilted_apply(&self, s: f64, rho: &CMat) -> CMat {
        self.tilted_action(&self.dissipator(s), rho, false)
    }

    pub fn tilted_dual_apply(&self, s: f64, x: &CMat) -> CMat {
        self.tilted_action(&self.dissipator(s), x, true)
    }

    /// Bound on the generator norm used to pick Taylor substeps.
    fn norm_bound(&self, s: f64) -> f64 {
        2.0 * norm_1(&self.hamiltonian) + self.dissipator(s).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `e^{t L_s}` (or its dual) applied to `x` by substepped Taylor series.
    pub fn propagate(&self, s: f64, x: &CMat, t: f64, dual: bool) -> CMat {
        let diss = self.dissipator(s);
        let steps = libm::ceil(self.norm_bound(s) * t.abs() / 0.5).max(1.0) as usize;
        let h = t / steps as f64;
        let mut y = x.clone();
        for _ in 0..steps {
            let mut term = y.clone();
            for k in 1..=40 {
                term = self.tilted_action(&diss, &term, dual) * Complex64::new(h / k as f64, 0.0);
                y += &term;
                if max_abs(&term) <= 1e-18 * max_abs(&y) {
                    break;
                }
            }
        }
        y
    }

    /// Dense column-major superoperator of `L_s`; `L <= 3` only.
    pub fn superoperator(&self, s: f64) -> Result<CMat> {
        if self.sites() > DENSE_SUPEROPERATOR_CAP {
            return Err(Error::SizeCap { sites: self.sites(), cap: DENSE_SUPEROPERATOR_CAP });
        }
        let d = self.dim();
        let id = identity(d);
        let h = &self.hamiltonian;
        let mut sup = (id.kronecker(h) - h.transpose().kronecker(&id)) * Complex64::new(0.0, -1.0);
        for (i, x) in self.dissipator(s).into_iter().enumerate() {
            sup[(i, i)] += x;
        }
        Ok(sup)
    }

    /// Emission rate per site, `gamma sum_i Tr[P_i rho] / L`.
    pub fn activity(&self, rho: &CMat) -> f64 {
        (0..self.dim()).map(|a| self.loss[a] * rho[(a, a)].re).sum::<f64>() / self.sites() as f64
    }

    /// `e^{-s} sum_i Tr[l J_i r J_i] / Tr[l r] / L`.
    pub fn hellmann_feynman_activity(&self, s: f64, left: &CMat, right: &CMat) -> f64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..d {
            for a in 0..d {
                acc += left[(a, b)].conj() * right[(a, b)] * self.overlap[a + b * d];
            }
        }
        libm::exp(-s) * acc.re / inner(left, right).re / self.sites() as f64
    }
}

/// Distance between the collision channel and the master-equation
/// propagator at one collision time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollisionLimitRow {
    pub dt: f64,
    pub distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionLimitReport {
    pub rows: Vec<CollisionLimitRow>,
    /// Every halving of `dt` reduced `distance/dt` by at least
    /// [`RATIO_TEST_FACTOR`].
    pub passed: bool,
}

pub const RATIO_TEST_FACTOR: f64 = 1.3;

fn channel_superoperator(params: &ModelParams) -> Result<CMat> {
    let kf = build_kraus_fast(params)?;
    let d = kf.dim();
    let mut sup = CMat::zeros(d * d, d * d);
    for k in 0..kf.len() {
        let op = kf.op(k);
        sup += op.map(|z| z.conj()).kronecker(&op);
    }
    Ok(sup)
}

/// Max-norm distance between `E_dt` and `e^{L dt}` over a list of collision
/// times, with the ratio test applied to consecutive entries whose times
/// differ by a factor two.
pub fn collision_limit_check(params: &ModelParams, dt_list: &[f64]) -> Result<CollisionLimitReport> {
    if params.sites > DENSE_SUPEROPERATOR_CAP {
        return Err(Error::SizeCap { sites: params.sites, cap: DENSE_SUPEROPERATOR_CAP });
    }
    let model = LindbladModel::new(params)?;
    let generator = model.superoperator(0.0)?;
    let mut rows = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let channel = channel_superoperator(&params.with_dt(dt))?;
        let exact = expm(&(&generator * Complex64::new(dt, 0.0)));
        let distance = max_abs_diff(&channel, &exact);
        rows.push(CollisionLimitRow { dt, distance, ratio: distance / dt });
    }
    let passed = rows.windows(2).all(|w| {
        let halved = (w[1].dt * 2.0 - w[0].dt).abs() <= 1e-12 * w[0].dt;
        !halved || w[1].ratio * RATIO_TEST_FACTOR <= w[0].ratio || w[0].ratio == 0.0
    });
    Ok(CollisionLimitReport { rows, passed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpOptions {
    /// Step of the precomputed no-jump propagator.
    pub micro_dt: f64,
    /// Resolution of jump times.
    pub bisection_tol: f64,
    /// Record `<n_i>` every `sample_stride` micro steps; zero disables.
    pub sample_stride: usize,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self { micro_dt: 0.005, bisection_tol: 1e-8, sample_stride: 0 }
    }
}

impl JumpOptions {
    /// Defaults with `micro_dt = 0.005 / Omega`.
    pub fn for_model(params: &ModelParams) -> Self {
        let omega = params.omega.abs();
        let micro_dt = if omega > 0.0 { 0.005 / omega } else { 0.005 };
        Self { micro_dt, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpTrajectory {
    pub seed: u64,
    pub stream: u64,
    pub t_max: f64,
    pub sites: usize,
    pub events: Vec<JumpEvent>,
    pub sample_times: Vec<f64>,
    /// Row-major `sample_times.len() x sites`.
    pub occupations: Vec<f64>,
}

impl JumpTrajectory {
    /// Emissions per site per unit time.
    pub fn rate(&self) -> f64 {
        self.events.len() as f64 / (self.sites as f64 * self.t_max)
    }

    /// Emissions per site per unit time inside `[t0, t1)`.
    pub fn rate_between(&self, t0: f64, t1: f64) -> f64 {
        let n = self.events.iter().filter(|e| e.time >= t0 && e.time < t1).count();
        n as f64 / (self.sites as f64 * (t1 - t0))
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn occupations_of(v: &[Complex64], sites: usize) -> Vec<f64> {
    let total = norm_sqr(v);
    let mut occ = vec![0.0; sites];
    for (a, z) in v.iter().enumerate() {
        for (i, o) in occ.iter_mut().enumerate() {
            if bit(a, i, sites) == 1 {
                *o += z.norm_sqr() / total;
            }
        }
    }
    occ
}

/// Jump unraveling with waiting-time thresholds: the unnormalized state
/// decays under `H_eff` until its squared norm reaches a uniform draw, at
/// which point a site `i` emits with probability proportional to
/// `|J_i psi|^2`.
pub fn quantum_jump_trajectory(
    model: &LindbladModel,
    psi0: &PureState,
    t_max: f64,
    opts: &JumpOptions,
    seed: u64,
    stream: u64,
) -> Result<JumpTrajectory> {
    let d = model.dim();
    let l = model.sites();
    if psi0.dim() != d {
        return Err(Error::Dimension { expected: d, found: psi0.dim() });
    }
    if !(opts.micro_dt > 0.0) || !(t_max >= 0.0) || !(opts.bisection_tol > 0.0) {
        return Err(Error::InvalidParams("micro_dt, t_max and bisection_tol must be positive".into()));
    }
    let mut rng = trajectory_rng(seed, stream);
    let generator = &model.effective_hamiltonian * Complex64::new(0.0, -1.0);
    let step = expm(&(&generator * Complex64::new(opts.micro_dt, 0.0)));
    let mut psi = psi0.amplitudes.clone();
    let n0 = libm::sqrt(norm_sqr(&psi));
    for z in psi.iter_mut() {
        *z /= n0;
    }
    let mut threshold = 1.0 - rng.random::<f64>();
    let mut out = JumpTrajectory {
        seed,
        stream,
        t_max,
        sites: l,
        events: Vec::new(),
        sample_times: Vec::new(),
        occupations: Vec::new(),
    };
    let steps = libm::ceil(t_max / opts.micro_dt - 1e-9) as usize;
    for n in 0..steps {
        let start = n as f64 * opts.micro_dt;
        let stop = (start + opts.micro_dt).min(t_max);
        let mut now = start;
        while stop - now > 0.0 {
            let remaining = stop - now;
            let before = norm_sqr(&psi);
            let next = if (remaining - opts.micro_dt).abs() <= 1e-15 * opts.micro_dt {
                (&step * nalgebra::DVector::from_column_slice(&psi)).as_slice().to_vec()
            } else {
                expm_action(&generator, remaining, &psi)
            };
            let after = norm_sqr(&next);
            if after > before * (1.0 + 1e-10) {
                return Err(Error::Numerical(alloc::format!(
                    "no-jump norm increased from {before} to {after}; reduce micro_dt"
                )));
            }
            if after > threshold {
                psi = next;
                break;
            }
            let (mut lo, mut hi) = (0.0, remaining);
            while hi - lo > opts.bisection_tol {
                let mid = 0.5 * (lo + hi);
                if norm_sqr(&expm_action(&generator, mid, &psi)) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let jumped = expm_action(&generator, hi, &psi);
            let weights: Vec<f64> = (0..l)
                .map(|i| jumped.iter().enumerate().filter(|(a, _)| bit(*a, i, l) == 0).map(|(_, z)| z.norm_sqr()).sum())
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Numerical("jump with vanishing emission weight".into()));
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut site = l - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    site = i;
                    break;
                }
            }
            let norm = libm::sqrt(weights[site]);
            psi = jumped
                .iter()
                .enumerate()
                .map(|(a, z)| if bit(a, site, l) == 0 { z / norm } else { ZERO })
                .collect();
            now += hi;
            out.events.push(JumpEvent { time: now, site });
            threshold = 1.0 - rng.random::<f64>();
        }
        if opts.sample_stride > 0 && (n + 1) % opts.sample_stride == 0 {
            out.sample_times.push(stop);
            out.occupations.extend(occupations_of(&psi, l));
        }
    }
    Ok(out)
}

/// `<n_i(t)>` from the master equation at the requested (increasing) times.
pub fn master_equation_occupations(model: &LindbladModel, rho0: &DensityMatrix, times: &[f64]) -> Vec<Vec<f64>> {
    let l = model.sites();
    let mut rho = rho0.data.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        rho = model.propagate(0.0, &rho, t - now, false);
        now = t;
        out.push((0..l).map(|i| (0..model.dim()).map(|a| bit(a, i, l) as f64 * rho[(a, a)].re).sum()).collect());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgfOptions {
    /// Step of the propagator whose dominant eigenvalue is sought;
    /// `None` uses `0.1 / gamma`.
    pub tau: Option<f64>,
    pub krylov: ArnoldiOptions,
}

impl Default for ScgfOptions {
    fn default() -> Self {
        Self { tau: None, krylov: ArnoldiOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScgfPoint {
    pub s: f64,
    pub theta: f64,
    /// `-theta'(s) / L`.
    pub activity: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dominant_operator(
    model: &LindbladModel,
    s: f64,
    tau: f64,
    dual: bool,
    start: &CMat,
    opts: &ArnoldiOptions,
) -> (CMat, usize, f64, bool) {
    let d = model.dim();
    let est = arnoldi_rightmost(
        |x, y| {
            let m = CMat::from_column_slice(d, d, x);
            y.copy_from_slice(model.propagate(s, &m, tau, dual).as_slice());
        },
        start.as_slice(),
        opts,
    );
    let op = crate::tilted::hermitian_from_vector(&est.vector, d, 1.0);
    (op, est.applications, est.residual, est.converged)
}

/// Dominant eigenvalue of the tilted generator and the emission rate of
/// the corresponding s-ensemble.
pub fn tilted_lindblad_scgf(model: &LindbladModel, s: f64, opts: &ScgfOptions) -> ScgfPoint {
    let d = model.dim();
    let g = model.params.gamma;
    let tau = opts.tau.unwrap_or(if g > 0.0 { 0.1 / g } else { 0.1 });
    let (left, il, rl, cl) = dominant_operator(model, s, tau, true, &identity(d), &opts.krylov);
    // A real Hamiltonian with real jumps makes the primal generator the
    // complex conjugate of the dual one, so r_s = conj(l_s).
    let real = model.hamiltonian.data.as_slice().iter().all(|z| z.im == 0.0);
    let (right, ir, rr, cr) = if real {
        let r = left.map(|z| z.conj());
        let tr = trace(&r);
        (r / tr, 0, rl, cl)
    } else {
        dominant_operator(model, s, tau, false, &identity(d), &opts.krylov)
    };
    let theta = inner(&left, &model.tilted_apply(s, &right)).re / inner(&left, &right).re;
    let activity = model.hellmann_feynman_activity(s, &left, &right);
    ScgfPoint { s, theta, activity, iterations: il + ir, residual: rl.max(rr), converged: cl && cr }
}

/// `theta(s)` by dense diagonalization; `L <= 3` only.
pub fn tilted_lindblad_scgf_dense(model: &LindbladModel, s: f64) -> Result<f64> {
    let sup = model.superoperator(s)?;
    let eig = nalgebra::Schur::new(sup)
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Schur decomposition produced no eigenvalues".into()))?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Stationary state of the master equation reached from `start`.
pub fn lindblad_stationary_state(model: &LindbladModel, start: &DensityMatrix, opts: &ScgfOptions) -> Result<DensityMatrix> {
    let g = model.params.gamma;
    let tau = opts.tau.unwrap_or(if g > 0.0 { 0.1 / g } else { 0.1 });
    let (rho, iterations, residual, converged) = dominant_operator(model, 0.0, tau, false, &start.data, &opts.krylov);
    if !converged {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let tr = trace(&rho);
    Ok(DensityMatrix { data: rho / tr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_part;

    fn model(l: usize, v: f64) -> LindbladModel {
        LindbladModel::new(&ModelParams::reference(l).with_v(v)).unwrap()
    }

    fn random_state(d: usize, seed: u64) -> CMat {
        let mut rng = trajectory_rng(seed, 7);
        let a = CMat::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let rho = &a * a.adjoint();
        let tr = trace(&rho);
        rho / tr
    }

    #[test]
    fn jumps_are_hermitian_and_sum_to_loss() {
        let m = model(3, 6.0);
        let mut sum = CMat::zeros(8, 8);
        for j in &m.jumps {
            assert!(max_abs_diff(j, &j.adjoint()) == 0.0);
            sum += j * j;
        }
        let mut expected = CMat::zeros(8, 8);
        for i in 0..3 {
            expected += ground_projector(i, 3).data * Complex64::new(3.0, 0.0);
        }
        assert!(max_abs_diff(&sum, &expected) < 1e-14);
        let anti = (&m.effective_hamiltonian - m.effective_hamiltonian.adjoint()) * Complex64::new(0.0, 0.5);
        assert!(max_abs_diff(&anti, &(sum * Complex64::new(0.5, 0.0))) < 1e-14);
    }

    #[test]
    fn generator_matches_textbook_form() {
        let m = model(2, 6.0);
        let rho = random_state(4, 1);
        let h = &m.hamiltonian;
        let mut expected = (h * &rho - &rho * h) * Complex64::new(0.0, -1.0);
        for j in &m.jumps {
            let jj = j * j;
            expected += j * &rho * j - (&jj * &rho + &rho * &jj) * Complex64::new(0.5, 0.0);
        }
        assert!(max_abs_diff(&m.generator_apply(&rho), &expected) < 1e-13);
        let sup = m.superoperator(0.0).unwrap();
        let vec = CMat::from_column_slice(16, 1, rho.as_slice());
        let via_sup = CMat::from_column_slice(4, 4, (sup * vec).as_slice());
        assert!(max_abs_diff(&via_sup, &expected) < 1e-13);
    }

    #[test]
    fn fully_mixed_state_is_stationary() {
        let m = model(4, 6.0);
        assert!(max_abs(&m.generator_apply(&(identity(16) / Complex64::new(16.0, 0.0)))) < 1e-12);
    }

    #[test]
    fn generator_is_trace_annihilating() {
        let m = model(3, 2.0);
        for seed in 0..50 {
            assert!(trace(&m.generator_apply(&random_state(8, seed))).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_dissipation_is_a_commutator() {
        let m = LindbladModel::new(&ModelParams::reference(2).with_gamma(0.0)).unwrap();
        let rho = random_state(4, 3);
        let h = &m.hamiltonian;
        assert!(max_abs_diff(&m.generator_apply(&rho), &((h * &rho - &rho * h) * Complex64::new(0.0, -1.0))) < 1e-14);
    }

    #[test]
    fn propagator_matches_dense_exponential() {
        let m = model(2, 6.0);
        let rho = random_state(4, 5);
        let dense = expm(&(m.superoperator(0.3).unwrap() * Complex64::new(0.7, 0.0)));
        let vec = CMat::from_column_slice(16, 1, rho.as_slice());
        let expected = CMat::from_column_slice(4, 4, (dense * vec).as_slice());
        assert!(max_abs_diff(&m.propagate(0.3, &rho, 0.7, false), &expected) < 1e-12);
    }

    #[test]
    fn collision_limit_single_site() {
        let params = ModelParams::reference(1);
        let report = collision_limit_check(&params, &[0.1, 0.05, 0.025]).unwrap();
        assert!(report.passed, "{:?}", report.rows);
        for w in report.rows.windows(2) {
            assert!(w[1].ratio < w[0].ratio);
        }
    }

    #[test]
    fn collision_limit_two_sites() {
        let report = collision_limit_check(&ModelParams::reference(2), &[0.1, 0.05, 0.025]).unwrap();
        assert!(report.passed, "{:?}", report.rows);
    }

    #[test]
    fn collision_limit_without_dissipation_is_exact() {
        let report = collision_limit_check(&ModelParams::reference(2).with_gamma(0.0), &[0.1, 0.05]).unwrap();
        assert!(report.rows.iter().all(|r| r.distance < 1e-12));
        assert!(collision_limit_check(&ModelParams::reference(4), &[0.1]).is_err());
    }

    #[test]
    fn no_events_without_dissipation() {
        let m = LindbladModel::new(&ModelParams::reference(3).with_gamma(0.0)).unwrap();
        let traj = quantum_jump_trajectory(&m, &PureState::basis(8, 0), 20.0, &JumpOptions::default(), 1, 0).unwrap();
        assert!(traj.events.is_empty());
    }

    #[test]
    fn matvec_path_matches_action() {
        // Exercises both branches of the no-jump propagation.
        let m = model(2, 6.0);
        let opts = JumpOptions { micro_dt: 0.01, ..Default::default() };
        let a = quantum_jump_trajectory(&m, &PureState::basis(4, 0), 3.0, &opts, 9, 0).unwrap();
        let b = quantum_jump_trajectory(&m, &PureState::basis(4, 0), 3.0, &opts, 9, 0).unwrap();
        assert_eq!(a, b);
        assert!(!a.events.is_empty());
        assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.events.iter().all(|e| e.time <= 3.0));
    }

    #[test]
    fn jump_occupations_match_master_equation() {
        let m = model(2, 6.0);
        let opts = JumpOptions { micro_dt: 0.01, sample_stride: 50, ..Default::default() };
        let runs = 400;
        let mut sum = vec![0.0; 4];
        let mut sq = vec![0.0; 4];
        for seed in 0..runs {
            let traj = quantum_jump_trajectory(&m, &PureState::basis(4, 0), 1.0, &opts, 11, seed).unwrap();
            for (k, x) in traj.occupations.iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        let exact = master_equation_occupations(&m, &DensityMatrix::basis_state(4, 0), &[0.5, 1.0]);
        for (k, (s, q)) in sum.iter().zip(&sq).enumerate() {
            let mean = s / runs as f64;
            let se = libm::sqrt((q / runs as f64 - mean * mean) / (runs as f64 - 1.0));
            assert!((mean - exact[k / 2][k % 2]).abs() <= 4.0 * se + 1e-12, "{k}: {mean} vs {}", exact[k / 2][k % 2]);
        }
    }

    #[test]
    fn scgf_vanishes_at_zero_field() {
        let m = model(3, 6.0);
        let p = tilted_lindblad_scgf(&m, 0.0, &ScgfOptions::default());
        assert!(p.converged);
        assert!(p.theta.abs() < 1e-10);
        assert!((p.activity - 1.5).abs() < 1e-10);
    }

    #[test]
    fn scgf_matches_dense_spectrum() {
        let m = model(2, 6.0);
        for &s in &[-0.3, 0.2, 0.6] {
            let p = tilted_lindblad_scgf(&m, s, &ScgfOptions::default());
            assert!(p.converged);
            assert!((p.theta - tilted_lindblad_scgf_dense(&m, s).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn hellmann_feynman_matches_finite_difference() {
        let m = model(3, 6.0);
        let h = 1e-4;
        for &s in &[-0.2, 0.1] {
            let p = tilted_lindblad_scgf(&m, s, &ScgfOptions::default());
            let up = tilted_lindblad_scgf(&m, s + h, &ScgfOptions::default()).theta;
            let down = tilted_lindblad_scgf(&m, s - h, &ScgfOptions::default()).theta;
            let fd = -(up - down) / (2.0 * h) / 3.0;
            assert!(((fd - p.activity) / p.activity).abs() < 1e-5, "{fd} {}", p.activity);
        }
    }

    #[test]
    fn scgf_is_convex() {
        let m = model(2, 6.0);
        let theta: Vec<f64> =
            (0..15).map(|i| tilted_lindblad_scgf(&m, -0.7 + 0.1 * i as f64, &ScgfOptions::default()).theta).collect();
        for w in theta.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }

    #[test]
    fn stationary_activity_is_half_gamma() {
        let m = model(3, 6.0);
        let rho = lindblad_stationary_state(&m, &DensityMatrix::basis_state(8, 0), &ScgfOptions::default()).unwrap();
        assert!((m.activity(&rho.data) - 1.5).abs() < 1e-8);
        assert!(max_abs_diff(&hermitian_part(&rho.data), &(identity(8) / Complex64::new(8.0, 0.0))) < 1e-8);
    }
}
