//! Quantum trajectories of the monitored chain.
//!
//! Every trajectory owns a ChaCha8 stream selected by `(seed, stream)`.
//! The sequential sampler consumes exactly one uniform per ancilla and step,
//! ancilla 0 first; the enumerated sampler consumes one uniform per step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{build_joint_unitary, joint_block, KrausFamily, OpStack, DENSE_SIZE_CAP};
use crate::error::{Error, Result};
use crate::linalg::{gemm, matmul3, adjoint, CMat, MatMut, MatRef, ONE, ZERO};
use crate::model::{bit, ModelParams};
use crate::wht::fwht_segments;

/// Allowed deviation of the total outcome probability from one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-8;

/// Deterministic per-trajectory random stream.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self { amplitudes };
        let n = state.norm();
        if !((n - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParams(format!("state norm {n} differs from one")));
        }
        Ok(state)
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|z| z.norm_sqr()).sum())
    }

    /// `<n_i>` for every site.
    pub fn occupations(&self, sites: usize) -> Vec<f64> {
        let mut occ = vec![0.0; sites];
        for (b, z) in self.amplitudes.iter().enumerate() {
            let w = z.norm_sqr();
            for (i, o) in occ.iter_mut().enumerate() {
                if bit(b, i, sites) == 1 {
                    *o += w;
                }
            }
        }
        occ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RecordMode {
    Reset,
    ResetFree,
    ResetFreePostprocessed,
}

/// One realization. `outcomes[t]` is the packed outcome string of step
/// `t + 1`; occupations, when present, are stored row-major `T x L` and
/// refer to the post-measurement state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub params: ModelParams,
    pub outcomes: Vec<u64>,
    pub occupations: Option<Vec<f64>>,
    pub mode: RecordMode,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    pub fn sites(&self) -> usize {
        self.params.sites
    }

    /// `k_i(t)` for `t` in `1..=T`.
    pub fn outcome(&self, t: usize, site: usize) -> u8 {
        bit(self.outcomes[t - 1] as usize, site, self.sites()) as u8
    }

    pub fn occupation(&self, t: usize, site: usize) -> Option<f64> {
        self.occupations.as_ref().map(|o| o[(t - 1) * self.sites() + site])
    }

    pub fn total_ones(&self) -> u64 {
        self.outcomes.iter().map(|k| k.count_ones() as u64).sum()
    }
}

/// Branch `k` of the post-collision joint state occupies
/// `joint[k d .. (k+1) d]`.
fn block_weights(joint: &[Complex64], d: usize) -> Vec<f64> {
    joint.chunks(d).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
}

fn check_total(total: f64, step: usize) -> Result<()> {
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::Numerical(format!("outcome probabilities sum to {total} at step {step}")));
    }
    Ok(())
}

/// Measures the ancillas one after another by the chain rule of partial
/// norms, drawing one uniform per ancilla.
fn measure_sequentially(weights: &[f64], sites: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut k = 0usize;
    let mut mass: f64 = weights.iter().sum();
    for site in 0..sites {
        let shift = sites - 1 - site;
        let prefix = k >> shift;
        let lo = prefix << shift;
        let width = 1usize << shift;
        let p0: f64 = weights[lo..lo + width].iter().sum();
        let u: f64 = rng.random();
        if u * mass >= p0 {
            k |= 1 << shift;
            mass -= p0;
        } else {
            mass = p0;
        }
    }
    k
}

fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn collapse(joint: &[Complex64], d: usize, k: usize, weight: f64, psi: &mut [Complex64]) {
    let inv = 1.0 / libm::sqrt(weight);
    for (p, z) in psi.iter_mut().zip(&joint[k * d..(k + 1) * d]) {
        *p = z * inv;
    }
}

/// Collision propagators `E_m` recovered from a family by the inverse
/// transform, used to form `U (psi (x) |0_A>)` block by block.
#[derive(Debug, Clone)]
pub struct BlockPropagator {
    blocks: OpStack,
}

impl BlockPropagator {
    pub fn new(kf: &KrausFamily) -> Self {
        let d = kf.dim();
        let n = kf.len();
        let mut tall = kf.stack().tall().to_vec();
        for col in tall.chunks_mut(n * d) {
            fwht_segments(col, d);
        }
        Self { blocks: OpStack::from_tall(d, n, tall) }
    }

    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    /// Joint post-collision state in the computational ancilla basis.
    pub fn joint_state(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.blocks.dim();
        let n = self.blocks.len();
        gemm(
            ONE,
            MatRef::col_major(self.blocks.tall(), n * d, d),
            MatRef::col_major(psi, d, 1),
            ZERO,
            MatMut::col_major(out, n * d, 1),
        );
        fwht_segments(out, d);
        let scale = 1.0 / n as f64;
        for z in out.iter_mut() {
            *z *= scale;
        }
    }
}

fn check_initial(kf_dim: usize, psi0: &PureState, steps: usize) -> Result<()> {
    if psi0.dim() != kf_dim {
        return Err(Error::Dimension { expected: kf_dim, found: psi0.dim() });
    }
    if steps == 0 {
        return Err(Error::InvalidParams("trajectory needs at least one step".into()));
    }
    let n = psi0.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("initial state norm {n}")));
    }
    Ok(())
}

/// Reusable sampler holding the block propagators of one family.
#[derive(Debug, Clone)]
pub struct TrajectorySampler<'a> {
    kf: &'a KrausFamily,
    propagator: BlockPropagator,
}

impl<'a> TrajectorySampler<'a> {
    pub fn new(kf: &'a KrausFamily) -> Self {
        Self { kf, propagator: BlockPropagator::new(kf) }
    }

    pub fn sample(
        &self,
        psi0: &PureState,
        steps: usize,
        seed: u64,
        stream: u64,
        record_occupations: bool,
    ) -> Result<TrajectoryRecord> {
        let d = self.kf.dim();
        let l = self.kf.sites();
        check_initial(d, psi0, steps)?;
        let mut rng = trajectory_rng(seed, stream);
        let mut psi = psi0.amplitudes.clone();
        let mut joint = vec![ZERO; self.kf.len() * d];
        let mut outcomes = Vec::with_capacity(steps);
        let mut occupations = record_occupations.then(|| Vec::with_capacity(steps * l));
        for t in 1..=steps {
            self.propagator.joint_state(&psi, &mut joint);
            let weights = block_weights(&joint, d);
            check_total(weights.iter().sum(), t)?;
            let k = measure_sequentially(&weights, l, &mut rng);
            collapse(&joint, d, k, weights[k], &mut psi);
            outcomes.push(k as u64);
            if let Some(occ) = occupations.as_mut() {
                occ.extend(PureState { amplitudes: psi.clone() }.occupations(l));
            }
        }
        Ok(TrajectoryRecord { seed, stream, params: self.kf.params, outcomes, occupations, mode: RecordMode::Reset })
    }
}

/// Sequential-measurement trajectory on stream 0 of `seed`.
pub fn sample_trajectory(
    kf: &KrausFamily,
    psi0: &PureState,
    steps: usize,
    seed: u64,
    record_occupations: bool,
) -> Result<TrajectoryRecord> {
    TrajectorySampler::new(kf).sample(psi0, steps, seed, 0, record_occupations)
}

/// Born probabilities `|K_k psi|^2` of every outcome string.
pub fn outcome_distribution(kf: &KrausFamily, psi: &[Complex64]) -> Vec<f64> {
    let d = kf.dim();
    let mut joint = vec![ZERO; kf.len() * d];
    direct_joint_state(kf, psi, &mut joint);
    block_weights(&joint, d)
}

/// Same distribution as [`outcome_distribution`], computed through the
/// block propagator and the chain rule used by the sequential sampler.
pub fn sequential_outcome_distribution(kf: &KrausFamily, psi: &[Complex64]) -> Vec<f64> {
    let d = kf.dim();
    let l = kf.sites();
    let mut joint = vec![ZERO; kf.len() * d];
    BlockPropagator::new(kf).joint_state(psi, &mut joint);
    let weights = block_weights(&joint, d);
    (0..kf.len())
        .map(|k| {
            let mut p = 1.0;
            for site in 0..l {
                let shift = l - 1 - site;
                let lo = (k >> (shift + 1)) << (shift + 1);
                let width = 1usize << (shift + 1);
                let parent: f64 = weights[lo..lo + width].iter().sum();
                let mid = lo + (width >> 1);
                let child: f64 = if (k >> shift) & 1 == 0 {
                    weights[lo..mid].iter().sum()
                } else {
                    weights[mid..lo + width].iter().sum()
                };
                p *= if parent > 0.0 { child / parent } else { 0.0 };
            }
            p
        })
        .collect()
}

fn direct_joint_state(kf: &KrausFamily, psi: &[Complex64], out: &mut [Complex64]) {
    let d = kf.dim();
    gemm(
        ONE,
        MatRef::col_major(kf.stack().tall(), kf.len() * d, d),
        MatRef::col_major(psi, d, 1),
        ZERO,
        MatMut::col_major(out, kf.len() * d, 1),
    );
}

/// Validation sampler: enumerates all outcome probabilities and draws one
/// uniform per step by inverse CDF.
pub fn sample_trajectory_enumerated(
    kf: &KrausFamily,
    psi0: &PureState,
    steps: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    if kf.sites() > DENSE_SIZE_CAP {
        return Err(Error::SizeCap { sites: kf.sites(), cap: DENSE_SIZE_CAP });
    }
    let d = kf.dim();
    check_initial(d, psi0, steps)?;
    let mut rng = trajectory_rng(seed, 0);
    let mut psi = psi0.amplitudes.clone();
    let mut joint = vec![ZERO; kf.len() * d];
    let mut outcomes = Vec::with_capacity(steps);
    for t in 1..=steps {
        direct_joint_state(kf, &psi, &mut joint);
        let weights = block_weights(&joint, d);
        check_total(weights.iter().sum(), t)?;
        let k = inverse_cdf(&weights, rng.random());
        collapse(&joint, d, k, weights[k], &mut psi);
        outcomes.push(k as u64);
    }
    Ok(TrajectoryRecord { seed, stream: 0, params: kf.params, outcomes, occupations: None, mode: RecordMode::Reset })
}

/// Conditional operators `K_{k|k'} = <k_A| U |k'_A>` for ancillas that are
/// not reset between collisions.
#[derive(Debug, Clone)]
pub enum ConditionalKraus {
    /// All `4^L` blocks cut from the joint unitary, `stacks[k']` holding
    /// every `k` for a fixed previous record `k'`.
    Dense { params: ModelParams, stacks: Vec<OpStack> },
    /// `K_{k|k'} = K_{k xor k'}`, which follows from the ancilla coupling
    /// being diagonal in the `tau^x` eigenbasis.
    Xor(KrausFamily),
}

impl ConditionalKraus {
    pub fn dense(params: &ModelParams) -> Result<Self> {
        let u = build_joint_unitary(params)?;
        let n = params.dim();
        let stacks = (0..n)
            .map(|kp| {
                let ops: Vec<CMat> = (0..n).map(|k| joint_block(&u, n, k, kp)).collect();
                OpStack::from_ops(&ops)
            })
            .collect();
        Ok(Self::Dense { params: *params, stacks })
    }

    pub fn from_family(kf: KrausFamily) -> Self {
        Self::Xor(kf)
    }

    pub fn params(&self) -> ModelParams {
        match self {
            Self::Dense { params, .. } => *params,
            Self::Xor(kf) => kf.params,
        }
    }

    pub fn dim(&self) -> usize {
        self.params().dim()
    }

    pub fn op(&self, k: usize, k_prev: usize) -> CMat {
        match self {
            Self::Dense { stacks, .. } => stacks[k_prev].op(k),
            Self::Xor(kf) => kf.op(k ^ k_prev),
        }
    }

    fn joint_state(&self, psi: &[Complex64], k_prev: usize, out: &mut [Complex64]) {
        let d = self.dim();
        match self {
            Self::Dense { stacks, .. } => gemm(
                ONE,
                MatRef::col_major(stacks[k_prev].tall(), d * d, d),
                MatRef::col_major(psi, d, 1),
                ZERO,
                MatMut::col_major(out, d * d, 1),
            ),
            Self::Xor(kf) => {
                let mut tmp = vec![ZERO; d * d];
                direct_joint_state(kf, psi, &mut tmp);
                for k in 0..d {
                    let src = k ^ k_prev;
                    out[k * d..(k + 1) * d].copy_from_slice(&tmp[src * d..(src + 1) * d]);
                }
            }
        }
    }
}

/// Protocol without ancilla resets: each collision starts from the ancilla
/// record left by the previous measurement. Raw outcomes are stored.
pub fn sample_trajectory_reset_free(
    cond: &ConditionalKraus,
    psi0: &PureState,
    steps: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let params = cond.params();
    let d = params.dim();
    let l = params.sites;
    check_initial(d, psi0, steps)?;
    let mut rng = trajectory_rng(seed, 0);
    let mut psi = psi0.amplitudes.clone();
    let mut joint = vec![ZERO; d * d];
    let mut outcomes = Vec::with_capacity(steps);
    let mut prev = 0usize;
    for t in 1..=steps {
        cond.joint_state(&psi, prev, &mut joint);
        let weights = block_weights(&joint, d);
        check_total(weights.iter().sum(), t)?;
        let k = measure_sequentially(&weights, l, &mut rng);
        collapse(&joint, d, k, weights[k], &mut psi);
        outcomes.push(k as u64);
        prev = k;
    }
    Ok(TrajectoryRecord { seed, stream: 0, params, outcomes, occupations: None, mode: RecordMode::ResetFree })
}

/// `k~_i(t) = |k_i(t) - k_i(t-1)|` with `k_i(0) = 0`.
pub fn postprocess_reset_free(rec: &TrajectoryRecord) -> Result<TrajectoryRecord> {
    if rec.mode != RecordMode::ResetFree {
        return Err(Error::WrongMode { expected: RecordMode::ResetFree, found: rec.mode });
    }
    let mut prev = 0u64;
    let outcomes = rec
        .outcomes
        .iter()
        .map(|&k| {
            let change = k ^ prev;
            prev = k;
            change
        })
        .collect();
    Ok(TrajectoryRecord { outcomes, mode: RecordMode::ResetFreePostprocessed, ..rec.clone() })
}

/// Exact probability of every outcome path of length `steps`, indexed with
/// the first step most significant: `((k1 n) + k2) n + ...`.
pub fn path_probabilities(kf: &KrausFamily, rho0: &CMat, steps: usize) -> Vec<f64> {
    let ops = kf.ops();
    let mut branches = vec![rho0.clone()];
    for _ in 0..steps {
        let mut next = Vec::with_capacity(branches.len() * ops.len());
        for rho in &branches {
            for k in &ops {
                next.push(matmul3(k, rho, &adjoint(k)));
            }
        }
        branches = next;
    }
    branches.iter().map(|r| crate::linalg::trace(r).re).collect()
}

/// Exact distribution of post-processed reset-free records of length
/// `steps`, in the same indexing as [`path_probabilities`].
pub fn reset_free_processed_distribution(cond: &ConditionalKraus, rho0: &CMat, steps: usize) -> Vec<f64> {
    let n = cond.dim();
    // (raw previous outcome, processed path index, unnormalized state)
    let mut branches: Vec<(usize, usize, CMat)> = vec![(0, 0, rho0.clone())];
    for _ in 0..steps {
        let mut next = Vec::with_capacity(branches.len() * n);
        for (prev, path, rho) in &branches {
            for k in 0..n {
                let op = cond.op(k, *prev);
                next.push((k, path * n + (k ^ prev), matmul3(&op, rho, &adjoint(&op))));
            }
        }
        branches = next;
    }
    let mut out = vec![0.0; n.pow(steps as u32)];
    for (_, path, rho) in branches {
        out[path] += crate::linalg::trace(&rho).re;
    }
    out
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Path index of the first `steps` outcomes of a record, matching
/// [`path_probabilities`].
pub fn path_index(rec: &TrajectoryRecord, steps: usize) -> usize {
    let n = rec.params.dim();
    rec.outcomes[..steps].iter().fold(0, |acc, &k| acc * n + k as usize)
}
