//! Dynamical order parameters: activity and space-time correlations of
//! the ancilla record, from ensemble states and from single trajectories.
//!
//! Ensemble correlations are evaluated through time-independent dual
//! operators: with `M_j = sum_{k: k_j = 1} K_k† K_k` the site-`j` click
//! effect, the joint click probability at offset `(di, dt)` is
//! `Tr[R_i rho]` with
//! `R_i = sum_{k': k'_i = 1} K_k'† E*^{dt-1}[M_{i+di}] K_k'`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{apply_channel, DensityMatrix, KrausFamily};
use crate::error::{Error, Result};
use crate::linalg::{gemm, inner, trace, CMat, MatMut, MatRef, ONE, ZERO};
use crate::model::{bit, build_pxp_projector};
use crate::stats::{batch_estimate, Estimate, DEFAULT_BATCHES};

/// Probabilities more negative than this are reported as errors.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceTimeOffset {
    pub di: i64,
    pub dt_steps: usize,
}

impl SpaceTimeOffset {
    pub const ACTIVITY: Self = Self { di: 0, dt_steps: 0 };

    pub fn new(di: i64, dt_steps: usize) -> Self {
        Self { di, dt_steps }
    }

    /// Site offset reduced to `0..L`.
    pub fn wrapped(&self, sites: usize) -> usize {
        self.di.rem_euclid(sites as i64) as usize
    }

    pub fn is_activity(&self) -> bool {
        self.di == 0 && self.dt_steps == 0
    }

    pub fn label(&self) -> String {
        format!("c_{}_{}", self.di, self.dt_steps)
    }
}

/// Time series produced by evolving the average state. `activity[j]` is
/// `a(t)` at `t = times[j]`; the correlation series for an offset starts at
/// `t = dt_steps + 1` (the first step at which it is defined).
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservableSeries {
    pub times: Vec<usize>,
    pub activity: Vec<f64>,
    pub correlations: BTreeMap<SpaceTimeOffset, Vec<f64>>,
    pub stationary_values: BTreeMap<String, f64>,
}

impl ObservableSeries {
    pub fn correlation_at(&self, offset: &SpaceTimeOffset, t: usize) -> Option<f64> {
        let series = self.correlations.get(offset)?;
        t.checked_sub(offset.dt_steps + 1).and_then(|j| series.get(j).copied())
    }
}

fn popcount_weights(n: usize) -> Vec<f64> {
    (0..n).map(|k| k.count_ones() as f64).collect()
}

fn site_weights(n: usize, mask: impl Fn(usize) -> bool) -> Vec<f64> {
    (0..n).map(|k| if mask(k) { 1.0 } else { 0.0 }).collect()
}

fn check_probability(p: f64, what: &str) -> Result<f64> {
    if p < -NEGATIVE_TOLERANCE || !p.is_finite() {
        return Err(Error::Numerical(format!("{what} probability {p:e}")));
    }
    Ok(p)
}

/// `p(k) = Tr[K_k rho K_k†]` for every outcome string.
pub fn outcome_marginals(kf: &KrausFamily, rho: &DensityMatrix) -> Result<Vec<f64>> {
    let d = kf.dim();
    let n = kf.len();
    if rho.dim() != d {
        return Err(Error::Dimension { expected: d, found: rho.dim() });
    }
    let b = kf.stack().left_products(&rho.data);
    let tall = kf.stack().tall();
    let mut p = vec![0.0; n];
    for j in 0..d {
        for k in 0..n {
            let off = k * d + j * n * d;
            let mut acc = ZERO;
            for i in 0..d {
                acc += b[off + i] * tall[off + i].conj();
            }
            p[k] += acc.re;
        }
    }
    for x in &p {
        check_probability(*x, "outcome")?;
    }
    Ok(p)
}

/// Joint table `p[k n + k']` of outcome `k` at time `t` and `k'` at
/// `t - dt_steps`, with `rho` the state before the earlier collision.
pub fn two_time_probabilities(kf: &KrausFamily, rho: &DensityMatrix, dt_steps: usize) -> Result<Vec<f64>> {
    if dt_steps == 0 {
        return Err(Error::InvalidParams("two-time table needs a positive time offset".into()));
    }
    let d = kf.dim();
    let n = kf.len();
    if rho.dim() != d {
        return Err(Error::Dimension { expected: d, found: rho.dim() });
    }
    let ops = kf.ops();
    // Column k' of `y` is the flattened E^{dt-1}[K_k' rho K_k'†].
    let mut y = vec![ZERO; d * d * n];
    for (kp, op) in ops.iter().enumerate() {
        let mut branch = DensityMatrix { data: crate::linalg::matmul3(op, &rho.data, &op.adjoint()) };
        for _ in 1..dt_steps {
            branch = apply_channel(kf, &branch)?;
        }
        y[kp * d * d..(kp + 1) * d * d].copy_from_slice(branch.data.as_slice());
    }
    // Column k of `q` is the flattened conj(K_k† K_k).
    let mut q = vec![ZERO; d * d * n];
    for (k, op) in ops.iter().enumerate() {
        let e = op.adjoint() * op;
        for (dst, src) in q[k * d * d..(k + 1) * d * d].iter_mut().zip(e.iter()) {
            *dst = src.conj();
        }
    }
    let mut joint = vec![ZERO; n * n];
    // joint[k, k'] (row-major in k) = sum_x q[x, k] y[x, k'].
    gemm(
        ONE,
        MatRef::col_major(&q, d * d, n).t(),
        MatRef::col_major(&y, d * d, n),
        ZERO,
        MatMut::new(&mut joint, n, n, n, 1),
    );
    joint.iter().map(|z| check_probability(z.re, "joint outcome")).collect()
}

/// `a = (1/L) sum_k p(k) popcount(k)` on the state before the collision.
pub fn ensemble_activity(kf: &KrausFamily, rho: &DensityMatrix) -> Result<f64> {
    let p = outcome_marginals(kf, rho)?;
    let l = kf.sites() as f64;
    Ok(p.iter().enumerate().map(|(k, x)| x * k.count_ones() as f64).sum::<f64>() / l)
}

/// Precomputed dual operators for the activity and a set of correlation
/// offsets of one family.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    sites: usize,
    /// `M_j`, the effect of a click on site `j`.
    effects: Vec<CMat>,
    /// Per offset, `R_i` for every site `i`.
    joint: Vec<(SpaceTimeOffset, Vec<CMat>)>,
}

impl CorrelationKernel {
    pub fn new(kf: &KrausFamily, offsets: &[SpaceTimeOffset]) -> Result<Self> {
        let l = kf.sites();
        let n = kf.len();
        let id = crate::linalg::identity(kf.dim());
        let stack = kf.stack();
        let effects: Vec<CMat> = (0..l)
            .map(|j| stack.apply_dual_weighted(&id, Some(&site_weights(n, |k| bit(k, j, l) == 1))))
            .collect();
        let mut joint = Vec::new();
        for &offset in offsets {
            if offset.is_activity() {
                continue;
            }
            let shift = offset.wrapped(l);
            let ops = (0..l)
                .map(|i| {
                    let j = (i + shift) % l;
                    if offset.dt_steps == 0 {
                        let w = site_weights(n, |k| bit(k, i, l) == 1 && bit(k, j, l) == 1);
                        stack.apply_dual_weighted(&id, Some(&w))
                    } else {
                        let mut g = effects[j].clone();
                        for _ in 1..offset.dt_steps {
                            g = stack.apply_dual_weighted(&g, None);
                        }
                        stack.apply_dual_weighted(&g, Some(&site_weights(n, |k| bit(k, i, l) == 1)))
                    }
                })
                .collect();
            joint.push((offset, ops));
        }
        Ok(Self { sites: l, effects, joint })
    }

    /// Click probability of every site on the collision following `rho`.
    pub fn site_probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.effects.iter().map(|m| inner(m, rho).re).collect()
    }

    pub fn activity(&self, rho: &CMat) -> f64 {
        self.site_probabilities(rho).iter().sum::<f64>() / self.sites as f64
    }

    /// `c_delta` given the state `base` before the earlier collision and
    /// the site probabilities at both times.
    fn correlation(&self, index: usize, base: &CMat, earlier: &[f64], later: &[f64]) -> f64 {
        let (offset, ops) = &self.joint[index];
        let l = self.sites;
        let shift = offset.wrapped(l);
        let mut c = 0.0;
        for i in 0..l {
            let j = (i + shift) % l;
            c += inner(&ops[i], base).re - earlier[i] * later[j];
        }
        c / l as f64
    }

    /// All correlations on a fixed point `rho` of the family.
    pub fn stationary_correlations(&self, rho: &CMat) -> Vec<(SpaceTimeOffset, f64)> {
        let probs = self.site_probabilities(rho);
        (0..self.joint.len()).map(|i| (self.joint[i].0, self.correlation(i, rho, &probs, &probs))).collect()
    }

    pub fn offsets(&self) -> Vec<SpaceTimeOffset> {
        self.joint.iter().map(|(o, _)| *o).collect()
    }
}

/// `c_delta` on the state before the earlier collision. For `dt_steps = 0`
/// this is the same-step spatial covariance.
pub fn ensemble_correlation(kf: &KrausFamily, rho: &DensityMatrix, offset: SpaceTimeOffset) -> Result<f64> {
    if offset.is_activity() {
        return Err(Error::InvalidParams("offset (0, 0) is reserved for the activity".into()));
    }
    let kernel = CorrelationKernel::new(kf, &[offset])?;
    let earlier = kernel.site_probabilities(&rho.data);
    let mut later_state = rho.clone();
    for _ in 0..offset.dt_steps {
        later_state = apply_channel(kf, &later_state)?;
    }
    let later = kernel.site_probabilities(&later_state.data);
    Ok(kernel.correlation(0, &rho.data, &earlier, &later))
}

/// Stationary values on a fixed state, labelled `activity` and `c_<di>_<dt>`.
pub fn stationary_values(
    kf: &KrausFamily,
    rho: &DensityMatrix,
    offsets: &[SpaceTimeOffset],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    out.insert(String::from("activity"), ensemble_activity(kf, rho)?);
    for &o in offsets.iter().filter(|o| !o.is_activity()) {
        out.insert(o.label(), ensemble_correlation(kf, rho, o)?);
    }
    Ok(out)
}

/// Evaluates the order parameters on `P rho_ss P / Tr[P rho_ss P]`, the
/// fully mixed state restricted to the blockade-free sector.
pub fn pxp_sector_prediction(kf: &KrausFamily, offsets: &[SpaceTimeOffset]) -> Result<BTreeMap<String, f64>> {
    let state = pxp_state(kf.sites(), kf.params.pbc)?;
    stationary_values(kf, &state, offsets)
}

pub fn pxp_state(sites: usize, pbc: bool) -> Result<DensityMatrix> {
    let p = build_pxp_projector(sites, pbc)?.data;
    let tr = trace(&p);
    Ok(DensityMatrix { data: p / tr })
}

/// Evolves `rho0` by the channel for `steps` collisions and records `a(t)`
/// and `c_delta(t)`.
pub fn transient_series(
    kf: &KrausFamily,
    rho0: &DensityMatrix,
    steps: usize,
    offsets: &[SpaceTimeOffset],
) -> Result<ObservableSeries> {
    let kernel = CorrelationKernel::new(kf, offsets)?;
    let depth = kernel.joint.iter().map(|(o, _)| o.dt_steps).max().unwrap_or(0);
    let mut history: Vec<(CMat, Vec<f64>)> = Vec::with_capacity(depth + 1);
    let mut series = ObservableSeries::default();
    for (o, _) in &kernel.joint {
        series.correlations.insert(*o, Vec::new());
    }
    let mut rho = rho0.clone();
    for t in 1..=steps {
        let probs = kernel.site_probabilities(&rho.data);
        series.times.push(t);
        series.activity.push(probs.iter().sum::<f64>() / kernel.sites as f64);
        history.push((rho.data.clone(), probs.clone()));
        if history.len() > depth + 1 {
            history.remove(0);
        }
        for idx in 0..kernel.joint.len() {
            let offset = kernel.joint[idx].0;
            if t > offset.dt_steps {
                let (base, earlier) = &history[history.len() - 1 - offset.dt_steps];
                let c = kernel.correlation(idx, base, earlier, &probs);
                series.correlations.get_mut(&offset).unwrap().push(c);
            }
        }
        if t < steps {
            rho = apply_channel(kf, &rho)?;
        }
    }
    Ok(series)
}

/// Counter `O_delta` and its normalized estimator from one record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeIntegral {
    pub offset: SpaceTimeOffset,
    pub counter: u64,
    /// `O_0 / (L T)` for the activity, `O_delta / (L T') - [O_0/(L T)]^2`
    /// otherwise, with `T' = T - dt_steps`.
    pub estimator: f64,
}

fn joint_clicks(outcomes: &[u64], sites: usize, offset: &SpaceTimeOffset, t: usize) -> u64 {
    let earlier = outcomes[t - offset.dt_steps] as usize;
    let later = outcomes[t] as usize;
    let shift = offset.wrapped(sites);
    (0..sites).filter(|&i| bit(earlier, i, sites) & bit(later, (i + shift) % sites, sites) == 1).count() as u64
}

fn counter(outcomes: &[u64], sites: usize, offset: &SpaceTimeOffset, range: core::ops::Range<usize>) -> u64 {
    if offset.is_activity() {
        return outcomes[range].iter().map(|k| k.count_ones() as u64).sum();
    }
    range.filter(|&t| t >= offset.dt_steps).map(|t| joint_clicks(outcomes, sites, offset, t)).sum()
}

fn check_offsets(steps: usize, offsets: &[SpaceTimeOffset]) -> Result<()> {
    for o in offsets {
        if o.dt_steps >= steps {
            return Err(Error::OffsetTooLong { dt_steps: o.dt_steps, steps });
        }
    }
    Ok(())
}

/// Time-integrated counters over a whole record.
pub fn trajectory_time_integrals(
    rec: &crate::trajectory::TrajectoryRecord,
    offsets: &[SpaceTimeOffset],
) -> Result<Vec<TimeIntegral>> {
    let t_len = rec.steps();
    check_offsets(t_len, offsets)?;
    let l = rec.sites();
    let o0 = counter(&rec.outcomes, l, &SpaceTimeOffset::ACTIVITY, 0..t_len);
    let activity = o0 as f64 / (l * t_len) as f64;
    Ok(offsets
        .iter()
        .map(|o| {
            let c = counter(&rec.outcomes, l, o, 0..t_len);
            let estimator = if o.is_activity() {
                activity
            } else {
                c as f64 / (l * (t_len - o.dt_steps)) as f64 - activity * activity
            };
            TimeIntegral { offset: *o, counter: c, estimator }
        })
        .collect())
}

/// Estimators with batch-means standard errors; each batch is a contiguous
/// block of steps evaluated with the same normalization as the full record.
pub fn time_integral_estimates(
    rec: &crate::trajectory::TrajectoryRecord,
    offsets: &[SpaceTimeOffset],
    batches: usize,
) -> Result<Vec<(SpaceTimeOffset, Estimate)>> {
    let t_len = rec.steps();
    check_offsets(t_len, offsets)?;
    let l = rec.sites();
    let b = if batches == 0 { DEFAULT_BATCHES } else { batches };
    Ok(offsets
        .iter()
        .map(|o| {
            let est = batch_estimate(t_len, b, |r| {
                let len = r.len();
                let o0 = counter(&rec.outcomes, l, &SpaceTimeOffset::ACTIVITY, r.clone()) as f64 / (l * len) as f64;
                if o.is_activity() {
                    return o0;
                }
                let start = r.start.max(o.dt_steps);
                let span = r.end.saturating_sub(start).max(1);
                counter(&rec.outcomes, l, o, r) as f64 / (l * span) as f64 - o0 * o0
            });
            let full = trajectory_time_integrals(rec, &[*o]).map(|v| v[0].estimator).unwrap_or(est.mean);
            (*o, Estimate { mean: full, std_error: est.std_error })
        })
        .collect())
}

/// Activity weights `popcount(k)` for every outcome string.
pub fn activity_weights(n: usize) -> Vec<f64> {
    popcount_weights(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_kraus_fast;
    use crate::model::ModelParams;
    use crate::singlebody::{analytic_activity, analytic_correlation, SingleBodyParams};
    use crate::trajectory::{RecordMode, TrajectoryRecord};

    fn mixed(d: usize) -> DensityMatrix {
        DensityMatrix::maximally_mixed(d)
    }

    #[test]
    fn single_site_reference_values() {
        let kf = build_kraus_fast(&ModelParams::reference(1)).unwrap();
        let a = ensemble_activity(&kf, &mixed(2)).unwrap();
        let c = ensemble_correlation(&kf, &mixed(2), SpaceTimeOffset::new(0, 1)).unwrap();
        assert!((a - 0.5447141872182351).abs() < 1e-12);
        assert!((c + 0.20432515645429244).abs() < 1e-12);
        let k1 = kf.op(1);
        assert!((a - (k1.clone() * k1.adjoint()).trace().re / 2.0).abs() < 1e-14);
        let joint = two_time_probabilities(&kf, &mixed(2), 1).unwrap();
        assert!((joint[3] - (a * a + c)).abs() < 1e-12);
    }

    #[test]
    fn oracle_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let (a, b) = (0.2 * i as f64 + 0.01, 0.2 * j as f64 + 0.01);
                let p = SingleBodyParams::new(a, b).to_model(1.0);
                let kf = build_kraus_fast(&p).unwrap();
                let act = ensemble_activity(&kf, &mixed(2)).unwrap();
                let cor = ensemble_correlation(&kf, &mixed(2), SpaceTimeOffset::new(0, 1)).unwrap();
                let sb = SingleBodyParams::new(a, b);
                assert!((act - analytic_activity(&sb)).abs() <= 1e-10, "a={a} b={b}");
                assert!((cor - analytic_correlation(&sb)).abs() <= 1e-10, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn no_dephasing_gives_no_clicks() {
        let kf = build_kraus_fast(&ModelParams::reference(2).with_gamma(0.0)).unwrap();
        let p = outcome_marginals(&kf, &mixed(4)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(ensemble_activity(&kf, &mixed(4)).unwrap().abs() < 1e-12);
        let joint = two_time_probabilities(&kf, &mixed(4), 2).unwrap();
        assert!((joint[0] - 1.0).abs() < 1e-12);
        assert!(ensemble_correlation(&kf, &mixed(4), SpaceTimeOffset::new(1, 1)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn joint_table_marginals_and_kernel_agree() {
        let kf = build_kraus_fast(&ModelParams::reference(3)).unwrap();
        let rho = DensityMatrix::basis_state(8, 0);
        for dt in 1..=3 {
            let joint = two_time_probabilities(&kf, &rho, dt).unwrap();
            let mut later_state = rho.clone();
            for _ in 0..dt {
                later_state = apply_channel(&kf, &later_state).unwrap();
            }
            let later = outcome_marginals(&kf, &later_state).unwrap();
            let earlier = outcome_marginals(&kf, &rho).unwrap();
            for k in 0..8 {
                let row: f64 = (0..8).map(|kp| joint[k * 8 + kp]).sum();
                let col: f64 = (0..8).map(|kk| joint[kk * 8 + k]).sum();
                assert!((row - later[k]).abs() <= 1e-10);
                assert!((col - earlier[k]).abs() <= 1e-10);
            }
            for di in 0..3 {
                let offset = SpaceTimeOffset::new(di, dt);
                let mut c = 0.0;
                for i in 0..3 {
                    let j = (i + di as usize) % 3;
                    let mut both = 0.0;
                    let mut pe = 0.0;
                    let mut pl = 0.0;
                    for k in 0..8 {
                        for kp in 0..8 {
                            both += joint[k * 8 + kp] * (bit(kp, i, 3) * bit(k, j, 3)) as f64;
                        }
                        pe += earlier[k] * bit(k, i, 3) as f64;
                        pl += later[k] * bit(k, j, 3) as f64;
                    }
                    c += both - pe * pl;
                }
                let got = ensemble_correlation(&kf, &rho, offset).unwrap();
                assert!((got - c / 3.0).abs() <= 1e-12, "offset {offset:?}");
            }
        }
    }

    #[test]
    fn spatial_correlation_is_symmetric_on_a_ring() {
        let kf = build_kraus_fast(&ModelParams::reference(4)).unwrap();
        let rho = DensityMatrix::basis_state(16, 0b0100);
        for di in 1..4 {
            let plus = ensemble_correlation(&kf, &rho, SpaceTimeOffset::new(di, 0)).unwrap();
            let minus = ensemble_correlation(&kf, &rho, SpaceTimeOffset::new(-di, 0)).unwrap();
            assert!((plus - minus).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_state_activity_is_stationary() {
        let kf = build_kraus_fast(&ModelParams::reference(4)).unwrap();
        let a0 = ensemble_activity(&kf, &mixed(16)).unwrap();
        let a1 = ensemble_activity(&kf, &apply_channel(&kf, &mixed(16)).unwrap()).unwrap();
        assert!((a0 - a1).abs() <= 1e-10);
    }

    #[test]
    fn transient_series_matches_direct_evaluation() {
        let kf = build_kraus_fast(&ModelParams::reference(3)).unwrap();
        let offsets = [SpaceTimeOffset::new(0, 1), SpaceTimeOffset::new(1, 2), SpaceTimeOffset::new(1, 0)];
        let rho0 = DensityMatrix::basis_state(8, 0);
        let series = transient_series(&kf, &rho0, 6, &offsets).unwrap();
        let mut states = vec![rho0];
        for _ in 0..6 {
            let next = apply_channel(&kf, states.last().unwrap()).unwrap();
            states.push(next);
        }
        for t in 1..=6 {
            let a = ensemble_activity(&kf, &states[t - 1]).unwrap();
            assert!((series.activity[t - 1] - a).abs() < 1e-13);
            for o in &offsets {
                match series.correlation_at(o, t) {
                    Some(c) => {
                        let want = ensemble_correlation(&kf, &states[t - 1 - o.dt_steps], *o).unwrap();
                        assert!((c - want).abs() < 1e-13);
                    }
                    None => assert!(t <= o.dt_steps),
                }
            }
        }
    }

    #[test]
    fn pxp_prediction_on_two_sites() {
        let state = pxp_state(2, true).unwrap();
        for b in 0..3 {
            assert!((state.data[(b, b)].re - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(state.data[(3, 3)].re, 0.0);
        assert!((state.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pxp_prediction_exceeds_mixed_state_activity() {
        let kf = build_kraus_fast(&ModelParams::reference(6)).unwrap();
        let pxp = pxp_sector_prediction(&kf, &[SpaceTimeOffset::new(0, 1)]).unwrap();
        let full = stationary_values(&kf, &mixed(64), &[SpaceTimeOffset::new(0, 1)]).unwrap();
        assert!(pxp["activity"] > full["activity"]);
        assert!((full["activity"] - 0.4740759493030578).abs() < 1e-10);
        assert!((pxp["activity"] - 0.6812973814190673).abs() < 1e-10);
        assert!(full["c_0_1"] > 0.0);
    }

    fn record(outcomes: Vec<u64>, sites: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            seed: 0,
            stream: 0,
            params: ModelParams::reference(sites),
            outcomes,
            occupations: None,
            mode: RecordMode::Reset,
        }
    }

    #[test]
    fn counters_on_saturated_records() {
        let offsets = [SpaceTimeOffset::ACTIVITY, SpaceTimeOffset::new(0, 1), SpaceTimeOffset::new(1, 2)];
        let zeros = trajectory_time_integrals(&record(vec![0; 10], 3), &offsets).unwrap();
        assert!(zeros.iter().all(|x| x.counter == 0 && x.estimator == 0.0));
        let ones = trajectory_time_integrals(&record(vec![0b111; 10], 3), &offsets).unwrap();
        assert_eq!(ones[0].counter, 30);
        assert_eq!(ones[1].counter, 3 * 9);
        assert_eq!(ones[2].counter, 3 * 8);
        assert_eq!(ones[1].estimator, 0.0);
        assert!(matches!(
            trajectory_time_integrals(&record(vec![0; 3], 3), &[SpaceTimeOffset::new(0, 3)]),
            Err(Error::OffsetTooLong { dt_steps: 3, steps: 3 })
        ));
    }

    #[test]
    fn counter_respects_site_wrap() {
        // Site 0 clicks at t = 1, site 2 at t = 2: offset (+2, 1) and (-1, 1) both see it.
        let rec = record(vec![0b100, 0b001], 3);
        let a = trajectory_time_integrals(&rec, &[SpaceTimeOffset::new(2, 1), SpaceTimeOffset::new(-1, 1)]).unwrap();
        assert_eq!(a[0].counter, 1);
        assert_eq!(a[1].counter, 1);
        let b = trajectory_time_integrals(&rec, &[SpaceTimeOffset::new(1, 1)]).unwrap();
        assert_eq!(b[0].counter, 0);
    }
}
