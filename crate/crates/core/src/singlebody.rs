//! Closed-form single-site results.
//!
//! With `a = Omega dt`, `b = sqrt(gamma dt)` and `c = 4a^2 + b^2`, the
//! stationary activity and the nearest-time correlation of a lone qubit are
//! elementary functions. Both are evaluated here in a rearranged form that
//! stays finite as `c -> 0`.

use alloc::vec::Vec;

use crate::channel::build_kraus_fast;
use crate::error::Result;
use crate::model::ModelParams;
use crate::observables::SpaceTimeOffset;
use crate::tilted::{s_scan, TiltedOptions};

/// Below this `c` the auxiliary functions switch to their Taylor series.
pub const SERIES_SWITCHOVER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingleBodyParams {
    pub a: f64,
    pub b: f64,
    /// `Delta dt`; the closed forms only cover zero detuning.
    pub detuning: f64,
}

impl SingleBodyParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b: b.abs(), detuning: 0.0 }
    }

    pub fn from_model(params: &ModelParams) -> Self {
        Self {
            a: params.omega * params.dt,
            b: libm::sqrt(params.gamma * params.dt),
            detuning: params.delta * params.dt,
        }
    }

    pub fn c(&self) -> f64 {
        4.0 * self.a * self.a + self.b * self.b
    }

    /// Single-site model with `Omega = 1` reproducing `(a, b)` at the given
    /// collision time.
    pub fn to_model(&self, dt: f64) -> ModelParams {
        ModelParams::new(1, 0.0, self.b * self.b / dt, dt)
            .with_omega(self.a / dt)
            .with_delta(self.detuning / dt)
    }
}

/// `sin^2(sqrt(c)/2) / c`.
fn half_angle_ratio(c: f64) -> f64 {
    if c < SERIES_SWITCHOVER {
        0.25 - c / 48.0 + c * c / 1440.0
    } else {
        let s = libm::sin(0.5 * libm::sqrt(c));
        s * s / c
    }
}

/// Stationary probability of a '1' outcome,
/// `1/2 - cos(b) (b^2 cos(sqrt c) + 4a^2) / (2c)`.
pub fn analytic_activity(p: &SingleBodyParams) -> f64 {
    let b = p.b;
    let half = libm::sin(0.5 * b);
    half * half + libm::cos(b) * b * b * half_angle_ratio(p.c())
}

/// Covariance of consecutive outcomes,
/// `b^2 sin^2(b) sin^2(sqrt(c)/2) ((8a^2 + b^2) cos(sqrt c) + b^2) / (2c^2)`.
pub fn analytic_correlation(p: &SingleBodyParams) -> f64 {
    let (a, b) = (p.a, p.b);
    let s = half_angle_ratio(p.c());
    let sb = libm::sin(b);
    b * b * sb * sb * s * (1.0 - (8.0 * a * a + b * b) * s)
}

/// One grid point of the detuning study.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetuningRow {
    pub delta: f64,
    pub s: f64,
    pub activity: f64,
    pub c_0_1: f64,
    pub lambda: f64,
    pub converged: bool,
}

/// s-ensemble activity and `c_(0,1)` of a single driven site over a grid
/// of static detunings and counting fields. `base` supplies `Omega`,
/// `gamma` and `dt`; its site count is ignored.
pub fn detuning_phase_scan(
    base: &ModelParams,
    deltas: &[f64],
    s_values: &[f64],
    opts: &TiltedOptions,
) -> Result<Vec<DetuningRow>> {
    let offset = SpaceTimeOffset::new(0, 1);
    let mut rows = Vec::with_capacity(deltas.len() * s_values.len());
    for &delta in deltas {
        let params = ModelParams { sites: 1, ..*base }.with_delta(delta);
        let kf = build_kraus_fast(&params)?;
        for row in s_scan(&kf, s_values, &[offset], opts) {
            rows.push(DetuningRow {
                delta,
                s: row.point.s,
                activity: row.point.activity,
                c_0_1: row.point.correlation(&offset).unwrap_or(f64::NAN),
                lambda: row.point.lambda,
                converged: row.point.converged,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_activity(a: f64, b: f64) -> f64 {
        let c = 4.0 * a * a + b * b;
        0.5 - 0.5 / c * b.cos() * (b * b * c.sqrt().cos() + 4.0 * a * a)
    }

    fn raw_correlation(a: f64, b: f64) -> f64 {
        let c = 4.0 * a * a + b * b;
        0.5 / (c * c) * b * b * b.sin().powi(2) * (0.5 * c.sqrt()).sin().powi(2) * ((8.0 * a * a + b * b) * c.sqrt().cos() + b * b)
    }

    #[test]
    fn rearranged_forms_match_the_direct_expressions() {
        for i in 0..10 {
            for j in 1..10 {
                let (a, b) = (0.2 * i as f64, 0.2 * j as f64 + 0.05);
                let p = SingleBodyParams::new(a, b);
                assert!((analytic_activity(&p) - raw_activity(a, b)).abs() < 1e-13);
                assert!((analytic_correlation(&p) - raw_correlation(a, b)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn reference_values() {
        let p = SingleBodyParams::new(1.25, 3.75f64.sqrt());
        assert!((analytic_activity(&p) - 0.5447141872182351).abs() < 1e-14);
        assert!((analytic_correlation(&p) + 0.20432515645429244).abs() < 1e-14);
        assert_eq!(SingleBodyParams::from_model(&ModelParams::reference(1)), p);
    }

    #[test]
    fn free_qubit_limit() {
        let p = SingleBodyParams::new(0.0, core::f64::consts::FRAC_PI_2);
        assert!((analytic_activity(&p) - 0.5).abs() < 1e-15);
        assert_eq!(analytic_activity(&SingleBodyParams::new(0.7, 0.0)), 0.0);
        assert_eq!(analytic_correlation(&SingleBodyParams::new(0.7, 0.0)), 0.0);
        assert_eq!(analytic_activity(&SingleBodyParams::new(0.0, 0.0)), 0.0);
        assert_eq!(analytic_correlation(&SingleBodyParams::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn series_branch_is_continuous() {
        let below = half_angle_ratio(SERIES_SWITCHOVER * (1.0 - 1e-9));
        let above = half_angle_ratio(SERIES_SWITCHOVER * (1.0 + 1e-9));
        assert!((below - above).abs() < 1e-15);
        let tiny = SingleBodyParams::new(1e-5, 1e-5);
        let series = tiny.b * tiny.b * (180.0 - 30.0 * tiny.a.powi(2) - 60.0 * tiny.b.powi(2)) / 360.0;
        assert!((analytic_activity(&tiny) - series).abs() < 1e-20);
    }

    #[test]
    fn even_in_a() {
        for &(a, b) in &[(0.3, 1.1), (1.7, 0.4), (1.25, 1.9)] {
            let p = SingleBodyParams::new(a, b);
            let m = SingleBodyParams::new(-a, b);
            assert_eq!(analytic_activity(&p), analytic_activity(&m));
            assert_eq!(analytic_correlation(&p), analytic_correlation(&m));
        }
    }

    #[test]
    fn detuning_scan_reduces_to_closed_forms() {
        let base = ModelParams::reference(1);
        let rows = detuning_phase_scan(&base, &[0.0], &[0.0], &TiltedOptions::default()).unwrap();
        let p = SingleBodyParams::from_model(&base);
        assert!((rows[0].activity - analytic_activity(&p)).abs() < 1e-10);
        assert!((rows[0].c_0_1 - analytic_correlation(&p)).abs() < 1e-10);
    }

    #[test]
    fn zero_field_row_is_smooth_in_detuning() {
        let deltas: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let rows = detuning_phase_scan(&ModelParams::reference(1), &deltas, &[0.0], &TiltedOptions::default()).unwrap();
        for series in [rows.iter().map(|r| r.activity).collect::<Vec<_>>(), rows.iter().map(|r| r.c_0_1).collect()] {
            let second: Vec<f64> = series.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).collect();
            for i in 1..second.len() - 1 {
                let neighbours = second[i - 1].max(second[i + 1]);
                assert!(second[i] <= 10.0 * neighbours + 1e-9, "{i}");
            }
        }
    }

    #[test]
    fn resonant_detuning_has_uncorrelated_phases() {
        let rows =
            detuning_phase_scan(&ModelParams::reference(1), &[-3.0, 3.0], &[-0.5, 0.0, 0.5], &TiltedOptions::default())
                .unwrap();
        assert!(rows.iter().all(|r| r.converged));
        for delta in [-3.0, 3.0] {
            let at = |s: f64| *rows.iter().find(|r| r.delta == delta && r.s == s).unwrap();
            assert!(at(-0.5).activity > 0.9 && at(0.5).activity < 0.1);
            assert!(at(-0.5).c_0_1.abs() < 1e-2 * at(0.0).c_0_1.abs());
            assert!(at(0.5).c_0_1.abs() < 1e-2 * at(0.0).c_0_1.abs());
        }
    }
}
