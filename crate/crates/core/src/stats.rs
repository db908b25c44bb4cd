//! Batch-means error estimation for correlated time series.

use alloc::vec::Vec;

/// Number of batches used throughout unless stated otherwise.
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Splits `0..len` into `batches` contiguous ranges of (almost) equal size.
pub fn batch_ranges(len: usize, batches: usize) -> Vec<core::ops::Range<usize>> {
    let b = batches.clamp(1, len.max(1));
    (0..b).map(|i| (i * len / b)..((i + 1) * len / b)).collect()
}

/// Applies `estimator` to every contiguous batch; the spread of the batch
/// values gives the standard error of their mean.
pub fn batch_estimate<F>(len: usize, batches: usize, mut estimator: F) -> Estimate
where
    F: FnMut(core::ops::Range<usize>) -> f64,
{
    let values: Vec<f64> = batch_ranges(len, batches).into_iter().map(&mut estimator).collect();
    let (mean, sd) = mean_std(&values);
    Estimate { mean, std_error: sd / libm::sqrt(values.len() as f64) }
}

pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    batch_estimate(values.len(), batches, |r| {
        let n = r.len() as f64;
        values[r].iter().sum::<f64>() / n
    })
}

/// Combines independent estimates into the estimate of their mean.
pub fn combine(estimates: &[Estimate]) -> Estimate {
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.mean).sum::<f64>() / n;
    let var = estimates.iter().map(|e| e.std_error * e.std_error).sum::<f64>();
    Estimate { mean, std_error: libm::sqrt(var) / n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_series_has_no_error() {
        let e = batch_means(&vec![0.25; 1000], 20);
        assert_eq!(e.mean, 0.25);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn ranges_cover_everything() {
        let r = batch_ranges(103, 20);
        assert_eq!(r.len(), 20);
        assert_eq!(r[0].start, 0);
        assert_eq!(r[19].end, 103);
        for w in r.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(batch_ranges(3, 20).len(), 3);
    }

    #[test]
    fn alternating_series() {
        let v: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let e = batch_means(&v, 2);
        assert_eq!(e.mean, 0.5);
        assert!((e.std_error - 0.5).abs() < 1e-15);
    }

    #[test]
    fn combining_shrinks_error() {
        let e = combine(&[Estimate { mean: 1.0, std_error: 0.2 }, Estimate { mean: 3.0, std_error: 0.2 }]);
        assert_eq!(e.mean, 2.0);
        assert!((e.std_error - libm::sqrt(0.08) / 2.0).abs() < 1e-15);
    }
}
