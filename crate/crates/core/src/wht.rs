//! Fast Walsh–Hadamard transform.
//!
//! Index `k` of the output collects `sum_m (-1)^{popcount(k & m)} x[m]`,
//! which is exactly the character sum relating the ancilla computational
//! basis to the per-ancilla `tau^x` eigenbasis.

use core::ops::{Add, Sub};

/// Unnormalized in-place transform across the `data.len() / segment`
/// consecutive segments of `data`, acting elementwise inside each segment.
/// The segment count must be a power of two.
pub fn fwht_segments<T>(data: &mut [T], segment: usize)
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    assert!(segment > 0 && data.len() % segment == 0);
    let n = data.len() / segment;
    assert!(n.is_power_of_two(), "segment count must be a power of two");
    let mut half = 1;
    while half < n {
        for block in (0..n).step_by(2 * half) {
            for m in block..block + half {
                let (lo, hi) = data.split_at_mut((m + half) * segment);
                let a = &mut lo[m * segment..(m + 1) * segment];
                let b = &mut hi[..segment];
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (s, d) = (*x + *y, *x - *y);
                    *x = s;
                    *y = d;
                }
            }
        }
        half *= 2;
    }
}

pub fn fwht<T>(data: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    fwht_segments(data, 1)
}

/// `(-1)^{popcount(k & m)}`
pub fn character(k: u64, m: u64) -> f64 {
    if (k & m).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
