//! One-dimensional smoothing and differencing helpers.

use alloc::vec::Vec;

/// Gaussian taps at offsets `-r..=r` with `r = ceil(4 sigma)`, unnormalized.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = libm::ceil(4.0 * sigma) as i64;
    (-r..=r)
        .map(|k| {
            let u = k as f64 / sigma;
            libm::exp(-0.5 * u * u)
        })
        .collect()
}

/// Gaussian smoothing truncated at four standard deviations.
///
/// Near the edges the kernel is cut to the in-bounds taps and renormalized,
/// so constant signals are preserved exactly up to rounding.
pub fn gaussian_smooth(signal: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || signal.is_empty() {
        return signal.to_vec();
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as i64;
    let n = signal.len() as i64;
    (0..n)
        .map(|i| {
            let lo = (i - r).max(0);
            let hi = (i + r).min(n - 1);
            let mut acc = 0.0;
            let mut norm = 0.0;
            for j in lo..=hi {
                let w = taps[(j - i + r) as usize];
                acc += w * signal[j as usize];
                norm += w;
            }
            acc / norm
        })
        .collect()
}

/// First-order forward differences scaled by `rate` (samples per second).
///
/// The final sample has no forward neighbour and copies the last interior
/// derivative.
pub fn forward_diff(signal: &[f64], rate: f64) -> Vec<f64> {
    let n = signal.len();
    if n < 2 {
        return alloc::vec![0.0; n];
    }
    let mut d: Vec<f64> = signal.windows(2).map(|w| (w[1] - w[0]) * rate).collect();
    d.push(d[n - 2]);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_preserves_constants() {
        let s = alloc::vec![3.25; 1000];
        for sigma in [8.0, 30.0, 120.0] {
            for v in gaussian_smooth(&s, sigma) {
                assert!((v - 3.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_preserves_interior_ramp() {
        let s: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        let out = gaussian_smooth(&s, 5.0);
        for i in 20..180 {
            assert!((out[i] - s[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn diff_of_ramp() {
        let s: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        assert_eq!(forward_diff(&s, 30.0), alloc::vec![60.0; 10]);
        assert_eq!(forward_diff(&[1.0], 1.0), [0.0]);
    }
}
