//! Asymmetric Morlet temporal filters.
//!
//! Window frames are mapped one-to-one onto a uniform grid over `[-pi, pi]`
//! with the predicted frame at `x = 0`. Frames before the center are weighted
//! by a Morlet wavelet with shape `(s1, w1)`, frames after it by `(s2, w2)`:
//!
//! ```text
//! psi(x; s, w) = exp(-0.5 * (x / (s / w))^2) * cos(w * x)
//! ```
//!
//! The envelope scale is `s / w`, so larger `w` narrows the filter for fixed
//! `s` while also raising the oscillation frequency.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, sin};

use crate::window::{ShapeError, WindowRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FilterError {
    #[error("window length must be odd and at least 3, got {0}")]
    InvalidLength(usize),
}

/// Positive shape parameters of an asymmetric Morlet filter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MorletParams {
    /// Preceding half.
    pub s1: f64,
    pub w1: f64,
    /// Following half.
    pub s2: f64,
    pub w2: f64,
}

impl MorletParams {
    pub fn symmetric(s: f64, w: f64) -> Self {
        Self {
            s1: s,
            w1: w,
            s2: s,
            w2: w,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s1, self.w1, self.s2, self.w2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            s1: a[0],
            w1: a[1],
            s2: a[2],
            w2: a[3],
        }
    }
}

fn check_len(frames: usize) -> Result<(), FilterError> {
    if frames < 3 || frames.is_multiple_of(2) {
        Err(FilterError::InvalidLength(frames))
    } else {
        Ok(())
    }
}

/// Uniform grid over `[-pi, pi]` with exact endpoints and an exact zero at
/// the center frame.
pub fn frame_to_x(frames: usize) -> Result<Vec<f64>, FilterError> {
    check_len(frames)?;
    let half = (frames - 1) / 2;
    let h = half as f64;
    Ok((0..frames)
        .map(|i| PI * ((i as f64 - h) / h))
        .collect())
}

#[inline]
pub fn morlet(x: f64, s: f64, w: f64) -> f64 {
    let u = x * w / s;
    exp(-0.5 * u * u) * cos(w * x)
}

/// Partial derivatives `(d/ds, d/dw)` of [`morlet`] at `x`.
#[inline]
pub fn morlet_partials(x: f64, s: f64, w: f64) -> (f64, f64) {
    let u = x * w / s;
    let env = exp(-0.5 * u * u);
    let c = cos(w * x);
    let d_s = env * c * (u * u / s);
    let d_w = env * (-(u * u / w) * c - x * sin(w * x));
    (d_s, d_w)
}

/// Discrete filter weights over frame offsets `-(T-1)/2 ..= (T-1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCurve {
    weights: Vec<f64>,
}

impl FilterCurve {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, FilterError> {
        check_len(weights.len())?;
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn center(&self) -> usize {
        (self.weights.len() - 1) / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn frame_offsets(&self) -> impl Iterator<Item = i64> + '_ {
        let c = self.center() as i64;
        (0..self.weights.len() as i64).map(move |i| i - c)
    }
}

pub fn filter_curve(params: &MorletParams, frames: usize) -> Result<FilterCurve, FilterError> {
    let xs = frame_to_x(frames)?;
    let weights = xs
        .iter()
        .map(|&x| {
            if x < 0.0 {
                morlet(x, params.s1, params.w1)
            } else if x > 0.0 {
                morlet(x, params.s2, params.w2)
            } else {
                1.0
            }
        })
        .collect();
    Ok(FilterCurve { weights })
}

/// Weighted temporal sum per feature: `out[f] = sum_t weights[t] * window[t, f]`.
pub fn apply_filter(curve: &FilterCurve, window: WindowRef<'_>) -> Result<Vec<f64>, ShapeError> {
    let mut out = alloc::vec![0.0; window.features()];
    apply_filter_into(curve.weights(), window, &mut out)?;
    Ok(out)
}

pub(crate) fn apply_filter_into(
    weights: &[f64],
    window: WindowRef<'_>,
    out: &mut [f64],
) -> Result<(), ShapeError> {
    if window.frames() != weights.len() || out.len() != window.features() {
        return Err(ShapeError::Window {
            frames: weights.len(),
            features: out.len(),
            found_frames: window.frames(),
            found_features: window.features(),
        });
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    for (t, &wt) in weights.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(window.row(t)) {
            *o += wt * v;
        }
    }
    Ok(())
}

/// Partials of every curve weight with respect to the four shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGradients {
    pub d_s1: Vec<f64>,
    pub d_w1: Vec<f64>,
    pub d_s2: Vec<f64>,
    pub d_w2: Vec<f64>,
}

impl CurveGradients {
    pub fn by_index(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.d_s1,
            1 => &self.d_w1,
            2 => &self.d_s2,
            3 => &self.d_w2,
            _ => panic!("Morlet filters have four shape parameters"),
        }
    }
}

pub fn filter_gradients(params: &MorletParams, frames: usize) -> Result<CurveGradients, FilterError> {
    let xs = frame_to_x(frames)?;
    let mut g = CurveGradients {
        d_s1: alloc::vec![0.0; frames],
        d_w1: alloc::vec![0.0; frames],
        d_s2: alloc::vec![0.0; frames],
        d_w2: alloc::vec![0.0; frames],
    };
    for (i, &x) in xs.iter().enumerate() {
        if x < 0.0 {
            let (ds, dw) = morlet_partials(x, params.s1, params.w1);
            g.d_s1[i] = ds;
            g.d_w1[i] = dw;
        } else if x > 0.0 {
            let (ds, dw) = morlet_partials(x, params.s2, params.w2);
            g.d_s2[i] = ds;
            g.d_w2[i] = dw;
        }
    }
    Ok(g)
}
