//! Frame-by-feature windows.
//!
//! A window is a `T x F` matrix: `T` frames (oldest first) of `F` features.
//! [`WindowRef`] is a strided view into a row-major frame table so that
//! downsampled windows never need to be materialized.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("data length {found} does not match shape (expected {expected})")]
    DataLength { expected: usize, found: usize },
    #[error("window row {row} out of bounds for table with {rows} rows")]
    OutOfBounds { row: usize, rows: usize },
    #[error("window has {found_frames}x{found_features} entries, expected {frames}x{features}")]
    Window {
        frames: usize,
        features: usize,
        found_frames: usize,
        found_features: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    frames: usize,
    features: usize,
    data: Vec<f64>,
}

impl Window {
    pub fn new(frames: usize, features: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        if data.len() != frames * features {
            return Err(ShapeError::DataLength {
                expected: frames * features,
                found: data.len(),
            });
        }
        Ok(Self {
            frames,
            features,
            data,
        })
    }

    pub fn zeros(frames: usize, features: usize) -> Self {
        Self {
            frames,
            features,
            data: alloc::vec![0.0; frames * features],
        }
    }

    pub fn from_fn(frames: usize, features: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(frames * features);
        for t in 0..frames {
            for j in 0..features {
                data.push(f(t, j));
            }
        }
        Self {
            frames,
            features,
            data,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.features + f]
    }

    pub fn set(&mut self, t: usize, f: usize, v: f64) {
        self.data[t * self.features + f] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn view(&self) -> WindowRef<'_> {
        WindowRef {
            data: &self.data,
            features: self.features,
            start: 0,
            stride: 1,
            frames: self.frames,
        }
    }
}

/// Strided, read-only window over a row-major `frames x features` table.
#[derive(Debug, Clone, Copy)]
pub struct WindowRef<'a> {
    data: &'a [f64],
    features: usize,
    start: usize,
    stride: usize,
    frames: usize,
}

impl<'a> WindowRef<'a> {
    /// View of `frames` rows of `table`, beginning at row `start` and
    /// stepping `stride` rows at a time.
    pub fn strided(
        table: &'a [f64],
        features: usize,
        start: usize,
        stride: usize,
        frames: usize,
    ) -> Result<Self, ShapeError> {
        let rows = table.len().checked_div(features).unwrap_or(0);
        let last = start + stride * frames.saturating_sub(1);
        if frames == 0 || stride == 0 || last >= rows {
            return Err(ShapeError::OutOfBounds { row: last, rows });
        }
        Ok(Self {
            data: table,
            features,
            start,
            stride,
            frames,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Row index in the underlying table of window frame `t`.
    pub fn source_row(&self, t: usize) -> usize {
        self.start + t * self.stride
    }

    #[inline]
    pub fn row(&self, t: usize) -> &'a [f64] {
        let r = self.source_row(t) * self.features;
        &self.data[r..r + self.features]
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.row(t)[f]
    }

    pub fn to_window(&self) -> Window {
        Window::from_fn(self.frames, self.features, |t, f| self.get(t, f))
    }
}
