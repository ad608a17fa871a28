//! Assembly of the 2-channel classifier input grid from the concatenated
//! X = [BoW ‖ TF-IDF] vector and the one-hot Y vector.
//!
//! The grid is square with side ceil(sqrt(2V)), filled row-major and
//! zero-padded. Channel 0 holds X standardized with training-split
//! statistics; channel 1 holds Y untouched (it is already binary).

use super::{FeatureKind, FeatureVector, FeaturesError};

/// Per-feature affine standardization (v - mu) / (sigma + 1e-8), fitted on
/// the training split only and frozen into the vocabulary artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum Standardizer {
    /// Pass-through, used by tests and raw inspection paths.
    Identity,
    Affine { mu: Vec<f64>, sigma: Vec<f64> },
}

pub const STANDARDIZER_EPSILON: f64 = 1e-8;

impl Standardizer {
    /// Fit per-feature mean and population standard deviation.
    pub fn fit(xs: &[FeatureVector]) -> Result<Self, FeaturesError> {
        let first = xs.first().ok_or(FeaturesError::EmptyCorpus)?;
        let dim = first.len();
        let count = xs.len() as f64;
        let mut mu = vec![0.0f64; dim];
        for x in xs {
            if x.len() != dim {
                return Err(FeaturesError::LengthMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            for (m, v) in mu.iter_mut().zip(&x.values) {
                *m += v;
            }
        }
        for m in mu.iter_mut() {
            *m /= count;
        }
        let mut var = vec![0.0f64; dim];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(&x.values).zip(&mu) {
                let d = v - m;
                *s += d * d;
            }
        }
        let sigma = var.into_iter().map(|s| (s / count).sqrt()).collect();
        Ok(Self::Affine { mu, sigma })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Affine { mu, .. } => Some(mu.len()),
        }
    }

    #[inline]
    pub fn apply_at(&self, index: usize, value: f64) -> f64 {
        match self {
            Self::Identity => value,
            Self::Affine { mu, sigma } => {
                (value - mu[index]) / (sigma[index] + STANDARDIZER_EPSILON)
            }
        }
    }
}

/// 2-channel square grid of side ceil(sqrt(2V)); positions beyond each
/// vector's length are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major, channel-major: data[(c * H + i) * W + j].
    pub data: Vec<f32>,
}

impl InputTensor {
    pub fn at(&self, c: usize, i: usize, j: usize) -> f32 {
        self.data[(c * self.height + i) * self.width + j]
    }

    /// Flattened view of one channel.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Grid side for a given X length (2V).
pub fn grid_side(x_len: usize) -> usize {
    (x_len as f64).sqrt().ceil() as usize
}

/// Build the 2-channel input tensor. `x` must be a ConcatX of length 2V and
/// `y` a one-hot of length V.
pub fn assemble_input(
    x: &FeatureVector,
    y: &FeatureVector,
    standardizer: &Standardizer,
) -> Result<InputTensor, FeaturesError> {
    if x.kind != FeatureKind::ConcatX || y.kind != FeatureKind::OneHot {
        return Err(FeaturesError::BadFormat(format!(
            "assemble_input expects (ConcatX, OneHot), found ({:?}, {:?})",
            x.kind, y.kind
        )));
    }
    if x.len() != 2 * y.len() {
        return Err(FeaturesError::LengthMismatch {
            expected: 2 * y.len(),
            found: x.len(),
        });
    }
    if let Some(dim) = standardizer.dim() {
        if dim != x.len() {
            return Err(FeaturesError::LengthMismatch {
                expected: x.len(),
                found: dim,
            });
        }
    }
    let side = grid_side(x.len());
    let plane = side * side;
    let mut data = vec![0.0f32; 2 * plane];
    for (i, &v) in x.values.iter().enumerate() {
        data[i] = standardizer.apply_at(i, v) as f32;
    }
    for (i, &v) in y.values.iter().enumerate() {
        data[plane + i] = v as f32;
    }
    Ok(InputTensor {
        channels: 2,
        height: side,
        width: side,
        data,
    })
}
