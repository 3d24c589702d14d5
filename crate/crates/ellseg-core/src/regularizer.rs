//! Soft-threshold-dynamics regularization of a segmentation function.
//!
//! The penalty `R(u) = λ Σ_i ⟨u_i, k∗(1−u_i)⟩` charges class disagreement
//! within a kernel neighborhood and vanishes on homogeneous regions. It is
//! concave for a symmetric positive semi-definite kernel, so each solver
//! sweep replaces it by its supporting hyperplane through the subgradient
//! `p = λ k∗(1−2u)`, leaving a convex problem with a closed-form solution.

use alloc::vec::Vec;
use core::fmt;

use crate::grid::{convolve, GaussianKernel, ScalarField};
use crate::similarity::FeatureStack;

/// Per-pixel tolerance on `Σ_i u_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied inside logarithms so that `0·ln 0 = 0`.
pub(crate) const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum StateError {
    /// Fewer than two classes.
    ClassCount(usize),
    /// Class fields disagree in shape.
    ShapeMismatch,
    /// A membership value lies outside `[0, 1]`.
    OutOfRange { row: usize, col: usize, value: f64 },
    /// Per-pixel class sum differs from 1 by more than [`SIMPLEX_TOL`].
    SimplexViolation { row: usize, col: usize, sum: f64 },
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateError::ClassCount(n) => write!(f, "need at least 2 classes, got {n}"),
            StateError::ShapeMismatch => write!(f, "class fields disagree in shape"),
            StateError::OutOfRange { row, col, value } => {
                write!(f, "membership {value} at ({row},{col}) is outside [0,1]")
            }
            StateError::SimplexViolation { row, col, sum } => {
                write!(f, "class sum {sum} at ({row},{col}) is not 1")
            }
        }
    }
}

impl core::error::Error for StateError {}

/// Per-pixel class probabilities over `I ≥ 2` classes: every component lies
/// in `[0, 1]` and each pixel's components sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationState {
    fields: Vec<ScalarField>,
}

impl SegmentationState {
    /// Validates the simplex constraint on every pixel.
    pub fn from_fields(fields: Vec<ScalarField>) -> Result<Self, StateError> {
        if fields.len() < 2 {
            return Err(StateError::ClassCount(fields.len()));
        }
        if fields.iter().skip(1).any(|f| !f.same_shape(&fields[0])) {
            return Err(StateError::ShapeMismatch);
        }
        let (h, w) = (fields[0].height(), fields[0].width());
        for r in 0..h {
            for c in 0..w {
                let mut sum = 0.0;
                for f in &fields {
                    let v = f.get(r, c);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(StateError::OutOfRange { row: r, col: c, value: v });
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    return Err(StateError::SimplexViolation { row: r, col: c, sum });
                }
            }
        }
        Ok(Self { fields })
    }

    /// The uniform state `u_i ≡ 1/I`.
    pub fn uniform(classes: usize, height: usize, width: usize) -> Self {
        assert!(classes >= 2, "need at least 2 classes");
        let fields = (0..classes)
            .map(|_| ScalarField::filled(height, width, 1.0 / classes as f64))
            .collect();
        Self { fields }
    }

    /// Skips validation; the caller guarantees the simplex invariant
    /// (softmax output satisfies it by construction).
    pub(crate) fn from_fields_unchecked(fields: Vec<ScalarField>) -> Self {
        debug_assert!(fields.len() >= 2);
        debug_assert!(fields.iter().all(|f| f.same_shape(&fields[0])));
        Self { fields }
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.fields.len()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.fields[0].height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.fields[0].width()
    }

    #[inline]
    pub fn class(&self, i: usize) -> &ScalarField {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    /// Root-mean-square difference over all class fields; the convergence
    /// norm of the solver.
    pub fn rms_change(&self, other: &SegmentationState) -> f64 {
        debug_assert_eq!(self.classes(), other.classes());
        let mut sum = 0.0;
        let mut count = 0usize;
        for (a, b) in self.fields.iter().zip(other.fields.iter()) {
            debug_assert!(a.same_shape(b));
            for (x, y) in a.iter().zip(b.iter()) {
                let d = x - y;
                sum += d * d;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            libm::sqrt(sum / count as f64)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(ScalarField::is_finite)
    }
}

/// Threshold-dynamics energy `λ Σ_i Σ_x u_i(x)·(k∗(1−u_i))(x)`.
pub fn std_energy(u: &SegmentationState, lambda: f64, kernel: &GaussianKernel) -> f64 {
    let mut total = 0.0;
    for ui in u.fields() {
        let smoothed_complement = convolve(&ui.map(|v| 1.0 - v), kernel);
        total += ui.dot(&smoothed_complement);
    }
    lambda * total
}

/// Subgradient `p_i = λ k∗(1 − 2u_i)` of the threshold-dynamics energy.
///
/// Components lie in `[−λ, λ]` since the kernel is normalized.
pub fn std_subgradient(u: &SegmentationState, lambda: f64, kernel: &GaussianKernel) -> FeatureStack {
    let fields = u
        .fields()
        .iter()
        .map(|ui| convolve(&ui.map(|v| 1.0 - 2.0 * v), kernel).map(|v| lambda * v))
        .collect();
    FeatureStack::new(fields).expect("state has >= 2 equal-shaped classes")
}

/// Entropy term `Σ_i Σ_x u_i ln u_i` with the convention `0·ln 0 = 0`.
///
/// Always ≤ 0; zero exactly for binary states.
pub fn entropy(u: &SegmentationState) -> f64 {
    let mut total = 0.0;
    for ui in u.fields() {
        for &v in ui.iter() {
            total += v * libm::log(v.max(LOG_FLOOR).min(1.0));
        }
    }
    total
}
