//! Variational image segmentation with an elliptical shape prior.
//!
//! The pipeline segments an image into `I` classes while forcing one chosen
//! class to take an elliptical shape:
//!
//! 1. **grid** – scalar/vector fields on a pixel grid, forward-difference
//!    gradient with its exact adjoint divergence, normalized Gaussian
//!    convolution.
//! 2. **similarity** – per-class feature maps `o_i` (region variance,
//!    Mahalanobis distance, or K-means estimated means).
//! 3. **regularizer** – the soft-threshold-dynamics boundary penalty, its
//!    subgradient, and the entropy term of the smoothed model.
//! 4. **ellipse** – tangent contour fields of a parametric ellipse family
//!    and moment-based parameter recovery from a membership function.
//! 5. **solver** – the alternating primal-dual loop: dual ascent on the
//!    contour-alignment multiplier, a closed-form softmax update of the
//!    segmentation, and a moment refresh of the ellipse.
//! 6. **metrics** – Dice overlap and boundary-distance statistics.
//!
//! The crate is `no_std` (with `alloc`); all file and image I/O lives in the
//! companion CLI crate. Every operation is a pure function of its inputs, so
//! independent solver runs may execute concurrently.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod ellipse;
pub mod grid;
pub mod metrics;
pub mod regularizer;
pub mod similarity;
pub mod solver;

pub use ellipse::EllipseParams;
pub use grid::{GaussianKernel, ScalarField, VectorField2};
pub use metrics::BinaryMask;
pub use regularizer::SegmentationState;
pub use similarity::FeatureStack;
pub use solver::{IterationRecord, IterationTrace, KernelSpec, RunResult, SolverConfig, SolverState};
