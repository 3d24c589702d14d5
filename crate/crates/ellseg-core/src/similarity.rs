//! Per-class similarity maps `o_i` feeding the data-fidelity term.
//!
//! The solver is agnostic to how a [`FeatureStack`] was produced: region
//! variance against class means, Mahalanobis distance with per-class
//! covariances, or features injected from an external model.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::ScalarField;

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityError {
    /// Fewer than two classes.
    ClassCount(usize),
    /// No image channels supplied.
    NoChannels,
    /// Channel planes or class fields disagree in shape.
    ShapeMismatch,
    /// A mean or covariance has the wrong number of channels.
    ChannelMismatch { expected: usize, got: usize },
    /// Covariance matrix is not symmetric positive definite; a small ridge
    /// (e.g. `Σ + δI`) restores solvability.
    SingularCovariance { class: usize },
}

impl fmt::Display for SimilarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityError::ClassCount(n) => write!(f, "need at least 2 classes, got {n}"),
            SimilarityError::NoChannels => write!(f, "image has no channels"),
            SimilarityError::ShapeMismatch => write!(f, "field shapes disagree"),
            SimilarityError::ChannelMismatch { expected, got } => {
                write!(f, "expected {expected} channels, got {got}")
            }
            SimilarityError::SingularCovariance { class } => {
                write!(f, "covariance of class {class} is not positive definite (add a ridge)")
            }
        }
    }
}

impl core::error::Error for SimilarityError {}

/// One similarity field per class, all sharing the same grid shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    fields: Vec<ScalarField>,
}

impl FeatureStack {
    pub fn new(fields: Vec<ScalarField>) -> Result<Self, SimilarityError> {
        if fields.len() < 2 {
            return Err(SimilarityError::ClassCount(fields.len()));
        }
        if fields.iter().skip(1).any(|f| !f.same_shape(&fields[0])) {
            return Err(SimilarityError::ShapeMismatch);
        }
        Ok(Self { fields })
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
}

fn check_channels(channels: &[ScalarField]) -> Result<(), SimilarityError> {
    if channels.is_empty() {
        return Err(SimilarityError::NoChannels);
    }
    if channels.iter().skip(1).any(|f| !f.same_shape(&channels[0])) {
        return Err(SimilarityError::ShapeMismatch);
    }
    Ok(())
}

/// Region-variance similarity `o_i(x) = −‖h(x) − m_i‖²`.
///
/// Zero where the pixel feature equals the class mean exactly, negative
/// elsewhere.
pub fn variance_similarity(
    channels: &[ScalarField],
    means: &[Vec<f64>],
) -> Result<FeatureStack, SimilarityError> {
    check_channels(channels)?;
    if means.len() < 2 {
        return Err(SimilarityError::ClassCount(means.len()));
    }
    let ch = channels.len();
    for m in means {
        if m.len() != ch {
            return Err(SimilarityError::ChannelMismatch { expected: ch, got: m.len() });
        }
    }
    let (h, w) = (channels[0].height(), channels[0].width());
    let fields = means
        .iter()
        .map(|m| {
            ScalarField::from_fn(h, w, |r, c| {
                let mut d2 = 0.0;
                for (plane, mk) in channels.iter().zip(m.iter()) {
                    let d = plane.get(r, c) - mk;
                    d2 += d * d;
                }
                -d2
            })
        })
        .collect();
    FeatureStack::new(fields)
}

/// Mahalanobis similarity `o_i(x) = −(h(x)−m_i)ᵀ Σ_i⁻¹ (h(x)−m_i)`.
///
/// Each covariance is a row-major `ch × ch` matrix and must be symmetric
/// positive definite. With identity covariances this reduces exactly to
/// [`variance_similarity`].
pub fn mahalanobis_similarity(
    channels: &[ScalarField],
    means: &[Vec<f64>],
    covariances: &[Vec<f64>],
) -> Result<FeatureStack, SimilarityError> {
    check_channels(channels)?;
    if means.len() < 2 {
        return Err(SimilarityError::ClassCount(means.len()));
    }
    if covariances.len() != means.len() {
        return Err(SimilarityError::ClassCount(covariances.len()));
    }
    let ch = channels.len();
    for m in means {
        if m.len() != ch {
            return Err(SimilarityError::ChannelMismatch { expected: ch, got: m.len() });
        }
    }
    let mut factors = Vec::with_capacity(covariances.len());
    for (i, cov) in covariances.iter().enumerate() {
        if cov.len() != ch * ch {
            return Err(SimilarityError::ChannelMismatch { expected: ch * ch, got: cov.len() });
        }
        factors.push(cholesky(ch, cov).ok_or(SimilarityError::SingularCovariance { class: i })?);
    }

    let (h, w) = (channels[0].height(), channels[0].width());
    let mut diff = vec![0.0; ch];
    let mut solved = vec![0.0; ch];
    let mut fields = Vec::with_capacity(means.len());
    for (m, lower) in means.iter().zip(factors.iter()) {
        let mut out = ScalarField::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                for (d, (plane, mk)) in diff.iter_mut().zip(channels.iter().zip(m.iter())) {
                    *d = plane.get(r, c) - mk;
                }
                out.set(r, c, -quad_form_solved(ch, lower, &diff, &mut solved));
            }
        }
        fields.push(out);
    }
    FeatureStack::new(fields)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// or `None` if the matrix is not SPD.
fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `dᵀ Σ⁻¹ d` given the Cholesky factor `L` of `Σ`: forward-substitute
/// `L y = d` into the scratch buffer and return `‖y‖²`.
fn quad_form_solved(n: usize, lower: &[f64], d: &[f64], y: &mut [f64]) -> f64 {
    for i in 0..n {
        let mut s = d[i];
        for k in 0..i {
            s -= lower[i * n + k] * y[k];
        }
        y[i] = s / lower[i * n + i];
    }
    y.iter().map(|v| v * v).sum()
}

/// Per-class channel means by Lloyd iterations on pixel feature vectors.
///
/// Deterministic for a given `seed`. A cluster that empties is re-seeded
/// from the pixel farthest from its assigned center before the next sweep.
pub fn kmeans_init(
    channels: &[ScalarField],
    classes: usize,
    iters: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SimilarityError> {
    check_channels(channels)?;
    if classes < 2 {
        return Err(SimilarityError::ClassCount(classes));
    }
    let ch = channels.len();
    let n = channels[0].len();
    if n == 0 {
        return Err(SimilarityError::ShapeMismatch);
    }
    let pixel = |i: usize, out: &mut [f64]| {
        for (o, plane) in out.iter_mut().zip(channels) {
            *o = plane.as_slice()[i];
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut px = vec![0.0; ch];
    for _ in 0..classes {
        pixel(rng.gen_range(0..n), &mut px);
        centers.push(px.clone());
    }

    let dist2 = |p: &[f64], c: &[f64]| -> f64 {
        p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    };

    let mut assignment = vec![0usize; n];
    for _ in 0..iters {
        // Assignment sweep; remember each cluster's farthest member.
        let mut farthest = vec![(0usize, -1.0f64); classes];
        for i in 0..n {
            pixel(i, &mut px);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, center) in centers.iter().enumerate() {
                let d = dist2(&px, center);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            assignment[i] = best;
            if best_d > farthest[best].1 {
                farthest[best] = (i, best_d);
            }
        }

        // Mean update.
        let mut sums = vec![vec![0.0; ch]; classes];
        let mut counts = vec![0usize; classes];
        for i in 0..n {
            pixel(i, &mut px);
            let k = assignment[i];
            counts[k] += 1;
            for (s, &v) in sums[k].iter_mut().zip(px.iter()) {
                *s += v;
            }
        }
        let global_farthest = farthest
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|&(i, _)| i)
            .unwrap_or(0);
        for k in 0..classes {
            if counts[k] == 0 {
                pixel(global_farthest, &mut px);
                centers[k].copy_from_slice(&px);
            } else {
                for (c, s) in centers[k].iter_mut().zip(sums[k].iter()) {
                    *c = s / counts[k] as f64;
                }
            }
        }
    }
    Ok(centers)
}
