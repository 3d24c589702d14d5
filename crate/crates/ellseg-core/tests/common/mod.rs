//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)]

use ellseg_core::grid::ScalarField;
use ellseg_core::metrics::BinaryMask;
use ellseg_core::similarity::{variance_similarity, FeatureStack};
use ellseg_core::EllipseParams;

/// Small deterministic generator (splitmix64) so expected values freeze.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn usize_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Cell-center indicator of an ellipse.
pub fn rasterize(params: &EllipseParams, height: usize, width: usize) -> ScalarField {
    ScalarField::from_fn(height, width, |r, c| {
        if params.contains(c as f64, r as f64) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn rasterize_mask(params: &EllipseParams, height: usize, width: usize) -> BinaryMask {
    BinaryMask::from_fn(height, width, |r, c| params.contains(c as f64, r as f64))
}

/// Non-elliptical two-disc blob used by the synthetic reproduction runs.
pub fn two_disc_blob(height: usize, width: usize) -> BinaryMask {
    BinaryMask::from_fn(height, width, |r, c| {
        let (x, y) = (c as f64, r as f64);
        let d1 = (x - 54.0) * (x - 54.0) + (y - 64.0) * (y - 64.0);
        let d2 = (x - 78.0) * (x - 78.0) + (y - 70.0) * (y - 70.0);
        d1 <= 22.0 * 22.0 || d2 <= 16.0 * 16.0
    })
}

/// Variance-similarity features for a foreground/background intensity image.
pub fn blob_features(mask: &BinaryMask, fg: f64, bg: f64) -> FeatureStack {
    let image = ScalarField::from_fn(mask.height(), mask.width(), |r, c| {
        if mask.get(r, c) {
            fg
        } else {
            bg
        }
    });
    variance_similarity(&[image], &[vec![fg], vec![bg]]).unwrap()
}

/// Random state on the probability simplex, built from uniform draws.
pub fn random_simplex(
    rng: &mut Rng,
    classes: usize,
    height: usize,
    width: usize,
) -> Vec<ScalarField> {
    let mut fields: Vec<Vec<f64>> = vec![Vec::with_capacity(height * width); classes];
    for _ in 0..height * width {
        let mut draws: Vec<f64> = (0..classes).map(|_| rng.range(1e-6, 1.0)).collect();
        let total: f64 = draws.iter().sum();
        for d in &mut draws {
            *d /= total;
        }
        // Rounding guard: force an exact per-pixel sum of 1.
        let correction: f64 = 1.0 - draws.iter().sum::<f64>();
        draws[0] += correction;
        for (f, d) in fields.iter_mut().zip(draws) {
            f.push(d);
        }
    }
    fields
        .into_iter()
        .map(|v| ScalarField::new(height, width, v).unwrap())
        .collect()
}
