//! Segmentation quality metrics: Dice overlap and directed boundary
//! distance statistics between a predicted and a reference mask.

use alloc::vec::Vec;
use core::fmt;

use crate::grid::ScalarField;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Masks disagree in shape.
    DimensionMismatch,
    /// A mask has no boundary pixels, leaving the distance undefined.
    EmptyBoundary,
    /// Bit buffer length does not match `height * width`.
    LengthMismatch { expected: usize, got: usize },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::DimensionMismatch => write!(f, "mask dimensions disagree"),
            MetricsError::EmptyBoundary => write!(f, "mask boundary is empty"),
            MetricsError::LengthMismatch { expected, got } => {
                write!(f, "bit buffer has {got} entries, expected {expected}")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// A binary segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, MetricsError> {
        if bits.len() != height * width {
            return Err(MetricsError::LengthMismatch {
                expected: height * width,
                got: bits.len(),
            });
        }
        Ok(Self { height, width, bits })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self { height, width, bits }
    }

    /// Thresholds a field: foreground where `value > threshold`.
    pub fn from_threshold(field: &ScalarField, threshold: f64) -> Self {
        Self::from_fn(field.height(), field.width(), |r, c| field.get(r, c) > threshold)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Dice overlap `2|P∩G| / (|P|+|G|)`; two empty masks count as a perfect
/// match.
pub fn dice(p: &BinaryMask, g: &BinaryMask) -> Result<f64, MetricsError> {
    if !p.same_shape(g) {
        return Err(MetricsError::DimensionMismatch);
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&a, &b) in p.bits().iter().zip(g.bits()) {
        inter += (a && b) as usize;
        total += a as usize + b as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Foreground pixels with at least one 4-neighbor that is background or
/// off-image, in row-major order.
pub fn boundary_pixels(m: &BinaryMask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..m.height() {
        for c in 0..m.width() {
            if !m.get(r, c) {
                continue;
            }
            let exposed = r == 0
                || c == 0
                || r + 1 == m.height()
                || c + 1 == m.width()
                || !m.get(r - 1, c)
                || !m.get(r + 1, c)
                || !m.get(r, c - 1)
                || !m.get(r, c + 1);
            if exposed {
                out.push((r, c));
            }
        }
    }
    out
}

/// Mean and population standard deviation of boundary distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryStats {
    /// Mean nearest-neighbor distance from predicted to reference edges.
    pub bd: f64,
    /// Population standard deviation of those distances.
    pub bdsd: f64,
}

/// Directed boundary distance: for every edge pixel of `p`, the Euclidean
/// distance to the nearest edge pixel of `g`; returns the mean and the
/// population standard deviation. Not symmetric in its arguments.
pub fn boundary_distance(p: &BinaryMask, g: &BinaryMask) -> Result<BoundaryStats, MetricsError> {
    if !p.same_shape(g) {
        return Err(MetricsError::DimensionMismatch);
    }
    let edge_p = boundary_pixels(p);
    let edge_g = boundary_pixels(g);
    if edge_p.is_empty() || edge_g.is_empty() {
        return Err(MetricsError::EmptyBoundary);
    }
    let mut distances = Vec::with_capacity(edge_p.len());
    for &(pr, pc) in &edge_p {
        let mut best = f64::INFINITY;
        for &(gr, gc) in &edge_g {
            let dr = pr as f64 - gr as f64;
            let dc = pc as f64 - gc as f64;
            let d2 = dr * dr + dc * dc;
            if d2 < best {
                best = d2;
            }
        }
        distances.push(libm::sqrt(best));
    }
    let n = distances.len() as f64;
    let bd = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - bd) * (d - bd)).sum::<f64>() / n;
    Ok(BoundaryStats { bd, bdsd: libm::sqrt(var) })
}
