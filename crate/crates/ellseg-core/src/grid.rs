//! Discrete field calculus on a rectangular pixel grid.
//!
//! Fields are row-major with unit pixel spacing. Pixel `(row r, col c)` sits
//! at coordinates `(x = c, y = r)`. The gradient uses forward differences
//! with a zero one-sided difference at the last row/column (homogeneous
//! Neumann boundary), and [`divergence`] is its exact negative adjoint:
//! `⟨div v, u⟩ = −⟨v, ∇u⟩` holds to rounding error for every field pair.
//! Convolution replicates the nearest edge pixel, so normalized kernels map
//! constant fields to themselves.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Errors from field and kernel construction.
#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    /// Value buffer length does not match `height * width`.
    LengthMismatch { expected: usize, got: usize },
    /// A field value is NaN or infinite.
    NonFinite,
    /// Kernel radius must be at least 1.
    BadRadius(usize),
    /// Kernel standard deviation must be positive and finite.
    BadSigma(f64),
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::LengthMismatch { expected, got } => {
                write!(f, "value buffer has {got} entries, expected {expected}")
            }
            GridError::NonFinite => write!(f, "field contains a non-finite value"),
            GridError::BadRadius(r) => write!(f, "kernel radius {r} is below 1"),
            GridError::BadSigma(s) => write!(f, "kernel sigma {s} is not positive"),
        }
    }
}

impl core::error::Error for GridError {}

/// A rectangular grid of real values: an image channel, a similarity map,
/// a dual variable, or one class of a segmentation function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps a row-major value buffer, checking length and finiteness.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != height * width {
            return Err(GridError::LengthMismatch {
                expected: height * width,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NonFinite);
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    /// A field holding `value` everywhere.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Builds a field by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { height, width, values }
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
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.height == other.height && self.width == other.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.values.iter()
    }

    /// Applies `f` pointwise, returning a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Discrete inner product `Σ_x self(x)·other(x)`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A grid of 2-vectors, stored as separate x/y component planes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    height: usize,
    width: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField2 {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            x: vec![0.0; height * width],
            y: vec![0.0; height * width],
        }
    }

    /// Assembles a vector field from two component planes of equal shape.
    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self, GridError> {
        if !x.same_shape(&y) {
            return Err(GridError::LengthMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(Self {
            height: x.height,
            width: x.width,
            x: x.values,
            y: y.values,
        })
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
    pub fn x(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.width + col]
    }

    #[inline]
    pub fn y(&self, row: usize, col: usize) -> f64 {
        self.y[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, vx: f64, vy: f64) {
        let i = row * self.width + col;
        self.x[i] = vx;
        self.y[i] = vy;
    }

    #[inline]
    pub fn x_plane(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn y_plane(&self) -> &[f64] {
        &self.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// A normalized, reflection-symmetric Gaussian stencil with square support
/// `(2·radius + 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    radius: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    /// Samples `exp(−‖x‖²/(2σ²))` at integer offsets and normalizes the
    /// weights to sum to 1.
    pub fn new(radius: usize, sigma: f64) -> Result<Self, GridError> {
        if radius < 1 {
            return Err(GridError::BadRadius(radius));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(GridError::BadSigma(sigma));
        }
        let side = 2 * radius + 1;
        let mut weights = Vec::with_capacity(side * side);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for dy in -(radius as i64)..=(radius as i64) {
            for dx in -(radius as i64)..=(radius as i64) {
                let d2 = (dx * dx + dy * dy) as f64;
                weights.push(libm::exp(-d2 * inv));
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { radius, sigma, weights })
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Side length of the square support.
    #[inline]
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Weight at offset `(dy, dx)`, each in `[-radius, radius]`.
    #[inline]
    pub fn weight(&self, dy: i64, dx: i64) -> f64 {
        let r = self.radius as i64;
        debug_assert!(dy.abs() <= r && dx.abs() <= r);
        self.weights[((dy + r) * (2 * r + 1) + (dx + r)) as usize]
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Forward-difference gradient with homogeneous Neumann boundary: the last
/// column has `vx = 0` and the last row has `vy = 0`.
pub fn gradient(f: &ScalarField) -> VectorField2 {
    let (h, w) = (f.height(), f.width());
    let mut out = VectorField2::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let vx = if c + 1 < w { f.get(r, c + 1) - f.get(r, c) } else { 0.0 };
            let vy = if r + 1 < h { f.get(r + 1, c) - f.get(r, c) } else { 0.0 };
            out.set(r, c, vx, vy);
        }
    }
    out
}

/// Negative adjoint of [`gradient`] under the discrete inner product:
/// backward differences of each component with boundary truncation, so that
/// `⟨div v, u⟩ = −⟨v, ∇u⟩` exactly.
pub fn divergence(v: &VectorField2) -> ScalarField {
    let (h, w) = (v.height(), v.width());
    let mut out = ScalarField::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut d = 0.0;
            if c + 1 < w {
                d += v.x(r, c);
            }
            if c > 0 {
                d -= v.x(r, c - 1);
            }
            if r + 1 < h {
                d += v.y(r, c);
            }
            if r > 0 {
                d -= v.y(r - 1, c);
            }
            out.set(r, c, d);
        }
    }
    out
}

/// Centered-difference gradient, zero on the outermost ring. Less anisotropic
/// than the forward scheme; used by alignment diagnostics that do not take
/// part in the gradient/divergence adjoint pair.
pub(crate) fn centered_gradient(f: &ScalarField) -> VectorField2 {
    let (h, w) = (f.height(), f.width());
    let mut out = VectorField2::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let vx = if c > 0 && c + 1 < w {
                0.5 * (f.get(r, c + 1) - f.get(r, c - 1))
            } else {
                0.0
            };
            let vy = if r > 0 && r + 1 < h {
                0.5 * (f.get(r + 1, c) - f.get(r - 1, c))
            } else {
                0.0
            };
            out.set(r, c, vx, vy);
        }
    }
    out
}

/// Same-size convolution with replicate (nearest-pixel) padding.
pub fn convolve(f: &ScalarField, kernel: &GaussianKernel) -> ScalarField {
    let (h, w) = (f.height(), f.width());
    let r = kernel.radius() as i64;
    let mut out = ScalarField::zeros(h, w);
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                let sr = clamp_index(row as i64 + dy, h);
                for dx in -r..=r {
                    let sc = clamp_index(col as i64 + dx, w);
                    acc += kernel.weight(dy, dx) * f.get(sr, sc);
                }
            }
            out.set(row, col, acc);
        }
    }
    out
}

#[inline]
fn clamp_index(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_field(height: usize, width: usize, seed: &mut u64) -> ScalarField {
        ScalarField::from_fn(height, width, |_, _| {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn new_rejects_bad_length_and_non_finite() {
        assert!(matches!(
            ScalarField::new(2, 2, vec![0.0; 3]),
            Err(GridError::LengthMismatch { expected: 4, got: 3 })
        ));
        assert_eq!(
            ScalarField::new(1, 2, vec![0.0, f64::NAN]),
            Err(GridError::NonFinite)
        );
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = ScalarField::filled(5, 7, 3.25);
        let g = gradient(&f);
        for r in 0..5 {
            for c in 0..7 {
                assert_eq!(g.x(r, c), 0.0);
                assert_eq!(g.y(r, c), 0.0);
            }
        }
    }

    #[test]
    fn gradient_of_x_ramp_hits_neumann_edge() {
        // f(x,y) = x: vx = 1 except the last column, vy = 0 everywhere.
        let f = ScalarField::from_fn(4, 4, |_, c| c as f64);
        let g = gradient(&f);
        for r in 0..4 {
            for c in 0..4 {
                let want = if c < 3 { 1.0 } else { 0.0 };
                assert_eq!(g.x(r, c), want, "vx at ({r},{c})");
                assert_eq!(g.y(r, c), 0.0);
            }
        }
    }

    #[test]
    fn gradient_matches_index_oracle() {
        let mut seed = 42;
        let f = lcg_field(8, 8, &mut seed);
        let g = gradient(&f);
        for r in 0..8 {
            for c in 0..8 {
                let vx = if c < 7 { f.get(r, c + 1) - f.get(r, c) } else { 0.0 };
                let vy = if r < 7 { f.get(r + 1, c) - f.get(r, c) } else { 0.0 };
                assert_eq!(g.x(r, c), vx);
                assert_eq!(g.y(r, c), vy);
            }
        }
    }

    #[test]
    fn divergence_of_zero_field_is_zero() {
        let d = divergence(&VectorField2::zeros(6, 3));
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_impulse_gradient_is_laplacian_stencil() {
        let mut f = ScalarField::zeros(7, 7);
        f.set(3, 3, 1.0);
        let lap = divergence(&gradient(&f));
        assert_eq!(lap.get(3, 3), -4.0);
        assert_eq!(lap.get(3, 2), 1.0);
        assert_eq!(lap.get(3, 4), 1.0);
        assert_eq!(lap.get(2, 3), 1.0);
        assert_eq!(lap.get(4, 3), 1.0);
        assert_eq!(lap.sum(), 0.0);
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        let mut seed = 7;
        for (h, w) in [(8, 8), (1, 9), (5, 1), (1, 1), (3, 13)] {
            let u = lcg_field(h, w, &mut seed);
            let vx = lcg_field(h, w, &mut seed);
            let vy = lcg_field(h, w, &mut seed);
            let v = VectorField2::from_components(vx, vy).unwrap();
            let g = gradient(&u);
            let mut v_dot_grad = 0.0;
            for r in 0..h {
                for c in 0..w {
                    v_dot_grad += v.x(r, c) * g.x(r, c) + v.y(r, c) * g.y(r, c);
                }
            }
            let div_dot_u = divergence(&v).dot(&u);
            let scale = v_dot_grad.abs().max(div_dot_u.abs()).max(1.0);
            assert!(
                (div_dot_u + v_dot_grad).abs() <= 1e-12 * scale,
                "adjoint identity broken on {h}x{w}: {div_dot_u} vs {v_dot_grad}"
            );
        }
    }

    #[test]
    fn kernel_rejects_bad_parameters() {
        assert_eq!(GaussianKernel::new(0, 1.0), Err(GridError::BadRadius(0)));
        assert_eq!(GaussianKernel::new(2, 0.0), Err(GridError::BadSigma(0.0)));
        assert_eq!(GaussianKernel::new(2, -1.0), Err(GridError::BadSigma(-1.0)));
        assert!(GaussianKernel::new(2, f64::NAN).is_err());
    }

    #[test]
    fn kernel_is_normalized_symmetric_with_max_at_center() {
        let k = GaussianKernel::new(2, 5.0).unwrap();
        assert_eq!(k.side(), 5);
        let total: f64 = k.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let center = k.weight(0, 0);
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                assert_eq!(k.weight(dy, dx), k.weight(-dy, -dx));
                assert_eq!(k.weight(dy, dx), k.weight(dx, dy));
                assert!(k.weight(dy, dx) <= center);
                assert!(k.weight(dy, dx) > 0.0);
            }
        }
    }

    #[test]
    fn kernel_with_huge_sigma_approaches_uniform() {
        let k = GaussianKernel::new(1, 1e6).unwrap();
        for &w in k.weights() {
            assert!((w - 1.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_matches_closed_form() {
        // exp(-(dx²+dy²)/2) normalized, radius 3 sigma 1.
        let k = GaussianKernel::new(3, 1.0).unwrap();
        let mut expect = Vec::new();
        for dy in -3..=3i64 {
            for dx in -3..=3i64 {
                expect.push((-((dx * dx + dy * dy) as f64) / 2.0).exp());
            }
        }
        let total: f64 = expect.iter().sum();
        for (got, want) in k.weights().iter().zip(expect) {
            let want = want / total;
            assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }
    }

    #[test]
    fn convolve_preserves_constants() {
        let k = GaussianKernel::new(2, 5.0).unwrap();
        let f = ScalarField::filled(9, 6, 0.75);
        let out = convolve(&f, &k);
        for &v in out.iter() {
            assert!((v - 0.75).abs() < 1e-14);
        }
    }

    #[test]
    fn convolve_of_centered_impulse_reproduces_kernel() {
        let k = GaussianKernel::new(2, 1.3).unwrap();
        let mut f = ScalarField::zeros(11, 11);
        f.set(5, 5, 1.0);
        let out = convolve(&f, &k);
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                let v = out.get((5 + dy) as usize, (5 + dx) as usize);
                // Kernel is reflection-symmetric, so the flip is invisible.
                assert!((v - k.weight(dy, dx)).abs() < 1e-15);
            }
        }
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn convolve_matches_naive_oracle() {
        let mut seed = 99;
        let f = lcg_field(16, 16, &mut seed);
        let k = GaussianKernel::new(2, 1.7).unwrap();
        let out = convolve(&f, &k);
        for r in 0..16i64 {
            for c in 0..16i64 {
                let mut acc = 0.0;
                for dy in -2..=2i64 {
                    for dx in -2..=2i64 {
                        let sr = (r + dy).clamp(0, 15) as usize;
                        let sc = (c + dx).clamp(0, 15) as usize;
                        acc += k.weight(dy, dx) * f.get(sr, sc);
                    }
                }
                let got = out.get(r as usize, c as usize);
                assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn centered_gradient_is_zero_on_border_and_matches_stencil() {
        let mut seed = 5;
        let f = lcg_field(6, 6, &mut seed);
        let g = centered_gradient(&f);
        for r in 0..6 {
            assert_eq!(g.x(r, 0), 0.0);
            assert_eq!(g.x(r, 5), 0.0);
        }
        for c in 0..6 {
            assert_eq!(g.y(0, c), 0.0);
            assert_eq!(g.y(5, c), 0.0);
        }
        assert_eq!(g.x(2, 3), 0.5 * (f.get(2, 4) - f.get(2, 2)));
        assert_eq!(g.y(2, 3), 0.5 * (f.get(3, 3) - f.get(1, 3)));
    }
}
