//! Ellipse geometry: the parametric family, its tangent contour field, and
//! moment-based parameter recovery from a membership function.
//!
//! An ellipse is `(x0, y0, a, b, θ)` — center, semi-major and semi-minor
//! axes in pixels, and rotation. A function whose gradient is everywhere
//! orthogonal to the tangent field of the family has concentric elliptical
//! level sets, which is the constraint the solver enforces through its dual
//! variable.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{centered_gradient, ScalarField, VectorField2};

/// Normalization floor for gradient/tangent magnitudes in alignment scores.
pub(crate) const GRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum EllipseError {
    /// Axes must be positive and finite.
    InvalidAxes { a: f64, b: f64 },
    /// Center or angle is NaN or infinite.
    NonFiniteParam,
    /// The membership function has no mass to fit.
    ZeroMass,
    /// The membership function contains negative values.
    NegativeValue,
    /// Second moments do not span two dimensions (e.g. a single pixel).
    DegenerateMoments,
}

impl fmt::Display for EllipseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EllipseError::InvalidAxes { a, b } => write!(f, "invalid ellipse axes a={a}, b={b}"),
            EllipseError::NonFiniteParam => write!(f, "non-finite ellipse parameter"),
            EllipseError::ZeroMass => write!(f, "membership function has zero total mass"),
            EllipseError::NegativeValue => write!(f, "membership function has negative values"),
            EllipseError::DegenerateMoments => write!(f, "second moments are degenerate"),
        }
    }
}

impl core::error::Error for EllipseError {}

/// Parameters `(x0, y0, a, b, θ)` of an ellipse in pixel coordinates.
///
/// Held normalized: `a ≥ b > 0` and `θ ∈ [0, π)`. Serializes as the flat
/// object `{x0, y0, a, b, theta}`; deserialization re-applies the same
/// normalization and validation as [`EllipseParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipseParams")]
pub struct EllipseParams {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

#[derive(Deserialize)]
struct RawEllipseParams {
    x0: f64,
    y0: f64,
    a: f64,
    b: f64,
    theta: f64,
}

impl TryFrom<RawEllipseParams> for EllipseParams {
    type Error = EllipseError;

    fn try_from(raw: RawEllipseParams) -> Result<Self, EllipseError> {
        EllipseParams::new(raw.x0, raw.y0, raw.a, raw.b, raw.theta)
    }
}

impl EllipseParams {
    /// Validates and normalizes: swaps the axes (rotating by π/2) if `a < b`,
    /// wraps `θ` into `[0, π)`, and fixes `θ = 0` for exact circles, where
    /// the angle carries no information.
    pub fn new(x0: f64, y0: f64, a: f64, b: f64, theta: f64) -> Result<Self, EllipseError> {
        if !(x0.is_finite() && y0.is_finite() && theta.is_finite()) {
            return Err(EllipseError::NonFiniteParam);
        }
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(EllipseError::InvalidAxes { a, b });
        }
        let (a, b, theta) = if a >= b {
            (a, b, theta)
        } else {
            (b, a, theta + core::f64::consts::FRAC_PI_2)
        };
        let theta = if a == b { 0.0 } else { wrap_half_turn(theta) };
        Ok(Self { x0, y0, a, b, theta })
    }

    /// Boundary point at parameter `t`: the rotated-and-shifted
    /// `(a cos t, b sin t)`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (st, ct) = (libm::sin(t), libm::cos(t));
        let (s, c) = (libm::sin(self.theta), libm::cos(self.theta));
        (
            self.a * c * ct - self.b * s * st + self.x0,
            self.a * s * ct + self.b * c * st + self.y0,
        )
    }

    /// Derivative of [`point_at`](Self::point_at) with respect to `t`:
    /// the tangent direction along the boundary.
    pub fn boundary_tangent_at(&self, t: f64) -> (f64, f64) {
        let (st, ct) = (libm::sin(t), libm::cos(t));
        let (s, c) = (libm::sin(self.theta), libm::cos(self.theta));
        (
            -self.a * c * st - self.b * s * ct,
            -self.a * s * st + self.b * c * ct,
        )
    }

    /// Value of the implicit quadratic form; `< 1` inside, `1` on the
    /// boundary, `> 1` outside.
    pub fn quadratic_form(&self, x: f64, y: f64) -> f64 {
        let (s, c) = (libm::sin(self.theta), libm::cos(self.theta));
        let dx = x - self.x0;
        let dy = y - self.y0;
        let p = dx * c + dy * s;
        let q = -dx * s + dy * c;
        (p * p) / (self.a * self.a) + (q * q) / (self.b * self.b)
    }

    /// Whether `(x, y)` lies inside or on the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.quadratic_form(x, y) <= 1.0
    }

    /// Tangent field of the concentric family over an `height × width` grid,
    /// evaluated at pixel centers `(x = col, y = row)`:
    ///
    /// ```text
    /// Tx = (x−x0)(b²−a²)cosθ sinθ + (y−y0)(b² sin²θ + a² cos²θ)
    /// Ty = (y−y0)(a²−b²)cosθ sinθ − (x−x0)(a² sin²θ + b² cos²θ)
    /// ```
    ///
    /// At every point this is parallel to the boundary tangent of the scaled
    /// ellipse through that point; magnitudes grow with the distance from
    /// the center.
    pub fn tangent_field(&self, height: usize, width: usize) -> VectorField2 {
        let (s, c) = (libm::sin(self.theta), libm::cos(self.theta));
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let cross = (b2 - a2) * c * s;
        let tx_dy = b2 * s * s + a2 * c * c;
        let ty_dx = a2 * s * s + b2 * c * c;
        let mut out = VectorField2::zeros(height, width);
        for r in 0..height {
            let dy = r as f64 - self.y0;
            for col in 0..width {
                let dx = col as f64 - self.x0;
                out.set(r, col, dx * cross + dy * tx_dy, -dy * cross - dx * ty_dx);
            }
        }
        out
    }
}

#[inline]
fn wrap_half_turn(theta: f64) -> f64 {
    let pi = core::f64::consts::PI;
    let mut t = theta % pi;
    if t < 0.0 {
        t += pi;
    }
    // The remainder above can land exactly on π through rounding.
    if t >= pi {
        t = 0.0;
    }
    t
}

/// Recovers ellipse parameters from the zeroth, first, and second moments of
/// a nonnegative membership function.
///
/// The center is the mass centroid. The matrix `4/Σu · [[Mxx, Mxy], [Mxy,
/// Myy]]` of scaled central second moments equals `R(θ)·diag(a², b²)·R(θ)ᵀ`
/// for an ellipse indicator, so its eigendecomposition yields the axes and
/// orientation.
pub fn fit_ellipse_moments(u: &ScalarField) -> Result<EllipseParams, EllipseError> {
    if u.iter().any(|&v| v < 0.0) {
        return Err(EllipseError::NegativeValue);
    }
    let mass = u.sum();
    if mass <= 0.0 {
        return Err(EllipseError::ZeroMass);
    }
    let (h, w) = (u.height(), u.width());
    let mut sx = 0.0;
    let mut sy = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = u.get(r, c);
            sx += c as f64 * v;
            sy += r as f64 * v;
        }
    }
    let x0 = sx / mass;
    let y0 = sy / mass;

    let mut mxx = 0.0;
    let mut myy = 0.0;
    let mut mxy = 0.0;
    for r in 0..h {
        let dy = r as f64 - y0;
        for c in 0..w {
            let dx = c as f64 - x0;
            let v = u.get(r, c);
            mxx += dx * dx * v;
            myy += dy * dy * v;
            mxy += dx * dy * v;
        }
    }
    let scale = 4.0 / mass;
    let sxx = mxx * scale;
    let syy = myy * scale;
    let sxy = mxy * scale;

    // Eigendecomposition of the symmetric 2×2 moment matrix.
    let trace = sxx + syy;
    let gap = libm::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
    let lam_max = 0.5 * (trace + gap);
    let lam_min = 0.5 * (trace - gap);
    if lam_min <= 0.0 {
        return Err(EllipseError::DegenerateMoments);
    }
    let a = libm::sqrt(lam_max);
    let b = libm::sqrt(lam_min);
    let theta = if gap <= 1e-12 * trace {
        0.0
    } else {
        0.5 * libm::atan2(2.0 * sxy, sxx - syy)
    };
    EllipseParams::new(x0, y0, a, b, theta)
}

/// Normalized misalignment between the level sets of `u` and the concentric
/// family of `params`:
///
/// ```text
/// Σ_x |⟨∇u(x), T(x)⟩|  /  Σ_x (‖∇u(x)‖·‖T(x)‖ + ε)
/// ```
///
/// Lies in `[0, 1]`; zero exactly when the gradient is orthogonal to the
/// tangent field wherever it does not vanish. Uses a centered difference for
/// `∇u` — this is a diagnostic, not part of the adjoint pair.
pub fn orthogonality_residual(u: &ScalarField, params: &EllipseParams) -> f64 {
    let grad = centered_gradient(u);
    let tangent = params.tangent_field(u.height(), u.width());
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..u.height() {
        for c in 0..u.width() {
            let (gx, gy) = (grad.x(r, c), grad.y(r, c));
            let (tx, ty) = (tangent.x(r, c), tangent.y(r, c));
            num += (gx * tx + gy * ty).abs();
            den += libm::hypot(gx, gy) * libm::hypot(tx, ty) + GRAD_EPS;
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{convolve, GaussianKernel};

    const PI: f64 = core::f64::consts::PI;

    /// Cell-center indicator of the ellipse on an h×w grid.
    fn rasterize(params: &EllipseParams, height: usize, width: usize) -> ScalarField {
        ScalarField::from_fn(height, width, |r, c| {
            if params.contains(c as f64, r as f64) {
                1.0
            } else {
                0.0
            }
        })
    }

    fn angle_distance(t1: f64, t2: f64) -> f64 {
        let d = (t1 - t2).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn new_normalizes_axis_order_and_angle() {
        let e = EllipseParams::new(0.0, 0.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!((e.a, e.b), (2.0, 1.0));
        assert!((e.theta - PI / 2.0).abs() < 1e-15);

        let e = EllipseParams::new(0.0, 0.0, 3.0, 1.0, -0.25).unwrap();
        assert!((e.theta - (PI - 0.25)).abs() < 1e-12);

        let circle = EllipseParams::new(1.0, 2.0, 2.0, 2.0, 1.3).unwrap();
        assert_eq!(circle.theta, 0.0);
    }

    #[test]
    fn new_rejects_degenerate_axes() {
        assert!(EllipseParams::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(EllipseParams::new(0.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(EllipseParams::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn unit_circle_tangent_is_rotation_field() {
        let e = EllipseParams::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        let t = e.tangent_field(4, 4);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(t.x(r, c), r as f64, "Tx at ({r},{c})");
                assert_eq!(t.y(r, c), -(c as f64), "Ty at ({r},{c})");
            }
        }
    }

    #[test]
    fn tangent_field_hand_value() {
        // a=2, b=1, θ=0, center origin: T(1,1) = (4, −1).
        let e = EllipseParams::new(0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        let t = e.tangent_field(2, 2);
        assert_eq!((t.x(1, 1), t.y(1, 1)), (4.0, -1.0));
    }

    #[test]
    fn tangent_at_axis_vertex_is_vertical() {
        let (a, b) = (3.0, 2.0);
        let e = EllipseParams::new(1.0, 1.0, a, b, 0.0).unwrap();
        let t = e.tangent_field(2, 5);
        // Rightmost vertex (x0 + a, y0) = (4, 1).
        assert_eq!(t.x(1, 4), 0.0);
        assert_eq!(t.y(1, 4), -a * b * b);
    }

    #[test]
    fn tangent_field_parallel_to_boundary_tangent() {
        let e = EllipseParams::new(12.5, -3.0, 5.0, 2.0, 0.7).unwrap();
        for i in 0..100 {
            let t = 2.0 * PI * (i as f64 + 0.5) / 100.0;
            let (x, y) = e.point_at(t);
            let (bx, by) = e.boundary_tangent_at(t);
            // Evaluate the closed-form field directly at the boundary point.
            let (s, c) = (e.theta.sin(), e.theta.cos());
            let (a2, b2) = (e.a * e.a, e.b * e.b);
            let tx = (x - e.x0) * (b2 - a2) * c * s + (y - e.y0) * (b2 * s * s + a2 * c * c);
            let ty = (y - e.y0) * (a2 - b2) * c * s - (x - e.x0) * (a2 * s * s + b2 * c * c);
            let cross = tx * by - ty * bx;
            let scale = (tx * tx + ty * ty).sqrt() * (bx * bx + by * by).sqrt();
            assert!(cross.abs() <= 1e-9 * scale, "t={t}: cross={cross}");
        }
    }

    #[test]
    fn fit_rejects_empty_and_negative_input() {
        assert_eq!(
            fit_ellipse_moments(&ScalarField::zeros(4, 4)),
            Err(EllipseError::ZeroMass)
        );
        let neg = ScalarField::filled(3, 3, -0.5);
        assert_eq!(fit_ellipse_moments(&neg), Err(EllipseError::NegativeValue));
        let mut point = ScalarField::zeros(5, 5);
        point.set(2, 2, 1.0);
        assert_eq!(
            fit_ellipse_moments(&point),
            Err(EllipseError::DegenerateMoments)
        );
    }

    #[test]
    fn fit_recovers_rasterized_disk() {
        let radius = 30.0;
        let disk = EllipseParams::new(64.0, 64.0, radius, radius, 0.0).unwrap();
        let e = fit_ellipse_moments(&rasterize(&disk, 128, 128)).unwrap();
        assert!((e.x0 - 64.0).abs() < 0.1);
        assert!((e.y0 - 64.0).abs() < 0.1);
        assert!((e.a - radius).abs() < 0.02 * radius, "a = {}", e.a);
        assert!((e.b - radius).abs() < 0.02 * radius, "b = {}", e.b);
    }

    #[test]
    fn fit_recovers_axis_aligned_ellipse() {
        let truth = EllipseParams::new(64.0, 64.0, 30.0, 20.0, 0.0).unwrap();
        let e = fit_ellipse_moments(&rasterize(&truth, 128, 128)).unwrap();
        assert!((e.a - 30.0).abs() < 0.02 * 30.0);
        assert!((e.b - 20.0).abs() < 0.02 * 20.0);
        assert!(angle_distance(e.theta, 0.0) < 0.02);
    }

    #[test]
    fn fit_recovers_rotated_ellipse() {
        let theta = PI / 6.0;
        let truth = EllipseParams::new(64.0, 64.0, 30.0, 20.0, theta).unwrap();
        let e = fit_ellipse_moments(&rasterize(&truth, 128, 128)).unwrap();
        assert!(angle_distance(e.theta, theta) < 0.02, "theta = {}", e.theta);
        assert!((e.a - 30.0).abs() < 0.02 * 30.0);
        assert!((e.b - 20.0).abs() < 0.02 * 20.0);
    }

    #[test]
    fn fit_is_invariant_to_uniform_rescaling() {
        let truth = EllipseParams::new(40.0, 35.0, 18.0, 11.0, 1.1).unwrap();
        let ind = rasterize(&truth, 96, 96);
        let scaled = ind.map(|v| v * 7.5);
        let e1 = fit_ellipse_moments(&ind).unwrap();
        let e2 = fit_ellipse_moments(&scaled).unwrap();
        assert!((e1.x0 - e2.x0).abs() < 1e-9);
        assert!((e1.a - e2.a).abs() < 1e-9);
        assert!((e1.b - e2.b).abs() < 1e-9);
        assert!((e1.theta - e2.theta).abs() < 1e-9);
    }

    #[test]
    fn residual_of_constant_field_is_zero() {
        let e = EllipseParams::new(8.0, 8.0, 4.0, 2.0, 0.3).unwrap();
        let u = ScalarField::filled(16, 16, 0.4);
        assert_eq!(orthogonality_residual(&u, &e), 0.0);
    }

    #[test]
    fn residual_separates_matched_from_rotated_params() {
        let truth = EllipseParams::new(64.0, 64.0, 30.0, 20.0, PI / 6.0).unwrap();
        let smooth = convolve(
            &rasterize(&truth, 128, 128),
            &GaussianKernel::new(4, 2.0).unwrap(),
        );
        let matched = orthogonality_residual(&smooth, &truth);
        let rotated = EllipseParams::new(64.0, 64.0, 30.0, 20.0, PI / 6.0 + PI / 2.0).unwrap();
        let mismatched = orthogonality_residual(&smooth, &rotated);
        assert!(matched < 0.05, "matched residual {matched}");
        assert!(mismatched > 5.0 * matched, "ratio {}", mismatched / matched);
    }

    #[test]
    fn moment_fit_round_trips_through_residual() {
        let truth = EllipseParams::new(64.0, 64.0, 30.0, 20.0, PI / 6.0).unwrap();
        let ind = rasterize(&truth, 128, 128);
        let smooth = convolve(&ind, &GaussianKernel::new(4, 2.0).unwrap());
        let fitted = fit_ellipse_moments(&ind).unwrap();
        assert!(orthogonality_residual(&smooth, &fitted) < 0.05);
    }

    #[test]
    fn json_round_trip_preserves_values_and_validates() {
        let e = EllipseParams::new(10.5, -2.0, 6.0, 3.5, 0.9).unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let back: EllipseParams = serde_json::from_str(&json).unwrap();
        assert_eq!(e, back);

        // Deserialization normalizes a swapped axis pair,
        let swapped: EllipseParams = serde_json::from_str(
            r#"{"x0":0.0,"y0":0.0,"a":1.0,"b":2.0,"theta":0.0}"#,
        )
        .unwrap();
        assert_eq!((swapped.a, swapped.b), (2.0, 1.0));

        // and rejects invalid axes.
        let bad: Result<EllipseParams, _> =
            serde_json::from_str(r#"{"x0":0.0,"y0":0.0,"a":-1.0,"b":2.0,"theta":0.0}"#);
        assert!(bad.is_err());
    }
}
