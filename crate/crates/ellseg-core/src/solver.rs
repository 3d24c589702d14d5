//! Alternating primal-dual solver imposing the elliptical prior.
//!
//! Each sweep updates three unknowns in turn:
//!
//! 1. **dual ascent** on the multiplier `q` of the contour-alignment
//!    constraint `⟨∇u_i, T⟩ = 0`,
//! 2. a **closed-form softmax** update of the segmentation `u`, minimizing the
//!    linearized energy over the simplex (difference-of-convex step),
//! 3. a **moment refresh** of the ellipse, regenerating the tangent field.
//!
//! The constraint acts through the *direction* of the tangent field; its raw
//! magnitudes grow quadratically with the axes and with the distance from
//! the center, which at unit step sizes saturates the softmax and stalls the
//! iteration. The solver therefore applies `q` against the unit direction
//! field, leaving the constraint set unchanged.
//!
//! `run` is a pure function of `(o, cfg)`: two invocations produce identical
//! traces bit for bit, and `run_unrolled` with a fixed layer count replays
//! the same loop body without the convergence test.

use alloc::vec::Vec;
use core::fmt;

use crate::ellipse::{fit_ellipse_moments, orthogonality_residual, EllipseParams, GRAD_EPS};
use crate::grid::{
    centered_gradient, divergence, gradient, GaussianKernel, GridError, ScalarField, VectorField2,
};
use crate::regularizer::{entropy, std_energy, std_subgradient, SegmentationState};
use crate::similarity::FeatureStack;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// A hyperparameter is outside its admissible range.
    InvalidConfig(&'static str),
    /// Kernel construction failed.
    Kernel(GridError),
    /// The configured elliptical class does not exist in the feature stack.
    ClassOutOfRange { class: usize, classes: usize },
    /// A non-finite value appeared in the state; index of the offending sweep.
    NonFinite { iter: usize },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::InvalidConfig(what) => write!(f, "invalid config: {what}"),
            SolverError::Kernel(e) => write!(f, "kernel: {e}"),
            SolverError::ClassOutOfRange { class, classes } => {
                write!(f, "elliptical class {class} out of range for {classes} classes")
            }
            SolverError::NonFinite { iter } => {
                write!(f, "non-finite state at iteration {iter}")
            }
        }
    }
}

impl core::error::Error for SolverError {}

impl From<GridError> for SolverError {
    fn from(e: GridError) -> Self {
        SolverError::Kernel(e)
    }
}

/// Gaussian kernel parameters; the kernel itself is built per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub radius: usize,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn build(&self) -> Result<GaussianKernel, GridError> {
        GaussianKernel::new(self.radius, self.sigma)
    }
}

/// Hyperparameters of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the threshold-dynamics regularizer.
    pub lambda: f64,
    /// Entropy weight; controls the softness of the segmentation.
    pub epsilon: f64,
    /// Dual ascent step size.
    pub tau_q: f64,
    pub max_iters: usize,
    /// Convergence threshold on the RMS change of `u`; may be 0 (never
    /// converge early) or infinity (stop after the first sweep).
    pub tol: f64,
    pub kernel: KernelSpec,
    /// Index of the class constrained to an elliptical shape.
    pub ellipse_class: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: 1.0,
            tau_q: 1.0,
            max_iters: 500,
            tol: 3e-5,
            kernel: KernelSpec { radius: 2, sigma: 5.0 },
            ellipse_class: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(SolverError::InvalidConfig("lambda must be finite and >= 0"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(SolverError::InvalidConfig("epsilon must be finite and > 0"));
        }
        if !(self.tau_q > 0.0) || !self.tau_q.is_finite() {
            return Err(SolverError::InvalidConfig("tau_q must be finite and > 0"));
        }
        if self.max_iters < 1 {
            return Err(SolverError::InvalidConfig("max_iters must be >= 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(SolverError::InvalidConfig("tol must be >= 0"));
        }
        self.kernel.build()?;
        Ok(())
    }
}

/// The solver unknowns after `iter` completed sweeps. `tangent` is always
/// the tangent field of `ellipse` on the current grid.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: SegmentationState,
    /// Dual variable of the alignment constraint.
    pub q: ScalarField,
    pub ellipse: EllipseParams,
    pub tangent: VectorField2,
    pub iter: usize,
}

/// Diagnostics of one completed sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Saddle energy of the updated state.
    pub energy: f64,
    /// RMS of `u^{t+1} − u^t` over all class fields.
    pub u_change: f64,
    /// Alignment residual of the elliptical class against the new ellipse.
    pub ortho_residual: f64,
    pub ellipse: EllipseParams,
    /// The moment refit failed this sweep and the previous ellipse was kept.
    pub refit_failed: bool,
}

pub type IterationTrace = Vec<IterationRecord>;

/// Final segmentation, fitted ellipse, and per-sweep diagnostics.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub u: SegmentationState,
    pub ellipse: EllipseParams,
    pub trace: IterationTrace,
}

/// Outcome of a tangent refresh.
#[derive(Debug, Clone)]
pub struct TangentUpdate {
    pub ellipse: EllipseParams,
    pub tangent: VectorField2,
    /// The refit failed (no mass in the elliptical class) and `ellipse` is
    /// carried over from the previous sweep.
    pub refit_failed: bool,
}

/// Per-pixel softmax of `logits / epsilon` across class planes, stabilized
/// by subtracting the per-pixel maximum. The output sums to 1 at every pixel.
fn softmax_state(logits: &[ScalarField], epsilon: f64) -> SegmentationState {
    let classes = logits.len();
    let (h, w) = (logits[0].height(), logits[0].width());
    let mut fields: Vec<ScalarField> = (0..classes).map(|_| ScalarField::zeros(h, w)).collect();
    for r in 0..h {
        for c in 0..w {
            let mut max = f64::NEG_INFINITY;
            for l in logits {
                max = max.max(l.get(r, c) / epsilon);
            }
            let mut sum = 0.0;
            for (l, f) in logits.iter().zip(fields.iter_mut()) {
                let e = libm::exp(l.get(r, c) / epsilon - max);
                f.set(r, c, e);
                sum += e;
            }
            for f in fields.iter_mut() {
                f.set(r, c, f.get(r, c) / sum);
            }
        }
    }
    SegmentationState::from_fields_unchecked(fields)
}

/// Unit direction of a vector field, with a small floor in the norm so zero
/// vectors stay zero.
fn unit_direction(v: &VectorField2) -> VectorField2 {
    let (h, w) = (v.height(), v.width());
    let mut out = VectorField2::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = (v.x(r, c), v.y(r, c));
            let n = libm::hypot(x, y) + GRAD_EPS;
            out.set(r, c, x / n, y / n);
        }
    }
    out
}

/// `div(q·T̂)` for the current dual variable and unit tangent direction.
fn dual_divergence(q: &ScalarField, unit_tangent: &VectorField2) -> ScalarField {
    let (h, w) = (q.height(), q.width());
    let mut qx = ScalarField::zeros(h, w);
    let mut qy = ScalarField::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let qv = q.get(r, c);
            qx.set(r, c, qv * unit_tangent.x(r, c));
            qy.set(r, c, qv * unit_tangent.y(r, c));
        }
    }
    let v = VectorField2::from_components(qx, qy).expect("planes share shape");
    divergence(&v)
}

/// Centered fallback ellipse for degenerate initializations: a circle of
/// radius `min(h, w)/4`.
fn fallback_ellipse(height: usize, width: usize) -> EllipseParams {
    let radius = (height.min(width) as f64 / 4.0).max(0.25);
    EllipseParams::new(
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        radius,
        radius,
        0.0,
    )
    .expect("fallback circle is valid")
}

/// Initial state: `u⁰ = softmax(o/ε)`, `q⁰ = 0`, and the ellipse fitted to
/// the elliptical class of `u⁰` (or the centered fallback circle when that
/// class carries no usable mass).
pub fn init_state(o: &FeatureStack, cfg: &SolverConfig) -> Result<SolverState, SolverError> {
    cfg.validate()?;
    if cfg.ellipse_class >= o.classes() {
        return Err(SolverError::ClassOutOfRange {
            class: cfg.ellipse_class,
            classes: o.classes(),
        });
    }
    let u = softmax_state(o.fields(), cfg.epsilon);
    if !u.is_finite() {
        return Err(SolverError::NonFinite { iter: 0 });
    }
    let (h, w) = (o.height(), o.width());
    let ellipse = fit_ellipse_moments(u.class(cfg.ellipse_class))
        .unwrap_or_else(|_| fallback_ellipse(h, w));
    let tangent = ellipse.tangent_field(h, w);
    Ok(SolverState {
        u,
        q: ScalarField::zeros(h, w),
        ellipse,
        tangent,
        iter: 0,
    })
}

/// One dual ascent step: `q − τ_q · (T̂ · ∇u_i)` pointwise, where `T̂` is the
/// unit direction of the held tangent field.
pub fn q_step(state: &SolverState, cfg: &SolverConfig) -> ScalarField {
    let unit = unit_direction(&state.tangent);
    let grad = gradient(state.u.class(cfg.ellipse_class));
    let (h, w) = (state.q.height(), state.q.width());
    let mut out = ScalarField::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let align = unit.x(r, c) * grad.x(r, c) + unit.y(r, c) * grad.y(r, c);
            out.set(r, c, state.q.get(r, c) - cfg.tau_q * align);
        }
    }
    out
}

/// Closed-form segmentation update: per-pixel softmax of
/// `(o_î − p_î − δ_{î,i}·div(q·T̂)) / ε`, with `p` the regularizer
/// subgradient at the current `u`. The output satisfies the simplex
/// constraint by construction.
///
/// The config must be valid (as checked by [`init_state`] or
/// [`SolverConfig::validate`]); panics on an unbuildable kernel.
pub fn u_step(
    o: &FeatureStack,
    state: &SolverState,
    q_next: &ScalarField,
    cfg: &SolverConfig,
) -> SegmentationState {
    let kernel = cfg.kernel.build().expect("validated kernel spec");
    u_step_with(o, state, q_next, cfg, &kernel)
}

fn u_step_with(
    o: &FeatureStack,
    state: &SolverState,
    q_next: &ScalarField,
    cfg: &SolverConfig,
    kernel: &GaussianKernel,
) -> SegmentationState {
    let p = std_subgradient(&state.u, cfg.lambda, kernel);
    let unit = unit_direction(&state.tangent);
    let div = dual_divergence(q_next, &unit);
    let logits: Vec<ScalarField> = o
        .fields()
        .iter()
        .enumerate()
        .map(|(i, oi)| {
            ScalarField::from_fn(oi.height(), oi.width(), |r, c| {
                let mut l = oi.get(r, c) - p.class(i).get(r, c);
                if i == cfg.ellipse_class {
                    l -= div.get(r, c);
                }
                l
            })
        })
        .collect();
    softmax_state(&logits, cfg.epsilon)
}

/// Refits the ellipse to the elliptical class of `u_next` by moments and
/// regenerates its tangent field. A failed refit (no mass) keeps `previous`
/// and flags the record.
pub fn tangent_step(
    u_next: &SegmentationState,
    cfg: &SolverConfig,
    previous: &EllipseParams,
) -> TangentUpdate {
    let (h, w) = (u_next.height(), u_next.width());
    match fit_ellipse_moments(u_next.class(cfg.ellipse_class)) {
        Ok(ellipse) => TangentUpdate {
            tangent: ellipse.tangent_field(h, w),
            ellipse,
            refit_failed: false,
        },
        Err(_) => TangentUpdate {
            tangent: previous.tangent_field(h, w),
            ellipse: *previous,
            refit_failed: true,
        },
    }
}

/// Saddle energy `⟨−o, u⟩ + R(u) + ε⟨u, ln u⟩ + ⟨div(q·T̂), u_i⟩` of a state;
/// purely diagnostic.
pub fn saddle_energy(o: &FeatureStack, state: &SolverState, cfg: &SolverConfig) -> f64 {
    let kernel = cfg.kernel.build().expect("validated kernel spec");
    saddle_energy_with(o, state, cfg, &kernel)
}

fn saddle_energy_with(
    o: &FeatureStack,
    state: &SolverState,
    cfg: &SolverConfig,
    kernel: &GaussianKernel,
) -> f64 {
    let mut data = 0.0;
    for (oi, ui) in o.fields().iter().zip(state.u.fields()) {
        data -= oi.dot(ui);
    }
    let unit = unit_direction(&state.tangent);
    let dual = dual_divergence(&state.q, &unit).dot(state.u.class(cfg.ellipse_class));
    data + std_energy(&state.u, cfg.lambda, kernel) + cfg.epsilon * entropy(&state.u) + dual
}

fn iterate(
    o: &FeatureStack,
    cfg: &SolverConfig,
    sweeps: usize,
    tol: Option<f64>,
) -> Result<RunResult, SolverError> {
    let mut state = init_state(o, cfg)?;
    let kernel = cfg.kernel.build()?;
    let mut trace = Vec::new();
    for t in 0..sweeps {
        let q_next = q_step(&state, cfg);
        let u_next = u_step_with(o, &state, &q_next, cfg, &kernel);
        if !u_next.is_finite() || !q_next.is_finite() {
            return Err(SolverError::NonFinite { iter: t + 1 });
        }
        let update = tangent_step(&u_next, cfg, &state.ellipse);
        let u_change = u_next.rms_change(&state.u);
        state = SolverState {
            u: u_next,
            q: q_next,
            ellipse: update.ellipse,
            tangent: update.tangent,
            iter: t + 1,
        };
        let energy = saddle_energy_with(o, &state, cfg, &kernel);
        let ortho_residual =
            orthogonality_residual(state.u.class(cfg.ellipse_class), &state.ellipse);
        trace.push(IterationRecord {
            iter: t + 1,
            energy,
            u_change,
            ortho_residual,
            ellipse: state.ellipse,
            refit_failed: update.refit_failed,
        });
        if let Some(tol) = tol {
            if u_change < tol {
                break;
            }
        }
    }
    Ok(RunResult {
        u: state.u,
        ellipse: state.ellipse,
        trace,
    })
}

/// Runs the alternating solver until the RMS change of `u` drops below
/// `cfg.tol` or `cfg.max_iters` sweeps complete, tracing every sweep.
pub fn run(o: &FeatureStack, cfg: &SolverConfig) -> Result<RunResult, SolverError> {
    iterate(o, cfg, cfg.max_iters, Some(cfg.tol))
}

/// Replays exactly `layers` sweeps with no convergence test: the unrolled,
/// fixed-depth form of [`run`]. With `layers = cfg.max_iters` and
/// `cfg.tol = 0` the two produce bitwise-identical results.
pub fn run_unrolled(
    o: &FeatureStack,
    cfg: &SolverConfig,
    layers: usize,
) -> Result<RunResult, SolverError> {
    if layers < 1 {
        return Err(SolverError::InvalidConfig("layers must be >= 1"));
    }
    iterate(o, cfg, layers, None)
}

/// Smoothed binary decoder `u = 1/(1 + e^{−o/ε})`: the closed-form minimizer
/// of `⟨−o, u⟩ + ε(⟨u, ln u⟩ + ⟨1−u, ln(1−u)⟩)` over `[0, 1]` per pixel.
pub fn binary_decode(o: &ScalarField, epsilon: f64) -> ScalarField {
    assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be > 0");
    o.map(|v| 1.0 / (1.0 + libm::exp(-v / epsilon)))
}

/// Hard step decoder: 0 where `o ≤ 0`, 1 where `o > 0`.
pub fn heaviside_decode(o: &ScalarField) -> ScalarField {
    o.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Cosine-style alignment loss of the class-`class` field against a tangent
/// field: `Σ_x |∇u(x)·T(x)| / (‖∇u(x)‖ + ε)`. Zero when every level set
/// follows the field.
pub fn shape_loss(u: &SegmentationState, class: usize, tangent: &VectorField2) -> f64 {
    let grad = centered_gradient(u.class(class));
    let (h, w) = (grad.height(), grad.width());
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let (gx, gy) = (grad.x(r, c), grad.y(r, c));
            let dot = gx * tangent.x(r, c) + gy * tangent.y(r, c);
            total += dot.abs() / (libm::hypot(gx, gy) + GRAD_EPS);
        }
    }
    total
}
