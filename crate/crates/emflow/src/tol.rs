//! Numerical tolerances and discretization constants used across the crate.
//!
//! Everything tunable lives here so the relationships between tolerances
//! stay visible: e.g. the charge-recovery fit tolerance must sit well above
//! the integrator tolerance times the differentiation amplification, and the
//! default shooting tolerance must sit above the integrator drift.

/// Maximum relative deviation allowed when checking `g · g⁻¹ = 1`.
pub const INVERSE_TOL: f64 = 1e-10;

/// Relative step for central finite differences of metric/potential
/// coefficients: `h = FD_STEP_REL · (1 + |xᵅ|)`. With f64 arithmetic this
/// balances O(h²) truncation against O(ε/h) roundoff for smooth
/// coefficients.
pub const FD_STEP_REL: f64 = 1e-5;

/// Agreement required between closed-form Christoffel symbols and their
/// finite-difference reconstruction (absolute, per component).
pub const DERIV_TOL: f64 = 1e-6;

/// Threshold on `g(v,v)` (relative to the Euclidean size of `v`) below
/// which a tangent vector is classified as null.
pub const TOL_NULL: f64 = 1e-9;

/// Threshold on force and acceleration norms below which the
/// charge-to-mass recovery declares the degenerate kernel case (geodesic
/// inside the pointwise kernel of the field) instead of fitting a ratio.
pub const KERNEL_TOL: f64 = 1e-9;

/// Default relative residual bound for accepting a least-squares
/// charge-to-mass fit as an actual solution of the force equation.
pub const FIT_TOL: f64 = 1e-3;

/// Default absolute and relative local error tolerances for the adaptive
/// integrator.
pub const ODE_ABS_TOL: f64 = 1e-10;
pub const ODE_REL_TOL: f64 = 1e-10;

/// Hard cap on accepted adaptive steps before the integrator reports
/// failure and returns the partial trajectory.
pub const ODE_MAX_STEPS: usize = 1_000_000;

/// Default endpoint-miss tolerance (per coordinate, sup norm) for the
/// two-point shooting solver in flat and in curved charts.
pub const BVP_TOL_FLAT: f64 = 1e-8;
pub const BVP_TOL_CURVED: f64 = 1e-6;

/// Random restarts allowed per shooting solve before giving up.
pub const BVP_MAX_RESTARTS: usize = 8;

/// Newton iterations allowed per shooting attempt.
pub const BVP_MAX_ITERS: usize = 60;

/// Relative step for forward-difference Jacobians in the shooting solver
/// and the extremizer (√ε scale, optimal for one-sided differences).
pub const JACOBIAN_STEP_REL: f64 = 1e-6;

/// Default gradient sup-norm at which the discrete extremizer declares an
/// interior extremal. The discrete Euler–Lagrange residual of an exact
/// solution scales like O(h²) with the node spacing, so demanding much
/// less than ~1e-5 at a few hundred nodes would reject true extremals.
pub const DEFAULT_G_TOL: f64 = 1e-4;

/// Default node count for discretized curves handed to the functionals.
pub const DEFAULT_NODES: usize = 200;

/// Step-size safety factor and clamps for the adaptive controller.
pub const STEP_SAFETY: f64 = 0.9;
pub const STEP_GROW_MAX: f64 = 5.0;
pub const STEP_SHRINK_MIN: f64 = 0.2;
