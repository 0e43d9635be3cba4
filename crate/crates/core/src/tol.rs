//! Default tolerances and numerical parameters.
//!
//! Every threshold used by a verdict lives here so reports can cite it.

/// Smallest admissible eigenvalue of a metric.
pub const EPS_SPD: f64 = 1e-10;

/// Central-difference step for derivatives that are not propagated by jets.
pub const H_FD: f64 = 1e-5;

/// Smallest admissible `|det w|` for a frame.
pub const EPS_INV: f64 = 1e-8;

/// Relative tolerance of the Denman–Beavers square root iteration.
pub const DB_REL_TOL: f64 = 1e-13;

/// Maximum Denman–Beavers iterations.
pub const DB_MAX_ITER: usize = 100;

/// Agreement required between the two Gauss curvature evaluations.
pub const TOL_CURV: f64 = 1e-7;

/// Allowed mismatch `|G̃(x₀) − w₀ᵀ G(x₀) w₀|` of the initial frame.
pub const TOL_INIT: f64 = 1e-9;

/// Default integrability tolerance for sampled residual checks.
pub const TOL_THOMAS: f64 = 1e-6;

/// Relative factor of the default path tolerance (times grid diameter).
pub const TOL_PATH_FACTOR: f64 = 1e-5;

/// Convergence threshold on the gradient norm of the pointwise cost.
pub const POINTWISE_GTOL: f64 = 1e-10;

/// Iteration cap of the pointwise minimizer.
pub const POINTWISE_MAX_ITER: usize = 500;

/// Finite-difference step in `w` for the integrability residual.
pub const FD_W_STEP: f64 = 1e-6;

/// Off-diagonal threshold of the Jacobi eigenvalue sweep.
pub const JACOBI_TOL: f64 = 1e-15;

/// Singular value tolerance for the distance to `SO(n)`.
pub const SVD_TOL: f64 = 1e-12;

/// Step halvings allowed before a descent aborts on non-finite values.
pub const MAX_HALVINGS: usize = 60;

/// Smallest admissible `|∂1y × ∂2y|` of a midplate immersion.
pub const EPS_SURFACE: f64 = 1e-10;

/// Default RK4 substeps per lattice edge.
pub const RK4_SUBSTEPS: usize = 4;
