//! Default tolerances. All iterative pieces converge to machine-level
//! accuracy on desk-scale instances, so these are tight and scale with
//! the data where appropriate.

/// Slack allowed on the dual box constraint |q_i| <= 1.
pub const EPS_BOX: f64 = 1e-12;

/// Relative threshold classifying a dual coordinate of z = Au as zero.
pub const EPS_Z_REL: f64 = 1e-9;

/// Relative threshold below which a flow slope counts as extinct.
pub const EXTINCTION_TOL_REL: f64 = 1e-10;

/// Relative projected-gradient stopping tolerance of the box solver.
pub const PG_TOL_REL: f64 = 1e-10;

/// Tighter relative target for feasibility-style solves (membership,
/// dual-norm bisection): the representation residual scales like
/// pg / sigma_min(A), so these need extra headroom.
pub const PG_TOL_REL_FEAS: f64 = 3e-13;

/// Relative tolerance for merging spectral atoms with equal |p|.
pub const ATOM_MERGE_REL: f64 = 1e-12;

/// Relative window for treating several event times as simultaneous.
pub const SIMULTANEITY_REL: f64 = 1e-9;

/// Default membership tolerance, scaling with the tested vector.
pub fn cert_tol(p_norm: f64) -> f64 {
    1e-9 * (1.0 + p_norm)
}
