//! Pinned numerical tolerances shared by the library, the runner and the tests.

/// Bisection tolerance for the unstable zero `theta_x` of `f(x, .)`.
pub const THETA_BISECTION: f64 = 1e-12;
/// Periodicity agreement of sampled coefficients.
pub const PERIODICITY: f64 = 1e-12;

/// Safety factor applied to the explicit monotone time-step bound.
pub const CFL_SAFETY: f64 = 0.9;
/// Solutions leaving `[-GUARD, GUARD]` abort as divergence.
pub const DIVERGENCE_GUARD: f64 = 1.1;
/// Inner conjugate-gradient tolerance for implicit diffusion.
pub const CG_TOLERANCE: f64 = 1e-10;
/// Ordering slack of the discrete comparison principle.
pub const COMPARISON_SLACK: f64 = 1e-10;

/// Relative agreement of consecutive window slopes for a stationary front.
pub const STATIONARY_RELATIVE: f64 = 1e-4;
/// Snapshots per speed window.
pub const SPEED_WINDOW: usize = 10;
/// Speeds below this magnitude are reported as near-stationary.
pub const NEAR_STATIONARY: f64 = 1e-3;
/// Raw profile bins violating monotonicity by more than this are projected.
pub const ISOTONIC_THRESHOLD: f64 = 1e-6;
/// Normalisation accuracy of the profile mass on the positive half line.
pub const NORMALIZATION: f64 = 1e-6;

/// Guard keeping `g` away from the edge of the cap `x . e0 > 0`.
pub const CAP_GUARD: f64 = 0.05;
/// Default finite-difference step of `grad g`.
pub const GRAD_STEP: f64 = 1e-3;
/// Refinement factor of the cap sampling used for condition (iii).
pub const CAP_REFINEMENT: usize = 10;

/// Residual target of the surface root solve.
pub const SURFACE_RESIDUAL: f64 = 1e-13;

/// Residual sign tolerance relative to `max |f|` in the calibration scan.
pub const CALIBRATION_RELATIVE: f64 = 1e-3;
/// Sandwich and time-monotonicity slack during front construction.
pub const SANDWICH_SLACK: f64 = 1e-8;
/// Sup-norm change declaring the horizon-doubling construction converged.
pub const CONSTRUCTION_CONVERGED: f64 = 1e-4;
/// Minimising-shift gap required at the end of a stability run.
pub const STABILITY_GAP: f64 = 0.05;
/// Half-width of the time-shift bracket searched in stability runs.
pub const SHIFT_BRACKET: f64 = 1.0;
/// Noise allowed when asking the stability gap to keep decreasing.
pub const GAP_NOISE: f64 = 1e-5;
/// Below this the stability gap is reconstruction error of the stored front
/// (about 1.5e-5 at h = 0.25) and its trend carries no information.
pub const GAP_FLOOR: f64 = 5e-5;
