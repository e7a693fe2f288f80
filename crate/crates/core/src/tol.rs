//! Library-wide tolerances. Every threshold used by a validation or
//! regularity decision is defined here.

/// Absolute tolerance on `|A[i][j] + A[j][i]|` when accepting a skew matrix.
pub const SKEW: f64 = 1e-10;

/// Slack allowed outside `[0, 1]` for the spectrum of a covariance operator.
pub const SPECTRUM: f64 = 1e-9;

/// Tolerance on `||P^2 - P||` (max entry) for the projection flag.
pub const PROJECTION: f64 = 1e-9;

/// Tolerance on self-adjointness and the Gamma relation (max entry).
pub const AXIOM: f64 = 1e-9;

/// Reciprocal condition number below which a block counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Weights within this distance below zero are clamped to zero.
pub const NEGATIVE_WEIGHT: f64 = 1e-9;

/// Allowed deviation of a measure table's total mass from one.
pub const MASS: f64 = 1e-9;

/// Largest imaginary part tolerated on a probability-valued Pfaffian.
pub const IMAGINARY: f64 = 1e-9;

/// Denominator floor for one-point conditioning.
pub const REGULARITY: f64 = 1e-10;

/// Accuracy at which the CAR relations are checked on construction.
pub const CAR: f64 = 1e-12;

/// Norm floor used to declare the joint Fock kernel degenerate.
pub const KERNEL_GAP: f64 = 1e-8;

/// Threshold on `||S12||, ||S21||` (max entry) for the DPP test.
pub const DPP: f64 = 1e-9;

/// Eigenvalues this close to 0 or 1 are treated as exact in purification;
/// the square root would otherwise magnify their roundoff.
pub const PURIFY_SNAP: f64 = 1e-12;
