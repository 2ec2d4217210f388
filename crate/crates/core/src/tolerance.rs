//! Numerical tolerances shared by every module.

/// Tolerance constants. One record so that all modules agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative threshold below which a singular value counts as zero.
    pub rank: f64,
    /// Maximum `‖VᵀV − I‖_F` accepted for an orthonormal frame.
    pub orthonormality: f64,
    /// Maximum deviation from unit norm accepted for sphere data.
    pub unit_norm: f64,
    /// Relative gap under which two singular values are treated as tied.
    pub singular_tie: f64,
    /// Minimum resultant length for a circular or extrinsic mean.
    pub degenerate_mean: f64,
    /// Span-membership residual used by the Lie triple verifier.
    pub lie_triple: f64,
    /// Distance to an axis below which a circle projection is undefined.
    pub degenerate_projection: f64,
}

pub const TOL: Tolerances = Tolerances {
    rank: 1e-12,
    orthonormality: 1e-10,
    unit_norm: 1e-8,
    singular_tie: 1e-10,
    degenerate_mean: 1e-10,
    lie_triple: 1e-8,
    degenerate_projection: 1e-8,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOL
    }
}
