use thiserror::Error;

/// Errors surfaced by planners, dual solvers, and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RmdpError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error(
        "wasserstein radius must be positive: rho = 0 makes the dual interval unbounded; \
         use the nominal expectation directly"
    )]
    WassersteinZeroRadius,

    #[error(transparent)]
    Model(#[from] ModelViolation),
}

/// First violated model invariant, reported with its location.
///
/// Indices are zero-based, matching the interchange layout.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelViolation {
    #[error("malformed model: {0}")]
    Shape(String),

    #[error("state {s} has an empty action set")]
    EmptyActionSet { s: usize },

    #[error("state {s} repeats action id {id}")]
    DuplicateAction { s: usize, id: usize },

    #[error("kernel row (h={h}, s={s}, a={a}) sums to {sum:.17} (must be 1 within 1e-12)")]
    RowSum {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },

    #[error("kernel entry (h={h}, s={s}, a={a}, s'={sp}) is negative: {value}")]
    NegativeKernelEntry {
        h: usize,
        s: usize,
        a: usize,
        sp: usize,
        value: f64,
    },

    #[error("reward (h={h}, s={s}, a={a}) is {value}, outside [0, 1]")]
    RewardRange {
        h: usize,
        s: usize,
        a: usize,
        value: f64,
    },

    #[error("policy action index {index} at (h={h}, s={s}) exceeds |A(s)| = {available}")]
    PolicyAction {
        h: usize,
        s: usize,
        index: usize,
        available: usize,
    },
}
