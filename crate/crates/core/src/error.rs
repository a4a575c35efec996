use thiserror::Error;

/// Which determinant family a degeneracy guard tripped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    /// g_k = det(γ_k, γ_{k+1})
    G,
    /// u_k = det(γ_{k-1}, γ_{k+1})
    U,
}

impl std::fmt::Display for InvariantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvariantKind::G => write!(f, "g"),
            InvariantKind::U => write!(f, "u"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A determinant invariant is too close to zero for a division it guards.
    #[error("degenerate invariant {kind}[{index}] = {value:.3e} (threshold {threshold:.3e})")]
    DegenerateInvariant {
        kind: InvariantKind,
        index: usize,
        value: f64,
        threshold: f64,
    },

    /// g_{k-1} + g_k is too close to zero (needed by the V-entry inversion).
    #[error("degenerate sum g[{index}-1] + g[{index}] = {value:.3e} (threshold {threshold:.3e})")]
    DegenerateSum {
        index: usize,
        value: f64,
        threshold: f64,
    },

    /// Closed-form bracket relations only make sense for N > 3.
    #[error("bracket relations require n > 3, got n = {n}")]
    UnsupportedSize { n: usize },

    /// The linear system for flow coefficients could not be solved to tolerance.
    #[error("flow-coefficient solve failed: residual {residual:.3e} exceeds {tolerance:.3e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    /// An integration step produced a state violating the degeneracy guards.
    #[error("degeneracy crossing at t = {time}: {source}")]
    DegeneracyCrossing {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    /// Random curve generation kept hitting degenerate samples.
    #[error("curve generation failed after {attempts} rejected samples")]
    GenerationFailure { attempts: usize },

    /// Input sequences disagree on the site count.
    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
