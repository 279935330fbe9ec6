//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
///
/// The CLI maps [`Error::Capacity`] to its own exit code; all remaining
/// variants are ordinary runtime failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A measure, point or box failed construction-time validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A box does not align with the dyadic grid of a piecewise-constant
    /// density, so its mass cannot be computed exactly.
    #[error("box is not aligned with the level-{level} dyadic grid on axis {axis} (coordinate {coordinate})")]
    Misaligned { level: u32, axis: usize, coordinate: f64 },

    /// A region carries target mass but no source mass, so no rescaling of the
    /// source measure can reproduce the target on that region.
    #[error("support violation on cell {cell}: target mass {nu_mass} but source mass 0")]
    SupportViolation { cell: String, nu_mass: f64 },

    /// Total masses of the two marginals differ beyond tolerance, so no
    /// coupling exists.
    #[error("marginal masses differ: {mu} vs {nu}")]
    MassMismatch { mu: f64, nu: f64 },

    /// A problem exceeds a configured size cap.
    #[error("capacity exceeded for {what}: needed {needed}, cap {cap}")]
    Capacity { what: &'static str, needed: u64, cap: u64 },

    /// Parameters fall outside the validity region of a closed-form bound.
    #[error("parameter regime violated: {condition}")]
    Regime { condition: String },

    /// The operation is not defined for the given measure family or inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numeric-domain failure (nonpositive value where a log is needed, …).
    #[error("domain error: {0}")]
    Domain(String),

    /// An aggregation step was handed too little data to produce a result.
    #[error("incomplete data: {0}")]
    IncompleteData(String),

    /// Counts that were required to agree do not.
    #[error("arity mismatch: {0}")]
    Arity(String),

    /// A solver failure with the experiment coordinates where it happened.
    #[error("solver failure at N={n}, replication {rep}: {source}")]
    Replication {
        n: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches `(N, replication)` context to a solver error.
    pub fn at_replication(self, n: usize, rep: usize) -> Self {
        Error::Replication { n, rep, source: Box::new(self) }
    }

    /// True when this error (or its replication-wrapped source) is a size-cap
    /// violation; the CLI turns these into a dedicated exit code.
    pub fn is_capacity(&self) -> bool {
        match self {
            Error::Capacity { .. } => true,
            Error::Replication { source, .. } => source.is_capacity(),
            _ => false,
        }
    }
}
