use thiserror::Error;

/// Errors produced by the inference library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance and cannot be standardized")]
    ConstantColumn(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no path between features {from} and {to}")]
    Disconnected { from: usize, to: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("score vector {0} is degenerate (column fully explained by the others); inference for this feature is impossible")]
    DegenerateScore(usize),

    #[error("estimated support size {s_hat} must be smaller than the sample count {n}")]
    SupportTooLarge { s_hat: usize, n: usize },

    #[error("residual matrix is identically zero; the noise level cannot be estimated")]
    ZeroResidual,

    #[error("cluster count {c} outside the valid range [1, {p}]")]
    InvalidC { c: usize, p: usize },

    #[error("no mergeable cluster pair left at {remaining} clusters (target {target}); the adjacency graph is disconnected")]
    UnmergeableClusters { remaining: usize, target: usize },

    #[error("could not place {requested} active regions with pairwise separation {separation} mm")]
    InfeasibleRegions { requested: usize, separation: f64 },

    #[error("ensemble member {member} failed: {source}")]
    EnsembleMember {
        member: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
