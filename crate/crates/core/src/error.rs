use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("point outside the domain: coordinate {index} = {value} not in [{lower}, {upper}]")]
    DomainViolation {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("objective evaluation failed: {message} (raw response: {raw:?})")]
    Evaluation { message: String, raw: String },

    #[error("kernel matrix not factorizable (n = {n}, jitter reached {jitter:e}, pivot {pivot} = {pivot_value:e})")]
    Factorization {
        n: usize,
        jitter: f64,
        pivot: usize,
        pivot_value: f64,
    },

    #[error("GP fit failed: {0}")]
    Fit(String),

    #[error("clustering degenerate: {0}")]
    DegenerateCluster(String),

    #[error("classifier needs both classes, got only class {0}")]
    SingleClass(u8),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("no leaf has a usable acquisition value (all surrogates failed)")]
    NoUsableLeaf,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
