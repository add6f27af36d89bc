use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular pair: separation {separation:e} is below the floor {floor:e}")]
    SingularPair { separation: f64, floor: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),

    #[error("rational-quadratic alpha = {0} has no tabulated transform (supported: 0.5, 1, 2, 3)")]
    UnsupportedAlpha(f64),

    #[error("no closed-form transform for kernel {0}")]
    UnsupportedKernel(String),

    #[error("transform is singular at the zero mode")]
    ModeAtZero,

    #[error("grid too coarse: kernel length scale {length_scale} spans {cells:.2} cells, need at least 4 (increase grid points or shrink the domain)")]
    GridTooCoarse { length_scale: f64, cells: f64 },

    #[error("stabilizer transform is not positive at xi = {xi}")]
    StabilizerInvalid { xi: f64 },

    #[error("bessel K0 is defined for x > 0, got {0}")]
    DomainError(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("kernel spec parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}
