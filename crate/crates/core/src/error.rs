use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("window overflow: product needs [{need_lo}, {need_hi}] but the window is [{lo}, {hi}]")]
    WindowOverflow {
        need_lo: i32,
        need_hi: i32,
        lo: i32,
        hi: i32,
    },
    #[error("zero leading coefficient at exponent {0}")]
    ZeroLeading(i32),
    #[error("exponent {num}/{den} does not give an integer leading power for degree {degree}")]
    NonIntegralPower { num: i64, den: i64, degree: i32 },
    #[error("Newton iteration did not converge: {0}")]
    NonConvergent(String),
    #[error("aliasing: window width {width} exceeds {samples} samples")]
    Aliasing { width: usize, samples: usize },
    #[error("Newton divergence at sample {index}: residual {residual:e}")]
    NewtonDivergence { index: usize, residual: f64 },
    #[error("winding number {0} is not 1")]
    Winding(f64),
    #[error("argument increments too coarse; increase samples ({0})")]
    Resolution(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("unknown coordinate label {0}")]
    UnknownLabel(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("blow-up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Input(_) | Error::UnknownLabel(_) | Error::InvalidPoint(_)
        )
    }
}
