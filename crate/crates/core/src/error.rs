use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("grid mismatch: expected {expected} intervals with spacing {expected_dxi}, found {found} with spacing {found_dxi}")]
    GridMismatch {
        expected: usize,
        found: usize,
        expected_dxi: f64,
        found_dxi: f64,
    },

    #[error("state is not in H+ (eta0 = {0})")]
    NotInHPlus(f64),

    #[error("state is not in H++ (eta0 = {eta0}, min eta1 = {min_past})")]
    NotInHPlusPlus { eta0: f64, min_past: f64 },

    #[error("state is outside D(A): |eta1(0) - eta0| = {gap} exceeds {tol}")]
    OutsideDomainA { gap: f64, tol: f64 },

    #[error("state is outside D(A*): |eta1(-T)| = {value} exceeds {tol}")]
    OutsideDomainAstar { value: f64, tol: f64 },

    #[error("state is outside the domain of the value function: {0}")]
    OutsideValueDomain(String),

    #[error("time {t} outside the admissible range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("step size {dt} is not compatible with {what} = {other}")]
    StepMismatch {
        dt: f64,
        what: &'static str,
        other: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient grid resolution: {0}")]
    Resolution(String),

    #[error("gradient estimate unstable: {0}")]
    Unstable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
