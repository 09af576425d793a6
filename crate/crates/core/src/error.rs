use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("incompatible columns: widths {left} and {right} differ")]
    IncompatibleColumns { left: String, right: String },
    #[error("incompatible gadgets: {0}")]
    IncompatibleGadgets(String),
    #[error("cannot evaluate: {0}")]
    CannotEvaluate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("height schedule infeasible: {0}")]
    ScheduleInfeasible(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("point {0} lies outside the gadget support")]
    OutsideSupport(String),
    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),
    #[error("certificate violation: {0}")]
    CertificateViolation(String),
    #[error("undefined deficiency: {0}")]
    UndefinedDeficiency(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),
    #[error("adversary budget exhausted: {0}")]
    AdversaryBudget(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
