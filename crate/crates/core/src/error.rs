use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in block {block}: expected {expected}, found {found}")]
    DimensionMismatch {
        block: usize,
        expected: usize,
        found: usize,
    },

    #[error("block count mismatch: expected {expected} blocks, found {found}")]
    BlockCount { expected: usize, found: usize },

    #[error("{what} = {value} is outside its admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid row partition: {0}")]
    Partition(String),

    #[error(
        "resolvent of block {block} failed after {steps} inner steps: \
         defect {defect:.3e} exceeds allowed {allowed:.3e}"
    )]
    Resolvent {
        block: usize,
        steps: usize,
        defect: f64,
        allowed: f64,
    },

    #[error("separator value {phi:.3e} at iteration {k} is below the admissible floor {floor:.3e}")]
    SeparatorContract { k: usize, phi: f64, floor: f64 },

    #[error("zero separator gradient: the iteration should have stopped at the gradient test")]
    ZeroGradient,

    #[error("Fejér inequality `{which}` violated at iteration {k} (slack {slack:.3e})")]
    FejerViolation {
        k: usize,
        which: &'static str,
        slack: f64,
    },

    #[error("{solver} reached its iteration cap of {cap}")]
    IterationCap { solver: &'static str, cap: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(
    what: &'static str,
    value: f64,
    domain: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain,
        })
    }
}
