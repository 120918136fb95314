use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity error: {needed} bytes needed, budget is {budget} bytes")]
    Capacity { needed: u64, budget: u64 },
    #[error("grid misaligned with lattice: {0}")]
    Alignment(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("gap undefined for a point set with {0} element(s)")]
    UndefinedGap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
