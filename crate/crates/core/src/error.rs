use thiserror::Error;

use crate::operators::{Benchmark, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate element geometry (|det J| = {det:e})")]
    DegenerateGeometry { det: f64 },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("variant {variant} is not defined for benchmark {bp}")]
    UnsupportedVariant { bp: Benchmark, variant: Variant },

    #[error("resource error: {0}")]
    Resource(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
