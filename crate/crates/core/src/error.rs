//! Crate-wide error type.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// Two traces (or a trace and a kernel) do not share a time grid.
    #[error("incompatible time grids: {0}")]
    Grid(&'static str),
    /// A scenario or block configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Layout synthesis could not satisfy the request.
    #[error("synthesis error: {0}")]
    Synthesis(String),
    /// A layout edge connects incompatible endpoints.
    #[error("wiring error: {0}")]
    Wiring(String),
    /// A numerical routine failed to converge or left its valid regime.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
