use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid offspring law: {0}")]
    InvalidOffspring(String),

    #[error("resolvent kernel is singular at coincident points in dimension {0}")]
    SingularKernel(usize),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("Perron root is not strictly decreasing in s near s = {0}")]
    NonMonotonePerron(f64),

    #[error("eigen solver did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("population cap of {cap} particles exceeded at t = {time}")]
    PopulationCap { cap: usize, time: f64 },

    #[error("non-positive value {value} at t = {time} inside the fit window")]
    NonPositiveSeries { time: f64, value: f64 },

    #[error("fit window [{0}, {1}] holds fewer than two points")]
    EmptyWindow(f64, f64),

    #[error("maximum principle violated by {0:e}")]
    MaximumPrinciple(f64),

    #[error("mollified potential mass {actual} differs from target {target}")]
    MassMismatch { target: f64, actual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
