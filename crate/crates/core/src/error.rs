use alloc::vec::Vec;
use core::fmt;

/// Failure modes of the avoidance primitives.
///
/// None of these carry a recovery velocity: the caller decides what to do
/// when the agent ends up inside an obstacle or in contact with the scan.
#[derive(Debug, Clone, PartialEq)]
pub enum AvoidError {
    /// Query coincides with an obstacle's reference point, where Gamma and
    /// the reference direction are undefined.
    GammaSingularity,
    /// The query lies on or inside the (margin-inflated) surface of the
    /// obstacle with the given index.
    InsideObstacle {
        index: usize,
    },
    /// Sampled points closer than the agent radius.
    Contact {
        indices: Vec<usize>,
    },
    InvalidConfig(&'static str),
    InvalidShape(&'static str),
}

impl fmt::Display for AvoidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AvoidError::GammaSingularity => write!(f, "gamma-singularity: query at reference point"),
            AvoidError::InsideObstacle { index } => {
                write!(f, "inside-obstacle: query is not exterior to obstacle {index}")
            }
            AvoidError::Contact { indices } => {
                write!(f, "contact: {} sampled point(s) within the agent radius", indices.len())
            }
            AvoidError::InvalidConfig(msg) => write!(f, "invalid agent config: {msg}"),
            AvoidError::InvalidShape(msg) => write!(f, "invalid obstacle shape: {msg}"),
        }
    }
}

impl core::error::Error for AvoidError {}

pub type Result<T> = core::result::Result<T, AvoidError>;
