use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Vector;

pub type Result<T, E = FabricError> = std::result::Result<T, E>;

/// Position/velocity snapshot attached to evaluation errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl State {
    pub fn new(x: &Vector, xd: &Vector) -> Self {
        Self {
            position: x.iter().copied().collect(),
            velocity: xd.iter().copied().collect(),
        }
    }

    pub fn position_only(x: &Vector) -> Self {
        Self {
            position: x.iter().copied().collect(),
            velocity: Vec::new(),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={:?}", self.position)?;
        if !self.velocity.is_empty() {
            write!(f, " xd={:?}", self.velocity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FabricError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite {what} at {state}")]
    NonFinite { what: &'static str, state: State },
    #[error("transform tree has no leaves")]
    EmptyTree,
    #[error("nothing to combine: {0}")]
    Empty(&'static str),
    #[error("velocity is zero; {0} is undefined")]
    ZeroVelocity(&'static str),
    #[error("{what} is not differentiable at {state}")]
    NonDifferentiable { what: &'static str, state: State },
    #[error("boundary violation in {what} at {state}")]
    BoundaryViolation { what: &'static str, state: State },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown {category} kind `{kind}`")]
    UnknownKind {
        category: &'static str,
        kind: String,
    },
    #[error("rank-deficient metric at {state}")]
    RankDeficient { state: State },
    #[error("finite-difference oracle hit a non-finite Lagrangian at {state}")]
    OracleEvaluation { state: State },
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FabricError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn check_state(context: &'static str, dim: usize, x: &Vector, xd: &Vector) -> Result<()> {
    check_dim(context, dim, x.len())?;
    check_dim(context, dim, xd.len())
}
