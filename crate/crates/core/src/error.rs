use std::fmt;

use thiserror::Error;

/// One problem found while validating a network file.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub item: String,
    pub message: String,
}

impl Violation {
    pub fn new(item: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            item: item.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.item, self.message)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read network: {0}")]
    Io(String),
    #[error("malformed network JSON: {0}")]
    Parse(String),
    #[error("invalid network ({} problems): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Milp(#[from] gridplan_milp::MilpError),
    #[error("{0} has no feasible solution")]
    Infeasible(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}
