use thiserror::Error;

use crate::planner::PlanningFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("planning failed: {0}")]
    PlanningFailed(#[from] PlanningFailure),

    #[error("iteration budget of {0} control ticks exceeded")]
    IterationBudgetExceeded(usize),

    #[error("object dropped: {0}")]
    Dropped(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
