use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration diverged at step {step} (beta = {beta:?})")]
    Diverged { step: usize, beta: Option<f64> },

    #[error("grid of {samples} samples is too coarse for order {order} (need at least {required})")]
    Resolution {
        samples: usize,
        order: usize,
        required: usize,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("formula error: {0}")]
    Formula(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("solver did not converge (kkt residual {kkt_residual:.3e}, max violation {max_violation:.3e})")]
    NotConverged { kkt_residual: f64, max_violation: f64 },

    #[error("receding-horizon cycle {cycle}: {source}")]
    Cycle {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },
}
