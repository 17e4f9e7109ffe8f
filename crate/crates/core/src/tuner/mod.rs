//! N-Tuple Bandit Evolutionary Algorithm over a [`ParameterSpace`](crate::params::ParameterSpace).

mod model;
mod problem;
mod search;

pub use model::{ucb, NTupleModel, TupleStats, OPTIMISTIC_MEAN};
pub use problem::{AgentTuningProblem, OneMax, TuningProblem};
pub use search::{
    format_log, model_from_log, neighbours, parse_log, recommend, run_ntbea, LogEntry, Ntbea,
    NtbeaConfig, NtbeaRun, TuneError,
};
