//! Discrete surrogate of the robotic disassembler compartment.
//!
//! Four grid tasks of increasing difficulty keep the combinatorial structure
//! of the physical ones: stacked parts, obstacles to clear, and a chassis
//! that must not be touched. A tabular goal-conditioned learner trains on
//! them, an exact planner provides optimal reference plans, and evaluation
//! turns any controller into the success percentage and disassembly time
//! consumed by the circularity engine.

pub mod controller;
pub mod env;
pub mod eval;
pub mod learner;
pub mod oracle;
pub mod policy;
pub mod task;

use thiserror::Error;

pub use controller::{
    Controller, ControllerRegistry, GreedyController, OracleController, RandomController,
};
pub use env::{make_env, Action, Env, EnvError, EnvState, Goal, Step};
pub use eval::{evaluate, Evaluation, EVAL_EPISODES, EVAL_SEED, SECONDS_PER_STEP};
pub use learner::{Learner, LearnerRegistry, Relabel, TabularQ, TrainConfig, TrainingStats};
pub use oracle::{plan_oracle, OracleError, OraclePlan};
pub use policy::{Policy, PolicyError};
pub use task::{Material, PartRole, PartSpec, TaskKind, TaskSpec};

#[derive(Debug, Error)]
pub enum DisassemblerError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Outcome(#[from] tmn_core::FlowError),
    #[error("evaluation needs at least one episode")]
    NoEpisodes,
    #[error("unknown controller `{0}`")]
    UnknownController(String),
    #[error("unknown learner `{0}`")]
    UnknownLearner(String),
}
