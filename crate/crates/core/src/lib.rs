//! Maslow's gridworld: a needs-driven agent simulator, environment builders,
//! black-box environment optimizers and the language-model pipelines that
//! evaluate care, respect and knowledge on top of it.
//!
//! The simulator is deterministic given its seeds, so every experiment in the
//! crate can be replayed exactly. Language-model calls go through the
//! [`lmkit::Provider`] trait, which has both a live HTTP implementation and
//! scripted offline mocks.

pub mod attachment;
pub mod engine;
pub mod envgen;
pub mod lmkit;
pub mod narrate;
pub mod optimize;
pub mod stats;

pub use engine::{
    compute_engagement, compute_flourishing, run_simulation, Activity, AgentState, Cell,
    EngagementScope, EnvironmentSpec, NeedKind, Pos, RunRecord, SimConfig, Simulation, StepEvent,
};
pub use envgen::EnvGenome;

pub use optimize::{GaConfig, Objective};
