//! Rolling horizon evolution over action sequences, with optional guidance
//! from a policy/value model.

mod config;
mod episode;
mod fingerprint;
mod rhea;

pub use config::{Crossover, InitMode, LearnerConfig, MutationMode, RheaConfig, Selection, ValueMode};
pub use episode::{play_episode, EpisodeOutcome};
pub use fingerprint::AgentFingerprint;
pub use rhea::{
    blend_fitness, mutation_distribution, Fallback, Guide, Individual, PlanError, PlanStats,
    PlannerEvent, Population, Rhea,
};
