use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::rhea::{Guide, PlanError, Population, Rhea};
use crate::game::{heuristic_value, Action, GameSpec, GameState, ScoreBounds, Status};

/// What happened in one played episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub actions: Vec<Action>,
    pub status: Status,
    pub score: i64,
    pub ticks: u32,
    /// Heuristic value of the final state against the level's score range.
    pub fitness: f64,
}

/// Plays `spec` from `seed` to a terminal state, one planner decision per
/// tick. `bounds` are the game's lifetime score bounds; they widen with the
/// scores the planner sees. `observe` gets each state with the chosen action
/// and the population that chose it, before the action is applied.
pub fn play_episode(
    spec: &Arc<GameSpec>,
    planner: &mut Rhea,
    guide: Option<&dyn Guide>,
    seed: u64,
    bounds: &mut ScoreBounds,
    mut observe: impl FnMut(&GameState, Action, &Population),
) -> Result<EpisodeOutcome, PlanError> {
    planner.reset();
    let mut state = GameState::load(Arc::clone(spec), seed);
    let mut actions = Vec::new();
    while !state.is_terminal() {
        let a = planner.plan_action(&state, guide, bounds)?;
        if let Some(pop) = planner.population() {
            observe(&state, a, pop);
        }
        state.step(a).expect("running state advances");
        actions.push(a);
    }
    bounds.include(state.score());
    Ok(EpisodeOutcome {
        seed,
        actions,
        status: state.status(),
        score: state.score(),
        ticks: state.tick(),
        fitness: heuristic_value(&state, &ScoreBounds::for_spec(spec)),
    })
}
