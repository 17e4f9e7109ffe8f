use crate::game::{heuristic_value, GameState, GridObservation, ScoreBounds, SpriteKind, Status};

pub type FeatureVector = Vec<f64>;

/// Trailing scalar features appended to the one-hot grid planes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateScalars {
    /// `tick / timeout`
    pub tick: f64,
    /// Heuristic value of the state treated as running.
    pub score: f64,
    pub key_held: bool,
}

impl StateScalars {
    pub fn of(state: &GameState, bounds: &ScoreBounds) -> Self {
        let timeout = state.spec().timeout().max(1) as f64;
        let score = match state.status() {
            Status::Running => heuristic_value(state, bounds),
            _ => crate::game::running_value(state.score(), bounds),
        };
        Self {
            tick: (state.tick() as f64 / timeout).min(1.0),
            score,
            key_held: state.key_held(),
        }
    }
}

pub const SCALAR_FEATURES: usize = 3;

pub fn feature_len(width: usize, height: usize) -> usize {
    width * height * SpriteKind::COUNT + SCALAR_FEATURES
}

/// Plane-major one-hot encoding: entry `k·W·H + y·W + x` is 1 when a sprite of
/// kind `k` occupies `(x, y)`.
pub fn featurize(obs: &GridObservation, scalars: StateScalars) -> FeatureVector {
    let area = obs.width * obs.height;
    let mut v = vec![0.0; feature_len(obs.width, obs.height)];
    for (cell, &bits) in obs.cells.iter().enumerate() {
        for k in 0..SpriteKind::COUNT {
            if bits & (1 << k) != 0 {
                v[k * area + cell] = 1.0;
            }
        }
    }
    let base = area * SpriteKind::COUNT;
    v[base] = scalars.tick;
    v[base + 1] = scalars.score;
    v[base + 2] = if scalars.key_held { 1.0 } else { 0.0 };
    v
}

pub fn featurize_state(state: &GameState, bounds: &ScoreBounds) -> FeatureVector {
    featurize(&state.observe(), StateScalars::of(state, bounds))
}
