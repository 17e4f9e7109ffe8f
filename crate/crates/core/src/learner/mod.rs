//! Per-game policy/value model, its training data and its file format.

mod features;
mod io;
mod model;
mod policy;
mod replay;

use std::sync::Arc;

pub use features::{feature_len, featurize, featurize_state, FeatureVector, StateScalars, SCALAR_FEATURES};
pub use io::{decode_model, encode_model, load_model, load_model_for, save_model, MAGIC};
pub use model::{param_count, LearnError, ModelWeights, Sgd, TrainOptions, TrainingExample};
pub use policy::{sigmoid, softmax, PolicyDistribution, ValueEstimate};
pub use replay::{policy_target, policy_target_best, record_episode, ReplayBuffer};

use crate::game::{GameSpec, GameState, ScoreBounds};
use crate::planner::Guide;

/// Input width of a model for `spec`.
pub fn input_len_for(spec: &GameSpec) -> usize {
    feature_len(spec.width, spec.height)
}

/// An immutable model version bound to the score bounds used to featurise
/// states. Planners receive this as their guide.
#[derive(Clone, Debug)]
pub struct ModelHandle {
    pub weights: Arc<ModelWeights>,
    pub bounds: ScoreBounds,
}

impl ModelHandle {
    pub fn new(weights: Arc<ModelWeights>, bounds: ScoreBounds) -> Self {
        Self { weights, bounds }
    }
}

impl Guide for ModelHandle {
    fn policy_value(&self, state: &GameState) -> (PolicyDistribution, f64) {
        let f = featurize_state(state, &self.bounds);
        let (p, v) = self
            .weights
            .predict(&f)
            .expect("model dimensions match its game");
        (p, v.0)
    }
}
