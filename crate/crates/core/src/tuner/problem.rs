use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::game::{GameSpec, ScoreBounds};
use crate::learner::ModelHandle;
use crate::params::{ParameterSet, ParameterSpace};
use crate::planner::{play_episode, Guide, Rhea, RheaConfig};

/// A noisy objective over a parameter space. Implementations draw any
/// randomness from their own seeded stream.
pub trait TuningProblem {
    fn space(&self) -> &ParameterSpace;
    /// Reward in `[0, 1]`.
    fn evaluate(&mut self, point: &ParameterSet) -> f64;
}

/// Fraction of dimensions at their highest value, plus optional Gaussian
/// noise, clipped to `[0, 1]`. Binary dimensions give the classic OneMax.
#[derive(Clone, Debug)]
pub struct OneMax {
    space: ParameterSpace,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl OneMax {
    pub fn new(dims: usize, sigma: f64, seed: u64) -> Self {
        Self {
            space: ParameterSpace::from_arities(&vec![2; dims]),
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Noise-free value of `point`.
    pub fn true_value(&self, point: &ParameterSet) -> f64 {
        let arities = self.space.arities();
        let ones = (0..arities.len())
            .filter(|&d| point.index(d) + 1 == arities[d])
            .count();
        ones as f64 / arities.len().max(1) as f64
    }
}

impl TuningProblem for OneMax {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&mut self, point: &ParameterSet) -> f64 {
        let v = self.true_value(point);
        if self.sigma == 0.0 {
            return v;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        (v + self.sigma * z).clamp(0.0, 1.0)
    }
}

/// Mean episode fitness of the planner configured by each point on one game.
#[derive(Clone, Debug)]
pub struct AgentTuningProblem {
    space: ParameterSpace,
    game: Arc<GameSpec>,
    episodes: usize,
    model: Option<ModelHandle>,
    rng: ChaCha8Rng,
}

impl AgentTuningProblem {
    pub fn new(space: ParameterSpace, game: Arc<GameSpec>, episodes: usize, seed: u64) -> Self {
        Self {
            space,
            game,
            episodes: episodes.max(1),
            model: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Guides nn-seeded and nn-weighted configurations with `model`.
    pub fn with_model(mut self, model: ModelHandle) -> Self {
        self.model = Some(model);
        self
    }
}

impl TuningProblem for AgentTuningProblem {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Invalid configurations and planner errors score 0.
    fn evaluate(&mut self, point: &ParameterSet) -> f64 {
        let Ok(cfg) = RheaConfig::from_params(&self.space, point) else {
            return 0.0;
        };
        let guide = self.model.as_ref().map(|m| m as &dyn Guide);
        let mut total = 0.0;
        for _ in 0..self.episodes {
            let mut planner = Rhea::new(cfg.clone(), self.rng.gen());
            let seed = self.rng.gen();
            let mut bounds = ScoreBounds::for_spec(&self.game);
            match play_episode(&self.game, &mut planner, guide, seed, &mut bounds, |_, _, _| {}) {
                Ok(o) => total += o.fitness,
                Err(_) => return 0.0,
            }
        }
        total / self.episodes as f64
    }
}
