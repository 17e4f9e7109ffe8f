use serde::{Deserialize, Serialize};

use crate::params::{ParamError, ParameterSet, ParameterSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossover {
    None,
    Uniform,
    OnePoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    Uniform,
    NnSeeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationMode {
    Uniform,
    NnWeighted,
}

/// Parent selection. All schemes only look at fitness ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    Tournament,
    Rank,
    Truncation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueMode {
    Final,
    BestSeen,
}

/// Typed view of the planner half of a [`ParameterSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RheaConfig {
    pub population_size: usize,
    pub individual_length: usize,
    pub mutation_rate: f64,
    pub crossover: Crossover,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub shift_buffer: bool,
    pub rollout_length: usize,
    pub init_mode: InitMode,
    pub mutation_mode: MutationMode,
    pub alpha: f64,
    /// Forward-model calls per `plan_action`.
    pub budget: usize,
    pub tournament_size: usize,
    pub win_discount: f64,
    pub selection: Selection,
    pub evaluation_repeats: usize,
    pub value_mode: ValueMode,
    pub force_mutation: bool,
    pub reevaluate_elites: bool,
    pub nn_temperature: f64,
    pub terminal_value_override: bool,
}

impl Default for RheaConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            individual_length: 8,
            mutation_rate: 0.3,
            crossover: Crossover::Uniform,
            crossover_rate: 1.0,
            elitism: 2,
            shift_buffer: true,
            rollout_length: 0,
            init_mode: InitMode::Uniform,
            mutation_mode: MutationMode::Uniform,
            alpha: 0.0,
            budget: 200,
            tournament_size: 3,
            win_discount: 1e-4,
            selection: Selection::Tournament,
            evaluation_repeats: 1,
            value_mode: ValueMode::Final,
            force_mutation: true,
            reevaluate_elites: false,
            nn_temperature: 1.0,
            terminal_value_override: false,
        }
    }
}

struct Lookup<'a> {
    space: &'a ParameterSpace,
    set: &'a ParameterSet,
}

impl Lookup<'_> {
    fn value(&self, name: &str) -> Result<&crate::params::ParamValue, ParamError> {
        self.set
            .get(self.space, name)
            .ok_or_else(|| ParamError::UnknownParameter(name.to_string()))
    }

    fn int(&self, name: &str) -> Result<usize, ParamError> {
        let v = self.value(name)?;
        v.as_i64()
            .and_then(|i| usize::try_from(i).ok())
            .ok_or_else(|| invalid(name, v))
    }

    fn float(&self, name: &str) -> Result<f64, ParamError> {
        let v = self.value(name)?;
        v.as_f64().ok_or_else(|| invalid(name, v))
    }

    fn choice(&self, name: &str) -> Result<&str, ParamError> {
        let v = self.value(name)?;
        v.as_str().ok_or_else(|| invalid(name, v))
    }

    fn flag(&self, name: &str) -> Result<bool, ParamError> {
        match self.choice(name)? {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(invalid(name, &other.into())),
        }
    }
}

fn invalid(name: &str, v: &crate::params::ParamValue) -> ParamError {
    ParamError::InvalidValue {
        name: name.to_string(),
        value: v.to_string(),
    }
}

impl RheaConfig {
    pub fn from_params(space: &ParameterSpace, set: &ParameterSet) -> Result<Self, ParamError> {
        let p = Lookup { space, set };
        let pick = |name: &str, options: &[&str]| -> Result<usize, ParamError> {
            let c = p.choice(name)?;
            options
                .iter()
                .position(|o| *o == c)
                .ok_or_else(|| invalid(name, &c.into()))
        };
        Ok(Self {
            population_size: p.int("population_size")?,
            individual_length: p.int("individual_length")?,
            mutation_rate: p.float("mutation_rate")?,
            crossover: [Crossover::None, Crossover::Uniform, Crossover::OnePoint]
                [pick("crossover", &["none", "uniform", "one-point"])?],
            crossover_rate: p.float("crossover_rate")?,
            elitism: p.int("elitism")?,
            shift_buffer: p.flag("shift_buffer")?,
            rollout_length: p.int("rollout_length")?,
            init_mode: [InitMode::Uniform, InitMode::NnSeeded]
                [pick("init_mode", &["uniform", "nn-seeded"])?],
            mutation_mode: [MutationMode::Uniform, MutationMode::NnWeighted]
                [pick("mutation_mode", &["uniform", "nn-weighted"])?],
            alpha: p.float("alpha")?,
            budget: p.int("budget")?,
            tournament_size: p.int("tournament_size")?,
            win_discount: p.float("win_discount")?,
            selection: [Selection::Tournament, Selection::Rank, Selection::Truncation]
                [pick("selection", &["tournament", "rank", "truncation"])?],
            evaluation_repeats: p.int("evaluation_repeats")?,
            value_mode: [ValueMode::Final, ValueMode::BestSeen]
                [pick("value_mode", &["final", "best-seen"])?],
            force_mutation: p.flag("force_mutation")?,
            reevaluate_elites: p.flag("reevaluate_elites")?,
            nn_temperature: p.float("nn_temperature")?,
            terminal_value_override: p.flag("terminal_value_override")?,
        })
    }

    /// Simulation steps of one full evaluation.
    pub fn horizon(&self) -> usize {
        self.individual_length + self.rollout_length
    }
}

/// Typed view of the learner half of a [`ParameterSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub batches_per_episode: usize,
    pub replay_capacity: usize,
    pub weight_decay: f64,
    pub value_loss_weight: f64,
    pub best_only_policy_target: bool,
    pub training_warmup: usize,
    pub momentum: f64,
}

impl LearnerConfig {
    pub fn from_params(space: &ParameterSpace, set: &ParameterSet) -> Result<Self, ParamError> {
        let p = Lookup { space, set };
        Ok(Self {
            hidden1: p.int("hidden1")?,
            hidden2: p.int("hidden2")?,
            learning_rate: p.float("learning_rate")?,
            batch_size: p.int("batch_size")?,
            batches_per_episode: p.int("batches_per_episode")?,
            replay_capacity: p.int("replay_capacity")?,
            weight_decay: p.float("weight_decay")?,
            value_loss_weight: p.float("value_loss_weight")?,
            best_only_policy_target: p.choice("policy_target")? == "best-only",
            training_warmup: p.int("training_warmup")?,
            momentum: p.float("momentum")?,
        })
    }

    pub fn train_options(&self) -> crate::learner::TrainOptions {
        crate::learner::TrainOptions {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            value_loss_weight: self.value_loss_weight,
            momentum: self.momentum,
        }
    }
}
