//! Registry of tunable parameters shared by the planner, the learner and the
//! tuner.
//!
//! A [`ParameterSpace`] is an ordered list of parameters, each with a finite
//! list of admissible values. A [`ParameterSet`] picks one value index per
//! parameter. New parameters can be appended without disturbing the indices of
//! existing ones, and text-encoded sets that predate a parameter load it at its
//! default.

use std::fmt::{self, Write as _};

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Float(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Choice(s) => Some(s),
            _ => None,
        }
    }

    fn matches(&self, text: &str) -> bool {
        match self {
            ParamValue::Int(v) => text.parse::<i64>().is_ok_and(|t| t == *v),
            ParamValue::Float(v) => text.parse::<f64>().is_ok_and(|t| t == *v),
            ParamValue::Choice(s) => s == text,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Choice(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Choice(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub values: Vec<ParamValue>,
    pub default: usize,
    pub doc: String,
}

impl ParamDef {
    pub fn new(name: &str, values: Vec<ParamValue>, default: usize, doc: &str) -> Self {
        assert!(!values.is_empty(), "parameter {name} has no values");
        assert!(default < values.len(), "parameter {name} default out of range");
        Self {
            name: name.to_string(),
            values,
            default,
            doc: doc.to_string(),
        }
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }

    /// Index of the value whose text form is `text`.
    pub fn position_of(&self, text: &str) -> Option<usize> {
        self.values.iter().position(|v| v.matches(text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("`{value}` is not an admissible value for `{name}`")]
    InvalidValue { name: String, value: String },
    #[error("parameter `{0}` registered twice")]
    DuplicateName(String),
    #[error("line {0}: expected `name = value`")]
    Syntax(usize),
    #[error("parameter set has {found} entries, space has {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    defs: Vec<ParamDef>,
}

impl ParameterSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, def: ParamDef) -> Result<(), ParamError> {
        if self.index_of(&def.name).is_some() {
            return Err(ParamError::DuplicateName(def.name));
        }
        self.defs.push(def);
        Ok(())
    }

    pub fn with(mut self, def: ParamDef) -> Self {
        self.push(def).expect("unique parameter names");
        self
    }

    /// A space of unnamed-value integer dimensions `0..arity`, handy for
    /// synthetic problems.
    pub fn from_arities(arities: &[usize]) -> Self {
        arities.iter().enumerate().fold(Self::new(), |s, (i, &a)| {
            s.with(ParamDef::new(
                &format!("x{i}"),
                (0..a as i64).map(ParamValue::Int).collect(),
                0,
                "",
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[ParamDef] {
        &self.defs
    }

    pub fn def(&self, dim: usize) -> &ParamDef {
        &self.defs[dim]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    pub fn arities(&self) -> Vec<usize> {
        self.defs.iter().map(ParamDef::arity).collect()
    }

    /// Exact number of distinct parameter sets.
    pub fn cardinality(&self) -> BigUint {
        self.defs
            .iter()
            .fold(BigUint::from(1u32), |acc, d| acc * BigUint::from(d.arity()))
    }

    pub fn default_set(&self) -> ParameterSet {
        ParameterSet {
            indices: self.defs.iter().map(|d| d.default).collect(),
        }
    }

    pub fn random_set<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterSet {
        ParameterSet {
            indices: self.defs.iter().map(|d| rng.gen_range(0..d.arity())).collect(),
        }
    }

    /// Markdown table documenting every registered parameter.
    pub fn reference_markdown(&self) -> String {
        let mut out = String::from("# Parameter reference\n\n");
        let _ = writeln!(
            out,
            "{} parameters, {} distinct configurations.\n",
            self.len(),
            self.cardinality()
        );
        out.push_str("| # | name | values | default | description |\n");
        out.push_str("|---|------|--------|---------|-------------|\n");
        for (i, d) in self.defs.iter().enumerate() {
            let values: Vec<String> = d.values.iter().map(|v| format!("`{v}`")).collect();
            let _ = writeln!(
                out,
                "| {i} | `{}` | {} | `{}` | {} |",
                d.name,
                values.join(", "),
                d.values[d.default],
                d.doc
            );
        }
        out
    }
}

/// One point of a [`ParameterSpace`]: a value index per dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParameterSet {
    indices: Vec<usize>,
}

impl ParameterSet {
    pub fn from_indices(space: &ParameterSpace, indices: Vec<usize>) -> Result<Self, ParamError> {
        if indices.len() != space.len() {
            return Err(ParamError::Dimension {
                expected: space.len(),
                found: indices.len(),
            });
        }
        for (d, &i) in space.defs.iter().zip(&indices) {
            if i >= d.arity() {
                return Err(ParamError::InvalidValue {
                    name: d.name.clone(),
                    value: format!("#{i}"),
                });
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn index(&self, dim: usize) -> usize {
        self.indices[dim]
    }

    pub fn set_index(&mut self, dim: usize, value: usize) {
        self.indices[dim] = value;
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get<'a>(&self, space: &'a ParameterSpace, name: &str) -> Option<&'a ParamValue> {
        let dim = space.index_of(name)?;
        Some(&space.defs[dim].values[self.indices[dim]])
    }

    pub fn set(
        &mut self,
        space: &ParameterSpace,
        name: &str,
        value: impl Into<ParamValue>,
    ) -> Result<(), ParamError> {
        let value = value.into();
        self.set_text(space, name, &value.to_string())
    }

    /// Builder form of [`ParameterSet::set`]; panics on invalid input.
    pub fn with(mut self, space: &ParameterSpace, name: &str, value: impl Into<ParamValue>) -> Self {
        self.set(space, name, value).unwrap_or_else(|e| panic!("{e}"));
        self
    }

    fn set_text(&mut self, space: &ParameterSpace, name: &str, text: &str) -> Result<(), ParamError> {
        let dim = space
            .index_of(name)
            .ok_or_else(|| ParamError::UnknownParameter(name.to_string()))?;
        let def = &space.defs[dim];
        let idx = def
            .position_of(text)
            .ok_or_else(|| ParamError::InvalidValue {
                name: name.to_string(),
                value: text.to_string(),
            })?;
        self.indices[dim] = idx;
        Ok(())
    }

    /// `name = value` per line, in registry order.
    pub fn to_text(&self, space: &ParameterSpace) -> String {
        let mut out = String::new();
        for (d, &i) in space.defs.iter().zip(&self.indices) {
            let _ = writeln!(out, "{} = {}", d.name, d.values[i]);
        }
        out
    }

    /// Parses `name = value` lines; parameters not mentioned take their
    /// default. Blank lines and `#` comments are skipped.
    pub fn from_text(space: &ParameterSpace, text: &str) -> Result<Self, ParamError> {
        let mut set = space.default_set();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or(ParamError::Syntax(i + 1))?;
            set.set_text(space, name.trim(), value.trim())?;
        }
        Ok(set)
    }

    /// Registry-ordered values, handy for logs.
    pub fn values<'a>(&self, space: &'a ParameterSpace) -> Vec<&'a ParamValue> {
        space
            .defs
            .iter()
            .zip(&self.indices)
            .map(|(d, &i)| &d.values[i])
            .collect()
    }
}

fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().copied().map(ParamValue::Int).collect()
}
fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().copied().map(ParamValue::Float).collect()
}
fn choices(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|s| ParamValue::Choice(s.to_string())).collect()
}

/// The shipped registry: planner parameters followed by learner parameters.
pub fn default_registry() -> ParameterSpace {
    ParameterSpace::new()
        // planner
        .with(ParamDef::new("population_size", ints(&[1, 2, 4, 5, 8, 10, 15, 20]), 5, "individuals per generation"))
        .with(ParamDef::new("individual_length", ints(&[1, 2, 4, 5, 6, 8, 10, 12, 15, 20]), 5, "genes (actions) per individual"))
        .with(ParamDef::new("mutation_rate", floats(&[0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]), 3, "per-gene mutation probability"))
        .with(ParamDef::new("crossover", choices(&["none", "uniform", "one-point"]), 1, "recombination operator"))
        .with(ParamDef::new("crossover_rate", floats(&[0.5, 0.8, 1.0]), 2, "probability an offspring is recombined rather than cloned"))
        .with(ParamDef::new("elitism", ints(&[0, 1, 2, 3]), 2, "best individuals copied unchanged into the next generation"))
        .with(ParamDef::new("shift_buffer", choices(&["off", "on"]), 1, "carry the population to the next tick, shifted by one gene"))
        .with(ParamDef::new("rollout_length", ints(&[0, 1, 2, 5, 10]), 0, "uniform-random actions appended when evaluating"))
        .with(ParamDef::new("init_mode", choices(&["uniform", "nn-seeded"]), 1, "initial population source"))
        .with(ParamDef::new("mutation_mode", choices(&["uniform", "nn-weighted"]), 0, "replacement-gene distribution"))
        .with(ParamDef::new("alpha", floats(&[0.0, 0.25, 0.5, 0.75, 1.0]), 1, "weight of the learned value in the fitness blend"))
        .with(ParamDef::new("budget", ints(&[10, 25, 50, 100, 200, 500, 1000]), 4, "forward-model calls per tick"))
        .with(ParamDef::new("tournament_size", ints(&[1, 2, 3, 5]), 2, "entrants per tournament"))
        .with(ParamDef::new("win_discount", floats(&[0.0, 1e-4, 1e-3]), 1, "per-step bonus preferring earlier wins"))
        .with(ParamDef::new("selection", choices(&["tournament", "rank", "truncation"]), 0, "parent selection scheme"))
        .with(ParamDef::new("evaluation_repeats", ints(&[1, 2, 3]), 0, "simulations averaged per evaluation"))
        .with(ParamDef::new("value_mode", choices(&["final", "best-seen"]), 0, "rollout value taken at the final state or the best visited state"))
        .with(ParamDef::new("force_mutation", choices(&["off", "on"]), 1, "mutate at least one gene of every offspring"))
        .with(ParamDef::new("reevaluate_elites", choices(&["off", "on"]), 0, "re-simulate elites every generation"))
        .with(ParamDef::new("nn_temperature", floats(&[0.5, 1.0, 2.0]), 1, "temperature applied to model policies before sampling"))
        .with(ParamDef::new("terminal_value_override", choices(&["off", "on"]), 0, "use the true outcome instead of the model value at terminal states"))
        // learner
        .with(ParamDef::new("hidden1", ints(&[32, 64]), 0, "first hidden layer width"))
        .with(ParamDef::new("hidden2", ints(&[32, 64]), 0, "second hidden layer (shared trunk) width"))
        .with(ParamDef::new("learning_rate", floats(&[1e-3, 3e-3, 1e-2, 3e-2]), 2, "gradient-descent step size"))
        .with(ParamDef::new("batch_size", ints(&[16, 32, 64]), 1, "examples per training batch"))
        .with(ParamDef::new("batches_per_episode", ints(&[1, 2, 4, 8, 16]), 2, "training batches run after each episode"))
        .with(ParamDef::new("replay_capacity", ints(&[1000, 5000, 20000]), 1, "replay buffer size per game"))
        .with(ParamDef::new("weight_decay", floats(&[0.0, 1e-4, 1e-3]), 0, "L2 penalty coefficient"))
        .with(ParamDef::new("value_loss_weight", floats(&[0.5, 1.0, 2.0]), 1, "weight of the value loss term"))
        .with(ParamDef::new("policy_target", choices(&["fitness-weighted", "best-only"]), 0, "policy training target built from the final population"))
        .with(ParamDef::new("training_warmup", ints(&[32, 128, 512]), 0, "buffered examples required before training starts"))
        .with(ParamDef::new("momentum", floats(&[0.0, 0.5, 0.9]), 2, "velocity decay of the gradient-descent optimiser"))
}
