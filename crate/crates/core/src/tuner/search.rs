use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::NTupleModel;
use super::problem::TuningProblem;
use crate::params::{ParamError, ParameterSet, ParameterSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtbeaConfig {
    /// Exploration weight in the UCB.
    pub k: f64,
    /// Neighbours scored per iteration.
    pub neighbours: usize,
    /// Evaluations of the problem.
    pub evaluations: usize,
    pub seed: u64,
    /// Per-dimension probability of changing when generating a neighbour.
    pub resample_rate: f64,
    /// Added to visit counts in the UCB so unvisited combinations stay finite.
    pub epsilon: f64,
}

impl Default for NtbeaConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            neighbours: 50,
            evaluations: 200,
            seed: 0,
            resample_rate: 0.3,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("log line {line}: {msg}")]
    Log { line: usize, msg: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Copies of `point` with each dimension changed (to a different value) with
/// probability `rate`; a neighbour that came out unchanged gets one random
/// dimension changed. Dimensions with a single value never change.
pub fn neighbours<R: Rng + ?Sized>(
    point: &ParameterSet,
    space: &ParameterSpace,
    count: usize,
    rate: f64,
    rng: &mut R,
) -> Vec<ParameterSet> {
    let arities = space.arities();
    let mutable: Vec<usize> = (0..arities.len()).filter(|&d| arities[d] > 1).collect();
    let change = |p: &mut ParameterSet, d: usize, rng: &mut R| {
        let cur = p.index(d);
        let v = rng.gen_range(0..arities[d] - 1);
        p.set_index(d, if v >= cur { v + 1 } else { v });
    };
    (0..count)
        .map(|_| {
            let mut p = point.clone();
            let mut changed = false;
            for &d in &mutable {
                if rng.gen_bool(rate) {
                    change(&mut p, d, rng);
                    changed = true;
                }
            }
            if !changed && !mutable.is_empty() {
                let d = mutable[rng.gen_range(0..mutable.len())];
                change(&mut p, d, rng);
            }
            p
        })
        .collect()
}

/// One line of the tuning run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: usize,
    pub point: ParameterSet,
    pub reward: f64,
}

impl LogEntry {
    /// `index, v1 v2 …, reward`, values in registry order.
    pub fn to_line(&self, space: &ParameterSpace) -> String {
        let mut out = format!("{}, ", self.index);
        for (i, v) in self.point.values(space).iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        let _ = write!(out, ", {}", self.reward);
        out
    }
}

pub fn format_log(space: &ParameterSpace, entries: &[LogEntry]) -> String {
    entries
        .iter()
        .map(|e| e.to_line(space) + "\n")
        .collect()
}

pub fn parse_log(space: &ParameterSpace, text: &str) -> Result<Vec<LogEntry>, TuneError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| TuneError::Log {
            line: i + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split(',').map(str::trim);
        let (Some(idx), Some(values), Some(reward), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(err("expected three comma-separated fields"));
        };
        let index = idx.parse().map_err(|_| err("bad evaluation index"))?;
        let reward: f64 = reward.parse().map_err(|_| err("bad reward"))?;
        let texts: Vec<&str> = values.split_whitespace().collect();
        if texts.len() != space.len() {
            return Err(err(&format!(
                "{} values for {} parameters",
                texts.len(),
                space.len()
            )));
        }
        let indices = texts
            .iter()
            .enumerate()
            .map(|(d, t)| {
                space
                    .def(d)
                    .position_of(t)
                    .ok_or_else(|| err(&format!("`{t}` is not a value of `{}`", space.def(d).name)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(LogEntry {
            index,
            point: ParameterSet::from_indices(space, indices)?,
            reward,
        });
    }
    Ok(out)
}

/// Replays a log into a fresh model.
pub fn model_from_log(dims: usize, entries: &[LogEntry]) -> NTupleModel {
    let mut m = NTupleModel::new(dims);
    for e in entries {
        m.update(&e.point, e.reward);
    }
    m
}

/// Among `evaluated` points (in evaluation order), the one with the highest
/// model estimate; the earliest wins ties.
pub fn recommend(model: &NTupleModel, evaluated: &[ParameterSet]) -> Option<ParameterSet> {
    let mut best: Option<(&ParameterSet, f64)> = None;
    for p in evaluated {
        let v = model.estimate(p);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((p, v));
        }
    }
    best.map(|(p, _)| p.clone())
}

/// Incremental tuner: the caller evaluates [`Ntbea::current`] however it
/// likes and reports the reward with [`Ntbea::record`].
#[derive(Clone, Debug)]
pub struct Ntbea {
    cfg: NtbeaConfig,
    space: ParameterSpace,
    rng: ChaCha8Rng,
    model: NTupleModel,
    current: ParameterSet,
    log: Vec<LogEntry>,
}

impl Ntbea {
    /// Starts from `start`, or a random point drawn from the tuner's rng.
    pub fn new(space: ParameterSpace, cfg: NtbeaConfig, start: Option<ParameterSet>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let current = start.unwrap_or_else(|| space.random_set(&mut rng));
        Self {
            model: NTupleModel::new(space.len()),
            cfg,
            space,
            rng,
            current,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &NtbeaConfig {
        &self.cfg
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn current(&self) -> &ParameterSet {
        &self.current
    }

    pub fn model(&self) -> &NTupleModel {
        &self.model
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Records `reward` for the current point, then moves to the neighbour
    /// with the highest mean UCB (first one on ties).
    pub fn record(&mut self, reward: f64) {
        self.model.update(&self.current, reward);
        self.log.push(LogEntry {
            index: self.log.len(),
            point: self.current.clone(),
            reward,
        });
        let candidates = neighbours(
            &self.current,
            &self.space,
            self.cfg.neighbours.max(1),
            self.cfg.resample_rate,
            &mut self.rng,
        );
        let mut best: Option<(ParameterSet, f64)> = None;
        for c in candidates {
            let v = self.model.mean_ucb(&c, self.cfg.k, self.cfg.epsilon);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((c, v));
            }
        }
        if let Some((c, _)) = best {
            self.current = c;
        }
    }

    /// Best evaluated point so far, if any.
    pub fn recommend(&self) -> Option<ParameterSet> {
        let points: Vec<ParameterSet> = self.log.iter().map(|e| e.point.clone()).collect();
        recommend(&self.model, &points)
    }
}

/// Result of a complete tuning run.
#[derive(Clone, Debug)]
pub struct NtbeaRun {
    pub recommended: ParameterSet,
    pub model: NTupleModel,
    pub log: Vec<LogEntry>,
}

/// Evaluates `cfg.evaluations` points (at least one) and recommends one.
pub fn run_ntbea(problem: &mut dyn TuningProblem, cfg: &NtbeaConfig) -> NtbeaRun {
    let mut t = Ntbea::new(problem.space().clone(), cfg.clone(), None);
    for _ in 0..cfg.evaluations.max(1) {
        let point = t.current().clone();
        let reward = problem.evaluate(&point);
        t.record(reward);
    }
    NtbeaRun {
        recommended: t.recommend().expect("at least one evaluation"),
        model: t.model,
        log: t.log,
    }
}
