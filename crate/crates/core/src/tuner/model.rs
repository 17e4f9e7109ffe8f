use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::params::ParameterSet;

/// Visit count and reward sum for one value combination of a tuple.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TupleStats {
    pub n: u64,
    pub sum: f64,
}

impl TupleStats {
    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Value of an unvisited combination.
pub const OPTIMISTIC_MEAN: f64 = 0.5;

/// Upper confidence bound `mean + k·sqrt(ln(total + 1) / (n + eps))`, with an
/// unvisited combination's mean taken as [`OPTIMISTIC_MEAN`].
pub fn ucb(stats: TupleStats, total: u64, k: f64, eps: f64) -> f64 {
    let mean = stats.mean().unwrap_or(OPTIMISTIC_MEAN);
    if k == 0.0 {
        return mean;
    }
    mean + k * (((total + 1) as f64).ln() / (stats.n as f64 + eps)).sqrt()
}

/// Statistics over every 1-tuple, every 2-tuple and the full tuple of a
/// space's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct NTupleModel {
    tuples: Vec<Vec<usize>>,
    stats: Vec<HashMap<Vec<usize>, TupleStats>>,
    total: u64,
}

impl NTupleModel {
    pub fn new(dims: usize) -> Self {
        let mut tuples: Vec<Vec<usize>> = (0..dims).map(|d| vec![d]).collect();
        for a in 0..dims {
            for b in a + 1..dims {
                tuples.push(vec![a, b]);
            }
        }
        if dims > 2 {
            tuples.push((0..dims).collect());
        }
        let stats = vec![HashMap::new(); tuples.len()];
        Self { tuples, stats, total: 0 }
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn key(tuple: &[usize], point: &ParameterSet) -> Vec<usize> {
        tuple.iter().map(|&d| point.index(d)).collect()
    }

    /// Stats of tuple `t` for the combination `point` takes on it.
    pub fn stats(&self, t: usize, point: &ParameterSet) -> TupleStats {
        self.stats[t]
            .get(&Self::key(&self.tuples[t], point))
            .copied()
            .unwrap_or_default()
    }

    /// All recorded combinations of tuple `t`.
    pub fn combinations(&self, t: usize) -> impl Iterator<Item = (&Vec<usize>, &TupleStats)> {
        self.stats[t].iter()
    }

    /// Records one evaluation.
    ///
    /// # Panics
    /// If `reward` is not finite.
    pub fn update(&mut self, point: &ParameterSet, reward: f64) {
        assert!(reward.is_finite(), "reward must be finite, got {reward}");
        for (tuple, map) in self.tuples.iter().zip(&mut self.stats) {
            let e = map.entry(Self::key(tuple, point)).or_default();
            e.n += 1;
            e.sum += reward;
        }
        self.total += 1;
    }

    /// Mean over tuples of each tuple's UCB for `point`.
    pub fn mean_ucb(&self, point: &ParameterSet, k: f64, eps: f64) -> f64 {
        if self.tuples.is_empty() {
            return OPTIMISTIC_MEAN;
        }
        let sum: f64 = (0..self.tuples.len())
            .map(|t| ucb(self.stats(t, point), self.total, k, eps))
            .sum();
        sum / self.tuples.len() as f64
    }

    /// Model-estimated value of `point`: the mean of its tuple means.
    pub fn estimate(&self, point: &ParameterSet) -> f64 {
        self.mean_ucb(point, 0.0, 0.0)
    }
}
