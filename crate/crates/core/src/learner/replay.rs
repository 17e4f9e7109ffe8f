use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::model::TrainingExample;
use super::policy::PolicyDistribution;
use crate::planner::Individual;

/// Bounded FIFO of training examples for one game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    pub game: String,
    capacity: usize,
    examples: VecDeque<TrainingExample>,
}

impl ReplayBuffer {
    pub fn new(game: &str, capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            game: game.to_string(),
            capacity,
            examples: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        assert!(capacity > 0);
        self.capacity = capacity;
        while self.examples.len() > capacity {
            self.examples.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn push(&mut self, example: TrainingExample) {
        if self.examples.len() == self.capacity {
            self.examples.pop_front();
        }
        self.examples.push_back(example);
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrainingExample> {
        self.examples.iter()
    }

    /// `size` examples drawn uniformly with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Vec<TrainingExample> {
        if self.examples.is_empty() {
            return Vec::new();
        }
        (0..size)
            .map(|_| self.examples[rng.gen_range(0..self.examples.len())].clone())
            .collect()
    }
}

/// Appends one example per tick, all labelled with the episode's terminal
/// value.
pub fn record_episode(
    buffer: &mut ReplayBuffer,
    ticks: Vec<(FeatureVector, PolicyDistribution)>,
    outcome_value: f64,
) {
    for (features, policy) in ticks {
        buffer.push(TrainingExample {
            features,
            policy,
            value: outcome_value,
        });
    }
}

/// Fitness-weighted first-action distribution of an evaluated population.
pub fn policy_target(population: &[Individual]) -> PolicyDistribution {
    let mut w = [0.0; 5];
    for ind in population {
        if let (Some(first), Some(f)) = (ind.genes.first(), ind.fitness) {
            w[first.index()] += f.max(0.0);
        }
    }
    PolicyDistribution::from_weights(w)
}

/// One-hot on the first action of the fittest individual.
pub fn policy_target_best(population: &[Individual]) -> PolicyDistribution {
    population
        .iter()
        .filter(|i| !i.genes.is_empty())
        .max_by(|a, b| {
            let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
            let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
            // max_by returns the last maximum; reverse the tie so the first wins
            fa.total_cmp(&fb).then(std::cmp::Ordering::Greater)
        })
        .map_or_else(PolicyDistribution::uniform, |i| PolicyDistribution::one_hot(i.genes[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action;

    fn ind(genes: &[Action], fitness: f64) -> Individual {
        Individual {
            genes: genes.to_vec(),
            fitness: Some(fitness),
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new("g", 5);
        for i in 0..8 {
            b.push(TrainingExample {
                features: vec![i as f64],
                policy: PolicyDistribution::uniform(),
                value: 0.0,
            });
        }
        let kept: Vec<f64> = b.iter().map(|e| e.features[0]).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn winning_episode_labels() {
        let mut b = ReplayBuffer::new("g", 100);
        let ticks = (0..10)
            .map(|i| (vec![i as f64], PolicyDistribution::one_hot(Action::Up)))
            .collect();
        record_episode(&mut b, ticks, 1.0);
        assert_eq!(b.len(), 10);
        assert!(b.iter().all(|e| e.value == 1.0 && e.policy.is_valid()));
    }

    #[test]
    fn targets_from_population() {
        let all_right = vec![ind(&[Action::Right, Action::Up], 0.4), ind(&[Action::Right], 0.9)];
        assert_eq!(policy_target(&all_right), PolicyDistribution::one_hot(Action::Right));
        let halves = vec![ind(&[Action::Left], 0.5), ind(&[Action::Right], 0.5)];
        assert_eq!(policy_target(&halves).0, [0.0, 0.0, 0.5, 0.5, 0.0]);
        let zeros = vec![ind(&[Action::Left], 0.0), ind(&[Action::Right], 0.0)];
        assert_eq!(policy_target(&zeros), PolicyDistribution::uniform());
        assert_eq!(policy_target_best(&halves), PolicyDistribution::one_hot(Action::Left));
    }
}
