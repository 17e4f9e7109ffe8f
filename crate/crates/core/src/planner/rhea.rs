use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{Crossover, InitMode, MutationMode, RheaConfig, Selection, ValueMode};
use crate::game::{heuristic_value, running_value, Action, GameState, ScoreBounds, Status};
use crate::learner::PolicyDistribution;

const A: usize = Action::COUNT;

/// Source of action distributions and state values for guided planning.
pub trait Guide: Sync {
    fn policy_value(&self, state: &GameState) -> (PolicyDistribution, f64);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genes: Vec<Action>,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genes: Vec<Action>) -> Self {
        Self {
            genes,
            fitness: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: u32,
}

impl Population {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn best(&self) -> Option<&Individual> {
        self.individuals.first()
    }

    /// Stable descending sort; unevaluated individuals sink to the bottom.
    pub fn sort(&mut self) {
        self.individuals.sort_by(|a, b| {
            let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
            let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
            fb.total_cmp(&fa)
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("cannot plan from a terminal state")]
    Terminal,
    #[error("budget {budget} is below the population size {population}")]
    BudgetTooSmall { budget: usize, population: usize },
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Why a guided mode fell back to its uniform counterpart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    NoModel,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerEvent {
    InitFallback(Fallback),
    MutationFallback(Fallback),
    ShiftFallback(Fallback),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanStats {
    /// Forward-model calls consumed by the last `plan_action`.
    pub calls: usize,
    pub generations: u32,
    /// Best fitness after the initial evaluation and after each generation.
    pub best_per_generation: Vec<f64>,
}

/// `(1 − α)·r + α·n`
pub fn blend_fitness(alpha: f64, rollout_value: f64, model_value: f64) -> f64 {
    (1.0 - alpha) * rollout_value + alpha * model_value
}

/// Zeroes the mass on `current` and renormalises. If nothing is left, the
/// result is uniform over the other actions.
pub fn mutation_distribution(policy: &PolicyDistribution, current: Action) -> PolicyDistribution {
    let mut w = policy.0;
    w[current.index()] = 0.0;
    let total: f64 = w.iter().filter(|x| x.is_finite() && **x > 0.0).sum();
    if total > 0.0 {
        PolicyDistribution::from_weights(w)
    } else {
        let mut u = [1.0 / (A - 1) as f64; A];
        u[current.index()] = 0.0;
        PolicyDistribution(u)
    }
}

/// Rolling horizon evolutionary planner.
///
/// One instance plays one episode at a time; call [`Rhea::reset`] between
/// episodes so the shift buffer does not leak across them.
#[derive(Clone, Debug)]
pub struct Rhea {
    cfg: RheaConfig,
    rng: ChaCha8Rng,
    population: Option<Population>,
    init_bias: Option<[f64; A]>,
    calls: usize,
    stats: PlanStats,
    events: Vec<PlannerEvent>,
}

impl Rhea {
    pub fn new(cfg: RheaConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            population: None,
            init_bias: None,
            calls: 0,
            stats: PlanStats::default(),
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &RheaConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut RheaConfig {
        &mut self.cfg
    }

    /// Forward-model calls made since the counter was last reset.
    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn reset_calls(&mut self) {
        self.calls = 0;
    }

    pub fn stats(&self) -> &PlanStats {
        &self.stats
    }

    pub fn population(&self) -> Option<&Population> {
        self.population.as_ref()
    }

    pub fn take_events(&mut self) -> Vec<PlannerEvent> {
        std::mem::take(&mut self.events)
    }

    /// Additive bias on the initialisation distribution, e.g. a human hint.
    pub fn set_init_bias(&mut self, bias: Option<[f64; A]>) {
        self.init_bias = bias;
    }

    pub fn reset(&mut self) {
        self.population = None;
    }

    fn uniform_action(&mut self) -> Action {
        Action::ALL[self.rng.gen_range(0..A)]
    }

    fn other_action(&mut self, current: Action) -> Action {
        let r = self.rng.gen_range(0..A - 1);
        Action::ALL[if r >= current.index() { r + 1 } else { r }]
    }

    fn init_action(&mut self) -> Action {
        match self.init_bias {
            Some(bias) => PolicyDistribution::uniform().biased(&bias).sample(&mut self.rng),
            None => self.uniform_action(),
        }
    }

    fn sim_copy(&mut self, root: &GameState) -> GameState {
        let mut s = root.clone();
        s.reseed(self.rng.gen());
        s
    }

    fn sim_step(&mut self, s: &mut GameState, a: Action) {
        if !s.is_terminal() {
            s.step(a).expect("running state advances");
            self.calls += 1;
        }
    }

    /// Picks an action for `state` within the forward-model budget.
    ///
    /// Fitnesses are normalised against a copy of `bounds` fixed for the whole
    /// call; scores observed while simulating are folded into `bounds` before
    /// returning.
    pub fn plan_action(
        &mut self,
        state: &GameState,
        model: Option<&dyn Guide>,
        bounds: &mut ScoreBounds,
    ) -> Result<Action, PlanError> {
        if state.is_terminal() {
            return Err(PlanError::Terminal);
        }
        let p = self.cfg.population_size;
        let l = self.cfg.individual_length;
        if p == 0 || l == 0 || self.cfg.tournament_size == 0 || self.cfg.evaluation_repeats == 0 {
            return Err(PlanError::InvalidConfig(
                "population, length, tournament and repeats must be positive",
            ));
        }
        if self.cfg.budget < p {
            return Err(PlanError::BudgetTooSmall {
                budget: self.cfg.budget,
                population: p,
            });
        }
        self.calls = 0;
        self.stats = PlanStats::default();
        let frozen = *bounds;
        let mut observed = frozen;

        let carried = self
            .population
            .take()
            .filter(|pop| self.cfg.shift_buffer && pop.len() == p && pop.individuals[0].genes.len() == l);
        let mut pop = match carried {
            Some(prev) => self.shift_population(prev, state, model),
            None => self.init_population(state, model),
        };

        // Initial evaluation; each individual gets an equal share of whatever
        // budget is left when full evaluations do not fit.
        let full = self.cfg.evaluation_repeats * self.cfg.horizon();
        for i in 0..p {
            let remaining = self.cfg.budget.saturating_sub(self.calls);
            let share = remaining / (p - i);
            let cap = (share < full).then_some(share.clamp(1, self.cfg.horizon()));
            self.evaluate_capped(&mut pop.individuals[i], state, model, &frozen, cap, &mut observed);
        }
        pop.sort();
        self.stats.best_per_generation.push(pop.individuals[0].fitness.unwrap_or(0.0));

        loop {
            let worst = self.offspring_cost(model);
            if self.remaining() < worst {
                break;
            }
            pop = self.next_generation(pop, state, model, &frozen, &mut observed, worst);
            self.stats.generations += 1;
            self.stats
                .best_per_generation
                .push(pop.individuals[0].fitness.unwrap_or(0.0));
        }

        let action = pop.individuals[0].genes.first().copied().unwrap_or(Action::Nil);
        self.stats.calls = self.calls;
        self.population = Some(pop);
        *bounds = observed;
        Ok(action)
    }

    fn remaining(&self) -> usize {
        self.cfg.budget.saturating_sub(self.calls)
    }

    fn effective_mutation_mode(&self, model: Option<&dyn Guide>) -> MutationMode {
        match (self.cfg.mutation_mode, model) {
            (MutationMode::NnWeighted, Some(_)) => MutationMode::NnWeighted,
            _ => MutationMode::Uniform,
        }
    }

    /// Upper bound on forward-model calls to produce and evaluate one child.
    fn offspring_cost(&self, model: Option<&dyn Guide>) -> usize {
        let mutation = match self.effective_mutation_mode(model) {
            MutationMode::NnWeighted => self.cfg.individual_length,
            MutationMode::Uniform => 0,
        };
        (mutation + self.cfg.evaluation_repeats * self.cfg.horizon()).max(1)
    }

    fn next_generation(
        &mut self,
        mut pop: Population,
        root: &GameState,
        model: Option<&dyn Guide>,
        bounds: &ScoreBounds,
        observed: &mut ScoreBounds,
        worst: usize,
    ) -> Population {
        let p = pop.len();
        // At least one offspring per generation, or the budget never drains.
        let elites = self.cfg.elitism.min(p.saturating_sub(1));
        let full = self.cfg.evaluation_repeats * self.cfg.horizon();

        if self.cfg.reevaluate_elites && self.remaining() >= elites * full + worst {
            for i in 0..elites {
                let mut ind = pop.individuals[i].clone();
                self.evaluate_capped(&mut ind, root, model, bounds, None, observed);
                pop.individuals[i] = ind;
            }
            pop.sort();
        }

        let mut next: Vec<Individual> = pop.individuals[..elites].to_vec();
        if model.is_none() && self.cfg.mutation_mode == MutationMode::NnWeighted {
            self.note(PlannerEvent::MutationFallback(Fallback::NoModel));
        }
        while next.len() < p && self.remaining() >= worst {
            let a = self.select(p);
            let mut child = self.crossover(&pop.individuals, a);
            child = self.mutate_with(child, root, model, self.cfg.force_mutation);
            self.evaluate_capped(&mut child, root, model, bounds, None, observed);
            next.push(child);
        }
        // Out of budget mid-generation: keep the best survivors.
        let mut i = elites;
        while next.len() < p {
            next.push(pop.individuals[i].clone());
            i += 1;
        }
        let mut out = Population {
            individuals: next,
            generation: pop.generation + 1,
        };
        out.sort();
        out
    }

    fn note(&mut self, e: PlannerEvent) {
        if !self.events.contains(&e) {
            self.events.push(e);
        }
    }

    /// Index of a parent in a population sorted best-first.
    fn select(&mut self, n: usize) -> usize {
        match self.cfg.selection {
            Selection::Tournament => (0..self.cfg.tournament_size)
                .map(|_| self.rng.gen_range(0..n))
                .min()
                .unwrap_or(0),
            Selection::Rank => {
                // linear ranking: weight n - i
                let total = n * (n + 1) / 2;
                let mut r = self.rng.gen_range(0..total);
                for i in 0..n {
                    let w = n - i;
                    if r < w {
                        return i;
                    }
                    r -= w;
                }
                n - 1
            }
            Selection::Truncation => self.rng.gen_range(0..n.div_ceil(2)),
        }
    }

    fn crossover(&mut self, pop: &[Individual], first: usize) -> Individual {
        let parent = &pop[first];
        let recombine = self.cfg.crossover != Crossover::None
            && pop.len() > 1
            && self.rng.gen_bool(self.cfg.crossover_rate);
        if !recombine {
            return Individual::new(parent.genes.clone());
        }
        let other = &pop[self.select(pop.len())];
        let l = parent.genes.len();
        let genes = match self.cfg.crossover {
            Crossover::Uniform => (0..l)
                .map(|i| {
                    if self.rng.gen_bool(0.5) {
                        parent.genes[i]
                    } else {
                        other.genes[i]
                    }
                })
                .collect(),
            _ => {
                let cut = if l > 1 { self.rng.gen_range(1..l) } else { l };
                parent.genes[..cut]
                    .iter()
                    .chain(&other.genes[cut..])
                    .copied()
                    .collect()
            }
        };
        Individual::new(genes)
    }

    /// Fresh population for `state`.
    pub fn init_population(&mut self, state: &GameState, model: Option<&dyn Guide>) -> Population {
        let p = self.cfg.population_size;
        let l = self.cfg.individual_length;
        let seeded = match (self.cfg.init_mode, model) {
            (InitMode::Uniform, _) => None,
            (InitMode::NnSeeded, None) => {
                self.note(PlannerEvent::InitFallback(Fallback::NoModel));
                None
            }
            (InitMode::NnSeeded, Some(_)) if self.cfg.budget < l + p => {
                self.note(PlannerEvent::InitFallback(Fallback::Budget));
                None
            }
            (InitMode::NnSeeded, Some(m)) => Some(m),
        };
        let individuals = match seeded {
            None => (0..p)
                .map(|_| Individual::new((0..l).map(|_| self.init_action()).collect()))
                .collect(),
            Some(m) => {
                let first = self.nn_seeded_sequence(state, m, l);
                // Guided mutations of the seed must still leave room to
                // evaluate everyone.
                let guided = self.effective_mutation_mode(model) == MutationMode::NnWeighted
                    && self.cfg.budget >= l + (p - 1) * l + p;
                let mutation_model = if guided { model } else { None };
                if !guided && self.effective_mutation_mode(model) == MutationMode::NnWeighted {
                    self.note(PlannerEvent::MutationFallback(Fallback::Budget));
                }
                let mut out = vec![first.clone()];
                for _ in 1..p {
                    out.push(self.mutate_with(first.clone(), state, mutation_model, true));
                }
                out
            }
        };
        Population {
            individuals,
            generation: 0,
        }
    }

    /// Builds a sequence by repeatedly sampling the model's policy and
    /// simulating the sampled action. Consumes one forward-model call per
    /// gene while the simulation is running.
    pub fn nn_seeded_sequence(&mut self, state: &GameState, model: &dyn Guide, length: usize) -> Individual {
        let mut s = self.sim_copy(state);
        let mut genes = Vec::with_capacity(length);
        for _ in 0..length {
            let (pi, _) = model.policy_value(&s);
            let mut pi = pi.with_temperature(self.cfg.nn_temperature);
            if let Some(bias) = self.init_bias {
                pi = pi.biased(&bias);
            }
            let a = pi.sample(&mut self.rng);
            genes.push(a);
            self.sim_step(&mut s, a);
        }
        Individual::new(genes)
    }

    /// Mutates each gene with probability `mutation_rate`.
    pub fn mutate(&mut self, ind: Individual, root: &GameState, model: Option<&dyn Guide>) -> Individual {
        self.mutate_with(ind, root, model, false)
    }

    fn mutate_with(
        &mut self,
        mut ind: Individual,
        root: &GameState,
        model: Option<&dyn Guide>,
        force_one: bool,
    ) -> Individual {
        ind.fitness = None;
        let l = ind.genes.len();
        if l == 0 {
            return ind;
        }
        let rate = self.cfg.mutation_rate.clamp(0.0, 1.0);
        let mut chosen: Vec<bool> = (0..l).map(|_| self.rng.gen_bool(rate)).collect();
        if force_one && !chosen.contains(&true) {
            chosen[self.rng.gen_range(0..l)] = true;
        }
        let Some(last) = chosen.iter().rposition(|&c| c) else {
            return ind;
        };
        match (self.effective_mutation_mode(model), model) {
            (MutationMode::NnWeighted, Some(m)) => {
                // S_g: the state after simulating the individual's own genes
                // up to and including g.
                let mut s = self.sim_copy(root);
                for i in 0..=last {
                    let old = ind.genes[i];
                    self.sim_step(&mut s, old);
                    if chosen[i] {
                        let (pi, _) = m.policy_value(&s);
                        let pi = pi.with_temperature(self.cfg.nn_temperature);
                        ind.genes[i] = mutation_distribution(&pi, old).sample(&mut self.rng);
                    }
                }
            }
            _ => {
                for i in 0..=last {
                    if chosen[i] {
                        ind.genes[i] = self.other_action(ind.genes[i]);
                    }
                }
            }
        }
        ind
    }

    /// Simulates the genes (then the random rollout) from a copy of `root` and
    /// stores the blended fitness on the individual.
    pub fn evaluate(
        &mut self,
        ind: &mut Individual,
        root: &GameState,
        model: Option<&dyn Guide>,
        bounds: &ScoreBounds,
    ) -> f64 {
        let mut observed = *bounds;
        self.evaluate_capped(ind, root, model, bounds, None, &mut observed)
    }

    fn evaluate_capped(
        &mut self,
        ind: &mut Individual,
        root: &GameState,
        model: Option<&dyn Guide>,
        bounds: &ScoreBounds,
        cap: Option<usize>,
        observed: &mut ScoreBounds,
    ) -> f64 {
        let horizon = self.cfg.horizon();
        let (repeats, steps) = match cap {
            Some(c) => (1, c.min(horizon)),
            None => (self.cfg.evaluation_repeats, horizon),
        };
        let alpha = self.cfg.alpha;
        let mut total = 0.0;
        for _ in 0..repeats {
            let mut s = self.sim_copy(root);
            let mut depth = 0;
            let mut best_seen = f64::NEG_INFINITY;
            while depth < steps && !s.is_terminal() {
                let a = match ind.genes.get(depth) {
                    Some(&g) => g,
                    None => self.uniform_action(),
                };
                self.sim_step(&mut s, a);
                depth += 1;
                observed.include(s.score());
                if self.cfg.value_mode == ValueMode::BestSeen {
                    best_seen = best_seen.max(self.rollout_value(&s, bounds, depth));
                }
            }
            let r = match self.cfg.value_mode {
                ValueMode::BestSeen if depth > 0 => best_seen,
                _ => self.rollout_value(&s, bounds, depth),
            };
            let n = if alpha == 0.0 {
                0.5
            } else {
                match model {
                    Some(_) if self.cfg.terminal_value_override && s.is_terminal() => {
                        heuristic_value(&s, bounds)
                    }
                    Some(m) => m.policy_value(&s).1,
                    None => 0.5,
                }
            };
            total += blend_fitness(alpha, r, n);
        }
        let f = if repeats == 1 { total } else { total / repeats as f64 };
        ind.fitness = Some(f);
        f
    }

    /// Heuristic value with a small bonus for winning at a shallower depth:
    /// a win after `d` simulated steps is worth `1 + (horizon − d)·discount`,
    /// so the bonus never exceeds `horizon · discount`.
    fn rollout_value(&self, s: &GameState, bounds: &ScoreBounds, depth: usize) -> f64 {
        match s.status() {
            Status::Win => {
                1.0 + self.cfg.horizon().saturating_sub(depth) as f64 * self.cfg.win_discount
            }
            Status::Loss => 0.0,
            Status::Running => running_value(s.score(), bounds),
        }
    }

    /// Carries `prev` into the next tick: genes shift left by one and a new
    /// last gene is drawn per the mutation mode. Fitness is invalidated.
    pub fn shift_population(
        &mut self,
        prev: Population,
        new_root: &GameState,
        model: Option<&dyn Guide>,
    ) -> Population {
        if prev.is_empty() {
            return self.init_population(new_root, model);
        }
        let p = prev.len();
        let l = prev.individuals[0].genes.len();
        let guided = match (self.cfg.mutation_mode, model) {
            (MutationMode::NnWeighted, Some(m)) => {
                if self.cfg.budget >= p * l.saturating_sub(1) + p {
                    Some(m)
                } else {
                    self.note(PlannerEvent::ShiftFallback(Fallback::Budget));
                    None
                }
            }
            (MutationMode::NnWeighted, None) => {
                self.note(PlannerEvent::ShiftFallback(Fallback::NoModel));
                None
            }
            _ => None,
        };
        let individuals = prev
            .individuals
            .into_iter()
            .map(|mut ind| {
                if !ind.genes.is_empty() {
                    ind.genes.remove(0);
                }
                let next = match guided {
                    Some(m) => {
                        let mut s = self.sim_copy(new_root);
                        for i in 0..ind.genes.len() {
                            let g = ind.genes[i];
                            self.sim_step(&mut s, g);
                        }
                        let (pi, _) = m.policy_value(&s);
                        pi.with_temperature(self.cfg.nn_temperature).sample(&mut self.rng)
                    }
                    None => self.uniform_action(),
                };
                ind.genes.push(next);
                ind.fitness = None;
                ind
            })
            .collect();
        Population {
            individuals,
            generation: prev.generation,
        }
    }
}
