use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::control::{Inbound, Shared};
use super::events::{EpisodeRecord, Event};
use super::live::Frame;
use super::moderation::ModerationConfig;
use super::schedule::Schedule;
use crate::game::{parse_gdf, Action, GameSpec, ScoreBounds};
use crate::learner::{
    featurize_state, input_len_for, policy_target, policy_target_best, record_episode, LearnError,
    ModelHandle, ModelWeights, ReplayBuffer, Sgd,
};
use crate::params::{ParamError, ParameterSet, ParameterSpace};
use crate::planner::{play_episode, AgentFingerprint, Guide, LearnerConfig, RheaConfig, Rhea};
use crate::tuner::{format_log, run_ntbea, AgentTuningProblem, NtbeaConfig, TuningProblem};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("snapshot not found at {0}")]
    MissingSnapshot(PathBuf),
    #[error("snapshot file {file}: {msg}")]
    Corrupt { file: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("game library is empty")]
    EmptyLibrary,
    #[error("no snapshot directory configured")]
    NoSnapshotDir,
}

/// Settings of the loop itself (the agent's settings live in the fingerprint).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    pub moderation: ModerationConfig,
    /// Window of the recent-score trend in stats, and of the incumbent mean
    /// the tuner has to beat.
    pub window: usize,
    /// Tune a game's parameters every this many of its episodes; 0 disables.
    pub tune_every: u64,
    pub tune_evaluations: usize,
    pub tune_neighbours: usize,
    /// Episodes per tuner evaluation.
    pub tune_episodes: usize,
    pub learning: bool,
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            moderation: ModerationConfig::default(),
            window: 20,
            tune_every: 50,
            tune_evaluations: 10,
            tune_neighbours: 20,
            tune_episodes: 1,
            learning: true,
            snapshot_dir: None,
        }
    }
}

/// Everything the loop keeps for one game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSlot {
    pub spec: Arc<GameSpec>,
    pub params: ParameterSet,
    pub bounds: ScoreBounds,
    pub episodes: u64,
    pub model: Option<Arc<ModelWeights>>,
    /// Seed the model's initial weights were drawn from.
    pub model_seed: Option<u64>,
    pub optimiser: Sgd,
    pub replay: ReplayBuffer,
    /// Text log of the last tuning run.
    pub tuner_log: String,
}

impl GameSlot {
    fn new(spec: Arc<GameSpec>, params: ParameterSet, capacity: usize) -> Self {
        Self {
            bounds: ScoreBounds::for_spec(&spec),
            replay: ReplayBuffer::new(&spec.name, capacity),
            spec,
            params,
            episodes: 0,
            model: None,
            model_seed: None,
            optimiser: Sgd::new(),
            tuner_log: String::new(),
        }
    }

    pub fn training_steps(&self) -> u64 {
        self.model.as_ref().map_or(0, |m| m.steps)
    }
}

/// The always-on loop: one coordinator, sequential episodes.
pub struct Runtime {
    pub(crate) space: ParameterSpace,
    pub(crate) cfg: RuntimeConfig,
    pub(crate) fingerprint: AgentFingerprint,
    pub(crate) slots: BTreeMap<String, GameSlot>,
    pub(crate) schedule: Schedule,
    pub(crate) episodes: u64,
    pub(crate) hint: Option<[f64; Action::COUNT]>,
    pub(crate) shared: Arc<Shared>,
}

impl Runtime {
    pub fn new(
        space: ParameterSpace,
        fingerprint: AgentFingerprint,
        games: Vec<GameSpec>,
        cfg: RuntimeConfig,
    ) -> Result<Self, RuntimeError> {
        LearnerConfig::from_params(&space, &fingerprint.params)?;
        RheaConfig::from_params(&space, &fingerprint.params)?;
        let shared = Arc::new(Shared::new(cfg.moderation.clone(), cfg.window));
        let mut rt = Self {
            space,
            cfg,
            fingerprint,
            slots: BTreeMap::new(),
            schedule: Schedule::default(),
            episodes: 0,
            hint: None,
            shared,
        };
        for g in games {
            rt.add_game(g)?;
        }
        rt.publish_view();
        Ok(rt)
    }

    pub fn shared(&self) -> Arc<Shared> {
        Arc::clone(&self.shared)
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    pub fn fingerprint(&self) -> &AgentFingerprint {
        &self.fingerprint
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn slot(&self, game: &str) -> Option<&GameSlot> {
        self.slots.get(game)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn events(&self) -> Vec<Event> {
        self.shared.events()
    }

    fn add_game(&mut self, spec: GameSpec) -> Result<bool, RuntimeError> {
        if let Some(existing) = self.slots.get(&spec.name) {
            return Ok(*existing.spec == spec);
        }
        let lc = LearnerConfig::from_params(&self.space, &self.fingerprint.params)?;
        let name = spec.name.clone();
        self.slots.insert(
            name.clone(),
            GameSlot::new(Arc::new(spec), self.fingerprint.params.clone(), lc.replay_capacity),
        );
        self.schedule.add_game(&name);
        Ok(true)
    }

    /// Adds `spec`; a different game under a taken name is refused.
    fn add_inline(&mut self, gdf: &str) -> Result<String, String> {
        let spec = parse_gdf(gdf).map_err(|e| format!("moderated game no longer parses: {e}"))?;
        let name = spec.name.clone();
        let fresh = !self.slots.contains_key(&name);
        match self.add_game(spec) {
            Ok(true) => {
                if fresh {
                    self.shared.push_event(Event::GameAdded { game: name.clone() });
                }
                Ok(name)
            }
            Ok(false) => Err(format!("game name {name} is taken by a different game")),
            Err(e) => Err(e.to_string()),
        }
    }

    pub(super) fn publish_view(&self) {
        let library = self.schedule.library().to_vec();
        let hash = self.fingerprint.hash(&self.space);
        let hint = self.hint;
        self.shared.update_view(|v| {
            v.library = library;
            v.hint = hint;
            if v.fingerprint.is_empty() {
                v.fingerprint = hash;
            }
        });
    }

    fn drain_inbound(&mut self) {
        for q in self.shared.drain_queue() {
            match q.item {
                Inbound::PlayGame { game } => self.schedule.push_front(&game),
                Inbound::PlayInline { gdf } => match self.add_inline(&gdf) {
                    Ok(name) => self.schedule.push_front(&name),
                    Err(message) => self.shared.push_event(Event::Error { message }),
                },
                Inbound::AddGame { gdf } => {
                    if let Err(message) = self.add_inline(&gdf) {
                        self.shared.push_event(Event::Error { message });
                    }
                }
                Inbound::Hint { bias } => self.hint = Some(bias),
            }
        }
        self.publish_view();
    }

    /// Game seed, planner seed and training seed of episode `index`.
    fn episode_seeds(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.fingerprint.seed);
        rng.set_stream(index);
        rng
    }

    /// Plays one episode of the next scheduled game, records it and trains.
    /// Failures become events; `None` means no episode was played.
    pub fn step_cycle(&mut self) -> Option<EpisodeRecord> {
        self.drain_inbound();
        let Some(game) = self.schedule.next() else {
            self.shared.push_event(Event::Error {
                message: RuntimeError::EmptyLibrary.to_string(),
            });
            return None;
        };
        let index = self.episodes;
        self.episodes += 1;
        match self.play(&game, index) {
            Ok(record) => {
                self.shared.push_event(Event::Episode(record.clone()));
                if let Err(message) = self.maybe_tune(&game, index) {
                    self.shared.push_event(Event::Error { message });
                }
                Some(record)
            }
            Err(message) => {
                self.shared.push_event(Event::Error {
                    message: format!("episode {index} ({game}) skipped: {message}"),
                });
                None
            }
        }
    }

    fn play(&mut self, game: &str, index: u64) -> Result<EpisodeRecord, String> {
        let mut seeds = self.episode_seeds(index);
        let (game_seed, planner_seed, train_seed) = (seeds.next_u64(), seeds.next_u64(), seeds.next_u64());
        let hint = self.hint.take();
        let learning = self.cfg.learning;
        let hash_seed = self.fingerprint.seed;
        let space = &self.space;
        let shared = Arc::clone(&self.shared);
        let slot = self
            .slots
            .get_mut(game)
            .ok_or_else(|| format!("unknown game {game}"))?;
        let rcfg = RheaConfig::from_params(space, &slot.params).map_err(|e| e.to_string())?;
        let lcfg = LearnerConfig::from_params(space, &slot.params).map_err(|e| e.to_string())?;
        let hash = AgentFingerprint::new(slot.params.clone(), hash_seed).hash(space);
        shared.update_view(|v| {
            v.game = Some(game.to_string());
            v.episode = index;
            v.tick = 0;
            v.score = 0;
            v.fingerprint = hash.clone();
            v.hint = None;
        });

        // One immutable model version for the whole episode.
        let feature_bounds = slot.bounds;
        let handle = slot
            .model
            .as_ref()
            .filter(|m| m.steps > 0)
            .map(|m| ModelHandle::new(Arc::clone(m), feature_bounds));
        let model_version = slot.training_steps();
        let mut planner = Rhea::new(rcfg, planner_seed);
        planner.set_init_bias(hint);
        let mut ticks = Vec::new();
        let best_only = lcfg.best_only_policy_target;
        let outcome = play_episode(
            &slot.spec,
            &mut planner,
            handle.as_ref().map(|h| h as &dyn Guide),
            game_seed,
            &mut slot.bounds,
            |state, action, pop| {
                let target = if best_only {
                    policy_target_best(&pop.individuals)
                } else {
                    policy_target(&pop.individuals)
                };
                if shared.live.has_subscribers() {
                    shared.live.publish(Frame {
                        seq: 0,
                        episode: index,
                        game: game.to_string(),
                        tick: state.tick(),
                        observation: state.observe(),
                        score: state.score(),
                        action,
                        policy: policy_target(&pop.individuals).0,
                    });
                }
                shared.update_view(|v| {
                    v.tick = state.tick();
                    v.score = state.score();
                });
                if learning {
                    ticks.push((featurize_state(state, &feature_bounds), target));
                }
            },
        )
        .map_err(|e| e.to_string())?;
        slot.episodes += 1;
        shared.update_view(|v| {
            v.tick = outcome.ticks;
            v.score = outcome.score;
        });

        if learning {
            if lcfg.replay_capacity != slot.replay.capacity() {
                slot.replay.set_capacity(lcfg.replay_capacity);
            }
            record_episode(&mut slot.replay, ticks, outcome.fitness);
            if slot.replay.len() >= lcfg.training_warmup {
                train(slot, &lcfg, train_seed).map_err(|e| e.to_string())?;
            }
        }

        Ok(EpisodeRecord {
            index,
            game: game.to_string(),
            fingerprint: hash,
            model_version,
            model_steps: slot.training_steps(),
            ticks: outcome.ticks,
            score: outcome.score,
            outcome: outcome.status,
            fitness: outcome.fitness,
            actions: outcome.actions,
        })
    }

    /// Runs a short tuning search every `tune_every` episodes of `game` and
    /// adopts its recommendation only if it beats the incumbent's recent mean.
    fn maybe_tune(&mut self, game: &str, index: u64) -> Result<(), String> {
        let every = self.cfg.tune_every;
        let slot = &self.slots[game];
        if every == 0 || slot.episodes % every != 0 {
            return Ok(());
        }
        let incumbent = {
            let hash = self.slot_hash(game);
            let events = self.shared.events();
            let recent: Vec<f64> = events
                .iter()
                .rev()
                .filter_map(|e| match e {
                    Event::Episode(r) if r.game == game && r.fingerprint == hash => Some(r.fitness),
                    _ => None,
                })
                .take(self.cfg.window)
                .collect();
            if recent.is_empty() {
                return Ok(());
            }
            recent.iter().sum::<f64>() / recent.len() as f64
        };
        let mut seeds = self.episode_seeds(index);
        for _ in 0..3 {
            seeds.next_u64();
        }
        let tune_seed = seeds.next_u64();
        let slot = &self.slots[game];
        let mut problem =
            AgentTuningProblem::new(self.space.clone(), Arc::clone(&slot.spec), self.cfg.tune_episodes, tune_seed);
        if let Some(m) = slot.model.as_ref().filter(|m| m.steps > 0) {
            problem = problem.with_model(ModelHandle::new(Arc::clone(m), slot.bounds));
        }
        let cfg = NtbeaConfig {
            evaluations: self.cfg.tune_evaluations,
            neighbours: self.cfg.tune_neighbours,
            seed: seeds.gen(),
            ..NtbeaConfig::default()
        };
        let run = run_ntbea(&mut problem, &cfg);
        let candidate = run.recommended;
        let candidate_mean = (0..self.cfg.tune_episodes.max(1))
            .map(|_| problem.evaluate(&candidate))
            .sum::<f64>()
            / self.cfg.tune_episodes.max(1) as f64;
        let adopted = candidate_mean > incumbent;
        let slot = self.slots.get_mut(game).expect("slot exists");
        slot.tuner_log = format_log(&self.space, &run.log);
        if adopted {
            slot.params = candidate;
        }
        let fingerprint = self.slot_hash(game);
        self.shared.push_event(Event::Tuned {
            game: game.to_string(),
            adopted,
            incumbent,
            candidate: candidate_mean,
            fingerprint,
        });
        Ok(())
    }

    fn slot_hash(&self, game: &str) -> String {
        AgentFingerprint::new(self.slots[game].params.clone(), self.fingerprint.seed).hash(&self.space)
    }

    /// Cycles until `max` episodes have been attempted (if given) or `stop`
    /// is set, honouring pause and servicing snapshot requests between
    /// episodes.
    pub fn run(&mut self, max: Option<u64>, stop: &AtomicBool) {
        let mut done = 0;
        while !stop.load(Ordering::SeqCst) && max.is_none_or(|m| done < m) {
            self.service_snapshot_requests();
            if self.shared.is_paused() {
                std::thread::sleep(Duration::from_millis(10));
                continue;
            }
            self.step_cycle();
            done += 1;
        }
        self.service_snapshot_requests();
    }

    pub fn service_snapshot_requests(&mut self) {
        let requests = self.shared.take_snapshot_requests();
        if requests.is_empty() {
            return;
        }
        let reply = match self.cfg.snapshot_dir.clone() {
            Some(dir) => self.snapshot(&dir).map(|()| dir).map_err(|e| e.to_string()),
            None => Err(RuntimeError::NoSnapshotDir.to_string()),
        };
        if let Err(message) = &reply {
            self.shared.push_event(Event::Error {
                message: message.clone(),
            });
        }
        for tx in requests {
            let _ = tx.try_send(reply.clone());
        }
    }
}

fn train(slot: &mut GameSlot, lcfg: &LearnerConfig, seed: u64) -> Result<(), LearnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = slot.model.get_or_insert_with(|| {
        let init = rng.gen();
        slot.model_seed = Some(init);
        let dims = [input_len_for(&slot.spec), lcfg.hidden1, lcfg.hidden2];
        Arc::new(ModelWeights::new(&slot.spec.name, dims, init))
    });
    // Copy-on-write: a planner still holding the old version keeps it intact.
    let weights = Arc::make_mut(model);
    let opts = lcfg.train_options();
    for _ in 0..lcfg.batches_per_episode {
        let batch = slot.replay.sample_batch(&mut rng, lcfg.batch_size);
        slot.optimiser.step(weights, &batch, &opts)?;
    }
    Ok(())
}
