use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gdf::{Condition, GameSpec, Outcome, SpriteDef, SpriteKind, FLOOR};

const EMPTY: u8 = u8::MAX;

pub type Pos = (usize, usize);

/// Avatar action. The discriminants are the canonical policy-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Nil = 4,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; Self::COUNT] =
        [Action::Up, Action::Down, Action::Left, Action::Right, Action::Nil];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Nil => (0, 0),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Win,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("advance called on a terminal state (tick {tick}, {status:?})")]
    Terminal { tick: u32, status: Status },
}

/// Per-cell bit-set of sprite-kind ids, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridObservation {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl GridObservation {
    pub fn cell(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.width + x]
    }

    pub fn contains(&self, x: usize, y: usize, kind: SpriteKind) -> bool {
        self.cell(x, y) & (1 << kind.id()) != 0
    }

    pub fn kinds_at(&self, x: usize, y: usize) -> Vec<SpriteKind> {
        SpriteKind::ALL
            .into_iter()
            .filter(|k| self.contains(x, y, *k))
            .collect()
    }
}

/// Running min/max score for one game, used to normalise heuristic values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBounds {
    pub min: i64,
    pub max: i64,
}

impl ScoreBounds {
    pub fn new(min: i64, max: i64) -> Self {
        assert!(min <= max, "score bounds inverted: {min} > {max}");
        Self { min, max }
    }

    /// Bounds seeded with the score range the level layout makes reachable.
    pub fn for_spec(spec: &GameSpec) -> Self {
        let (lo, hi) = spec.score_range();
        Self::new(lo, hi)
    }

    pub fn include(&mut self, score: i64) {
        self.min = self.min.min(score);
        self.max = self.max.max(score);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Chaser {
    pos: Pos,
    sprite: u8,
}

/// A simulable world state. Cloning yields an independent copy.
#[derive(Clone, Debug, PartialEq)]
pub struct GameState {
    spec: Arc<GameSpec>,
    tick: u32,
    score: i64,
    status: Status,
    // Static sprites never move and never share a cell, so one slot per cell.
    statics: Vec<u8>,
    avatar: Pos,
    alive: bool,
    chasers: Vec<Chaser>,
    key_held: bool,
    rng: ChaCha8Rng,
}

impl GameState {
    pub fn load(spec: Arc<GameSpec>, seed: u64) -> GameState {
        let mut statics = vec![EMPTY; spec.area()];
        let mut avatar = (0, 0);
        let mut chasers = Vec::new();
        for (y, row) in spec.level.iter().enumerate() {
            for (x, &c) in row.iter().enumerate() {
                if c == FLOOR {
                    continue;
                }
                let i = spec.sprite_index(c).expect("validated level");
                match spec.sprites[i].kind {
                    SpriteKind::Avatar => avatar = (x, y),
                    SpriteKind::Chaser => chasers.push(Chaser {
                        pos: (x, y),
                        sprite: i as u8,
                    }),
                    _ => statics[y * spec.width + x] = i as u8,
                }
            }
        }
        GameState {
            spec,
            tick: 0,
            score: 0,
            status: Status::Running,
            statics,
            avatar,
            alive: true,
            chasers,
            key_held: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }
    pub fn tick(&self) -> u32 {
        self.tick
    }
    pub fn score(&self) -> i64 {
        self.score
    }
    pub fn status(&self) -> Status {
        self.status
    }
    pub fn is_terminal(&self) -> bool {
        self.status != Status::Running
    }
    pub fn avatar(&self) -> Pos {
        self.avatar
    }
    pub fn avatar_alive(&self) -> bool {
        self.alive
    }
    pub fn key_held(&self) -> bool {
        self.key_held
    }
    pub fn chaser_positions(&self) -> impl Iterator<Item = Pos> + '_ {
        self.chasers.iter().map(|c| c.pos)
    }

    pub fn static_at(&self, (x, y): Pos) -> Option<&SpriteDef> {
        match self.statics[y * self.spec.width + x] {
            EMPTY => None,
            i => Some(&self.spec.sprites[i as usize]),
        }
    }

    /// Replaces the stochastic stream. Planners call this on simulation copies
    /// so that rollouts do not peek at the real game's future randomness.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Pure forward model: returns the successor, leaving `self` untouched.
    pub fn advance(&self, action: Action) -> Result<GameState, GameError> {
        let mut next = self.clone();
        next.step(action)?;
        Ok(next)
    }

    /// In-place forward model step.
    pub fn step(&mut self, action: Action) -> Result<(), GameError> {
        if self.is_terminal() {
            return Err(GameError::Terminal {
                tick: self.tick,
                status: self.status,
            });
        }

        // (1) avatar
        if let Some(to) = self.target(self.avatar, action) {
            if !self.blocks(to, self.key_held) {
                self.avatar = to;
            }
        }

        // (2) chasers
        for i in 0..self.chasers.len() {
            let Chaser { pos, sprite } = self.chasers[i];
            let noise = self.spec.sprites[sprite as usize].noise;
            let random = noise > 0.0 && self.rng.gen_bool(noise);
            let next = if random {
                let dir = Action::ALL[self.rng.gen_range(0..4)];
                self.target(pos, dir).filter(|&p| !self.blocks(p, false))
            } else {
                self.chase_step(pos)
            };
            if let Some(p) = next {
                self.chasers[i].pos = p;
            }
        }

        // (3) interactions
        let cell = self.avatar.1 * self.spec.width + self.avatar.0;
        let mut dead = false;
        if let Some(i) = Some(self.statics[cell]).filter(|&i| i != EMPTY) {
            let def = &self.spec.sprites[i as usize];
            match def.kind {
                SpriteKind::Collectible => {
                    self.score += def.score;
                    self.statics[cell] = EMPTY;
                }
                SpriteKind::Key => {
                    self.score += def.score;
                    self.key_held = true;
                    self.statics[cell] = EMPTY;
                }
                SpriteKind::Lethal => dead = true,
                SpriteKind::Goal if self.spec.has_rule(Condition::AvatarOnGoal) => {
                    self.score += def.score;
                }
                _ => {}
            }
        }
        if self.chasers.iter().any(|c| c.pos == self.avatar) {
            dead = true;
        }
        let on_goal = !dead
            && self
                .static_at(self.avatar)
                .is_some_and(|d| d.kind == SpriteKind::Goal);

        // (4) termination, declaration order
        let next_tick = self.tick + 1;
        for rule in &self.spec.rules {
            let fired = match rule.condition {
                Condition::AllCollected => !self.statics.iter().any(|&i| {
                    i != EMPTY && self.spec.sprites[i as usize].kind == SpriteKind::Collectible
                }),
                Condition::AvatarOnGoal => on_goal,
                Condition::AvatarDead => dead,
                Condition::Timeout(n) => next_tick >= n,
            };
            if fired {
                self.status = match rule.outcome {
                    Outcome::Win => Status::Win,
                    Outcome::Loss => Status::Loss,
                };
                break;
            }
        }
        if dead {
            self.alive = false;
            if self.status == Status::Running {
                self.status = Status::Loss;
            }
        }

        // (5)
        self.tick = next_tick;
        Ok(())
    }

    fn target(&self, (x, y): Pos, action: Action) -> Option<Pos> {
        let (dx, dy) = action.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.spec.width && ny < self.spec.height).then_some((nx, ny))
    }

    fn blocks(&self, p: Pos, has_key: bool) -> bool {
        match self.static_at(p).map(|d| d.kind) {
            Some(SpriteKind::Solid) => true,
            Some(SpriteKind::Door) => !has_key,
            _ => false,
        }
    }

    fn chase_step(&self, from: Pos) -> Option<Pos> {
        let dist = |p: Pos| p.0.abs_diff(self.avatar.0) + p.1.abs_diff(self.avatar.1);
        let here = dist(from);
        [Action::Up, Action::Down, Action::Left, Action::Right]
            .into_iter()
            .filter_map(|a| self.target(from, a))
            .find(|&p| dist(p) < here && !self.blocks(p, false))
    }

    pub fn observe(&self) -> GridObservation {
        let w = self.spec.width;
        let mut cells: Vec<u8> = self
            .statics
            .iter()
            .map(|&i| match i {
                EMPTY => 0,
                i => 1 << self.spec.sprites[i as usize].kind.id(),
            })
            .collect();
        for c in &self.chasers {
            cells[c.pos.1 * w + c.pos.0] |= 1 << SpriteKind::Chaser.id();
        }
        if self.alive {
            cells[self.avatar.1 * w + self.avatar.0] |= 1 << SpriteKind::Avatar.id();
        }
        GridObservation {
            width: w,
            height: self.spec.height,
            cells,
        }
    }
}

/// State value in `[0, 1]`: 1 for a win, 0 for a loss, and the score mapped
/// into `[0.1, 0.9]` against `bounds` otherwise.
pub fn heuristic_value(state: &GameState, bounds: &ScoreBounds) -> f64 {
    match state.status() {
        Status::Win => 1.0,
        Status::Loss => 0.0,
        Status::Running => running_value(state.score(), bounds),
    }
}

pub(crate) fn running_value(score: i64, bounds: &ScoreBounds) -> f64 {
    let span = bounds.max - bounds.min;
    if span == 0 {
        return 0.5;
    }
    let frac = ((score - bounds.min) as f64 / span as f64).clamp(0.0, 1.0);
    0.1 + 0.8 * frac
}
