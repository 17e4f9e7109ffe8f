//! Game Description Format: a small line-oriented text format for grid games.
//!
//! ```text
//! # comments start with '#'
//! game corridor
//! sprites
//! A avatar avatar
//! C coin collectible score=1
//! termination
//! all-collected -> win
//! timeout 20 -> loss
//! level
//! A..C
//! ```
//!
//! Sprite lines are `<symbol> <name> <kind> [score=<int>] [noise=<float>]`.
//! `.` is floor and `#` starts a comment, so neither may be used as a symbol.
//! Canonical serialization sorts sprites by symbol; [`parse_gdf`] applies the
//! same ordering so that `parse(serialize(spec)) == spec`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FLOOR: char = '.';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpriteKind {
    Avatar,
    Solid,
    Collectible,
    Lethal,
    Chaser,
    Key,
    Door,
    Goal,
}

impl SpriteKind {
    pub const COUNT: usize = 8;
    pub const ALL: [SpriteKind; Self::COUNT] = [
        SpriteKind::Avatar,
        SpriteKind::Solid,
        SpriteKind::Collectible,
        SpriteKind::Lethal,
        SpriteKind::Chaser,
        SpriteKind::Key,
        SpriteKind::Door,
        SpriteKind::Goal,
    ];

    /// Stable id used for observation bit-sets and feature planes.
    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SpriteKind::Avatar => "avatar",
            SpriteKind::Solid => "solid",
            SpriteKind::Collectible => "collectible",
            SpriteKind::Lethal => "lethal",
            SpriteKind::Chaser => "chaser",
            SpriteKind::Key => "key",
            SpriteKind::Door => "door",
            SpriteKind::Goal => "goal",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for SpriteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteDef {
    pub symbol: char,
    pub name: String,
    pub kind: SpriteKind,
    pub score: i64,
    /// Probability that a chaser moves randomly instead of greedily.
    pub noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    AllCollected,
    AvatarOnGoal,
    AvatarDead,
    Timeout(u32),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::AllCollected => f.write_str("all-collected"),
            Condition::AvatarOnGoal => f.write_str("avatar-on-goal"),
            Condition::AvatarDead => f.write_str("avatar-dead"),
            Condition::Timeout(n) => write!(f, "timeout {n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Loss,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Win => "win",
            Outcome::Loss => "loss",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationRule {
    pub condition: Condition,
    pub outcome: Outcome,
}

/// Parsed, validated game rules. Immutable after parsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub name: String,
    /// Sorted by symbol.
    pub sprites: Vec<SpriteDef>,
    pub rules: Vec<TerminationRule>,
    pub width: usize,
    pub height: usize,
    /// Row-major, `height` rows of `width` characters.
    pub level: Vec<Vec<char>>,
}

impl GameSpec {
    pub fn sprite_index(&self, symbol: char) -> Option<usize> {
        self.sprites.iter().position(|s| s.symbol == symbol)
    }

    /// The tightest timeout among the termination rules.
    pub fn timeout(&self) -> u32 {
        self.rules
            .iter()
            .filter_map(|r| match r.condition {
                Condition::Timeout(n) => Some(n),
                _ => None,
            })
            .min()
            .expect("validated spec has a timeout rule")
    }

    pub fn has_rule(&self, condition: Condition) -> bool {
        self.rules.iter().any(|r| r.condition == condition)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// Lowest and highest score reachable from the level's initial layout,
    /// counting every scoring sprite once.
    pub fn score_range(&self) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = 0;
        for row in &self.level {
            for &c in row {
                if let Some(i) = self.sprite_index(c) {
                    let s = &self.sprites[i];
                    if matches!(
                        s.kind,
                        SpriteKind::Collectible | SpriteKind::Key | SpriteKind::Goal
                    ) {
                        if s.score > 0 {
                            hi += s.score;
                        } else {
                            lo += s.score;
                        }
                    }
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GdfErrorKind {
    #[error("expected `game <name>` header")]
    MissingHeader,
    #[error("invalid identifier `{0}`")]
    BadIdentifier(String),
    #[error("section `{0}` declared twice")]
    DuplicateSection(&'static str),
    #[error("line outside of any section")]
    UnexpectedLine,
    #[error("malformed sprite declaration")]
    MalformedSprite,
    #[error("symbol `{0}` is reserved")]
    ReservedSymbol(char),
    #[error("duplicate sprite symbol `{0}`")]
    DuplicateSymbol(char),
    #[error("unknown sprite kind `{0}`")]
    UnknownKind(String),
    #[error("bad attribute `{0}`")]
    BadAttribute(String),
    #[error("unknown termination condition `{0}`")]
    BadCondition(String),
    #[error("unknown outcome `{0}`")]
    BadOutcome(String),
    #[error("no termination rules")]
    NoTermination,
    #[error("no timeout termination rule")]
    MissingTimeout,
    #[error("level row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("level character `{0}` is not a declared sprite")]
    UnknownSymbol(char),
    #[error("level must contain at least two cells")]
    LevelTooSmall,
    #[error("level has no avatar")]
    NoAvatar,
    #[error("level has more than one avatar")]
    MultipleAvatars,
}

/// A parse diagnostic positioned at a 1-based line and column.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct GdfError {
    pub line: usize,
    pub column: usize,
    pub kind: GdfErrorKind,
}

fn err<T>(line: usize, column: usize, kind: GdfErrorKind) -> Result<T, GdfError> {
    Err(GdfError { line, column, kind })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Sprites,
    Termination,
    Level,
}

/// Whitespace-separated tokens with their 1-based column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut col = 0;
    let mut start_col = 0;
    for (i, c) in line.char_indices() {
        col += 1;
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((start_col, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
            start_col = col;
        }
    }
    if let Some(s) = start {
        out.push((start_col, &line[s..]));
    }
    out
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_gdf(text: &str) -> Result<GameSpec, GdfError> {
    let mut name: Option<String> = None;
    let mut section = Section::None;
    let mut seen = [false; 3];
    let mut sprites: Vec<(usize, usize, SpriteDef)> = Vec::new();
    let mut rules = Vec::new();
    let mut termination_line = 0;
    let mut level_line = 0;
    let mut level: Vec<(usize, Vec<char>)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = tokens(line);
        let (col0, first) = toks[0];

        if name.is_none() {
            if first != "game" || toks.len() != 2 {
                return err(line_no, col0, GdfErrorKind::MissingHeader);
            }
            let (c, n) = toks[1];
            if !is_identifier(n) {
                return err(line_no, c, GdfErrorKind::BadIdentifier(n.to_string()));
            }
            name = Some(n.to_string());
            continue;
        }

        if toks.len() == 1 {
            let next = match first {
                "sprites" => Some((Section::Sprites, 0, "sprites")),
                "termination" => Some((Section::Termination, 1, "termination")),
                "level" => Some((Section::Level, 2, "level")),
                _ => None,
            };
            if let Some((s, slot, label)) = next {
                if seen[slot] {
                    return err(line_no, col0, GdfErrorKind::DuplicateSection(label));
                }
                seen[slot] = true;
                section = s;
                match s {
                    Section::Termination => termination_line = line_no,
                    Section::Level => level_line = line_no,
                    _ => {}
                }
                continue;
            }
        }

        match section {
            Section::None => return err(line_no, col0, GdfErrorKind::UnexpectedLine),
            Section::Sprites => {
                sprites.push((line_no, col0, parse_sprite(line_no, &toks)?));
            }
            Section::Termination => rules.push(parse_rule(line_no, &toks)?),
            Section::Level => level.push((line_no, line.chars().collect())),
        }
    }

    let Some(name) = name else {
        return err(last_line.max(1), 1, GdfErrorKind::MissingHeader);
    };

    for (i, (line, col, s)) in sprites.iter().enumerate() {
        if sprites[..i].iter().any(|(_, _, o)| o.symbol == s.symbol) {
            return err(*line, *col, GdfErrorKind::DuplicateSymbol(s.symbol));
        }
    }
    if let Some((line, col, _)) = sprites
        .iter()
        .filter(|(_, _, s)| s.kind == SpriteKind::Avatar)
        .nth(1)
    {
        return err(*line, *col, GdfErrorKind::MultipleAvatars);
    }

    if rules.is_empty() {
        let line = if termination_line > 0 { termination_line } else { last_line.max(1) };
        return err(line, 1, GdfErrorKind::NoTermination);
    }
    if !rules
        .iter()
        .any(|r: &TerminationRule| matches!(r.condition, Condition::Timeout(_)))
    {
        return err(termination_line, 1, GdfErrorKind::MissingTimeout);
    }

    let level_anchor = if level_line > 0 { level_line } else { last_line.max(1) };
    let width = level.first().map_or(0, |(_, r)| r.len());
    for (row, (line, cells)) in level.iter().enumerate() {
        if cells.len() != width {
            let column = cells.len().min(width) + 1;
            return err(
                *line,
                column,
                GdfErrorKind::RaggedRow {
                    row: row + 1,
                    expected: width,
                    found: cells.len(),
                },
            );
        }
    }
    if width * level.len() < 2 {
        return err(level_anchor, 1, GdfErrorKind::LevelTooSmall);
    }

    let mut avatar_at: Option<(usize, usize)> = None;
    for (line, cells) in &level {
        for (x, &c) in cells.iter().enumerate() {
            if c == FLOOR {
                continue;
            }
            let Some((_, _, def)) = sprites.iter().find(|(_, _, s)| s.symbol == c) else {
                return err(*line, x + 1, GdfErrorKind::UnknownSymbol(c));
            };
            if def.kind == SpriteKind::Avatar {
                if avatar_at.is_some() {
                    return err(*line, x + 1, GdfErrorKind::MultipleAvatars);
                }
                avatar_at = Some((*line, x));
            }
        }
    }
    if avatar_at.is_none() {
        return err(level_anchor, 1, GdfErrorKind::NoAvatar);
    }

    let mut sprites: Vec<SpriteDef> = sprites.into_iter().map(|(_, _, s)| s).collect();
    sprites.sort_by_key(|s| s.symbol);
    let height = level.len();
    Ok(GameSpec {
        name,
        sprites,
        rules,
        width,
        height,
        level: level.into_iter().map(|(_, r)| r).collect(),
    })
}

fn parse_sprite(line: usize, toks: &[(usize, &str)]) -> Result<SpriteDef, GdfError> {
    if toks.len() < 3 {
        return err(line, toks[0].0, GdfErrorKind::MalformedSprite);
    }
    let (sc, sym) = toks[0];
    let mut chars = sym.chars();
    let symbol = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => return err(line, sc, GdfErrorKind::MalformedSprite),
    };
    if symbol == FLOOR || symbol == '#' {
        return err(line, sc, GdfErrorKind::ReservedSymbol(symbol));
    }
    let (nc, name) = toks[1];
    if !is_identifier(name) {
        return err(line, nc, GdfErrorKind::BadIdentifier(name.to_string()));
    }
    let (kc, kind) = toks[2];
    let Some(kind) = SpriteKind::from_name(kind) else {
        return err(line, kc, GdfErrorKind::UnknownKind(kind.to_string()));
    };
    let mut score = 0;
    let mut noise = 0.0;
    for &(ac, attr) in &toks[3..] {
        let bad = || err(line, ac, GdfErrorKind::BadAttribute(attr.to_string()));
        match attr.split_once('=') {
            Some(("score", v)) => match v.parse::<i64>() {
                Ok(v) => score = v,
                Err(_) => return bad(),
            },
            Some(("noise", v)) => match v.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => noise = v,
                _ => return bad(),
            },
            _ => return bad(),
        }
    }
    Ok(SpriteDef {
        symbol,
        name: name.to_string(),
        kind,
        score,
        noise,
    })
}

fn parse_rule(line: usize, toks: &[(usize, &str)]) -> Result<TerminationRule, GdfError> {
    let Some(arrow) = toks.iter().position(|(_, t)| *t == "->") else {
        return err(line, toks[0].0, GdfErrorKind::BadCondition(toks[0].1.to_string()));
    };
    let cond = &toks[..arrow];
    let condition = match cond {
        [(_, "all-collected")] => Condition::AllCollected,
        [(_, "avatar-on-goal")] => Condition::AvatarOnGoal,
        [(_, "avatar-dead")] => Condition::AvatarDead,
        [(_, "timeout"), (c, n)] => match n.parse::<u32>() {
            Ok(n) if n > 0 => Condition::Timeout(n),
            _ => return err(line, *c, GdfErrorKind::BadCondition(format!("timeout {n}"))),
        },
        [] => return err(line, toks[0].0, GdfErrorKind::BadCondition(String::new())),
        [(c, t), ..] => return err(line, *c, GdfErrorKind::BadCondition(t.to_string())),
    };
    let outcome = match &toks[arrow + 1..] {
        [(_, "win")] => Outcome::Win,
        [(_, "loss")] => Outcome::Loss,
        [(c, t), ..] => return err(line, *c, GdfErrorKind::BadOutcome(t.to_string())),
        [] => return err(line, toks[arrow].0, GdfErrorKind::BadOutcome(String::new())),
    };
    Ok(TerminationRule { condition, outcome })
}

/// Canonical text form. Deterministic; sprites are emitted sorted by symbol.
pub fn serialize_gdf(spec: &GameSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "game {}", spec.name);
    out.push_str("sprites\n");
    let mut sprites: Vec<&SpriteDef> = spec.sprites.iter().collect();
    sprites.sort_by_key(|s| s.symbol);
    for s in sprites {
        let _ = write!(out, "{} {} {}", s.symbol, s.name, s.kind);
        if s.score != 0 {
            let _ = write!(out, " score={}", s.score);
        }
        if s.noise != 0.0 {
            let _ = write!(out, " noise={}", s.noise);
        }
        out.push('\n');
    }
    out.push_str("termination\n");
    for r in &spec.rules {
        let _ = writeln!(out, "{} -> {}", r.condition, r.outcome);
    }
    out.push_str("level\n");
    for row in &spec.level {
        out.extend(row.iter());
        out.push('\n');
    }
    out
}
