use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::game::{Action, Status};

/// One played episode as it appears in the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: u64,
    pub game: String,
    pub fingerprint: String,
    /// Training steps of the game's model when the episode started.
    pub model_version: u64,
    /// Training steps after the post-episode batches.
    pub model_steps: u64,
    pub ticks: u32,
    pub score: i64,
    pub outcome: Status,
    pub fitness: f64,
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    Episode(EpisodeRecord),
    SuggestionAccepted {
        submitter: String,
        kind: String,
    },
    SuggestionRejected {
        submitter: String,
        rule: String,
    },
    GameAdded {
        game: String,
    },
    Tuned {
        game: String,
        adopted: bool,
        incumbent: f64,
        candidate: f64,
        fingerprint: String,
    },
    Error {
        message: String,
    },
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

pub fn parse_events(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    /// `None` for all games.
    pub game: Option<String>,
    pub episodes: u64,
    pub wins: u64,
    /// Undefined (null) before the first episode.
    pub win_rate: Option<f64>,
    pub mean_score: Option<f64>,
    pub max_score: Option<i64>,
    /// Mean score over the last `window` episodes.
    pub recent_mean_score: Option<f64>,
    pub window: usize,
    pub training_steps: u64,
    pub fingerprint: Option<String>,
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        format!(
            "{}: {} episodes, {} wins, win rate {}, mean score {}, max score {}, last-{} mean {}, {} training steps",
            self.game.as_deref().unwrap_or("all games"),
            self.episodes,
            self.wins,
            opt(self.win_rate),
            opt(self.mean_score),
            self.max_score.map_or("n/a".to_string(), |v| v.to_string()),
            self.window,
            opt(self.recent_mean_score),
            self.training_steps,
        )
    }
}

/// Statistics over the episode records of `events`, for one game or all.
pub fn stats(events: &[Event], game: Option<&str>, window: usize) -> StatsReport {
    let records: Vec<&EpisodeRecord> = events
        .iter()
        .filter_map(|e| match e {
            Event::Episode(r) if game.is_none_or(|g| r.game == g) => Some(r),
            _ => None,
        })
        .collect();
    let n = records.len();
    let wins = records.iter().filter(|r| r.outcome == Status::Win).count();
    let mean = |rs: &[&EpisodeRecord]| {
        (!rs.is_empty()).then(|| rs.iter().map(|r| r.score as f64).sum::<f64>() / rs.len() as f64)
    };
    let mut steps: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &records {
        steps.insert(&r.game, r.model_steps);
    }
    StatsReport {
        game: game.map(str::to_string),
        episodes: n as u64,
        wins: wins as u64,
        win_rate: (n > 0).then(|| wins as f64 / n as f64),
        mean_score: mean(&records),
        max_score: records.iter().map(|r| r.score).max(),
        recent_mean_score: mean(&records[n.saturating_sub(window)..]),
        window,
        training_steps: steps.values().sum(),
        fingerprint: records.last().map(|r| r.fingerprint.clone()),
    }
}
