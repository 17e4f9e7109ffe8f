use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::{Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::events::{stats, Event, StatsReport};
use super::live::LiveHub;
use super::moderation::ModerationConfig;
use super::schedule::{Suggestion, SuggestionKind};
use crate::game::{serialize_gdf, Action};

/// Rule id for a play-game suggestion naming a game outside the library.
pub const RULE_UNKNOWN_GAME: &str = "unknown-game";
/// Rule id for a strategy hint with a non-finite component.
pub const RULE_HINT: &str = "structural:hint";

/// A moderated request waiting for the coordinator. Inline games are kept as
/// canonical GDF text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Inbound {
    PlayGame { game: String },
    PlayInline { gdf: String },
    AddGame { gdf: String },
    Hint { bias: [f64; Action::COUNT] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Queued {
    /// Arrival order over the runtime's lifetime.
    pub seq: u64,
    pub submitter: String,
    pub timestamp: u64,
    pub item: Inbound,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub next_seq: u64,
    pub items: VecDeque<Queued>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SubmitOutcome {
    Accepted {
        seq: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        stats: Option<StatsReport>,
    },
    /// Only the rule id; blocked content is never echoed.
    Rejected { rule: String },
}

impl SubmitOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, SubmitOutcome::Accepted { .. })
    }
}

/// What the coordinator is doing, for status queries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub game: Option<String>,
    pub episode: u64,
    pub tick: u32,
    pub score: i64,
    pub fingerprint: String,
    pub library: Vec<String>,
    /// Strategy hint waiting for the next episode.
    pub hint: Option<[f64; Action::COUNT]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub game: Option<String>,
    pub episode: u64,
    pub tick: u32,
    pub score: i64,
    pub fingerprint: String,
    pub uptime_secs: f64,
    pub paused: bool,
    pub pending: usize,
    pub hint: Option<[f64; Action::COUNT]>,
}

pub type SnapshotReply = Result<PathBuf, String>;

pub const HELP_TEXT: &str = "commands: play <game> | stats [game] | games | help";
pub const FALLBACK_TEXT: &str = "unknown command; try `help`";

/// State shared between the coordinator and concurrent control handlers.
/// Handlers only enqueue moderated requests and read views.
#[derive(Debug)]
pub struct Shared {
    moderation: ModerationConfig,
    window: usize,
    started: Instant,
    queue: Mutex<QueueState>,
    events: RwLock<Vec<Event>>,
    view: RwLock<View>,
    paused: AtomicBool,
    snapshot_requests: Mutex<Vec<SyncSender<SnapshotReply>>>,
    pub live: LiveHub,
}

impl Shared {
    pub fn new(moderation: ModerationConfig, window: usize) -> Self {
        Self {
            moderation,
            window,
            started: Instant::now(),
            queue: Mutex::new(QueueState::default()),
            events: RwLock::new(Vec::new()),
            view: RwLock::new(View::default()),
            paused: AtomicBool::new(false),
            snapshot_requests: Mutex::new(Vec::new()),
            live: LiveHub::new(),
        }
    }

    pub fn moderation(&self) -> &ModerationConfig {
        &self.moderation
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push_event(&self, event: Event) {
        self.events.write().unwrap().push(event);
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.read().unwrap().clone()
    }

    pub(crate) fn replace_events(&self, events: Vec<Event>) {
        *self.events.write().unwrap() = events;
    }

    pub fn stats(&self, game: Option<&str>) -> StatsReport {
        stats(&self.events.read().unwrap(), game, self.window)
    }

    pub fn view(&self) -> View {
        self.view.read().unwrap().clone()
    }

    pub(crate) fn update_view(&self, f: impl FnOnce(&mut View)) {
        f(&mut self.view.write().unwrap());
    }

    pub fn library(&self) -> Vec<String> {
        self.view.read().unwrap().library.clone()
    }

    pub fn status(&self) -> StatusReport {
        let v = self.view();
        StatusReport {
            game: v.game,
            episode: v.episode,
            tick: v.tick,
            score: v.score,
            fingerprint: v.fingerprint,
            uptime_secs: self.started.elapsed().as_secs_f64(),
            paused: self.is_paused(),
            pending: self.queue.lock().unwrap().items.len(),
            hint: v.hint,
        }
    }

    pub fn pause(&self) {
        self.paused.store(true, Ordering::SeqCst);
    }

    pub fn resume(&self) {
        self.paused.store(false, Ordering::SeqCst);
    }

    pub fn is_paused(&self) -> bool {
        self.paused.load(Ordering::SeqCst)
    }

    /// Asks the coordinator for a snapshot at its next quiescent point.
    pub fn request_snapshot(&self) -> Receiver<SnapshotReply> {
        let (tx, rx) = sync_channel(1);
        self.snapshot_requests.lock().unwrap().push(tx);
        rx
    }

    pub(crate) fn take_snapshot_requests(&self) -> Vec<SyncSender<SnapshotReply>> {
        std::mem::take(&mut *self.snapshot_requests.lock().unwrap())
    }

    pub fn queue_snapshot(&self) -> QueueState {
        self.queue.lock().unwrap().clone()
    }

    pub(crate) fn replace_queue(&self, q: QueueState) {
        *self.queue.lock().unwrap() = q;
    }

    pub(crate) fn drain_queue(&self) -> Vec<Queued> {
        self.queue.lock().unwrap().items.drain(..).collect()
    }

    /// Moderates every text field of `s` once, then either answers it
    /// (query-stats), queues it, or rejects it with a rule id. Both outcomes
    /// are logged as events.
    pub fn submit(&self, s: Suggestion) -> SubmitOutcome {
        match self.moderate(&s) {
            Ok(item) => {
                let kind = kind_name(&s.kind).to_string();
                let accepted = match item {
                    None => SubmitOutcome::Accepted {
                        seq: self.queue.lock().unwrap().next_seq,
                        stats: Some(match &s.kind {
                            SuggestionKind::QueryStats { game } => self.stats(game.as_deref()),
                            _ => unreachable!("only query-stats is answered inline"),
                        }),
                    },
                    Some(item) => {
                        let mut q = self.queue.lock().unwrap();
                        let seq = q.next_seq;
                        q.next_seq += 1;
                        q.items.push_back(Queued {
                            seq,
                            submitter: s.submitter.clone(),
                            timestamp: s.timestamp,
                            item,
                        });
                        SubmitOutcome::Accepted { seq, stats: None }
                    }
                };
                self.push_event(Event::SuggestionAccepted {
                    submitter: s.submitter,
                    kind,
                });
                accepted
            }
            Err(rule) => {
                let submitter = if self.moderation.check_text(&s.submitter).is_ok() {
                    s.submitter
                } else {
                    String::new()
                };
                self.push_event(Event::SuggestionRejected {
                    submitter,
                    rule: rule.clone(),
                });
                SubmitOutcome::Rejected { rule }
            }
        }
    }

    /// Uploads an inline game to the library without scheduling it.
    pub fn submit_game(&self, gdf: &str, submitter: &str) -> SubmitOutcome {
        let outcome = self
            .moderation
            .check_text(submitter)
            .and_then(|()| self.moderation.check_gdf(gdf));
        match outcome {
            Ok(spec) => {
                let mut q = self.queue.lock().unwrap();
                let seq = q.next_seq;
                q.next_seq += 1;
                q.items.push_back(Queued {
                    seq,
                    submitter: submitter.to_string(),
                    timestamp: 0,
                    item: Inbound::AddGame {
                        gdf: serialize_gdf(&spec),
                    },
                });
                drop(q);
                self.push_event(Event::SuggestionAccepted {
                    submitter: submitter.to_string(),
                    kind: "add-game".into(),
                });
                SubmitOutcome::Accepted { seq, stats: None }
            }
            Err(rule) => {
                self.push_event(Event::SuggestionRejected {
                    submitter: String::new(),
                    rule: rule.clone(),
                });
                SubmitOutcome::Rejected { rule }
            }
        }
    }

    /// `Ok(None)` for requests answered without queueing.
    fn moderate(&self, s: &Suggestion) -> Result<Option<Inbound>, String> {
        let m = &self.moderation;
        m.check_text(&s.submitter)?;
        match &s.kind {
            SuggestionKind::PlayGame { game } => {
                m.check_text(game)?;
                if !self.library().iter().any(|g| g == game) {
                    return Err(RULE_UNKNOWN_GAME.into());
                }
                Ok(Some(Inbound::PlayGame { game: game.clone() }))
            }
            SuggestionKind::PlayInline { gdf } => {
                let spec = m.check_gdf(gdf)?;
                Ok(Some(Inbound::PlayInline {
                    gdf: serialize_gdf(&spec),
                }))
            }
            SuggestionKind::StrategyHint { bias } => {
                if bias.iter().any(|b| !b.is_finite()) {
                    return Err(RULE_HINT.into());
                }
                Ok(Some(Inbound::Hint {
                    bias: bias.map(|b| b.clamp(-1.0, 1.0)),
                }))
            }
            SuggestionKind::QueryStats { game } => {
                if let Some(g) = game {
                    m.check_text(g)?;
                }
                Ok(None)
            }
        }
    }

    /// Keyword commands. The whole line is moderated before it is read.
    pub fn command(&self, line: &str) -> String {
        if let Err(rule) = self.moderation.check_text(line) {
            self.push_event(Event::SuggestionRejected {
                submitter: String::new(),
                rule: rule.clone(),
            });
            return format!("rejected: {rule}");
        }
        let mut words = line.split_whitespace();
        let head = words.next().unwrap_or("").to_lowercase();
        let rest: Vec<&str> = words.collect();
        let arg = (!rest.is_empty()).then(|| rest.join(" "));
        match (head.as_str(), arg) {
            ("play", Some(game)) => {
                let s = Suggestion {
                    kind: SuggestionKind::PlayGame { game: game.clone() },
                    submitter: String::new(),
                    timestamp: 0,
                };
                match self.submit(s) {
                    SubmitOutcome::Accepted { .. } => format!("queued {game}"),
                    SubmitOutcome::Rejected { rule } => format!("rejected: {rule}"),
                }
            }
            ("stats", arg) => self.stats(arg.as_deref()).to_text(),
            ("games", None) => self.library().join(", "),
            ("help", None) => HELP_TEXT.to_string(),
            _ => FALLBACK_TEXT.to_string(),
        }
    }
}

fn kind_name(kind: &SuggestionKind) -> &'static str {
    match kind {
        SuggestionKind::PlayGame { .. } => "play-game",
        SuggestionKind::PlayInline { .. } => "play-inline",
        SuggestionKind::StrategyHint { .. } => "strategy-hint",
        SuggestionKind::QueryStats { .. } => "query-stats",
    }
}
