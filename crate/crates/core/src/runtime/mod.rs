//! The always-on loop: scheduling, learning between episodes, moderated
//! human input, live frames and snapshots.

mod control;
mod coordinator;
mod events;
mod live;
mod moderation;
mod schedule;
mod snapshot;

pub use control::{
    Inbound, QueueState, Queued, Shared, SnapshotReply, StatusReport, SubmitOutcome, View,
    FALLBACK_TEXT, HELP_TEXT, RULE_HINT, RULE_UNKNOWN_GAME,
};
pub use coordinator::{GameSlot, Runtime, RuntimeConfig, RuntimeError};
pub use events::{parse_events, stats, EpisodeRecord, Event, StatsReport};
pub use live::{Frame, LiveHub};
pub use moderation::{BlockRule, ModerationConfig, RULE_AREA, RULE_PARSE};
pub use schedule::{Schedule, Suggestion, SuggestionKind};
pub use snapshot::SNAPSHOT_VERSION;
