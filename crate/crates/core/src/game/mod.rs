//! Grid-world games: the description format, the built-in suite and the
//! seeded forward model.

mod builtin;
mod gdf;
mod state;

pub use builtin::{
    builtin, builtin_suite, BUILTIN_SOURCES, COIN_CORRIDOR, COIN_MAZE, DODGE_RUNNER, KEY_DOOR,
};
pub use gdf::{
    parse_gdf, serialize_gdf, Condition, GameSpec, GdfError, GdfErrorKind, Outcome, SpriteDef,
    SpriteKind, TerminationRule, FLOOR,
};
pub use state::{
    heuristic_value, Action, GameError, GameState, GridObservation, Pos, ScoreBounds, Status,
};
pub(crate) use state::running_value;
