//! The shipped game library.

use std::sync::Arc;

use super::gdf::{parse_gdf, GameSpec};

/// Deterministic: one coin three cells right of the avatar in a one-row corridor.
pub const COIN_CORRIDOR: &str = "\
game CoinCorridor
sprites
A avatar avatar
C coin collectible score=1
termination
all-collected -> win
timeout 30 -> loss
level
A..C....
";

/// Deterministic, dense: four coins spread through a walled maze.
pub const COIN_MAZE: &str = "\
game CoinMaze
sprites
A avatar avatar
C coin collectible score=1
W wall solid
termination
all-collected -> win
timeout 60 -> loss
level
WWWWWWW
WA..C.W
W.WW.WW
W.C...W
WW.WW.W
WC...CW
WWWWWWW
";

/// Stochastic: two noisy chasers hunt the avatar while it gathers coins.
pub const DODGE_RUNNER: &str = "\
game DodgeRunner
sprites
A avatar avatar
C coin collectible score=1
W wall solid
Z zombie chaser noise=0.2
termination
avatar-dead -> loss
all-collected -> win
timeout 50 -> loss
level
WWWWWWWWW
WA..C...W
W.WW.WW.W
WC.....CW
W.WW.WW.W
WZ.C...ZW
WWWWWWWWW
";

/// Sparse: the only reward is the goal, behind a door that needs the key.
pub const KEY_DOOR: &str = "\
game KeyDoor
sprites
A avatar avatar
D door door
G goal goal score=1
K key key
W wall solid
termination
avatar-on-goal -> win
timeout 40 -> loss
level
WWWWWWWWW
WA..W..GW
W.W.W.WWW
W.W.D...W
WKW.WWW.W
WWWWWWWWW
";

pub const BUILTIN_SOURCES: [&str; 4] = [COIN_CORRIDOR, COIN_MAZE, DODGE_RUNNER, KEY_DOOR];

pub fn builtin_suite() -> Vec<Arc<GameSpec>> {
    BUILTIN_SOURCES
        .iter()
        .map(|src| Arc::new(parse_gdf(src).expect("built-in game parses")))
        .collect()
}

pub fn builtin(name: &str) -> Option<Arc<GameSpec>> {
    builtin_suite().into_iter().find(|g| g.name == name)
}
