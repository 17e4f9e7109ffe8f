//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use evoplay_core::game::{Action, GameState, Status};

/// Visible state: the observation grid, key flag and score.
fn key(s: &GameState) -> (Vec<u8>, bool, i64) {
    (s.observe().cells, s.key_held(), s.score())
}

/// A shortest action sequence from `root` to a win, by breadth-first search
/// over visible states. Only exact for deterministic games.
pub fn shortest_win(root: &GameState) -> Option<Vec<Action>> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(key(root));
    queue.push_back((root.clone(), Vec::new()));
    while let Some((s, path)) = queue.pop_front() {
        for a in Action::ALL {
            let next = s.advance(a).unwrap();
            let mut p = path.clone();
            p.push(a);
            match next.status() {
                Status::Win => return Some(p),
                Status::Loss => {}
                Status::Running => {
                    if seen.insert(key(&next)) {
                        queue.push_back((next, p));
                    }
                }
            }
        }
    }
    None
}

/// Every state reachable from `root`, deduplicated by visible state and tick.
pub fn reachable(root: &GameState) -> Vec<GameState> {
    let mut seen = HashSet::new();
    let mut out = vec![root.clone()];
    let mut queue = VecDeque::from([root.clone()]);
    seen.insert((key(root), root.tick()));
    while let Some(s) = queue.pop_front() {
        if s.is_terminal() {
            continue;
        }
        for a in Action::ALL {
            let next = s.advance(a).unwrap();
            if seen.insert((key(&next), next.tick())) {
                out.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    out
}
