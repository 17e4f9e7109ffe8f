use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::game::Action;

/// What a human asked for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SuggestionKind {
    /// Play a library game next.
    PlayGame { game: String },
    /// Add an inline GDF game to the library and play it next.
    PlayInline { gdf: String },
    /// Additive bias over actions for the next episode's initial sequences.
    StrategyHint { bias: [f64; Action::COUNT] },
    QueryStats { game: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    #[serde(flatten)]
    pub kind: SuggestionKind,
    #[serde(default)]
    pub submitter: String,
    /// Milliseconds since the Unix epoch, as supplied or stamped on arrival.
    #[serde(default)]
    pub timestamp: u64,
}

/// Round-robin over the library, with suggested games served first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    library: Vec<String>,
    cursor: usize,
    front: VecDeque<String>,
}

impl Schedule {
    pub fn new(library: Vec<String>) -> Self {
        Self {
            library,
            cursor: 0,
            front: VecDeque::new(),
        }
    }

    pub fn library(&self) -> &[String] {
        &self.library
    }

    pub fn pending(&self) -> impl Iterator<Item = &String> {
        self.front.iter()
    }

    /// Appends a game to the rotation if it is not already there.
    pub fn add_game(&mut self, name: &str) {
        if !self.library.iter().any(|g| g == name) {
            self.library.push(name.to_string());
        }
    }

    /// Queues `name` ahead of the rotation, behind earlier suggestions.
    pub fn push_front(&mut self, name: &str) {
        self.front.push_back(name.to_string());
    }

    /// Next game to play; suggested games do not advance the rotation.
    pub fn next(&mut self) -> Option<String> {
        if let Some(g) = self.front.pop_front() {
            return Some(g);
        }
        if self.library.is_empty() {
            return None;
        }
        let g = self.library[self.cursor % self.library.len()].clone();
        self.cursor = (self.cursor + 1) % self.library.len();
        Some(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib(names: &[&str]) -> Schedule {
        Schedule::new(names.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn round_robin() {
        let mut s = lib(&["A", "B"]);
        let got: Vec<_> = (0..5).map(|_| s.next().unwrap()).collect();
        assert_eq!(got, ["A", "B", "A", "B", "A"]);
    }

    #[test]
    fn suggestion_goes_first() {
        let mut s = lib(&["A", "B"]);
        assert_eq!(s.next().unwrap(), "A");
        s.push_front("A");
        assert_eq!(s.next().unwrap(), "A");
        assert_eq!(s.next().unwrap(), "B");
    }

    #[test]
    fn gap_equals_library_size() {
        let mut s = lib(&["A", "B", "C", "D"]);
        let plays: Vec<_> = (0..40).map(|_| s.next().unwrap()).collect();
        for g in ["A", "B", "C", "D"] {
            let idx: Vec<usize> = plays.iter().enumerate().filter(|(_, p)| *p == g).map(|(i, _)| i).collect();
            assert!(idx.windows(2).all(|w| w[1] - w[0] == 4));
        }
    }

    #[test]
    fn empty_library() {
        assert_eq!(Schedule::default().next(), None);
    }

    #[test]
    fn suggestion_json_shape() {
        let s: Suggestion = serde_json::from_str(r#"{"kind":"play-game","game":"KeyDoor","submitter":"ann"}"#).unwrap();
        assert_eq!(
            s.kind,
            SuggestionKind::PlayGame {
                game: "KeyDoor".into()
            }
        );
        let h: Suggestion = serde_json::from_str(r#"{"kind":"strategy-hint","bias":[0,0,0,0.5,0]}"#).unwrap();
        assert!(matches!(h.kind, SuggestionKind::StrategyHint { .. }));
    }
}
