use serde::{Deserialize, Serialize};

use crate::game::{parse_gdf, GameSpec};

/// Rule id for inline games that do not parse.
pub const RULE_PARSE: &str = "structural:parse";
/// Rule id for inline games whose level exceeds the configured area.
pub const RULE_AREA: &str = "structural:area";

/// A blocklisted term, matched case-insensitively as a substring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRule {
    pub id: String,
    pub term: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModerationConfig {
    pub blocklist: Vec<BlockRule>,
    pub max_level_area: usize,
}

impl Default for ModerationConfig {
    fn default() -> Self {
        Self {
            blocklist: Vec::new(),
            max_level_area: 400,
        }
    }
}

impl ModerationConfig {
    /// Parses `id term` lines (`#` comments and blank lines skipped). A line
    /// with a single word uses it as both id and term.
    pub fn with_blocklist_text(mut self, text: &str) -> Self {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, term) = line.split_once(char::is_whitespace).unwrap_or((line, line));
            self.blocklist.push(BlockRule {
                id: id.to_string(),
                term: term.trim().to_lowercase(),
            });
        }
        self
    }

    /// First blocklist rule whose term occurs in `text`.
    pub fn check_text(&self, text: &str) -> Result<(), String> {
        let lower = text.to_lowercase();
        match self
            .blocklist
            .iter()
            .find(|r| !r.term.is_empty() && lower.contains(&r.term.to_lowercase()))
        {
            Some(r) => Err(format!("blocklist:{}", r.id)),
            None => Ok(()),
        }
    }

    /// Blocklist over the raw text, then the structural checks.
    pub fn check_gdf(&self, text: &str) -> Result<GameSpec, String> {
        self.check_text(text)?;
        let spec = parse_gdf(text).map_err(|_| RULE_PARSE.to_string())?;
        if spec.area() > self.max_level_area {
            return Err(RULE_AREA.to_string());
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::COIN_CORRIDOR;

    fn cfg() -> ModerationConfig {
        ModerationConfig::default().with_blocklist_text("# words\nr1 Badword\nr2 worse thing\nsolo\n")
    }

    #[test]
    fn benign_text_passes_empty_list() {
        assert_eq!(ModerationConfig::default().check_text("hello there"), Ok(()));
    }

    #[test]
    fn mixed_case_hits_rule() {
        assert_eq!(cfg().check_text("a bAdWoRd here"), Err("blocklist:r1".into()));
        assert_eq!(cfg().check_text("WORSE THING"), Err("blocklist:r2".into()));
        assert_eq!(cfg().check_text("Solo"), Err("blocklist:solo".into()));
        assert_eq!(cfg().check_text("bad word"), Ok(()));
    }

    #[test]
    fn gdf_checks() {
        assert!(cfg().check_gdf(COIN_CORRIDOR).is_ok());
        assert_eq!(cfg().check_gdf("game x\n"), Err(RULE_PARSE.into()));
        let named = COIN_CORRIDOR.replace("CoinCorridor", "BadwordRun");
        assert_eq!(cfg().check_gdf(&named), Err("blocklist:r1".into()));
        let small = ModerationConfig {
            max_level_area: 4,
            ..cfg()
        };
        assert_eq!(small.check_gdf(COIN_CORRIDOR), Err(RULE_AREA.into()));
    }
}
