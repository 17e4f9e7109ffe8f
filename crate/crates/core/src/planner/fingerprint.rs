use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use serde::{Deserialize, Serialize};

use super::config::RheaConfig;
use super::rhea::Rhea;
use crate::params::{ParamError, ParameterSet, ParameterSpace};

/// Parameter settings plus master seed: everything that determines planner
/// behaviour apart from the model snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentFingerprint {
    pub params: ParameterSet,
    pub seed: u64,
}

impl AgentFingerprint {
    pub fn new(params: ParameterSet, seed: u64) -> Self {
        Self { params, seed }
    }

    /// `seed = <n>` followed by the parameter lines.
    pub fn to_text(&self, space: &ParameterSpace) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        out.push_str(&self.params.to_text(space));
        out
    }

    pub fn from_text(space: &ParameterSpace, text: &str) -> Result<Self, ParamError> {
        let mut seed = None;
        let mut rest = String::new();
        for (i, line) in text.lines().enumerate() {
            match line.split_once('=') {
                Some((k, v)) if k.trim() == "seed" => {
                    seed = Some(v.trim().parse().map_err(|_| ParamError::Syntax(i + 1))?);
                }
                _ => {
                    rest.push_str(line);
                    rest.push('\n');
                }
            }
        }
        Ok(Self {
            params: ParameterSet::from_text(space, &rest)?,
            seed: seed.ok_or(ParamError::Syntax(0))?,
        })
    }

    /// First 16 hex digits of the SHA-256 of the text form.
    pub fn hash(&self, space: &ParameterSpace) -> String {
        let digest = Sha256::digest(self.to_text(space).as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn planner(&self, space: &ParameterSpace) -> Result<Rhea, ParamError> {
        Ok(Rhea::new(RheaConfig::from_params(space, &self.params)?, self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_registry;

    #[test]
    fn text_round_trip() {
        let space = default_registry();
        let fp = AgentFingerprint::new(space.default_set().with(&space, "alpha", 0.75), 42);
        let back = AgentFingerprint::from_text(&space, &fp.to_text(&space)).unwrap();
        assert_eq!(back, fp);
        let json = serde_json::to_string(&fp).unwrap();
        assert_eq!(serde_json::from_str::<AgentFingerprint>(&json).unwrap(), fp);
        assert_eq!(back.hash(&space), fp.hash(&space));
    }

    #[test]
    fn seeds_distinguish() {
        let space = default_registry();
        let a = AgentFingerprint::new(space.default_set(), 1);
        let b = AgentFingerprint::new(space.default_set(), 2);
        assert_ne!(a, b);
        assert_ne!(a.hash(&space), b.hash(&space));
    }
}
