use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularMdp;
use crate::error::Result;

/// JSON interchange form of a [`TabularMdp`].
///
/// ```json
/// {"num_states": 2, "num_actions": 1, "gamma": 0.9,
///  "rewards": [[0.0], [1.0]],
///  "transitions": [[[[1, 1.0]]], [[[1, 1.0]]]]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        let (n, m) = (mdp.num_states(), mdp.num_actions());
        MdpDocument {
            num_states: n,
            num_actions: m,
            gamma: mdp.discount(),
            rewards: (0..n)
                .map(|s| (0..m).map(|a| mdp.reward(s, a)).collect())
                .collect(),
            transitions: (0..n)
                .map(|s| (0..m).map(|a| mdp.successors(s, a).to_vec()).collect())
                .collect(),
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = crate::Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        crate::Error::check_len("rewards", doc.num_states, doc.rewards.len())?;
        if let Some(row) = doc.rewards.first() {
            crate::Error::check_len("reward row", doc.num_actions, row.len())?;
        }
        TabularMdp::new(doc.gamma, doc.rewards, doc.transitions)
    }
}

impl TabularMdp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MdpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_mdp, RandomMdpConfig};
    use proptest::prelude::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{"num_states": 2, "num_actions": 1, "gamma": 0.9,
            "rewards": [[0.0], [1.0]],
            "transitions": [[[[1, 1.0]]], [[[1, 1.0]]]]}"#;
        let mdp = TabularMdp::from_json(text).unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert_eq!(mdp.successors(0, 0), &[(1, 1.0)]);
        assert_eq!(mdp.reward(1, 0), 1.0);
    }

    #[test]
    fn rejects_inconsistent_header() {
        let text = r#"{"num_states": 3, "num_actions": 1, "gamma": 0.9,
            "rewards": [[0.0], [1.0]],
            "transitions": [[[[1, 1.0]]], [[[1, 1.0]]]]}"#;
        assert!(TabularMdp::from_json(text).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mdp.json");
        let mdp = random_mdp(&RandomMdpConfig::small(4)).unwrap();
        mdp.save(&path).unwrap();
        assert_eq!(TabularMdp::load(&path).unwrap(), mdp);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(seed in 0u64..1000, states in 1usize..12, actions in 1usize..4) {
            let mdp = random_mdp(&RandomMdpConfig {
                num_states: states,
                num_actions: actions,
                branching: 3,
                discount: 0.93,
                seed,
            }).unwrap();
            let back = TabularMdp::from_json(&mdp.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, mdp);
        }
    }
}
