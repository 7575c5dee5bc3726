use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiasConfig, WorldConfig};
use crate::error::{NsumError, Result};

/// A world plus its biases, as stored in a scenario JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub world: WorldConfig,
    #[serde(default)]
    pub biases: BiasConfig,
    /// Target column; the first unknown subpopulation when absent.
    #[serde(default)]
    pub unknown: Option<String>,
}

impl Scenario {
    pub fn check(&self) -> Result<()> {
        self.world.check()?;
        self.biases.check(&self.world)?;
        self.target().map(|_| ())
    }

    pub fn target(&self) -> Result<String> {
        match &self.unknown {
            Some(u) => {
                let k = self.world.subpop_index(u)?;
                if self.world.subpops[k].known {
                    return Err(NsumError::InvalidInput(format!("target {u} is marked known")));
                }
                Ok(u.clone())
            }
            None => self
                .world
                .unknown_names()
                .into_iter()
                .next()
                .ok_or_else(|| NsumError::InvalidInput(format!("scenario {} has no unknown subpopulation", self.name))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Many { scenarios: Vec<Scenario> },
    One(Box<Scenario>),
}

/// Accepts either one scenario object or `{"scenarios": [...]}`.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let parsed: ScenarioFile = serde_json::from_str(text)?;
    let list = match parsed {
        ScenarioFile::Many { scenarios } => scenarios,
        ScenarioFile::One(s) => vec![*s],
    };
    for s in &list {
        s.check()?;
    }
    Ok(list)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let text = fs::read_to_string(path).map_err(|e| NsumError::io(path, e))?;
    parse_scenarios(&text)
}
