//! Belief files: calibrated capability bounds per operator.

use std::fs;
use std::path::Path;

use arfa_core::{BeliefSet, OperatorId, OperatorProfile, SimulatedOperator};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BELIEFS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefFile {
    pub version: u32,
    pub operators: Vec<OperatorProfile>,
}

impl BeliefFile {
    pub fn new(operators: Vec<OperatorProfile>) -> Self {
        BeliefFile { version: BELIEFS_VERSION, operators }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        let file: BeliefFile = serde_json::from_str(&text).map_err(|e| Error::malformed(path, e))?;
        if file.version != BELIEFS_VERSION {
            return Err(Error::malformed(
                path,
                format!("unsupported belief file version {} (expected {BELIEFS_VERSION})", file.version),
            ));
        }
        for (i, p) in file.operators.iter().enumerate() {
            p.beliefs.validate().map_err(|e| Error::malformed(path, format!("operator {}: {e}", p.id)))?;
            if file.operators[..i].iter().any(|o| o.id == p.id) {
                return Err(Error::malformed(path, format!("duplicate operator id `{}`", p.id)));
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::report::write_json(self, path)
    }

    pub fn get(&self, id: &OperatorId) -> Option<&BeliefSet> {
        self.operators.iter().find(|p| &p.id == id).map(|p| &p.beliefs)
    }

    /// Starting beliefs for `operators` in registration order. Operators
    /// missing from the file start uninformed; ids the scenario does not
    /// know are rejected.
    pub fn initial_for(&self, operators: &[SimulatedOperator]) -> Result<Vec<BeliefSet>> {
        if let Some(p) = self.operators.iter().find(|p| operators.iter().all(|o| o.id != p.id)) {
            return Err(Error::Usage(format!("belief file names unknown operator `{}`", p.id)));
        }
        Ok(operators.iter().map(|o| self.get(&o.id).copied().unwrap_or(BeliefSet::UNINFORMED)).collect())
    }
}
