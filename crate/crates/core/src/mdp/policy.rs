use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

use super::space::StateSpace;
use super::Action;

/// Action per truncated CMDP state, looked up with Δ saturated at Δ_thr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicPolicy {
    space: StateSpace,
    actions: Vec<Action>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    state_index: usize,
    delta: u32,
    upsilon: u8,
    action: Action,
}

impl DeterministicPolicy {
    pub fn new(space: StateSpace, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != space.len() {
            return Err(Error::CorruptedPolicy(format!(
                "{} actions for {} states",
                actions.len(),
                space.len()
            )));
        }
        Ok(Self { space, actions })
    }

    pub fn from_indices(space: StateSpace, indices: &[usize]) -> Result<Self> {
        let actions = indices
            .iter()
            .map(|&i| Action::from_index(i).ok_or_else(|| Error::CorruptedPolicy(format!("action index {i}"))))
            .collect::<Result<_>>()?;
        Self::new(space, actions)
    }

    pub fn uniform(space: StateSpace, action: Action) -> Self {
        Self { space, actions: vec![action; space.len()] }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn indices(&self) -> Vec<usize> {
        self.actions.iter().map(|a| a.index()).collect()
    }

    pub fn lookup(&self, delta: u32, upsilon: u8) -> Result<Action> {
        if !(1..=4).contains(&upsilon) || delta == 0 {
            return Err(Error::CorruptedPolicy(format!("no entry for (Δ={delta}, Υ={upsilon})")));
        }
        Ok(self.actions[self.space.index(delta, upsilon)])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (i, s) in self.space.states().enumerate() {
            w.serialize(Row { state_index: i, delta: s.delta, upsilon: s.upsilon, action: self.actions[i] })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(path, &bytes)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = BTreeMap::new();
        for rec in r.deserialize::<Row>() {
            let row = rec.map_err(|e| Error::CorruptedPolicy(e.to_string()))?;
            let expected = (row.delta.max(1) as usize - 1) * 4 + (row.upsilon.max(1) as usize - 1);
            if row.delta == 0 || !(1..=4).contains(&row.upsilon) || expected != row.state_index {
                return Err(Error::CorruptedPolicy(format!(
                    "row {} has inconsistent (Δ={}, Υ={})",
                    row.state_index, row.delta, row.upsilon
                )));
            }
            if rows.insert(row.state_index, row.action).is_some() {
                return Err(Error::CorruptedPolicy(format!("duplicate state {}", row.state_index)));
            }
        }
        let n = rows.len();
        if n == 0 || n % 4 != 0 || rows.keys().copied().ne(0..n) {
            return Err(Error::CorruptedPolicy("policy table does not cover a full state space".into()));
        }
        Self::new(StateSpace::new((n / 4) as u32)?, rows.into_values().collect())
    }
}
