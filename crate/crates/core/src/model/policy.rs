use serde::{Deserialize, Serialize};

/// A memoryless, possibly partial, policy: state index to action index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Policy {
    choice: Vec<Option<usize>>,
}

impl Policy {
    pub fn empty(num_states: usize) -> Self {
        Policy {
            choice: vec![None; num_states],
        }
    }

    pub fn from_choices(choice: Vec<Option<usize>>) -> Self {
        Policy { choice }
    }

    pub fn get(&self, s: usize) -> Option<usize> {
        self.choice.get(s).copied().flatten()
    }

    pub fn set(&mut self, s: usize, action: usize) {
        self.choice[s] = Some(action);
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choice
    }
}
