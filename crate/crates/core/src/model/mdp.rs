use std::ops::Range;

use super::policy::Policy;

/// A parameter-free MDP in compressed sparse row-group form.
///
/// State `s` owns the choices `choices(s)`, and choice `c` owns the entries
/// `entries(c)`. Target states are absorbing; any choices they carry are
/// ignored by the engines.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    initial: usize,
    state_choices: Vec<usize>,
    choice_entries: Vec<usize>,
    succ: Vec<usize>,
    prob: Vec<f64>,
    rewards: Vec<f64>,
    targets: Vec<bool>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choice_entries.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.succ.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.targets[s]
    }

    pub fn choices(&self, s: usize) -> Range<usize> {
        self.state_choices[s]..self.state_choices[s + 1]
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.state_choices[s + 1] - self.state_choices[s]
    }

    pub fn row(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.choice_entries[c]..self.choice_entries[c + 1];
        (&self.succ[r.clone()], &self.prob[r])
    }

    /// Expected successor value of choice `c`.
    pub fn dot(&self, c: usize, values: &[f64]) -> f64 {
        let (succ, prob) = self.row(c);
        succ.iter().zip(prob).map(|(&t, &p)| p * values[t]).sum()
    }

    /// The Markov chain obtained by keeping only the chosen action per state.
    /// States without a choice in the policy keep their first action.
    pub fn induced(&self, policy: &Policy) -> Mdp {
        let mut b = MdpBuilder::with_capacity(self.num_states(), self.num_entries());
        for s in 0..self.num_states() {
            b.push_state(self.rewards[s], self.targets[s]);
            if self.targets[s] || self.num_actions(s) == 0 {
                continue;
            }
            let a = policy.get(s).unwrap_or(0).min(self.num_actions(s) - 1);
            let (succ, prob) = self.row(self.state_choices[s] + a);
            b.push_choice(succ.iter().copied().zip(prob.iter().copied()));
        }
        b.build(self.initial)
    }

    /// Same structure with rewards replaced.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Mdp {
        assert_eq!(rewards.len(), self.num_states());
        Mdp {
            rewards,
            ..self.clone()
        }
    }

    pub fn is_markov_chain(&self) -> bool {
        (0..self.num_states()).all(|s| self.targets[s] || self.num_actions(s) <= 1)
    }
}

/// Incremental construction of an [`Mdp`], one state at a time.
#[derive(Debug, Default)]
pub struct MdpBuilder {
    state_choices: Vec<usize>,
    choice_entries: Vec<usize>,
    succ: Vec<usize>,
    prob: Vec<f64>,
    rewards: Vec<f64>,
    targets: Vec<bool>,
}

impl MdpBuilder {
    pub fn new() -> Self {
        Self::with_capacity(0, 0)
    }

    pub fn with_capacity(states: usize, entries: usize) -> Self {
        let mut state_choices = Vec::with_capacity(states + 1);
        state_choices.push(0);
        MdpBuilder {
            state_choices,
            choice_entries: vec![0],
            succ: Vec::with_capacity(entries),
            prob: Vec::with_capacity(entries),
            rewards: Vec::with_capacity(states),
            targets: Vec::with_capacity(states),
        }
    }

    /// Starts a new state; subsequent choices belong to it.
    pub fn push_state(&mut self, reward: f64, target: bool) -> usize {
        self.rewards.push(reward);
        self.targets.push(target);
        self.state_choices.push(self.choice_entries.len() - 1);
        self.rewards.len() - 1
    }

    /// Adds a choice to the most recently pushed state. Duplicate successors
    /// are merged.
    pub fn push_choice<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) {
        assert!(!self.rewards.is_empty(), "push_state before push_choice");
        let start = self.succ.len();
        for (t, p) in entries {
            if let Some(k) = self.succ[start..].iter().position(|&u| u == t) {
                self.prob[start + k] += p;
            } else {
                self.succ.push(t);
                self.prob.push(p);
            }
        }
        self.choice_entries.push(self.succ.len());
        *self.state_choices.last_mut().unwrap() = self.choice_entries.len() - 1;
    }

    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn build(self, initial: usize) -> Mdp {
        let n = self.rewards.len();
        assert!(initial < n, "initial state out of range");
        debug_assert!(self.succ.iter().all(|&t| t < n), "successor out of range");
        Mdp {
            initial,
            state_choices: self.state_choices,
            choice_entries: self.choice_entries,
            succ: self.succ,
            prob: self.prob,
            rewards: self.rewards,
            targets: self.targets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_layout() {
        let mut b = MdpBuilder::new();
        b.push_state(1.0, false);
        b.push_choice([(1, 0.5), (0, 0.5)]);
        b.push_choice([(1, 1.0)]);
        b.push_state(0.0, true);
        let m = b.build(0);
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.choices(0), 0..2);
        assert_eq!(m.choices(1), 2..2);
        assert_eq!(m.row(1), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn duplicate_successors_merge() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, false);
        b.push_choice([(1, 0.25), (1, 0.75)]);
        b.push_state(0.0, true);
        let m = b.build(0);
        assert_eq!(m.row(0), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn induced_chain_keeps_chosen_action() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, false);
        b.push_choice([(1, 1.0)]);
        b.push_choice([(2, 1.0)]);
        b.push_state(0.0, true);
        b.push_state(0.0, true);
        let m = b.build(0);
        let chain = m.induced(&Policy::from_choices(vec![Some(1), None, None]));
        assert!(chain.is_markov_chain());
        assert_eq!(chain.row(0).0, &[2]);
    }
}
