//! Qualitative graph analysis used to machine-check the almost-sure
//! termination assumption before any value iteration runs.

use crate::error::{Error, Result};

/// States, choices and successor sets, with predecessor lists.
#[derive(Debug, Clone)]
pub(crate) struct ChoiceGraph {
    targets: Vec<bool>,
    state_choices: Vec<usize>,
    choice_owner: Vec<usize>,
    choice_succ: Vec<usize>,
    succ: Vec<usize>,
    pred_start: Vec<usize>,
    pred_choice: Vec<usize>,
}

impl ChoiceGraph {
    /// `choices_of(s, emit)` emits one successor set per choice of state `s`.
    pub(crate) fn build<F>(targets: Vec<bool>, mut choices_of: F) -> Self
    where
        F: FnMut(usize, &mut dyn FnMut(&[usize])),
    {
        let n = targets.len();
        let mut state_choices = Vec::with_capacity(n + 1);
        let mut choice_owner = Vec::new();
        let mut choice_succ = vec![0];
        let mut succ = Vec::new();
        state_choices.push(0);
        for (s, &is_target) in targets.iter().enumerate() {
            if !is_target {
                choices_of(s, &mut |row: &[usize]| {
                    let start = succ.len();
                    for &t in row {
                        if !succ[start..].contains(&t) {
                            succ.push(t);
                        }
                    }
                    choice_succ.push(succ.len());
                    choice_owner.push(s);
                });
            }
            state_choices.push(choice_owner.len());
        }
        let mut counts = vec![0usize; n + 1];
        for &t in &succ {
            counts[t + 1] += 1;
        }
        for k in 1..=n {
            counts[k] += counts[k - 1];
        }
        let pred_start = counts.clone();
        let mut fill = counts;
        let mut pred_choice = vec![0; succ.len()];
        for c in 0..choice_owner.len() {
            for &t in &succ[choice_succ[c]..choice_succ[c + 1]] {
                pred_choice[fill[t]] = c;
                fill[t] += 1;
            }
        }
        ChoiceGraph {
            targets,
            state_choices,
            choice_owner,
            choice_succ,
            succ,
            pred_start,
            pred_choice,
        }
    }

    fn n(&self) -> usize {
        self.targets.len()
    }

    fn succs(&self, c: usize) -> &[usize] {
        &self.succ[self.choice_succ[c]..self.choice_succ[c + 1]]
    }

    fn preds(&self, t: usize) -> &[usize] {
        &self.pred_choice[self.pred_start[t]..self.pred_start[t + 1]]
    }

    pub(crate) fn forward_reachable(&self, initial: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![initial];
        seen[initial] = true;
        while let Some(s) = stack.pop() {
            for c in self.state_choices[s]..self.state_choices[s + 1] {
                for &t in self.succs(c) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }

    /// States from which some choice sequence reaches `goal` (backward search
    /// through non-target states).
    pub(crate) fn can_reach(&self, goal: &[bool]) -> Vec<bool> {
        let mut seen: Vec<bool> = goal.to_vec();
        let mut stack: Vec<usize> = (0..self.n()).filter(|&s| goal[s]).collect();
        while let Some(t) = stack.pop() {
            for &c in self.preds(t) {
                let p = self.choice_owner[c];
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// States that reach a target with probability one under every policy.
    pub(crate) fn almost_sure_all(&self) -> Vec<bool> {
        let n = self.n();
        // Greatest fixpoint of states with a choice that never leaves the set
        // (deadlocks included): some policy avoids the targets forever.
        let mut avoid: Vec<bool> = self.targets.iter().map(|t| !t).collect();
        let num_c = self.choice_owner.len();
        let mut outside = vec![0usize; num_c];
        let mut good = vec![0usize; n];
        for c in 0..num_c {
            outside[c] = self.succs(c).iter().filter(|&&t| !avoid[t]).count();
            if outside[c] == 0 {
                good[self.choice_owner[c]] += 1;
            }
        }
        let mut stack = Vec::new();
        for s in 0..n {
            let has_choices = self.state_choices[s + 1] > self.state_choices[s];
            if avoid[s] && has_choices && good[s] == 0 {
                avoid[s] = false;
                stack.push(s);
            }
        }
        while let Some(t) = stack.pop() {
            for &c in self.preds(t) {
                outside[c] += 1;
                if outside[c] == 1 {
                    let p = self.choice_owner[c];
                    good[p] -= 1;
                    if avoid[p] && good[p] == 0 {
                        avoid[p] = false;
                        stack.push(p);
                    }
                }
            }
        }
        // Anything that can be steered into that set with positive probability
        // misses the targets with positive probability.
        let escape = self.can_reach(&avoid);
        escape.iter().map(|e| !e).collect()
    }

    /// Checks that every state reachable from `initial` terminates almost
    /// surely under all policies; returns the reachable mask.
    pub(crate) fn ensure_stopping(&self, initial: usize, what: &str) -> Result<Vec<bool>> {
        let reach = self.forward_reachable(initial);
        let ok = self.almost_sure_all();
        if let Some(s) = (0..self.n()).find(|&s| reach[s] && !ok[s]) {
            return Err(Error::DivergentReward(format!(
                "{what}: state #{s} does not reach a target almost surely under every policy"
            )));
        }
        Ok(reach)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(targets: Vec<bool>, rows: Vec<Vec<Vec<usize>>>) -> ChoiceGraph {
        ChoiceGraph::build(targets, |s, emit: &mut dyn FnMut(&[usize])| {
            for r in &rows[s] {
                emit(r);
            }
        })
    }

    #[test]
    fn loop_with_exit_is_almost_sure() {
        // 0 -> {0, 1}, 1 target
        let g = graph(vec![false, true], vec![vec![vec![0, 1]], vec![]]);
        assert_eq!(g.almost_sure_all(), vec![true, true]);
    }

    #[test]
    fn policy_that_can_loop_forever_is_flagged() {
        // 0: a -> {0} (pure self-loop), b -> {1}
        let g = graph(vec![false, true], vec![vec![vec![0], vec![1]], vec![]]);
        assert_eq!(g.almost_sure_all(), vec![false, true]);
        assert!(g.ensure_stopping(0, "test").is_err());
    }

    #[test]
    fn deadlock_is_not_terminating() {
        // 0 -> {1, 2}; 1 deadlock; 2 target
        let g = graph(
            vec![false, false, true],
            vec![vec![vec![1, 2]], vec![], vec![]],
        );
        assert_eq!(g.almost_sure_all(), vec![false, false, true]);
    }

    #[test]
    fn unreachable_trap_is_ignored() {
        // 0 -> 2 (target); 1 -> 1 unreachable
        let g = graph(
            vec![false, false, true],
            vec![vec![vec![2]], vec![vec![1]], vec![]],
        );
        let reach = g.ensure_stopping(0, "test").unwrap();
        assert_eq!(reach, vec![true, false, true]);
    }
}
