//! Robust value iteration on interval MDPs.
//!
//! The controller maximizes; the lower pass lets nature minimize within the
//! probability intervals and charges the low end of each reward interval, the
//! upper pass lets nature maximize and charges the high end.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Interval, Policy};

use super::{Convergence, SolverConfig, ValueVector};

const SUM_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 1e-12;

/// An MDP whose rewards and transition probabilities are intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMdp {
    initial: usize,
    state_choices: Vec<usize>,
    choice_entries: Vec<usize>,
    succ: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rewards: Vec<Interval>,
    targets: Vec<bool>,
}

impl IntervalMdp {
    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choice_entries.len() - 1
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn reward(&self, s: usize) -> Interval {
        self.rewards[s]
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.targets[s]
    }

    pub fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.state_choices[s]..self.state_choices[s + 1]
    }

    /// Successors with their lower and upper probabilities.
    pub fn row(&self, c: usize) -> (&[usize], &[f64], &[f64]) {
        let r = self.choice_entries[c]..self.choice_entries[c + 1];
        (&self.succ[r.clone()], &self.lo[r.clone()], &self.hi[r])
    }

    /// Checks that every interval is ordered and every row admits at least
    /// one distribution.
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check_suitable(&self) -> Result<()> {
        for s in 0..self.num_states() {
            let r = self.rewards[s];
            if !(r.lo <= r.hi + ORDER_TOL) || r.lo < -ORDER_TOL {
                return Err(Error::SuitabilityViolation(format!(
                    "state #{s}: reward interval [{}, {}]",
                    r.lo, r.hi
                )));
            }
            if self.targets[s] {
                continue;
            }
            for c in self.choices(s) {
                let (_, lo, hi) = self.row(c);
                if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] <= hi[k] + ORDER_TOL)) {
                    return Err(Error::SuitabilityViolation(format!(
                        "state #{s}: probability interval [{}, {}]",
                        lo[k], hi[k]
                    )));
                }
                let (sl, sh): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
                if sl > 1.0 + SUM_TOL || sh < 1.0 - SUM_TOL {
                    return Err(Error::SuitabilityViolation(format!(
                        "state #{s}: no distribution within bounds (sum of lower {sl}, sum of upper {sh})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether an entry can carry positive mass in some admissible distribution.
    fn possible(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (succ, lo, hi) = self.row(c);
        let slack = lo.iter().sum::<f64>() < 1.0 - SUM_TOL;
        (0..succ.len())
            .filter(move |&k| lo[k] > 0.0 || (slack && hi[k] > 0.0))
            .map(move |k| succ[k])
    }

    /// Almost-sure termination under every policy and every nature choice,
    /// restricted to states reachable from the initial state.
    fn ensure_stopping(&self) -> Result<Vec<bool>> {
        let n = self.num_states();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            if self.targets[s] {
                continue;
            }
            for c in self.choices(s) {
                for t in self.possible(c) {
                    preds[t].push(s);
                }
            }
        }
        let mut reach = vec![false; n];
        let mut stack = vec![self.initial];
        reach[self.initial] = true;
        while let Some(s) = stack.pop() {
            if self.targets[s] {
                continue;
            }
            for c in self.choices(s) {
                for t in self.possible(c) {
                    if !reach[t] {
                        reach[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        // Greatest set of non-target states where some action and some nature
        // choice keep all mass inside the set.
        let mut avoid: Vec<bool> = self.targets.iter().map(|t| !t).collect();
        let stays = |s: usize, avoid: &[bool]| {
            self.choices(s).any(|c| {
                let (succ, lo, hi) = self.row(c);
                let mut mass = 0.0;
                for k in 0..succ.len() {
                    if avoid[succ[k]] {
                        mass += hi[k];
                    } else if lo[k] > 0.0 {
                        return false;
                    }
                }
                mass >= 1.0 - SUM_TOL
            })
        };
        let mut work: Vec<usize> = (0..n).filter(|&s| avoid[s]).collect();
        while let Some(s) = work.pop() {
            if avoid[s] && !stays(s, &avoid) {
                avoid[s] = false;
                work.extend(preds[s].iter().copied().filter(|&p| avoid[p]));
            }
        }
        let mut escape = avoid.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&s| avoid[s]).collect();
        while let Some(t) = stack.pop() {
            for &p in &preds[t] {
                if !escape[p] {
                    escape[p] = true;
                    stack.push(p);
                }
            }
        }
        if let Some(s) = (0..n).find(|&s| reach[s] && escape[s]) {
            return Err(Error::DivergentReward(format!(
                "robust bounds: state #{s} does not reach a target almost surely under every policy"
            )));
        }
        Ok(reach)
    }

    /// Nature's optimal expectation over the row's interval polytope.
    fn inner(&self, c: usize, v: &[f64], minimize: bool, order: &mut Vec<usize>) -> f64 {
        let (succ, lo, hi) = self.row(c);
        let mut acc = 0.0;
        let mut rest = 1.0;
        for k in 0..succ.len() {
            acc += lo[k] * v[succ[k]];
            rest -= lo[k];
        }
        order.clear();
        order.extend(0..succ.len());
        order.sort_by(|&a, &b| {
            let o = v[succ[a]]
                .partial_cmp(&v[succ[b]])
                .unwrap_or(Ordering::Equal);
            if minimize {
                o
            } else {
                o.reverse()
            }
        });
        for &k in order.iter() {
            if rest <= 0.0 {
                break;
            }
            let add = (hi[k] - lo[k]).max(0.0).min(rest);
            acc += add * v[succ[k]];
            rest -= add;
        }
        acc
    }
}

/// Incremental construction of an [`IntervalMdp`].
#[derive(Debug, Default)]
pub struct IntervalMdpBuilder {
    state_choices: Vec<usize>,
    choice_entries: Vec<usize>,
    succ: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rewards: Vec<Interval>,
    targets: Vec<bool>,
}

impl IntervalMdpBuilder {
    pub fn new() -> Self {
        IntervalMdpBuilder {
            state_choices: vec![0],
            choice_entries: vec![0],
            ..Default::default()
        }
    }

    pub fn push_state(&mut self, reward: Interval, target: bool) -> usize {
        self.state_choices.push(self.choice_entries.len() - 1);
        self.rewards.push(reward);
        self.targets.push(target);
        self.rewards.len() - 1
    }

    /// Adds a choice to the last state; duplicate successors add up.
    pub fn push_choice<I: IntoIterator<Item = (usize, Interval)>>(&mut self, entries: I) {
        assert!(!self.rewards.is_empty(), "push_state before push_choice");
        let start = self.succ.len();
        for (t, iv) in entries {
            if let Some(k) = self.succ[start..].iter().position(|&u| u == t) {
                self.lo[start + k] += iv.lo;
                self.hi[start + k] += iv.hi;
            } else {
                self.succ.push(t);
                self.lo.push(iv.lo);
                self.hi.push(iv.hi);
            }
        }
        self.choice_entries.push(self.succ.len());
        *self.state_choices.last_mut().unwrap() = self.choice_entries.len() - 1;
    }

    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn build(self, initial: usize) -> IntervalMdp {
        assert!(initial < self.rewards.len(), "initial state out of range");
        IntervalMdp {
            initial,
            state_choices: self.state_choices,
            choice_entries: self.choice_entries,
            succ: self.succ,
            lo: self.lo,
            hi: self.hi,
            rewards: self.rewards,
            targets: self.targets,
        }
    }
}

/// Result of [`robust_value_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct RobustBounds {
    /// Lower value at the initial state, widened by the residual.
    pub lb: f64,
    /// Upper value at the initial state, widened by the residual.
    pub ub: f64,
    pub lower: ValueVector,
    pub upper: ValueVector,
    /// Maximizing policy of the lower pass.
    pub lower_policy: Policy,
    /// Maximizing policy of the upper pass.
    pub upper_policy: Policy,
}

/// Bounds on the maximal expected reward over all instantiations of `m`.
pub fn robust_value_bounds(m: &IntervalMdp, cfg: &SolverConfig) -> Result<RobustBounds> {
    m.check_suitable()?;
    let reach = m.ensure_stopping()?;
    let order: Vec<usize> = (0..m.num_states())
        .filter(|&s| reach[s] && !m.is_target(s))
        .collect();
    let (lower, lower_policy) = pass(m, &order, true, cfg)?;
    let (upper, upper_policy) = pass(m, &order, false, cfg)?;
    let init = m.initial();
    Ok(RobustBounds {
        lb: (lower.at(init) - lower.residual).max(0.0),
        ub: upper.at(init) + upper.residual,
        lower,
        upper,
        lower_policy,
        upper_policy,
    })
}

fn pass(
    m: &IntervalMdp,
    order: &[usize],
    pessimistic: bool,
    cfg: &SolverConfig,
) -> Result<(ValueVector, Policy)> {
    let reward = |s: usize| {
        let r = m.reward(s);
        if pessimistic {
            r.lo
        } else {
            r.hi
        }
    };
    let mut v = vec![0.0; m.num_states()];
    let mut scratch = Vec::new();
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &s in order {
            let mut best = f64::NEG_INFINITY;
            for c in m.choices(s) {
                best = best.max(m.inner(c, &v, pessimistic, &mut scratch));
            }
            let next = reward(s) + best;
            delta = delta.max((next - v[s]).abs());
            v[s] = next;
        }
        if let Some(r) = conv.step(delta)? {
            break r;
        }
    };
    let mut policy = Policy::empty(m.num_states());
    for &s in order {
        let q: Vec<f64> = m
            .choices(s)
            .map(|c| m.inner(c, &v, pessimistic, &mut scratch))
            .collect();
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        policy.set(
            s,
            q.iter().position(|&x| x >= best - cfg.epsilon).unwrap_or(0),
        );
    }
    Ok((
        ValueVector {
            values: v,
            iterations: conv.iterations(),
            residual,
        },
        policy,
    ))
}
