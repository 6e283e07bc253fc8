use crate::error::Result;
use crate::model::{Mdp, Policy};

use super::{backup_row, ChoiceGraph, Convergence, SolverConfig, ValueVector};

pub(crate) fn mdp_graph(m: &Mdp) -> ChoiceGraph {
    ChoiceGraph::build(m.targets().to_vec(), |s, emit: &mut dyn FnMut(&[usize])| {
        for c in m.choices(s) {
            emit(m.row(c).0);
        }
    })
}

/// Maximal expected reward until a target, with a greedy optimal policy.
///
/// Fails with `DivergentReward` unless every reachable state terminates almost
/// surely under all policies. Ties go to the lowest action index.
pub fn max_expected_reward(m: &Mdp, cfg: &SolverConfig) -> Result<(ValueVector, Policy)> {
    let reach = mdp_graph(m).ensure_stopping(m.initial(), "expected reward")?;
    let order: Vec<usize> = (0..m.num_states())
        .filter(|&s| reach[s] && !m.is_target(s))
        .collect();
    let mut v = vec![0.0; m.num_states()];
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &s in &order {
            let mut next = f64::NEG_INFINITY;
            for c in m.choices(s) {
                let (succ, prob) = m.row(c);
                next = next.max(backup_row(s, m.reward(s), succ, prob, &v));
            }
            delta = delta.max((next - v[s]).abs());
            v[s] = next;
        }
        if let Some(r) = conv.step(delta)? {
            break r;
        }
    };
    let policy = greedy(m, &order, &v, |s| m.reward(s), cfg.epsilon);
    Ok((
        ValueVector {
            values: v,
            iterations: conv.iterations(),
            residual,
        },
        policy,
    ))
}

/// Maximal probability of reaching `goal`, with a greedy optimal policy.
/// The model must terminate almost surely under every policy.
pub fn max_reachability(
    m: &Mdp,
    goal: &[bool],
    cfg: &SolverConfig,
) -> Result<(ValueVector, Policy)> {
    let reach = mdp_graph(m).ensure_stopping(m.initial(), "reachability")?;
    let order: Vec<usize> = (0..m.num_states())
        .filter(|&s| reach[s] && !m.is_target(s) && !goal[s])
        .collect();
    let mut v: Vec<f64> = goal.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &s in &order {
            let mut best = f64::NEG_INFINITY;
            for c in m.choices(s) {
                let (succ, prob) = m.row(c);
                best = best.max(backup_row(s, 0.0, succ, prob, &v));
            }
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if let Some(r) = conv.step(delta)? {
            break r;
        }
    };
    let policy = greedy(m, &order, &v, |_| 0.0, cfg.epsilon);
    Ok((
        ValueVector {
            values: v,
            iterations: conv.iterations(),
            residual,
        },
        policy,
    ))
}

fn greedy(m: &Mdp, order: &[usize], v: &[f64], reward: impl Fn(usize) -> f64, tol: f64) -> Policy {
    let mut policy = Policy::empty(m.num_states());
    for &s in order {
        let q: Vec<f64> = m
            .choices(s)
            .map(|c| {
                let (succ, prob) = m.row(c);
                backup_row(s, reward(s), succ, prob, v)
            })
            .collect();
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pick = q.iter().position(|&x| x >= best - tol).unwrap_or(0);
        policy.set(s, pick);
    }
    policy
}

/// Probability of reaching `goal` in the chain induced by `policy`.
/// States with no path to `goal` get exactly zero.
pub fn reachability_probability(
    m: &Mdp,
    policy: &Policy,
    goal: &[bool],
    cfg: &SolverConfig,
) -> Result<ValueVector> {
    let chain = m.induced(policy);
    let can = mdp_graph(&chain).can_reach(goal);
    let order: Vec<usize> = (0..chain.num_states())
        .filter(|&s| can[s] && !goal[s] && !chain.is_target(s))
        .collect();
    let mut v: Vec<f64> = goal.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &s in &order {
            let next = chain.choices(s).next().map_or(0.0, |c| {
                let (succ, prob) = chain.row(c);
                backup_row(s, 0.0, succ, prob, &v)
            });
            delta = delta.max((next - v[s]).abs());
            v[s] = next;
        }
        if let Some(r) = conv.step(delta)? {
            break r;
        }
    };
    Ok(ValueVector {
        values: v,
        iterations: conv.iterations(),
        residual,
    })
}

/// Expected reward until a target in the chain induced by `policy`.
pub fn expected_reward_under(m: &Mdp, policy: &Policy, cfg: &SolverConfig) -> Result<ValueVector> {
    max_expected_reward(&m.induced(policy), cfg).map(|(v, _)| v)
}
