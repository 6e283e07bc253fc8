use crate::error::{Error, Result};
use crate::model::Mdp;

use super::value::mdp_graph;
use super::{Convergence, SolverConfig};

/// Expected number of visits per state of an absorbing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitVector {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl VisitVector {
    pub fn at(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Solves `xi = e_init + P^T xi` over the transient states of `chain`.
///
/// Targets absorb: they collect visits but pass none on. Fails with
/// `DivergentReward` if a reachable state can avoid the targets forever.
pub fn expected_visits(chain: &Mdp, cfg: &SolverConfig) -> Result<VisitVector> {
    if !chain.is_markov_chain() {
        return Err(Error::InvalidArgument(
            "expected visits need a Markov chain (at most one action per state)".into(),
        ));
    }
    let reach = mdp_graph(chain).ensure_stopping(chain.initial(), "expected visits")?;
    let n = chain.num_states();
    let mut preds: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| reach[s] && !chain.is_target(s)) {
        for c in chain.choices(s) {
            let (succ, prob) = chain.row(c);
            for (&t, &p) in succ.iter().zip(prob) {
                preds[t].push((s, p));
            }
        }
    }
    let order: Vec<usize> = (0..n).filter(|&s| reach[s]).collect();
    let mut xi = vec![0.0; n];
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &t in &order {
            let base = if t == chain.initial() { 1.0 } else { 0.0 };
            let next = base + preds[t].iter().map(|&(s, p)| p * xi[s]).sum::<f64>();
            delta = delta.max((next - xi[t]).abs());
            xi[t] = next;
        }
        if let Some(r) = conv.step(delta)? {
            break r;
        }
    };
    Ok(VisitVector {
        values: xi,
        iterations: conv.iterations(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MdpBuilder;
    use crate::numerics::max_expected_reward;

    /// The token macro chain: m0 c0 m1 c1 m2 c2 m3 m4 m5 done.
    fn token_chain() -> Mdp {
        let mut b = MdpBuilder::new();
        b.push_state(4.0, false);
        b.push_choice([(1, 1.0)]);
        b.push_state(0.0, false);
        b.push_choice([(2, 0.5), (4, 0.5)]);
        b.push_state(5.0, false);
        b.push_choice([(3, 1.0)]);
        b.push_state(0.0, false);
        b.push_choice([(6, 0.5), (7, 0.5)]);
        b.push_state(3.2, false);
        b.push_choice([(5, 1.0)]);
        b.push_state(0.0, false);
        b.push_choice([(6, 0.5), (8, 0.5)]);
        for r in [6.25, 4.0, 2.56] {
            b.push_state(r, false);
            b.push_choice([(9, 1.0)]);
        }
        b.push_state(0.0, true);
        b.build(0)
    }

    #[test]
    fn token_visits() {
        let v = expected_visits(&token_chain(), &SolverConfig::default()).unwrap();
        let calls = [0, 2, 4, 6, 7, 8].map(|s| v.at(s));
        for (got, want) in calls.iter().zip([1.0, 0.5, 0.5, 0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn visits_dot_rewards_is_value() {
        let m = token_chain();
        let cfg = SolverConfig::default();
        let xi = expected_visits(&m, &cfg).unwrap();
        let dot: f64 = xi.values.iter().zip(m.rewards()).map(|(a, b)| a * b).sum();
        let (v, _) = max_expected_reward(&m, &cfg).unwrap();
        assert!((dot - v.at(0)).abs() < 1e-7);
        assert!((dot - 12.865).abs() < 1e-9);
    }

    #[test]
    fn single_target_state() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, true);
        let v = expected_visits(&b.build(0), &SolverConfig::default()).unwrap();
        assert_eq!(v.values, vec![1.0]);
    }

    #[test]
    fn two_state_chain() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, false);
        b.push_choice([(1, 1.0)]);
        b.push_state(0.0, true);
        let v = expected_visits(&b.build(0), &SolverConfig::default()).unwrap();
        assert_eq!(v.values, vec![1.0, 1.0]);
    }

    #[test]
    fn self_loop_counts_geometrically() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, false);
        b.push_choice([(0, 0.75), (1, 0.25)]);
        b.push_state(0.0, true);
        let v = expected_visits(&b.build(0), &SolverConfig::default()).unwrap();
        assert!((v.at(0) - 4.0).abs() < 1e-7);
    }

    #[test]
    fn recurrent_class_is_divergent() {
        let mut b = MdpBuilder::new();
        b.push_state(0.0, false);
        b.push_choice([(0, 1.0)]);
        b.push_state(0.0, true);
        assert!(matches!(
            expected_visits(&b.build(0), &SolverConfig::default()),
            Err(Error::DivergentReward(_))
        ));
    }
}
