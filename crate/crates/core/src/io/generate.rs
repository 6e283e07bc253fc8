//! Model families for examples, tests and scale runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    ConcreteChoice, ExitMode, HierarchicalModel, MacroState, MultilinearExpr, PmdpBuilder, Region,
    Template, Valuation,
};

/// Edge layout of the token macro between the second and third level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenLayout {
    /// `m1 -> {m3, m4}`, `m2 -> {m3, m5}`; only defined for depth 3.
    Reference,
    /// `(d, i) -> {(d+1, i), (d+1, i+1)}` at every level.
    Lattice,
}

/// The token template: a send loop and an acknowledgement loop, each left
/// with probability `p` and costing one time unit per attempt.
pub fn token_template() -> Template {
    let mut b = PmdpBuilder::new(vec!["p".into()]);
    let s0 = b.add_state("s0");
    let s1 = b.add_state("s1");
    let s2 = b.add_state("s2");
    let p = MultilinearExpr::var(0);
    let q = MultilinearExpr::one()
        .sub(&p)
        .expect("1 - p is multilinear");
    b.add_choice(s0, "send", vec![(s1, p.clone()), (s0, q.clone())]);
    b.add_choice(s1, "ack", vec![(s2, p), (s1, q)]);
    b.set_reward(s0, MultilinearExpr::one());
    b.set_reward(s1, MultilinearExpr::one());
    b.set_target(s2, true);
    let admissible = Region::new(vec![0.05], vec![0.95]).expect("ordered box");
    Template::new(b.build(s0), vec![s2], admissible)
}

/// Channel quality of call `i` on level `d`: it starts at 1/2 and each step
/// down the lattice multiplies it by 4/5 (left) or 5/4 (right).
fn token_quality(d: usize, i: usize) -> f64 {
    let (l, r) = ((d - i) as i32, i as i32);
    let x = 4f64.powi(l) * 5f64.powi(r) / (2.0 * 5f64.powi(l) * 4f64.powi(r));
    x.clamp(0.05, 0.95)
}

/// The token macro with `depth` levels of calls; level `d` has `d + 1` calls
/// and a fair coin after each non-final call picks the next one.
pub fn token_model(layout: TokenLayout, depth: usize) -> Result<HierarchicalModel> {
    if depth == 0 {
        return Err(Error::InvalidArgument(
            "token depth must be positive".into(),
        ));
    }
    if layout == TokenLayout::Reference && depth != 3 {
        return Err(Error::InvalidArgument(
            "the reference token layout has exactly 3 levels".into(),
        ));
    }
    // Macro order: per level, each call followed by its coin; `done` last.
    let mut call_idx = vec![Vec::new(); depth];
    let mut next = 0;
    for (d, row) in call_idx.iter_mut().enumerate() {
        for _ in 0..=d {
            row.push(next);
            next += if d + 1 < depth { 2 } else { 1 };
        }
    }
    let done = next;
    let mut states = Vec::with_capacity(done + 1);
    let mut k = 0;
    for d in 0..depth {
        for i in 0..=d {
            let call = call_idx[d][i];
            let exit = if d + 1 < depth { call + 1 } else { done };
            states.push(MacroState::Call {
                name: format!("m{k}"),
                valuation: Valuation::new(vec![token_quality(d, i)]),
                exits: vec![exit],
            });
            if d + 1 < depth {
                let (left, right) = if layout == TokenLayout::Reference && (d, i) == (1, 1) {
                    (call_idx[2][0], call_idx[2][2])
                } else {
                    (call_idx[d + 1][i], call_idx[d + 1][i + 1])
                };
                states.push(MacroState::Concrete {
                    name: format!("c{k}"),
                    choices: vec![ConcreteChoice {
                        label: "flip".into(),
                        transitions: vec![(left, 0.5), (right, 0.5)],
                    }],
                    reward: 0.0,
                });
            }
            k += 1;
        }
    }
    states.push(MacroState::Concrete {
        name: "done".into(),
        choices: Vec::new(),
        reward: 0.0,
    });
    let mut targets = vec![false; states.len()];
    targets[done] = true;
    let model = HierarchicalModel::new(states, 0, targets, token_template(), ExitMode::Single);
    model.ensure_valid()?;
    Ok(model)
}

/// Parameters of the chain-grid family.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGridSpec {
    /// Number of call levels `D`.
    pub levels: usize,
    /// Calls per level `B`.
    pub width: usize,
    /// Template chain length `L`.
    pub chain_len: usize,
    pub seed: u64,
    /// Sets every call to `p = q = fixed` instead of sampling.
    pub fixed: Option<f64>,
}

pub const CHAIN_PARAM_LO: f64 = 0.2;
pub const CHAIN_PARAM_HI: f64 = 0.9;

/// A chain of `len` unit-reward states, each advancing with probability `p`
/// under action `a` or `q` under action `b`. The state next to the exit has
/// index 0 and the entry index `len - 1`; the exit is `len`.
pub fn chain_template(len: usize) -> Result<Template> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "chain length must be positive".into(),
        ));
    }
    let mut b = PmdpBuilder::new(vec!["p".into(), "q".into()]);
    for i in 0..=len {
        b.add_state(format!("s{i}"));
    }
    let one = MultilinearExpr::one();
    for i in 0..len {
        let succ = if i == 0 { len } else { i - 1 };
        for (label, k) in [("a", 0), ("b", 1)] {
            let x = MultilinearExpr::var(k);
            let stay = one.sub(&x)?;
            b.add_choice(i, label, vec![(succ, x), (i, stay)]);
        }
        b.set_reward(i, one.clone());
    }
    b.set_target(len, true);
    let admissible =
        Region::new(vec![CHAIN_PARAM_LO; 2], vec![CHAIN_PARAM_HI; 2]).expect("ordered box");
    Ok(Template::new(b.build(len - 1), vec![len], admissible))
}

/// `D` levels of `B` calls to a chain template. After each non-final call a
/// hub either splits evenly between the same and the next column, or moves
/// one column back; the last level exits to `done`.
pub fn chain_grid(spec: &ChainGridSpec) -> Result<HierarchicalModel> {
    let (d_n, b_n) = (spec.levels, spec.width);
    if d_n == 0 || b_n == 0 {
        return Err(Error::InvalidArgument(
            "levels and width must be positive".into(),
        ));
    }
    if let Some(x) = spec.fixed {
        if !(CHAIN_PARAM_LO..=CHAIN_PARAM_HI).contains(&x) {
            return Err(Error::InvalidArgument(format!(
                "fixed value {x} outside [{CHAIN_PARAM_LO}, {CHAIN_PARAM_HI}]"
            )));
        }
    }
    let template = chain_template(spec.chain_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || {
        let x: f64 = rng.gen_range(CHAIN_PARAM_LO..=CHAIN_PARAM_HI);
        (x * 1e4).round() / 1e4
    };
    let per_level = |d: usize| if d + 1 < d_n { 2 } else { 1 };
    let call_at =
        |d: usize, b: usize| (0..d).map(|e| per_level(e) * b_n).sum::<usize>() + per_level(d) * b;
    let done = (0..d_n).map(|d| per_level(d) * b_n).sum::<usize>();
    let mut states = Vec::with_capacity(done + 1);
    for d in 0..d_n {
        for b in 0..b_n {
            let values = match spec.fixed {
                Some(x) => vec![x, x],
                None => vec![draw(), draw()],
            };
            let last = d + 1 == d_n;
            states.push(MacroState::Call {
                name: format!("m{d}_{b}"),
                valuation: Valuation::new(values),
                exits: vec![if last { done } else { call_at(d, b) + 1 }],
            });
            if !last {
                let left = vec![
                    (call_at(d + 1, b), 0.5),
                    (call_at(d + 1, (b + 1) % b_n), 0.5),
                ];
                let right = vec![(call_at(d + 1, (b + b_n - 1) % b_n), 1.0)];
                states.push(MacroState::Concrete {
                    name: format!("h{d}_{b}"),
                    choices: vec![
                        ConcreteChoice {
                            label: "left".into(),
                            transitions: merge(left),
                        },
                        ConcreteChoice {
                            label: "right".into(),
                            transitions: right,
                        },
                    ],
                    reward: 0.0,
                });
            }
        }
    }
    states.push(MacroState::Concrete {
        name: "done".into(),
        choices: Vec::new(),
        reward: 0.0,
    });
    let mut targets = vec![false; states.len()];
    targets[done] = true;
    let model = HierarchicalModel::new(states, 0, targets, template, ExitMode::Single);
    model.ensure_valid()?;
    Ok(model)
}

/// Sums entries with the same successor (width 1 sends both halves to one
/// call).
fn merge(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (t, p) in entries {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 += p,
            _ => out.push((t, p)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{enumerate_baseline, flatten_and_solve, DEFAULT_FLAT_CAP};
    use crate::numerics::{max_expected_reward, SolverConfig};

    #[test]
    fn reference_token_layout() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let names: Vec<&str> = m.states().iter().map(MacroState::name).collect();
        assert_eq!(
            names,
            ["m0", "c0", "m1", "c1", "m2", "c2", "m3", "m4", "m5", "done"]
        );
        let ps: Vec<f64> = (0..6).map(|i| m.call_valuation(i).get(0)).collect();
        let want = [0.5, 0.4, 0.625, 0.32, 0.5, 0.78125];
        assert_eq!(ps, want);
        let MacroState::Concrete { choices, .. } = m.state(5) else {
            panic!("c2 is a coin")
        };
        assert_eq!(choices[0].transitions, vec![(6, 0.5), (8, 0.5)]);
    }

    #[test]
    fn reference_layout_needs_depth_three() {
        assert!(token_model(TokenLayout::Reference, 4).is_err());
        let m = token_model(TokenLayout::Lattice, 6).unwrap();
        assert_eq!(m.num_calls(), 21);
    }

    #[test]
    fn token_template_values() {
        let t = token_template();
        let cfg = SolverConfig::default();
        for (p, want) in [(0.5, 4.0), (0.4, 5.0)] {
            let m = t.instantiate(&Valuation::new(vec![p])).unwrap();
            let (v, _) = max_expected_reward(&m, &cfg).unwrap();
            assert!((v.at(m.initial()) - want).abs() < 1e-7);
        }
    }

    #[test]
    fn chain_template_value_is_len_over_slowest() {
        let t = chain_template(7).unwrap();
        let m = t.instantiate(&Valuation::new(vec![0.8, 0.25])).unwrap();
        let (v, _) = max_expected_reward(&m, &SolverConfig::default()).unwrap();
        assert!((v.at(m.initial()) - 7.0 / 0.25).abs() < 1e-6);
    }

    #[test]
    fn single_fixed_call_is_template_value() {
        let spec = ChainGridSpec {
            levels: 1,
            width: 1,
            chain_len: 5,
            seed: 0,
            fixed: Some(0.5),
        };
        let m = chain_grid(&spec).unwrap();
        let f = flatten_and_solve(&m, DEFAULT_FLAT_CAP, &SolverConfig::default()).unwrap();
        assert!((f - 10.0).abs() < 1e-6);
    }

    #[test]
    fn seeded_grid_is_deterministic_and_consistent() {
        let spec = ChainGridSpec {
            levels: 4,
            width: 10,
            chain_len: 8,
            seed: 7,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        assert_eq!(m, chain_grid(&spec).unwrap());
        assert_eq!(m.num_calls(), 40);
        for i in 0..m.num_calls() {
            for &x in m.call_valuation(i).values() {
                assert!((CHAIN_PARAM_LO..=CHAIN_PARAM_HI).contains(&x));
                assert_eq!((x * 1e4).round() / 1e4, x);
            }
        }
        let cfg = SolverConfig::default();
        let (e, _) = enumerate_baseline(&m, &cfg).unwrap();
        let f = flatten_and_solve(&m, DEFAULT_FLAT_CAP, &cfg).unwrap();
        assert!((e - f).abs() < 1e-6, "{e} vs {f}");
    }

    #[test]
    fn width_one_hub_merges_entries() {
        let spec = ChainGridSpec {
            levels: 2,
            width: 1,
            chain_len: 2,
            seed: 3,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        let MacroState::Concrete { choices, .. } = m.state(1) else {
            panic!("hub")
        };
        assert_eq!(choices[0].transitions, vec![(2, 1.0)]);
    }
}
