//! Macro-level views of a hierarchical model: the uncertain macro MDP, slot
//! assignments built from bounds, the enumeration baseline and the flat
//! oracle.

use std::collections::HashMap;

use rayon::prelude::*;
use tracing::warn;

use crate::error::{Error, Result};
use crate::lifting::check_one;
use crate::model::{
    ExitMode, HierarchicalModel, Interval, MacroState, Mdp, MdpBuilder, Policy, ResultBounds,
    ResultVector, Valuation,
};
use crate::numerics::{
    max_expected_reward, max_reachability, IntervalMdp, IntervalMdpBuilder, SolverConfig,
};

/// Call states for which optimal local subpolicies are not guaranteed.
///
/// A call is fine if the template has a single exit, has no choices, or the
/// model runs in success-target mode (where the subpolicy is fixed by the
/// success objective).
pub fn check_local_optimality(model: &HierarchicalModel) -> Vec<usize> {
    let template = model.template();
    let fine = template.exit_count() == 1
        || template.pmdp().is_markov_chain()
        || matches!(model.mode(), ExitMode::SuccessTarget { .. });
    if fine {
        Vec::new()
    } else {
        model.calls().to_vec()
    }
}

/// Fails with `LocalOptimality` unless the check passes or `allow` is set, in
/// which case results are only heuristic and a warning is logged.
pub fn ensure_local_optimality(model: &HierarchicalModel, allow: bool) -> Result<()> {
    let bad = check_local_optimality(model);
    if bad.is_empty() {
        return Ok(());
    }
    if allow {
        warn!(
            calls = bad.len(),
            "local optimality not guaranteed; bounds are not sound"
        );
        return Ok(());
    }
    Err(Error::LocalOptimality(bad))
}

#[derive(Debug, Clone, PartialEq)]
enum Skeleton {
    Concrete {
        reward: f64,
        choices: Vec<Vec<(usize, f64)>>,
    },
    Call {
        exits: Vec<usize>,
    },
}

/// The macro MDP with the reward and exit probabilities of every call left
/// open. Call `i` owns one reward slot and, in success-target mode, one
/// coupled pair of exit-probability slots.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainMacro {
    initial: usize,
    targets: Vec<bool>,
    states: Vec<Skeleton>,
    calls: Vec<usize>,
    mode: ExitMode,
}

impl UncertainMacro {
    pub fn build(model: &HierarchicalModel) -> Self {
        let states = model
            .states()
            .iter()
            .map(|st| match st {
                MacroState::Concrete {
                    choices, reward, ..
                } => Skeleton::Concrete {
                    reward: *reward,
                    choices: choices.iter().map(|c| c.transitions.clone()).collect(),
                },
                MacroState::Call { exits, .. } => Skeleton::Call {
                    exits: exits.clone(),
                },
            })
            .collect();
        UncertainMacro {
            initial: model.initial(),
            targets: model.targets().to_vec(),
            states,
            calls: model.calls().to_vec(),
            mode: model.mode(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_calls(&self) -> usize {
        self.calls.len()
    }

    pub fn mode(&self) -> ExitMode {
        self.mode
    }

    /// Number of reward slots and of coupled probability pairs.
    pub fn slot_counts(&self) -> (usize, usize) {
        let pairs = match self.mode {
            ExitMode::Single => 0,
            ExitMode::SuccessTarget { .. } => self.calls.len(),
        };
        (self.calls.len(), pairs)
    }

    fn build_with<R, P>(&self, mut reward: R, mut prob: P) -> Mdp
    where
        R: FnMut(usize) -> f64,
        P: FnMut(usize, usize) -> f64,
    {
        let mut b = MdpBuilder::with_capacity(self.states.len(), self.states.len() * 2);
        let mut call = 0;
        for (s, st) in self.states.iter().enumerate() {
            match st {
                Skeleton::Concrete { reward, choices } => {
                    b.push_state(*reward, self.targets[s]);
                    if !self.targets[s] {
                        for row in choices {
                            b.push_choice(row.iter().copied());
                        }
                    }
                }
                Skeleton::Call { exits } => {
                    let i = call;
                    call += 1;
                    b.push_state(reward(i), self.targets[s]);
                    if !self.targets[s] {
                        let row: Vec<(usize, f64)> = exits
                            .iter()
                            .enumerate()
                            .map(|(j, &t)| (t, prob(i, j)))
                            .filter(|&(_, p)| p > 0.0)
                            .collect();
                        b.push_choice(row);
                    }
                }
            }
        }
        b.build(self.initial)
    }

    /// The macro MDP with every slot filled from an exact result vector.
    pub fn instantiate(&self, results: &[ResultVector]) -> Result<Mdp> {
        if results.len() != self.calls.len() {
            return Err(Error::InvalidArgument(format!(
                "{} result vectors for {} calls",
                results.len(),
                self.calls.len()
            )));
        }
        Ok(self.build_with(|i| results[i].reward, |i, j| results[i].probs[j]))
    }

    /// The macro MDP at the center of a slot assignment. Exit probabilities
    /// are renormalized to sum to one.
    pub fn instantiate_center(&self, assignment: &SlotAssignment) -> Mdp {
        let mid = |lo: f64, hi: f64| 0.5 * (lo + hi);
        self.build_with(
            |i| {
                let b = &assignment.bounds[i];
                mid(b.lower.reward, b.upper.reward)
            },
            |i, j| {
                let b = &assignment.bounds[i];
                let total: f64 = (0..b.lower.probs.len())
                    .map(|k| mid(b.lower.probs[k], b.upper.probs[k]))
                    .sum();
                mid(b.lower.probs[j], b.upper.probs[j]) / total
            },
        )
    }

    /// The interval MDP described by a slot assignment.
    pub fn to_interval_mdp(&self, assignment: &SlotAssignment) -> IntervalMdp {
        let mut b = IntervalMdpBuilder::new();
        let mut call = 0;
        for (s, st) in self.states.iter().enumerate() {
            match st {
                Skeleton::Concrete { reward, choices } => {
                    b.push_state(Interval::point(*reward), self.targets[s]);
                    if !self.targets[s] {
                        for row in choices {
                            b.push_choice(row.iter().map(|&(t, p)| (t, Interval::point(p))));
                        }
                    }
                }
                Skeleton::Call { exits } => {
                    let bounds = &assignment.bounds[call];
                    call += 1;
                    b.push_state(
                        Interval::new(bounds.lower.reward, bounds.upper.reward),
                        self.targets[s],
                    );
                    if !self.targets[s] {
                        b.push_choice(exits.iter().enumerate().map(|(j, &t)| {
                            (
                                t,
                                Interval::new(bounds.lower.probs[j], bounds.upper.probs[j]),
                            )
                        }));
                    }
                }
            }
        }
        b.build(self.initial)
    }
}

/// Where one call's slot values come from.
#[derive(Debug, Clone, Copy)]
pub enum SlotSource<'a> {
    Exact(&'a ResultVector),
    Bounds(&'a ResultBounds),
}

/// One interval per slot, indexed by call.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAssignment {
    pub bounds: Vec<ResultBounds>,
}

impl SlotAssignment {
    pub fn get(&self, call: usize) -> &ResultBounds {
        &self.bounds[call]
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }
}

/// Collects slot intervals for calls `0..num_calls`; exact vectors become
/// point intervals. Fails with `CoverageGap` on the first uncovered call.
pub fn suitable_region<'a, F>(num_calls: usize, mut source: F) -> Result<SlotAssignment>
where
    F: FnMut(usize) -> Option<SlotSource<'a>>,
{
    let mut bounds = Vec::with_capacity(num_calls);
    for i in 0..num_calls {
        match source(i) {
            Some(SlotSource::Exact(r)) => bounds.push(ResultBounds::exact(r)),
            Some(SlotSource::Bounds(b)) => bounds.push(b.clone()),
            None => return Err(Error::CoverageGap(i)),
        }
    }
    Ok(SlotAssignment { bounds })
}

/// Exact result vectors of every call, solving each distinct valuation once.
pub fn exact_results(model: &HierarchicalModel, cfg: &SolverConfig) -> Result<Vec<ResultVector>> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut distinct: Vec<&Valuation> = Vec::new();
    let slot: Vec<usize> = (0..model.num_calls())
        .map(|i| {
            let v = model.call_valuation(i);
            *index.entry(v.key()).or_insert_with(|| {
                distinct.push(v);
                distinct.len() - 1
            })
        })
        .collect();
    let template = model.template();
    let mode = model.mode();
    let solved: Vec<ResultVector> = distinct
        .par_iter()
        .map(|v| check_one(template, v, mode, cfg))
        .collect::<Result<_>>()?;
    Ok(slot.into_iter().map(|k| solved[k].clone()).collect())
}

/// Solves every subMDP, instantiates the macro MDP with the results and
/// returns its maximal expected reward with the optimal macro policy.
pub fn enumerate_baseline(model: &HierarchicalModel, cfg: &SolverConfig) -> Result<(f64, Policy)> {
    let results = exact_results(model, cfg)?;
    let mdp = UncertainMacro::build(model).instantiate(&results)?;
    let (v, policy) = max_expected_reward(&mdp, cfg)?;
    Ok((v.at(mdp.initial()), policy))
}

/// Default bound on the number of flat states.
pub const DEFAULT_FLAT_CAP: u64 = 10_000_000;

/// Builds the explicit hierarchical MDP by splicing one template copy per
/// call. The copy's entry takes the place of the call state; its exits are
/// wired to the call's successors. In success-target mode each copy keeps
/// only the success-maximizing actions.
pub fn flatten(model: &HierarchicalModel, cap: u64, cfg: &SolverConfig) -> Result<Mdp> {
    let states = model.flat_state_count();
    if states > cap {
        return Err(Error::CapExceeded { states, cap });
    }
    let template = model.template();
    let tp = template.pmdp();
    let entry = template.entry();
    let mut exit_slot = vec![None; tp.num_states()];
    for (j, &e) in template.exits().iter().enumerate() {
        exit_slot[e] = Some(j);
    }
    // Template state -> offset among the non-entry, non-exit states.
    let mut inner = vec![usize::MAX; tp.num_states()];
    let mut extra = 0;
    for t in 0..tp.num_states() {
        if t != entry && exit_slot[t].is_none() {
            inner[t] = extra;
            extra += 1;
        }
    }
    let n_macro = model.num_states();
    let mut cache: HashMap<Vec<u64>, Mdp> = HashMap::new();
    let mut copies: Vec<Vec<u64>> = Vec::with_capacity(model.num_calls());
    for i in 0..model.num_calls() {
        let v = model.call_valuation(i);
        let key = v.key();
        if !cache.contains_key(&key) {
            let mut m = template.instantiate(v)?;
            if let ExitMode::SuccessTarget { success_exit } = model.mode() {
                let mut goal = vec![false; tp.num_states()];
                goal[template.exits()[success_exit]] = true;
                let (_, policy) = max_reachability(&m, &goal, cfg)?;
                m = m.induced(&policy);
            }
            cache.insert(key.clone(), m);
        }
        copies.push(key);
    }
    let map = |call: usize, t: usize| -> usize {
        if t == entry {
            model.calls()[call]
        } else if let Some(j) = exit_slot[t] {
            model.call_exits(call)[j]
        } else {
            n_macro + call * extra + inner[t]
        }
    };
    let mut b = MdpBuilder::with_capacity(states as usize, states as usize * 2);
    let emit_template_state = |b: &mut MdpBuilder, call: usize, t: usize, target: bool| {
        let m = &cache[&copies[call]];
        b.push_state(m.reward(t), target);
        if !target {
            for c in m.choices(t) {
                let (succ, prob) = m.row(c);
                b.push_choice(succ.iter().zip(prob).map(|(&u, &p)| (map(call, u), p)));
            }
        }
    };
    for (s, st) in model.states().iter().enumerate() {
        match st {
            MacroState::Concrete {
                choices, reward, ..
            } => {
                b.push_state(*reward, model.is_target(s));
                if !model.is_target(s) {
                    for c in choices {
                        b.push_choice(c.transitions.iter().copied());
                    }
                }
            }
            MacroState::Call { .. } => {
                let call = model.call_of(s).expect("call state has a call index");
                emit_template_state(&mut b, call, entry, model.is_target(s));
            }
        }
    }
    let order: Vec<usize> = (0..tp.num_states())
        .filter(|&t| inner[t] != usize::MAX)
        .collect();
    for call in 0..model.num_calls() {
        for &t in &order {
            emit_template_state(&mut b, call, t, false);
        }
    }
    Ok(b.build(model.initial()))
}

/// Maximal expected reward of the flattened model.
pub fn flatten_and_solve(model: &HierarchicalModel, cap: u64, cfg: &SolverConfig) -> Result<f64> {
    let flat = flatten(model, cap, cfg)?;
    let (v, _) = max_expected_reward(&flat, cfg)?;
    Ok(v.at(flat.initial()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::generate::{chain_grid, token_model, ChainGridSpec, TokenLayout};
    use crate::model::{Coeff, ConcreteChoice, MultilinearExpr, PmdpBuilder, Region, Template};
    use crate::numerics::{expected_visits, robust_value_bounds};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn token_model_is_locally_optimal() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        assert!(check_local_optimality(&m).is_empty());
    }

    #[test]
    fn token_enumeration_and_flattening_agree() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let (v, _) = enumerate_baseline(&m, &cfg()).unwrap();
        let flat = flatten(&m, DEFAULT_FLAT_CAP, &cfg()).unwrap();
        assert_eq!(flat.num_states() as u64, m.flat_state_count());
        let f = flatten_and_solve(&m, DEFAULT_FLAT_CAP, &cfg()).unwrap();
        // 4 + 5/2 + 16/10 + 25/8 + 1 + 16/25
        assert!((v - 12.865).abs() < 1e-6);
        assert!((f - 12.865).abs() < 1e-6);
    }

    #[test]
    fn lattice_layout_value() {
        // m1 -> {m3, m4}, m2 -> {m4, m5}: visits (1, 1/2, 1/2, 1/4, 1/2, 1/4)
        let m = token_model(TokenLayout::Lattice, 3).unwrap();
        let (v, _) = enumerate_baseline(&m, &cfg()).unwrap();
        let want = 4.0 + 2.5 + 1.6 + 6.25 / 4.0 + 2.0 + 0.64;
        assert!((v - want).abs() < 1e-6);
    }

    #[test]
    fn cap_is_enforced() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        assert!(matches!(
            flatten(&m, 5, &cfg()),
            Err(Error::CapExceeded { states: 16, cap: 5 })
        ));
    }

    #[test]
    fn slot_assignments_for_token() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let um = UncertainMacro::build(&m);
        assert_eq!(um.slot_counts(), (6, 0));
        let b = ResultBounds {
            lower: ResultVector::new(vec![1.0], 2.56),
            upper: ResultVector::new(vec![1.0], 6.25),
        };
        let a = suitable_region(6, |_| Some(SlotSource::Bounds(&b))).unwrap();
        let rb = robust_value_bounds(&um.to_interval_mdp(&a), &cfg()).unwrap();
        assert!((rb.lb - 7.68).abs() < 1e-6 && (rb.ub - 18.75).abs() < 1e-6);
        assert!(matches!(
            suitable_region(6, |i| (i != 4).then_some(SlotSource::Bounds(&b))),
            Err(Error::CoverageGap(4))
        ));
    }

    #[test]
    fn exact_slots_reproduce_enumeration() {
        let m = token_model(TokenLayout::Reference, 3).unwrap();
        let res = exact_results(&m, &cfg()).unwrap();
        let a = suitable_region(6, |i| Some(SlotSource::Exact(&res[i]))).unwrap();
        let um = UncertainMacro::build(&m);
        let rb = robust_value_bounds(&um.to_interval_mdp(&a), &cfg()).unwrap();
        assert!((rb.lb - 12.865).abs() < 1e-6 && (rb.ub - 12.865).abs() < 1e-6);
        let visits = expected_visits(&um.instantiate_center(&a), &cfg()).unwrap();
        let calls: Vec<f64> = m.calls().iter().map(|&s| visits.at(s)).collect();
        assert_eq!(calls, vec![1.0, 0.5, 0.5, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn chain_grid_enumeration_matches_flattening() {
        let spec = ChainGridSpec {
            levels: 3,
            width: 4,
            chain_len: 6,
            seed: 11,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        let (v, _) = enumerate_baseline(&m, &cfg()).unwrap();
        let f = flatten_and_solve(&m, DEFAULT_FLAT_CAP, &cfg()).unwrap();
        assert!((v - f).abs() < 1e-6, "{v} vs {f}");
    }

    /// Entry chooses between exits directly; two exits and choices.
    fn choosy_two_exit() -> Template {
        let mut b = PmdpBuilder::new(vec!["p".into()]);
        let s0 = b.add_state("s0");
        let a = b.add_state("a");
        let z = b.add_state("z");
        let p = MultilinearExpr::var(0);
        let one_minus = MultilinearExpr::one().sub(&p).unwrap();
        b.add_choice(s0, "x", vec![(a, p.clone()), (z, one_minus)]);
        b.add_choice(
            s0,
            "y",
            vec![
                (a, MultilinearExpr::constant(Coeff::new(1, 2))),
                (z, MultilinearExpr::constant(Coeff::new(1, 2))),
            ],
        );
        b.set_reward(s0, p);
        b.set_target(a, true);
        b.set_target(z, true);
        Template::new(
            b.build(s0),
            vec![a, z],
            Region::new(vec![0.1], vec![0.9]).unwrap(),
        )
    }

    fn three_call_model(mode: ExitMode) -> HierarchicalModel {
        let t = choosy_two_exit();
        let call = |name: &str, p: f64, exits: Vec<usize>| MacroState::Call {
            name: name.into(),
            valuation: Valuation::new(vec![p]),
            exits,
        };
        let states = vec![
            call("m0", 0.3, vec![1, 2]),
            call("m1", 0.7, vec![3, 2]),
            call("m2", 0.6, vec![3, 3]),
            MacroState::Concrete {
                name: "done".into(),
                choices: vec![],
                reward: 0.0,
            },
        ];
        HierarchicalModel::new(states, 0, vec![false, false, false, true], t, mode)
    }

    #[test]
    fn two_exit_with_choices_needs_success_target_mode() {
        let single = three_call_model(ExitMode::Single);
        assert_eq!(check_local_optimality(&single), vec![0, 1, 2]);
        assert!(matches!(
            ensure_local_optimality(&single, false),
            Err(Error::LocalOptimality(_))
        ));
        assert!(ensure_local_optimality(&single, true).is_ok());
        let st = three_call_model(ExitMode::SuccessTarget { success_exit: 0 });
        assert!(check_local_optimality(&st).is_empty());
        assert_eq!(UncertainMacro::build(&st).slot_counts(), (3, 3));
    }

    #[test]
    fn success_target_flattening_fixes_subpolicies() {
        let m = three_call_model(ExitMode::SuccessTarget { success_exit: 0 });
        m.ensure_valid().unwrap();
        let (v, _) = enumerate_baseline(&m, &cfg()).unwrap();
        let f = flatten_and_solve(&m, DEFAULT_FLAT_CAP, &cfg()).unwrap();
        assert!((v - f).abs() < 1e-9);
        // m0 at p=0.3 picks y (success 1/2): reward 0.3, then m1 (p=0.7, x):
        // 0.7 + 0.7 * 0 + ...; m2 reached from m0 with 1/2 and m1 with 0.3.
        let want = 0.3 + 0.5 * (0.7 + 0.3 * 0.6) + 0.5 * 0.6;
        assert!((v - want).abs() < 1e-9, "{v} vs {want}");
    }

    #[test]
    fn zero_call_model_is_plain_mdp() {
        let t = choosy_two_exit();
        let states = vec![
            MacroState::Concrete {
                name: "a".into(),
                choices: vec![ConcreteChoice {
                    label: "go".into(),
                    transitions: vec![(1, 1.0)],
                }],
                reward: 2.5,
            },
            MacroState::Concrete {
                name: "b".into(),
                choices: vec![],
                reward: 0.0,
            },
        ];
        let m = HierarchicalModel::new(
            states,
            0,
            vec![false, true],
            t,
            ExitMode::SuccessTarget { success_exit: 0 },
        );
        assert_eq!(UncertainMacro::build(&m).slot_counts(), (0, 0));
        assert_eq!(enumerate_baseline(&m, &cfg()).unwrap().0, 2.5);
        assert_eq!(
            flatten_and_solve(&m, DEFAULT_FLAT_CAP, &cfg()).unwrap(),
            2.5
        );
    }
}
