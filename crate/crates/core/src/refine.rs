//! The anytime abstraction-refinement loop.
//!
//! Calls are grouped into bindings that share one set of bounds. Each
//! iteration pops the most relevant binding and either solves it exactly
//! (one member) or bounds it by lifting and splits it. Every `k` iterations
//! the macro MDP is checked robustly against the current bounds, visit
//! weights are recomputed, and the heaviest remaining calls are solved
//! individually. The loop stops once `eta * ub <= lb`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{
    ensure_local_optimality, suitable_region, SlotAssignment, SlotSource, UncertainMacro,
};
use crate::lifting::{bound_results_for_set, check_one, to_region, TemplateBinding};
use crate::model::{ExitMode, HierarchicalModel, Policy, ResultBounds, ResultVector, Valuation};
use crate::numerics::{expected_visits, robust_value_bounds, SolverConfig};

/// Upper limit on calls solved individually per interleaving round.
pub const INTERLEAVE_CAP: usize = 150;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    /// Target precision ratio `lb / ub`, in `[0, 1]`.
    pub eta: f64,
    /// Macro-check cadence.
    pub k: usize,
    pub solver: SolverConfig,
    /// Loop iterations before giving up with `IterationCap`.
    pub max_iterations: usize,
    pub override_local_optimality: bool,
    /// Solve individually refined calls on the rayon pool.
    pub parallel: bool,
    /// Interleave individual refinement after each macro check.
    pub interleave: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            eta: 0.9,
            k: 8,
            solver: SolverConfig::default(),
            max_iterations: 1_000_000,
            override_local_optimality: false,
            parallel: true,
            interleave: true,
        }
    }
}

/// One macro check as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub lb: f64,
    pub ub: f64,
    pub wall_ms: f64,
    pub queue_size: usize,
    pub refined_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub lb: f64,
    pub ub: f64,
    /// Macro policy of the pessimistic pass of the last check.
    pub policy: Policy,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
}

/// Heap entry; stale entries are skipped on pop.
#[derive(Debug, Clone, Copy)]
struct Key {
    priority: f64,
    len: usize,
    min_call: usize,
    slot: usize,
    version: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(self.len.cmp(&other.len))
            .then(other.min_call.cmp(&self.min_call))
            .then(other.slot.cmp(&self.slot))
    }
}

struct Slot {
    binding: TemplateBinding,
    version: u64,
}

/// Queue, exact results, envelope and trace of one refinement run.
pub struct RefinementState<'a> {
    model: &'a HierarchicalModel,
    um: UncertainMacro,
    cfg: RefineConfig,
    slots: Vec<Option<Slot>>,
    heap: BinaryHeap<Key>,
    owner: Vec<Option<usize>>,
    res: Vec<Option<ResultVector>>,
    cache: HashMap<Vec<u64>, ResultVector>,
    weights: Vec<f64>,
    lb: f64,
    ub: f64,
    policy: Option<Policy>,
    last_assignment: Option<SlotAssignment>,
    iter: usize,
    checked_since_refine: bool,
    trace: Vec<TraceEntry>,
    start: Instant,
}

impl<'a> RefinementState<'a> {
    /// Validates the model and queues one binding holding every call.
    pub fn new(model: &'a HierarchicalModel, cfg: RefineConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.eta) {
            return Err(Error::InvalidArgument(format!(
                "eta {} outside [0, 1]",
                cfg.eta
            )));
        }
        if cfg.k == 0 {
            return Err(Error::InvalidArgument("cadence k must be positive".into()));
        }
        model.ensure_valid()?;
        ensure_local_optimality(model, cfg.override_local_optimality)?;
        let n = model.num_calls();
        let mut st = RefinementState {
            model,
            um: UncertainMacro::build(model),
            cfg,
            slots: Vec::new(),
            heap: BinaryHeap::new(),
            owner: vec![None; n],
            res: vec![None; n],
            cache: HashMap::new(),
            weights: vec![1.0; n],
            lb: 0.0,
            ub: f64::INFINITY,
            policy: None,
            last_assignment: None,
            iter: 0,
            checked_since_refine: false,
            trace: Vec::new(),
            start: Instant::now(),
        };
        if n > 0 {
            let exits = model.template().exit_count();
            st.push_binding(TemplateBinding::new(
                (0..n).collect(),
                ResultBounds::trivial(exits),
            ));
        }
        Ok(st)
    }

    pub fn lb(&self) -> f64 {
        self.lb
    }

    pub fn ub(&self) -> f64 {
        self.ub
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exact result of call `i`, once it has been solved individually.
    pub fn result(&self, i: usize) -> Option<&ResultVector> {
        self.res[i].as_ref()
    }

    /// Live bindings, highest priority first.
    pub fn queue(&self) -> Vec<&TemplateBinding> {
        let mut keys: Vec<Key> = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.as_ref().map(|s| self.key(k, s)))
            .collect();
        keys.sort_by(|a, b| b.cmp(a));
        keys.iter()
            .map(|k| &self.slots[k.slot].as_ref().unwrap().binding)
            .collect()
    }

    pub fn queue_size(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn refined_count(&self) -> usize {
        self.res.iter().filter(|r| r.is_some()).count()
    }

    fn valuation(&self, i: usize) -> &Valuation {
        self.model.call_valuation(i)
    }

    fn priority(&self, b: &TemplateBinding) -> f64 {
        let weight: f64 = b.calls.iter().map(|&i| self.weights[i]).sum();
        let mut width = b.bounds.reward_width();
        if let ExitMode::SuccessTarget { success_exit } = self.model.mode() {
            let w = b.bounds.prob_width(success_exit);
            if w > 0.0 {
                width += w * self.ub;
            }
        }
        if weight == 0.0 || width == 0.0 {
            0.0
        } else {
            width * weight
        }
    }

    fn key(&self, slot: usize, s: &Slot) -> Key {
        Key {
            priority: self.priority(&s.binding),
            len: s.binding.len(),
            min_call: s.binding.calls.iter().copied().min().unwrap_or(usize::MAX),
            slot,
            version: s.version,
        }
    }

    fn push_binding(&mut self, binding: TemplateBinding) {
        let slot = self.slots.len();
        for &i in &binding.calls {
            self.owner[i] = Some(slot);
        }
        let s = Slot {
            binding,
            version: 0,
        };
        self.heap.push(self.key(slot, &s));
        self.slots.push(Some(s));
    }

    fn rebuild_heap(&mut self) {
        let keys: Vec<Key> = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.as_ref().map(|s| self.key(k, s)))
            .collect();
        self.heap = keys.into();
    }

    fn pop(&mut self) -> Option<TemplateBinding> {
        while let Some(k) = self.heap.pop() {
            if matches!(&self.slots[k.slot], Some(s) if s.version == k.version) {
                let s = self.slots[k.slot].take().unwrap();
                for &i in &s.binding.calls {
                    self.owner[i] = None;
                }
                return Some(s.binding);
            }
        }
        None
    }

    fn solve_one(&mut self, i: usize) -> Result<()> {
        let key = self.valuation(i).key();
        let r = match self.cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                let r = check_one(
                    self.model.template(),
                    self.valuation(i),
                    self.model.mode(),
                    &self.cfg.solver,
                )?;
                self.cache.insert(key, r.clone());
                r
            }
        };
        self.res[i] = Some(r);
        Ok(())
    }

    fn bound(&self, calls: &[usize]) -> Result<ResultBounds> {
        let region = to_region(calls.iter().map(|&i| self.valuation(i)))?;
        bound_results_for_set(
            self.model.template(),
            &region,
            self.model.mode(),
            &self.cfg.solver,
        )
    }

    /// Pops the highest-priority binding. A single call is solved exactly;
    /// a larger binding is bounded over its box and split in two, both
    /// halves inheriting the new bounds. Returns `false` on an empty queue.
    pub fn pop_and_refine(&mut self) -> Result<bool> {
        let Some(b) = self.pop() else {
            return Ok(false);
        };
        self.checked_since_refine = false;
        if b.len() == 1 {
            self.solve_one(b.calls[0])?;
            return Ok(true);
        }
        let bounds = self.bound(&b.calls)?;
        let (left, right) = split(self.model, &b.calls);
        self.push_binding(TemplateBinding::new(left, bounds.clone()));
        self.push_binding(TemplateBinding::new(right, bounds));
        Ok(true)
    }

    /// Like [`pop_and_refine`](Self::pop_and_refine), but the popped
    /// binding is split into the members listed in `left` and the rest.
    pub fn force_split(&mut self, left: &[usize]) -> Result<()> {
        let b = self
            .pop()
            .ok_or_else(|| Error::InvalidArgument("queue is empty".into()))?;
        let (l, r): (Vec<usize>, Vec<usize>) = b.calls.iter().partition(|i| left.contains(i));
        if l.is_empty() || r.is_empty() {
            let calls = b.calls.clone();
            self.push_binding(b);
            return Err(Error::InvalidArgument(format!(
                "split of {calls:?} by {left:?} leaves one side empty"
            )));
        }
        self.checked_since_refine = false;
        let bounds = self.bound(&b.calls)?;
        self.push_binding(TemplateBinding::new(l, bounds.clone()));
        self.push_binding(TemplateBinding::new(r, bounds));
        Ok(())
    }

    /// Recomputes the bounds of every queued binding without splitting.
    pub fn rebound_queue(&mut self) -> Result<()> {
        for k in 0..self.slots.len() {
            let Some(s) = &self.slots[k] else { continue };
            let bounds = self.bound(&s.binding.calls)?;
            let s = self.slots[k].as_mut().unwrap();
            s.binding.bounds = bounds;
            s.version += 1;
        }
        self.checked_since_refine = false;
        self.rebuild_heap();
        Ok(())
    }

    /// Robust check of the macro MDP against the current bounds. The
    /// envelope only ever tightens; the new entry is appended to the trace.
    pub fn macro_check(&mut self) -> Result<(f64, f64)> {
        let assignment = suitable_region(self.model.num_calls(), |i| {
            if let Some(r) = &self.res[i] {
                return Some(SlotSource::Exact(r));
            }
            let slot = self.owner[i]?;
            self.slots[slot]
                .as_ref()
                .map(|s| SlotSource::Bounds(&s.binding.bounds))
        })?;
        let rb = robust_value_bounds(&self.um.to_interval_mdp(&assignment), &self.cfg.solver)?;
        self.lb = self.lb.max(rb.lb);
        self.ub = self.ub.min(rb.ub);
        self.policy = Some(rb.lower_policy);
        self.checked_since_refine = true;
        self.trace.push(TraceEntry {
            iter: self.iter,
            lb: self.lb,
            ub: self.ub,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            queue_size: self.queue_size(),
            refined_count: self.refined_count(),
        });
        self.last_assignment = Some(assignment);
        Ok((self.lb, self.ub))
    }

    /// Visit counts of every call in the macro chain obtained by fixing the
    /// last witness policy at the center of the last suitable region.
    pub fn update_weights(&mut self) -> Result<()> {
        let (Some(assignment), Some(policy)) = (&self.last_assignment, &self.policy) else {
            return Err(Error::InvalidArgument("no macro check yet".into()));
        };
        let chain = self.um.instantiate_center(assignment).induced(policy);
        let visits = expected_visits(&chain, &self.cfg.solver)?;
        for (i, &s) in self.model.calls().iter().enumerate() {
            self.weights[i] = visits.at(s);
        }
        self.rebuild_heap();
        Ok(())
    }

    /// Number of calls [`interleave_individual`](Self::interleave_individual)
    /// solves at the current iteration.
    pub fn interleave_count(&self) -> usize {
        let remaining = self.res.iter().filter(|r| r.is_none()).count();
        let percent = 1.0 + self.iter as f64 / 16.0;
        let n = (percent / 100.0 * remaining as f64).ceil() as usize;
        n.min(INTERLEAVE_CAP).min(remaining)
    }

    /// Solves the heaviest unsolved calls exactly and removes them from their
    /// bindings. Shrunk bindings keep their bounds.
    pub fn interleave_individual(&mut self) -> Result<Vec<usize>> {
        let n = self.interleave_count();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut open: Vec<usize> = (0..self.res.len())
            .filter(|&i| self.res[i].is_none())
            .collect();
        open.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        open.truncate(n);
        let todo: Vec<(usize, Vec<u64>)> = open
            .iter()
            .map(|&i| (i, self.valuation(i).key()))
            .filter(|(_, k)| !self.cache.contains_key(k))
            .collect();
        let mut fresh: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, k) in &todo {
            fresh.entry(k.clone()).or_insert(*i);
        }
        let jobs: Vec<(Vec<u64>, usize)> = fresh.into_iter().collect();
        let (template, mode, solver) = (self.model.template(), self.model.mode(), self.cfg.solver);
        let model = self.model;
        let solve = |(k, i): &(Vec<u64>, usize)| -> Result<(Vec<u64>, ResultVector)> {
            Ok((
                k.clone(),
                check_one(template, model.call_valuation(*i), mode, &solver)?,
            ))
        };
        let solved: Vec<(Vec<u64>, ResultVector)> = if self.cfg.parallel {
            jobs.par_iter().map(solve).collect::<Result<_>>()?
        } else {
            jobs.iter().map(solve).collect::<Result<_>>()?
        };
        self.cache.extend(solved);
        let mut touched = Vec::new();
        for &i in &open {
            self.res[i] = Some(self.cache[&self.valuation(i).key()].clone());
            if let Some(slot) = self.owner[i].take() {
                let s = self.slots[slot]
                    .as_mut()
                    .expect("owner points at a live slot");
                s.binding.calls.retain(|&c| c != i);
                touched.push(slot);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for slot in touched {
            let s = self.slots[slot].as_mut().unwrap();
            if s.binding.is_empty() {
                self.slots[slot] = None;
            } else {
                s.version += 1;
                let key = self.key(slot, self.slots[slot].as_ref().unwrap());
                self.heap.push(key);
            }
        }
        self.checked_since_refine = false;
        Ok(open)
    }

    fn precise(&self) -> bool {
        self.policy.is_some() && self.cfg.eta * self.ub <= self.lb
    }

    /// Whether the loop may stop: the ratio is met, or nothing is left to
    /// refine and the last check saw every refinement.
    pub fn is_done(&self) -> bool {
        self.precise() || (self.checked_since_refine && self.queue_size() == 0)
    }

    /// One loop iteration: refine, then on cadence (or once the queue is
    /// empty) check the macro MDP, reweight and interleave.
    pub fn step(&mut self) -> Result<()> {
        self.iter += 1;
        self.pop_and_refine()?;
        let on_cadence = (self.iter - 1) % self.cfg.k == 0;
        if on_cadence || self.queue_size() == 0 {
            self.macro_check()?;
            if self.precise() {
                return Ok(());
            }
            self.update_weights()?;
            if self.cfg.interleave {
                self.interleave_individual()?;
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            lb: self.lb,
            ub: self.ub,
            policy: self.policy.clone().unwrap_or_default(),
            trace: self.trace.clone(),
            iterations: self.iter,
        }
    }
}

/// Runs the loop to `eta` precision. `on_check` sees every trace entry as it
/// is produced, so a caller can keep a partial trace when the iteration cap
/// is hit.
pub fn run<F>(model: &HierarchicalModel, cfg: RefineConfig, mut on_check: F) -> Result<Outcome>
where
    F: FnMut(&TraceEntry),
{
    let mut st = RefinementState::new(model, cfg)?;
    let mut seen = 0;
    while !st.is_done() {
        if st.iter >= st.cfg.max_iterations {
            return Err(Error::IterationCap {
                iterations: st.iter,
                lb: st.lb,
                ub: st.ub,
            });
        }
        st.step()?;
        for e in &st.trace[seen..] {
            on_check(e);
        }
        seen = st.trace.len();
    }
    tracing::debug!(
        iterations = st.iter,
        lb = st.lb,
        ub = st.ub,
        "refinement finished"
    );
    Ok(st.outcome())
}

/// Splits `calls` along the axis of largest extent relative to the
/// admissible box: at the midpoint, else at the median member, else by
/// position. Members on the cut go to the lower half.
pub fn split(model: &HierarchicalModel, calls: &[usize]) -> (Vec<usize>, Vec<usize>) {
    assert!(calls.len() >= 2, "cannot split fewer than two calls");
    let val = |i: usize, k: usize| model.call_valuation(i).get(k);
    let admissible = model.template().admissible();
    let mut axis = None;
    let mut best = 0.0;
    for k in 0..admissible.dim() {
        let (lo, hi) = calls
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(val(i, k)), hi.max(val(i, k)))
            });
        let width = admissible.interval(k).width();
        let extent = if width > 0.0 {
            (hi - lo) / width
        } else {
            hi - lo
        };
        if extent > best {
            best = extent;
            axis = Some((k, lo, hi));
        }
    }
    let cut_at = |k: usize, c: f64| -> (Vec<usize>, Vec<usize>) {
        calls.iter().partition(|&&i| val(i, k) <= c)
    };
    if let Some((k, lo, hi)) = axis {
        let (l, r) = cut_at(k, 0.5 * (lo + hi));
        if !l.is_empty() && !r.is_empty() {
            return (l, r);
        }
        let mut xs: Vec<f64> = calls.iter().map(|&i| val(i, k)).collect();
        xs.sort_by(f64::total_cmp);
        let (l, r) = cut_at(k, xs[(xs.len() - 1) / 2]);
        if !l.is_empty() && !r.is_empty() {
            return (l, r);
        }
    }
    let mid = calls.len() / 2;
    (calls[..mid].to_vec(), calls[mid..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::enumerate_baseline;
    use crate::io::generate::{chain_grid, token_model, ChainGridSpec, TokenLayout};

    fn token() -> HierarchicalModel {
        token_model(TokenLayout::Reference, 3).unwrap()
    }

    fn cfg(eta: f64) -> RefineConfig {
        RefineConfig {
            eta,
            ..RefineConfig::default()
        }
    }

    #[test]
    fn root_bounds_and_first_check() {
        let m = token();
        let mut st = RefinementState::new(&m, cfg(1.0)).unwrap();
        st.pop_and_refine().unwrap();
        let q = st.queue();
        assert_eq!(q.len(), 2);
        assert!((q[0].bounds.lower.reward - 2.56).abs() < 1e-7);
        assert!((q[0].bounds.upper.reward - 6.25).abs() < 1e-7);
        let (lb, ub) = st.macro_check().unwrap();
        assert!((lb - 7.68).abs() < 1e-6 && (ub - 18.75).abs() < 1e-6);
    }

    #[test]
    fn forced_split_bounds() {
        let m = token();
        let mut st = RefinementState::new(&m, cfg(1.0)).unwrap();
        st.force_split(&[1, 3]).unwrap();
        st.rebound_queue().unwrap();
        let right = st
            .queue()
            .into_iter()
            .find(|b| b.calls.contains(&0))
            .unwrap()
            .clone();
        assert_eq!(right.calls, vec![0, 2, 4, 5]);
        assert!((right.bounds.lower.reward - 2.56).abs() < 1e-7);
        assert!((right.bounds.upper.reward - 4.0).abs() < 1e-7);
        let (lb, ub) = st.macro_check().unwrap();
        assert!((lb - 10.12).abs() < 1e-6 && (ub - 14.25).abs() < 1e-6);
    }

    #[test]
    fn midpoint_split_of_token_values() {
        let m = token();
        // midpoint of [8/25, 25/32] is 0.55125
        assert_eq!(
            split(&m, &[0, 1, 2, 3, 4, 5]),
            (vec![0, 1, 3, 4], vec![2, 5])
        );
        assert_eq!(split(&m, &[1, 3]), (vec![3], vec![1]));
        // two equal members: midpoint and median both fail
        assert_eq!(split(&m, &[0, 4]), (vec![0], vec![4]));
        // one outlier: 1/2, 1/2, 25/32 -> midpoint 0.640625
        assert_eq!(split(&m, &[0, 4, 5]), (vec![0, 4], vec![5]));
    }

    #[test]
    fn first_weights_are_visit_counts() {
        let m = token();
        let mut st = RefinementState::new(&m, cfg(1.0)).unwrap();
        assert_eq!(st.weights(), &[1.0; 6]);
        st.pop_and_refine().unwrap();
        st.macro_check().unwrap();
        st.update_weights().unwrap();
        let want = [1.0, 0.5, 0.5, 0.5, 0.25, 0.25];
        for (a, b) in st.weights().iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(st.interleave_individual().unwrap(), vec![0]);
        assert!(st.result(0).is_some());
    }

    #[test]
    fn interleave_formula() {
        let spec = ChainGridSpec {
            levels: 100,
            width: 100,
            chain_len: 2,
            seed: 1,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        let mut st = RefinementState::new(&m, cfg(0.9)).unwrap();
        st.iter = 1;
        assert_eq!(st.interleave_count(), 107);
        st.iter = 400;
        assert_eq!(st.interleave_count(), INTERLEAVE_CAP);
    }

    #[test]
    fn eta_zero_stops_after_first_check() {
        let m = token();
        let out = run(&m, cfg(0.0), |_| {}).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn eta_one_converges_to_exact_value() {
        let m = token();
        let out = run(&m, cfg(1.0), |_| {}).unwrap();
        assert!((out.lb - 12.865).abs() < 1e-6, "{}", out.lb);
        assert!((out.ub - 12.865).abs() < 1e-6, "{}", out.ub);
    }

    #[test]
    fn envelope_contains_oracle() {
        let spec = ChainGridSpec {
            levels: 4,
            width: 6,
            chain_len: 5,
            seed: 21,
            fixed: None,
        };
        let m = chain_grid(&spec).unwrap();
        let solver = SolverConfig::default();
        let (v, _) = enumerate_baseline(&m, &solver).unwrap();
        let c = RefineConfig { k: 2, ..cfg(0.99) };
        let out = run(&m, c, |_| {}).unwrap();
        assert!(out.lb >= 0.99 * out.ub);
        let slack = 2.0 * solver.epsilon;
        for w in out.trace.windows(2) {
            assert!(w[1].lb >= w[0].lb - slack && w[1].ub <= w[0].ub + slack);
        }
        for e in &out.trace {
            assert!(e.lb - slack <= v && v <= e.ub + slack);
        }
    }

    #[test]
    fn iteration_cap_reports_envelope() {
        let m = token();
        let c = RefineConfig {
            max_iterations: 1,
            interleave: false,
            ..cfg(1.0)
        };
        let mut seen = Vec::new();
        match run(&m, c, |e| seen.push(e.clone())) {
            Err(Error::IterationCap {
                iterations: 1,
                lb,
                ub,
            }) => {
                assert_eq!(seen.len(), 1);
                assert_eq!((seen[0].lb, seen[0].ub), (lb, ub));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn model_without_calls() {
        let m = token();
        let states = vec![
            crate::model::MacroState::Concrete {
                name: "a".into(),
                choices: vec![crate::model::ConcreteChoice {
                    label: "go".into(),
                    transitions: vec![(1, 1.0)],
                }],
                reward: 2.0,
            },
            crate::model::MacroState::Concrete {
                name: "b".into(),
                choices: vec![],
                reward: 0.0,
            },
        ];
        let plain = HierarchicalModel::new(
            states,
            0,
            vec![false, true],
            m.template().clone(),
            ExitMode::Single,
        );
        let out = run(&plain, cfg(1.0), |_| {}).unwrap();
        assert!((out.lb - 2.0).abs() < 1e-9 && (out.ub - 2.0).abs() < 1e-9);
    }
}
