use crate::error::{Error, Result};

use super::diagnostic::{Diagnostic, DiagnosticKind, Scope};
use super::expr::MultilinearExpr;
use super::mdp::{Mdp, MdpBuilder};
use super::region::{Region, Valuation};

/// Probabilities this far outside `[0, 1]` (or rewards this far below zero)
/// are treated as rounding noise.
pub const WELL_DEFINED_TOL: f64 = 1e-12;

/// One enabled action of a parametric state.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub label: String,
    pub transitions: Vec<(usize, MultilinearExpr)>,
}

/// A parametric MDP with multilinear transition and reward expressions.
/// Parameter-free models are the special case with no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmdp {
    state_names: Vec<String>,
    params: Vec<String>,
    initial: usize,
    choices: Vec<Vec<Choice>>,
    rewards: Vec<MultilinearExpr>,
    targets: Vec<bool>,
}

impl Pmdp {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn is_parametric(&self) -> bool {
        !self.params.is_empty()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn choices(&self, s: usize) -> &[Choice] {
        &self.choices[s]
    }

    pub fn reward(&self, s: usize) -> &MultilinearExpr {
        &self.rewards[s]
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.targets[s]
    }

    /// True when no non-target state offers more than one action.
    pub fn is_markov_chain(&self) -> bool {
        (0..self.num_states()).all(|s| self.targets[s] || self.choices[s].len() <= 1)
    }

    /// Sorted parameter indices occurring in the reward or any outgoing row
    /// of `s`.
    pub fn local_params(&self, s: usize) -> Vec<u32> {
        let mut out = self.rewards[s].params();
        for c in &self.choices[s] {
            for (_, e) in &c.transitions {
                out.extend(e.params());
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Structural diagnostics: stochastic rows, enabled actions, successor and
    /// parameter references.
    pub fn validate(&self, scope: Scope) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.num_states();
        let np = self.params.len() as u32;
        for s in 0..n {
            let name = &self.state_names[s];
            if let Some(k) = self.rewards[s].max_param().filter(|&k| k >= np) {
                out.push(Diagnostic::new(scope, DiagnosticKind::UndeclaredParameter(k)).at(name));
            }
            if self.targets[s] {
                continue;
            }
            if self.choices[s].is_empty() {
                out.push(Diagnostic::new(scope, DiagnosticKind::NoActions).at(name));
            }
            for c in &self.choices[s] {
                let mut sum = MultilinearExpr::zero();
                let mut overflow = false;
                for (t, e) in &c.transitions {
                    if *t >= n {
                        out.push(
                            Diagnostic::new(scope, DiagnosticKind::UnknownSuccessor(*t))
                                .at(name)
                                .action(&c.label),
                        );
                    }
                    if let Some(k) = e.max_param().filter(|&k| k >= np) {
                        out.push(
                            Diagnostic::new(scope, DiagnosticKind::UndeclaredParameter(k))
                                .at(name)
                                .action(&c.label),
                        );
                    }
                    match sum.add(e) {
                        Ok(next) => sum = next,
                        Err(_) => overflow = true,
                    }
                }
                if overflow || sum != MultilinearExpr::one() {
                    let shown = if overflow {
                        "<overflow>".to_string()
                    } else {
                        sum.display(&self.params).to_string()
                    };
                    out.push(
                        Diagnostic::new(scope, DiagnosticKind::RowNotStochastic { sum: shown })
                            .at(name)
                            .action(&c.label),
                    );
                }
            }
        }
        out
    }

    /// Checks that every instantiation inside `region` is well-defined and
    /// keeps the support of every distribution fixed.
    pub fn check_region(&self, region: &Region) -> Result<()> {
        if region.dim() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "region has {} dimensions, model has {} parameters",
                region.dim(),
                self.params.len()
            )));
        }
        for s in 0..self.num_states() {
            let r = self.rewards[s].range(region);
            if r.lo < -WELL_DEFINED_TOL {
                return Err(Error::NotWellDefined(format!(
                    "reward of {} can be {}",
                    self.state_names[s], r.lo
                )));
            }
            if self.targets[s] {
                continue;
            }
            for c in &self.choices[s] {
                for (t, e) in &c.transitions {
                    let r = e.range(region);
                    let here = || {
                        format!(
                            "{} --{}--> {}",
                            self.state_names[s],
                            c.label,
                            self.state_names.get(*t).map(String::as_str).unwrap_or("?")
                        )
                    };
                    if r.lo < -WELL_DEFINED_TOL || r.hi > 1.0 + WELL_DEFINED_TOL {
                        return Err(Error::NotWellDefined(format!(
                            "{} ranges over [{}, {}]",
                            here(),
                            r.lo,
                            r.hi
                        )));
                    }
                    if r.lo <= 0.0 && r.hi > WELL_DEFINED_TOL {
                        return Err(Error::GraphChange(format!("{} can vanish", here())));
                    }
                }
            }
        }
        Ok(())
    }

    /// Substitutes `u` into every expression.
    pub fn instantiate(&self, u: &Valuation) -> Result<Mdp> {
        if u.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "valuation has {} values, model has {} parameters",
                u.len(),
                self.params.len()
            )));
        }
        let point = u.values();
        let mut b = MdpBuilder::with_capacity(self.num_states(), self.num_states() * 2);
        for s in 0..self.num_states() {
            let r = self.rewards[s].eval(point);
            if r < -WELL_DEFINED_TOL || r.is_nan() {
                return Err(Error::NotWellDefined(format!(
                    "reward of {} is {}",
                    self.state_names[s], r
                )));
            }
            b.push_state(r.max(0.0), self.targets[s]);
            if self.targets[s] {
                continue;
            }
            for c in &self.choices[s] {
                let mut row = Vec::with_capacity(c.transitions.len());
                for (t, e) in &c.transitions {
                    let p = e.eval(point);
                    if !(-WELL_DEFINED_TOL..=1.0 + WELL_DEFINED_TOL).contains(&p) {
                        return Err(Error::NotWellDefined(format!(
                            "{} --{}--> {} has probability {}",
                            self.state_names[s], c.label, self.state_names[*t], p
                        )));
                    }
                    if p > 0.0 {
                        row.push((*t, p.min(1.0)));
                    }
                }
                b.push_choice(row);
            }
        }
        Ok(b.build(self.initial))
    }
}

/// Builds a [`Pmdp`] state by state.
#[derive(Debug, Default)]
pub struct PmdpBuilder {
    state_names: Vec<String>,
    params: Vec<String>,
    choices: Vec<Vec<Choice>>,
    rewards: Vec<MultilinearExpr>,
    targets: Vec<bool>,
}

impl PmdpBuilder {
    pub fn new(params: Vec<String>) -> Self {
        PmdpBuilder {
            params,
            ..Default::default()
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.state_names.push(name.into());
        self.choices.push(Vec::new());
        self.rewards.push(MultilinearExpr::zero());
        self.targets.push(false);
        self.state_names.len() - 1
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    /// Index of `name`, adding the state if it is new.
    pub fn state(&mut self, name: &str) -> usize {
        match self.state_index(name) {
            Some(s) => s,
            None => self.add_state(name),
        }
    }

    pub fn set_reward(&mut self, s: usize, reward: MultilinearExpr) {
        self.rewards[s] = reward;
    }

    pub fn set_target(&mut self, s: usize, target: bool) {
        self.targets[s] = target;
    }

    pub fn add_choice(
        &mut self,
        s: usize,
        label: impl Into<String>,
        transitions: Vec<(usize, MultilinearExpr)>,
    ) {
        self.choices[s].push(Choice {
            label: label.into(),
            transitions,
        });
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn build(self, initial: usize) -> Pmdp {
        assert!(
            initial < self.state_names.len(),
            "initial state out of range"
        );
        Pmdp {
            state_names: self.state_names,
            params: self.params,
            initial,
            choices: self.choices,
            rewards: self.rewards,
            targets: self.targets,
        }
    }
}
