use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::diagnostic::{Diagnostic, DiagnosticKind, Scope};
use super::mdp::Mdp;
use super::pmdp::Pmdp;
use super::region::{Region, Valuation};

/// The parametric MDP all subMDPs are instantiated from, with a designated
/// entry (its initial state), ordered exits and an admissible parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pmdp: Pmdp,
    exits: Vec<usize>,
    admissible: Region,
}

impl Template {
    pub fn new(pmdp: Pmdp, exits: Vec<usize>, admissible: Region) -> Self {
        Template {
            pmdp,
            exits,
            admissible,
        }
    }

    pub fn pmdp(&self) -> &Pmdp {
        &self.pmdp
    }

    pub fn entry(&self) -> usize {
        self.pmdp.initial()
    }

    pub fn exits(&self) -> &[usize] {
        &self.exits
    }

    pub fn exit_count(&self) -> usize {
        self.exits.len()
    }

    pub fn admissible(&self) -> &Region {
        &self.admissible
    }

    pub fn params(&self) -> &[String] {
        self.pmdp.params()
    }

    /// Number of template states that a flattening copies per call.
    pub fn inner_states(&self) -> usize {
        self.pmdp.num_states() - self.exits.len()
    }

    pub fn instantiate(&self, v: &Valuation) -> Result<Mdp> {
        self.pmdp.instantiate(v)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let scope = Scope::Template;
        let mut out = self.pmdp.validate(scope);
        let name = |s: usize| self.pmdp.state_name(s).to_string();
        let mut seen = vec![false; self.pmdp.num_states()];
        for &e in &self.exits {
            if seen[e] {
                out.push(Diagnostic::new(scope, DiagnosticKind::DuplicateExit).at(name(e)));
            }
            seen[e] = true;
            if !self.pmdp.choices(e).is_empty() {
                out.push(Diagnostic::new(scope, DiagnosticKind::ExitHasActions).at(name(e)));
            }
        }
        for (s, &is_exit) in seen.iter().enumerate() {
            if self.pmdp.is_target(s) && !is_exit {
                out.push(Diagnostic::new(scope, DiagnosticKind::TargetNotExit).at(name(s)));
            }
        }
        if seen[self.entry()] {
            out.push(Diagnostic::new(scope, DiagnosticKind::EntryIsExit).at(name(self.entry())));
        }
        if self.admissible.dim() != self.pmdp.params().len() {
            out.push(Diagnostic::new(
                scope,
                DiagnosticKind::AdmissibleArity {
                    expected: self.pmdp.params().len(),
                    found: self.admissible.dim(),
                },
            ));
        } else if out.is_empty() {
            match self.pmdp.check_region(&self.admissible) {
                Ok(()) => {}
                Err(Error::GraphChange(m)) => {
                    out.push(Diagnostic::new(scope, DiagnosticKind::GraphChange(m)))
                }
                Err(e) => out.push(Diagnostic::new(
                    scope,
                    DiagnosticKind::NotWellDefined(e.to_string()),
                )),
            }
        }
        out
    }
}

/// How the exits of a subMDP are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitMode {
    /// One exit; the subMDP maximizes expected reward.
    Single,
    /// Two exits; the subMDP maximizes the probability of reaching
    /// `success_exit`, and the reported reward is the one under that policy.
    SuccessTarget { success_exit: usize },
}

impl ExitMode {
    pub fn required_exits(&self) -> usize {
        match self {
            ExitMode::Single => 1,
            ExitMode::SuccessTarget { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExitMode::Single => "single",
            ExitMode::SuccessTarget { .. } => "success-target",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteChoice {
    pub label: String,
    pub transitions: Vec<(usize, f64)>,
}

/// A state of the macro skeleton.
#[derive(Debug, Clone, PartialEq)]
pub enum MacroState {
    /// A trivial partition, copied verbatim.
    Concrete {
        name: String,
        choices: Vec<ConcreteChoice>,
        reward: f64,
    },
    /// An invocation of the template at `valuation`; `exits[j]` is the macro
    /// state reached through template exit `j`.
    Call {
        name: String,
        valuation: Valuation,
        exits: Vec<usize>,
    },
}

impl MacroState {
    pub fn name(&self) -> &str {
        match self {
            MacroState::Concrete { name, .. } | MacroState::Call { name, .. } => name,
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, MacroState::Call { .. })
    }
}

/// A hierarchical MDP in factored form: macro skeleton, one template, and a
/// valuation plus exit wiring per call state.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    states: Vec<MacroState>,
    initial: usize,
    targets: Vec<bool>,
    template: Template,
    mode: ExitMode,
    calls: Vec<usize>,
    call_of: Vec<Option<usize>>,
}

impl HierarchicalModel {
    pub fn new(
        states: Vec<MacroState>,
        initial: usize,
        targets: Vec<bool>,
        template: Template,
        mode: ExitMode,
    ) -> Self {
        assert_eq!(states.len(), targets.len());
        assert!(initial < states.len(), "initial state out of range");
        let mut calls = Vec::new();
        let mut call_of = vec![None; states.len()];
        for (s, st) in states.iter().enumerate() {
            if st.is_call() {
                call_of[s] = Some(calls.len());
                calls.push(s);
            }
        }
        HierarchicalModel {
            states,
            initial,
            targets,
            template,
            mode,
            calls,
            call_of,
        }
    }

    pub fn states(&self) -> &[MacroState] {
        &self.states
    }

    pub fn state(&self, s: usize) -> &MacroState {
        &self.states[s]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.targets[s]
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn mode(&self) -> ExitMode {
        self.mode
    }

    /// Same model with another exit mode.
    pub fn with_mode(&self, mode: ExitMode) -> Self {
        HierarchicalModel {
            mode,
            ..self.clone()
        }
    }

    /// Macro state indices of the call states, in state order. Position in
    /// this list is the call index used throughout the crate.
    pub fn calls(&self) -> &[usize] {
        &self.calls
    }

    pub fn num_calls(&self) -> usize {
        self.calls.len()
    }

    pub fn call_of(&self, s: usize) -> Option<usize> {
        self.call_of[s]
    }

    pub fn call_valuation(&self, call: usize) -> &Valuation {
        match &self.states[self.calls[call]] {
            MacroState::Call { valuation, .. } => valuation,
            MacroState::Concrete { .. } => unreachable!("call index maps to a call state"),
        }
    }

    pub fn call_exits(&self, call: usize) -> &[usize] {
        match &self.states[self.calls[call]] {
            MacroState::Call { exits, .. } => exits,
            MacroState::Concrete { .. } => unreachable!("call index maps to a call state"),
        }
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name() == name)
    }

    /// Number of macro choices (one per call state).
    pub fn num_macro_choices(&self) -> usize {
        self.states
            .iter()
            .map(|s| match s {
                MacroState::Concrete { choices, .. } => choices.len(),
                MacroState::Call { .. } => 1,
            })
            .sum()
    }

    /// States of the explicit hierarchical MDP, without building it.
    pub fn flat_state_count(&self) -> u64 {
        let concrete = (self.states.len() - self.calls.len()) as u64;
        concrete + self.calls.len() as u64 * self.template.inner_states() as u64
    }

    /// All structural invariants of the template and the macro skeleton.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = self.template.validate();
        let scope = Scope::Macro;
        let y = self.template.exit_count();
        if y != self.mode.required_exits() {
            out.push(Diagnostic::new(
                scope,
                DiagnosticKind::ModeArity {
                    mode: self.mode.name(),
                    exits: y,
                },
            ));
        }
        if let ExitMode::SuccessTarget { success_exit } = self.mode {
            if success_exit >= y {
                out.push(Diagnostic::new(
                    scope,
                    DiagnosticKind::SuccessExitOutOfRange(success_exit),
                ));
            }
        }
        let n = self.states.len();
        let params = self.template.params();
        let admissible = self.template.admissible();
        for (s, st) in self.states.iter().enumerate() {
            let name = st.name();
            match st {
                MacroState::Concrete {
                    choices, reward, ..
                } => {
                    if *reward < 0.0 || reward.is_nan() {
                        out.push(
                            Diagnostic::new(scope, DiagnosticKind::NegativeReward(*reward))
                                .at(name),
                        );
                    }
                    if self.targets[s] {
                        continue;
                    }
                    if choices.is_empty() {
                        out.push(Diagnostic::new(scope, DiagnosticKind::NoActions).at(name));
                    }
                    for c in choices {
                        let mut sum = 0.0;
                        for &(t, p) in &c.transitions {
                            if t >= n {
                                out.push(
                                    Diagnostic::new(scope, DiagnosticKind::UnknownSuccessor(t))
                                        .at(name)
                                        .action(&c.label),
                                );
                            }
                            if !(0.0..=1.0).contains(&p) {
                                out.push(
                                    Diagnostic::new(scope, DiagnosticKind::NegativeProbability(p))
                                        .at(name)
                                        .action(&c.label),
                                );
                            }
                            sum += p;
                        }
                        if (sum - 1.0).abs() > 1e-9 {
                            out.push(
                                Diagnostic::new(
                                    scope,
                                    DiagnosticKind::RowNotStochastic {
                                        sum: sum.to_string(),
                                    },
                                )
                                .at(name)
                                .action(&c.label),
                            );
                        }
                    }
                }
                MacroState::Call {
                    valuation, exits, ..
                } => {
                    if exits.len() != y {
                        out.push(
                            Diagnostic::new(
                                scope,
                                DiagnosticKind::ExitArityMismatch {
                                    expected: y,
                                    found: exits.len(),
                                },
                            )
                            .at(name),
                        );
                    }
                    for &t in exits {
                        if t >= n {
                            out.push(
                                Diagnostic::new(scope, DiagnosticKind::UnknownSuccessor(t))
                                    .at(name),
                            );
                        }
                    }
                    if valuation.len() != params.len() {
                        out.push(
                            Diagnostic::new(
                                scope,
                                DiagnosticKind::ValuationArity {
                                    expected: params.len(),
                                    found: valuation.len(),
                                },
                            )
                            .at(name),
                        );
                    } else if admissible.dim() == params.len() {
                        for (k, &x) in valuation.values().iter().enumerate() {
                            if !admissible.interval(k).contains(x, 0.0) {
                                out.push(
                                    Diagnostic::new(
                                        scope,
                                        DiagnosticKind::ValuationOutsideBox {
                                            param: params[k].clone(),
                                            value: x,
                                        },
                                    )
                                    .at(name),
                                );
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// [`validate`](Self::validate) as a `Result`.
    pub fn ensure_valid(&self) -> Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(diags))
        }
    }
}

/// Exit probabilities and expected reward of one subMDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultVector {
    pub probs: Vec<f64>,
    pub reward: f64,
}

impl ResultVector {
    pub fn new(probs: Vec<f64>, reward: f64) -> Self {
        ResultVector { probs, reward }
    }
}

/// Componentwise lower and upper bounds on result vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBounds {
    pub lower: ResultVector,
    pub upper: ResultVector,
}

impl ResultBounds {
    pub fn exact(r: &ResultVector) -> Self {
        ResultBounds {
            lower: r.clone(),
            upper: r.clone(),
        }
    }

    /// The `[0, inf)` reward bounds and `[0, 1]` probabilities used before
    /// anything is known.
    pub fn trivial(exits: usize) -> Self {
        ResultBounds {
            lower: ResultVector::new(vec![0.0; exits], 0.0),
            upper: ResultVector::new(vec![1.0; exits], f64::INFINITY),
        }
    }

    pub fn reward_width(&self) -> f64 {
        self.upper.reward - self.lower.reward
    }

    pub fn prob_width(&self, j: usize) -> f64 {
        self.upper.probs[j] - self.lower.probs[j]
    }

    /// Whether `r` lies inside the bounds, with slack `tol`.
    pub fn contains(&self, r: &ResultVector, tol: f64) -> bool {
        self.lower.reward - tol <= r.reward
            && r.reward <= self.upper.reward + tol
            && r.probs
                .iter()
                .enumerate()
                .all(|(j, &p)| self.lower.probs[j] - tol <= p && p <= self.upper.probs[j] + tol)
    }

    pub fn is_ordered(&self) -> bool {
        self.lower.reward <= self.upper.reward
            && self
                .lower
                .probs
                .iter()
                .zip(&self.upper.probs)
                .all(|(l, u)| l <= u)
    }
}
