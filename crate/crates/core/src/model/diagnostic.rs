use std::fmt;

/// Which half of a hierarchical model a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Template,
    Macro,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    RowNotStochastic { sum: String },
    NoActions,
    UnknownSuccessor(usize),
    UndeclaredParameter(u32),
    UndeclaredName { what: &'static str, name: String },
    NegativeProbability(f64),
    NegativeReward(f64),
    ExitArityMismatch { expected: usize, found: usize },
    ModeArity { mode: &'static str, exits: usize },
    SuccessExitOutOfRange(usize),
    ValuationArity { expected: usize, found: usize },
    ValuationOutsideBox { param: String, value: f64 },
    ExitHasActions,
    EntryIsExit,
    DuplicateExit,
    TargetNotExit,
    AdmissibleArity { expected: usize, found: usize },
    NotWellDefined(String),
    GraphChange(String),
}

/// One structural problem, located by scope, state and action.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub scope: Scope,
    pub state: Option<String>,
    pub action: Option<String>,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn new(scope: Scope, kind: DiagnosticKind) -> Self {
        Diagnostic {
            scope,
            state: None,
            action: None,
            kind,
        }
    }

    pub fn at(mut self, state: impl Into<String>) -> Self {
        self.state = Some(state.into());
        self
    }

    pub fn action(mut self, action: impl Into<String>) -> Self {
        self.action = Some(action.into());
        self
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DiagnosticKind::*;
        match self {
            RowNotStochastic { sum } => write!(f, "row not stochastic (sums to {sum})"),
            NoActions => write!(f, "non-target state has no actions"),
            UnknownSuccessor(t) => write!(f, "unknown successor #{t}"),
            UndeclaredParameter(k) => write!(f, "undeclared parameter x{k}"),
            UndeclaredName { what, name } => write!(f, "undeclared {what} `{name}`"),
            NegativeProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            NegativeReward(r) => write!(f, "negative reward {r}"),
            ExitArityMismatch { expected, found } => {
                write!(
                    f,
                    "exit arity mismatch: template has {expected} exit(s), call wires {found}"
                )
            }
            ModeArity { mode, exits } => {
                write!(
                    f,
                    "exit arity mismatch: mode {mode} does not allow {exits} exit(s)"
                )
            }
            SuccessExitOutOfRange(j) => write!(f, "success exit #{j} does not exist"),
            ValuationArity { expected, found } => {
                write!(
                    f,
                    "valuation has {found} value(s), template has {expected} parameter(s)"
                )
            }
            ValuationOutsideBox { param, value } => {
                write!(
                    f,
                    "value {value} for {param} lies outside the admissible box"
                )
            }
            ExitHasActions => write!(f, "exit state has outgoing actions"),
            EntryIsExit => write!(f, "entry state is an exit"),
            DuplicateExit => write!(f, "exit declared twice"),
            TargetNotExit => write!(f, "template target is not a declared exit"),
            AdmissibleArity { expected, found } => {
                write!(
                    f,
                    "admissible box has {found} interval(s), expected {expected}"
                )
            }
            NotWellDefined(m) => write!(f, "not well-defined on the admissible box: {m}"),
            GraphChange(m) => write!(f, "admissible box changes the graph: {m}"),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scope = match self.scope {
            Scope::Template => "template",
            Scope::Macro => "macro",
        };
        write!(f, "{scope}")?;
        if let Some(s) = &self.state {
            write!(f, " state {s}")?;
        }
        if let Some(a) = &self.action {
            write!(f, " action {a}")?;
        }
        write!(f, ": {}", self.kind)
    }
}
