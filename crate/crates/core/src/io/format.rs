//! Line-oriented template and macro formats.
//!
//! Template:
//!
//! ```text
//! param p in [1/20, 19/20]
//! entry s0
//! exits s2
//! s0 | go | s1: p, s0: 1 - p | 1
//! s1 | go | s2: p, s1: 1 - p | 1
//! ```
//!
//! Macro:
//!
//! ```text
//! initial m0
//! target done
//! mode single
//! call m0 p=1/2 exits=c0
//! concrete c0 | flip | m1: 1/2, m2: 1/2 | 0
//! ```
//!
//! `#` starts a comment. An optional `states a, b, ...` line fixes the state
//! order; otherwise states are numbered in order of definition.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{
    ConcreteChoice, Diagnostic, DiagnosticKind, ExitMode, HierarchicalModel, MacroState,
    MultilinearExpr, PmdpBuilder, Region, Scope, Template, Valuation,
};

use super::expr::{parse_expr, parse_real};
use super::ParseError;

/// A non-empty, comment-stripped line with its 1-based number.
struct Line<'a> {
    no: usize,
    raw: &'a str,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn col(&self, sub: &str) -> usize {
        sub.as_ptr() as usize - self.raw.as_ptr() as usize + 1
    }

    fn err(&self, sub: &str, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.no, self.col(sub), msg)
    }

    /// Splits `keyword rest` when the line starts with `keyword`.
    fn keyword(&self, keyword: &str) -> Option<&'a str> {
        let rest = self.text.strip_prefix(keyword)?;
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            Some(rest.trim())
        } else {
            None
        }
    }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then_some(Line {
                no: i + 1,
                raw,
                text: body,
            })
        })
        .collect()
}

fn list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

/// State numbering shared by both formats: an explicit `states` line, or
/// definitions first and other references after.
struct Names {
    fixed: bool,
    order: Vec<String>,
    index: HashMap<String, usize>,
}

impl Names {
    fn new(fixed: Option<Vec<String>>) -> Self {
        let mut n = Names {
            fixed: fixed.is_some(),
            order: Vec::new(),
            index: HashMap::new(),
        };
        for s in fixed.unwrap_or_default() {
            n.insert(&s);
        }
        n
    }

    fn insert(&mut self, name: &str) -> usize {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        self.order.push(name.to_string());
        self.index.insert(name.to_string(), self.order.len() - 1);
        self.order.len() - 1
    }

    /// Index of `name`; unknown names are reported and still numbered when
    /// the order is fixed.
    fn resolve(&mut self, name: &str, scope: Scope, diags: &mut Vec<Diagnostic>) -> usize {
        if self.fixed && !self.index.contains_key(name) {
            diags.push(Diagnostic::new(
                scope,
                DiagnosticKind::UndeclaredName {
                    what: "state",
                    name: name.to_string(),
                },
            ));
        }
        self.insert(name)
    }
}

fn states_line(lines: &[Line<'_>]) -> Result<Option<Vec<String>>, ParseError> {
    let mut found = None;
    for l in lines {
        if let Some(rest) = l.keyword("states").filter(|_| !l.text.contains('|')) {
            if found.is_some() {
                return Err(l.err(l.text, "duplicate `states` line"));
            }
            let names: Vec<String> = list(rest).into_iter().map(String::from).collect();
            if let Some(bad) = names.iter().find(|n| !is_name(n)) {
                return Err(l.err(l.text, format!("bad state name `{bad}`")));
            }
            found = Some(names);
        }
    }
    Ok(found)
}

struct RowSpec<'a> {
    line: &'a Line<'a>,
    state: &'a str,
    action: &'a str,
    succ: Vec<(&'a str, &'a str)>,
    reward: Option<&'a str>,
}

fn parse_row<'a>(l: &'a Line<'a>, body: &'a str) -> Result<RowSpec<'a>, ParseError> {
    let fields: Vec<&str> = body.split('|').map(str::trim).collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(l.err(body, "expected `state | action | successors [| reward]`"));
    }
    let (state, action) = (fields[0], fields[1]);
    if !is_name(state) {
        return Err(l.err(state, format!("bad state name `{state}`")));
    }
    if !is_name(action) {
        return Err(l.err(
            if action.is_empty() { body } else { action },
            "bad action label",
        ));
    }
    let mut succ = Vec::new();
    for entry in list(fields[2]) {
        let (name, value) = entry
            .split_once(':')
            .ok_or_else(|| l.err(entry, "expected `successor: probability`"))?;
        let (name, value) = (name.trim(), value.trim());
        if !is_name(name) {
            return Err(l.err(entry, format!("bad successor name `{name}`")));
        }
        if value.is_empty() {
            return Err(l.err(entry, "missing probability"));
        }
        succ.push((name, value));
    }
    if succ.is_empty() {
        return Err(l.err(fields[2], "a row needs at least one successor"));
    }
    let reward = fields.get(3).copied().filter(|r| !r.is_empty());
    Ok(RowSpec {
        line: l,
        state,
        action,
        succ,
        reward,
    })
}

fn single_name<'a>(l: &Line<'a>, rest: &'a str, what: &str) -> Result<&'a str, ParseError> {
    if !is_name(rest) {
        return Err(l.err(
            if rest.is_empty() { l.text } else { rest },
            format!("expected a {what} name"),
        ));
    }
    Ok(rest)
}

fn fail_or<T>(diags: Vec<Diagnostic>, value: T) -> Result<T> {
    if diags.is_empty() {
        Ok(value)
    } else {
        Err(Error::Invalid(diags))
    }
}

/// Parses and validates a template.
pub fn parse_template(text: &str) -> Result<Template> {
    let lines = lines(text);
    if lines.is_empty() {
        return Err(ParseError::new(1, 1, "empty template").into());
    }
    let fixed = states_line(&lines)?;
    let mut params: Vec<(String, f64, f64)> = Vec::new();
    let mut entry: Option<(&Line<'_>, &str)> = None;
    let mut exits: Option<(&Line<'_>, Vec<&str>)> = None;
    let mut rows = Vec::new();
    for l in &lines {
        if l.text.contains('|') {
            rows.push(parse_row(l, l.text)?);
        } else if let Some(rest) = l.keyword("param") {
            let (name, range) = rest
                .split_once(" in ")
                .ok_or_else(|| l.err(rest, "expected `param <name> in [lo, hi]`"))?;
            let name = name.trim();
            if !is_name(name) {
                return Err(l.err(rest, format!("bad parameter name `{name}`")).into());
            }
            if params.iter().any(|p| p.0 == name) {
                return Err(l
                    .err(name, format!("parameter `{name}` declared twice"))
                    .into());
            }
            let inner = range
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| l.err(range.trim(), "expected `[lo, hi]`"))?;
            let (lo, hi) = inner
                .split_once(',')
                .ok_or_else(|| l.err(inner, "expected `lo, hi`"))?;
            let lo_v = parse_real(lo).ok_or_else(|| l.err(lo.trim(), "bad number"))?;
            let hi_v = parse_real(hi).ok_or_else(|| l.err(hi.trim(), "bad number"))?;
            if lo_v > hi_v {
                return Err(l.err(inner, "lower bound above upper bound").into());
            }
            params.push((name.to_string(), lo_v, hi_v));
        } else if let Some(rest) = l.keyword("entry") {
            if entry.is_some() {
                return Err(l.err(l.text, "duplicate `entry` line").into());
            }
            entry = Some((l, single_name(l, rest, "state")?));
        } else if let Some(rest) = l.keyword("exits") {
            if exits.is_some() {
                return Err(l.err(l.text, "duplicate `exits` line").into());
            }
            let names = list(rest);
            if names.is_empty() {
                return Err(l.err(l.text, "expected at least one exit").into());
            }
            if let Some(bad) = names.iter().find(|n| !is_name(n)) {
                return Err(l.err(bad, format!("bad state name `{bad}`")).into());
            }
            exits = Some((l, names));
        } else if l.keyword("states").is_none() {
            return Err(l.err(l.text, "unrecognized line").into());
        }
    }
    let last = lines.last().map_or(1, |l| l.no);
    let (_, entry_name) = entry.ok_or_else(|| ParseError::new(last, 1, "missing `entry` line"))?;
    let (_, exit_names) = exits.ok_or_else(|| ParseError::new(last, 1, "missing `exits` line"))?;

    let mut diags = Vec::new();
    let mut names = Names::new(fixed);
    for r in &rows {
        names.resolve(r.state, Scope::Template, &mut diags);
    }
    let entry_idx = names.resolve(entry_name, Scope::Template, &mut diags);
    let exit_idx: Vec<usize> = exit_names
        .iter()
        .map(|n| names.resolve(n, Scope::Template, &mut diags))
        .collect();
    let mut parsed_rows = Vec::with_capacity(rows.len());
    let param_names: Vec<String> = params.iter().map(|p| p.0.clone()).collect();
    let mut undeclared: Vec<String> = Vec::new();
    let mut resolve = |name: &str| -> u32 {
        if let Some(k) = param_names.iter().position(|p| p == name) {
            return k as u32;
        }
        let k = match undeclared.iter().position(|p| p == name) {
            Some(k) => k,
            None => {
                undeclared.push(name.to_string());
                undeclared.len() - 1
            }
        };
        (param_names.len() + k) as u32
    };
    for r in &rows {
        let l = r.line;
        let s = names.index[r.state];
        let mut transitions = Vec::new();
        for &(succ, value) in &r.succ {
            let t = names.resolve(succ, Scope::Template, &mut diags);
            let e = parse_expr(value, l.no, l.col(value), &mut resolve)?;
            transitions.push((t, e));
        }
        let reward = match r.reward {
            Some(text) => (
                Some(text),
                parse_expr(text, l.no, l.col(text), &mut resolve)?,
            ),
            None => (None, MultilinearExpr::zero()),
        };
        parsed_rows.push((s, r.action, transitions, reward, l));
    }
    for name in &undeclared {
        diags.push(Diagnostic::new(
            Scope::Template,
            DiagnosticKind::UndeclaredName {
                what: "parameter",
                name: name.clone(),
            },
        ));
    }
    let mut b = PmdpBuilder::new(param_names);
    for n in &names.order {
        b.add_state(n.as_str());
    }
    let mut reward_of: Vec<Option<MultilinearExpr>> = vec![None; names.order.len()];
    for (s, action, transitions, (text, reward), l) in parsed_rows {
        match &reward_of[s] {
            Some(prev) if *prev != reward => {
                let at = text.unwrap_or(l.text);
                return Err(l
                    .err(at, "reward differs from an earlier row of this state")
                    .into());
            }
            Some(_) => {}
            None => {
                b.set_reward(s, reward.clone());
                reward_of[s] = Some(reward);
            }
        }
        b.add_choice(s, action, transitions);
    }
    for &e in &exit_idx {
        b.set_target(e, true);
    }
    let (lower, upper): (Vec<f64>, Vec<f64>) = params.iter().map(|p| (p.1, p.2)).unzip();
    let admissible =
        Region::new(lower, upper).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let template = Template::new(b.build(entry_idx), exit_idx, admissible);
    if diags.is_empty() {
        diags = template.validate();
    }
    fail_or(diags, template)
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// Renders a template in the format read by [`parse_template`].
pub fn serialize_template(t: &Template) -> String {
    let p = t.pmdp();
    let mut out = String::new();
    for (k, name) in t.params().iter().enumerate() {
        let iv = t.admissible().interval(k);
        let _ = writeln!(
            out,
            "param {name} in [{}, {}]",
            fmt_real(iv.lo),
            fmt_real(iv.hi)
        );
    }
    let _ = writeln!(out, "states {}", p.state_names().join(", "));
    let _ = writeln!(out, "entry {}", p.state_name(t.entry()));
    let exits: Vec<&str> = t.exits().iter().map(|&e| p.state_name(e)).collect();
    let _ = writeln!(out, "exits {}", exits.join(", "));
    for s in 0..p.num_states() {
        if p.is_target(s) {
            continue;
        }
        let reward = p.reward(s).display(t.params()).to_string();
        for c in p.choices(s) {
            let succ: Vec<String> = c
                .transitions
                .iter()
                .map(|(u, e)| format!("{}: {}", p.state_name(*u), e.display(t.params())))
                .collect();
            let _ = writeln!(
                out,
                "{} | {} | {} | {}",
                p.state_name(s),
                c.label,
                succ.join(", "),
                reward
            );
        }
    }
    out
}

/// Parses `single`, `success-target` (success exit 0) or
/// `success-target exit=<label>` against the template's exit names.
pub fn parse_mode(text: &str, template: &Template) -> std::result::Result<ExitMode, String> {
    let text = text.trim();
    if text == "single" {
        return Ok(ExitMode::Single);
    }
    let rest = text
        .strip_prefix("success-target")
        .ok_or_else(|| format!("unknown mode `{text}`"))?
        .trim();
    if rest.is_empty() {
        return Ok(ExitMode::SuccessTarget { success_exit: 0 });
    }
    let label = rest
        .strip_prefix("exit=")
        .or_else(|| rest.strip_prefix('='))
        .or_else(|| rest.strip_prefix(':'))
        .ok_or_else(|| format!("expected `exit=<label>`, found `{rest}`"))?
        .trim();
    let p = template.pmdp();
    template
        .exits()
        .iter()
        .position(|&e| p.state_name(e) == label)
        .map(|success_exit| ExitMode::SuccessTarget { success_exit })
        .ok_or_else(|| format!("`{label}` is not an exit of the template"))
}

fn mode_text(mode: ExitMode, template: &Template) -> String {
    match mode {
        ExitMode::Single => "single".into(),
        ExitMode::SuccessTarget { success_exit } => match template.exits().get(success_exit) {
            Some(&e) => format!("success-target exit={}", template.pmdp().state_name(e)),
            None => "success-target".into(),
        },
    }
}

enum Def<'a> {
    Concrete(Vec<RowSpec<'a>>),
    Call {
        line: &'a Line<'a>,
        assigns: Vec<(&'a str, &'a str)>,
        exits: Vec<&'a str>,
    },
}

/// Parses a macro file against an already parsed template and validates the
/// resulting model.
pub fn parse_macro(text: &str, template: &Template) -> Result<HierarchicalModel> {
    let lines = lines(text);
    if lines.is_empty() {
        return Err(ParseError::new(1, 1, "empty macro file").into());
    }
    let fixed = states_line(&lines)?;
    let mut initial: Option<&str> = None;
    let mut targets: Vec<&str> = Vec::new();
    let mut mode = ExitMode::Single;
    let mut order: Vec<&str> = Vec::new();
    let mut defs: HashMap<&str, Def<'_>> = HashMap::new();
    for l in &lines {
        if let Some(rest) = l.keyword("concrete") {
            let row = parse_row(l, rest)?;
            match defs.get_mut(row.state) {
                Some(Def::Concrete(rows)) => rows.push(row),
                Some(Def::Call { .. }) => {
                    return Err(l
                        .err(
                            row.state,
                            format!("`{}` is already a call state", row.state),
                        )
                        .into())
                }
                None => {
                    order.push(row.state);
                    defs.insert(row.state, Def::Concrete(vec![row]));
                }
            }
        } else if let Some(rest) = l.keyword("call") {
            let mut words = rest.split_whitespace();
            let name = words.next().unwrap_or("");
            if !is_name(name) {
                return Err(l
                    .err(
                        if name.is_empty() { l.text } else { name },
                        "expected a state name",
                    )
                    .into());
            }
            if defs.contains_key(name) {
                return Err(l.err(name, format!("state `{name}` defined twice")).into());
            }
            let mut assigns = Vec::new();
            let mut exits = None;
            for w in words {
                if let Some(labels) = w.strip_prefix("exits=") {
                    exits = Some(list(labels));
                } else {
                    for a in list(w) {
                        let (k, v) = a
                            .split_once('=')
                            .ok_or_else(|| l.err(a, "expected `param=value`"))?;
                        assigns.push((k.trim(), v.trim()));
                    }
                }
            }
            let exits = exits.ok_or_else(|| l.err(l.text, "missing `exits=`"))?;
            order.push(name);
            defs.insert(
                name,
                Def::Call {
                    line: l,
                    assigns,
                    exits,
                },
            );
        } else if let Some(rest) = l.keyword("initial") {
            if initial.is_some() {
                return Err(l.err(l.text, "duplicate `initial` line").into());
            }
            initial = Some(single_name(l, rest, "state")?);
        } else if let Some(rest) = l.keyword("target") {
            for t in list(rest) {
                if !is_name(t) {
                    return Err(l.err(t, format!("bad state name `{t}`")).into());
                }
                targets.push(t);
            }
        } else if let Some(rest) = l.keyword("mode") {
            mode = parse_mode(rest, template).map_err(|m| l.err(rest, m))?;
        } else if l.keyword("states").is_none() {
            return Err(l.err(l.text, "unrecognized line").into());
        }
    }
    let last = lines.last().map_or(1, |l| l.no);
    let initial = initial.ok_or_else(|| ParseError::new(last, 1, "missing `initial` line"))?;

    let mut diags = Vec::new();
    let mut names = Names::new(fixed);
    for name in &order {
        names.resolve(name, Scope::Macro, &mut diags);
    }
    for t in &targets {
        names.resolve(t, Scope::Macro, &mut diags);
    }
    let initial = names.resolve(initial, Scope::Macro, &mut diags);
    let params = template.params();
    let mut built: HashMap<usize, MacroState> = HashMap::new();
    for name in &order {
        let s = names.index[*name];
        let state = match &defs[name] {
            Def::Concrete(rows) => {
                let mut reward = None;
                let mut choices = Vec::new();
                for r in rows {
                    let l = r.line;
                    let value = match r.reward {
                        Some(text) => parse_real(text).ok_or_else(|| l.err(text, "bad number"))?,
                        None => 0.0,
                    };
                    if reward.is_some_and(|x| x != value) {
                        return Err(l
                            .err(
                                r.reward.unwrap_or(l.text),
                                "reward differs from an earlier row of this state",
                            )
                            .into());
                    }
                    reward = Some(value);
                    let mut transitions = Vec::new();
                    for &(succ, prob) in &r.succ {
                        let p = parse_real(prob).ok_or_else(|| l.err(prob, "bad probability"))?;
                        let t = names.index.get(succ).copied();
                        let t = match t {
                            Some(t) => t,
                            None => {
                                diags.push(
                                    Diagnostic::new(
                                        Scope::Macro,
                                        DiagnosticKind::UndeclaredName {
                                            what: "state",
                                            name: succ.to_string(),
                                        },
                                    )
                                    .at(*name)
                                    .action(r.action),
                                );
                                names.insert(succ)
                            }
                        };
                        transitions.push((t, p));
                    }
                    choices.push(ConcreteChoice {
                        label: r.action.to_string(),
                        transitions,
                    });
                }
                MacroState::Concrete {
                    name: name.to_string(),
                    choices,
                    reward: reward.unwrap_or(0.0),
                }
            }
            Def::Call {
                line,
                assigns,
                exits,
            } => {
                let mut values = vec![None; params.len()];
                for &(k, v) in assigns {
                    let x = parse_real(v).ok_or_else(|| line.err(v, "bad number"))?;
                    match params.iter().position(|p| p == k) {
                        Some(j) if values[j].is_some() => {
                            return Err(line.err(k, format!("`{k}` assigned twice")).into())
                        }
                        Some(j) => values[j] = Some(x),
                        None => diags.push(
                            Diagnostic::new(
                                Scope::Macro,
                                DiagnosticKind::UndeclaredName {
                                    what: "parameter",
                                    name: k.to_string(),
                                },
                            )
                            .at(*name),
                        ),
                    }
                }
                let found = values.iter().filter(|v| v.is_some()).count();
                if found != params.len() {
                    diags.push(
                        Diagnostic::new(
                            Scope::Macro,
                            DiagnosticKind::ValuationArity {
                                expected: params.len(),
                                found,
                            },
                        )
                        .at(*name),
                    );
                }
                let admissible = template.admissible();
                let valuation = Valuation::new(
                    values
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v.unwrap_or_else(|| admissible.interval(j).lo))
                        .collect(),
                );
                let mut wired = Vec::with_capacity(exits.len());
                for label in exits {
                    match names.index.get(*label) {
                        Some(&t) => wired.push(t),
                        None => {
                            diags.push(
                                Diagnostic::new(
                                    Scope::Macro,
                                    DiagnosticKind::UndeclaredName {
                                        what: "exit label",
                                        name: label.to_string(),
                                    },
                                )
                                .at(*name),
                            );
                            wired.push(names.insert(label));
                        }
                    }
                }
                MacroState::Call {
                    name: name.to_string(),
                    valuation,
                    exits: wired,
                }
            }
        };
        built.insert(s, state);
    }
    let n = names.order.len();
    let mut is_target = vec![false; n];
    for t in &targets {
        is_target[names.index[*t]] = true;
    }
    let states: Vec<MacroState> = (0..n)
        .map(|s| {
            built.remove(&s).unwrap_or_else(|| MacroState::Concrete {
                name: names.order[s].clone(),
                choices: Vec::new(),
                reward: 0.0,
            })
        })
        .collect();
    let model = HierarchicalModel::new(states, initial, is_target, template.clone(), mode);
    if diags.is_empty() {
        diags = model.validate();
    }
    fail_or(diags, model)
}

/// Renders a model's macro part in the format read by [`parse_macro`].
pub fn serialize_macro(m: &HierarchicalModel) -> String {
    let mut out = String::new();
    let names: Vec<&str> = m.states().iter().map(MacroState::name).collect();
    let _ = writeln!(out, "states {}", names.join(", "));
    let _ = writeln!(out, "initial {}", names[m.initial()]);
    let targets: Vec<&str> = (0..m.num_states())
        .filter(|&s| m.is_target(s))
        .map(|s| names[s])
        .collect();
    if !targets.is_empty() {
        let _ = writeln!(out, "target {}", targets.join(", "));
    }
    let _ = writeln!(out, "mode {}", mode_text(m.mode(), m.template()));
    let params = m.template().params();
    for (s, st) in m.states().iter().enumerate() {
        match st {
            MacroState::Concrete {
                name,
                choices,
                reward,
            } => {
                if m.is_target(s) {
                    continue;
                }
                for c in choices {
                    let succ: Vec<String> = c
                        .transitions
                        .iter()
                        .map(|&(t, p)| format!("{}: {}", names[t], fmt_real(p)))
                        .collect();
                    let _ = writeln!(
                        out,
                        "concrete {name} | {} | {} | {}",
                        c.label,
                        succ.join(", "),
                        fmt_real(*reward)
                    );
                }
            }
            MacroState::Call {
                name,
                valuation,
                exits,
            } => {
                let assigns: Vec<String> = params
                    .iter()
                    .zip(valuation.values())
                    .map(|(k, v)| format!("{k}={}", fmt_real(*v)))
                    .collect();
                let wired: Vec<&str> = exits.iter().map(|&t| names[t]).collect();
                let sep = if assigns.is_empty() { "" } else { " " };
                let _ = writeln!(
                    out,
                    "call {name}{sep}{} exits={}",
                    assigns.join(","),
                    wired.join(",")
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOKEN: &str = "\
# passToken
param p in [1/20, 19/20]
entry s0
exits s2
s0 | go | s1: p, s0: 1 - p | 1
s1 | go | s2: p, s1: 1 - p | 1
";

    const MACRO: &str = "\
initial m0
target done
mode single
call m0 p=1/2 exits=c0
concrete c0 | flip | m1: 1/2, m2: 1/2 | 0
call m1 p=2/5 exits=done
call m2 p=5/8 exits=done
";

    #[test]
    fn token_template_parses() {
        let t = parse_template(TOKEN).unwrap();
        assert_eq!(t.pmdp().num_states(), 3);
        assert_eq!(t.exit_count(), 1);
        assert_eq!(t.admissible().interval(0).lo, 0.05);
        assert_eq!(t.pmdp().state_name(t.entry()), "s0");
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse_template(""), Err(Error::Parse(_))));
        assert!(matches!(
            parse_template("# only a comment\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn undeclared_parameter_is_diagnosed() {
        let text = TOKEN.replace("s1: p, s0: 1 - p", "s1: q, s0: 1 - q");
        match parse_template(&text) {
            Err(Error::Invalid(d)) => {
                assert!(d
                    .iter()
                    .any(|d| d.to_string().contains("undeclared parameter `q`")))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_point_at_the_problem() {
        let text = TOKEN.replace("s1: p, s0: 1 - p |", "s1 p, s0: 1 - p |");
        match parse_template(&text) {
            Err(Error::Parse(e)) => assert_eq!((e.line, e.column), (5, 11)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn template_round_trips() {
        let t = parse_template(TOKEN).unwrap();
        let again = parse_template(&serialize_template(&t)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn macro_parses_and_round_trips() {
        let t = parse_template(TOKEN).unwrap();
        let m = parse_macro(MACRO, &t).unwrap();
        assert_eq!(m.num_calls(), 3);
        assert_eq!(m.call_valuation(1).values(), &[0.4]);
        let again = parse_macro(&serialize_macro(&m), &t).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn missing_exit_label_is_diagnosed() {
        let t = parse_template(TOKEN).unwrap();
        let text = MACRO.replace("call m2 p=5/8 exits=done", "call m2 p=5/8 exits=nowhere");
        match parse_macro(&text, &t) {
            Err(Error::Invalid(d)) => assert!(d[0].to_string().contains("nowhere")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_exit_arity_is_diagnosed() {
        let t = parse_template(TOKEN).unwrap();
        let text = MACRO.replace("exits=c0", "exits=c0,done");
        match parse_macro(&text, &t) {
            Err(Error::Invalid(d)) => {
                assert!(d
                    .iter()
                    .any(|d| d.to_string().contains("exit arity mismatch")))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn concrete_only_macro() {
        let t = parse_template(TOKEN).unwrap();
        let m = parse_macro("initial a\ntarget b\nconcrete a | go | b: 1 | 3\n", &t).unwrap();
        assert_eq!(m.num_calls(), 0);
        assert_eq!(m.num_states(), 2);
    }

    #[test]
    fn modes() {
        let t = parse_template(TOKEN).unwrap();
        assert_eq!(parse_mode("single", &t), Ok(ExitMode::Single));
        assert_eq!(
            parse_mode("success-target exit=s2", &t),
            Ok(ExitMode::SuccessTarget { success_exit: 0 })
        );
        assert!(parse_mode("success-target exit=s1", &t).is_err());
        assert!(parse_mode("fancy", &t).is_err());
    }
}
