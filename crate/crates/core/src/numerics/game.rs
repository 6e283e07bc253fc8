//! Two-player value iteration on vertex relaxations.
//!
//! Each state offers actions; each action offers vertex rows, one per corner
//! of the local parameter box, each with its own reward and distribution.

use crate::error::Result;

use super::{backup_row, ChoiceGraph, Convergence, Objective, Role, SolverConfig, ValueVector};

/// A stopping game over state → action → vertex row.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexGame {
    initial: usize,
    targets: Vec<bool>,
    state_actions: Vec<usize>,
    action_vertices: Vec<usize>,
    vertex_entries: Vec<usize>,
    vertex_reward: Vec<f64>,
    succ: Vec<usize>,
    prob: Vec<f64>,
}

impl VertexGame {
    pub fn num_states(&self) -> usize {
        self.targets.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn actions(&self, s: usize) -> std::ops::Range<usize> {
        self.state_actions[s]..self.state_actions[s + 1]
    }

    pub fn vertices(&self, a: usize) -> std::ops::Range<usize> {
        self.action_vertices[a]..self.action_vertices[a + 1]
    }

    pub fn num_vertex_rows(&self) -> usize {
        self.vertex_reward.len()
    }

    pub fn vertex_row(&self, w: usize) -> (f64, &[usize], &[f64]) {
        let r = self.vertex_entries[w]..self.vertex_entries[w + 1];
        (self.vertex_reward[w], &self.succ[r.clone()], &self.prob[r])
    }

    fn graph(&self) -> ChoiceGraph {
        ChoiceGraph::build(self.targets.clone(), |s, emit: &mut dyn FnMut(&[usize])| {
            for a in self.actions(s) {
                for w in self.vertices(a) {
                    emit(self.vertex_row(w).1);
                }
            }
        })
    }

    fn backup(&self, s: usize, w: usize, v: &[f64], with_reward: bool) -> f64 {
        let (r, succ, prob) = self.vertex_row(w);
        backup_row(s, if with_reward { r } else { 0.0 }, succ, prob, v)
    }
}

/// Incremental construction of a [`VertexGame`].
#[derive(Debug)]
pub struct VertexGameBuilder {
    targets: Vec<bool>,
    state_actions: Vec<usize>,
    action_vertices: Vec<usize>,
    vertex_entries: Vec<usize>,
    vertex_reward: Vec<f64>,
    succ: Vec<usize>,
    prob: Vec<f64>,
}

impl Default for VertexGameBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl VertexGameBuilder {
    pub fn new() -> Self {
        VertexGameBuilder {
            targets: Vec::new(),
            state_actions: vec![0],
            action_vertices: vec![0],
            vertex_entries: vec![0],
            vertex_reward: Vec::new(),
            succ: Vec::new(),
            prob: Vec::new(),
        }
    }

    pub fn push_state(&mut self, target: bool) -> usize {
        self.targets.push(target);
        self.state_actions.push(self.action_vertices.len() - 1);
        self.targets.len() - 1
    }

    pub fn push_action(&mut self) {
        assert!(!self.targets.is_empty(), "push_state before push_action");
        self.action_vertices.push(self.vertex_reward.len());
        *self.state_actions.last_mut().unwrap() = self.action_vertices.len() - 1;
    }

    /// Adds a vertex row to the last action.
    pub fn push_vertex<I: IntoIterator<Item = (usize, f64)>>(&mut self, reward: f64, entries: I) {
        assert!(
            self.action_vertices.len() > 1,
            "push_action before push_vertex"
        );
        for (t, p) in entries {
            if p != 0.0 {
                self.succ.push(t);
                self.prob.push(p);
            }
        }
        self.vertex_entries.push(self.succ.len());
        self.vertex_reward.push(reward);
        *self.action_vertices.last_mut().unwrap() = self.vertex_reward.len();
    }

    pub fn build(self, initial: usize) -> VertexGame {
        assert!(initial < self.targets.len(), "initial state out of range");
        VertexGame {
            initial,
            targets: self.targets,
            state_actions: self.state_actions,
            action_vertices: self.action_vertices,
            vertex_entries: self.vertex_entries,
            vertex_reward: self.vertex_reward,
            succ: self.succ,
            prob: self.prob,
        }
    }
}

/// Solves the game: `vertex_role` resolves vertex rows inside each action,
/// `action_role` resolves actions.
///
/// With [`Objective::Reach`] the marked states count 1 and rewards are
/// ignored. Every reachable state must terminate almost surely whatever
/// either player does.
pub fn game_value_iteration(
    game: &VertexGame,
    action_role: Role,
    vertex_role: Role,
    objective: &Objective,
    cfg: &SolverConfig,
) -> Result<ValueVector> {
    let reach = game
        .graph()
        .ensure_stopping(game.initial(), "vertex game")?;
    let (mut v, with_reward) = match objective {
        Objective::Reward => (vec![0.0; game.num_states()], true),
        Objective::Reach(goal) => (
            goal.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect(),
            false,
        ),
    };
    let order: Vec<usize> = (0..game.num_states())
        .filter(|&s| reach[s] && !game.targets[s])
        .collect();
    let mut conv = Convergence::new(*cfg);
    let residual = loop {
        let mut delta: f64 = 0.0;
        for &s in &order {
            let mut outer = action_role.worst();
            for a in game.actions(s) {
                let mut inner = vertex_role.worst();
                for w in game.vertices(a) {
                    let x = game.backup(s, w, &v, with_reward);
                    if vertex_role.better(x, inner) {
                        inner = x;
                    }
                }
                if action_role.better(inner, outer) {
                    outer = inner;
                }
            }
            delta = delta.max((outer - v[s]).abs());
            v[s] = outer;
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
