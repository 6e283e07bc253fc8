//! Anytime verification of hierarchical MDPs.
//!
//! A hierarchical model is a macro-level MDP whose call states each invoke
//! one parametric template at their own valuation. The crate bounds the
//! maximal expected reward of the (never materialized) flat model from below
//! and above, refining the bounds by analysing sets of template instances
//! with parameter lifting and individual instances exactly, until a requested
//! precision ratio is met.

pub mod error;
pub mod hierarchy;
pub mod io;
pub mod lifting;
pub mod model;
pub mod numerics;
pub mod refine;

pub use error::{Error, Result};
pub use hierarchy::{enumerate_baseline, flatten, flatten_and_solve, UncertainMacro};
pub use model::{
    ExitMode, HierarchicalModel, Interval, MacroState, Mdp, Pmdp, Policy, Region, ResultBounds,
    ResultVector, Template, Valuation,
};
pub use numerics::SolverConfig;
pub use refine::{run, Outcome, RefineConfig, TraceEntry};
