//! Domain types: multilinear expressions, parametric and parameter-free MDPs,
//! regions, policies, and the factored hierarchical model.

mod diagnostic;
mod expr;
mod hierarchical;
mod mdp;
mod pmdp;
mod policy;
mod region;

pub use diagnostic::{Diagnostic, DiagnosticKind, Scope};
pub use expr::{Coeff, ExprError, Monomial, MultilinearExpr, MAX_VERTEX_PARAMS};
pub use hierarchical::{
    ConcreteChoice, ExitMode, HierarchicalModel, MacroState, ResultBounds, ResultVector, Template,
};
pub use mdp::{Mdp, MdpBuilder};
pub use pmdp::{Choice, Pmdp, PmdpBuilder, WELL_DEFINED_TOL};
pub use policy::Policy;
pub use region::{Interval, Region, RegionError, Valuation};
