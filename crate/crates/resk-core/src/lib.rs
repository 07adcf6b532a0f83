//! Structural analysis and exact solvers for deletion interventions on
//! self-join-free conjunctive queries.
//!
//! The library answers three families of questions about a query `q` and a
//! database `D`:
//!
//! - **Resilience**: the minimum number of endogenous tuples whose deletion
//!   makes `q` false.
//! - **Responsibility**: for a tuple `t` (or a wildcard pattern), the minimum
//!   contingency set that makes `t` counterfactual.
//! - **Tractability**: whether those optimization problems are polynomial or
//!   NP-complete for `q`, decided from the query alone via triad detection
//!   after domination / full-domination / FD-rewrite normalization.
//!
//! Polynomial cases are solved by linearizing the query and running an
//! integral min-cut over a layered flow network; the general case falls back
//! to an exact branch-and-bound hitting-set search. Hardness-gadget
//! generators turn 3CNF formulas into adversarial databases for testing.

pub mod engine;
pub mod error;
pub mod exact;
pub mod flow;
pub mod gadgets;
pub mod hypergraph;
pub mod linearize;
pub mod query;
pub mod resp;
pub mod structure;

pub use engine::{Config, ContingencySet, Database, Witness};
pub use error::Error;
pub use query::{Atom, FunctionalDependency, Query, Term};
pub use resp::{MaxRespSet, Method, RespOutcome, Solution, WildcardTuple};

/// Shorthand result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
