//! Trace semantics for a family of concurrent languages, built around a
//! locally-abstract / globally-concrete evaluation scheme: statements are
//! evaluated locally to conditioned symbolic traces with continuations, then
//! composed into concrete global traces under pluggable well-formedness
//! policies. A dynamic-logic sequent calculus over the same symbolic traces
//! is included, together with a bounded empirical soundness harness.
//!
//! The crate is `no_std` + `alloc`; everything is deterministic (ordered maps
//! only) so that enumeration output is reproducible across runs and threads.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod value;
pub mod expr;
pub mod state;
pub mod event;
pub mod lang;
pub mod trace;
pub mod localeval;
pub mod wf;
pub mod compose;
pub mod dl;

pub use expr::{Op, SExpr, Var};
pub use state::{ConcretizationMapping, SymbolicState};
pub use value::Value;
