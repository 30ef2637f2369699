//! Kernel of a dependently typed language with symmetric data and codata types.
//!
//! * [`syntax`]: terms, substitution, α-equality.
//! * [`decl`]: telescopes, contexts, declarations.
//! * [`meta`]: the metavariable map.
//! * [`eval`]: reduction to weak head normal form.
//! * [`index_unify`]: first-order unification of type indices.
//! * [`unifier`]: conversion checking and metavariable solving.
//! * [`typecheck`]: bidirectional elaboration of whole programs.

pub mod decl;
pub mod eval;
pub mod index_unify;
pub mod meta;
pub mod pretty;
pub mod syntax;
pub mod typecheck;
pub mod unifier;
