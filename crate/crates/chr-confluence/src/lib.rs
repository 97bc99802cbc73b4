//! Static confluence analysis for Constraint Handling Rules programs under
//! the Prolog-style semantics with non-logical built-ins.
//!
//! The crate decides (or reports inability to decide) confluence and
//! confluence modulo a user-supplied state equivalence, restricted to a
//! user-supplied invariant. Verdicts come from a critical-corner analysis
//! over a symbolic meta-level transition system; a concrete bounded
//! interpreter doubles as a ground-instance oracle that cross-checks every
//! verdict on finite universes.
//!
//! Entry points:
//! - [`parse::parse_program`], [`parse::parse_query`], [`parse::parse_analysis_spec`]
//! - [`semantics::normal_forms`] — run a query, collect normal forms
//! - [`engine::check`] — the full confluence analysis, producing a [`engine::Report`]
//! - [`engine::oracle_validate`] — cross-check corner verdicts against the
//!   concrete interpreter on a finite universe

pub mod analysis;
pub mod builtins;
pub mod parse;
pub mod program;
pub mod term;
