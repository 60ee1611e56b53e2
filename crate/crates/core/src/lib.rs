//! Attribute-grammar evaluation with a full computation trace, and
//! query-driven localization of faulty semantic rules.
//!
//! The pipeline is: [`grammar`] parses an `.ag` description, [`sentence`]
//! builds the parse tree of an input, [`evaluator`] decorates it and records
//! every rule application, [`compmodel`] carves the trace into
//! sub-computations, and [`gad`] asks an oracle about them until the suspect
//! set is small enough to report. [`session`] wires oracles to the engine.

pub mod grammar;
pub mod sentence;
pub mod evaluator;
pub mod compmodel;
pub mod value;
pub mod gad;
pub mod session;
pub mod mutate;
pub mod bench;
pub mod server;

pub use grammar::{parse_grammar, Grammar, GrammarError};
pub use value::{diff_values, DiffReport, Sort, Value};
