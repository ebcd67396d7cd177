//! A tuple-space coordination language with aspect-woven security policies.
//!
//! Processes live at named nodes and interact only through tuple stores:
//! `out` places a tuple, `in` consumes one, `read` copies one, `eval` ships
//! a process to another node, `newloc` mints a private node. Aspects trap
//! these actions before they fire. Each aspect names a cut (which actions it
//! traps, and what it binds from them), and its advice inspects the bound
//! values, the current stores, and, through syntactic analyses like
//! `Act`, `Loc_c`, `LC`, and `FV`, the *future* behavior of the trapped
//! continuation or shipped process. One `break` verdict from any applicable
//! aspect vetoes the action and stops the offending process; everything
//! else proceeds.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`ast`]: syntax trees for nets, processes, aspects, and conditions
//! * [`lex`] / [`parse`]: concrete syntax for systems, aspect files, and
//!   bare process terms
//! * [`model`]: well-formedness checks, substitution, net normalization
//! * [`matcher`]: template and cut matching
//! * [`analysis`]: the syntactic behavior analyses and set algebra
//! * [`weaver`]: advice evaluation and verdict combination
//! * [`runtime`]: the seeded small-step executor
//! * [`print`]: renderers whose output re-parses to the same tree

pub mod analysis;
pub mod ast;
pub mod lex;
pub mod matcher;
pub mod model;
pub mod parse;
pub mod print;
pub mod runtime;
pub mod weaver;

pub use analysis::{EvalError, SetItem, SetValue};
pub use ast::{
    Action, AdviceBody, Aspect, Branch, Capability, Condition, Cut, CutAction, Location, Net,
    NetItem, Process, SetElem, SetExpr, Substitution, Suggestion, SystemState, Tuple,
};
pub use lex::ParseError;
pub use matcher::{match_cut, match_template, JoinPoint, MatchResult};
pub use model::{apply_substitution, flatten_net, validate_net, Violation};
pub use parse::{parse_aspect_file, parse_process_file, parse_system, LoadError};
pub use print::{pretty_print, render_action, render_net_item, render_process};
pub use runtime::{run, Outcome, RunResult, TraceEvent};
pub use weaver::{advise, decide, validate_aspect, Decision, Verdict};
