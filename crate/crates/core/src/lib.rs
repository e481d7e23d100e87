//! Core library: a small relational specification language, a bounded
//! model finder for it, and a mutation-based repair engine that searches
//! bounded-exhaustively over candidate fixes at marked locations.

pub mod ast;
pub mod deps;
pub mod eval;
pub mod instance;
pub mod loc;
pub mod mutate;
pub mod parse;
pub mod print;
pub mod repair;
pub mod report;
pub mod resolve;
pub mod solve;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod types;

pub use ast::{Command, Expr, Formula, Location, Spec, Subtree};
pub use instance::{Instance, TupleSet, Universe};
pub use parse::{parse, ParseError};
pub use print::print_spec;
pub use solve::{check_command, solve_command, SolveError, SolveOptions};
