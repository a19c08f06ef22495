//! Reference semantics: a concrete interpreter, a seeded input generator and
//! brute-force checkers used as ground truth for the static analysis.

mod check;
mod gen;
mod interp;

pub use check::{
    check_fact, check_iteration_independence, check_output_independence, check_property, eval_in, FactCheck,
    Independence, PropertyCheck,
};
pub use gen::{InputGenerator, Shape, TrialInput, DENSITIES};
pub use interp::{Array, ArrayData, Event, IterationEvent, Machine, Memory, RunError, Trace};
