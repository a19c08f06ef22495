//! Symbolic integer expressions, ranges, and their conservative comparison.

mod compare;
mod expr;
mod range;

pub use compare::{
    compare, compare_traced, range_contains, range_union, sign_of, sign_of_range, Assumptions, CmpResult, SignFact,
};
pub use expr::{Atom, Lin, SymExpr};
pub use range::SymRange;
