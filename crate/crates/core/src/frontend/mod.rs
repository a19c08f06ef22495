//! Kernel-language front end: parsing, validation, subscript classification,
//! canonical printing and `#pragma omp` annotation.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use parser::parse;
pub use pretty::{cond_to_string, expr_to_string, lvalue_to_string, pretty_print, render};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { span, message: message.into() }
    }

    /// `file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

/// Result of classifying an array subscript against the innermost loop index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubscriptClass {
    SimpleOffset(i64),
    NonSimple,
}

/// `SimpleOffset(k)` iff `expr` is `index + k` after constant folding.
pub fn classify_subscript(expr: &Expr, loop_index: &str) -> SubscriptClass {
    // Linear view: (coefficient of index, constant), None if anything else appears.
    fn linear(e: &Expr, idx: &str) -> Option<(i64, i64)> {
        match e {
            Expr::Int(v) => Some((0, *v)),
            Expr::Var(n) if n == idx => Some((1, 0)),
            Expr::Var(_) | Expr::Index { .. } => None,
            Expr::Neg(inner) => {
                let (c, k) = linear(inner, idx)?;
                Some((c.checked_neg()?, k.checked_neg()?))
            }
            Expr::Binary { op, lhs, rhs } => {
                let (c1, k1) = linear(lhs, idx)?;
                let (c2, k2) = linear(rhs, idx)?;
                match op {
                    BinOp::Add => Some((c1.checked_add(c2)?, k1.checked_add(k2)?)),
                    BinOp::Sub => Some((c1.checked_sub(c2)?, k1.checked_sub(k2)?)),
                    BinOp::Mul if c1 == 0 => Some((k1.checked_mul(c2)?, k1.checked_mul(k2)?)),
                    BinOp::Mul if c2 == 0 => Some((c1.checked_mul(k2)?, k1.checked_mul(k2)?)),
                    BinOp::Mul => None,
                }
            }
        }
    }
    match linear(expr, loop_index) {
        Some((1, k)) => SubscriptClass::SimpleOffset(k),
        _ => SubscriptClass::NonSimple,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("verdict refers to unknown loop {0}")]
    UnknownLoop(LoopId),
}

/// Scalars written anywhere inside the loop body, including nested loop
/// indices, sorted by name. This is the `private(...)` list.
pub fn private_scalars(l: &ForLoop) -> Vec<String> {
    let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
    written_names(&l.body, &mut scalars, &mut arrays);
    scalars.sort();
    scalars
}

/// `#pragma omp parallel for` with the loop's private scalars.
pub fn pragma_text(l: &ForLoop) -> String {
    let private = private_scalars(l);
    if private.is_empty() {
        "#pragma omp parallel for".to_string()
    } else {
        format!("#pragma omp parallel for private({})", private.join(","))
    }
}

/// Re-emits the program with `#pragma omp parallel for private(...)` above each
/// loop whose entry in `parallel` is true. Every other line is identical to
/// [`pretty_print`].
pub fn annotate(program: &Program, parallel: &BTreeMap<LoopId, bool>) -> Result<String, AnnotateError> {
    let loops = program.loops();
    for id in parallel.keys() {
        if !loops.iter().any(|l| l.id == *id) {
            return Err(AnnotateError::UnknownLoop(*id));
        }
    }
    let pragma = |id: LoopId| -> Option<String> {
        if !parallel.get(&id).copied().unwrap_or(false) {
            return None;
        }
        loops.iter().find(|l| l.id == id).map(|l| pragma_text(l))
    };
    Ok(render(program, &pragma))
}
