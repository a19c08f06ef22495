//! Canonical source rendering.

use std::fmt::Write as _;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(program: &Program) -> String {
    render(program, &|_| None)
}

/// Renders `program`, emitting the line returned by `above` (if any)
/// immediately before the loop with that id, at the loop's indentation.
pub fn render(program: &Program, above: &dyn Fn(LoopId) -> Option<String>) -> String {
    let mut out = String::new();
    if !program.params.is_empty() {
        let _ = writeln!(out, "param {};", program.params.join(", "));
    }
    for d in &program.decls {
        match d {
            Decl::Scalar { name, .. } => {
                let _ = writeln!(out, "int {name};");
            }
            Decl::Array { name, elem, extents, .. } => {
                let ty = match elem {
                    ElemType::Int => "int",
                    ElemType::Float => "float",
                };
                let dims: String = extents.iter().map(|e| format!("[{}]", expr_to_string(e))).collect();
                let _ = writeln!(out, "{ty} {name}{dims};");
            }
        }
    }
    if !out.is_empty() && !program.body.is_empty() {
        out.push('\n');
    }
    block(&mut out, &program.body, 0, above);
    out
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize, above: &dyn Fn(LoopId) -> Option<String>) {
    for s in stmts {
        stmt(out, s, depth, above);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize, above: &dyn Fn(LoopId) -> Option<String>) {
    let pad = INDENT.repeat(depth);
    match &s.kind {
        StmtKind::Assign { lhs, rhs, .. } => {
            let _ = writeln!(out, "{pad}{} = {};", lvalue_to_string(lhs), expr_to_string(rhs));
        }
        StmtKind::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "{pad}if ({}) {{", cond_to_string(cond));
            block(out, then_body, depth + 1, above);
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                block(out, else_body, depth + 1, above);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        StmtKind::For(l) => {
            if let Some(line) = above(l.id) {
                let _ = writeln!(out, "{pad}{line}");
            }
            let cmp = match l.cmp {
                LoopCmp::Lt => "<",
                LoopCmp::Le => "<=",
            };
            let _ = writeln!(
                out,
                "{pad}for ({v} = {}; {v} {cmp} {}; {v}++) {{",
                expr_to_string(&l.lower),
                expr_to_string(&l.upper),
                v = l.var
            );
            block(out, &l.body, depth + 1, above);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

pub fn lvalue_to_string(lv: &LValue) -> String {
    match lv {
        LValue::Scalar(n) => n.clone(),
        LValue::ArrayElem { array, subs } => format!("{array}{}", subs_to_string(subs)),
    }
}

fn subs_to_string(subs: &[Expr]) -> String {
    subs.iter().map(|e| format!("[{}]", expr_to_string(e))).collect()
}

pub fn cond_to_string(c: &Cond) -> String {
    format!("{} {} {}", expr_to_string(&c.lhs), c.op.symbol(), expr_to_string(&c.rhs))
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 1,
        Expr::Binary { op: BinOp::Mul, .. } => 2,
        Expr::Int(v) if *v < 0 => 3,
        _ => 4,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Var(n) => n.clone(),
        Expr::Index { array, subs } => format!("{array}{}", subs_to_string(subs)),
        Expr::Neg(inner) => {
            if prec(inner) < 4 {
                format!("-({})", expr_to_string(inner))
            } else {
                format!("-{}", expr_to_string(inner))
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = prec(e);
            let l = if prec(lhs) < p { format!("({})", expr_to_string(lhs)) } else { expr_to_string(lhs) };
            // Negative literals are parenthesized on the right so `a - -1` stays readable.
            let r = if prec(rhs) <= p || prec(rhs) == 3 {
                format!("({})", expr_to_string(rhs))
            } else {
                expr_to_string(rhs)
            };
            format!("{l} {} {r}", op.symbol())
        }
    }
}
