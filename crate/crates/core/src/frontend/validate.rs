//! Semantic checks run after a successful parse.

use std::collections::BTreeSet;

use super::ast::*;
use super::Diagnostic;

pub(super) fn validate(program: &Program, diags: &mut Vec<Diagnostic>) {
    let mut v = Validator { program, diags, loop_lines: BTreeSet::new() };
    v.declarations();
    for s in &program.body {
        v.stmt(s, &[]);
    }
}

struct Validator<'a> {
    program: &'a Program,
    diags: &'a mut Vec<Diagnostic>,
    loop_lines: BTreeSet<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Int,
    Float,
}

impl Validator<'_> {
    fn err(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(span, msg));
    }

    fn declarations(&mut self) {
        let mut seen = BTreeSet::new();
        for p in &self.program.params {
            if !seen.insert(p.clone()) {
                self.err(Span::new(1, 1), format!("duplicate declaration of `{p}`"));
            }
        }
        for d in &self.program.decls {
            if !seen.insert(d.name().to_string()) {
                self.err(d.span(), format!("duplicate declaration of `{}`", d.name()));
            }
            if let Decl::Array { extents, span, .. } = d {
                for e in extents {
                    let mut bad = None;
                    e.visit_names(&mut |n, is_array| {
                        if is_array || !self.program.is_param(n) {
                            bad.get_or_insert_with(|| n.to_string());
                        }
                    });
                    if let Some(n) = bad {
                        self.err(*span, format!("array extent may only use parameters and literals, found `{n}`"));
                    }
                }
            }
        }
    }

    fn stmt(&mut self, s: &Stmt, loops: &[&ForLoop]) {
        match &s.kind {
            StmtKind::Assign { lhs, rhs, .. } => {
                let ctx = match lhs {
                    LValue::Scalar(name) => {
                        self.scalar_target(name, s.span, loops);
                        Ctx::Int
                    }
                    LValue::ArrayElem { array, subs } => match self.program.decl(array) {
                        Some(Decl::Array { extents, elem, .. }) => {
                            if extents.len() == 2 {
                                self.err(s.span, format!("2-D array `{array}` is read-only in kernels"));
                            } else if subs.len() != extents.len() {
                                self.err(
                                    s.span,
                                    format!(
                                        "`{array}` has rank {} but {} subscripts were given",
                                        extents.len(),
                                        subs.len()
                                    ),
                                );
                            }
                            for sub in subs {
                                self.expr(sub, Ctx::Int, s.span);
                            }
                            if *elem == ElemType::Float {
                                Ctx::Float
                            } else {
                                Ctx::Int
                            }
                        }
                        Some(Decl::Scalar { .. }) => {
                            self.err(s.span, format!("`{array}` is a scalar and cannot be subscripted"));
                            Ctx::Int
                        }
                        None => {
                            self.err(s.span, format!("undeclared array `{array}`"));
                            Ctx::Int
                        }
                    },
                };
                self.expr(rhs, ctx, s.span);
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.expr(&cond.lhs, Ctx::Int, s.span);
                self.expr(&cond.rhs, Ctx::Int, s.span);
                for t in then_body.iter().chain(else_body) {
                    self.stmt(t, loops);
                }
            }
            StmtKind::For(l) => {
                if !self.loop_lines.insert(l.id.0) {
                    self.err(s.span, "only one loop per source line is supported (loops are identified by line)");
                }
                if loops.iter().any(|o| o.var == l.var) {
                    self.err(s.span, format!("loop index `{}` is reused by a nested loop", l.var));
                }
                self.scalar_target(&l.var, s.span, loops);
                self.expr(&l.lower, Ctx::Int, s.span);
                self.expr(&l.upper, Ctx::Int, s.span);
                if l.upper.mentions_scalar(&l.var) || l.lower.mentions_scalar(&l.var) {
                    self.err(s.span, format!("loop bounds may not use the loop index `{}`", l.var));
                }
                let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
                written_names(&l.body, &mut scalars, &mut arrays);
                if let Some(n) = scalars.iter().find(|n| l.upper.mentions_scalar(n)) {
                    self.err(s.span, format!("loop upper bound is not loop-invariant: `{n}` is written in the body"));
                }
                if let Some(n) = arrays.iter().find(|n| l.upper.mentions_array(n)) {
                    self.err(s.span, format!("loop upper bound is not loop-invariant: `{n}` is written in the body"));
                }
                let mut inner = loops.to_vec();
                inner.push(l);
                for b in &l.body {
                    self.stmt(b, &inner);
                }
            }
        }
    }

    fn scalar_target(&mut self, name: &str, span: Span, loops: &[&ForLoop]) {
        if self.program.is_param(name) {
            self.err(span, format!("parameter `{name}` cannot be assigned"));
            return;
        }
        match self.program.decl(name) {
            Some(Decl::Scalar { .. }) => {}
            Some(Decl::Array { .. }) => self.err(span, format!("array `{name}` assigned without a subscript")),
            None => self.err(span, format!("undeclared variable `{name}`")),
        }
        if loops.iter().any(|l| l.var == name) {
            self.err(span, format!("loop index `{name}` is written in the loop body"));
        }
    }

    fn expr(&mut self, e: &Expr, ctx: Ctx, span: Span) {
        match e {
            Expr::Int(_) => {}
            Expr::Var(name) => {
                if !self.program.is_param(name) {
                    match self.program.decl(name) {
                        Some(Decl::Scalar { .. }) => {}
                        Some(Decl::Array { .. }) => self.err(span, format!("array `{name}` used without a subscript")),
                        None => self.err(span, format!("undeclared variable `{name}`")),
                    }
                }
            }
            Expr::Index { array, subs } => {
                match self.program.decl(array) {
                    Some(Decl::Array { extents, elem, .. }) => {
                        if extents.len() != subs.len() {
                            self.err(
                                span,
                                format!(
                                    "`{array}` has rank {} but {} subscripts were given",
                                    extents.len(),
                                    subs.len()
                                ),
                            );
                        }
                        if *elem == ElemType::Float && ctx == Ctx::Int {
                            self.err(span, format!("float array `{array}` used in an integer context"));
                        }
                    }
                    Some(Decl::Scalar { .. }) => {
                        self.err(span, format!("`{array}` is a scalar and cannot be subscripted"))
                    }
                    None => self.err(span, format!("undeclared array `{array}`")),
                }
                for s in subs {
                    self.expr(s, Ctx::Int, span);
                }
            }
            Expr::Neg(inner) => self.expr(inner, ctx, span),
            Expr::Binary { op, lhs, rhs } => {
                if *op == BinOp::Mul && ctx == Ctx::Int && lhs.const_value().is_none() && rhs.const_value().is_none() {
                    self.err(span, "unsupported construct: integer multiplication needs a literal factor");
                }
                self.expr(lhs, ctx, span);
                self.expr(rhs, ctx, span);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::parse;

    fn errors(src: &str) -> Vec<String> {
        parse(src).err().unwrap_or_default().into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn undeclared_names() {
        let e = errors("param n; int i; for (i = 0; i < n; i++) { y = i; }");
        assert!(e.iter().any(|m| m.contains("undeclared variable `y`")), "{e:?}");
    }

    #[test]
    fn two_dimensional_arrays_are_read_only() {
        let e = errors("param n; int i; int a[n][n]; for (i = 0; i < n; i++) a[i][i] = 1;");
        assert!(e.iter().any(|m| m.contains("read-only")), "{e:?}");
    }

    #[test]
    fn loop_index_write_and_variant_bound() {
        let e = errors("param n; int i, m; for (i = 0; i < n; i++) { i = 3; }");
        assert!(e.iter().any(|m| m.contains("written in the loop body")), "{e:?}");
        let e = errors("param n; int i, m; for (i = 0; i < m; i++) { m = 3; }");
        assert!(e.iter().any(|m| m.contains("not loop-invariant")), "{e:?}");
    }

    #[test]
    fn multiplication_rules() {
        let e = errors("param n; int i, x; int b[n]; for (i = 0; i < n; i++) x = i * i;");
        assert!(e.iter().any(|m| m.contains("literal factor")), "{e:?}");
        assert!(parse("param n; int i; float v[n], w[n], p[n]; for (i = 0; i < n; i++) p[i] = v[i] * w[i];").is_ok());
        let e = errors("param n; int i, x; float v[n]; for (i = 0; i < n; i++) x = v[i];");
        assert!(e.iter().any(|m| m.contains("integer context")), "{e:?}");
    }

    #[test]
    fn declarations_may_follow_code() {
        assert!(parse("for (i = 0; i < n; i++) { a[i] = i; }\nparam n; int i; int a[n];").is_ok());
    }
}
