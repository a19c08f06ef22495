//! Per-iteration access descriptors for a candidate loop.
//!
//! The body is walked once per control path (capped), keeping scalar values
//! as symbolic expressions of the candidate index. Inner loops contribute
//! their index as an atom together with its bounds.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::frontend::{
    cond_to_string, expr_to_string, written_names, BinOp, CmpOp, Cond, Expr, ForLoop, LValue, Program, Stmt, StmtKind,
};
use crate::symbolic::{Atom, Lin, SymExpr};

const MAX_PATHS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// An inner loop enclosing an access, with inclusive bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoop {
    pub var: String,
    pub lo: SymExpr,
    pub hi: SymExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Access {
    pub array: String,
    pub kind: AccessKind,
    pub subscript: SymExpr,
    /// Enclosing inner loops, outermost first.
    pub inner: Vec<InnerLoop>,
    /// The access may happen on the first iteration.
    pub first: bool,
    /// The access may happen on some later iteration.
    pub rest: bool,
    pub guards: Vec<String>,
    /// Arrays read by the guards on the path.
    pub guard_arrays: BTreeSet<String>,
    pub line: usize,
    pub text: String,
}

impl Access {
    /// Inclusive bounds on the locations touched during one iteration of the
    /// candidate loop.
    pub fn range(&self) -> (SymExpr, SymExpr) {
        let (mut lo, mut hi) = (self.subscript.clone(), self.subscript.clone());
        for l in self.inner.iter().rev() {
            lo = extreme(&lo, l, false);
            hi = extreme(&hi, l, true);
        }
        (lo, hi)
    }

    /// True when the subscript does not depend on an inner loop index.
    pub fn is_point(&self) -> bool {
        !self.inner.iter().any(|l| self.subscript.mentions(&|a| *a == Atom::index(&l.var)))
    }

    pub fn unguarded(&self) -> bool {
        self.guards.is_empty()
    }
}

fn extreme(e: &SymExpr, l: &InnerLoop, upper: bool) -> SymExpr {
    let Some(lin) = e.lin() else { return SymExpr::Bottom };
    let a = Atom::index(&l.var);
    let c = lin.coef(&a);
    let Some(rest) = lin.checked_sub(&Lin::term(a.clone(), c)) else { return SymExpr::Bottom };
    if rest.any_atom(&|x| *x == a) {
        return SymExpr::Bottom;
    }
    if c == 0 {
        return e.clone();
    }
    let by = if (c > 0) == upper { &l.hi } else { &l.lo };
    e.subst1(&a, by)
}

#[derive(Debug, Clone, Default)]
pub struct Accesses {
    pub list: Vec<Access>,
    pub too_many_paths: bool,
}

impl Accesses {
    /// Arrays written in the loop, in order of first write.
    pub fn written_arrays(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in self.list.iter().filter(|a| a.kind == AccessKind::Write) {
            if !out.contains(&a.array) {
                out.push(a.array.clone());
            }
        }
        out
    }

    pub fn of(&self, array: &str, kind: AccessKind) -> Vec<&Access> {
        self.list.iter().filter(|a| a.array == array && a.kind == kind).collect()
    }
}

#[derive(Debug, Clone)]
struct Path {
    env: BTreeMap<String, SymExpr>,
    first: bool,
    rest: bool,
    guards: Vec<String>,
    guard_arrays: BTreeSet<String>,
}

pub struct Collector<'a> {
    program: &'a Program,
    index: String,
    lower: SymExpr,
    written: BTreeSet<String>,
    inner: Vec<InnerLoop>,
    out: Accesses,
}

impl<'a> Collector<'a> {
    pub fn new(program: &'a Program, l: &ForLoop) -> Self {
        let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
        written_names(&l.body, &mut scalars, &mut arrays);
        let mut c = Collector {
            program,
            index: l.var.clone(),
            lower: SymExpr::Bottom,
            written: BTreeSet::new(),
            inner: Vec::new(),
            out: Accesses::default(),
        };
        c.lower = c.eval(&l.lower, &BTreeMap::new());
        c.written = scalars.into_iter().collect();
        c
    }

    pub fn lower(&self) -> &SymExpr {
        &self.lower
    }

    /// Value of an expression over loop-entry state (used for the loop bounds).
    pub fn eval_entry(&self, e: &Expr) -> SymExpr {
        let entry = Collector {
            program: self.program,
            index: self.index.clone(),
            lower: self.lower.clone(),
            written: BTreeSet::new(),
            inner: Vec::new(),
            out: Accesses::default(),
        };
        entry.eval(e, &BTreeMap::new())
    }

    pub fn collect(mut self, body: &[Stmt]) -> Accesses {
        let start =
            Path { env: BTreeMap::new(), first: true, rest: true, guards: Vec::new(), guard_arrays: BTreeSet::new() };
        self.block(body, vec![start]);
        self.out
    }

    fn eval(&self, e: &Expr, env: &BTreeMap<String, SymExpr>) -> SymExpr {
        match e {
            Expr::Int(v) => SymExpr::lit(*v),
            Expr::Var(n) if *n == self.index => SymExpr::index(n),
            Expr::Var(n) => match env.get(n) {
                Some(v) => v.clone(),
                None if self.program.is_param(n) || !self.written.contains(n) => SymExpr::var(n),
                None => SymExpr::Bottom,
            },
            Expr::Index { array, subs } if subs.len() == 1 => SymExpr::elem(array, self.eval(&subs[0], env)),
            Expr::Index { .. } => SymExpr::Bottom,
            Expr::Neg(x) => self.eval(x, env).scale(-1),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.eval(lhs, env), self.eval(rhs, env));
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                }
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], mut paths: Vec<Path>) -> Vec<Path> {
        for s in stmts {
            paths = self.stmt(s, paths);
        }
        paths
    }

    fn stmt(&mut self, s: &Stmt, mut paths: Vec<Path>) -> Vec<Path> {
        let line = s.span.line;
        match &s.kind {
            StmtKind::Assign { lhs, rhs, .. } => {
                for p in &mut paths {
                    self.reads(rhs, p, line);
                    match lhs {
                        LValue::Scalar(x) => {
                            let v = self.eval(rhs, &p.env);
                            p.env.insert(x.clone(), v);
                        }
                        LValue::ArrayElem { array, subs } => {
                            for sub in subs {
                                self.reads(sub, p, line);
                            }
                            let subscript = if subs.len() == 1 { self.eval(&subs[0], &p.env) } else { SymExpr::Bottom };
                            let text = crate::frontend::lvalue_to_string(lhs);
                            self.push(array, AccessKind::Write, subscript, p, line, text);
                        }
                    }
                }
                paths
            }
            StmtKind::If { cond, then_body, else_body } => {
                let mut out = Vec::new();
                for p in paths {
                    self.reads(&cond.lhs, &p, line);
                    self.reads(&cond.rhs, &p, line);
                    if let Some(t) = self.branch(&p, cond, false) {
                        out.extend(self.block(then_body, vec![t]));
                    }
                    if let Some(f) = self.branch(&p, cond, true) {
                        out.extend(self.block(else_body, vec![f]));
                    }
                    if out.len() > MAX_PATHS {
                        self.out.too_many_paths = true;
                        out.truncate(MAX_PATHS);
                    }
                }
                out
            }
            StmtKind::For(inner) => {
                let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
                written_names(&inner.body, &mut scalars, &mut arrays);
                for p in &mut paths {
                    self.reads(&inner.lower, p, line);
                    self.reads(&inner.upper, p, line);
                    let lo = self.eval(&inner.lower, &p.env);
                    let hi = self.eval(&inner.exclusive_upper(), &p.env).add_const(-1);
                    let mut body_path = p.clone();
                    for x in &scalars {
                        body_path.env.remove(x);
                    }
                    body_path.env.insert(inner.var.clone(), SymExpr::index(&inner.var));
                    self.inner.push(InnerLoop { var: inner.var.clone(), lo, hi });
                    self.block(&inner.body, vec![body_path]);
                    self.inner.pop();
                    for x in &scalars {
                        p.env.remove(x);
                    }
                    p.env.insert(inner.var.clone(), SymExpr::Bottom);
                }
                paths
            }
        }
    }

    fn reads(&mut self, e: &Expr, p: &Path, line: usize) {
        match e {
            Expr::Int(_) | Expr::Var(_) => {}
            Expr::Index { array, subs } => {
                for s in subs {
                    self.reads(s, p, line);
                }
                if subs.len() == 1 {
                    let subscript = self.eval(&subs[0], &p.env);
                    self.push(array, AccessKind::Read, subscript, p, line, expr_to_string(e));
                }
            }
            Expr::Neg(x) => self.reads(x, p, line),
            Expr::Binary { lhs, rhs, .. } => {
                self.reads(lhs, p, line);
                self.reads(rhs, p, line);
            }
        }
    }

    fn push(&mut self, array: &str, kind: AccessKind, subscript: SymExpr, p: &Path, line: usize, text: String) {
        self.out.list.push(Access {
            array: array.to_string(),
            kind,
            subscript,
            inner: self.inner.clone(),
            first: p.first,
            rest: p.rest,
            guards: p.guards.clone(),
            guard_arrays: p.guard_arrays.clone(),
            line,
            text,
        });
    }

    /// The path extended by `cond` (or its negation), if still feasible.
    fn branch(&self, p: &Path, cond: &Cond, negate: bool) -> Option<Path> {
        let op = if negate { negated(cond.op) } else { cond.op };
        let d = self.eval(&cond.lhs, &p.env).sub(&self.eval(&cond.rhs, &p.env));
        let (first, rest) = self.scope(&d, op);
        let mut q = p.clone();
        q.first &= first;
        q.rest &= rest;
        if !q.first && !q.rest {
            return None;
        }
        let text = cond_to_string(cond);
        q.guards.push(if negate { format!("!({text})") } else { text });
        for e in [&cond.lhs, &cond.rhs] {
            e.visit_names(&mut |n, is_array| {
                if is_array {
                    q.guard_arrays.insert(n.to_string());
                }
            });
        }
        Some(q)
    }

    /// Whether `d op 0` can hold on the first iteration and on some later one.
    fn scope(&self, d: &SymExpr, op: CmpOp) -> (bool, bool) {
        let i = Atom::index(&self.index);
        let Some(lin) = d.lin() else { return (true, true) };
        let a = lin.coef(&i);
        let Some(rest) = lin.checked_sub(&Lin::term(i.clone(), a)) else { return (true, true) };
        if rest.any_atom(&|x| *x == i) {
            return (true, true);
        }
        // d = a·(i - lower) + c0
        let c0 = SymExpr::Lin(rest).add(&self.lower.scale(a));
        let Some(c0) = c0.as_const() else { return (true, true) };
        let first = op.eval(c0, 0);
        let later = if a == 0 {
            first
        } else {
            let v1 = a + c0;
            match op {
                CmpOp::Eq => -c0 % a == 0 && -c0 / a >= 1,
                CmpOp::Ne => true,
                CmpOp::Lt | CmpOp::Le if a > 0 => op.eval(v1, 0),
                CmpOp::Gt | CmpOp::Ge if a < 0 => op.eval(v1, 0),
                _ => true,
            }
        };
        (first, later)
    }
}

fn negated(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
    }
}
