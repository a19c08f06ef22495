//! Syntax tree for the kernel language.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Line/column of a token, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl Span {
    pub fn new(line: usize, col: usize) -> Self {
        Span { line, col }
    }
}

/// Loops are identified by the source line of their `for` keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LoopId(pub usize);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loop@{}", self.0)
    }
}

impl std::str::FromStr for LoopId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("loop@").unwrap_or(s);
        digits
            .parse::<usize>()
            .map(LoopId)
            .map_err(|_| format!("invalid loop id `{s}` (expected loop@<line> or <line>)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ElemType {
    Int,
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Scalar { name: String, span: Span },
    Array { name: String, elem: ElemType, extents: Vec<Expr>, span: Span },
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Scalar { name, .. } | Decl::Array { name, .. } => name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Decl::Scalar { span, .. } | Decl::Array { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Var(String),
    /// Array element; one subscript for 1-D arrays, two for 2-D.
    Index {
        array: String,
        subs: Vec<Expr>,
    },
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    /// Folds the expression to a literal when it contains no names.
    pub fn const_value(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            Expr::Var(_) | Expr::Index { .. } => None,
            Expr::Neg(e) => e.const_value().and_then(i64::checked_neg),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (lhs.const_value()?, rhs.const_value()?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                }
            }
        }
    }

    /// Calls `f` on every scalar name and array name mentioned.
    pub fn visit_names(&self, f: &mut dyn FnMut(&str, bool)) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => f(name, false),
            Expr::Index { array, subs } => {
                f(array, true);
                for s in subs {
                    s.visit_names(f);
                }
            }
            Expr::Neg(e) => e.visit_names(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_names(f);
                rhs.visit_names(f);
            }
        }
    }

    pub fn mentions_scalar(&self, name: &str) -> bool {
        let mut hit = false;
        self.visit_names(&mut |n, is_array| hit |= !is_array && n == name);
        hit
    }

    pub fn mentions_array(&self, name: &str) -> bool {
        let mut hit = false;
        self.visit_names(&mut |n, is_array| hit |= is_array && n == name);
        hit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    /// The operator with its operands swapped (`a < b` is `b > a`).
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Scalar(String),
    ArrayElem { array: String, subs: Vec<Expr> },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Scalar(n) => n,
            LValue::ArrayElem { array, .. } => array,
        }
    }
}

/// Where an assignment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOrigin {
    Source,
    /// `x = x + 1` (or `- 1`) inserted for a `x++` / `x--`.
    PostIncrement,
}

/// Header comparison as written; `<=` is normalized by [`ForLoop::exclusive_upper`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopCmp {
    Lt,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    pub id: LoopId,
    pub var: String,
    pub lower: Expr,
    pub upper: Expr,
    pub cmp: LoopCmp,
    pub body: Vec<Stmt>,
}

impl ForLoop {
    /// Upper bound with `<=` turned into `<` by adding one.
    pub fn exclusive_upper(&self) -> Expr {
        match self.cmp {
            LoopCmp::Lt => self.upper.clone(),
            LoopCmp::Le => Expr::binary(BinOp::Add, self.upper.clone(), Expr::Int(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { lhs: LValue, rhs: Expr, origin: AssignOrigin },
    If { cond: Cond, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    For(ForLoop),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    /// Visits this statement and every nested loop, outer loops first.
    pub fn for_each_loop<'a>(&'a self, f: &mut dyn FnMut(&'a ForLoop)) {
        match &self.kind {
            StmtKind::Assign { .. } => {}
            StmtKind::If { then_body, else_body, .. } => {
                for s in then_body.iter().chain(else_body) {
                    s.for_each_loop(f);
                }
            }
            StmtKind::For(l) => {
                f(l);
                for s in &l.body {
                    s.for_each_loop(f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub params: Vec<String>,
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name() == name)
    }

    pub fn array_rank(&self, name: &str) -> Option<usize> {
        match self.decl(name)? {
            Decl::Array { extents, .. } => Some(extents.len()),
            Decl::Scalar { .. } => None,
        }
    }

    pub fn is_float_array(&self, name: &str) -> bool {
        matches!(self.decl(name), Some(Decl::Array { elem: ElemType::Float, .. }))
    }

    pub fn loops(&self) -> Vec<&ForLoop> {
        let mut out = Vec::new();
        for s in &self.body {
            s.for_each_loop(&mut |l| out.push(l));
        }
        out
    }

    pub fn find_loop(&self, id: LoopId) -> Option<&ForLoop> {
        self.loops().into_iter().find(|l| l.id == id)
    }

    /// Structural equality that ignores source positions and loop ids.
    pub fn same_shape(&self, other: &Program) -> bool {
        self.params == other.params
            && self.decls.len() == other.decls.len()
            && self.decls.iter().zip(&other.decls).all(|(a, b)| decl_shape_eq(a, b))
            && block_shape_eq(&self.body, &other.body)
    }
}

fn decl_shape_eq(a: &Decl, b: &Decl) -> bool {
    match (a, b) {
        (Decl::Scalar { name: x, .. }, Decl::Scalar { name: y, .. }) => x == y,
        (Decl::Array { name: x, elem: ex, extents: xs, .. }, Decl::Array { name: y, elem: ey, extents: ys, .. }) => {
            x == y && ex == ey && xs == ys
        }
        _ => false,
    }
}

fn block_shape_eq(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| stmt_shape_eq(x, y))
}

fn stmt_shape_eq(a: &Stmt, b: &Stmt) -> bool {
    match (&a.kind, &b.kind) {
        (StmtKind::Assign { lhs: l1, rhs: r1, .. }, StmtKind::Assign { lhs: l2, rhs: r2, .. }) => l1 == l2 && r1 == r2,
        (
            StmtKind::If { cond: c1, then_body: t1, else_body: e1 },
            StmtKind::If { cond: c2, then_body: t2, else_body: e2 },
        ) => c1 == c2 && block_shape_eq(t1, t2) && block_shape_eq(e1, e2),
        (StmtKind::For(x), StmtKind::For(y)) => {
            x.var == y.var
                && x.lower == y.lower
                && x.upper == y.upper
                && x.cmp == y.cmp
                && block_shape_eq(&x.body, &y.body)
        }
        _ => false,
    }
}

/// Names assigned anywhere in a block, including loop indices of nested loops.
pub fn written_names(stmts: &[Stmt], scalars: &mut Vec<String>, arrays: &mut Vec<String>) {
    fn push(v: &mut Vec<String>, n: &str) {
        if !v.iter().any(|x| x == n) {
            v.push(n.to_string());
        }
    }
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { lhs: LValue::Scalar(n), .. } => push(scalars, n),
            StmtKind::Assign { lhs: LValue::ArrayElem { array, .. }, .. } => push(arrays, array),
            StmtKind::If { then_body, else_body, .. } => {
                written_names(then_body, scalars, arrays);
                written_names(else_body, scalars, arrays);
            }
            StmtKind::For(l) => {
                push(scalars, &l.var);
                written_names(&l.body, scalars, arrays);
            }
        }
    }
}

impl Expr {
    fn specialize(&mut self, values: &BTreeMap<String, i64>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(n) => {
                if let Some(v) = values.get(n) {
                    *self = Expr::Int(*v);
                }
            }
            Expr::Index { subs, .. } => subs.iter_mut().for_each(|s| s.specialize(values)),
            Expr::Neg(e) => e.specialize(values),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.specialize(values);
                rhs.specialize(values);
            }
        }
    }
}

fn specialize_stmts(stmts: &mut [Stmt], values: &BTreeMap<String, i64>) {
    for s in stmts {
        match &mut s.kind {
            StmtKind::Assign { lhs, rhs, .. } => {
                if let LValue::ArrayElem { subs, .. } = lhs {
                    subs.iter_mut().for_each(|e| e.specialize(values));
                }
                rhs.specialize(values);
            }
            StmtKind::If { cond, then_body, else_body } => {
                cond.lhs.specialize(values);
                cond.rhs.specialize(values);
                specialize_stmts(then_body, values);
                specialize_stmts(else_body, values);
            }
            StmtKind::For(l) => {
                l.lower.specialize(values);
                l.upper.specialize(values);
                specialize_stmts(&mut l.body, values);
            }
        }
    }
}

impl Program {
    /// Replaces the given parameters by literals. Names that are not
    /// parameters are reported back.
    pub fn specialize(&self, values: &BTreeMap<String, i64>) -> Result<Program, String> {
        if let Some(bad) = values.keys().find(|k| !self.is_param(k)) {
            return Err(format!("`{bad}` is not a parameter"));
        }
        let mut p = self.clone();
        p.params.retain(|n| !values.contains_key(n));
        for d in &mut p.decls {
            if let Decl::Array { extents, .. } = d {
                extents.iter_mut().for_each(|e| e.specialize(values));
            }
        }
        specialize_stmts(&mut p.body, values);
        Ok(p)
    }
}
