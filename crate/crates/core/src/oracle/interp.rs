//! Concrete interpreter. A program is lowered once per parameter binding to
//! a slot-indexed form and then executed with checked 64-bit arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{BinOp, CmpOp, Decl, ElemType, Expr, LValue, LoopId, Program, Stmt, StmtKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("parameter {0} is not bound")]
    MissingParam(String),
    #[error("parameter {name} must be positive, got {value}")]
    BadParam { name: String, value: i64 },
    #[error("extent of {0} is not a positive integer")]
    BadExtent(String),
    #[error("line {line}: index {index:?} out of bounds for {array}")]
    OutOfBounds { array: String, index: Vec<i64>, line: usize },
    #[error("line {line}: integer overflow")]
    Overflow { line: usize },
    #[error("line {line}: float value used as an integer")]
    FloatAsInt { line: usize },
    #[error("undeclared name {0}")]
    Undeclared(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ArrayData {
    Int(Vec<i64>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl Array {
    pub fn ints(&self) -> Option<&[i64]> {
        match &self.data {
            ArrayData::Int(v) => Some(v),
            ArrayData::Float(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scalars and arrays of one run, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    scalar_names: Vec<String>,
    pub scalars: Vec<i64>,
    array_names: Vec<String>,
    pub arrays: Vec<Array>,
}

impl Memory {
    pub fn scalar(&self, name: &str) -> Option<i64> {
        self.scalar_names.iter().position(|n| n == name).map(|k| self.scalars[k])
    }

    pub fn set_scalar(&mut self, name: &str, v: i64) -> bool {
        match self.scalar_names.iter().position(|n| n == name) {
            Some(k) => {
                self.scalars[k] = v;
                true
            }
            None => false,
        }
    }

    pub fn array(&self, name: &str) -> Option<&Array> {
        self.array_names.iter().position(|n| n == name).map(|k| &self.arrays[k])
    }

    pub fn array_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.array_names.iter().position(|n| n == name).map(move |k| &mut self.arrays[k])
    }

    pub fn ints(&self, name: &str) -> Option<&[i64]> {
        self.array(name)?.ints()
    }

    pub fn array_name(&self, slot: usize) -> &str {
        &self.array_names[slot]
    }

    pub fn scalar_names(&self) -> &[String] {
        &self.scalar_names
    }

    pub fn array_names(&self) -> &[String] {
        &self.array_names
    }
}

/// One array access made while a traced loop was running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Which execution of the traced loop (it may sit inside another loop).
    pub instance: usize,
    pub iteration: i64,
    pub array: usize,
    /// Row-major flat index.
    pub index: usize,
    pub write: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: BTreeMap<LoopId, Vec<Event>>,
    /// Initial index value of each execution of a traced loop.
    pub starts: BTreeMap<LoopId, Vec<i64>>,
}

#[derive(Debug, Clone)]
enum LExpr {
    Int(i64),
    Scalar(usize),
    Load { arr: usize, subs: Vec<LExpr> },
    Neg(Box<LExpr>),
    Bin(BinOp, Box<LExpr>, Box<LExpr>),
}

#[derive(Debug, Clone)]
enum LStmt {
    SetScalar { slot: usize, e: LExpr, line: usize },
    Store { arr: usize, subs: Vec<LExpr>, e: LExpr, line: usize },
    If { op: CmpOp, l: LExpr, r: LExpr, then_body: Vec<LStmt>, else_body: Vec<LStmt>, line: usize },
    For { id: LoopId, var: usize, lower: LExpr, upper: LExpr, body: Vec<LStmt>, line: usize },
}

/// Start or end of one loop iteration, with the memory at that moment.
pub struct IterationEvent<'m> {
    pub loop_id: LoopId,
    pub iteration: i64,
    pub end: bool,
    pub memory: &'m Memory,
}

/// A program bound to concrete parameter values.
#[derive(Debug, Clone)]
pub struct Machine {
    pub params: BTreeMap<String, i64>,
    scalar_names: Vec<String>,
    array_names: Vec<String>,
    dims: Vec<Vec<usize>>,
    float: Vec<bool>,
    body: Vec<LStmt>,
}

impl Machine {
    pub fn new(program: &Program, params: &BTreeMap<String, i64>) -> Result<Machine, RunError> {
        for p in &program.params {
            let v = *params.get(p).ok_or_else(|| RunError::MissingParam(p.clone()))?;
            if v < 1 {
                return Err(RunError::BadParam { name: p.clone(), value: v });
            }
        }
        let mut m = Machine {
            params: params.iter().filter(|(k, _)| program.is_param(k)).map(|(k, v)| (k.clone(), *v)).collect(),
            scalar_names: Vec::new(),
            array_names: Vec::new(),
            dims: Vec::new(),
            float: Vec::new(),
            body: Vec::new(),
        };
        for d in &program.decls {
            match d {
                Decl::Scalar { name, .. } => m.scalar_names.push(name.clone()),
                Decl::Array { name, elem, extents, .. } => {
                    let mut dims = Vec::new();
                    for e in extents {
                        let v = m.const_eval(e).ok_or_else(|| RunError::BadExtent(name.clone()))?;
                        if v < 1 {
                            return Err(RunError::BadExtent(name.clone()));
                        }
                        dims.push(v as usize);
                    }
                    dims.iter()
                        .try_fold(1usize, |a, &d| a.checked_mul(d))
                        .ok_or_else(|| RunError::BadExtent(name.clone()))?;
                    m.array_names.push(name.clone());
                    m.dims.push(dims);
                    m.float.push(*elem == ElemType::Float);
                }
            }
        }
        m.body = m.lower_block(&program.body)?;
        Ok(m)
    }

    fn const_eval(&self, e: &Expr) -> Option<i64> {
        match e {
            Expr::Int(v) => Some(*v),
            Expr::Var(n) => self.params.get(n).copied(),
            Expr::Index { .. } => None,
            Expr::Neg(x) => self.const_eval(x)?.checked_neg(),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.const_eval(lhs)?, self.const_eval(rhs)?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                }
            }
        }
    }

    /// Zero-filled memory with every declared scalar and array.
    pub fn fresh_memory(&self) -> Memory {
        Memory {
            scalar_names: self.scalar_names.clone(),
            scalars: vec![0; self.scalar_names.len()],
            array_names: self.array_names.clone(),
            arrays: self
                .dims
                .iter()
                .zip(&self.float)
                .map(|(dims, &float)| {
                    let n = dims.iter().product();
                    let data = if float { ArrayData::Float(vec![0.0; n]) } else { ArrayData::Int(vec![0; n]) };
                    Array { dims: dims.clone(), data }
                })
                .collect(),
        }
    }

    fn scalar_slot(&self, n: &str) -> Result<usize, RunError> {
        self.scalar_names.iter().position(|s| s == n).ok_or_else(|| RunError::Undeclared(n.to_string()))
    }

    fn array_slot(&self, n: &str) -> Result<usize, RunError> {
        self.array_names.iter().position(|s| s == n).ok_or_else(|| RunError::Undeclared(n.to_string()))
    }

    fn lower_expr(&self, e: &Expr) -> Result<LExpr, RunError> {
        Ok(match e {
            Expr::Int(v) => LExpr::Int(*v),
            Expr::Var(n) => match self.params.get(n) {
                Some(v) => LExpr::Int(*v),
                None => LExpr::Scalar(self.scalar_slot(n)?),
            },
            Expr::Index { array, subs } => LExpr::Load {
                arr: self.array_slot(array)?,
                subs: subs.iter().map(|s| self.lower_expr(s)).collect::<Result<_, _>>()?,
            },
            Expr::Neg(x) => LExpr::Neg(Box::new(self.lower_expr(x)?)),
            Expr::Binary { op, lhs, rhs } => {
                LExpr::Bin(*op, Box::new(self.lower_expr(lhs)?), Box::new(self.lower_expr(rhs)?))
            }
        })
    }

    fn lower_block(&self, stmts: &[Stmt]) -> Result<Vec<LStmt>, RunError> {
        stmts.iter().map(|s| self.lower_stmt(s)).collect()
    }

    fn lower_stmt(&self, s: &Stmt) -> Result<LStmt, RunError> {
        let line = s.span.line;
        Ok(match &s.kind {
            StmtKind::Assign { lhs: LValue::Scalar(x), rhs, .. } => {
                LStmt::SetScalar { slot: self.scalar_slot(x)?, e: self.lower_expr(rhs)?, line }
            }
            StmtKind::Assign { lhs: LValue::ArrayElem { array, subs }, rhs, .. } => LStmt::Store {
                arr: self.array_slot(array)?,
                subs: subs.iter().map(|e| self.lower_expr(e)).collect::<Result<_, _>>()?,
                e: self.lower_expr(rhs)?,
                line,
            },
            StmtKind::If { cond, then_body, else_body } => LStmt::If {
                op: cond.op,
                l: self.lower_expr(&cond.lhs)?,
                r: self.lower_expr(&cond.rhs)?,
                then_body: self.lower_block(then_body)?,
                else_body: self.lower_block(else_body)?,
                line,
            },
            StmtKind::For(l) => LStmt::For {
                id: l.id,
                var: self.scalar_slot(&l.var)?,
                lower: self.lower_expr(&l.lower)?,
                upper: self.lower_expr(&l.exclusive_upper())?,
                body: self.lower_block(&l.body)?,
                line,
            },
        })
    }

    pub fn run(&self, mem: &mut Memory, traced: &BTreeSet<LoopId>) -> Result<Trace, RunError> {
        self.run_with(mem, traced, &mut |_, _| {})
    }

    /// Runs the program; `at_point(k, mem)` is called on entry to top-level
    /// statement `k` and once more with `k = body.len()` at the end.
    pub fn run_with(
        &self,
        mem: &mut Memory,
        traced: &BTreeSet<LoopId>,
        at_point: &mut dyn FnMut(usize, &Memory),
    ) -> Result<Trace, RunError> {
        self.run_observed(mem, traced, at_point, &mut |_| {})
    }

    /// Like [`Machine::run_with`], also reporting the start and end of every
    /// loop iteration to `on_iteration`.
    pub fn run_observed(
        &self,
        mem: &mut Memory,
        traced: &BTreeSet<LoopId>,
        at_point: &mut dyn FnMut(usize, &Memory),
        on_iteration: &mut dyn FnMut(IterationEvent<'_>),
    ) -> Result<Trace, RunError> {
        let mut ex = Exec {
            m: self,
            mem,
            traced,
            active: Vec::new(),
            instances: BTreeMap::new(),
            trace: Trace::default(),
            observer: on_iteration,
        };
        for id in traced {
            ex.trace.events.insert(*id, Vec::new());
        }
        for (k, s) in self.body.iter().enumerate() {
            at_point(k, ex.mem);
            ex.stmt(s)?;
        }
        at_point(self.body.len(), ex.mem);
        Ok(ex.trace)
    }
}

struct Exec<'a> {
    m: &'a Machine,
    mem: &'a mut Memory,
    traced: &'a BTreeSet<LoopId>,
    /// Traced loops currently running: (id, instance, iteration).
    active: Vec<(LoopId, usize, i64)>,
    instances: BTreeMap<LoopId, usize>,
    trace: Trace,
    observer: &'a mut dyn FnMut(IterationEvent<'_>),
}

impl Exec<'_> {
    fn record(&mut self, array: usize, index: usize, write: bool) {
        for &(id, instance, iteration) in &self.active {
            if let Some(v) = self.trace.events.get_mut(&id) {
                v.push(Event { instance, iteration, array, index, write });
            }
        }
    }

    fn flat(&mut self, arr: usize, subs: &[LExpr], line: usize) -> Result<usize, RunError> {
        let dims = &self.m.dims[arr];
        let mut idx = Vec::with_capacity(subs.len());
        for s in subs {
            idx.push(self.int(s, line)?);
        }
        let mut flat = 0usize;
        let ok = idx.len() == dims.len() && idx.iter().zip(dims).all(|(&i, &d)| i >= 0 && (i as usize) < d);
        if !ok {
            return Err(RunError::OutOfBounds { array: self.m.array_names[arr].clone(), index: idx, line });
        }
        for (&i, &d) in idx.iter().zip(dims) {
            flat = flat * d + i as usize;
        }
        Ok(flat)
    }

    fn int(&mut self, e: &LExpr, line: usize) -> Result<i64, RunError> {
        let of = RunError::Overflow { line };
        Ok(match e {
            LExpr::Int(v) => *v,
            LExpr::Scalar(k) => self.mem.scalars[*k],
            LExpr::Load { arr, subs } => {
                let at = self.flat(*arr, subs, line)?;
                if !self.active.is_empty() {
                    self.record(*arr, at, false);
                }
                match &self.mem.arrays[*arr].data {
                    ArrayData::Int(v) => v[at],
                    ArrayData::Float(_) => return Err(RunError::FloatAsInt { line }),
                }
            }
            LExpr::Neg(x) => self.int(x, line)?.checked_neg().ok_or(of)?,
            LExpr::Bin(op, a, b) => {
                let (a, b) = (self.int(a, line)?, self.int(b, line)?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                }
                .ok_or(of)?
            }
        })
    }

    fn float(&mut self, e: &LExpr, line: usize) -> Result<f64, RunError> {
        Ok(match e {
            LExpr::Int(v) => *v as f64,
            LExpr::Scalar(k) => self.mem.scalars[*k] as f64,
            LExpr::Load { arr, subs } => {
                let at = self.flat(*arr, subs, line)?;
                if !self.active.is_empty() {
                    self.record(*arr, at, false);
                }
                match &self.mem.arrays[*arr].data {
                    ArrayData::Int(v) => v[at] as f64,
                    ArrayData::Float(v) => v[at],
                }
            }
            LExpr::Neg(x) => -self.float(x, line)?,
            LExpr::Bin(op, a, b) => {
                let (a, b) = (self.float(a, line)?, self.float(b, line)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                }
            }
        })
    }

    fn block(&mut self, stmts: &[LStmt]) -> Result<(), RunError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &LStmt) -> Result<(), RunError> {
        match s {
            LStmt::SetScalar { slot, e, line } => {
                let v = self.int(e, *line)?;
                self.mem.scalars[*slot] = v;
            }
            LStmt::Store { arr, subs, e, line } => {
                let at = self.flat(*arr, subs, *line)?;
                if self.m.float[*arr] {
                    let v = self.float(e, *line)?;
                    if let ArrayData::Float(d) = &mut self.mem.arrays[*arr].data {
                        d[at] = v;
                    }
                } else {
                    let v = self.int(e, *line)?;
                    if let ArrayData::Int(d) = &mut self.mem.arrays[*arr].data {
                        d[at] = v;
                    }
                }
                if !self.active.is_empty() {
                    self.record(*arr, at, true);
                }
            }
            LStmt::If { op, l, r, then_body, else_body, line } => {
                let (a, b) = (self.int(l, *line)?, self.int(r, *line)?);
                if op.eval(a, b) {
                    self.block(then_body)?;
                } else {
                    self.block(else_body)?;
                }
            }
            LStmt::For { id, var, lower, upper, body, line } => {
                let traced = self.traced.contains(id);
                if traced {
                    let n = self.instances.entry(*id).or_insert(0);
                    self.active.push((*id, *n, 0));
                    *n += 1;
                }
                self.mem.scalars[*var] = self.int(lower, *line)?;
                if traced {
                    self.trace.starts.entry(*id).or_default().push(self.mem.scalars[*var]);
                }
                loop {
                    let hi = self.int(upper, *line)?;
                    let i = self.mem.scalars[*var];
                    if i >= hi {
                        break;
                    }
                    if traced {
                        if let Some(top) = self.active.iter_mut().rev().find(|a| a.0 == *id) {
                            top.2 = i;
                        }
                    }
                    (self.observer)(IterationEvent { loop_id: *id, iteration: i, end: false, memory: self.mem });
                    self.block(body)?;
                    (self.observer)(IterationEvent { loop_id: *id, iteration: i, end: true, memory: self.mem });
                    let i = self.mem.scalars[*var];
                    self.mem.scalars[*var] = i.checked_add(1).ok_or(RunError::Overflow { line: *line })?;
                }
                if traced {
                    self.active.pop();
                }
            }
        }
        Ok(())
    }
}
