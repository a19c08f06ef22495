//! Effect of one loop iteration.
//!
//! The body is interpreted once with every scalar it writes starting at λ.
//! Nested loops are analyzed first (through a callback) and their aggregated
//! effect is applied in place, so the body seen here is straight-line code
//! with conditionals.

use std::collections::{BTreeMap, BTreeSet};

use crate::facts::{FactEntry, FactPayload, Property};
use crate::frontend::{
    classify_subscript, written_names, BinOp, Expr, ForLoop, LValue, LoopId, Program, Stmt, StmtKind, SubscriptClass,
};
use crate::symbolic::{range_contains, range_union, Assumptions, Atom, SymExpr, SymRange};

/// Scalar name to value range.
pub type Env = BTreeMap<String, SymRange>;

/// Everything Phase 1 and Phase 2 need to know about the loop's surroundings.
#[derive(Debug, Clone)]
pub struct LoopCtx<'a> {
    pub program: &'a Program,
    pub facts: &'a [FactEntry],
    /// Scalar values on loop entry, in the enclosing context.
    pub entry: Env,
    /// Inclusive ranges of the enclosing loop indices.
    pub outer_ranges: BTreeMap<String, SymRange>,
    pub index: String,
    pub lower: SymExpr,
    /// Exclusive upper bound.
    pub upper: SymExpr,
}

impl LoopCtx<'_> {
    /// `n = upper - lower`
    pub fn trip_count(&self) -> SymExpr {
        self.upper.sub(&self.lower)
    }

    /// `[lower : upper-1]`
    pub fn index_range(&self) -> SymRange {
        SymRange::new(self.lower.clone(), self.upper.add_const(-1))
    }

    pub fn assumptions(&self) -> Assumptions {
        let mut a = Assumptions::with_params(&self.program.params);
        a.index_ranges = self.outer_ranges.clone();
        let r = self.index_range();
        if !r.is_bottom() {
            a.index_ranges.insert(self.index.clone(), r);
        }
        a.facts = self.facts.to_vec();
        a
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayEffect {
    pub array: String,
    /// `Some(k)` for a write through `i+k`.
    pub offset: Option<i64>,
    pub value: SymRange,
    /// The write does not happen on every path through the body.
    pub conditional: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodySummary {
    pub loop_id: LoopId,
    pub index: String,
    /// Every scalar written in the body (nested loop indices included), in
    /// order of first write, with its value at body exit.
    pub scalars: Vec<(String, SymRange)>,
    /// Writes through simple subscripts, in program order.
    pub arrays: Vec<ArrayEffect>,
    /// Arrays written through a non-simple subscript or inside a nested loop.
    pub poisoned: BTreeSet<String>,
    pub reads: BTreeSet<String>,
    /// Number of nested loops whose effects were applied in the body.
    pub nested_collapsed: usize,
}

impl BodySummary {
    pub fn scalar(&self, name: &str) -> Option<&SymRange> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn effects_on<'a>(&'a self, array: &'a str) -> impl Iterator<Item = &'a ArrayEffect> {
        self.arrays.iter().filter(move |e| e.array == array)
    }
}

/// The aggregated effect of a nested loop, as applied by the enclosing body.
#[derive(Debug, Clone, Default)]
pub struct Collapsed {
    /// Scalar effects in terms of Λ of each scalar.
    pub scalars: Vec<(String, SymRange)>,
    pub arrays_written: Vec<String>,
}

pub type InnerLoopHook<'h> = dyn FnMut(&ForLoop, &LoopCtx) -> Collapsed + 'h;

pub fn analyze_body(l: &ForLoop, ctx: &LoopCtx, inner: &mut InnerLoopHook) -> BodySummary {
    let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
    written_names(&l.body, &mut scalars, &mut arrays);
    let mut state = Env::new();
    for s in &scalars {
        state.insert(s.clone(), SymRange::point(SymExpr::lambda(s)));
    }
    state.insert(ctx.index.clone(), SymRange::point(SymExpr::index(&ctx.index)));
    let mut w = Walker {
        ctx,
        assm: ctx.assumptions(),
        written_arrays: arrays.iter().cloned().collect(),
        state,
        effects: Vec::new(),
        poisoned: BTreeSet::new(),
        reads: BTreeSet::new(),
        nested_collapsed: 0,
        inner,
    };
    w.block(&l.body);
    let scalars = scalars
        .into_iter()
        .filter(|s| *s != ctx.index)
        .map(|s| {
            let v = w.state.get(&s).cloned().unwrap_or_else(SymRange::bottom);
            (s, v)
        })
        .collect();
    BodySummary {
        loop_id: l.id,
        index: ctx.index.clone(),
        scalars,
        arrays: w.effects,
        poisoned: w.poisoned,
        reads: w.reads,
        nested_collapsed: w.nested_collapsed,
    }
}

/// May-range of `e` in the loop's entry context (no λ involved).
pub fn eval_expr(e: &Expr, ctx: &LoopCtx, state: &Env) -> SymRange {
    let mut noop = |_: &ForLoop, _: &LoopCtx| Collapsed::default();
    let mut w = Walker {
        ctx,
        assm: ctx.assumptions(),
        written_arrays: BTreeSet::new(),
        state: state.clone(),
        effects: Vec::new(),
        poisoned: BTreeSet::new(),
        reads: BTreeSet::new(),
        nested_collapsed: 0,
        inner: &mut noop,
    };
    w.eval(e)
}

/// Replaces every Λ atom in `r` by the current value of its scalar.
pub fn resolve_entry_values(r: &SymRange, lookup: &dyn Fn(&str) -> SymRange) -> SymRange {
    let mut names = BTreeSet::new();
    for b in [r.lo(), r.hi()] {
        if let Some(l) = b.lin() {
            for (a, _) in l.terms() {
                if let Atom::BigLambda(n) = a {
                    names.insert(n.clone());
                }
            }
        }
    }
    let mut out = r.clone();
    for n in names {
        out = out.subst_atom_range(&Atom::big_lambda(&n), &lookup(&n));
    }
    out
}

struct Walker<'c, 'h> {
    ctx: &'c LoopCtx<'c>,
    assm: Assumptions,
    written_arrays: BTreeSet<String>,
    state: Env,
    effects: Vec<ArrayEffect>,
    poisoned: BTreeSet<String>,
    reads: BTreeSet<String>,
    nested_collapsed: usize,
    inner: &'h mut InnerLoopHook<'h>,
}

impl Walker<'_, '_> {
    fn lookup(&self, name: &str) -> SymRange {
        if self.ctx.program.is_param(name) {
            return SymRange::point(SymExpr::var(name));
        }
        self.state.get(name).or_else(|| self.ctx.entry.get(name)).cloned().unwrap_or_else(SymRange::bottom)
    }

    fn block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Assign { lhs: LValue::Scalar(x), rhs, .. } => {
                let v = self.eval(rhs);
                self.state.insert(x.clone(), v);
            }
            StmtKind::Assign { lhs: LValue::ArrayElem { array, subs }, rhs, .. } => {
                for sub in subs {
                    self.eval(sub);
                }
                let value = if self.ctx.program.is_float_array(array) { SymRange::bottom() } else { self.eval(rhs) };
                match classify_subscript(&subs[0], &self.ctx.index) {
                    SubscriptClass::SimpleOffset(k) => {
                        let e = ArrayEffect {
                            array: array.clone(),
                            offset: Some(k),
                            value,
                            conditional: false,
                            line: s.span.line,
                        };
                        match self.effects.iter_mut().find(|x| x.array == *array && x.offset == Some(k)) {
                            Some(old) => *old = e,
                            None => self.effects.push(e),
                        }
                    }
                    SubscriptClass::NonSimple => {
                        self.poisoned.insert(array.clone());
                    }
                }
            }
            StmtKind::If { then_body, else_body, .. } => {
                let (pre_state, pre_effects) = (self.state.clone(), self.effects.clone());
                self.block(then_body);
                let (then_state, then_effects) = (
                    std::mem::replace(&mut self.state, pre_state.clone()),
                    std::mem::replace(&mut self.effects, pre_effects),
                );
                self.block(else_body);
                self.merge(then_state, then_effects);
            }
            StmtKind::For(l) => self.nested_loop(l),
        }
    }

    fn merge(&mut self, then_state: Env, then_effects: Vec<ArrayEffect>) {
        let keys: BTreeSet<String> = then_state.keys().chain(self.state.keys()).cloned().collect();
        let mut merged = Env::new();
        for k in keys {
            let a = then_state.get(&k).cloned().unwrap_or_else(|| self.lookup(&k));
            let b = self.state.get(&k).cloned().unwrap_or_else(|| self.lookup(&k));
            merged.insert(k, range_union(&a, &b, &self.assm));
        }
        self.state = merged;
        let else_effects = std::mem::take(&mut self.effects);
        let mut out: Vec<ArrayEffect> = Vec::new();
        for e in then_effects.iter().chain(&else_effects) {
            if out.iter().any(|x| x.array == e.array && x.offset == e.offset) {
                continue;
            }
            let t = then_effects.iter().find(|x| x.array == e.array && x.offset == e.offset);
            let f = else_effects.iter().find(|x| x.array == e.array && x.offset == e.offset);
            let m = match (t, f) {
                (Some(t), Some(f)) => ArrayEffect {
                    value: range_union(&t.value, &f.value, &self.assm),
                    conditional: t.conditional || f.conditional,
                    line: t.line.min(f.line),
                    ..t.clone()
                },
                (Some(only), None) | (None, Some(only)) => ArrayEffect { conditional: true, ..only.clone() },
                (None, None) => unreachable!(),
            };
            out.push(m);
        }
        self.effects = out;
    }

    fn nested_loop(&mut self, l: &ForLoop) {
        let lower = self.eval(&l.lower).as_point().cloned().unwrap_or(SymExpr::Bottom);
        let upper = self.eval(&l.exclusive_upper()).as_point().cloned().unwrap_or(SymExpr::Bottom);
        let mut entry = self.ctx.entry.clone();
        entry.extend(self.state.clone());
        let mut outer_ranges = self.ctx.outer_ranges.clone();
        let own = self.ctx.index_range();
        if !own.is_bottom() {
            outer_ranges.insert(self.ctx.index.clone(), own);
        }
        let inner_ctx = LoopCtx {
            program: self.ctx.program,
            facts: self.ctx.facts,
            entry,
            outer_ranges,
            index: l.var.clone(),
            lower,
            upper,
        };
        let collapsed = (self.inner)(l, &inner_ctx);
        self.nested_collapsed += 1;
        let before = self.state.clone();
        let lookup = |n: &str| -> SymRange {
            if self.ctx.program.is_param(n) {
                return SymRange::point(SymExpr::var(n));
            }
            before.get(n).or_else(|| self.ctx.entry.get(n)).cloned().unwrap_or_else(SymRange::bottom)
        };
        let updates: Vec<(String, SymRange)> =
            collapsed.scalars.iter().map(|(x, r)| (x.clone(), resolve_entry_values(r, &lookup))).collect();
        for (x, r) in updates {
            self.state.insert(x, r);
        }
        self.state.insert(l.var.clone(), SymRange::bottom());
        self.poisoned.extend(collapsed.arrays_written);
    }

    fn eval(&mut self, e: &Expr) -> SymRange {
        match e {
            Expr::Int(v) => SymRange::point(SymExpr::lit(*v)),
            Expr::Var(n) => self.lookup(n),
            Expr::Index { array, subs } => {
                self.reads.insert(array.clone());
                let idx: Vec<SymRange> = subs.iter().map(|s| self.eval(s)).collect();
                if idx.len() != 1 || self.ctx.program.is_float_array(array) {
                    return SymRange::bottom();
                }
                match idx[0].as_point() {
                    Some(s) => self.read_element(array, &subs[0], s.clone()),
                    None => SymRange::bottom(),
                }
            }
            Expr::Neg(inner) => self.eval(inner).scale(-1),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.eval(lhs), self.eval(rhs));
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                }
            }
        }
    }

    fn read_element(&mut self, array: &str, sub: &Expr, s: SymExpr) -> SymRange {
        if self.written_arrays.contains(array) {
            if self.poisoned.contains(array) {
                return SymRange::bottom();
            }
            // A value written earlier in this iteration at the same offset.
            if let SubscriptClass::SimpleOffset(k) = classify_subscript(sub, &self.ctx.index) {
                if let Some(e) = self.effects.iter().find(|e| e.array == array && e.offset == Some(k) && !e.conditional)
                {
                    return e.value.clone();
                }
                if self.effects.iter().any(|e| e.array == array && e.offset == Some(k)) {
                    return SymRange::bottom();
                }
            }
            return SymRange::point(SymExpr::elem(array, s));
        }
        let at = SymRange::point(s.clone());
        for f in self.ctx.facts.iter().filter(|f| f.array == array) {
            let value = match &f.payload {
                FactPayload::ValueRange(r) => r.clone(),
                FactPayload::Property(Property::Identity) => at.clone(),
                FactPayload::Property(_) => continue,
            };
            if range_contains(&f.subscript, &at, &self.assm) {
                return value;
            }
        }
        SymRange::bottom()
    }
}
