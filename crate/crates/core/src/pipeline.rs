//! Program-order driver: loops are analyzed innermost first, collapsed, and
//! their facts made visible to the statements that follow.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::facts::{FactEntry, FactPayload, ProgramFacts, Provenance, Rule};
use crate::frontend::{written_names, Cond, Expr, ForLoop, LValue, LoopId, Program, Stmt, StmtKind};
use crate::phase1::{analyze_body, eval_expr, resolve_entry_values, BodySummary, Collapsed, Env, LoopCtx};
use crate::phase2::{aggregate, LoopSummary};
use crate::symbolic::{Assumptions, SymExpr, SymRange};

/// The two-phase listing for one loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub loop_id: LoopId,
    pub phase1: Vec<String>,
    pub phase2: Vec<String>,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Phase 1 ({}): {}", self.loop_id.0, self.phase1.join("; "))?;
        write!(f, "Phase 2 ({}): {}", self.loop_id.0, self.phase2.join("; "))
    }
}

#[derive(Debug, Clone)]
pub struct LoopAnalysis {
    pub body: BodySummary,
    pub summary: LoopSummary,
    /// Index of the enclosing top-level statement.
    pub point: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub facts: ProgramFacts,
    /// In analysis order: inner loops before the loops containing them.
    pub loops: Vec<LoopAnalysis>,
    pub trace: Vec<TraceEntry>,
    /// Scalar values on entry to each top-level statement that is a loop.
    pub entry_env: BTreeMap<LoopId, Env>,
}

impl PipelineResult {
    pub fn analysis(&self, id: LoopId) -> Option<&LoopAnalysis> {
        self.loops.iter().find(|l| l.summary.loop_id == id)
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|t| format!("{t}\n")).collect()
    }

    /// Facts holding on entry to the top-level statement containing `id`.
    pub fn facts_at(&self, id: LoopId) -> Vec<FactEntry> {
        self.analysis(id).map(|a| self.facts.visible_at(a.point)).unwrap_or_default()
    }
}

pub fn run_pipeline(program: &Program) -> PipelineResult {
    let mut p = Pipeline { program, interest: scalars_of_interest(program), loops: Vec::new(), trace: Vec::new() };
    let mut facts = ProgramFacts::default();
    let mut env = Env::new();
    for d in &program.decls {
        if program.array_rank(d.name()).is_none() {
            env.insert(d.name().to_string(), SymRange::point(SymExpr::lit(0)));
        }
    }
    let mut entry_env = BTreeMap::new();
    for (point, stmt) in program.body.iter().enumerate() {
        let visible = facts.visible_at(point);
        let top = LoopCtx {
            program,
            facts: &visible,
            entry: env.clone(),
            outer_ranges: BTreeMap::new(),
            index: String::new(),
            lower: SymExpr::Bottom,
            upper: SymExpr::Bottom,
        };
        match &stmt.kind {
            StmtKind::Assign { lhs: LValue::Scalar(x), rhs, .. } => {
                let v = eval_expr(rhs, &top, &env);
                env.insert(x.clone(), v);
            }
            StmtKind::Assign { lhs: LValue::ArrayElem { array, subs }, rhs, .. } => {
                let at = eval_expr(&subs[0], &top, &env);
                let value = if program.is_float_array(array) { SymRange::bottom() } else { eval_expr(rhs, &top, &env) };
                let written = at.as_point().map(|s| vec![SymRange::point(s.clone())]);
                kill(&mut facts, program, array, written.as_deref(), point);
                if let (Some(s), false) = (at.as_point(), value.is_bottom()) {
                    let f = FactEntry {
                        array: array.clone(),
                        subscript: SymRange::point(s.clone()),
                        payload: FactPayload::ValueRange(value),
                        provenance: Provenance {
                            loop_id: None,
                            line: stmt.span.line,
                            rule: Rule::PointAssignment,
                            composite: false,
                        },
                    };
                    facts.insert(f, point);
                }
            }
            StmtKind::If { then_body, else_body, .. } => {
                let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
                written_names(then_body, &mut scalars, &mut arrays);
                written_names(else_body, &mut scalars, &mut arrays);
                for s in scalars {
                    env.insert(s, SymRange::bottom());
                }
                for a in arrays {
                    kill(&mut facts, program, &a, None, point);
                }
            }
            StmtKind::For(l) => {
                entry_env.insert(l.id, env.clone());
                let lower = eval_expr(&l.lower, &top, &env).as_point().cloned().unwrap_or(SymExpr::Bottom);
                let upper = eval_expr(&l.exclusive_upper(), &top, &env).as_point().cloned().unwrap_or(SymExpr::Bottom);
                let ctx = LoopCtx { index: l.var.clone(), lower, upper, ..top.clone() };
                let summary = p.analyze_nest(l, &ctx, point);
                let before = env.clone();
                let lookup = |n: &str| -> SymRange {
                    if program.is_param(n) {
                        return SymRange::point(SymExpr::var(n));
                    }
                    before.get(n).cloned().unwrap_or_else(SymRange::bottom)
                };
                for (x, r) in &summary.scalars {
                    env.insert(x.clone(), resolve_entry_values(r, &lookup));
                }
                env.insert(l.var.clone(), SymRange::bottom());
                for a in &summary.arrays {
                    kill(&mut facts, program, &a.array, a.written.as_deref(), point);
                }
                for f in summary.facts() {
                    facts.insert(f.clone(), point);
                }
            }
        }
    }
    facts.scalars = env.into_iter().collect();
    PipelineResult { facts, loops: p.loops, trace: p.trace, entry_env }
}

struct Pipeline<'a> {
    program: &'a Program,
    interest: BTreeSet<String>,
    loops: Vec<LoopAnalysis>,
    trace: Vec<TraceEntry>,
}

impl Pipeline<'_> {
    fn analyze_nest(&mut self, l: &ForLoop, ctx: &LoopCtx, point: usize) -> LoopSummary {
        let body = {
            let mut hook = |inner: &ForLoop, inner_ctx: &LoopCtx| -> Collapsed {
                let s = self.analyze_nest(inner, inner_ctx, point);
                Collapsed {
                    scalars: s.scalars.clone(),
                    arrays_written: s.arrays.iter().map(|a| a.array.clone()).collect(),
                }
            };
            analyze_body(l, ctx, &mut hook)
        };
        let summary = aggregate(&body, ctx);
        self.trace.push(self.trace_entry(l, &body, &summary));
        self.loops.push(LoopAnalysis { body, summary: summary.clone(), point });
        summary
    }

    fn trace_entry(&self, l: &ForLoop, body: &BodySummary, summary: &LoopSummary) -> TraceEntry {
        let mut phase1 = Vec::new();
        let mut phase2 = Vec::new();
        for name in direct_writes(&l.body) {
            if let Some(r) = body.scalar(&name) {
                if !self.interest.contains(&name) {
                    continue;
                }
                phase1.push(format!("{name}: {}", r.render(Some(&name))));
                let agg = summary.scalar(&name).cloned().unwrap_or_else(SymRange::bottom);
                phase2.push(format!("{name}: {}", agg.render(Some(&name))));
                continue;
            }
            if self.program.array_rank(&name).is_none() {
                continue;
            }
            if body.poisoned.contains(&name) {
                phase1.push(format!("{name}: ⊥"));
            } else {
                for e in body.effects_on(&name) {
                    let sub = SymExpr::index(&body.index).add_const(e.offset.unwrap_or(0));
                    phase1.push(format!("{name}: [{sub}], {}", e.value));
                }
            }
            match summary.outcome(&name) {
                Some(o) if !o.facts.is_empty() => phase2.extend(o.facts.iter().map(|f| f.to_string())),
                _ => phase2.push(format!("{name}: ⊥")),
            }
        }
        TraceEntry { loop_id: l.id, phase1, phase2 }
    }
}

/// Removes facts about `array` that a write to `written` may invalidate
/// (`None`: the write could be anywhere).
fn kill(facts: &mut ProgramFacts, program: &Program, array: &str, written: Option<&[SymRange]>, point: usize) {
    let assm = Assumptions::with_params(&program.params);
    for s in facts.entries.iter_mut().filter(|s| s.fact.array == array && s.killed.is_none()) {
        let f = &s.fact;
        let footprint = match f.property() {
            Some(p) if p.is_monotonic() => SymRange::new(f.subscript.lo().add_const(-1), f.subscript.hi().clone()),
            _ => f.subscript.clone(),
        };
        let survives = match written {
            None => false,
            Some(ranges) => ranges.iter().all(|w| {
                !footprint.is_bottom()
                    && !w.is_bottom()
                    && (assm.compare(footprint.hi(), w.lo()).proves_lt()
                        || assm.compare(w.hi(), footprint.lo()).proves_lt())
            }),
        };
        if !survives {
            s.killed = Some(point);
        }
    }
}

/// Scalars whose value is used somewhere other than an array subscript or
/// their own update.
pub fn scalars_of_interest(program: &Program) -> BTreeSet<String> {
    fn value_reads(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Int(_) | Expr::Index { .. } => {}
            Expr::Var(n) => out.push(n.clone()),
            Expr::Neg(x) => value_reads(x, out),
            Expr::Binary { lhs, rhs, .. } => {
                value_reads(lhs, out);
                value_reads(rhs, out);
            }
        }
    }
    fn cond_reads(c: &Cond, out: &mut Vec<String>) {
        value_reads(&c.lhs, out);
        value_reads(&c.rhs, out);
    }
    fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
        for s in stmts {
            let mut reads = Vec::new();
            match &s.kind {
                StmtKind::Assign { lhs, rhs, .. } => {
                    value_reads(rhs, &mut reads);
                    if let LValue::Scalar(x) = lhs {
                        reads.retain(|r| r != x);
                    }
                }
                StmtKind::If { cond, then_body, else_body } => {
                    cond_reads(cond, &mut reads);
                    walk(then_body, out);
                    walk(else_body, out);
                }
                StmtKind::For(l) => {
                    value_reads(&l.lower, &mut reads);
                    value_reads(&l.upper, &mut reads);
                    walk(&l.body, out);
                }
            }
            out.extend(reads);
        }
    }
    let mut out = BTreeSet::new();
    walk(&program.body, &mut out);
    out
}

/// Names assigned directly in `stmts` (through conditionals, not nested
/// loops), in order of first assignment.
fn direct_writes(stmts: &[Stmt]) -> Vec<String> {
    fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign { lhs, .. } => {
                    let n = lhs.name().to_string();
                    if !out.contains(&n) {
                        out.push(n);
                    }
                }
                StmtKind::If { then_body, else_body, .. } => {
                    walk(then_body, out);
                    walk(else_body, out);
                }
                StmtKind::For(_) => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(stmts, &mut out);
    out
}
