//! Extended Range Test: decides whether the iterations of a loop touch
//! disjoint array locations.
//!
//! Two proof rules are tried per written array. `MonotonicRanges` shows the
//! range written by iteration `i` lies strictly below the one written by
//! `i+1`, with the lower ends non-decreasing. `InjectiveWrite` covers
//! `a[c·b[i+k]+d]` where `b` is known to be injective.

mod access;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use access::Collector;
pub use access::{Access, AccessKind, Accesses, InnerLoop};

use crate::facts::{FactEntry, Property};
use crate::frontend::{private_scalars, Expr, ForLoop, LoopId, Program, Stmt, StmtKind};
use crate::pipeline::PipelineResult;
use crate::symbolic::{compare_traced, range_union, Assumptions, Atom, CmpResult, SymExpr, SymRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Parallel,
    Serial,
    Unknown,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Parallel => "parallel",
            Decision::Serial => "serial",
            Decision::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProofRule {
    MonotonicRanges,
    InjectiveWrite,
}

impl fmt::Display for ProofRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProofRule::MonotonicRanges => "MonotonicRanges",
            ProofRule::InjectiveWrite => "InjectiveWrite",
        })
    }
}

/// The inference the analysis would need to go further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MissingRule {
    MonotonicDifference,
    SubsetInjectivity,
    SimultaneousMonotonicInjective,
    SimultaneousInjectivity,
    DisjointInjectiveExpressions,
    NoFact,
}

impl MissingRule {
    pub fn describe(self) -> &'static str {
        match self {
            MissingRule::MonotonicDifference => "no inference rule for monotonicity of a difference of index arrays",
            MissingRule::SubsetInjectivity => "no inference rule for subset injectivity",
            MissingRule::SimultaneousMonotonicInjective => {
                "no inference rule combining monotonic loop bounds with an injective subscript"
            }
            MissingRule::SimultaneousInjectivity => "no inference rule for injectivity of composed index arrays",
            MissingRule::DisjointInjectiveExpressions => {
                "no inference rule for disjointness of distinct injective expressions"
            }
            MissingRule::NoFact => "no fact establishes the needed property of the index array",
        }
    }
}

impl fmt::Display for MissingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One query issued during a proof attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProofStep {
    pub query: String,
    /// Iteration class and index range the query was asked under.
    pub context: String,
    pub outcome: String,
    pub facts: Vec<String>,
}

/// Two iterations that provably touch the same location, one of them writing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub array: String,
    pub location: String,
    pub iterations: (String, String),
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub loop_id: LoopId,
    pub decision: Decision,
    pub rule: Option<ProofRule>,
    pub private: Vec<String>,
    /// Only the iterations after the first were proven independent.
    pub peeled: bool,
    pub reason: Option<String>,
    pub missing_rule: Option<MissingRule>,
    pub trace: Vec<ProofStep>,
    pub facts_used: Vec<String>,
    pub witness: Option<Witness>,
    pub accesses: Vec<Access>,
}

impl Verdict {
    pub fn is_parallel(&self) -> bool {
        self.decision == Decision::Parallel
    }
}

/// Classifies every loop of the program, in source order.
pub fn classify_program(program: &Program, pipeline: &PipelineResult) -> Vec<Verdict> {
    classify_with_facts(program, pipeline, &[])
}

/// Like [`classify_program`], with `extra` added to the facts visible at
/// every loop.
pub fn classify_with_facts(program: &Program, pipeline: &PipelineResult, extra: &[FactEntry]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for (point, stmt) in program.body.iter().enumerate() {
        let mut facts = pipeline.facts.visible_at(point);
        facts.extend(extra.iter().cloned());
        classify_nest(program, stmt, &facts, &BTreeSet::new(), &mut out);
    }
    out
}

fn classify_nest(
    program: &Program,
    s: &Stmt,
    facts: &[FactEntry],
    enclosing: &BTreeSet<String>,
    out: &mut Vec<Verdict>,
) {
    match &s.kind {
        StmtKind::Assign { .. } => {}
        StmtKind::If { then_body, else_body, .. } => {
            for t in then_body.iter().chain(else_body) {
                classify_nest(program, t, facts, enclosing, out);
            }
        }
        StmtKind::For(l) => {
            // Facts on arrays written by an enclosing loop may be stale here.
            let usable: Vec<FactEntry> = facts.iter().filter(|f| !enclosing.contains(&f.array)).cloned().collect();
            out.push(classify_loop(program, l, &usable));
            let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
            crate::frontend::written_names(&l.body, &mut scalars, &mut arrays);
            let mut inner = enclosing.clone();
            inner.extend(arrays);
            for t in &l.body {
                classify_nest(program, t, facts, &inner, out);
            }
        }
    }
}

pub fn classify_loop(program: &Program, l: &ForLoop, facts: &[FactEntry]) -> Verdict {
    let collector = Collector::new(program, l);
    let lower = collector.lower().clone();
    let last = collector.eval_entry(&l.exclusive_upper()).add_const(-1);
    let accesses = collector.collect(&l.body);
    let mut t = RangeTest {
        index: l.var.clone(),
        lower,
        last,
        base: Assumptions::with_params(&program.params).with_facts(facts.iter().cloned()),
        trace: Vec::new(),
        facts_used: Vec::new(),
    };
    let mut v = Verdict {
        loop_id: l.id,
        decision: Decision::Unknown,
        rule: None,
        private: private_scalars(l),
        peeled: false,
        reason: None,
        missing_rule: None,
        trace: Vec::new(),
        facts_used: Vec::new(),
        witness: None,
        accesses: accesses.list.clone(),
    };
    if let Some(x) = carried_scalar(l) {
        v.reason = Some(format!("scalar {x} carries a value across iterations"));
        return v;
    }
    if accesses.too_many_paths {
        v.reason = Some("too many control paths in the loop body".to_string());
        return v;
    }
    let written = accesses.written_arrays();
    let mut injective_used = false;
    let mut failure: Option<(String, Option<MissingRule>)> = None;
    for array in &written {
        match t.prove_array(array, &accesses, &written) {
            Ok(Proof { rule, peeled }) => {
                injective_used |= rule == ProofRule::InjectiveWrite;
                v.peeled |= peeled;
            }
            Err(e) => {
                if v.witness.is_none() {
                    v.witness = t.witness(array, &accesses);
                }
                if failure.is_none() {
                    let missing = diagnose(array, &accesses, &t.index);
                    failure = Some((e, missing));
                }
            }
        }
    }
    v.trace = std::mem::take(&mut t.trace);
    let mut used = std::mem::take(&mut t.facts_used);
    used.sort();
    used.dedup();
    v.facts_used = used;
    if v.witness.is_some() {
        v.decision = Decision::Serial;
        v.reason = failure.map(|f| f.0);
        return v;
    }
    if let Some((reason, missing)) = failure {
        v.reason = Some(match missing {
            Some(m) => format!("{reason}; {}", m.describe()),
            None => reason,
        });
        v.missing_rule = missing;
        return v;
    }
    v.decision = Decision::Parallel;
    if !written.is_empty() {
        v.rule = Some(if injective_used { ProofRule::InjectiveWrite } else { ProofRule::MonotonicRanges });
    }
    v
}

struct Proof {
    rule: ProofRule,
    peeled: bool,
}

struct RangeTest {
    index: String,
    lower: SymExpr,
    /// Last iteration value (inclusive).
    last: SymExpr,
    base: Assumptions,
    trace: Vec<ProofStep>,
    facts_used: Vec<String>,
}

/// Iteration classes: all iterations, the first, or those after it.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    All,
    First,
    Rest,
}

type Envelope = (SymExpr, SymExpr);

impl RangeTest {
    fn i(&self) -> Atom {
        Atom::index(&self.index)
    }

    fn at(&self, e: &SymExpr, v: &SymExpr) -> SymExpr {
        e.subst1(&self.i(), v)
    }

    fn next(&self, e: &SymExpr) -> SymExpr {
        self.at(e, &SymExpr::index(&self.index).add_const(1))
    }

    fn assumptions(&self, lo: &SymExpr, hi: &SymExpr) -> Assumptions {
        self.base.clone().with_index(&self.index, SymRange::new(lo.clone(), hi.clone()))
    }

    /// Index range of a class, shortened by one when `adjacent` so that `i+1`
    /// stays in range.
    fn class_range(&self, c: Class, adjacent: bool) -> (SymExpr, SymExpr) {
        let hi = if adjacent { self.last.add_const(-1) } else { self.last.clone() };
        match c {
            Class::All => (self.lower.clone(), hi),
            Class::Rest => (self.lower.add_const(1), hi),
            Class::First => (self.lower.clone(), self.lower.clone()),
        }
    }

    fn context(&self, c: Class, adjacent: bool) -> String {
        let (lo, hi) = self.class_range(c, adjacent);
        let name = match c {
            Class::All => "all iterations",
            Class::First => "first iteration",
            Class::Rest => "later iterations",
        };
        format!("{name}, {} ∈ [{lo}:{hi}]", self.index)
    }

    /// Asks `a op b` and records the step; returns whether it was proven.
    fn ask(&mut self, a: &SymExpr, op: &str, b: &SymExpr, c: Class, adjacent: bool) -> bool {
        let (lo, hi) = self.class_range(c, adjacent);
        let assm = self.assumptions(&lo, &hi);
        let (r, facts) = compare_traced(a, b, &assm);
        let ok = match op {
            "<" => r.proves_lt(),
            "<=" => r.proves_le(),
            "==" => r == CmpResult::ProvablyEQ,
            _ => false,
        };
        if ok {
            self.facts_used.extend(facts.iter().cloned());
        }
        self.trace.push(ProofStep {
            query: format!("{a} {op} {b}"),
            context: self.context(c, adjacent),
            outcome: r.to_string(),
            facts,
        });
        ok
    }

    fn prove_array(&mut self, array: &str, acc: &Accesses, written: &[String]) -> Result<Proof, String> {
        let writes = acc.of(array, AccessKind::Write);
        let reads = acc.of(array, AccessKind::Read);
        let single_subscript = writes.iter().all(|w| w.is_point() && w.subscript == writes[0].subscript);
        let mut injective_err = None;
        if single_subscript && has_top_elem(&writes[0].subscript) {
            match self.injective(array, &writes[0].subscript, &reads, written) {
                Ok(()) => return Ok(Proof { rule: ProofRule::InjectiveWrite, peeled: false }),
                Err(e) => injective_err = Some(e),
            }
        }
        match self.monotonic(array, &writes, &reads) {
            Ok(peeled) => Ok(Proof { rule: ProofRule::MonotonicRanges, peeled }),
            Err(e) => Err(injective_err.unwrap_or(e)),
        }
    }

    fn injective(&mut self, array: &str, s: &SymExpr, reads: &[&Access], written: &[String]) -> Result<(), String> {
        let i = self.i();
        let lin = s.lin().ok_or_else(|| format!("{array}: subscript is not analyzable"))?;
        let elems: Vec<(&Atom, i64)> = lin.terms().filter(|(a, _)| matches!(a, Atom::Elem { .. })).collect();
        let [(elem, _)] = elems[..] else {
            return Err(format!("{array}: subscript {s} is not a single index-array read"));
        };
        let Atom::Elem { array: b, index: g } = elem else { unreachable!() };
        let rest = SymExpr::Lin(lin.clone()).subst1(elem, &SymExpr::lit(0));
        if rest.mentions(&|a| *a == i || matches!(a, Atom::Elem { .. })) {
            return Err(format!("{array}: subscript {s} has a loop-variant part outside {b}"));
        }
        let g = SymExpr::Lin((**g).clone());
        let Some(k) = g.sub(&SymExpr::index(&self.index)).as_const() else {
            return Err(format!("{array}: {b} is not indexed by {} plus a constant", self.index));
        };
        if written.iter().any(|w| w == b) {
            return Err(format!("{array}: index array {b} is written in the loop"));
        }
        let need = SymRange::new(self.lower.add_const(k), self.last.add_const(k));
        let candidates: Vec<(FactEntry, SymRange)> = self
            .base
            .facts
            .iter()
            .filter(|f| f.array == *b)
            .filter_map(|f| {
                let r = match f.property()? {
                    Property::Injective | Property::Identity => f.subscript.clone(),
                    Property::StrictMonotonicInc | Property::StrictMonotonicDec => {
                        SymRange::new(f.subscript.lo().add_const(-1), f.subscript.hi().clone())
                    }
                    _ => return None,
                };
                Some((f.clone(), r))
            })
            .collect();
        let mut proved = false;
        for (f, r) in candidates {
            let covers = self.ask(r.lo(), "<=", need.lo(), Class::All, false)
                && self.ask(need.hi(), "<=", r.hi(), Class::All, false);
            if covers {
                self.trace.push(ProofStep {
                    query: format!("{b} injective over {need}"),
                    context: self.context(Class::All, false),
                    outcome: "proved".to_string(),
                    facts: vec![f.to_string()],
                });
                self.facts_used.push(f.to_string());
                proved = true;
                break;
            }
        }
        if !proved {
            self.trace.push(ProofStep {
                query: format!("{b} injective over {need}"),
                context: self.context(Class::All, false),
                outcome: "not proved".to_string(),
                facts: Vec::new(),
            });
            return Err(format!("{array}: no fact shows {b} injective over {need}"));
        }
        if let Some(r) = reads.iter().find(|r| r.subscript != *s) {
            return Err(format!("{array}: read {} at line {} may touch another iteration's element", r.text, r.line));
        }
        Ok(())
    }

    /// `Ok(peeled)` when the write ranges of distinct iterations are disjoint
    /// and every read stays within its own iteration's writes.
    fn monotonic(&mut self, array: &str, writes: &[&Access], reads: &[&Access]) -> Result<bool, String> {
        let split = writes.iter().chain(reads).any(|a| a.first != a.rest);
        let mut peeled = false;
        if !split {
            let env = self.envelope(array, writes, Class::All)?;
            self.adjacent(array, &env, Class::All)?;
            for r in reads {
                self.contained(array, r, &env, Class::All)?;
            }
            return Ok(false);
        }
        let first: Vec<&Access> = writes.iter().copied().filter(|w| w.first).collect();
        let rest: Vec<&Access> = writes.iter().copied().filter(|w| w.rest).collect();
        let env_first = if first.is_empty() { None } else { Some(self.envelope(array, &first, Class::First)?) };
        let env_rest = if rest.is_empty() { None } else { Some(self.envelope(array, &rest, Class::Rest)?) };
        if let Some(er) = &env_rest {
            self.adjacent(array, er, Class::Rest)?;
        }
        if let (Some((flo, fhi)), Some((rlo, _))) = (&env_first, &env_rest) {
            let (flo, fhi) = (self.at(flo, &self.lower), self.at(fhi, &self.lower));
            let second = self.at(rlo, &self.lower.add_const(1));
            let empty = self.ask(&fhi, "<", &flo, Class::First, false);
            if !empty && !self.ask(&fhi, "<", &second, Class::First, false) {
                peeled = true;
            }
        }
        for r in reads {
            for (c, env) in [(Class::First, &env_first), (Class::Rest, &env_rest)] {
                let applies = if c == Class::First { r.first } else { r.rest };
                if !applies {
                    continue;
                }
                let Some(env) = env else {
                    return Err(format!(
                        "{array}: read {} at line {} is not covered by writes of the same iteration",
                        r.text, r.line
                    ));
                };
                self.contained(array, r, env, c)?;
            }
        }
        Ok(peeled)
    }

    fn envelope(&mut self, array: &str, writes: &[&Access], c: Class) -> Result<Envelope, String> {
        let (lo, hi) = self.class_range(c, false);
        let assm = self.assumptions(&lo, &hi);
        let mut acc: Option<SymRange> = None;
        for w in writes {
            let (a, b) = w.range();
            let r = SymRange::new(a, b);
            acc = Some(match acc {
                None => r,
                Some(prev) => range_union(&prev, &r, &assm),
            });
        }
        let env = acc.unwrap_or_else(SymRange::bottom);
        if env.is_bottom() {
            return Err(format!("{array}: the range written by one iteration is not expressible"));
        }
        Ok((env.lo().clone(), env.hi().clone()))
    }

    fn adjacent(&mut self, array: &str, env: &Envelope, c: Class) -> Result<(), String> {
        let (lo, hi) = env;
        let next_lo = self.next(lo);
        if !self.ask(hi, "<", &next_lo, c, true) {
            return Err(format!(
                "{array}: cannot prove the writes of iteration {} end before those of the next",
                self.index
            ));
        }
        if !self.ask(lo, "<=", &next_lo, c, true) {
            return Err(format!("{array}: cannot prove the written ranges advance monotonically"));
        }
        Ok(())
    }

    fn contained(&mut self, array: &str, r: &Access, env: &Envelope, c: Class) -> Result<(), String> {
        let (rlo, rhi) = r.range();
        let ok = !rlo.is_bottom()
            && !rhi.is_bottom()
            && self.ask(&env.0, "<=", &rlo, c, false)
            && self.ask(&rhi, "<=", &env.1, c, false);
        if ok {
            Ok(())
        } else {
            Err(format!("{array}: read {} at line {} may touch another iteration's writes", r.text, r.line))
        }
    }

    /// A dependence between iterations `lower` and `lower+1` that certainly
    /// happens: both touch the same element and at least one writes it.
    fn witness(&mut self, array: &str, acc: &Accesses) -> Option<Witness> {
        let sure = |a: &&Access| a.unguarded() && a.inner.is_empty() && a.first && a.rest && !a.subscript.is_bottom();
        let writes: Vec<&Access> = acc.of(array, AccessKind::Write).into_iter().filter(sure).collect();
        let others: Vec<&Access> = acc.list.iter().filter(|a| a.array == array).filter(sure).collect();
        let (lo, hi) = self.class_range(Class::All, true);
        let assm = self.assumptions(&lo, &hi);
        let two = compare_traced(&self.last, &self.lower.add_const(1), &assm).0.proves_ge();
        if !two {
            return None;
        }
        for w in &writes {
            for o in &others {
                // w at i and o at i+1, or o at i and w at i+1.
                for (early, late) in [(&w.subscript, &o.subscript), (&o.subscript, &w.subscript)] {
                    let (r, facts) = compare_traced(early, &self.next(late), &assm);
                    if r == CmpResult::ProvablyEQ {
                        self.facts_used.extend(facts);
                        let loc = self.at(early, &self.lower);
                        return Some(Witness {
                            array: array.to_string(),
                            location: format!("{array}[{loc}]"),
                            iterations: (self.lower.to_string(), self.lower.add_const(1).to_string()),
                        });
                    }
                }
            }
        }
        None
    }
}

fn has_top_elem(s: &SymExpr) -> bool {
    s.lin().is_some_and(|l| l.terms().any(|(a, _)| matches!(a, Atom::Elem { .. })))
}

fn top_elem_arrays(s: &SymExpr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if let Some(l) = s.lin() {
        for (a, _) in l.terms() {
            if let Atom::Elem { array, .. } = a {
                out.insert(array.clone());
            }
        }
    }
    out
}

/// Names the inference that would have been needed for `array`.
fn diagnose(array: &str, acc: &Accesses, index: &str) -> Option<MissingRule> {
    let writes = acc.of(array, AccessKind::Write);
    let nested = |s: &SymExpr| {
        s.lin().is_some_and(|l| {
            l.terms().any(|(a, _)| match a {
                Atom::Elem { index, .. } => index.any_atom(&|x| matches!(x, Atom::Elem { .. })),
                _ => false,
            })
        })
    };
    if writes.iter().any(|w| nested(&w.subscript)) {
        return Some(MissingRule::SimultaneousInjectivity);
    }
    let inner_indexed = |w: &Access| {
        w.inner.iter().any(|l| {
            w.subscript.lin().is_some_and(|s| {
                s.terms().any(
                    |(a, _)| matches!(a, Atom::Elem { index, .. } if index.any_atom(&|x| *x == Atom::index(&l.var))),
                )
            })
        })
    };
    if writes.iter().any(|w| inner_indexed(w)) {
        return Some(MissingRule::SimultaneousMonotonicInjective);
    }
    if writes.iter().any(|w| top_elem_arrays(&w.subscript).iter().any(|b| w.guard_arrays.contains(b))) {
        return Some(MissingRule::SubsetInjectivity);
    }
    let mut subs: Vec<&SymExpr> = Vec::new();
    for w in &writes {
        if !subs.contains(&&w.subscript) {
            subs.push(&w.subscript);
        }
    }
    if subs.len() >= 2 && subs.iter().all(|s| has_top_elem(s)) {
        return Some(MissingRule::DisjointInjectiveExpressions);
    }
    let bound_arrays = writes.iter().any(|w| {
        let (lo, hi) = w.range();
        top_elem_arrays(&lo).len() >= 2 || top_elem_arrays(&hi).len() >= 2
    });
    if bound_arrays {
        return Some(MissingRule::MonotonicDifference);
    }
    let i = Atom::index(index);
    if writes.iter().any(|w| has_top_elem(&w.subscript) && w.subscript.mentions(&|a| *a == i)) {
        return Some(MissingRule::NoFact);
    }
    None
}

/// A scalar written in the loop that some path reads before assigning it.
fn carried_scalar(l: &ForLoop) -> Option<String> {
    let written: BTreeSet<String> = private_scalars(l).into_iter().collect();
    let mut defined = BTreeSet::new();
    defined.insert(l.var.clone());
    first_undefined_read(&l.body, &mut defined, &written)
}

fn undefined_in(e: &Expr, defined: &BTreeSet<String>, written: &BTreeSet<String>) -> Option<String> {
    let mut hit = None;
    e.visit_names(&mut |n, is_array| {
        if hit.is_none() && !is_array && written.contains(n) && !defined.contains(n) {
            hit = Some(n.to_string());
        }
    });
    hit
}

fn first_undefined_read(stmts: &[Stmt], defined: &mut BTreeSet<String>, written: &BTreeSet<String>) -> Option<String> {
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { lhs, rhs, .. } => {
                if let crate::frontend::LValue::ArrayElem { subs, .. } = lhs {
                    for e in subs {
                        if let Some(x) = undefined_in(e, defined, written) {
                            return Some(x);
                        }
                    }
                }
                if let Some(x) = undefined_in(rhs, defined, written) {
                    return Some(x);
                }
                if let crate::frontend::LValue::Scalar(x) = lhs {
                    defined.insert(x.clone());
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                for e in [&cond.lhs, &cond.rhs] {
                    if let Some(x) = undefined_in(e, defined, written) {
                        return Some(x);
                    }
                }
                let mut a = defined.clone();
                let mut b = defined.clone();
                if let Some(x) = first_undefined_read(then_body, &mut a, written) {
                    return Some(x);
                }
                if let Some(x) = first_undefined_read(else_body, &mut b, written) {
                    return Some(x);
                }
                *defined = a.intersection(&b).cloned().collect();
            }
            StmtKind::For(inner) => {
                for e in [&inner.lower, &inner.upper] {
                    if let Some(x) = undefined_in(e, defined, written) {
                        return Some(x);
                    }
                }
                let mut d = defined.clone();
                d.insert(inner.var.clone());
                if let Some(x) = first_undefined_read(&inner.body, &mut d, written) {
                    return Some(x);
                }
                defined.insert(inner.var.clone());
            }
        }
    }
    None
}
