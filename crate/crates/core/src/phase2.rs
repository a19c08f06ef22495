//! Aggregation of a one-iteration effect over the whole iteration space.

use std::collections::BTreeSet;

use crate::facts::{FactEntry, FactPayload, Property, Provenance, Rule};
use crate::frontend::LoopId;
use crate::phase1::{ArrayEffect, BodySummary, LoopCtx};
use crate::symbolic::{range_union, sign_of_range, Assumptions, Atom, Lin, SignFact, SymExpr, SymRange};

/// What a written array looks like after the loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayOutcome {
    pub array: String,
    /// Subscript ranges written, or `None` when the writes could go anywhere.
    pub written: Option<Vec<SymRange>>,
    /// Derived facts; empty means the array is ⊥ after the loop.
    pub facts: Vec<FactEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopSummary {
    pub loop_id: LoopId,
    pub index: String,
    pub trip_count: SymExpr,
    pub index_range: SymRange,
    /// Scalar values after the loop, in terms of Λ of each scalar.
    pub scalars: Vec<(String, SymRange)>,
    pub arrays: Vec<ArrayOutcome>,
    pub collapsed: bool,
}

impl LoopSummary {
    pub fn scalar(&self, name: &str) -> Option<&SymRange> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn facts(&self) -> impl Iterator<Item = &FactEntry> {
        self.arrays.iter().flat_map(|a| a.facts.iter())
    }

    pub fn outcome(&self, array: &str) -> Option<&ArrayOutcome> {
        self.arrays.iter().find(|a| a.array == array)
    }
}

pub fn aggregate(body: &BodySummary, ctx: &LoopCtx) -> LoopSummary {
    let assm = ctx.assumptions();
    let n = ctx.trip_count();
    let nonneg = assm.compare(&n, &SymExpr::lit(0)).proves_ge();
    let nonempty = assm.compare(&n, &SymExpr::lit(1)).proves_ge();
    let agg = Aggregator {
        body,
        ctx,
        assm: &assm,
        n: n.clone(),
        nonneg,
        nonempty,
        written_arrays: body.arrays.iter().map(|e| e.array.clone()).chain(body.poisoned.iter().cloned()).collect(),
    };
    let scalars = body.scalars.iter().map(|(x, r)| (x.clone(), agg.scalar(x, r))).collect();
    let mut names: Vec<&str> = Vec::new();
    for a in body.arrays.iter().map(|e| e.array.as_str()).chain(body.poisoned.iter().map(String::as_str)) {
        if !names.contains(&a) {
            names.push(a);
        }
    }
    let arrays = names.into_iter().map(|a| agg.array(a)).collect();
    LoopSummary {
        loop_id: body.loop_id,
        index: body.index.clone(),
        trip_count: n,
        index_range: ctx.index_range(),
        scalars,
        arrays,
        collapsed: true,
    }
}

struct Aggregator<'a> {
    body: &'a BodySummary,
    ctx: &'a LoopCtx<'a>,
    assm: &'a Assumptions,
    n: SymExpr,
    nonneg: bool,
    nonempty: bool,
    written_arrays: BTreeSet<String>,
}

impl Aggregator<'_> {
    fn loop_variant(&self, a: &Atom) -> bool {
        match a {
            Atom::Lambda(_) | Atom::BigLambda(_) => true,
            Atom::Elem { array, .. } => self.written_arrays.contains(array),
            _ => false,
        }
    }

    fn index_atom(&self) -> Atom {
        Atom::index(&self.ctx.index)
    }

    fn scalar(&self, x: &str, r: &SymRange) -> SymRange {
        if r.is_bottom() {
            return SymRange::bottom();
        }
        let own = Atom::lambda(x);
        let relative = |e: &SymExpr| e.lin().map(|l| l.coef(&own));
        match (relative(r.lo()), relative(r.hi())) {
            (Some(1), Some(1)) => {
                let lo = self.accumulate(x, r.lo());
                let hi = self.accumulate(x, r.hi());
                SymRange::new(lo, hi)
            }
            (Some(0), Some(0)) => self.last_iteration(x, r),
            _ => SymRange::bottom(),
        }
    }

    /// λ + k·i + c becomes Λ + k·(n·lower + n(n-1)/2) + n·c.
    fn accumulate(&self, x: &str, bound: &SymExpr) -> SymExpr {
        if !self.nonneg {
            return SymExpr::Bottom;
        }
        let Some(l) = bound.lin() else { return SymExpr::Bottom };
        let Some(rest) = l.checked_sub(&Lin::atom(Atom::lambda(x))) else { return SymExpr::Bottom };
        let i = self.index_atom();
        let k = rest.coef(&i);
        let Some(rest) = rest.checked_sub(&Lin::term(i.clone(), k)) else { return SymExpr::Bottom };
        if rest.any_atom(&|a| self.loop_variant(a) || *a == i) {
            return SymExpr::Bottom;
        }
        let Some(c) = rest.as_const() else { return SymExpr::Bottom };
        let entry = SymExpr::big_lambda(x);
        let mut out = entry.add(&self.n.scale(c));
        if k != 0 {
            let sum_of_indices = self.n.mul(&self.ctx.lower).add(&SymExpr::triangular(&self.n));
            out = out.add(&sum_of_indices.scale(k));
        }
        out
    }

    /// A value not depending on the previous iteration: the last iteration's.
    fn last_iteration(&self, x: &str, r: &SymRange) -> SymRange {
        if r.mentions(&|a| self.loop_variant(a)) {
            return SymRange::bottom();
        }
        let last = self.ctx.upper.add_const(-1);
        let v = r.map(|e| e.subst1(&self.index_atom(), &last));
        if self.nonempty {
            v
        } else {
            range_union(&v, &SymRange::point(SymExpr::big_lambda(x)), self.assm)
        }
    }

    fn array(&self, a: &str) -> ArrayOutcome {
        let effects: Vec<&ArrayEffect> = self.body.effects_on(a).collect();
        if self.body.poisoned.contains(a) {
            return ArrayOutcome { array: a.to_string(), written: None, facts: Vec::new() };
        }
        let written: Vec<SymRange> = effects.iter().map(|e| self.written_range(e)).collect();
        if written.iter().any(SymRange::is_bottom) {
            return ArrayOutcome { array: a.to_string(), written: None, facts: Vec::new() };
        }
        let mut facts = Vec::new();
        // Two offsets into one array overwrite each other across iterations.
        if let [e] = effects[..] {
            if !e.conditional && !e.value.is_bottom() {
                let sub = self.written_range(e);
                if let Some(mut f) = self.recurrence(e, &sub) {
                    facts.append(&mut f);
                } else if let Some(f) = self.identity(e, &sub).or_else(|| self.invariant_value(e, &sub)) {
                    facts.push(f);
                }
            }
        }
        ArrayOutcome { array: a.to_string(), written: Some(written), facts }
    }

    fn written_range(&self, e: &ArrayEffect) -> SymRange {
        let k = e.offset.unwrap_or(0);
        let r = self.ctx.index_range();
        SymRange::new(r.lo().add_const(k), r.hi().add_const(k))
    }

    fn fact(&self, e: &ArrayEffect, subscript: SymRange, payload: FactPayload, rule: Rule) -> FactEntry {
        FactEntry {
            array: e.array.clone(),
            subscript,
            payload,
            provenance: Provenance {
                loop_id: Some(self.body.loop_id),
                line: e.line,
                rule,
                composite: self.body.nested_collapsed > 1,
            },
        }
    }

    /// `a[i+k] = a[i+k-1] + addend` with the addend's sign decided.
    fn recurrence(&self, e: &ArrayEffect, sub: &SymRange) -> Option<Vec<FactEntry>> {
        let k = e.offset?;
        let i = self.index_atom();
        let prev_index = Lin::atom(i).checked_add(&Lin::constant(k - 1))?;
        let prev = Atom::elem(&e.array, prev_index);
        let (lo, hi) = (e.value.lo().lin()?, e.value.hi().lin()?);
        if lo.coef(&prev) != 1 || hi.coef(&prev) != 1 {
            return None;
        }
        let addend = e.value.map(|b| b.sub(&SymExpr::atom(prev.clone())));
        if addend.mentions(&|a| self.loop_variant(a)) {
            return None;
        }
        let (property, strict) = match sign_of_range(&addend, self.assm) {
            SignFact::NonNegative => (Property::MonotonicInc, false),
            SignFact::StrictlyPositive => (Property::StrictMonotonicInc, true),
            SignFact::NonPositive => (Property::MonotonicDec, false),
            SignFact::StrictlyNegative => (Property::StrictMonotonicDec, true),
            SignFact::Unknown => return None,
        };
        let mut out = vec![self.fact(e, sub.clone(), FactPayload::Property(property), Rule::Recurrence)];
        if strict {
            // The chain starts at the element just before the written range.
            let chain = SymRange::new(sub.lo().add_const(-1), sub.hi().clone());
            out.push(self.fact(e, chain, FactPayload::Property(Property::Injective), Rule::StrictImpliesInjective));
        }
        Some(out)
    }

    /// `x[i+k] = i+k`
    fn identity(&self, e: &ArrayEffect, sub: &SymRange) -> Option<FactEntry> {
        let k = e.offset?;
        let expected = SymExpr::index(&self.ctx.index).add_const(k);
        (e.value.as_point() == Some(&expected))
            .then(|| self.fact(e, sub.clone(), FactPayload::Property(Property::Identity), Rule::Identity))
    }

    /// A value independent of other iterations, with the index (if present)
    /// widened to the iteration range.
    fn invariant_value(&self, e: &ArrayEffect, sub: &SymRange) -> Option<FactEntry> {
        let i = self.index_atom();
        if e.value.mentions(&|a| self.loop_variant(a)) {
            return None;
        }
        let nested = |a: &Atom| matches!(a, Atom::Elem { .. } | Atom::Tri(_)) && a.any(&|b| *b == i);
        if e.value.mentions(&nested) {
            return None;
        }
        let v = e.value.subst_atom_range(&i, &self.ctx.index_range());
        (!v.is_bottom()).then(|| self.fact(e, sub.clone(), FactPayload::ValueRange(v), Rule::InvariantValue))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::injected;
    use crate::frontend::{parse, ForLoop, Program};
    use crate::phase1::{analyze_body, eval_expr, Collapsed, Env};
    use std::collections::BTreeMap;

    fn summarize(p: &Program, facts: &[FactEntry]) -> LoopSummary {
        let l: ForLoop = p.loops()[0].clone();
        let base = LoopCtx {
            program: p,
            facts,
            entry: Env::new(),
            outer_ranges: BTreeMap::new(),
            index: l.var.clone(),
            lower: SymExpr::lit(0),
            upper: SymExpr::lit(0),
        };
        let lower = eval_expr(&l.lower, &base, &Env::new()).lo().clone();
        let upper = eval_expr(&l.exclusive_upper(), &base, &Env::new()).lo().clone();
        let ctx = LoopCtx { lower, upper, ..base };
        let mut noop = |_: &ForLoop, _: &LoopCtx| Collapsed::default();
        let body = analyze_body(&l, &ctx, &mut noop);
        aggregate(&body, &ctx)
    }

    #[test]
    fn counter_aggregates_by_trip_count() {
        let p =
            parse("param C; int j, count; int a[C]; for (j = 0; j < C; j++) { if (a[j] != 0) { count++; } }").unwrap();
        let s = summarize(&p, &[]);
        assert_eq!(s.scalar("count").unwrap().render(Some("count")), "[Λ:Λ+C]");
    }

    #[test]
    fn index_sum_gives_triangular_number() {
        let p = parse("param n; int i, s; for (i = 0; i < n; i++) { s = s + i; }").unwrap();
        assert_eq!(summarize(&p, &[]).scalar("s").unwrap().render(Some("s")), "[Λ+n*(n-1)/2:Λ+n*(n-1)/2]");
        let p = parse("param n; int i, s; for (i = 2; i < n + 2; i++) { s = s + i; }").unwrap();
        assert_eq!(summarize(&p, &[]).scalar("s").unwrap().render(Some("s")), "[Λ+2*n+n*(n-1)/2:Λ+2*n+n*(n-1)/2]");
    }

    #[test]
    fn invariant_value_covers_iteration_range() {
        let p = parse("param R, C; int i; int rowsize[R]; for (i = 0; i < R; i++) { rowsize[i] = C - 1; }").unwrap();
        let s = summarize(&p, &[]);
        let facts: Vec<String> = s.facts().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["rowsize: [0:R-1], [C-1:C-1]"]);
    }

    #[test]
    fn recurrence_with_non_negative_addend_is_monotonic() {
        let rowsize = injected(
            "rowsize",
            SymExpr::lit(0),
            SymExpr::var("R").add_const(-1),
            FactPayload::ValueRange(SymRange::new(SymExpr::lit(0), SymExpr::var("C").add_const(-1))),
        );
        let p = parse("param R, C; int i; int rowsize[R]; int rowptr[R+1]; for (i = 1; i < R + 1; i++) { rowptr[i] = rowptr[i-1] + rowsize[i-1]; }").unwrap();
        let s = summarize(&p, &[rowsize]);
        let facts: Vec<String> = s.facts().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["rowptr: [1:R], Monotonic_inc"]);
    }

    #[test]
    fn strict_recurrence_also_yields_injectivity() {
        let p = parse("param n; int i; int b[n+1]; for (i = 0; i < n; i++) { b[i+1] = b[i] + 3; }").unwrap();
        let facts: Vec<String> = summarize(&p, &[]).facts().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["b: [1:n], StrictMonotonic_inc", "b: [0:n], Injective"]);
    }

    #[test]
    fn unknown_sign_falls_back_to_bottom() {
        let p = parse("param n; int i, d; int b[n+1]; for (i = 1; i <= n; i++) { b[i] = b[i-1] + d; }").unwrap();
        let s = summarize(&p, &[]);
        assert!(s.outcome("b").unwrap().facts.is_empty());
    }

    #[test]
    fn identity_rule() {
        let p = parse("param n; int i; int x[n]; for (i = 0; i < n; i++) { x[i] = i; }").unwrap();
        let facts: Vec<String> = summarize(&p, &[]).facts().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["x: [0:n-1], Identity"]);
    }

    #[test]
    fn conditional_write_gives_no_fact() {
        let p = parse("param n; int i; int x[n]; int c[n]; for (i = 0; i < n; i++) { if (c[i] > 0) { x[i] = 1; } }")
            .unwrap();
        let s = summarize(&p, &[]);
        assert!(s.facts().next().is_none());
        assert!(s.outcome("x").unwrap().written.is_some());
    }
}
