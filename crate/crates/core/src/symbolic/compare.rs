//! Conservative ordering of symbolic expressions.
//!
//! `compare(a, b)` bounds `a - b` from above and below by repeatedly
//! replacing atoms with their known bounds: loop indices by their iteration
//! ranges, array elements by value-range facts, parameters by 1. Before that,
//! pairs `c·y[s] - c·y[t]` are eliminated with a monotonicity fact on `y`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::expr::{Atom, Lin, SymExpr};
use super::range::SymRange;
use crate::facts::{FactEntry, FactPayload, Property};

const MAX_DEPTH: usize = 10;
const BUDGET: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpResult {
    ProvablyEQ,
    ProvablyLT,
    ProvablyLE,
    ProvablyGT,
    ProvablyGE,
    Unknown,
}

impl CmpResult {
    pub fn proves_le(self) -> bool {
        matches!(self, CmpResult::ProvablyEQ | CmpResult::ProvablyLT | CmpResult::ProvablyLE)
    }

    pub fn proves_lt(self) -> bool {
        self == CmpResult::ProvablyLT
    }

    pub fn proves_ge(self) -> bool {
        matches!(self, CmpResult::ProvablyEQ | CmpResult::ProvablyGT | CmpResult::ProvablyGE)
    }

    pub fn proves_gt(self) -> bool {
        self == CmpResult::ProvablyGT
    }
}

impl fmt::Display for CmpResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpResult::ProvablyEQ => "ProvablyEQ",
            CmpResult::ProvablyLT => "ProvablyLT",
            CmpResult::ProvablyLE => "ProvablyLE",
            CmpResult::ProvablyGT => "ProvablyGT",
            CmpResult::ProvablyGE => "ProvablyGE",
            CmpResult::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignFact {
    NonNegative,
    NonPositive,
    StrictlyPositive,
    StrictlyNegative,
    Unknown,
}

/// What the comparison may assume.
#[derive(Debug, Clone, Default)]
pub struct Assumptions {
    /// Names known to be integers `>= 1`.
    pub params: BTreeSet<String>,
    /// Inclusive iteration range of each loop index in scope.
    pub index_ranges: BTreeMap<String, SymRange>,
    /// Extra may-ranges for arbitrary atoms (λ of a scalar, for instance).
    pub atom_ranges: BTreeMap<Atom, SymRange>,
    pub facts: Vec<FactEntry>,
}

impl Assumptions {
    pub fn with_params<'a>(params: impl IntoIterator<Item = &'a String>) -> Assumptions {
        Assumptions { params: params.into_iter().cloned().collect(), ..Default::default() }
    }

    pub fn with_index(mut self, name: &str, range: SymRange) -> Assumptions {
        self.index_ranges.insert(name.to_string(), range);
        self
    }

    pub fn with_facts(mut self, facts: impl IntoIterator<Item = FactEntry>) -> Assumptions {
        self.facts.extend(facts);
        self
    }

    pub fn compare(&self, a: &SymExpr, b: &SymExpr) -> CmpResult {
        compare(a, b, self)
    }
}

pub fn compare(a: &SymExpr, b: &SymExpr, assm: &Assumptions) -> CmpResult {
    compare_traced(a, b, assm).0
}

/// Like [`compare`], also returning the facts the proof relied on.
pub fn compare_traced(a: &SymExpr, b: &SymExpr, assm: &Assumptions) -> (CmpResult, Vec<String>) {
    let d = a.sub(b);
    let Some(d) = d.lin() else { return (CmpResult::Unknown, Vec::new()) };
    let mut cx = Ctx::new(assm);
    let ub = cx.bound(d, Dir::Upper, 0);
    let lb = cx.bound(d, Dir::Lower, 0);
    let r = match (lb, ub) {
        (Some(0), Some(0)) => CmpResult::ProvablyEQ,
        (_, Some(u)) if u < 0 => CmpResult::ProvablyLT,
        (_, Some(0)) => CmpResult::ProvablyLE,
        (Some(l), _) if l > 0 => CmpResult::ProvablyGT,
        (Some(0), _) => CmpResult::ProvablyGE,
        _ => CmpResult::Unknown,
    };
    if r == CmpResult::Unknown {
        cx.used.clear();
    }
    cx.used.dedup();
    (r, cx.used)
}

pub fn sign_of(e: &SymExpr, assm: &Assumptions) -> SignFact {
    let Some(l) = e.lin() else { return SignFact::Unknown };
    let mut cx = Ctx::new(assm);
    let lb = cx.bound(l, Dir::Lower, 0);
    let ub = cx.bound(l, Dir::Upper, 0);
    classify_sign(lb, ub)
}

/// Sign shared by every value in the range.
pub fn sign_of_range(r: &SymRange, assm: &Assumptions) -> SignFact {
    let (Some(lo), Some(hi)) = (r.lo().lin(), r.hi().lin()) else { return SignFact::Unknown };
    let mut cx = Ctx::new(assm);
    let lb = cx.bound(lo, Dir::Lower, 0);
    let ub = cx.bound(hi, Dir::Upper, 0);
    classify_sign(lb, ub)
}

fn classify_sign(lb: Option<i64>, ub: Option<i64>) -> SignFact {
    match (lb, ub) {
        (Some(l), _) if l > 0 => SignFact::StrictlyPositive,
        (_, Some(u)) if u < 0 => SignFact::StrictlyNegative,
        (Some(l), _) if l >= 0 => SignFact::NonNegative,
        (_, Some(u)) if u <= 0 => SignFact::NonPositive,
        _ => SignFact::Unknown,
    }
}

/// Smallest range containing both, or ⊥ when the ordering of the bounds
/// cannot be decided.
pub fn range_union(a: &SymRange, b: &SymRange, assm: &Assumptions) -> SymRange {
    if a.is_bottom() || b.is_bottom() {
        return SymRange::bottom();
    }
    if a == b {
        return a.clone();
    }
    let lo = match compare(a.lo(), b.lo(), assm) {
        c if c.proves_le() => a.lo().clone(),
        c if c.proves_ge() => b.lo().clone(),
        _ => return SymRange::bottom(),
    };
    let hi = match compare(a.hi(), b.hi(), assm) {
        c if c.proves_ge() => a.hi().clone(),
        c if c.proves_le() => b.hi().clone(),
        _ => return SymRange::bottom(),
    };
    SymRange::new(lo, hi)
}

/// True when `inner ⊆ outer` is provable.
pub fn range_contains(outer: &SymRange, inner: &SymRange, assm: &Assumptions) -> bool {
    !outer.is_bottom()
        && !inner.is_bottom()
        && compare(outer.lo(), inner.lo(), assm).proves_le()
        && compare(inner.hi(), outer.hi(), assm).proves_le()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Upper,
    Lower,
}

struct Ctx<'a> {
    assm: &'a Assumptions,
    used: Vec<String>,
    budget: usize,
}

impl<'a> Ctx<'a> {
    fn new(assm: &'a Assumptions) -> Self {
        Ctx { assm, used: Vec::new(), budget: BUDGET }
    }

    /// A literal bound on `l` in direction `dir`, if one can be derived.
    /// Every way of applying the facts is tried and the tightest result kept.
    fn bound(&mut self, l: &Lin, dir: Dir, depth: usize) -> Option<i64> {
        if let Some(c) = l.as_const() {
            return Some(c);
        }
        if depth > MAX_DEPTH || self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let mut options = self.monotone_pair_options(l, dir, depth);
        options.extend(self.substitution_options(l, dir, depth));
        let mut best: Option<(i64, Vec<String>)> = None;
        for (next, mut why) in options {
            let mark = self.used.len();
            let r = self.bound(&next, dir, depth + 1);
            why.extend(self.used.split_off(mark));
            let Some(v) = r else { continue };
            let better = match &best {
                None => true,
                Some((b, _)) => match dir {
                    Dir::Upper => v < *b,
                    Dir::Lower => v > *b,
                },
            };
            if better {
                best = Some((v, why));
            }
        }
        let (v, why) = best?;
        self.used.extend(why);
        Some(v)
    }

    /// Rewrites of `l` that replace atoms by bounds. Loop indices go first:
    /// their bounds are symbolic and may cancel other terms, which replacing
    /// parameters by 1 would prevent.
    fn substitution_options(&mut self, l: &Lin, dir: Dir, depth: usize) -> Vec<(Lin, Vec<String>)> {
        for class in [AtomClass::Index, AtomClass::Elem, AtomClass::Other, AtomClass::Param] {
            let atoms: Vec<(Atom, i64)> =
                l.terms().filter(|(a, _)| class_of(a, self.assm) == class).map(|(a, c)| (a.clone(), c)).collect();
            if class == AtomClass::Elem {
                for (a, c) in &atoms {
                    let want_upper = (dir == Dir::Upper) == (*c > 0);
                    let Atom::Elem { array, index } = a else { continue };
                    let opts: Vec<(Lin, Vec<String>)> = self
                        .element_bounds(array, index, want_upper, depth)
                        .into_iter()
                        .filter_map(|(by, why)| Some((replace_term(l, a, &by)?, why)))
                        .collect();
                    if !opts.is_empty() {
                        return opts;
                    }
                }
                continue;
            }
            let mut next = l.clone();
            let mut progressed = false;
            for (a, c) in atoms {
                // c·a is bounded above by c·hi(a) when c > 0, by c·lo(a) when c < 0.
                let want_upper = (dir == Dir::Upper) == (c > 0);
                if let Some(by) = self.atom_bound(&a, want_upper) {
                    match replace_term(&next, &a, &by) {
                        Some(n) => next = n,
                        None => return Vec::new(),
                    }
                    progressed = true;
                }
            }
            if progressed {
                return vec![(next, Vec::new())];
            }
        }
        Vec::new()
    }

    fn atom_bound(&self, a: &Atom, upper: bool) -> Option<Lin> {
        if let Some(r) = self.assm.atom_ranges.get(a) {
            let e = if upper { r.hi() } else { r.lo() };
            if let Some(l) = e.lin() {
                return Some(l.clone());
            }
        }
        match a {
            Atom::LoopIndex(n) => {
                let r = self.assm.index_ranges.get(n)?;
                let e = if upper { r.hi() } else { r.lo() };
                e.lin().cloned()
            }
            Atom::Var(n) if self.assm.params.contains(n) && !upper => Some(Lin::constant(1)),
            Atom::Tri(_) if !upper => Some(Lin::constant(0)),
            _ => None,
        }
    }

    fn element_bounds(&mut self, array: &str, index: &Lin, upper: bool, depth: usize) -> Vec<(Lin, Vec<String>)> {
        let idx = SymExpr::Lin(index.clone());
        let atom = Atom::Elem { array: array.to_string(), index: Box::new(index.clone()) };
        let mut out = Vec::new();
        if let Some(by) = self.atom_bound(&atom, upper) {
            out.push((by, Vec::new()));
        }
        for f in &self.assm.facts {
            if f.array != array {
                continue;
            }
            let exact = match &f.payload {
                FactPayload::ValueRange(r) => {
                    if r.is_bottom() {
                        continue;
                    }
                    if upper {
                        r.hi().clone()
                    } else {
                        r.lo().clone()
                    }
                }
                FactPayload::Property(Property::Identity) => idx.clone(),
                FactPayload::Property(_) => continue,
            };
            let Some(by) = exact.lin().cloned() else { continue };
            let mark = self.used.len();
            let ok = self.index_within(&idx, &f.subscript, depth);
            let mut why = self.used.split_off(mark);
            if ok {
                why.push(f.to_string());
                out.push((by, why));
            }
        }
        out
    }

    fn index_within(&mut self, idx: &SymExpr, r: &SymRange, depth: usize) -> bool {
        !r.is_bottom() && self.le(r.lo(), idx, depth) && self.le(idx, r.hi(), depth)
    }

    fn le(&mut self, a: &SymExpr, b: &SymExpr, depth: usize) -> bool {
        let d = b.sub(a);
        match d.lin() {
            Some(l) => self.bound(l, Dir::Lower, depth + 1).is_some_and(|v| v >= 0),
            None => false,
        }
    }

    /// Rewrites of `c·y[s] - c·y[t]` using monotonicity facts on `y`
    /// covering `s+1..t` (or `t+1..s`): the pair is replaced by its bound in `dir`.
    fn monotone_pair_options(&mut self, l: &Lin, dir: Dir, depth: usize) -> Vec<(Lin, Vec<String>)> {
        let elems: Vec<(Atom, i64)> =
            l.terms().filter(|(a, _)| matches!(a, Atom::Elem { .. })).map(|(a, c)| (a.clone(), c)).collect();
        let mut out = Vec::new();
        for (x, cx) in &elems {
            for (y, cy) in &elems {
                let (Atom::Elem { array: ax, index: sx }, Atom::Elem { array: ay, index: sy }) = (x, y) else {
                    continue;
                };
                if ax != ay || *cx != -*cy || *cx <= 0 {
                    continue;
                }
                // l contains c·(y[sx] - y[sy]) with c > 0.
                let c = *cx;
                for (delta, why) in self.pair_bounds(ax, sx, sy, dir, depth) {
                    let next = l
                        .checked_sub(&Lin::term(x.clone(), c))
                        .and_then(|n| n.checked_add(&Lin::term(y.clone(), c)))
                        .and_then(|n| n.checked_add(&Lin::constant(delta.checked_mul(c)?)));
                    if let Some(n) = next {
                        out.push((n, why));
                    }
                }
            }
        }
        out
    }

    /// Bounds in direction `dir` on `y[s] - y[t]` from monotonicity facts.
    fn pair_bounds(&mut self, array: &str, s: &Lin, t: &Lin, dir: Dir, depth: usize) -> Vec<(i64, Vec<String>)> {
        let (se, te) = (SymExpr::Lin(s.clone()), SymExpr::Lin(t.clone()));
        let facts: Vec<FactEntry> = self
            .assm
            .facts
            .iter()
            .filter(|f| f.array == array && f.property().is_some_and(Property::is_monotonic))
            .cloned()
            .collect();
        let mut out = Vec::new();
        for f in facts {
            let Some(p) = f.property() else { continue };
            let mark = self.used.len();
            let r = self.pair_bound_with(&f, p, &se, &te, dir, depth);
            let mut why = self.used.split_off(mark);
            if let Some(b) = r {
                why.push(f.to_string());
                out.push((b, why));
            }
        }
        out
    }

    fn pair_bound_with(
        &mut self,
        f: &FactEntry,
        p: Property,
        se: &SymExpr,
        te: &SymExpr,
        dir: Dir,
        depth: usize,
    ) -> Option<i64> {
        let increasing = matches!(p, Property::MonotonicInc | Property::StrictMonotonicInc);
        let strict = matches!(p, Property::StrictMonotonicInc | Property::StrictMonotonicDec);
        // Orient so that `first <= second` as indices.
        let (first, second, sign) = if self.le(se, te, depth) {
            (se, te, 1)
        } else if self.le(te, se, depth) {
            (te, se, -1)
        } else {
            return None;
        };
        let same = first.sub(second).as_const() == Some(0);
        if same {
            return Some(0);
        }
        if !(self.le(f.subscript.lo(), &first.add_const(1), depth) && self.le(second, f.subscript.hi(), depth)) {
            return None;
        }
        // With first < second: increasing gives y[first] <= y[second] (strict: gap of at least 1).
        let gap = if strict && self.lt(first, second, depth) { 1 } else { 0 };
        // y[s] - y[t] is bounded above when it reads as "earlier minus later"
        // of an increasing array (or later minus earlier of a decreasing one).
        match (dir, increasing == (sign == 1)) {
            (Dir::Upper, true) => Some(-gap),
            (Dir::Lower, false) => Some(gap),
            _ => None,
        }
    }

    fn lt(&mut self, a: &SymExpr, b: &SymExpr, depth: usize) -> bool {
        self.le(&a.add_const(1), b, depth)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AtomClass {
    Index,
    Elem,
    Other,
    Param,
}

fn class_of(a: &Atom, assm: &Assumptions) -> AtomClass {
    match a {
        Atom::LoopIndex(_) => AtomClass::Index,
        Atom::Elem { .. } => AtomClass::Elem,
        Atom::Var(n) if assm.params.contains(n) => AtomClass::Param,
        _ => AtomClass::Other,
    }
}

/// `l` with its top-level term in `a` replaced by `coef·by`; nested
/// occurrences (inside subscripts) are left alone.
fn replace_term(l: &Lin, a: &Atom, by: &Lin) -> Option<Lin> {
    let c = l.coef(a);
    l.checked_sub(&Lin::term(a.clone(), c))?.checked_add(&by.checked_scale(c)?)
}
