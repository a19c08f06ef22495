//! Brute-force checks of array properties, facts and loop independence.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::interp::{Event, Memory};
use crate::facts::{FactEntry, FactPayload, Property};
use crate::symbolic::{Atom, SymExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropertyCheck {
    Holds,
    /// The lexicographically smallest violating index pair.
    Counterexample(i64, i64),
}

/// Checks `property` on `values[lo..=hi]`. Monotonicity is read as "for all
/// i < j in the range" and Identity as `values[k] == k`.
pub fn check_property(values: &[i64], lo: i64, hi: i64, property: Property) -> PropertyCheck {
    if hi <= lo && property != Property::Identity {
        return PropertyCheck::Holds;
    }
    let at = |k: i64| values[k as usize];
    match property {
        Property::Identity => match (lo..=hi).find(|&k| at(k) != k) {
            Some(k) => PropertyCheck::Counterexample(k, k),
            None => PropertyCheck::Holds,
        },
        Property::Injective => {
            let mut seen: Vec<(i64, i64)> = (lo..=hi).map(|k| (at(k), k)).collect();
            seen.sort_unstable();
            // Within a run of equal values the first two indices form the smallest pair.
            seen.windows(2)
                .enumerate()
                .filter(|(n, w)| w[0].0 == w[1].0 && (*n == 0 || seen[n - 1].0 != w[0].0))
                .map(|(_, w)| (w[0].1, w[1].1))
                .min()
                .map_or(PropertyCheck::Holds, |(i, j)| PropertyCheck::Counterexample(i, j))
        }
        _ => {
            let (increasing, strict) = match property {
                Property::MonotonicInc => (true, false),
                Property::StrictMonotonicInc => (true, true),
                Property::MonotonicDec => (false, false),
                _ => (false, true),
            };
            let ok = |a: i64, b: i64| match (increasing, strict) {
                (true, false) => a <= b,
                (true, true) => a < b,
                (false, false) => a >= b,
                (false, true) => a > b,
            };
            if (lo..hi).all(|k| ok(at(k), at(k + 1))) {
                return PropertyCheck::Holds;
            }
            // Smallest i with a later j breaking the order, then the smallest such j.
            for i in lo..hi {
                if let Some(j) = (i + 1..=hi).find(|&j| !ok(at(i), at(j))) {
                    return PropertyCheck::Counterexample(i, j);
                }
            }
            unreachable!("an adjacent violation is also a pair violation")
        }
    }
}

/// Evaluates a fact bound over concrete parameters and memory.
pub fn eval_in(e: &SymExpr, params: &BTreeMap<String, i64>, mem: &Memory) -> Option<i64> {
    e.eval(&|a| match a {
        Atom::Var(n) => params.get(n).copied().or_else(|| mem.scalar(n)),
        Atom::Elem { array, index } => {
            let k = SymExpr::Lin((**index).clone()).eval(&|b| match b {
                Atom::Var(n) => params.get(n).copied().or_else(|| mem.scalar(n)),
                _ => None,
            })?;
            let v = mem.ints(array)?;
            usize::try_from(k).ok().and_then(|k| v.get(k).copied())
        }
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactCheck {
    Holds,
    Violated(String),
    /// A bound could not be evaluated concretely.
    Unevaluable(String),
}

pub fn check_fact(f: &FactEntry, params: &BTreeMap<String, i64>, mem: &Memory) -> FactCheck {
    let ev = |e: &SymExpr| eval_in(e, params, mem);
    let (Some(lo), Some(hi)) = (ev(f.subscript.lo()), ev(f.subscript.hi())) else {
        return FactCheck::Unevaluable(format!("subscript range of {f}"));
    };
    let Some(values) = mem.ints(&f.array) else {
        return FactCheck::Unevaluable(format!("{} is not an integer array", f.array));
    };
    let footprint_lo = match f.property() {
        Some(p) if p.is_monotonic() => lo - 1,
        _ => lo,
    };
    if hi < lo {
        return FactCheck::Holds;
    }
    if footprint_lo < 0 || hi >= values.len() as i64 {
        return FactCheck::Violated(format!("{f}: range [{footprint_lo}:{hi}] outside {} elements", values.len()));
    }
    match &f.payload {
        FactPayload::ValueRange(r) => {
            let (Some(vlo), Some(vhi)) = (ev(r.lo()), ev(r.hi())) else {
                return FactCheck::Unevaluable(format!("value range of {f}"));
            };
            match (lo..=hi).find(|&k| !(vlo..=vhi).contains(&values[k as usize])) {
                Some(k) => {
                    FactCheck::Violated(format!("{f}: {}[{k}] = {} outside [{vlo}:{vhi}]", f.array, values[k as usize]))
                }
                None => FactCheck::Holds,
            }
        }
        FactPayload::Property(p) => match check_property(values, footprint_lo, hi, *p) {
            PropertyCheck::Holds => FactCheck::Holds,
            PropertyCheck::Counterexample(i, j) => FactCheck::Violated(format!(
                "{f}: {}[{i}] = {}, {}[{j}] = {}",
                f.array, values[i as usize], f.array, values[j as usize]
            )),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Independence {
    Independent,
    Conflict { first: i64, second: i64, array: String, index: usize },
}

/// No location is written by two distinct iterations of one loop execution.
pub fn check_output_independence(events: &[Event], mem: &Memory) -> Independence {
    let mut owner: HashMap<(usize, usize, usize), i64> = HashMap::new();
    for e in events.iter().filter(|e| e.write) {
        match owner.get(&(e.instance, e.array, e.index)) {
            Some(&it) if it != e.iteration => {
                return Independence::Conflict {
                    first: it,
                    second: e.iteration,
                    array: mem.array_name(e.array).to_string(),
                    index: e.index,
                }
            }
            Some(_) => {}
            None => {
                owner.insert((e.instance, e.array, e.index), e.iteration);
            }
        }
    }
    Independence::Independent
}

/// No location written by one iteration is read or written by another.
pub fn check_iteration_independence(events: &[Event], mem: &Memory) -> Independence {
    if let c @ Independence::Conflict { .. } = check_output_independence(events, mem) {
        return c;
    }
    let mut writer: HashMap<(usize, usize, usize), i64> = HashMap::new();
    for e in events.iter().filter(|e| e.write) {
        writer.entry((e.instance, e.array, e.index)).or_insert(e.iteration);
    }
    for e in events.iter().filter(|e| !e.write) {
        if let Some(&w) = writer.get(&(e.instance, e.array, e.index)) {
            if w != e.iteration {
                let (first, second) = (w.min(e.iteration), w.max(e.iteration));
                return Independence::Conflict {
                    first,
                    second,
                    array: mem.array_name(e.array).to_string(),
                    index: e.index,
                };
            }
        }
    }
    Independence::Independent
}
