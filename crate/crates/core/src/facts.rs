//! Facts about arrays and the program-ordered store that holds them.

use std::fmt;

use serde::Serialize;

use crate::frontend::LoopId;
use crate::symbolic::{SymExpr, SymRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Property {
    #[serde(rename = "Monotonic_inc")]
    MonotonicInc,
    #[serde(rename = "Monotonic_dec")]
    MonotonicDec,
    #[serde(rename = "StrictMonotonic_inc")]
    StrictMonotonicInc,
    #[serde(rename = "StrictMonotonic_dec")]
    StrictMonotonicDec,
    Injective,
    Identity,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::MonotonicInc => "Monotonic_inc",
            Property::MonotonicDec => "Monotonic_dec",
            Property::StrictMonotonicInc => "StrictMonotonic_inc",
            Property::StrictMonotonicDec => "StrictMonotonic_dec",
            Property::Injective => "Injective",
            Property::Identity => "Identity",
        }
    }

    pub fn is_monotonic(self) -> bool {
        matches!(
            self,
            Property::MonotonicInc
                | Property::MonotonicDec
                | Property::StrictMonotonicInc
                | Property::StrictMonotonicDec
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactPayload {
    /// Every element in the subscript range holds a value in this range.
    ValueRange(SymRange),
    Property(Property),
}

/// The aggregation rule that produced a fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Loop-invariant value written through a simple subscript.
    InvariantValue,
    /// `a[i+k] = a[i+k-1] + addend` with a signed addend.
    Recurrence,
    /// `x[i] = i`.
    Identity,
    /// Strict monotonicity implies injectivity.
    StrictImpliesInjective,
    /// Straight-line assignment to a constant subscript.
    PointAssignment,
    /// Inserted by a caller (test hook); never produced by the analysis.
    Injected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub loop_id: Option<LoopId>,
    pub line: usize,
    pub rule: Rule,
    /// Scalar effects of sequential collapsed loops were composed by substitution.
    pub composite: bool,
}

/// Semantics of the subscript must-range `[a:b]` by payload:
/// - `ValueRange(r)`: `y[k] ∈ r` for every `k ∈ [a:b]`.
/// - `Monotonic_inc`: `y[k-1] <= y[k]` for every `k ∈ [a:b]` (strict: `<`);
///   `_dec` symmetric.
/// - `Injective`: `y[k] != y[l]` for distinct `k, l ∈ [a:b]`.
/// - `Identity`: `y[k] == k` for every `k ∈ [a:b]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactEntry {
    pub array: String,
    pub subscript: SymRange,
    pub payload: FactPayload,
    pub provenance: Provenance,
}

impl FactEntry {
    pub fn property(&self) -> Option<Property> {
        match &self.payload {
            FactPayload::Property(p) => Some(*p),
            FactPayload::ValueRange(_) => None,
        }
    }

    pub fn value_range(&self) -> Option<&SymRange> {
        match &self.payload {
            FactPayload::ValueRange(r) => Some(r),
            FactPayload::Property(_) => None,
        }
    }

    pub fn payload_string(&self) -> String {
        match &self.payload {
            FactPayload::ValueRange(r) => r.to_string(),
            FactPayload::Property(p) => p.to_string(),
        }
    }

    /// True when the fact is a single-element value fact `y[c] = v`.
    pub fn is_point(&self) -> bool {
        self.provenance.rule == Rule::PointAssignment
    }
}

impl fmt::Display for FactEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}, {}", self.array, self.subscript, self.payload_string())
    }
}

/// A fact and the window of top-level statements over which it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredFact {
    pub fact: FactEntry,
    /// Index of the top-level statement that produced it; valid after it.
    pub born: usize,
    /// Index of the top-level statement that invalidated it, if any.
    pub killed: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgramFacts {
    pub entries: Vec<StoredFact>,
    /// Straight-line scalar values at the end of the program.
    pub scalars: Vec<(String, SymRange)>,
}

impl ProgramFacts {
    pub fn insert(&mut self, fact: FactEntry, born: usize) {
        self.entries.push(StoredFact { fact, born, killed: None });
    }

    /// Facts holding on entry to top-level statement `point`.
    pub fn visible_at(&self, point: usize) -> Vec<FactEntry> {
        self.entries
            .iter()
            .filter(|s| s.born < point && s.killed.is_none_or(|k| k >= point))
            .map(|s| s.fact.clone())
            .collect()
    }

    /// Facts that survive to the end of the program.
    pub fn live(&self) -> impl Iterator<Item = &FactEntry> {
        self.entries.iter().filter(|s| s.killed.is_none()).map(|s| &s.fact)
    }

    pub fn for_array<'a>(&'a self, array: &'a str) -> impl Iterator<Item = &'a StoredFact> {
        self.entries.iter().filter(move |s| s.fact.array == array)
    }
}

/// Convenience constructor used by tests and the fact-injection hook.
pub fn injected(array: &str, lo: SymExpr, hi: SymExpr, payload: FactPayload) -> FactEntry {
    FactEntry {
        array: array.to_string(),
        subscript: SymRange::new(lo, hi),
        payload,
        provenance: Provenance { loop_id: None, line: 0, rule: Rule::Injected, composite: false },
    }
}
