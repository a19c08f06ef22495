//! Ranges `[lo:hi]` of symbolic expressions.

use std::collections::BTreeMap;
use std::fmt;

use super::expr::{Atom, Lin, SymExpr};

/// `[lo:hi]`; a may-range for values, a must-range for subscripts. Either
/// bound being ⊥ makes the whole range ⊥, so both bounds are ⊥ together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymRange {
    lo: SymExpr,
    hi: SymExpr,
}

impl SymRange {
    pub fn new(lo: SymExpr, hi: SymExpr) -> SymRange {
        if lo.is_bottom() || hi.is_bottom() {
            SymRange::bottom()
        } else {
            SymRange { lo, hi }
        }
    }

    pub fn bottom() -> SymRange {
        SymRange { lo: SymExpr::Bottom, hi: SymExpr::Bottom }
    }

    pub fn point(e: SymExpr) -> SymRange {
        SymRange::new(e.clone(), e)
    }

    pub fn lit(lo: i64, hi: i64) -> SymRange {
        SymRange::new(SymExpr::lit(lo), SymExpr::lit(hi))
    }

    pub fn lo(&self) -> &SymExpr {
        &self.lo
    }

    pub fn hi(&self) -> &SymExpr {
        &self.hi
    }

    pub fn is_bottom(&self) -> bool {
        self.lo.is_bottom()
    }

    /// The single expression of a degenerate range.
    pub fn as_point(&self) -> Option<&SymExpr> {
        (!self.is_bottom() && self.lo == self.hi).then_some(&self.lo)
    }

    pub fn add(&self, other: &SymRange) -> SymRange {
        SymRange::new(self.lo.add(&other.lo), self.hi.add(&other.hi))
    }

    pub fn sub(&self, other: &SymRange) -> SymRange {
        SymRange::new(self.lo.sub(&other.hi), self.hi.sub(&other.lo))
    }

    pub fn add_expr(&self, e: &SymExpr) -> SymRange {
        self.add(&SymRange::point(e.clone()))
    }

    pub fn scale(&self, k: i64) -> SymRange {
        if k >= 0 {
            SymRange::new(self.lo.scale(k), self.hi.scale(k))
        } else {
            SymRange::new(self.hi.scale(k), self.lo.scale(k))
        }
    }

    /// Product with another range; defined only when one side is a literal point.
    pub fn mul(&self, other: &SymRange) -> SymRange {
        match (self.as_point().and_then(SymExpr::as_const), other.as_point().and_then(SymExpr::as_const)) {
            (Some(k), _) => other.scale(k),
            (_, Some(k)) => self.scale(k),
            _ => SymRange::bottom(),
        }
    }

    pub fn map(&self, f: impl Fn(&SymExpr) -> SymExpr) -> SymRange {
        SymRange::new(f(&self.lo), f(&self.hi))
    }

    pub fn substitute(&self, binding: &BTreeMap<Atom, SymExpr>) -> SymRange {
        self.map(|e| e.substitute(binding))
    }

    /// Replaces the top-level occurrence of `atom` in both bounds by a range.
    /// `[lo:hi]` becomes `[lo - c·a + c·by : hi - c·a + c·by]` with the range
    /// endpoints chosen by the sign of each coefficient.
    pub fn subst_atom_range(&self, atom: &Atom, by: &SymRange) -> SymRange {
        if self.is_bottom() {
            return SymRange::bottom();
        }
        let bound = |e: &SymExpr, upper: bool| -> SymExpr {
            let Some(l) = e.lin() else { return SymExpr::Bottom };
            let c = l.coef(atom);
            if c == 0 {
                return e.clone();
            }
            let rest = SymExpr::from_lin(l.checked_sub(&Lin::term(atom.clone(), c)));
            let piece = by.scale(c);
            rest.add(if upper { piece.hi() } else { piece.lo() })
        };
        SymRange::new(bound(&self.lo, false), bound(&self.hi, true))
    }

    pub fn mentions(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.lo.mentions(pred) || self.hi.mentions(pred)
    }

    /// Paper notation. Array-element terms common to both bounds are factored
    /// out, as in `rowptr[i-1]+[0:COLUMNLEN-1]`.
    pub fn render(&self, owner: Option<&str>) -> String {
        let (Some(lo), Some(hi)) = (self.lo.lin(), self.hi.lin()) else {
            return "⊥".to_string();
        };
        let mut base = Lin::constant(0);
        for (a, c) in lo.terms() {
            if matches!(a, Atom::Elem { .. }) && hi.coef(a) == c {
                base = base.checked_add(&Lin::term(a.clone(), c)).unwrap_or_default();
            }
        }
        if base.as_const().is_some() {
            return format!("[{}:{}]", lo.render(owner), hi.render(owner));
        }
        let (rlo, rhi) = match (lo.checked_sub(&base), hi.checked_sub(&base)) {
            (Some(a), Some(b)) => (a, b),
            _ => return format!("[{}:{}]", lo.render(owner), hi.render(owner)),
        };
        if rlo == rhi && rlo.as_const() == Some(0) {
            return base.render(owner);
        }
        format!("{}+[{}:{}]", base.render(owner), rlo.render(owner), rhi.render(owner))
    }
}

impl fmt::Display for SymRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> SymExpr {
        SymExpr::var(n)
    }

    #[test]
    fn interval_addition() {
        assert_eq!(SymRange::lit(1, 2).add(&SymRange::lit(3, 4)), SymRange::lit(4, 6));
        let count = SymRange::point(SymExpr::lambda("count"));
        assert_eq!(count.add(&SymRange::lit(0, 1)).render(Some("count")), "[λ:λ+1]");
    }

    #[test]
    fn factored_rendering_of_element_base() {
        let prev = SymExpr::elem("rowptr", SymExpr::index("i").add_const(-1));
        let r = SymRange::point(prev).add(&SymRange::new(SymExpr::lit(0), v("COLUMNLEN").add_const(-1)));
        assert_eq!(r.to_string(), "rowptr[i-1]+[0:COLUMNLEN-1]");
        assert_eq!(SymRange::new(SymExpr::lit(0), v("COLUMNLEN").add_const(-1)).to_string(), "[0:COLUMNLEN-1]");
    }

    #[test]
    fn bottom_is_absorbing() {
        let b = SymRange::new(SymExpr::Bottom, SymExpr::lit(3));
        assert!(b.is_bottom());
        assert!(b.add(&SymRange::lit(0, 1)).is_bottom());
        assert!(SymRange::lit(0, 1).sub(&b).is_bottom());
        assert_eq!(b.to_string(), "⊥");
    }

    #[test]
    fn negative_scale_swaps_bounds() {
        assert_eq!(SymRange::lit(1, 3).scale(-2), SymRange::lit(-6, -2));
        assert_eq!(SymRange::lit(1, 3).sub(&SymRange::lit(0, 1)), SymRange::lit(0, 3));
    }

    #[test]
    fn substituting_a_fact_range_for_an_atom() {
        let rs = Atom::elem("rowsize", Lin::atom(Atom::index("i")).checked_add(&Lin::constant(-1)).unwrap());
        let prev = SymExpr::elem("rowptr", SymExpr::index("i").add_const(-1));
        let e = SymRange::point(prev.add(&SymExpr::atom(rs.clone())));
        let fact = SymRange::new(SymExpr::lit(0), v("COLUMNLEN").add_const(-1));
        assert_eq!(e.subst_atom_range(&rs, &fact).to_string(), "rowptr[i-1]+[0:COLUMNLEN-1]");
        let neg = SymRange::point(SymExpr::atom(rs.clone()).scale(-1));
        assert_eq!(neg.subst_atom_range(&rs, &fact).to_string(), "[-COLUMNLEN+1:0]");
    }
}
