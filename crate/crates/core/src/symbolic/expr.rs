//! Canonical symbolic integer expressions.
//!
//! An expression is either ⊥ or a sum `c0 + Σ cᵢ·aᵢ` with literal
//! coefficients over opaque atoms. Keeping everything in this shape makes
//! simplification a no-op and equality structural.

use std::collections::BTreeMap;
use std::fmt;

/// A non-literal leaf of a symbolic expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// Value of a scalar at the start of the current iteration (λ).
    Lambda(String),
    /// Value of a scalar at the start of the loop (Λ).
    BigLambda(String),
    LoopIndex(String),
    /// Loop-invariant name; positive only when the assumptions say it is a parameter.
    Var(String),
    /// `array[index]` as an opaque value.
    Elem {
        array: String,
        index: Box<Lin>,
    },
    /// `n(n-1)/2`, always non-negative for integer `n`.
    Tri(Box<Lin>),
}

impl Atom {
    pub fn var(name: &str) -> Atom {
        Atom::Var(name.to_string())
    }

    pub fn index(name: &str) -> Atom {
        Atom::LoopIndex(name.to_string())
    }

    pub fn lambda(name: &str) -> Atom {
        Atom::Lambda(name.to_string())
    }

    pub fn big_lambda(name: &str) -> Atom {
        Atom::BigLambda(name.to_string())
    }

    pub fn elem(array: &str, index: Lin) -> Atom {
        Atom::Elem { array: array.to_string(), index: Box::new(index) }
    }

    /// True when `pred` holds for this atom or any atom nested inside it.
    pub fn any(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Atom::Elem { index, .. } => index.any_atom(pred),
            Atom::Tri(n) => n.any_atom(pred),
            _ => false,
        }
    }
}

/// Linear combination with literal coefficients; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Lin {
    terms: BTreeMap<Atom, i64>,
    constant: i64,
}

impl Lin {
    pub fn constant(c: i64) -> Lin {
        Lin { terms: BTreeMap::new(), constant: c }
    }

    pub fn atom(a: Atom) -> Lin {
        Lin::term(a, 1)
    }

    pub fn term(a: Atom, coef: i64) -> Lin {
        let mut l = Lin::constant(0);
        if coef != 0 {
            l.terms.insert(a, coef);
        }
        l.fold_tri()
    }

    pub fn const_part(&self) -> i64 {
        self.constant
    }

    pub fn as_const(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Atom, i64)> {
        self.terms.iter().map(|(a, c)| (a, *c))
    }

    pub fn coef(&self, a: &Atom) -> i64 {
        self.terms.get(a).copied().unwrap_or(0)
    }

    /// Expression without its literal part.
    pub fn without_const(&self) -> Lin {
        Lin { terms: self.terms.clone(), constant: 0 }
    }

    pub fn any_atom(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.terms.keys().any(|a| a.any(pred))
    }

    pub fn checked_add(&self, other: &Lin) -> Option<Lin> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(other.constant)?;
        for (a, c) in &other.terms {
            let e = out.terms.entry(a.clone()).or_insert(0);
            *e = e.checked_add(*c)?;
            if *e == 0 {
                out.terms.remove(a);
            }
        }
        Some(out)
    }

    pub fn checked_scale(&self, k: i64) -> Option<Lin> {
        if k == 0 {
            return Some(Lin::constant(0));
        }
        let mut out = Lin::constant(self.constant.checked_mul(k)?);
        for (a, c) in &self.terms {
            out.terms.insert(a.clone(), c.checked_mul(k)?);
        }
        Some(out)
    }

    pub fn checked_sub(&self, other: &Lin) -> Option<Lin> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    /// Simultaneous substitution of atoms (including atoms nested in array
    /// subscripts), re-canonicalized. `None` if a replacement is ⊥ or overflow.
    pub fn substitute(&self, binding: &BTreeMap<Atom, SymExpr>) -> Option<Lin> {
        let mut out = Lin::constant(self.constant);
        for (a, c) in &self.terms {
            let replaced = match binding.get(a) {
                Some(SymExpr::Lin(l)) => l.clone(),
                Some(SymExpr::Bottom) => return None,
                None => match a {
                    Atom::Elem { array, index } => Lin::atom(Atom::elem(array, index.substitute(binding)?)),
                    Atom::Tri(n) => Lin::atom(Atom::Tri(Box::new(n.substitute(binding)?))),
                    other => Lin::atom(other.clone()),
                },
            };
            out = out.checked_add(&replaced.checked_scale(*c)?)?;
        }
        Some(out.fold_tri())
    }

    /// Evaluates under a concrete valuation of atoms.
    pub fn eval(&self, value_of: &dyn Fn(&Atom) -> Option<i64>) -> Option<i64> {
        let mut acc = self.constant;
        for (a, c) in &self.terms {
            let v = match a {
                Atom::Tri(n) => {
                    let n = n.eval(value_of)?;
                    n.checked_mul(n.checked_sub(1)?)? / 2
                }
                other => value_of(other)?,
            };
            acc = acc.checked_add(v.checked_mul(*c)?)?;
        }
        Some(acc)
    }

    fn fold_tri(mut self) -> Lin {
        let folded: Vec<(Atom, i64)> = self
            .terms
            .iter()
            .filter_map(|(a, c)| match a {
                Atom::Tri(n) => n.as_const().map(|k| (a.clone(), k * (k - 1) / 2 * c)),
                _ => None,
            })
            .collect();
        for (a, v) in folded {
            self.terms.remove(&a);
            self.constant += v;
        }
        self
    }

    pub fn render(&self, owner: Option<&str>) -> String {
        let mut out = String::new();
        for (i, (a, c)) in self.terms.iter().enumerate() {
            let atom = render_atom(a, owner);
            let sign = if *c < 0 {
                "-"
            } else if i > 0 {
                "+"
            } else {
                ""
            };
            let mag = c.unsigned_abs();
            if mag == 1 {
                out.push_str(&format!("{sign}{atom}"));
            } else {
                out.push_str(&format!("{sign}{mag}*{atom}"));
            }
        }
        if self.terms.is_empty() {
            out.push_str(&self.constant.to_string());
        } else if self.constant > 0 {
            out.push_str(&format!("+{}", self.constant));
        } else if self.constant < 0 {
            out.push_str(&format!("-{}", self.constant.unsigned_abs()));
        }
        out
    }
}

fn render_atom(a: &Atom, owner: Option<&str>) -> String {
    match a {
        Atom::Lambda(n) if Some(n.as_str()) == owner => "λ".to_string(),
        Atom::Lambda(n) => format!("λ({n})"),
        Atom::BigLambda(n) if Some(n.as_str()) == owner => "Λ".to_string(),
        Atom::BigLambda(n) => format!("Λ({n})"),
        Atom::LoopIndex(n) | Atom::Var(n) => n.clone(),
        Atom::Elem { array, index } => format!("{array}[{}]", index.render(owner)),
        Atom::Tri(n) => {
            let base = n.render(owner);
            let minus_one = n.checked_sub(&Lin::constant(1)).map(|m| m.render(owner)).unwrap_or_default();
            if n.terms.len() == 1 && n.constant == 0 && n.terms.values().all(|c| *c == 1) {
                format!("{base}*({minus_one})/2")
            } else {
                format!("({base})*({minus_one})/2")
            }
        }
    }
}

/// A symbolic integer or ⊥ (unknown). ⊥ absorbs every operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExpr {
    Bottom,
    Lin(Lin),
}

impl SymExpr {
    pub fn lit(c: i64) -> SymExpr {
        SymExpr::Lin(Lin::constant(c))
    }

    pub fn atom(a: Atom) -> SymExpr {
        SymExpr::Lin(Lin::atom(a))
    }

    pub fn var(name: &str) -> SymExpr {
        SymExpr::atom(Atom::var(name))
    }

    pub fn index(name: &str) -> SymExpr {
        SymExpr::atom(Atom::index(name))
    }

    pub fn lambda(name: &str) -> SymExpr {
        SymExpr::atom(Atom::lambda(name))
    }

    pub fn big_lambda(name: &str) -> SymExpr {
        SymExpr::atom(Atom::big_lambda(name))
    }

    pub fn elem(array: &str, index: SymExpr) -> SymExpr {
        match index {
            SymExpr::Lin(l) => SymExpr::atom(Atom::elem(array, l)),
            SymExpr::Bottom => SymExpr::Bottom,
        }
    }

    /// `n(n-1)/2`
    pub fn triangular(n: &SymExpr) -> SymExpr {
        match n {
            SymExpr::Lin(l) => SymExpr::Lin(Lin::atom(Atom::Tri(Box::new(l.clone())))),
            SymExpr::Bottom => SymExpr::Bottom,
        }
    }

    pub fn from_lin(l: Option<Lin>) -> SymExpr {
        l.map_or(SymExpr::Bottom, SymExpr::Lin)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, SymExpr::Bottom)
    }

    pub fn lin(&self) -> Option<&Lin> {
        match self {
            SymExpr::Lin(l) => Some(l),
            SymExpr::Bottom => None,
        }
    }

    pub fn as_const(&self) -> Option<i64> {
        self.lin().and_then(Lin::as_const)
    }

    pub fn add(&self, other: &SymExpr) -> SymExpr {
        match (self, other) {
            (SymExpr::Lin(a), SymExpr::Lin(b)) => SymExpr::from_lin(a.checked_add(b)),
            _ => SymExpr::Bottom,
        }
    }

    pub fn sub(&self, other: &SymExpr) -> SymExpr {
        match (self, other) {
            (SymExpr::Lin(a), SymExpr::Lin(b)) => SymExpr::from_lin(a.checked_sub(b)),
            _ => SymExpr::Bottom,
        }
    }

    pub fn scale(&self, k: i64) -> SymExpr {
        match self {
            SymExpr::Lin(a) => SymExpr::from_lin(a.checked_scale(k)),
            SymExpr::Bottom => SymExpr::Bottom,
        }
    }

    pub fn add_const(&self, k: i64) -> SymExpr {
        self.add(&SymExpr::lit(k))
    }

    /// Product; defined only when one side is a literal.
    pub fn mul(&self, other: &SymExpr) -> SymExpr {
        match (self.as_const(), other.as_const()) {
            (Some(k), _) => other.scale(k),
            (_, Some(k)) => self.scale(k),
            _ => SymExpr::Bottom,
        }
    }

    pub fn substitute(&self, binding: &BTreeMap<Atom, SymExpr>) -> SymExpr {
        match self {
            SymExpr::Lin(l) => SymExpr::from_lin(l.substitute(binding)),
            SymExpr::Bottom => SymExpr::Bottom,
        }
    }

    /// Replaces one atom.
    pub fn subst1(&self, atom: &Atom, by: &SymExpr) -> SymExpr {
        let mut b = BTreeMap::new();
        b.insert(atom.clone(), by.clone());
        self.substitute(&b)
    }

    pub fn mentions(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.lin().is_some_and(|l| l.any_atom(pred))
    }

    pub fn eval(&self, value_of: &dyn Fn(&Atom) -> Option<i64>) -> Option<i64> {
        self.lin()?.eval(value_of)
    }

    /// Renders with λ/Λ of `owner` printed bare, as in `count: [λ:λ+1]`.
    pub fn render(&self, owner: Option<&str>) -> String {
        match self {
            SymExpr::Bottom => "⊥".to_string(),
            SymExpr::Lin(l) => l.render(owner),
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

impl From<i64> for SymExpr {
    fn from(c: i64) -> Self {
        SymExpr::lit(c)
    }
}
