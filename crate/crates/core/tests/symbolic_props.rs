use proptest::prelude::*;
use subpar::facts::{injected, FactPayload, Property};
use subpar::symbolic::{compare, range_union, sign_of, Assumptions, Atom, CmpResult, SignFact, SymExpr, SymRange};

// Atoms: n, m (parameters), i in [0:n-1], t = n(n-1)/2, b[i], b[i+1] with b
// strictly increasing on [0:n], and c[i] with value range [0:m] on [0:n-1].
fn atom(k: usize) -> SymExpr {
    match k {
        0 => SymExpr::var("n"),
        1 => SymExpr::var("m"),
        2 => SymExpr::index("i"),
        3 => SymExpr::triangular(&SymExpr::var("n")),
        4 => SymExpr::elem("b", SymExpr::index("i")),
        5 => SymExpr::elem("b", SymExpr::index("i").add_const(1)),
        _ => SymExpr::elem("c", SymExpr::index("i")),
    }
}

fn expr_strategy() -> impl Strategy<Value = SymExpr> {
    (prop::collection::vec((0usize..7, -3i64..=3), 0..4), -5i64..=5)
        .prop_map(|(terms, c)| terms.into_iter().fold(SymExpr::lit(c), |acc, (k, coef)| acc.add(&atom(k).scale(coef))))
}

fn assumptions() -> Assumptions {
    let n = SymExpr::var("n");
    let params = vec!["n".to_string(), "m".to_string()];
    Assumptions::with_params(&params).with_index("i", SymRange::new(SymExpr::lit(0), n.add_const(-1))).with_facts([
        injected("b", SymExpr::lit(0), n.clone(), FactPayload::Property(Property::StrictMonotonicInc)),
        injected(
            "c",
            SymExpr::lit(0),
            n.add_const(-1),
            FactPayload::ValueRange(SymRange::new(SymExpr::lit(0), SymExpr::var("m"))),
        ),
    ])
}

#[derive(Debug, Clone)]
struct Valuation {
    n: i64,
    m: i64,
    i: i64,
    b: Vec<i64>,
    c: Vec<i64>,
}

fn valuation_strategy() -> impl Strategy<Value = Valuation> {
    (1i64..12, 1i64..12).prop_flat_map(|(n, m)| {
        let len = n as usize;
        (0..n, -20i64..20, prop::collection::vec(1i64..4, len), prop::collection::vec(0..=m, len)).prop_map(
            move |(i, start, steps, c)| {
                let mut b = vec![start];
                for s in steps {
                    b.push(b.last().unwrap() + s);
                }
                Valuation { n, m, i, b, c }
            },
        )
    })
}

fn eval(e: &SymExpr, v: &Valuation) -> i64 {
    e.eval(&|a| match a {
        Atom::Var(x) if x == "n" => Some(v.n),
        Atom::Var(x) if x == "m" => Some(v.m),
        Atom::LoopIndex(_) => Some(v.i),
        Atom::Elem { array, index } => {
            let k = index.eval(&|_| Some(v.i))? as usize;
            match array.as_str() {
                "b" => v.b.get(k).copied(),
                _ => v.c.get(k).copied(),
            }
        }
        _ => None,
    })
    .expect("valuation covers every atom")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn compare_is_sound(a in expr_strategy(), b in expr_strategy(), vals in prop::collection::vec(valuation_strategy(), 8)) {
        let r = compare(&a, &b, &assumptions());
        for v in &vals {
            let (x, y) = (eval(&a, v), eval(&b, v));
            let ok = match r {
                CmpResult::ProvablyEQ => x == y,
                CmpResult::ProvablyLT => x < y,
                CmpResult::ProvablyLE => x <= y,
                CmpResult::ProvablyGT => x > y,
                CmpResult::ProvablyGE => x >= y,
                CmpResult::Unknown => true,
            };
            prop_assert!(ok, "{a} vs {b}: {r} but {x} vs {y} under {v:?}");
        }
    }

    #[test]
    fn sign_is_sound(e in expr_strategy(), vals in prop::collection::vec(valuation_strategy(), 8)) {
        let s = sign_of(&e, &assumptions());
        for v in &vals {
            let x = eval(&e, v);
            let ok = match s {
                SignFact::NonNegative => x >= 0,
                SignFact::NonPositive => x <= 0,
                SignFact::StrictlyPositive => x > 0,
                SignFact::StrictlyNegative => x < 0,
                SignFact::Unknown => true,
            };
            prop_assert!(ok, "{e}: {s:?} but {x}");
        }
    }

    #[test]
    fn union_contains_both_operands(
        a in (expr_strategy(), expr_strategy()),
        b in (expr_strategy(), expr_strategy()),
        vals in prop::collection::vec(valuation_strategy(), 8),
    ) {
        let ra = SymRange::new(a.0, a.1);
        let rb = SymRange::new(b.0, b.1);
        let u = range_union(&ra, &rb, &assumptions());
        if u.is_bottom() {
            return Ok(());
        }
        for v in &vals {
            let (lo, hi) = (eval(u.lo(), v), eval(u.hi(), v));
            for r in [&ra, &rb] {
                let (x, y) = (eval(r.lo(), v), eval(r.hi(), v));
                for w in x..=y.min(x + 50) {
                    prop_assert!(lo <= w && w <= hi, "{w} of {r} outside {u}");
                }
            }
        }
    }

    #[test]
    fn canonical_form_is_a_fixpoint(e in expr_strategy()) {
        let again = e.add(&SymExpr::lit(0)).scale(1).substitute(&Default::default());
        prop_assert_eq!(again, e);
    }
}
