mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use subpar::facts::{FactPayload, Property};
use subpar::frontend::parse;
use subpar::oracle::{InputGenerator, Memory, Shape};
use subpar::pipeline::run_pipeline;
use subpar::symbolic::{Atom, SymExpr, SymRange};

use common::{corpus, data, eval_at, CORPUS};

/// Whitespace is ignored, and a count bound of `COLUMNLEN` is accepted where
/// the listing has `COLUMNLEN-1`.
fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<String>().replace("COLUMNLEN-1", "COLUMNLEN")
}

#[test]
fn cg_trace_matches_golden_listing() {
    let golden = std::fs::read_to_string(common::data_path("cg_trace.golden")).unwrap();
    let trace = run_pipeline(&corpus("cg.knl")).trace_text();
    let ours: Vec<String> = trace.lines().map(normalize).collect();
    let want: Vec<String> = golden.lines().map(normalize).collect();
    assert!(ours.len() >= want.len(), "{trace}");
    assert_eq!(&ours[..want.len()], &want[..], "{trace}");
}

#[test]
fn cg_fact_store_has_exactly_the_rowptr_facts() {
    let r = run_pipeline(&corpus("cg.knl"));
    let rowptr: BTreeSet<String> = r.facts.live().filter(|f| f.array == "rowptr").map(|f| f.to_string()).collect();
    let want: BTreeSet<String> =
        ["rowptr: [0:0], [0:0]", "rowptr: [1:ROWLEN], Monotonic_inc"].into_iter().map(String::from).collect();
    assert_eq!(rowptr, want);
    assert!(!r.facts.live().any(|f| f.property() == Some(Property::Injective)));
}

#[test]
fn decrement_prevents_monotonicity() {
    let r = run_pipeline(&data("cg_mutated.knl"));
    assert!(
        !r.facts.entries.iter().any(|s| s.fact.property().is_some_and(|p| p.is_monotonic())),
        "{:?}",
        r.facts.entries
    );
}

#[test]
fn rowstr_filler_is_monotonic() {
    let r = run_pipeline(&corpus("fig2a_rowstr.knl"));
    assert!(r.facts.live().any(|f| f.array == "rowstr" && f.property() == Some(Property::MonotonicInc)));
}

#[test]
fn strict_recurrence_gives_injectivity() {
    let r = run_pipeline(&corpus("fig1_injective.knl"));
    let props: BTreeSet<Property> =
        r.facts.live().filter(|f| f.array == "mt_to_id").filter_map(|f| f.property()).collect();
    assert!(props.contains(&Property::StrictMonotonicInc), "{props:?}");
    assert!(props.contains(&Property::Injective), "{props:?}");
}

#[test]
fn point_assignment_is_killed_by_a_later_write() {
    let p = parse("param n; int a[n + 1]; int i; a[0] = 0; for (i = 0; i < n; i++) { a[i] = 1; }").unwrap();
    let r = run_pipeline(&p);
    let point = r.facts.for_array("a").find(|s| s.fact.is_point()).unwrap();
    assert_eq!(point.killed, Some(1));
}

#[test]
fn write_past_a_fact_keeps_it() {
    let src = "param n; int a[n + 2]; int i; a[0] = 0; for (i = 1; i < n + 1; i++) { a[i] = 1; }";
    let r = run_pipeline(&parse(src).unwrap());
    let point = r.facts.for_array("a").find(|s| s.fact.is_point()).unwrap();
    assert_eq!(point.killed, None);
}

/// Runs `program` on a few small inputs, checking after every iteration of
/// every loop that each scalar and each unconditional simple-subscript write
/// lies in the Phase 1 range evaluated against the iteration's start state.
fn check_phase1(name: &str) {
    let program = corpus(name);
    let pipeline = run_pipeline(&program);
    let generator = InputGenerator { shape: Shape { param_max: 8, value_max: 9 }, ..InputGenerator::new(3) };
    let mut checked = 0usize;
    for trial in 0..12 {
        let input = generator.trial(&program, trial).unwrap();
        let params = input.machine.params.clone();
        let mut mem = input.memory.clone();
        let mut starts: Vec<Memory> = Vec::new();
        let mut failure: Option<String> = None;
        input
            .machine
            .run_observed(&mut mem, &BTreeSet::new(), &mut |_, _| {}, &mut |ev| {
                if !ev.end {
                    starts.push(ev.memory.clone());
                    return;
                }
                let start = starts.pop().expect("start precedes end");
                let Some(a) = pipeline.analysis(ev.loop_id) else { return };
                for (x, r) in &a.body.scalars {
                    if r.is_bottom() {
                        continue;
                    }
                    let v = ev.memory.scalar(x).unwrap();
                    if let (Some(lo), Some(hi)) = (eval_at(r.lo(), &params, &start), eval_at(r.hi(), &params, &start)) {
                        checked += 1;
                        if !(lo <= v && v <= hi) && failure.is_none() {
                            failure = Some(format!(
                                "{} iter {}: {x} = {v} not in {r} = [{lo}:{hi}]",
                                ev.loop_id, ev.iteration
                            ));
                        }
                    }
                }
                for e in a.body.arrays.iter().filter(|e| !e.conditional && !e.value.is_bottom()) {
                    let (Some(k), Some(data)) = (e.offset, ev.memory.ints(&e.array)) else { continue };
                    let at = ev.iteration + k;
                    let v = data[at as usize];
                    let r = &e.value;
                    if let (Some(lo), Some(hi)) = (eval_at(r.lo(), &params, &start), eval_at(r.hi(), &params, &start)) {
                        checked += 1;
                        if !(lo <= v && v <= hi) && failure.is_none() {
                            failure = Some(format!(
                                "{} iter {}: {}[{at}] = {v} not in {r}",
                                ev.loop_id, ev.iteration, e.array
                            ));
                        }
                    }
                }
            })
            .unwrap();
        assert_eq!(failure, None, "{name} trial {trial} {params:?}");
    }
    assert!(checked > 0, "{name}: nothing was checked");
}

#[test]
fn phase1_ranges_hold_per_iteration() {
    for name in CORPUS {
        check_phase1(name);
    }
}

/// Straight-line scalar results after a loop, evaluated, must contain the
/// interpreter's values and be exact for unconditional updates.
fn scalar_program(l: i64, d: i64, k: i64, k2: i64, c2: i64, k3: i64) -> String {
    format!(
        "param n; int i, s, t, u, w; int c[n + 10];
         s = 3; t = -2; u = 0; w = 0;
         for (i = {l}; i < n + {d}; i++) {{
             s = s + {k};
             t = t + {k2} * i + {c2};
             u = {k3} * i + 5;
             if (c[i] > 4) {{ w = w + 1; }}
         }}"
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregated_scalars_match_execution(
        l in 0i64..3, d in -2i64..4, k in -3i64..4, k2 in -2i64..3, c2 in -2i64..3, k3 in -2i64..3,
        seed in 0u64..1000,
    ) {
        let program = parse(&scalar_program(l, d, k, k2, c2, k3)).unwrap();
        let r = run_pipeline(&program);
        let generator = InputGenerator { shape: Shape { param_max: 12, value_max: 9 }, ..InputGenerator::new(seed) };
        for trial in 0..4 {
            let input = generator.trial(&program, trial).unwrap();
            let params = input.machine.params.clone();
            let mut mem = input.memory.clone();
            input.machine.run(&mut mem, &BTreeSet::new()).unwrap();
            for (x, range) in &r.facts.scalars {
                if range.is_bottom() || x == "i" {
                    continue;
                }
                let val = |a: &Atom| match a {
                    Atom::Var(p) => params.get(p).copied(),
                    _ => None,
                };
                let (lo, hi) = (range.lo().eval(&val), range.hi().eval(&val));
                let v = mem.scalar(x).unwrap();
                let (lo, hi) = (lo.unwrap(), hi.unwrap());
                prop_assert!(lo <= v && v <= hi, "{x} = {v} not in {range} = [{lo}:{hi}] with {params:?}");
                if d - l >= -1 && x != "w" {
                    prop_assert_eq!(lo, hi, "{} not exact: {}", x, range);
                }
            }
            if d - l >= -1 {
                let s = r.facts.scalars.iter().find(|(x, _)| x == "s").unwrap();
                prop_assert!(!s.1.is_bottom());
            }
        }
    }
}

#[test]
fn fact_payloads_are_well_formed() {
    for name in CORPUS {
        let r = run_pipeline(&corpus(name));
        for s in &r.facts.entries {
            if let FactPayload::ValueRange(v) = &s.fact.payload {
                assert!(!v.is_bottom(), "{name}: {}", s.fact);
            }
            assert!(!s.fact.subscript.is_bottom(), "{name}: {}", s.fact);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With a literal trip count, applying the per-iteration range `n` times
    /// gives exactly the aggregated closed form.
    #[test]
    fn closed_form_equals_iterated_transfer(n in 0i64..=64, lower in 0i64..4, k in -3i64..4, k2 in -2i64..3) {
        let upper = lower + n;
        let src = format!(
            "int i, s, t; int c[80];\nfor (i = {lower}; i < {upper}; i++) {{\n  s = s + {k};\n  t = t + {k2} * i;\n  if (c[i] > 4) {{ s = s + 1; }}\n}}\n"
        );
        let r = run_pipeline(&parse(&src).unwrap());
        let a = &r.loops[0];
        for x in ["s", "t"] {
            let step = a.body.scalar(x).unwrap();
            let mut cur = SymRange::point(SymExpr::big_lambda(x));
            for it in lower..upper {
                cur = step
                    .subst_atom_range(&Atom::lambda(x), &cur)
                    .subst_atom_range(&Atom::index("i"), &SymRange::point(SymExpr::lit(it)));
            }
            prop_assert_eq!(a.summary.scalar(x).unwrap(), &cur, "{}: {}", x, src);
        }
    }
}
