mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use subpar::facts::Property;
use subpar::frontend::{parse, LoopId};
use subpar::oracle::{
    check_iteration_independence, check_output_independence, check_property, Event, Independence, InputGenerator,
    Machine, PropertyCheck, RunError,
};
use subpar::validate::{validate_program, ValidateConfig};

use common::{corpus, CORPUS};

fn violates(values: &[i64], i: i64, j: i64, p: Property) -> bool {
    let (a, b) = (values[i as usize], values[j as usize]);
    match p {
        Property::MonotonicInc => a > b,
        Property::StrictMonotonicInc => a >= b,
        Property::MonotonicDec => a < b,
        Property::StrictMonotonicDec => a <= b,
        Property::Injective => a == b,
        Property::Identity => unreachable!(),
    }
}

/// Every pair `i < j` in `[lo:hi]`, checked directly.
fn brute_force(values: &[i64], lo: i64, hi: i64, p: Property) -> PropertyCheck {
    if p == Property::Identity {
        return (lo..=hi)
            .find(|&k| values[k as usize] != k)
            .map_or(PropertyCheck::Holds, |k| PropertyCheck::Counterexample(k, k));
    }
    for i in lo..=hi {
        for j in i + 1..=hi {
            if violates(values, i, j, p) {
                return PropertyCheck::Counterexample(i, j);
            }
        }
    }
    PropertyCheck::Holds
}

fn property() -> impl Strategy<Value = Property> {
    prop_oneof![
        Just(Property::MonotonicInc),
        Just(Property::MonotonicDec),
        Just(Property::StrictMonotonicInc),
        Just(Property::StrictMonotonicDec),
        Just(Property::Injective),
        Just(Property::Identity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn property_check_agrees_with_pairwise_definition(
        values in prop::collection::vec(-4i64..12, 1..24),
        bounds in (0usize..24, 0usize..24),
        p in property(),
    ) {
        let n = values.len();
        let (lo, hi) = ((bounds.0 % n) as i64, (bounds.1 % n) as i64);
        prop_assert_eq!(check_property(&values, lo, hi, p), brute_force(&values, lo, hi, p));
    }

    #[test]
    fn sorted_inputs_are_monotonic(mut values in prop::collection::vec(-50i64..50, 2..40)) {
        values.sort();
        let hi = values.len() as i64 - 1;
        prop_assert_eq!(check_property(&values, 0, hi, Property::MonotonicInc), PropertyCheck::Holds);
        values.dedup();
        let hi = values.len() as i64 - 1;
        prop_assert_eq!(check_property(&values, 0, hi, Property::StrictMonotonicInc), PropertyCheck::Holds);
        prop_assert_eq!(check_property(&values, 0, hi, Property::Injective), PropertyCheck::Holds);
    }
}

fn event() -> impl Strategy<Value = Event> {
    (0usize..2, 0i64..4, 0usize..2, 0usize..4, any::<bool>())
        .prop_map(|(instance, iteration, array, index, write)| Event { instance, iteration, array, index, write })
}

fn conflicting(a: &Event, b: &Event, reads: bool) -> bool {
    a.instance == b.instance
        && a.array == b.array
        && a.index == b.index
        && a.iteration != b.iteration
        && (a.write && b.write || reads && (a.write || b.write))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn independence_checks_agree_with_pairwise_definition(events in prop::collection::vec(event(), 0..16)) {
        let p = parse("int x[4]; int y[4];").unwrap();
        let mem = Machine::new(&p, &BTreeMap::new()).unwrap().fresh_memory();
        for (reads, got) in [
            (false, check_output_independence(&events, &mem)),
            (true, check_iteration_independence(&events, &mem)),
        ] {
            let any = events.iter().enumerate().any(|(k, a)| events[k + 1..].iter().any(|b| conflicting(a, b, reads)));
            match got {
                Independence::Independent => prop_assert!(!any, "missed conflict in {events:?}"),
                Independence::Conflict { first, second, array, index } => {
                    prop_assert!(any);
                    let slot = if array == "x" { 0 } else { 1 };
                    let touches = |it: i64| events.iter().any(|e| e.iteration == it && e.array == slot && e.index == index);
                    prop_assert!(first != second && touches(first) && touches(second));
                }
            }
        }
    }
}

#[test]
fn corpus_facts_and_verdicts_hold_on_generated_inputs() {
    for name in CORPUS {
        let r = validate_program(&corpus(name), &ValidateConfig { trials: 100, seed: 7, ..Default::default() });
        assert!(r.passed(), "{name}: {:#?}", r.failures);
        assert!(r.facts_checked >= 100, "{name}: {} fact checks", r.facts_checked);
    }
}

#[test]
fn loop_bounds_written_in_the_body_are_rejected() {
    let errs = parse("int i, n, k; n = 3; for (i = 0; i < n; i++) { if (i == 0) { n = 5; } k = k + 1; }").unwrap_err();
    assert!(errs[0].message.contains("not loop-invariant"), "{errs:?}");
}

#[test]
fn traps_are_reported_with_the_line() {
    let p = parse("param n;\nint i;\nint a[n];\nfor (i = 0; i <= n; i++) {\n  a[i] = i;\n}\n").unwrap();
    let m = Machine::new(&p, &BTreeMap::from([("n".to_string(), 4)])).unwrap();
    let err = m.run(&mut m.fresh_memory(), &BTreeSet::new()).unwrap_err();
    assert!(matches!(err, RunError::OutOfBounds { line: 5, .. }), "{err}");
}

#[test]
fn generator_covers_the_degenerate_and_large_cases() {
    let p = corpus("cg.knl");
    let g = InputGenerator::new(7);
    let mut zero_matrix = 0;
    let mut full_matrix = 0;
    let mut sizes = BTreeSet::new();
    for trial in 0..100 {
        let t = g.trial(&p, trial).unwrap();
        let a = t.memory.ints("a").unwrap();
        zero_matrix += a.iter().all(|&v| v == 0) as usize;
        full_matrix += a.iter().all(|&v| v != 0) as usize;
        for v in t.machine.params.values() {
            assert!((1..=200).contains(v));
            sizes.insert(*v);
        }
        assert_eq!(t.memory.ints("rowptr").unwrap().iter().sum::<i64>(), 0, "outputs start zeroed");
    }
    assert!(zero_matrix >= 25 && full_matrix >= 25, "{zero_matrix} {full_matrix}");
    assert!(sizes.iter().any(|&v| v <= 2) && sizes.iter().any(|&v| v >= 100), "{sizes:?}");
}

#[test]
fn generated_inputs_are_reproducible() {
    let p = corpus("fig4_blk.knl");
    let (a, b) = (InputGenerator::new(9).trial(&p, 5).unwrap(), InputGenerator::new(9).trial(&p, 5).unwrap());
    assert_eq!(a.memory, b.memory);
    assert_eq!(a.machine.params, b.machine.params);
    let c = InputGenerator::new(10).trial(&p, 5).unwrap();
    assert!(c.memory != a.memory || c.machine.params != a.machine.params);
}

#[test]
fn traced_loop_events_cover_every_iteration() {
    let p = parse("param n;\nint i;\nint a[n];\nfor (i = 0; i < n; i++) {\n  a[i] = i;\n}\n").unwrap();
    let m = Machine::new(&p, &BTreeMap::from([("n".to_string(), 6)])).unwrap();
    let trace = m.run(&mut m.fresh_memory(), &BTreeSet::from([LoopId(4)])).unwrap();
    let ev = &trace.events[&LoopId(4)];
    assert_eq!(ev.iter().map(|e| e.iteration).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    assert!(ev.iter().all(|e| e.write && e.index == e.iteration as usize));
    assert_eq!(trace.starts[&LoopId(4)], [0]);
}
