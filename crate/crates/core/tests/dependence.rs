mod common;

use proptest::prelude::*;
use subpar::dependence::{classify_loop, classify_program, Decision, MissingRule, ProofRule, Verdict};
use subpar::facts::{injected, FactPayload, Property};
use subpar::frontend::{parse, LoopId, Program};
use subpar::pipeline::run_pipeline;
use subpar::symbolic::SymExpr;
use subpar::validate::{validate_program, FailureKind, ValidateConfig};

use common::{corpus, data, CORPUS};

fn verdicts(p: &Program) -> Vec<Verdict> {
    classify_program(p, &run_pipeline(p))
}

fn at(vs: &[Verdict], line: usize) -> &Verdict {
    vs.iter().find(|v| v.loop_id == LoopId(line)).unwrap_or_else(|| panic!("no loop@{line}"))
}

#[test]
fn cg_product_loop_parallel_by_monotonic_ranges() {
    let vs = verdicts(&corpus("cg.knl"));
    let v = at(&vs, 18);
    assert_eq!(v.decision, Decision::Parallel);
    assert_eq!(v.rule, Some(ProofRule::MonotonicRanges));
    assert!(!v.peeled);
    assert_eq!(v.private, ["j", "j1"]);
}

#[test]
fn rowstr_outer_loop_parallel() {
    let vs = verdicts(&corpus("fig2a_rowstr.knl"));
    let v = at(&vs, 24);
    assert_eq!(v.decision, Decision::Parallel, "{:?}", v.reason);
    assert_eq!(v.rule, Some(ProofRule::MonotonicRanges));
}

#[test]
fn injective_kernel_parallel_by_injective_write() {
    let vs = verdicts(&corpus("fig1_injective.knl"));
    let v = at(&vs, 24);
    assert_eq!(v.decision, Decision::Parallel, "{:?}", v.reason);
    assert_eq!(v.rule, Some(ProofRule::InjectiveWrite));
    assert!(v.facts_used.iter().any(|f| f.starts_with("mt_to_id")), "{:?}", v.facts_used);
}

#[test]
fn mutated_cg_product_loop_not_parallel() {
    let vs = verdicts(&data("cg_mutated.knl"));
    assert_eq!(at(&vs, 18).decision, Decision::Unknown);
}

#[test]
fn non_injective_subscript_never_parallel() {
    let vs = verdicts(&data("noninjective.knl"));
    let v = at(&vs, 11);
    assert_ne!(v.decision, Decision::Parallel);
    if v.decision == Decision::Serial {
        assert!(v.witness.is_some());
    }
}

#[test]
fn serial_verdicts_carry_witnesses_the_oracle_reproduces() {
    let p = data("serial.knl");
    let vs = verdicts(&p);
    for line in [7, 10] {
        let v = at(&vs, line);
        assert_eq!(v.decision, Decision::Serial, "loop@{line}: {:?}", v.reason);
        assert!(v.witness.is_some());
    }
    let r = validate_program(&p, &ValidateConfig { trials: 20, seed: 5, ..Default::default() });
    assert!(r.passed(), "{:?}", r.failures);
}

#[test]
fn out_of_scope_kernels_name_the_missing_rule() {
    let expect = [
        ("fig2b_nzloc.knl", 38, MissingRule::MonotonicDifference),
        ("fig3_jmatch.knl", 16, MissingRule::SubsetInjectivity),
        ("fig4_blk.knl", 28, MissingRule::SimultaneousMonotonicInjective),
        ("fig5_tree.knl", 15, MissingRule::SimultaneousInjectivity),
        ("fig6_mt_to_id.knl", 15, MissingRule::DisjointInjectiveExpressions),
    ];
    for (name, line, rule) in expect {
        let vs = verdicts(&corpus(name));
        let v = at(&vs, line);
        assert_eq!(v.decision, Decision::Unknown, "{name}");
        assert_eq!(v.missing_rule, Some(rule), "{name}: {:?}", v.reason);
        assert!(v.reason.as_deref().unwrap().contains(rule.describe()), "{name}");
    }
    let v = verdicts(&corpus("fig3_jmatch.knl"));
    assert!(at(&v, 16).reason.as_deref().unwrap().contains("no inference rule for subset injectivity"));
}

#[test]
fn peeled_loops_are_independent_after_the_first_iteration() {
    let src = "param n;\nint i;\nint a[n + 10];\nint c[n];\nfor (i = 0; i < n; i++) {\n  if (i == 0) {\n    a[c[0]] = 1;\n  } else {\n    a[i] = 2;\n  }\n}\n";
    let p = parse(src).unwrap();
    let v = &verdicts(&p)[0];
    assert!(v.is_parallel() && v.peeled);
    let r = validate_program(&p, &ValidateConfig { trials: 40, seed: 2, ..Default::default() });
    assert!(r.passed(), "{:?}", r.failures);
}

/// Index array fillers and candidate bodies for generated kernels. Every
/// combination stays in bounds for nonnegative inputs.
fn kernel(filler: usize, body: usize, k: i64, c: i64, d: i64, s: i64) -> String {
    let fill = match filler {
        0 => format!("for (i = 0; i < n + 2; i++) {{ b[i] = {k} * i + {c}; }}"),
        1 => format!("b[0] = {c};\nfor (i = 1; i < n + 2; i++) {{ b[i] = b[i - 1] + {k}; }}"),
        2 => "for (i = 0; i < n + 2; i++) { b[i] = m[i][0]; }".to_string(),
        3 => "for (i = 0; i < n + 2; i++) { b[i] = 3 * n + 6 - 2 * i; }".to_string(),
        _ => format!(
            "for (i = 0; i < n + 1; i++) {{\n  x = 0;\n  for (j = 0; j < 2; j++) {{ if (m[i][j] != 0) {{ x = x + 1; }} }}\n  r[i] = x;\n}}\n\
             b[0] = {c};\nfor (i = 1; i < n + 2; i++) {{ b[i] = b[i - 1] + r[i - 1]; }}"
        ),
    };
    let cand = match body {
        0 => format!("a[b[i] + {d}] = i;"),
        1 => format!("x = b[i];\n  a[x * {s} + {d}] = a[x * {s} + {d}] + 1;"),
        2 => format!("for (j = b[i]; j < b[i + 1]; j++) {{ a[j + {d}] = i; }}"),
        3 => format!(
            "if (i == 0) {{ j1 = 0; }} else {{ j1 = b[i - 1]; }}\n  for (j = j1; j < b[i]; j++) {{ a[j + {d}] = j; }}"
        ),
        4 => format!("a[b[i] + {d}] = a[b[i + 1] + {d}] + 1;"),
        _ => format!("a[i + {d}] = a[b[i]] + 1;"),
    };
    format!(
        "param n;\nint i, j, x, j1;\nint m[n + 2][2];\nint b[n + 2];\nint r[n + 2];\nint a[40 * n + 80];\n{fill}\nfor (i = 0; i < n; i++) {{\n  {cand}\n}}\n"
    )
}

fn candidate(p: &Program) -> LoopId {
    p.loops().iter().map(|l| l.id).max().unwrap()
}

#[test]
fn generated_kernels_reach_both_proof_rules() {
    let check = |src: String, rule: ProofRule| {
        let p = parse(&src).unwrap();
        let vs = verdicts(&p);
        let v = at(&vs, candidate(&p).0);
        assert_eq!((v.decision, v.rule), (Decision::Parallel, Some(rule)), "{src}\n{:?}", v.reason);
    };
    check(kernel(4, 2, 0, 0, 1, 1), ProofRule::MonotonicRanges);
    check(kernel(1, 2, 0, 2, 1, 1), ProofRule::MonotonicRanges);
    check(kernel(0, 0, 1, 0, 0, 1), ProofRule::InjectiveWrite);
    check(kernel(1, 1, 1, 0, 3, 2), ProofRule::InjectiveWrite);
    let p = parse(&kernel(2, 0, 0, 0, 0, 1)).unwrap();
    assert_eq!(at(&verdicts(&p), candidate(&p).0).decision, Decision::Unknown);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn verdicts_are_confirmed_by_the_oracle(
        filler in 0usize..5, body in 0usize..6, k in 0i64..4, c in 0i64..4, d in 0i64..4, s in 1i64..3,
        seed in 0u64..10_000,
    ) {
        let src = kernel(filler, body, k, c, d, s);
        let p = parse(&src).unwrap();
        let r = validate_program(&p, &ValidateConfig { trials: 24, seed, ..Default::default() });
        prop_assert!(!r.failures.iter().any(|f| f.kind == FailureKind::Run), "{src}\n{:?}", r.failures);
        prop_assert!(r.passed(), "{src}\n{:?}", r.failures);
    }

    #[test]
    fn more_facts_never_lose_parallelism(
        filler in 0usize..5, body in 0usize..6, k in 0i64..4, c in 0i64..4, d in 0i64..4, s in 1i64..3,
        mask in any::<u64>(),
    ) {
        let src = kernel(filler, body, k, c, d, s);
        let p = parse(&src).unwrap();
        let pipeline = run_pipeline(&p);
        let id = candidate(&p);
        let l = p.find_loop(id).unwrap();
        let full = pipeline.facts_at(id);
        let sub: Vec<_> = full.iter().enumerate().filter(|(n, _)| mask >> (n % 64) & 1 == 1).map(|(_, f)| f.clone()).collect();
        let mut extra = full.clone();
        extra.push(injected("b", SymExpr::lit(0), SymExpr::var("n"), FactPayload::Property(Property::MonotonicInc)));
        let rank = |d: Decision| match d { Decision::Parallel => 2, Decision::Unknown => 1, Decision::Serial => 0 };
        let (vs, vf, ve) = (classify_loop(&p, l, &sub), classify_loop(&p, l, &full), classify_loop(&p, l, &extra));
        if vs.is_parallel() {
            prop_assert!(vf.is_parallel(), "{src}\nsubset {:?}\nfull {:?}", vs.reason, vf.reason);
        }
        if vf.is_parallel() {
            prop_assert!(ve.is_parallel(), "{src}\n{:?}", ve.reason);
        }
        prop_assert!(rank(vs.decision) != 0 || rank(vf.decision) != 2, "{src}: serial with fewer facts but parallel with more");
    }
}

#[test]
fn corpus_verdicts_are_monotone_in_facts() {
    for name in CORPUS {
        let p = corpus(name);
        let pipeline = run_pipeline(&p);
        for stmt in &p.body {
            let subpar::frontend::StmtKind::For(l) = &stmt.kind else { continue };
            let full = pipeline.facts_at(l.id);
            let with_all = classify_loop(&p, l, &full).is_parallel();
            for drop in 0..full.len() {
                let mut sub = full.clone();
                sub.remove(drop);
                if classify_loop(&p, l, &sub).is_parallel() {
                    assert!(with_all, "{name} {}: dropping {} made it parallel", l.id, full[drop]);
                }
            }
        }
    }
}
