//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use subpar::cgen::{c_check_requested, compare_with_serial, openmp_available};
use subpar::dependence::{Decision, MissingRule, ProofRule, Verdict};
use subpar::facts::{injected, FactPayload, Property};
use subpar::frontend::LoopId;
use subpar::report::Analysis;
use subpar::symbolic::SymExpr;
use subpar::validate::{validate_program, FailureKind, ValidateConfig};

use common::{corpus, data, CORPUS};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn verdict(a: &Analysis, line: usize) -> Result<&Verdict, String> {
    a.verdict(LoopId(line)).ok_or_else(|| format!("no loop@{line}"))
}

fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<String>().replace("COLUMNLEN-1", "COLUMNLEN")
}

fn a1() -> Outcome {
    let t = Instant::now();
    let analysis = Analysis::new(corpus("cg.knl"));
    let trace = analysis.pipeline.trace_text();
    let elapsed = t.elapsed();
    let golden = std::fs::read_to_string(common::data_path("cg_trace.golden")).map_err(|e| e.to_string())?;
    let ours: Vec<String> = trace.lines().map(normalize).collect();
    for (k, want) in golden.lines().enumerate() {
        let got = ours.get(k).cloned().unwrap_or_default();
        ensure(
            got == normalize(want),
            format!("line {}: expected `{want}`, got `{}`", k + 1, trace.lines().nth(k).unwrap_or("")),
        )?;
    }
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("loops 3, 1, 13 match the golden listing in {elapsed:.2?}"))
}

fn a2() -> Outcome {
    let analysis = Analysis::new(corpus("cg.knl"));
    let rowptr: BTreeSet<String> =
        analysis.pipeline.facts.live().filter(|f| f.array == "rowptr").map(|f| f.to_string()).collect();
    let want = BTreeSet::from(["rowptr: [0:0], [0:0]".to_string(), "rowptr: [1:ROWLEN], Monotonic_inc".to_string()]);
    ensure(rowptr == want, format!("rowptr facts: {rowptr:?}"))?;
    Ok("rowptr: [1:ROWLEN], Monotonic_inc and rowptr[0] = [0:0], nothing else on rowptr".into())
}

fn a3() -> Outcome {
    let cg = Analysis::new(corpus("cg.knl"));
    let v = verdict(&cg, 18)?;
    ensure(
        v.decision == Decision::Parallel && v.rule == Some(ProofRule::MonotonicRanges) && !v.peeled,
        format!("cg loop@18: {} {:?} peeled={}", v.decision, v.rule, v.peeled),
    )?;
    let rowstr = Analysis::new(corpus("fig2a_rowstr.knl"));
    let v = verdict(&rowstr, 24)?;
    ensure(v.is_parallel(), format!("fig2a loop@24: {} {:?}", v.decision, v.reason))?;
    let inj = Analysis::new(corpus("fig1_injective.knl"));
    let v = verdict(&inj, 24)?;
    ensure(v.rule == Some(ProofRule::InjectiveWrite), format!("fig1 loop@24: {} {:?}", v.decision, v.reason))?;
    Ok("cg loop@18 MonotonicRanges (no peeling), fig2a loop@24 parallel, fig1 loop@24 InjectiveWrite".into())
}

fn a4() -> Outcome {
    let t = Instant::now();
    let (mut facts, mut loops) = (0, 0);
    for name in CORPUS {
        let r = validate_program(&corpus(name), &ValidateConfig { trials: 100, seed: 7, ..Default::default() });
        ensure(r.passed(), format!("{name}: {}", r.failures.first().map(|f| f.to_string()).unwrap_or_default()))?;
        facts += r.facts_checked;
        loops += r.loops_checked;
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} kernels x 100 trials, {facts} fact checks, {loops} parallel/serial loops traced, {elapsed:.2?}",
        CORPUS.len()
    ))
}

fn a5() -> Outcome {
    let mutated = data("cg_mutated.knl");
    let a = Analysis::new(mutated.clone());
    ensure(
        !a.pipeline.facts.entries.iter().any(|s| s.fact.property() == Some(Property::MonotonicInc)),
        "mutated cg derived Monotonic_inc",
    )?;
    let v = verdict(&a, 18)?;
    ensure(v.decision == Decision::Unknown, format!("mutated loop@18 is {}", v.decision))?;
    let forced =
        injected("rowptr", SymExpr::lit(1), SymExpr::var("ROWLEN"), FactPayload::Property(Property::MonotonicInc));
    let r = validate_program(
        &mutated,
        &ValidateConfig { trials: 100, seed: 7, injected: vec![forced], ..Default::default() },
    );
    let counterexample = r.failures.iter().find(|f| f.kind == FailureKind::Fact);
    ensure(counterexample.is_some(), "injected Monotonic_inc was not refuted")?;
    let b = Analysis::new(data("noninjective.knl"));
    let v = verdict(&b, 11)?;
    ensure(
        v.decision == Decision::Unknown || (v.decision == Decision::Serial && v.witness.is_some()),
        format!("a[b[i]] with non-injective b: {}", v.decision),
    )?;
    Ok(format!(
        "mutated cg: no Monotonic_inc, loop@18 unknown, forced fact refuted ({}); non-injective a[b[i]] {}",
        counterexample.unwrap().message,
        v.decision
    ))
}

fn a6() -> Outcome {
    let expect = [
        ("fig3_jmatch.knl", 16, MissingRule::SubsetInjectivity),
        ("fig4_blk.knl", 28, MissingRule::SimultaneousMonotonicInjective),
        ("fig5_tree.knl", 15, MissingRule::SimultaneousInjectivity),
        ("fig6_mt_to_id.knl", 15, MissingRule::DisjointInjectiveExpressions),
    ];
    for (name, line, rule) in expect {
        let a = Analysis::new(corpus(name));
        let v = verdict(&a, line)?;
        ensure(v.decision == Decision::Unknown, format!("{name} loop@{line}: {}", v.decision))?;
        ensure(v.missing_rule == Some(rule), format!("{name} loop@{line}: {:?}", v.missing_rule))?;
        ensure(
            v.reason.as_deref().is_some_and(|r| r.contains(rule.describe())),
            format!("{name}: reason {:?}", v.reason),
        )?;
    }
    Ok("fig3-fig6 target loops unknown, each naming its missing inference rule".into())
}

fn a7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = match c_check_requested() {
        Some(false) => false,
        Some(true) => {
            ensure(openmp_available(dir.path()), "SUBPAR_C_CHECK=1 but `cc -fopenmp` does not work")?;
            true
        }
        None => openmp_available(dir.path()),
    };
    if !run {
        return Ok("speedups not reproduced (out of scope); C transliteration check skipped: no OpenMP compiler".into());
    }
    let n = compare_with_serial(&Analysis::new(corpus("cg.knl")), 8, 11, dir.path())?;
    Ok(format!(
        "speedups not reproduced (out of scope); annotated cg ({n} pragma) compiled with cc -fopenmp matches serial output bit-exactly on 8 inputs"
    ))
}

fn main() {
    let criteria: [(&str, Check); 7] =
        [("A1", a1), ("A2", a2), ("A3", a3), ("A4", a4), ("A5", a5), ("A6", a6), ("A7", a7)];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("{name} PASS  {detail}"),
            Err(why) => {
                failed += 1;
                println!("{name} FAIL  {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
