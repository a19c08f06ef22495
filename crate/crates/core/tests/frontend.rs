mod common;

use std::collections::BTreeMap;

use subpar::frontend::{annotate, parse, pretty_print, LoopId, StmtKind};
use subpar::report::Analysis;

use common::{corpus, corpus_path, CORPUS};

#[test]
fn corpus_round_trips_through_the_printer() {
    for name in CORPUS {
        let p = corpus(name);
        let printed = pretty_print(&p);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{name}: {e:?}\n{printed}"));
        assert!(p.same_shape(&again), "{name}");
        assert_eq!(pretty_print(&again), printed, "{name}: printing is not a fixpoint");
    }
}

#[test]
fn annotated_sources_parse_back_with_pragmas_only_on_parallel_loops() {
    for name in CORPUS {
        let a = Analysis::new(corpus(name));
        let text = a.annotated();
        let again = parse(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert!(a.program.same_shape(&again), "{name}");
        let pragmas = text.lines().filter(|l| l.trim_start().starts_with("#pragma omp parallel for")).count();
        assert_eq!(pragmas, a.pragma_loops().len(), "{name}");
        let without: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with("#pragma")).collect();
        assert_eq!(without.join("\n") + "\n", pretty_print(&a.program), "{name}");
    }
}

#[test]
fn cg_pragma_matches_the_expected_clause() {
    let a = Analysis::new(corpus("cg.knl"));
    assert_eq!(a.pragma_loops(), BTreeMap::from([(LoopId(18), true)]));
    assert!(a.annotated().contains("#pragma omp parallel for private(j,j1)\nfor (i = 0; i < ROWLEN + 1; i++) {"));
}

#[test]
fn annotate_rejects_unknown_loops() {
    let p = corpus("cg.knl");
    assert!(annotate(&p, &BTreeMap::from([(LoopId(2), true)])).is_err());
}

#[test]
fn loop_ids_are_source_lines() {
    let src = std::fs::read_to_string(corpus_path("cg.knl")).unwrap();
    let p = parse(&src).unwrap();
    for l in p.loops() {
        let line = src.lines().nth(l.id.0 - 1).unwrap();
        assert!(line.trim_start().starts_with("for"), "{}: {line}", l.id);
    }
}

#[test]
fn unsupported_constructs_are_rejected_with_spans() {
    let cases = [
        ("int i;\nwhile (i < 3) { i = i + 1; }", "while-loop", (2, 1)),
        ("int i;\nint *p;", "pointer", (2, 5)),
        ("int i;\ni = f(3);", "function call", (2, 5)),
        ("param n; int i; int a[n];\nfor (i = 0; i < n; i += 2) { a[i] = 1; }", "non-unit stride", (2, 20)),
    ];
    for (src, what, (line, col)) in cases {
        let errs = parse(src).unwrap_err();
        assert_eq!(errs.len(), 1, "{src}: {errs:?}");
        assert!(errs[0].message.contains(what), "{src}: {errs:?}");
        assert_eq!((errs[0].span.line, errs[0].span.col), (line, col), "{src}");
    }
}

#[test]
fn specialization_replaces_parameters() {
    let p = corpus("cg.knl");
    let s = p.specialize(&BTreeMap::from([("COLUMNLEN".to_string(), 4)])).unwrap();
    assert_eq!(s.params, ["ROWLEN"]);
    assert!(!pretty_print(&s).contains("COLUMNLEN"));
    assert!(p.specialize(&BTreeMap::from([("i".to_string(), 4)])).is_err());
    let StmtKind::For(l) = &s.body[0].kind else { panic!() };
    assert_eq!(l.id, LoopId(1));
}
