mod common;

use subpar::cgen::{c_check_requested, compare_with_serial, openmp_available};
use subpar::report::Analysis;

#[test]
fn annotated_cg_matches_serial_in_c() {
    let dir = tempfile::tempdir().unwrap();
    match c_check_requested() {
        Some(false) => return,
        Some(true) => assert!(openmp_available(dir.path()), "SUBPAR_C_CHECK=1 but `cc -fopenmp` does not work"),
        None if !openmp_available(dir.path()) => {
            eprintln!("skipped: no OpenMP C compiler");
            return;
        }
        None => {}
    }
    let analysis = Analysis::new(common::corpus("cg.knl"));
    assert_eq!(compare_with_serial(&analysis, 8, 11, dir.path()), Ok(1));
}
