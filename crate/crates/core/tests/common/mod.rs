#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use subpar::frontend::{parse, Program};
use subpar::oracle::Memory;
use subpar::symbolic::{Atom, SymExpr};

pub const CORPUS: [&str; 8] = [
    "cg.knl",
    "fig1_injective.knl",
    "fig2a_rowstr.knl",
    "fig2b_nzloc.knl",
    "fig3_jmatch.knl",
    "fig4_blk.knl",
    "fig5_tree.knl",
    "fig6_mt_to_id.knl",
];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).join(name)
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data")).join(name)
}

pub fn corpus(name: &str) -> Program {
    parse(&std::fs::read_to_string(corpus_path(name)).unwrap()).unwrap()
}

pub fn data(name: &str) -> Program {
    parse(&std::fs::read_to_string(data_path(name)).unwrap()).unwrap()
}

/// Value of `e` with parameters from `params`, loop indices and λ from
/// `start`, and array elements read from `start` by flat index.
pub fn eval_at(e: &SymExpr, params: &BTreeMap<String, i64>, start: &Memory) -> Option<i64> {
    e.eval(&|a| match a {
        Atom::Var(p) => params.get(p).copied().or_else(|| start.scalar(p)),
        Atom::LoopIndex(v) | Atom::Lambda(v) | Atom::BigLambda(v) => start.scalar(v),
        Atom::Elem { array, index } => {
            let k = index.eval(&|b| match b {
                Atom::Var(p) => params.get(p).copied(),
                Atom::LoopIndex(v) | Atom::Lambda(v) => start.scalar(v),
                _ => None,
            })?;
            let data = start.ints(array)?;
            usize::try_from(k).ok().and_then(|k| data.get(k).copied())
        }
        _ => None,
    })
}
