//! C transliteration of a kernel, for compiling the annotated output with a
//! real OpenMP compiler.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use crate::frontend::{pragma_text, render, Decl, ElemType, LoopId, Program};
use crate::oracle::{ArrayData, InputGenerator, Memory};
use crate::report::Analysis;

/// A complete C program: parameters as macros, the initial `memory` as
/// static initializers, the body inside `main` with `pragmas` above the
/// given loops, then every array printed one element per line.
pub fn c_source(
    program: &Program,
    params: &BTreeMap<String, i64>,
    memory: &Memory,
    pragmas: &BTreeMap<LoopId, String>,
) -> String {
    let mut out = String::from("#include <stdio.h>\n\n");
    for (k, v) in params {
        let _ = writeln!(out, "#define {k} {v}LL");
    }
    out.push('\n');
    for d in &program.decls {
        match d {
            Decl::Scalar { name, .. } => {
                let _ = writeln!(out, "static long long {name} = {};", memory.scalar(name).unwrap_or_default());
            }
            Decl::Array { name, .. } => {
                let a = memory.array(name).expect("memory matches program");
                let dims: String = a.dims.iter().map(|d| format!("[{}]", d.max(&1))).collect();
                let (ty, init): (_, Vec<String>) = match &a.data {
                    ArrayData::Int(v) => ("long long", v.iter().map(|x| format!("{x}LL")).collect()),
                    ArrayData::Float(v) => ("double", v.iter().map(|x| format!("{x:?}")).collect()),
                };
                // Nested braces are not needed: a flat list fills row-major.
                let _ = writeln!(
                    out,
                    "static {ty} {name}{dims} = {{{}}};",
                    if init.is_empty() { "0".into() } else { init.join(",") }
                );
            }
        }
    }
    let body = Program { params: Vec::new(), decls: Vec::new(), body: program.body.clone() };
    let text = render(&body, &|id| pragmas.get(&id).cloned());
    out.push_str("\nint main(void) {\n");
    for line in text.lines() {
        let _ = writeln!(out, "    {line}");
    }
    for d in &program.decls {
        if let Decl::Array { name, elem, .. } = d {
            let a = memory.array(name).expect("memory matches program");
            let fmt = if *elem == ElemType::Float { "%.17g" } else { "%lld" };
            let _ = writeln!(
                out,
                "    for (long long k = 0; k < {n}; k++) printf(\"{name} %lld {fmt}\\n\", k, ((({ty} *){name})[k]));",
                n = a.len(),
                ty = if *elem == ElemType::Float { "double" } else { "long long" },
            );
        }
    }
    out.push_str("    return 0;\n}\n");
    out
}

#[derive(Debug, thiserror::Error)]
pub enum CError {
    #[error("compiler failed: {0}")]
    Compile(String),
    #[error("program failed: {0}")]
    Run(String),
    #[error("unreadable output line `{0}`")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compiles `source` in `dir` with `cc` (with `-fopenmp` when asked), runs it
/// and returns the printed arrays.
pub fn compile_and_run(
    source: &str,
    dir: &Path,
    openmp: bool,
    threads: usize,
) -> Result<BTreeMap<String, Vec<String>>, CError> {
    let name = if openmp { "kernel_omp" } else { "kernel_serial" };
    let src = dir.join(format!("{name}.c"));
    let exe = dir.join(name);
    std::fs::write(&src, source)?;
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    let mut cmd = Command::new(cc);
    cmd.arg("-O2").arg("-o").arg(&exe).arg(&src);
    if openmp {
        cmd.arg("-fopenmp");
    }
    let out = cmd.output()?;
    if !out.status.success() {
        return Err(CError::Compile(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let out = Command::new(&exe).env("OMP_NUM_THREADS", threads.to_string()).output()?;
    if !out.status.success() {
        return Err(CError::Run(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let mut arrays: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(_), Some(v)) => arrays.entry(a.to_string()).or_default().push(v.to_string()),
            _ => return Err(CError::Output(line.to_string())),
        }
    }
    Ok(arrays)
}

/// Arrays of `memory` rendered the way the C program prints them.
pub fn expected_output(memory: &Memory) -> BTreeMap<String, Vec<String>> {
    memory
        .array_names()
        .iter()
        .map(|n| {
            let a = memory.array(n).expect("listed");
            let vals = match &a.data {
                ArrayData::Int(v) => v.iter().map(|x| x.to_string()).collect(),
                ArrayData::Float(v) => v.iter().map(|x| format!("{x}")).collect(),
            };
            (n.clone(), vals)
        })
        .collect()
}

/// True when C's `%.17g` rendering and Rust's shortest rendering denote
/// the same value, bit for bit.
pub fn same_value(c: &str, ours: &str) -> bool {
    match (c.parse::<i64>(), ours.parse::<i64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => matches!((c.parse::<f64>(), ours.parse::<f64>()), (Ok(a), Ok(b)) if a.to_bits() == b.to_bits()),
    }
}

/// Whether to run the C comparison: `SUBPAR_C_CHECK=0` disables it, `1`
/// requires it, and otherwise it runs when `cc -fopenmp` works.
pub fn c_check_requested() -> Option<bool> {
    match std::env::var("SUBPAR_C_CHECK").as_deref() {
        Ok("0") => Some(false),
        Ok("1") => Some(true),
        _ => None,
    }
}

pub fn openmp_available(dir: &Path) -> bool {
    compile_and_run("int main(void) { return 0; }\n", dir, true, 1).is_ok()
}

/// Compiles the program serially and with the pragmas of
/// [`Analysis::pragma_loops`], runs both on `trials` generated inputs and
/// compares them with each other and with the interpreter. Returns the
/// number of annotated loops.
pub fn compare_with_serial(analysis: &Analysis, trials: usize, seed: u64, dir: &Path) -> Result<usize, String> {
    let pragmas: BTreeMap<LoopId, String> = analysis
        .pragma_loops()
        .keys()
        .map(|id| (*id, pragma_text(analysis.program.find_loop(*id).expect("pragma loops exist"))))
        .collect();
    let generator = InputGenerator::new(seed);
    for trial in 0..trials {
        let input = generator.trial(&analysis.program, trial).map_err(|e| e.to_string())?;
        let params = input.machine.params.clone();
        let mut after = input.memory.clone();
        input.machine.run(&mut after, &BTreeSet::new()).map_err(|e| e.to_string())?;
        let run = |pragmas: &BTreeMap<LoopId, String>, openmp: bool, threads: usize| {
            compile_and_run(&c_source(&analysis.program, &params, &input.memory, pragmas), dir, openmp, threads)
                .map_err(|e| e.to_string())
        };
        let serial = run(&BTreeMap::new(), false, 1)?;
        let parallel = run(&pragmas, true, 4)?;
        if let Some(d) = diff(&serial, &expected_output(&after)) {
            return Err(format!("trial {trial} {params:?}: serial C differs from the interpreter: {d}"));
        }
        if let Some(d) = diff(&parallel, &serial) {
            return Err(format!("trial {trial} {params:?}: OpenMP build differs from serial: {d}"));
        }
    }
    Ok(pragmas.len())
}

fn diff(a: &BTreeMap<String, Vec<String>>, b: &BTreeMap<String, Vec<String>>) -> Option<String> {
    if a.keys().ne(b.keys()) {
        return Some(format!("arrays {:?} vs {:?}", a.keys(), b.keys()));
    }
    for (name, xs) in a {
        let ys = &b[name];
        if xs.len() != ys.len() {
            return Some(format!("{name}: {} vs {} elements", xs.len(), ys.len()));
        }
        if let Some(k) = (0..xs.len()).find(|&k| !same_value(&xs[k], &ys[k])) {
            return Some(format!("{name}[{k}]: {} vs {}", xs[k], ys[k]));
        }
    }
    None
}
