//! Command-line driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::ErrorKind;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::dependence::Verdict;
use crate::frontend::{parse, Diagnostic, LoopId, Program, Span};
use crate::oracle::{InputGenerator, Memory};
use crate::report::{Analysis, Report};
use crate::validate::{validate_program, ValidateConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "subpar", version, about = "Parallelizes loops with subscripted subscripts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze kernels and write a JSON report per file.
    Analyze(AnalyzeArgs),
    /// Check the analysis results against the interpreter on generated inputs.
    Validate(ValidateArgs),
    /// Run the reference interpreter.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Also write `<file>.par.knl` with OpenMP pragmas.
    #[arg(long)]
    pub annotate: bool,
    /// Report destination: a file for a single input, a directory for
    /// several, or `-` for stdout. Default `<file>.report.json`.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Print the Phase 1 / Phase 2 listing of every loop.
    #[arg(long)]
    pub trace_aggregation: bool,
    /// Print the proof trace of one loop (`loop@18` or `18`).
    #[arg(long, value_name = "LOOP-ID")]
    pub explain: Option<LoopId>,
    /// Fix parameters before analysis.
    #[arg(long = "params", alias = "param", value_name = "K=V", value_parser = parse_kv, value_delimiter = ',')]
    pub params: Vec<(String, i64)>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold parameters at fixed values in every trial.
    #[arg(long = "params", alias = "param", value_name = "K=V", value_parser = parse_kv, value_delimiter = ',')]
    pub params: Vec<(String, i64)>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Execute a kernel on generated inputs and print the final memory.
    Run(OracleArgs),
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub path: PathBuf,
    #[arg(long = "param", alias = "params", value_name = "K=V", value_parser = parse_kv, value_delimiter = ',')]
    pub params: Vec<(String, i64)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial number; selects the parameter draw and matrix density.
    #[arg(long, default_value_t = 2)]
    pub trial: usize,
    #[arg(long, value_enum, default_value_t = Dump::Text)]
    pub dump: Dump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dump {
    Text,
    Json,
}

fn parse_kv(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected K=V, got `{s}`"))?;
    let v = v.trim().parse::<i64>().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// What one file contributed to the run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn fail(path: &Path, message: impl std::fmt::Display) -> Outcome {
        Outcome { stdout: String::new(), stderr: format!("{}: {message}\n", path.display()), code: EXIT_DIAGNOSTICS }
    }

    fn diagnostics(path: &Path, diags: &[Diagnostic]) -> Outcome {
        let file = path.display().to_string();
        let stderr = diags.iter().map(|d| d.render(&file) + "\n").collect();
        Outcome { stdout: String::new(), stderr, code: EXIT_DIAGNOSTICS }
    }
}

pub fn run(cli: Cli) -> i32 {
    let outcomes = match cli.command {
        Command::Analyze(args) => {
            let many = args.paths.len() > 1;
            per_file(&args.paths, |p| analyze_file(p, &args, many))
        }
        Command::Validate(args) => per_file(&args.paths, |p| validate_file(p, &args)),
        Command::Oracle(OracleCommand::Run(args)) => vec![guarded(|| oracle_run(&args))],
    };
    let mut code = EXIT_OK;
    for o in outcomes {
        print!("{}", o.stdout);
        eprint!("{}", o.stderr);
        code = code.max(o.code);
    }
    code
}

fn per_file(paths: &[PathBuf], f: impl Fn(&Path) -> Outcome + Sync) -> Vec<Outcome> {
    paths.par_iter().map(|p| guarded(|| f(p))).collect()
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| e.downcast_ref::<&str>().copied())
            .unwrap_or("unknown panic");
        Outcome { stdout: String::new(), stderr: format!("internal error: {msg}\n"), code: EXIT_INTERNAL }
    })
}

fn load(path: &Path, params: &[(String, i64)]) -> Result<Program, Outcome> {
    let src = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Outcome::fail(path, "file not found"),
        _ => Outcome::fail(path, e),
    })?;
    let program = parse(&src).map_err(|d| Outcome::diagnostics(path, &d))?;
    let values: BTreeMap<String, i64> = params.iter().cloned().collect();
    program.specialize(&values).map_err(|m| Outcome::diagnostics(path, &[Diagnostic::new(Span::new(1, 1), m)]))
}

fn report_path(path: &Path, args: &AnalyzeArgs, many: bool) -> Option<PathBuf> {
    match &args.report {
        Some(r) if r.as_os_str() == "-" => None,
        Some(r) if many => {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            Some(r.join(format!("{stem}.report.json")))
        }
        Some(r) => Some(r.clone()),
        None => Some(path.with_extension("report.json")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn analyze_file(path: &Path, args: &AnalyzeArgs, many: bool) -> Outcome {
    let file = path.display().to_string();
    let dest = report_path(path, args, many);
    let program = match load(path, &args.params) {
        Ok(p) => p,
        Err(mut o) => {
            // A file that exists but does not parse still gets a report.
            if o.code == EXIT_DIAGNOSTICS && path.exists() {
                let diags = parse(&std::fs::read_to_string(path).unwrap_or_default()).err().unwrap_or_default();
                let json = Report::from_diagnostics(&file, diags).to_json();
                match &dest {
                    Some(d) => {
                        if let Err(e) = write_file(d, &json) {
                            o.stderr.push_str(&format!("{e}\n"));
                        }
                    }
                    None => o.stdout.push_str(&json),
                }
            }
            return o;
        }
    };
    let analysis = Analysis::new(program);
    let mut out = Outcome::default();
    let json = analysis.report(&file).to_json();
    match &dest {
        Some(d) => {
            if let Err(e) = write_file(d, &json) {
                return Outcome::fail(path, e);
            }
        }
        None => out.stdout.push_str(&json),
    }
    if dest.is_some() {
        let _ = writeln!(out.stdout, "{file}");
        for v in &analysis.verdicts {
            let _ = writeln!(out.stdout, "  {}", summary_line(v));
        }
    }
    if args.annotate {
        // Pragmas go on the source as written, not the specialized program.
        let annotated = if args.params.is_empty() {
            analysis.annotated()
        } else {
            let original = std::fs::read_to_string(path).ok().and_then(|s| parse(&s).ok());
            match original {
                Some(p) => crate::frontend::annotate(&p, &analysis.pragma_loops()).expect("same loops"),
                None => analysis.annotated(),
            }
        };
        if let Err(e) = write_file(&path.with_extension("par.knl"), &annotated) {
            return Outcome::fail(path, e);
        }
    }
    if args.trace_aggregation {
        out.stdout.push_str(&analysis.pipeline.trace_text());
    }
    if let Some(id) = args.explain {
        match analysis.verdict(id) {
            Some(v) => out.stdout.push_str(&explain(v)),
            None => {
                let _ = writeln!(out.stderr, "{file}: no loop {id}");
                out.code = EXIT_DIAGNOSTICS;
            }
        }
    }
    out
}

fn summary_line(v: &Verdict) -> String {
    let mut s = format!("{} {}", v.loop_id, v.decision);
    if let Some(r) = v.rule {
        let _ = write!(s, " {r}");
    }
    if v.peeled {
        s.push_str(" (first iteration peeled)");
    }
    if v.is_parallel() && !v.private.is_empty() {
        let _ = write!(s, " private({})", v.private.join(","));
    }
    if let Some(r) = &v.reason {
        let _ = write!(s, ": {r}");
    }
    s
}

/// Human-readable proof trace of one verdict.
pub fn explain(v: &Verdict) -> String {
    let mut s = format!("{}\n", summary_line(v));
    for (n, step) in v.trace.iter().enumerate() {
        let _ = write!(s, "  {:>3}. [{}] {} => {}", n + 1, step.context, step.query, step.outcome);
        if !step.facts.is_empty() {
            let _ = write!(s, "  using {}", step.facts.join("; "));
        }
        s.push('\n');
    }
    if !v.facts_used.is_empty() {
        let _ = writeln!(s, "  facts used: {}", v.facts_used.join("; "));
    }
    if let Some(w) = &v.witness {
        let _ = writeln!(
            s,
            "  witness: {}[{}] touched by iterations {} and {}",
            w.array, w.location, w.iterations.0, w.iterations.1
        );
    }
    if let Some(m) = v.missing_rule {
        let _ = writeln!(s, "  missing rule: {m}");
    }
    s
}

fn validate_file(path: &Path, args: &ValidateArgs) -> Outcome {
    let program = match load(path, &[]) {
        Ok(p) => p,
        Err(o) => return o,
    };
    if let Some((k, _)) = args.params.iter().find(|(k, _)| !program.is_param(k)) {
        return Outcome::fail(path, format!("`{k}` is not a parameter"));
    }
    let config = ValidateConfig {
        trials: args.trials,
        seed: args.seed,
        fixed_params: args.params.iter().cloned().collect(),
        ..Default::default()
    };
    let r = validate_program(&program, &config);
    let mut out = Outcome::default();
    let file = path.display();
    for w in &r.warnings {
        let _ = writeln!(out.stderr, "{file}: warning: {w}");
    }
    let status = if r.passed() { "ok" } else { "FAILED" };
    let _ = writeln!(
        out.stdout,
        "{file}: {status} ({} trials, seed {}, {} fact checks, {} loop checks)",
        r.trials, r.seed, r.facts_checked, r.loops_checked
    );
    for f in &r.failures {
        let _ = writeln!(out.stdout, "  seed {}: {f}", r.seed);
    }
    if !r.passed() {
        out.code = EXIT_DIAGNOSTICS;
    }
    out
}

fn oracle_run(args: &OracleArgs) -> Outcome {
    let program = match load(&args.path, &[]) {
        Ok(p) => p,
        Err(o) => return o,
    };
    if let Some((k, _)) = args.params.iter().find(|(k, _)| !program.is_param(k)) {
        return Outcome::fail(&args.path, format!("`{k}` is not a parameter"));
    }
    let mut generator = InputGenerator::new(args.seed);
    generator.fixed = args.params.iter().cloned().collect();
    let input = match generator.trial(&program, args.trial) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(&args.path, e),
    };
    let mut memory = input.memory;
    let result = input.machine.run(&mut memory, &BTreeSet::new());
    let error = result.err().map(|e| e.to_string());
    let mut out = Outcome::default();
    match args.dump {
        Dump::Json => {
            let doc = json!({
                "file": args.path.display().to_string(),
                "seed": args.seed,
                "trial": args.trial,
                "density": input.density,
                "params": input.machine.params,
                "error": error,
                "memory": memory_json(&memory),
            });
            out.stdout = serde_json::to_string_pretty(&doc).expect("plain data") + "\n";
        }
        Dump::Text => {
            let params: Vec<String> = input.machine.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out.stdout, "params: {}", params.join(" "));
            for n in memory.scalar_names() {
                let _ = writeln!(out.stdout, "{n} = {}", memory.scalar(n).unwrap_or_default());
            }
            for n in memory.array_names() {
                let a = memory.array(n).expect("listed");
                let data = serde_json::to_string(&a.data).expect("plain data");
                let _ = writeln!(out.stdout, "{n}{:?} = {data}", a.dims);
            }
        }
    }
    if let Some(e) = error {
        let _ = writeln!(out.stderr, "{}: {e}", args.path.display());
        out.code = EXIT_DIAGNOSTICS;
    }
    out
}

/// Final memory as `{"scalars": {..}, "arrays": {name: {"dims", "data"}}}`.
pub fn memory_json(memory: &Memory) -> serde_json::Value {
    let scalars: BTreeMap<&str, i64> =
        memory.scalar_names().iter().map(|n| (n.as_str(), memory.scalar(n).unwrap_or_default())).collect();
    let arrays: BTreeMap<&str, _> =
        memory.array_names().iter().map(|n| (n.as_str(), memory.array(n).expect("listed"))).collect();
    json!({ "scalars": scalars, "arrays": arrays })
}
