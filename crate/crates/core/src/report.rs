//! Whole-file analysis and its JSON report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dependence::{classify_program, AccessKind, Decision, MissingRule, ProofRule, ProofStep, Verdict, Witness};
use crate::facts::{FactPayload, StoredFact};
use crate::frontend::{annotate, Diagnostic, LoopId, Program, Span, Stmt, StmtKind};
use crate::pipeline::{run_pipeline, PipelineResult};

pub const SCHEMA_VERSION: u32 = 1;

/// A parsed program with its pipeline result and loop verdicts.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub program: Program,
    pub pipeline: PipelineResult,
    /// In source order.
    pub verdicts: Vec<Verdict>,
}

impl Analysis {
    pub fn new(program: Program) -> Analysis {
        let pipeline = run_pipeline(&program);
        let verdicts = classify_program(&program, &pipeline);
        Analysis { program, pipeline, verdicts }
    }

    pub fn verdict(&self, id: LoopId) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.loop_id == id)
    }

    /// Loops that get a pragma: parallel without peeling, and not nested in
    /// another such loop.
    pub fn pragma_loops(&self) -> BTreeMap<LoopId, bool> {
        fn walk(stmts: &[Stmt], a: &Analysis, out: &mut BTreeMap<LoopId, bool>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Assign { .. } => {}
                    StmtKind::If { then_body, else_body, .. } => {
                        walk(then_body, a, out);
                        walk(else_body, a, out);
                    }
                    StmtKind::For(l) => match a.verdict(l.id) {
                        Some(v) if v.is_parallel() && !v.peeled => {
                            out.insert(l.id, true);
                        }
                        _ => walk(&l.body, a, out),
                    },
                }
            }
        }
        let mut out = BTreeMap::new();
        walk(&self.program.body, self, &mut out);
        out
    }

    /// Source with OpenMP pragmas on [`Analysis::pragma_loops`].
    pub fn annotated(&self) -> String {
        annotate(&self.program, &self.pragma_loops()).expect("pragma loops come from this program")
    }

    pub fn report(&self, file: &str) -> Report {
        let spans = loop_spans(&self.program);
        let line_of = |point: usize| self.program.body.get(point).map(|s| s.span.line);
        let loops = self
            .verdicts
            .iter()
            .map(|v| {
                let l = self.program.find_loop(v.loop_id).expect("verdicts name program loops");
                let agg = self.pipeline.trace.iter().find(|t| t.loop_id == v.loop_id);
                LoopReport {
                    id: v.loop_id.to_string(),
                    span: spans.get(&v.loop_id).copied().unwrap_or_default(),
                    index: l.var.clone(),
                    decision: v.decision,
                    rule: v.rule,
                    private: v.private.clone(),
                    peeled: v.peeled,
                    reason: v.reason.clone(),
                    missing_rule: v.missing_rule,
                    facts_used: v.facts_used.clone(),
                    witness: v.witness.clone(),
                    accesses: v
                        .accesses
                        .iter()
                        .map(|a| {
                            let (lo, hi) = a.range();
                            AccessReport {
                                array: a.array.clone(),
                                kind: a.kind,
                                subscript: a.subscript.to_string(),
                                range: format!("[{lo}:{hi}]"),
                                iterations: match (a.first, a.rest) {
                                    (true, true) => "all",
                                    (true, false) => "first",
                                    _ => "rest",
                                },
                                guards: a.guards.clone(),
                                line: a.line,
                                text: a.text.clone(),
                            }
                        })
                        .collect(),
                    trace: v.trace.clone(),
                    aggregation: agg.map(|t| Aggregation { phase1: t.phase1.clone(), phase2: t.phase2.clone() }),
                }
            })
            .collect();
        let facts = self.pipeline.facts.entries.iter().map(|s| fact_report(s, &line_of)).collect();
        let scalars = self
            .pipeline
            .facts
            .scalars
            .iter()
            .filter(|(_, r)| !r.is_bottom())
            .map(|(n, r)| (n.clone(), r.to_string()))
            .collect();
        Report {
            schema_version: SCHEMA_VERSION,
            file: file.to_string(),
            params: self.program.params.clone(),
            loops,
            facts,
            scalars,
            diagnostics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub file: String,
    pub params: Vec<String>,
    pub loops: Vec<LoopReport>,
    pub facts: Vec<FactReport>,
    /// Straight-line scalar values at the end of the program.
    pub scalars: BTreeMap<String, String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Report {
    pub fn from_diagnostics(file: &str, diagnostics: Vec<Diagnostic>) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            file: file.to_string(),
            params: Vec::new(),
            loops: Vec::new(),
            facts: Vec::new(),
            scalars: BTreeMap::new(),
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is plain data");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub id: String,
    pub span: Span,
    pub index: String,
    pub decision: Decision,
    pub rule: Option<ProofRule>,
    pub private: Vec<String>,
    pub peeled: bool,
    pub reason: Option<String>,
    pub missing_rule: Option<MissingRule>,
    pub facts_used: Vec<String>,
    pub witness: Option<Witness>,
    pub accesses: Vec<AccessReport>,
    pub trace: Vec<ProofStep>,
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccessReport {
    pub array: String,
    pub kind: AccessKind,
    pub subscript: String,
    /// Locations touched by one iteration.
    pub range: String,
    /// `all`, `first` or `rest`.
    pub iterations: &'static str,
    pub guards: Vec<String>,
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregation {
    pub phase1: Vec<String>,
    pub phase2: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactReport {
    pub array: String,
    pub subscript: String,
    pub property: Option<String>,
    pub value: Option<String>,
    pub text: String,
    pub provenance: ProvenanceReport,
    /// Line of the top-level statement after which the fact holds.
    pub holds_after_line: Option<usize>,
    /// Line of the top-level statement that invalidates it.
    pub killed_at_line: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProvenanceReport {
    #[serde(rename = "loop")]
    pub loop_id: Option<String>,
    pub line: usize,
    pub rule: crate::facts::Rule,
    pub composite: bool,
}

fn fact_report(s: &StoredFact, line_of: &dyn Fn(usize) -> Option<usize>) -> FactReport {
    let f = &s.fact;
    let (property, value) = match &f.payload {
        FactPayload::Property(p) => (Some(p.to_string()), None),
        FactPayload::ValueRange(r) => (None, Some(r.to_string())),
    };
    FactReport {
        array: f.array.clone(),
        subscript: f.subscript.to_string(),
        property,
        value,
        text: f.to_string(),
        provenance: ProvenanceReport {
            loop_id: f.provenance.loop_id.map(|l| l.to_string()),
            line: f.provenance.line,
            rule: f.provenance.rule,
            composite: f.provenance.composite,
        },
        holds_after_line: line_of(s.born),
        killed_at_line: s.killed.and_then(line_of),
    }
}

fn loop_spans(program: &Program) -> BTreeMap<LoopId, Span> {
    fn walk(stmts: &[Stmt], out: &mut BTreeMap<LoopId, Span>) {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign { .. } => {}
                StmtKind::If { then_body, else_body, .. } => {
                    walk(then_body, out);
                    walk(else_body, out);
                }
                StmtKind::For(l) => {
                    out.insert(l.id, s.span);
                    walk(&l.body, out);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(&program.body, &mut out);
    out
}
