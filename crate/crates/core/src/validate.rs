//! Dynamic validation: every emitted fact and every verdict is checked
//! against the oracle on generated inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::dependence::{classify_with_facts, Decision, Verdict};
use crate::facts::FactEntry;
use crate::frontend::{LoopId, Program};
use crate::oracle::{
    check_fact, check_iteration_independence, check_output_independence, Event, FactCheck, Independence, InputGenerator,
};
use crate::pipeline::run_pipeline;

#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub trials: usize,
    pub seed: u64,
    pub fixed_params: BTreeMap<String, i64>,
    /// Facts added to the analysis as if derived, to test the checks themselves.
    pub injected: Vec<FactEntry>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { trials: 100, seed: 0, fixed_params: BTreeMap::new(), injected: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Fact,
    Independence,
    SerialNotReproduced,
    Run,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub trial: Option<usize>,
    pub params: BTreeMap<String, i64>,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.trial {
            Some(t) => {
                let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "trial {t} ({}): {}", ps.join(" "), self.message)
            }
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub trials: usize,
    pub facts_checked: usize,
    pub loops_checked: usize,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Facts with the top-level points at which they must hold.
fn fact_schedule(
    program: &Program,
    pipeline: &crate::pipeline::PipelineResult,
    injected: &[FactEntry],
) -> Vec<(FactEntry, Vec<usize>)> {
    let end = program.body.len();
    let mut out: Vec<(FactEntry, Vec<usize>)> = pipeline
        .facts
        .entries
        .iter()
        .map(|s| (s.fact.clone(), (s.born + 1..=s.killed.unwrap_or(end)).collect()))
        .collect();
    for f in injected {
        out.push((f.clone(), (0..=end).collect()));
    }
    out
}

struct TrialOutcome {
    failures: Vec<Failure>,
    facts_checked: usize,
    /// Serial loops whose conflict showed up on this input.
    reproduced: BTreeSet<LoopId>,
}

pub fn validate_program(program: &Program, config: &ValidateConfig) -> ValidationReport {
    let pipeline = run_pipeline(program);
    let verdicts = classify_with_facts(program, &pipeline, &config.injected);
    let schedule = fact_schedule(program, &pipeline, &config.injected);
    let traced: BTreeSet<LoopId> =
        verdicts.iter().filter(|v| v.decision != Decision::Unknown).map(|v| v.loop_id).collect();
    let mut gen = InputGenerator::new(config.seed);
    gen.fixed = config.fixed_params.clone();
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(program, &gen, t, &schedule, &verdicts, &traced))
        .collect();
    let mut report = ValidationReport {
        seed: config.seed,
        trials: config.trials,
        facts_checked: 0,
        loops_checked: traced.len(),
        failures: Vec::new(),
        warnings: Vec::new(),
    };
    if config.trials == 0 {
        report.warnings.push("no trials requested; nothing was checked".to_string());
    }
    let mut reproduced = BTreeSet::new();
    for o in outcomes {
        report.facts_checked += o.facts_checked;
        report.failures.extend(o.failures);
        reproduced.extend(o.reproduced);
    }
    if config.trials > 0 {
        for v in verdicts.iter().filter(|v| v.decision == Decision::Serial && !reproduced.contains(&v.loop_id)) {
            report.failures.push(Failure {
                kind: FailureKind::SerialNotReproduced,
                trial: None,
                params: BTreeMap::new(),
                message: format!("{}: serial verdict, but no generated input shows the conflict", v.loop_id),
            });
        }
    }
    report
}

fn run_trial(
    program: &Program,
    gen: &InputGenerator,
    trial: usize,
    schedule: &[(FactEntry, Vec<usize>)],
    verdicts: &[Verdict],
    traced: &BTreeSet<LoopId>,
) -> TrialOutcome {
    let mut out = TrialOutcome { failures: Vec::new(), facts_checked: 0, reproduced: BTreeSet::new() };
    let fail = |kind, params: &BTreeMap<String, i64>, message: String| Failure {
        kind,
        trial: Some(trial),
        params: params.clone(),
        message,
    };
    let mut input = match gen.trial(program, trial) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(fail(FailureKind::Run, &gen.params(program, trial), e.to_string()));
            return out;
        }
    };
    let params = input.machine.params.clone();
    let mut fact_failures = Vec::new();
    let mut checked = 0;
    let result = input.machine.run_with(&mut input.memory, traced, &mut |point, mem| {
        for (f, points) in schedule {
            if !points.contains(&point) {
                continue;
            }
            checked += 1;
            match check_fact(f, &params, mem) {
                FactCheck::Holds => {}
                FactCheck::Violated(m) => fact_failures.push(format!("before statement {point}: {m}")),
                FactCheck::Unevaluable(m) => {
                    fact_failures.push(format!("before statement {point}: cannot evaluate {m}"))
                }
            }
        }
    });
    out.facts_checked = checked;
    fact_failures.dedup();
    out.failures.extend(fact_failures.into_iter().map(|m| fail(FailureKind::Fact, &params, m)));
    let trace = match result {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(fail(FailureKind::Run, &params, e.to_string()));
            return out;
        }
    };
    for v in verdicts.iter().filter(|v| traced.contains(&v.loop_id)) {
        let events = trace.events.get(&v.loop_id).map(Vec::as_slice).unwrap_or(&[]);
        match v.decision {
            Decision::Parallel => {
                let kept: Vec<Event>;
                let events = if v.peeled {
                    let starts = trace.starts.get(&v.loop_id).cloned().unwrap_or_default();
                    kept = events.iter().filter(|e| starts.get(e.instance) != Some(&e.iteration)).copied().collect();
                    &kept[..]
                } else {
                    events
                };
                for c in [
                    check_output_independence(events, &input.memory),
                    check_iteration_independence(events, &input.memory),
                ] {
                    if let Independence::Conflict { first, second, array, index } = c {
                        out.failures.push(fail(
                            FailureKind::Independence,
                            &params,
                            format!("{}: iterations {first} and {second} both touch {array}[{index}]", v.loop_id),
                        ));
                        break;
                    }
                }
            }
            Decision::Serial => {
                if matches!(check_iteration_independence(events, &input.memory), Independence::Conflict { .. }) {
                    out.reproduced.insert(v.loop_id);
                }
            }
            Decision::Unknown => {}
        }
    }
    out
}
