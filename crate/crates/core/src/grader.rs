//! The staged analysis of a submission: syntax, forbidden commands,
//! randomized semantic comparison against the reference, structure.
//!
//! A failed Syntax or Forbidden stage aborts the analysis and every later
//! stage is reported as `Skipped`. Denied calls that only show up while the
//! program runs fail the Semantic stage and carry `forbidden: true`.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::bundle::ProblemBundle;
use crate::reader::{parse_program, Diagnostic};
use crate::sandbox::{scan_static, Violation};
use crate::term::{alpha_equal, Clause, PredicateIndicator, Program};
use crate::testgen::{compare_outcomes, instantiate, run_with, BundleError, Comparison, Role, TestSpec};

/// Counterexamples kept per test spec.
pub const COUNTEREXAMPLES_PER_SPEC: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Syntax,
    Forbidden,
    Semantic,
    Structure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Detail {
    Diagnostic(Diagnostic),
    Violation(Violation),
    #[serde(rename_all = "camelCase")]
    Mismatch {
        spec: String,
        trial: u32,
        query: String,
        message: String,
        /// Stopped by the sandbox while running.
        forbidden: bool,
    },
    Structure(StructureReport),
    Note { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageResult {
    pub stage: Stage,
    pub status: Status,
    pub details: Vec<Detail>,
}

impl StageResult {
    fn new(stage: Stage) -> Self {
        StageResult {
            stage,
            status: Status::Skipped,
            details: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialCount {
    pub spec: String,
    pub passed: u32,
    pub failed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuxResult {
    pub indicator: PredicateIndicator,
    pub status: Status,
    pub required: bool,
    pub passed: u32,
    pub failed: u32,
    pub counterexamples: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackReport {
    pub stages: Vec<StageResult>,
    pub verdict: Verdict,
    pub aux_results: Vec<AuxResult>,
    pub counterexamples: Vec<String>,
    pub seed: u64,
    pub trial_counts: Vec<TrialCount>,
}

impl FeedbackReport {
    pub fn stage(&self, stage: Stage) -> &StageResult {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .expect("all four stages are present")
    }

    pub fn structure_report(&self) -> Option<&StructureReport> {
        self.stage(Stage::Structure).details.iter().find_map(|d| match d {
            Detail::Structure(r) => Some(r),
            _ => None,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GradeError {
    #[error("bundle error: {0}")]
    Bundle(#[from] BundleError),
    #[error("internal grader error: {0}")]
    Internal(String),
}

/// Grades `source` against `bundle` with the given master seed.
pub fn grade(bundle: &ProblemBundle, source: &str, seed: u64) -> Result<FeedbackReport, GradeError> {
    grade_until(bundle, source, seed, None)
}

/// Like [`grade`], stopping test runs at `deadline`. Trials cut short by the
/// deadline count as failed.
pub fn grade_until(
    bundle: &ProblemBundle,
    source: &str,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<FeedbackReport, GradeError> {
    let mut syntax = StageResult::new(Stage::Syntax);
    let mut forbidden = StageResult::new(Stage::Forbidden);
    let mut semantic = StageResult::new(Stage::Semantic);
    let mut structure = StageResult::new(Stage::Structure);
    let mut report = FeedbackReport {
        stages: Vec::new(),
        verdict: Verdict::Incorrect,
        aux_results: Vec::new(),
        counterexamples: Vec::new(),
        seed,
        trial_counts: Vec::new(),
    };
    let finish = |mut report: FeedbackReport, stages: [StageResult; 4]| {
        let executed_ok = stages.iter().all(|s| s.status != Status::Fail);
        report.verdict = if executed_ok && stages[2].status == Status::Pass {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        };
        report.stages = stages.into();
        Ok(report)
    };

    let program = match parse_program(source) {
        Ok(parsed) => {
            syntax.status = Status::Pass;
            syntax.details = parsed.warnings.into_iter().map(Detail::Diagnostic).collect();
            parsed.program
        }
        Err(diags) => {
            syntax.status = Status::Fail;
            syntax.details = diags.into_iter().map(Detail::Diagnostic).collect();
            return finish(report, [syntax, forbidden, semantic, structure]);
        }
    };

    let violations = scan_static(&program, &bundle.policy);
    if !violations.is_empty() {
        forbidden.status = Status::Fail;
        forbidden.details = violations.into_iter().map(Detail::Violation).collect();
        return finish(report, [syntax, forbidden, semantic, structure]);
    }
    forbidden.status = Status::Pass;

    let mut failed = false;
    for spec in &bundle.main_specs {
        let run = run_spec(bundle, &program, spec, seed, deadline)?;
        failed |= run.failed > 0;
        report.trial_counts.push(TrialCount {
            spec: spec.name.clone(),
            passed: run.passed,
            failed: run.failed,
        });
        for c in run.counterexamples {
            if !report.counterexamples.contains(&c) {
                report.counterexamples.push(c);
            }
        }
        semantic.details.extend(run.details);
    }
    for aux in &bundle.aux {
        let (result, details) = check_aux_predicate(bundle, &program, aux, seed, deadline)?;
        let dynamic = details.iter().any(|d| matches!(d, Detail::Violation(_)));
        if (aux.required && result.status == Status::Fail) || dynamic {
            failed = true;
            semantic.details.extend(details);
        }
        if aux.required && result.status == Status::Skipped {
            failed = true;
            semantic.details.push(Detail::Note {
                message: format!("{} must be defined", aux.indicator),
            });
        }
        report.aux_results.push(result);
    }
    semantic.status = if failed { Status::Fail } else { Status::Pass };

    if let Some(target) = &bundle.structure_target {
        let r = structure_check(&program, target);
        structure.status = if r.matched || !bundle.structure_mandatory {
            Status::Pass
        } else {
            Status::Fail
        };
        structure.details.push(Detail::Structure(r));
    }
    finish(report, [syntax, forbidden, semantic, structure])
}

/// Runs [`grade_until`] on a thread with a large stack, turning a panic into
/// [`GradeError::Internal`].
pub fn grade_isolated(
    bundle: &ProblemBundle,
    source: &str,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<FeedbackReport, GradeError> {
    std::thread::scope(|s| {
        let handle = std::thread::Builder::new()
            .name("grade".into())
            .stack_size(256 << 20)
            .spawn_scoped(s, || grade_until(bundle, source, seed, deadline))
            .map_err(|e| GradeError::Internal(e.to_string()))?;
        handle.join().unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "grader panicked".into());
            Err(GradeError::Internal(msg))
        })
    })
}

struct SpecRun {
    passed: u32,
    failed: u32,
    counterexamples: Vec<String>,
    details: Vec<Detail>,
}

fn run_spec(
    bundle: &ProblemBundle,
    program: &Program,
    spec: &TestSpec,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<SpecRun, BundleError> {
    let mut run = SpecRun {
        passed: 0,
        failed: 0,
        counterexamples: Vec::new(),
        details: Vec::new(),
    };
    for trial in 0..spec.trials {
        let inst = instantiate(spec, trial, seed);
        let query = inst.query.to_string();
        let (expected, _) = run_with(&bundle.reference, spec, &inst, &bundle.policy, Role::Reference, deadline);
        let timed_out = |o: &crate::testgen::Outcome| {
            deadline.is_some_and(|d| Instant::now() >= d)
                && o.detail.as_deref() == Some("time limit exceeded")
        };
        if timed_out(&expected) {
            run.failed += 1;
            run.details.push(Detail::Note {
                message: format!("grading time limit exceeded at {query}"),
            });
            continue;
        }
        let (actual, violations) = run_with(program, spec, &inst, &bundle.policy, Role::Submission, deadline);
        let forbidden = !violations.is_empty();
        let verdict = compare_outcomes(&expected, &actual, spec.compare, &inst)?;
        match verdict {
            Comparison::Match if !forbidden => run.passed += 1,
            Comparison::Match => {
                // Allowed to finish, yet a denied call was attempted.
                run.failed += 1;
                run.details.extend(violations.into_iter().map(Detail::Violation));
            }
            Comparison::Mismatch(message) => {
                run.failed += 1;
                if run.counterexamples.len() < COUNTEREXAMPLES_PER_SPEC && !run.counterexamples.contains(&message) {
                    run.counterexamples.push(message.clone());
                }
                run.details.push(Detail::Mismatch {
                    spec: spec.name.clone(),
                    trial,
                    query,
                    message,
                    forbidden,
                });
                run.details.extend(violations.into_iter().map(Detail::Violation));
            }
        }
    }
    Ok(run)
}

/// Checks one auxiliary predicate on its own. Absent predicates are
/// `Skipped`.
pub fn check_aux_predicate(
    bundle: &ProblemBundle,
    program: &Program,
    aux: &crate::bundle::AuxSpec,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<(AuxResult, Vec<Detail>), BundleError> {
    let mut result = AuxResult {
        indicator: aux.indicator.clone(),
        status: Status::Skipped,
        required: aux.required,
        passed: 0,
        failed: 0,
        counterexamples: Vec::new(),
        hint: aux.hint.clone(),
    };
    let mut details = Vec::new();
    if !program.defines(&aux.indicator) {
        return Ok((result, details));
    }
    for spec in &aux.specs {
        let run = run_spec(bundle, program, spec, seed, deadline)?;
        result.passed += run.passed;
        result.failed += run.failed;
        result.counterexamples.extend(run.counterexamples);
        details.extend(run.details);
    }
    result.status = if result.failed == 0 { Status::Pass } else { Status::Fail };
    Ok((result, details))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StructureReport {
    pub matched: bool,
    pub problems: Vec<String>,
    /// Predicates the target does not have; informational only.
    pub extra_predicates: Vec<PredicateIndicator>,
}

/// Compares every predicate of `target` with the submission's clauses:
/// same clause count and a one-to-one pairing of alpha-equivalent clauses,
/// clause order free, goal order fixed.
pub fn structure_check(submission: &Program, target: &Program) -> StructureReport {
    let mut problems = Vec::new();
    let target_preds: Vec<PredicateIndicator> = unique(target.predicates());
    for pi in &target_preds {
        let want: Vec<&Clause> = target.clauses_for(pi).map(|c| &**c).collect();
        let have: Vec<&Clause> = submission.clauses_for(pi).map(|c| &**c).collect();
        if have.is_empty() {
            problems.push(format!("{pi} is not defined"));
            continue;
        }
        if have.len() != want.len() {
            problems.push(format!(
                "{pi} should have {} clause{}, found {}",
                want.len(),
                if want.len() == 1 { "" } else { "s" },
                have.len()
            ));
            continue;
        }
        let wt: Vec<_> = want.iter().map(|c| c.to_term()).collect();
        let ht: Vec<_> = have.iter().map(|c| c.to_term()).collect();
        let adj: Vec<Vec<usize>> = wt
            .iter()
            .map(|w| (0..ht.len()).filter(|&j| alpha_equal(w, &ht[j])).collect())
            .collect();
        let pairing = max_matching(&adj, ht.len());
        let used: Vec<bool> = {
            let mut u = vec![false; ht.len()];
            for j in pairing.iter().flatten() {
                u[*j] = true;
            }
            u
        };
        for (i, m) in pairing.iter().enumerate() {
            if m.is_some() {
                continue;
            }
            let reordered = have
                .iter()
                .enumerate()
                .any(|(j, h)| !used[j] && same_goals_reordered(want[i], h));
            problems.push(format!(
                "clause {} of {pi} has no alpha-equivalent partner{}",
                i + 1,
                if reordered { " (goal order differs)" } else { "" }
            ));
        }
    }
    let extra_predicates = unique(submission.predicates())
        .into_iter()
        .filter(|pi| !target_preds.contains(pi))
        .collect();
    StructureReport {
        matched: problems.is_empty(),
        problems,
        extra_predicates,
    }
}

fn unique<'a>(it: impl Iterator<Item = &'a PredicateIndicator>) -> Vec<PredicateIndicator> {
    let mut out: Vec<PredicateIndicator> = Vec::new();
    for pi in it {
        if !out.contains(pi) {
            out.push(pi.clone());
        }
    }
    out
}

/// Kuhn's augmenting-path matching; `adj[i]` lists right vertices for left
/// vertex `i`.
fn max_matching(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right];
    for i in 0..adj.len() {
        augment(i, adj, &mut vec![false; right], &mut owner);
    }
    let mut pairing = vec![None; adj.len()];
    for (j, o) in owner.iter().enumerate() {
        if let Some(i) = o {
            pairing[*i] = Some(j);
        }
    }
    pairing
}

const MAX_PERMUTED_GOALS: usize = 7;

fn same_goals_reordered(want: &Clause, have: &Clause) -> bool {
    let n = have.body.len();
    if n != want.body.len() || n < 2 || n > MAX_PERMUTED_GOALS {
        return false;
    }
    let target = want.to_term();
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm.
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            perm.swap(if i % 2 == 0 { 0 } else { c[i] }, i);
            let body = perm.iter().map(|&k| have.body[k].clone()).collect();
            if alpha_equal(&target, &Clause::new(have.head.clone(), body).to_term()) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

impl fmt::Display for FeedbackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            writeln!(f, "{:<10} {}", s.stage, s.status)?;
            for d in &s.details {
                match d {
                    Detail::Diagnostic(d) => {
                        let hint = d.fix_hint.as_deref().map(|h| format!(" ({h})")).unwrap_or_default();
                        writeln!(f, "  {}:{} {} {}{hint}", d.span.line, d.span.column, d.code, d.message)?
                    }
                    Detail::Violation(v) => writeln!(f, "  {v}")?,
                    Detail::Mismatch { .. } => {}
                    Detail::Structure(r) => {
                        for p in &r.problems {
                            writeln!(f, "  {p}")?;
                        }
                        for pi in &r.extra_predicates {
                            writeln!(f, "  note: {pi} is not part of the target")?;
                        }
                    }
                    Detail::Note { message } => writeln!(f, "  {message}")?,
                }
            }
        }
        for t in &self.trial_counts {
            writeln!(f, "tests {}: {} passed, {} failed", t.spec, t.passed, t.failed)?;
        }
        for c in &self.counterexamples {
            writeln!(f, "counterexample: {c}")?;
        }
        for a in &self.aux_results {
            write!(f, "aux {}: {}", a.indicator, a.status)?;
            if a.status != Status::Skipped {
                write!(f, " ({} passed, {} failed)", a.passed, a.failed)?;
            }
            writeln!(f)?;
            for c in &a.counterexamples {
                writeln!(f, "  counterexample: {c}")?;
            }
        }
        writeln!(f, "verdict: {} (seed {})", self.verdict, self.seed)
    }
}
