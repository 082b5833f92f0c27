//! Hints released by failed-attempt count, the distance between a graded
//! submission and a correct one, and the per-learner model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grader::{FeedbackReport, Stage, Status, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintRung {
    /// Failed attempts needed before the hint is shown.
    pub after: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HintLadder {
    rungs: Vec<HintRung>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LadderError {
    #[error("hint {index}: threshold must be at least 1")]
    ZeroThreshold { index: usize },
    #[error("hint {index}: threshold {after} is not greater than the previous threshold {previous}")]
    NotIncreasing { index: usize, after: u32, previous: u32 },
}

impl HintLadder {
    /// Rungs are numbered from 1 in errors.
    pub fn new(rungs: Vec<HintRung>) -> Result<Self, LadderError> {
        let mut previous = 0;
        for (i, r) in rungs.iter().enumerate() {
            if r.after == 0 {
                return Err(LadderError::ZeroThreshold { index: i + 1 });
            }
            if i > 0 && r.after <= previous {
                return Err(LadderError::NotIncreasing {
                    index: i + 1,
                    after: r.after,
                    previous,
                });
            }
            previous = r.after;
        }
        Ok(HintLadder { rungs })
    }

    pub fn rungs(&self) -> &[HintRung] {
        &self.rungs
    }

    /// Every hint whose threshold is at most `failed_attempts`, in order.
    pub fn hints_due(&self, failed_attempts: u32) -> Vec<&str> {
        self.rungs
            .iter()
            .take_while(|r| r.after <= failed_attempts)
            .map(|r| r.text.as_str())
            .collect()
    }
}

pub const MAIN_WEIGHT: f64 = 0.7;
pub const AUX_WEIGHT: f64 = 0.2;
pub const STRUCTURE_WEIGHT: f64 = 0.1;
/// Smallest distance reported for an incorrect submission.
pub const MIN_INCORRECT_DISTANCE: f64 = 0.01;

/// Behavioural distance in `[0, 1]`: 1 when the analysis aborted, 0 when
/// correct, otherwise a weighted mix of failed main trials, failed trials of
/// defined auxiliary predicates and a structure mismatch. Weights of absent
/// groups are spread over the present ones.
pub fn compute_distance(report: &FeedbackReport) -> f64 {
    let failed = |s: Stage| report.stage(s).status == Status::Fail;
    if failed(Stage::Syntax) || failed(Stage::Forbidden) {
        return 1.0;
    }
    if report.verdict == Verdict::Correct {
        return 0.0;
    }
    let fraction = |passed: u32, failed: u32| {
        let total = passed + failed;
        if total == 0 {
            0.0
        } else {
            f64::from(failed) / f64::from(total)
        }
    };
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (p, f) = report
        .trial_counts
        .iter()
        .fold((0, 0), |(p, f), t| (p + t.passed, f + t.failed));
    // A semantic failure without failed trials (a required aux missing)
    // still counts fully against the main group.
    let main = if f == 0 && failed(Stage::Semantic) { 1.0 } else { fraction(p, f) };
    groups.push((MAIN_WEIGHT, main));
    let defined: Vec<_> = report
        .aux_results
        .iter()
        .filter(|a| a.status != Status::Skipped)
        .collect();
    if !defined.is_empty() {
        let (p, f) = defined.iter().fold((0, 0), |(p, f), a| (p + a.passed, f + a.failed));
        groups.push((AUX_WEIGHT, fraction(p, f)));
    }
    if let Some(r) = report.structure_report() {
        groups.push((STRUCTURE_WEIGHT, if r.matched { 0.0 } else { 1.0 }));
    }
    let total: f64 = groups.iter().map(|(w, _)| w).sum();
    let d: f64 = groups.iter().map(|(w, x)| w * x).sum::<f64>() / total;
    d.clamp(MIN_INCORRECT_DISTANCE, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptRecord {
    pub learner: String,
    pub problem: String,
    /// 1-based per (learner, problem).
    pub attempt: u64,
    pub source: String,
    pub verdict: Verdict,
    pub distance: f64,
    pub seed: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemProgress {
    pub attempts: u64,
    pub failed_attempts: u32,
    pub solved: bool,
    pub distance_history: Vec<f64>,
    pub hints_released: usize,
}

impl ProblemProgress {
    /// Change between the last two distances.
    pub fn distance_change(&self) -> Option<f64> {
        match self.distance_history.as_slice() {
            [.., a, b] => Some(b - a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LearnerModel {
    pub problems: BTreeMap<String, ProblemProgress>,
    /// Problems solved per domain tag.
    pub domains: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("attempt {got} for {problem} out of order; expected attempt {expected}")]
pub struct OutOfOrderAttempt {
    pub problem: String,
    pub expected: u64,
    pub got: u64,
}

impl LearnerModel {
    pub fn progress(&self, problem: &str) -> Option<&ProblemProgress> {
        self.problems.get(problem)
    }
}

/// Folds one attempt into `model`.
pub fn update_model(
    model: &mut LearnerModel,
    record: &AttemptRecord,
    ladder: &HintLadder,
    domains: &[String],
) -> Result<(), OutOfOrderAttempt> {
    let entry = model.problems.entry(record.problem.clone()).or_default();
    if record.attempt != entry.attempts + 1 {
        return Err(OutOfOrderAttempt {
            problem: record.problem.clone(),
            expected: entry.attempts + 1,
            got: record.attempt,
        });
    }
    entry.attempts += 1;
    entry.distance_history.push(record.distance);
    match record.verdict {
        Verdict::Correct => {
            if !entry.solved {
                for d in domains {
                    *model.domains.entry(d.clone()).or_default() += 1;
                }
            }
            entry.solved = true;
        }
        Verdict::Incorrect => entry.failed_attempts += 1,
    }
    entry.hints_released = ladder.hints_due(entry.failed_attempts).len();
    Ok(())
}
