//! SLD resolution with tracing, resource limits and a per-call policy hook.
//!
//! Search is depth-first, leftmost goal first, clauses in source order.
//! Cut is local to the clause body it appears in, passes through `;/2` and
//! `->/2`, and is opaque inside `call/N`, `findall/3`, `\+/1` and the
//! condition of an if-then-else.
//!
//! Every goal the machine is about to run (user predicates, builtins and
//! control constructs alike) is first offered to the [`PolicyHook`] and then
//! reported as a [`Port::Call`] event. The step counter advances once per
//! port event and once per retry of a pending alternative; it bounds the
//! run together with a node budget for unification and copying.

mod arith;
mod machine;
mod unify;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use arith::{eval_arith, ArithError};
pub use unify::unify;

use crate::term::{PredicateIndicator, Program, Substitution, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Limits {
    pub max_steps: u64,
    pub max_depth: usize,
    pub max_solutions: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 200_000,
            max_depth: 4_000,
            max_solutions: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("limit `{0}` must be positive")]
pub struct BadLimits(pub &'static str);

impl Limits {
    pub fn validate(&self) -> Result<(), BadLimits> {
        if self.max_steps == 0 {
            return Err(BadLimits("max_steps"));
        }
        if self.max_depth == 0 {
            return Err(BadLimits("max_depth"));
        }
        if self.max_solutions == 0 {
            return Err(BadLimits("max_solutions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    Call,
    Exit,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEvent {
    pub kind: Port,
    #[serde(serialize_with = "crate::term::serialize_display")]
    pub goal: Term,
    pub depth: usize,
    pub step: u64,
}

pub trait TraceSink {
    fn event(&mut self, event: TraceEvent);

    /// Sinks that discard events let the machine skip goal snapshots.
    fn enabled(&self) -> bool {
        true
    }
}

impl TraceSink for Vec<TraceEvent> {
    fn event(&mut self, event: TraceEvent) {
        self.push(event);
    }
}

/// Discards all events.
pub struct NoTrace;

impl TraceSink for NoTrace {
    fn event(&mut self, _: TraceEvent) {}

    fn enabled(&self) -> bool {
        false
    }
}

/// A goal about to be called, as seen by the policy hook.
#[derive(Debug)]
pub struct CallSite<'a> {
    pub goal: &'a Term,
    pub indicator: PredicateIndicator,
    pub builtin: bool,
    /// Defined by the program or by `assertz` earlier in the run.
    pub user_defined: bool,
    /// Step number the call's `Call` event will carry.
    pub step: u64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Allow,
    /// Stop the run with [`HaltReason::PolicyViolation`].
    Deny(String),
    /// Stop the run with [`HaltReason::RuntimeError`], as for an undefined
    /// predicate.
    Missing(String),
}

pub trait PolicyHook {
    fn check(&mut self, call: &CallSite<'_>) -> Decision;
}

/// Permits every call.
pub struct AllowAll;

impl PolicyHook for AllowAll {
    fn check(&mut self, _: &CallSite<'_>) -> Decision {
        Decision::Allow
    }
}

impl<F: FnMut(&CallSite<'_>) -> Decision> PolicyHook for F {
    fn check(&mut self, call: &CallSite<'_>) -> Decision {
        self(call)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HaltReason {
    Complete,
    SolutionCap,
    StepCap,
    DepthCap,
    PolicyViolation,
    RuntimeError,
}

impl HaltReason {
    pub fn is_cap(self) -> bool {
        matches!(
            self,
            HaltReason::SolutionCap | HaltReason::StepCap | HaltReason::DepthCap
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    /// Bindings of the query variables, one entry per answer.
    pub solutions: Vec<Substitution>,
    pub truncated: bool,
    /// The whole search space was explored.
    pub exhausted: bool,
    pub steps_used: u64,
    pub halt_reason: HaltReason,
    pub error_detail: Option<String>,
}

/// Builtins, control constructs included. Clauses for these cannot be
/// defined or asserted.
pub fn is_builtin(pi: &PredicateIndicator) -> bool {
    matches!(
        (pi.name.as_str(), pi.arity),
        ("true" | "fail" | "!", 0)
            | ("var" | "nonvar" | "atom" | "number" | "\\+" | "assertz" | "retract", 1)
            | (
                "=" | "\\=" | "==" | "\\==" | "is" | "=:=" | "=\\=" | "<" | ">" | "=<" | ">="
                    | ";" | "->" | "," | "=..",
                2
            )
            | ("findall" | "between" | "functor" | "arg", 3)
            | ("call", 1..=3)
    )
}

/// Configured query runner.
#[derive(Debug, Clone)]
pub struct Solver {
    pub limits: Limits,
    /// After reaching `max_solutions`, look for one more answer so that a
    /// search space of exactly `max_solutions` answers reports `Complete`.
    pub probe_exhaustion: bool,
    pub deadline: Option<Instant>,
}

impl Solver {
    pub fn new(limits: Limits) -> Self {
        Solver {
            limits,
            probe_exhaustion: true,
            deadline: None,
        }
    }

    pub fn probe_exhaustion(mut self, on: bool) -> Self {
        self.probe_exhaustion = on;
        self
    }

    pub fn deadline(mut self, at: Option<Instant>) -> Self {
        self.deadline = at;
        self
    }

    pub fn solve(
        &self,
        program: &Program,
        goals: &[Term],
        query_vars: &[Var],
        hook: &mut dyn PolicyHook,
        sink: &mut dyn TraceSink,
    ) -> SolveOutcome {
        machine::Machine::new(self, program, goals, hook, sink).run(goals, query_vars)
    }
}

/// Runs `goals` against `program`; see [`Solver`] for options.
pub fn solve(
    program: &Program,
    goals: &[Term],
    query_vars: &[Var],
    limits: Limits,
    hook: &mut dyn PolicyHook,
    sink: &mut dyn TraceSink,
) -> SolveOutcome {
    Solver::new(limits).solve(program, goals, query_vars, hook, sink)
}
