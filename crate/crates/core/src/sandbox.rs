//! Undesirable-command checks: a static scan of call positions and a
//! per-call guard installed as the engine's policy hook.
//!
//! Only goals in call position are inspected. An atom such as `halt` inside
//! a list or as a plain argument is data and never flagged.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::{is_builtin, CallSite, Decision, PolicyHook};
use crate::reader::SourceSpan;
use crate::term::{PredicateIndicator, Program, Term};

/// Predicates rejected unless a problem opts in.
pub const DEFAULT_DENIED: &[&str] = &[
    "halt/0",
    "halt/1",
    "shell/1",
    "shell/2",
    "system/1",
    "exec/1",
    "open/3",
    "open/4",
    "close/1",
    "see/1",
    "seen/0",
    "tell/1",
    "told/0",
    "read/1",
    "consult/1",
    "ensure_loaded/1",
    "assertz/1",
    "asserta/1",
    "retract/1",
    "abolish/1",
    "abolish/2",
    "op/3",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    denied: BTreeSet<PredicateIndicator>,
    allowed_overrides: BTreeSet<PredicateIndicator>,
    deny_unknown: bool,
}

impl Default for Policy {
    fn default() -> Self {
        default_policy()
    }
}

pub fn default_policy() -> Policy {
    Policy::new(
        DEFAULT_DENIED
            .iter()
            .map(|s| s.parse().expect("default deny list is well-formed")),
        [],
        true,
    )
}

impl Policy {
    /// Overrides win: anything in `allow` is removed from the denied set.
    pub fn new(
        denied: impl IntoIterator<Item = PredicateIndicator>,
        allow: impl IntoIterator<Item = PredicateIndicator>,
        deny_unknown: bool,
    ) -> Policy {
        let allowed_overrides: BTreeSet<_> = allow.into_iter().collect();
        let denied = denied
            .into_iter()
            .filter(|pi| !allowed_overrides.contains(pi))
            .collect();
        Policy {
            denied,
            allowed_overrides,
            deny_unknown,
        }
    }

    /// Adds per-problem opt-ins and extra denials to this policy.
    pub fn with_overrides(
        &self,
        allow: impl IntoIterator<Item = PredicateIndicator>,
        deny: impl IntoIterator<Item = PredicateIndicator>,
    ) -> Policy {
        let allow: Vec<_> = self.allowed_overrides.iter().cloned().chain(allow).collect();
        Policy::new(
            self.denied.iter().cloned().chain(deny),
            allow,
            self.deny_unknown,
        )
    }

    pub fn is_denied(&self, pi: &PredicateIndicator) -> bool {
        self.denied.contains(pi)
    }

    pub fn denied(&self) -> &BTreeSet<PredicateIndicator> {
        &self.denied
    }

    pub fn allowed_overrides(&self) -> &BTreeSet<PredicateIndicator> {
        &self.allowed_overrides
    }

    pub fn deny_unknown(&self) -> bool {
        self.deny_unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "phase", rename_all = "camelCase")]
pub enum Phase {
    Static { line: usize, column: usize, length: usize },
    Dynamic { step: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationKind {
    /// The predicate is on the deny list.
    Denied,
    /// Neither defined by the program nor a builtin.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub indicator: PredicateIndicator,
    #[serde(flatten)]
    pub phase: Phase,
    pub kind: ViolationKind,
    pub reason: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.phase {
            Phase::Static { line, column, .. } => write!(f, "{line}:{column}: {}", self.reason),
            Phase::Dynamic { step } => write!(f, "at step {step}: {}", self.reason),
        }
    }
}

fn denied_reason(pi: &PredicateIndicator) -> String {
    format!("`{pi}` is not allowed in solutions")
}

/// Flags every denied predicate that appears in call position in a clause
/// body, including inside `,`, `;`, `->`, `\+`, `findall/3`, literal
/// `call/N` goals and the body of a literal clause passed to `assertz/1` or
/// `asserta/1`.
pub fn scan_static(p: &Program, policy: &Policy) -> Vec<Violation> {
    let mut out = Vec::new();
    for clause in p.clauses() {
        for (i, goal) in clause.body.iter().enumerate() {
            let span = clause
                .goal_spans
                .get(i)
                .copied()
                .or(clause.span)
                .unwrap_or(SourceSpan {
                    line: 1,
                    column: 1,
                    length: 0,
                });
            for pi in called_indicators(goal) {
                if policy.is_denied(&pi) {
                    out.push(Violation {
                        reason: denied_reason(&pi),
                        indicator: pi,
                        phase: Phase::Static {
                            line: span.line,
                            column: span.column,
                            length: span.length,
                        },
                        kind: ViolationKind::Denied,
                    });
                }
            }
        }
    }
    out
}

/// Indicators of every literal goal reachable in call position from `goal`.
pub fn called_indicators(goal: &Term) -> Vec<PredicateIndicator> {
    let mut out = Vec::new();
    let mut stack = vec![goal.clone()];
    while let Some(g) = stack.pop() {
        let Some(pi) = g.indicator() else {
            continue;
        };
        let args = g.functor_args().map(|(_, a)| a.to_vec()).unwrap_or_default();
        match (pi.name.as_str(), pi.arity) {
            ("," | ";" | "->", 2) => stack.extend(args.into_iter().rev()),
            ("\\+", 1) => stack.push(args[0].clone()),
            ("findall", 3) => stack.push(args[1].clone()),
            ("call", n) if n >= 1 => {
                let extra = args[1..].to_vec();
                match &args[0] {
                    Term::Atom(a) => stack.push(Term::compound_atom(a.clone(), extra)),
                    Term::Compound { functor, args: inner } => {
                        let mut all = inner.to_vec();
                        all.extend(extra);
                        stack.push(Term::compound_atom(functor.clone(), all));
                    }
                    _ => {}
                }
            }
            ("assertz" | "asserta", 1) => {
                if let Some(parts) = args[0].as_compound(":-", 2) {
                    stack.push(parts[1].clone());
                }
            }
            _ => {}
        }
        out.push(pi);
    }
    out
}

/// Decides whether a dereferenced, callable goal may run.
pub fn guard_call(
    goal: &Term,
    policy: &Policy,
    user_defined: bool,
    step: u64,
) -> Result<(), Violation> {
    let Some(pi) = goal.indicator() else {
        return Ok(());
    };
    let (kind, reason) = if policy.is_denied(&pi) {
        (ViolationKind::Denied, denied_reason(&pi))
    } else if policy.deny_unknown && !user_defined && !is_builtin(&pi) {
        (ViolationKind::Unknown, format!("predicate not defined: {pi}"))
    } else {
        return Ok(());
    };
    Err(Violation {
        indicator: pi,
        phase: Phase::Dynamic { step },
        kind,
        reason,
    })
}

/// Policy hook enforcing a [`Policy`] and recording what it stopped.
///
/// A denied predicate stops the run as a policy violation. An unknown
/// predicate stops it as a runtime error, so learners see "predicate not
/// defined" rather than a security message for a typo.
pub struct SandboxHook<'a> {
    policy: &'a Policy,
    pub violations: Vec<Violation>,
}

impl<'a> SandboxHook<'a> {
    pub fn new(policy: &'a Policy) -> Self {
        SandboxHook {
            policy,
            violations: Vec::new(),
        }
    }
}

impl PolicyHook for SandboxHook<'_> {
    fn check(&mut self, call: &CallSite<'_>) -> Decision {
        match guard_call(call.goal, self.policy, call.user_defined, call.step) {
            Ok(()) => Decision::Allow,
            Err(v) => {
                let reason = v.reason.clone();
                let kind = v.kind;
                self.violations.push(v);
                match kind {
                    ViolationKind::Denied => Decision::Deny(reason),
                    ViolationKind::Unknown => Decision::Missing(reason),
                }
            }
        }
    }
}
