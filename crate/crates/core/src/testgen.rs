//! Randomized test cases: query templates with argument generators, seeded
//! instantiation, runs under the sandbox, and outcome comparison.
//!
//! A template is Prolog text such as `next_prime(int_range(2,10000), P)`.
//! Each argument is one of
//!
//! * `int_range(L,H)`: an integer drawn uniformly from `L..=H`;
//! * `one_of([T1,...])`: one of the listed ground terms, uniformly;
//! * `list_of(G,L,H)`: a list whose length is drawn from `L..=H`, elements
//!   drawn independently from generator `G`;
//! * `fixed(T)` or any other ground term: always `T`;
//! * a variable, `out` or `out(Name)`: an output whose bindings are compared.
//!
//! Randomness comes from ChaCha8 seeded with SHA-256 of the master seed
//! (8 bytes, little endian), the spec name, a zero byte and the trial index
//! (4 bytes, little endian). The first 8 bytes of that digest, read little
//! endian, are the instance seed. Integer ranges use the uniform sampler of
//! `rand` 0.9, pinned in `Cargo.lock`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::engine::{HaltReason, Limits, Solver};
use crate::reader::parse_term;
use crate::sandbox::{Policy, SandboxHook};
use crate::term::{canonical_vars, Atom, Program, Term, Var};

/// Upper bound on generated list lengths.
pub const MAX_LIST_LEN: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    IntRange { lo: i64, hi: i64 },
    OneOf(Vec<Term>),
    ListOf {
        element: Box<Generator>,
        len_lo: usize,
        len_hi: usize,
    },
    Fixed(Term),
}

impl Generator {
    pub fn sample(&self, rng: &mut impl Rng) -> Term {
        match self {
            Generator::IntRange { lo, hi } => Term::int(rng.random_range(*lo..=*hi)),
            Generator::OneOf(items) => items[rng.random_range(0..items.len())].clone(),
            Generator::ListOf {
                element,
                len_lo,
                len_hi,
            } => {
                let n = rng.random_range(*len_lo..=*len_hi);
                Term::list((0..n).map(|_| element.sample(rng)).collect())
            }
            Generator::Fixed(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateArg {
    Input(Generator),
    Output(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    /// Only the first answer counts; the reference must be deterministic.
    First,
    SolutionSet,
    SolutionMultiset,
    /// The first K answers, in order.
    Prefix(usize),
    /// Success or failure only.
    Succeeds,
}

impl fmt::Display for CompareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareMode::First => f.write_str("first"),
            CompareMode::SolutionSet => f.write_str("set"),
            CompareMode::SolutionMultiset => f.write_str("multiset"),
            CompareMode::Prefix(k) => write!(f, "prefix:{k}"),
            CompareMode::Succeeds => f.write_str("succeeds"),
        }
    }
}

impl FromStr for CompareMode {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "first" => CompareMode::First,
            "set" => CompareMode::SolutionSet,
            "multiset" => CompareMode::SolutionMultiset,
            "succeeds" => CompareMode::Succeeds,
            other => match other.strip_prefix("prefix:").map(str::parse::<usize>) {
                Some(Ok(k)) if k > 0 => CompareMode::Prefix(k),
                _ => {
                    return Err(TemplateError(format!(
                        "unknown compare mode `{other}`; use first, set, multiset, prefix:K or succeeds"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TemplateError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSpec {
    pub name: String,
    /// The template as written, for messages.
    pub source: String,
    pub functor: Atom,
    pub args: Vec<TemplateArg>,
    pub trials: u32,
    pub compare: CompareMode,
    pub limits: Limits,
}

const RESERVED: &[(&str, usize)] = &[("int_range", 2), ("one_of", 1), ("list_of", 3), ("fixed", 1)];

impl TestSpec {
    pub fn parse(
        name: &str,
        template: &str,
        trials: u32,
        compare: CompareMode,
        limits: Limits,
    ) -> Result<TestSpec, TemplateError> {
        let err = |m: String| TemplateError(format!("test `{name}`: {m}"));
        if trials == 0 {
            return Err(err("needs at least one trial".into()));
        }
        if let CompareMode::Prefix(k) = compare {
            if k > limits.max_solutions {
                return Err(err(format!(
                    "prefix:{k} exceeds max_solutions = {}",
                    limits.max_solutions
                )));
            }
        }
        limits.validate().map_err(|e| err(e.to_string()))?;
        let text = template.trim().trim_end_matches('.');
        let (term, _) = parse_term(text).map_err(|d| {
            err(format!(
                "template `{text}` does not parse: {}",
                d.first().map_or(String::new(), |d| d.message.clone())
            ))
        })?;
        let (functor, raw_args) = match &term {
            Term::Atom(a) => (a.clone(), Vec::new()),
            Term::Compound { functor, args } => (functor.clone(), args.to_vec()),
            _ => return Err(err(format!("template `{text}` is not a goal"))),
        };
        let mut args = Vec::new();
        let mut auto = 0;
        for (i, a) in raw_args.iter().enumerate() {
            let arg = template_arg(a, &mut auto).map_err(|m| err(format!("argument {}: {m}", i + 1)))?;
            args.push(arg);
        }
        Ok(TestSpec {
            name: name.to_string(),
            source: text.to_string(),
            functor,
            args,
            trials,
            compare,
            limits,
        })
    }

    pub fn indicator(&self) -> crate::term::PredicateIndicator {
        crate::term::PredicateIndicator {
            name: self.functor.clone(),
            arity: self.args.len(),
        }
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            TemplateArg::Output(n) => Some(n.as_str()),
            TemplateArg::Input(_) => None,
        })
    }
}

fn template_arg(t: &Term, auto: &mut usize) -> Result<TemplateArg, String> {
    if let Term::Var(v) = t {
        return Ok(TemplateArg::Output(match v.name.as_deref() {
            Some(n) if n != "_" => n.to_string(),
            _ => next_auto(auto),
        }));
    }
    if t.is_atom("out") {
        return Ok(TemplateArg::Output(next_auto(auto)));
    }
    if let Some(a) = t.as_compound("out", 1) {
        return match &a[0] {
            Term::Var(v) if v.name.as_deref().is_some_and(|n| n != "_") => {
                Ok(TemplateArg::Output(v.name.as_deref().unwrap_or_default().to_string()))
            }
            Term::Atom(n) => Ok(TemplateArg::Output(n.as_str().to_string())),
            _ => Err("out/1 takes a name".into()),
        };
    }
    generator(t).map(TemplateArg::Input)
}

fn next_auto(auto: &mut usize) -> String {
    *auto += 1;
    if *auto == 1 {
        "Out".to_string()
    } else {
        format!("Out{auto}")
    }
}

/// Interprets a generator pseudo-term.
pub fn generator(t: &Term) -> Result<Generator, String> {
    let int = |t: &Term, what: &str| match t {
        Term::Int(i) => Ok(*i),
        other => Err(format!("{what} must be an integer, found `{other}`")),
    };
    if let Some(a) = t.as_compound("int_range", 2) {
        let (lo, hi) = (int(&a[0], "lower bound")?, int(&a[1], "upper bound")?);
        if lo > hi {
            return Err(format!("int_range({lo},{hi}) is empty"));
        }
        return Ok(Generator::IntRange { lo, hi });
    }
    if let Some(a) = t.as_compound("one_of", 1) {
        let items = a[0]
            .list_items()
            .ok_or_else(|| "one_of/1 takes a list".to_string())?;
        if items.is_empty() {
            return Err("one_of([]) has nothing to choose from".into());
        }
        let items: Vec<Term> = items.into_iter().cloned().collect();
        for i in &items {
            check_data(i)?;
        }
        return Ok(Generator::OneOf(items));
    }
    if let Some(a) = t.as_compound("list_of", 3) {
        let element = generator(&a[0])?;
        let (lo, hi) = (int(&a[1], "minimum length")?, int(&a[2], "maximum length")?);
        if lo < 0 || lo > hi {
            return Err(format!("list_of lengths {lo}..{hi} are not a valid range"));
        }
        if hi as usize > MAX_LIST_LEN {
            return Err(format!("list_of maximum length {hi} exceeds {MAX_LIST_LEN}"));
        }
        return Ok(Generator::ListOf {
            element: Box::new(element),
            len_lo: lo as usize,
            len_hi: hi as usize,
        });
    }
    if let Some(a) = t.as_compound("fixed", 1) {
        check_data(&a[0])?;
        return Ok(Generator::Fixed(a[0].clone()));
    }
    check_data(t)?;
    Ok(Generator::Fixed(t.clone()))
}

/// Fixed data must be ground and must not hide generators inside.
fn check_data(t: &Term) -> Result<(), String> {
    if !t.is_ground() {
        return Err(format!(
            "`{t}` contains variables; use a plain variable or `out` for outputs"
        ));
    }
    let mut stack = vec![t];
    while let Some(t) = stack.pop() {
        if let Some(pi) = t.indicator() {
            if RESERVED.contains(&(pi.name.as_str(), pi.arity)) && !t.is_atom(pi.name.as_str()) {
                return Err(format!(
                    "generator {pi} may only be used as a whole argument or a list_of element"
                ));
            }
        }
        if let Term::Compound { args, .. } = t {
            stack.extend(args.iter());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestInstance {
    pub spec_name: String,
    pub trial_index: u32,
    pub query: Term,
    /// Output variables in argument order.
    pub outputs: Vec<Var>,
    pub seed: u64,
}

fn digest_seed(master_seed: u64, spec_name: &str, trial: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(spec_name.as_bytes());
    h.update([0u8]);
    h.update(trial.to_le_bytes());
    let out = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&out[..32]);
    seed
}

pub fn instantiate(spec: &TestSpec, trial_index: u32, master_seed: u64) -> TestInstance {
    let seed_bytes = digest_seed(master_seed, &spec.name, trial_index);
    let seed = u64::from_le_bytes(seed_bytes[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::from_seed(seed_bytes);
    let mut outputs = Vec::new();
    let args = spec
        .args
        .iter()
        .map(|a| match a {
            TemplateArg::Input(g) => g.sample(&mut rng),
            TemplateArg::Output(name) => {
                let v = Var::named(outputs.len(), name);
                outputs.push(v.clone());
                Term::Var(v)
            }
        })
        .collect();
    TestInstance {
        spec_name: spec.name.clone(),
        trial_index,
        query: Term::compound_atom(spec.functor.clone(), args),
        outputs,
        seed,
    }
}

/// Default per-submission master seed: the first 8 bytes (little endian)
/// of SHA-256 over problem id, learner id and attempt number.
pub fn master_seed(problem_id: &str, learner_id: &str, attempt: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(problem_id.as_bytes());
    h.update([0u8]);
    h.update(learner_id.as_bytes());
    h.update([0u8]);
    h.update(attempt.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    /// Output bindings per answer, variables renamed canonically.
    pub solutions: Vec<Vec<Term>>,
    pub truncated: bool,
    pub halt: HaltReason,
    pub detail: Option<String>,
}

impl Outcome {
    /// A policy violation or runtime error stopped the run.
    pub fn error(&self) -> Option<(HaltReason, &str)> {
        match self.halt {
            HaltReason::PolicyViolation | HaltReason::RuntimeError => {
                Some((self.halt, self.detail.as_deref().unwrap_or("")))
            }
            _ => None,
        }
    }

    fn out_of_resources(&self) -> bool {
        matches!(self.halt, HaltReason::StepCap | HaltReason::DepthCap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Reference,
    Submission,
}

fn solver_for(spec: &TestSpec, role: Role) -> Solver {
    let mut limits = spec.limits;
    let (max, probe) = match spec.compare {
        // The reference is asked for a second answer to check determinism.
        CompareMode::First => (if role == Role::Reference { 2 } else { 1 }, false),
        CompareMode::Succeeds => (1, false),
        CompareMode::Prefix(k) => (k, false),
        CompareMode::SolutionSet | CompareMode::SolutionMultiset => (limits.max_solutions, true),
    };
    limits.max_solutions = max;
    Solver::new(limits).probe_exhaustion(probe)
}

/// Runs one instance against `program` under the sandbox; violations and
/// errors come back inside the outcome. The violations the guard recorded
/// are returned alongside.
pub fn run_with(
    program: &Program,
    spec: &TestSpec,
    inst: &TestInstance,
    policy: &Policy,
    role: Role,
    deadline: Option<std::time::Instant>,
) -> (Outcome, Vec<crate::sandbox::Violation>) {
    let mut hook = SandboxHook::new(policy);
    let out = solver_for(spec, role).deadline(deadline).solve(
        program,
        std::slice::from_ref(&inst.query),
        &inst.outputs,
        &mut hook,
        &mut crate::engine::NoTrace,
    );
    let mut solutions: Vec<Vec<Term>> = out
        .solutions
        .iter()
        .map(|s| {
            let tuple: Vec<Term> = inst.outputs.iter().map(|v| s.apply(&Term::Var(v.clone()))).collect();
            canonical_vars(&tuple)
        })
        .collect();
    if matches!(spec.compare, CompareMode::SolutionSet | CompareMode::SolutionMultiset) {
        solutions.sort();
    }
    let violations = hook
        .violations
        .into_iter()
        .filter(|v| v.kind == crate::sandbox::ViolationKind::Denied)
        .collect();
    (
        Outcome {
            solutions,
            truncated: out.truncated,
            halt: out.halt_reason,
            detail: out.error_detail,
        },
        violations,
    )
}

/// Runs a submission on one instance.
pub fn run_one(program: &Program, spec: &TestSpec, inst: &TestInstance, policy: &Policy) -> Outcome {
    run_with(program, spec, inst, policy, Role::Submission, None).0
}

/// Runs the reference solution on one instance.
pub fn run_reference(program: &Program, spec: &TestSpec, inst: &TestInstance, policy: &Policy) -> Outcome {
    run_with(program, spec, inst, policy, Role::Reference, None).0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    Match,
    Mismatch(String),
}

/// The reference outcome cannot serve as an expectation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BundleError(pub String);

/// `P = 11, Q = 2`, or `true` when there are no outputs.
pub fn render_witness(outputs: &[Var], tuple: &[Term]) -> String {
    if outputs.is_empty() {
        return "true".into();
    }
    outputs
        .iter()
        .zip(tuple)
        .map(|(v, t)| format!("{} = {t}", v.name.as_deref().unwrap_or("_")))
        .collect::<Vec<_>>()
        .join(", ")
}

fn describe_failure(actual: &Outcome) -> Option<String> {
    if let Some((reason, detail)) = actual.error() {
        return Some(match reason {
            HaltReason::PolicyViolation => format!("the run was stopped: {detail}"),
            _ => format!("error: {detail}"),
        });
    }
    if actual.out_of_resources() {
        let what = actual.detail.as_deref().unwrap_or("limit reached");
        return Some(format!("no answer within the limits ({what})"));
    }
    None
}

pub fn compare_outcomes(
    expected: &Outcome,
    actual: &Outcome,
    mode: CompareMode,
    inst: &TestInstance,
) -> Result<Comparison, BundleError> {
    let query = inst.query.to_string();
    if let Some((_, detail)) = expected.error() {
        return Err(BundleError(format!("reference fails on {query}: {detail}")));
    }
    let witness = |t: &Vec<Term>| render_witness(&inst.outputs, t);
    let mismatch = |m: String| Ok(Comparison::Mismatch(m));
    match mode {
        CompareMode::First => {
            if expected.solutions.len() > 1 {
                return Err(BundleError(format!(
                    "reference is not deterministic on {query}; use a set or prefix comparison"
                )));
            }
            if expected.solutions.is_empty() && expected.out_of_resources() {
                return Err(BundleError(format!("reference exceeds its limits on {query}")));
            }
            match (expected.solutions.first(), actual.solutions.first()) {
                (Some(e), Some(a)) if e == a => Ok(Comparison::Match),
                (None, None) if describe_failure(actual).is_none() => Ok(Comparison::Match),
                (e, a) => {
                    let expected_text = e.map_or_else(|| "no solution".to_string(), witness);
                    let got = match (a, describe_failure(actual)) {
                        (Some(a), _) => witness(a),
                        (None, Some(f)) => f,
                        (None, None) => "no solution".to_string(),
                    };
                    mismatch(format!("for {query}: expected {expected_text}, got {got}"))
                }
            }
        }
        CompareMode::Succeeds => {
            if expected.solutions.is_empty() && expected.out_of_resources() {
                return Err(BundleError(format!("reference exceeds its limits on {query}")));
            }
            let want = !expected.solutions.is_empty();
            let got = !actual.solutions.is_empty();
            if want == got {
                return Ok(Comparison::Match);
            }
            let how = describe_failure(actual).unwrap_or_else(|| {
                if got { "it succeeded" } else { "it failed" }.to_string()
            });
            let goal = if want { "to succeed" } else { "to fail" };
            mismatch(format!("{query} expected {goal}, but {how}"))
        }
        CompareMode::Prefix(k) => {
            if expected.out_of_resources() && expected.solutions.len() < k {
                return Err(BundleError(format!("reference exceeds its limits on {query}")));
            }
            let e = &expected.solutions[..expected.solutions.len().min(k)];
            let a = &actual.solutions[..actual.solutions.len().min(k)];
            if e == a && (actual.solutions.len() >= e.len()) && (e.len() == k || describe_failure(actual).is_none()) {
                return Ok(Comparison::Match);
            }
            for (i, ew) in e.iter().enumerate() {
                match a.get(i) {
                    Some(aw) if aw == ew => continue,
                    Some(aw) => {
                        return mismatch(format!(
                            "for {query}: answer {} should be {}, got {}",
                            i + 1,
                            witness(ew),
                            witness(aw)
                        ))
                    }
                    None => {
                        let got = describe_failure(actual).unwrap_or_else(|| "no further answers".into());
                        return mismatch(format!(
                            "for {query}: answer {} should be {}, got {got}",
                            i + 1,
                            witness(ew)
                        ));
                    }
                }
            }
            let extra = &a[e.len()];
            mismatch(format!("for {query}: unexpected answer {}", witness(extra)))
        }
        CompareMode::SolutionSet | CompareMode::SolutionMultiset => {
            if expected.truncated {
                return Err(BundleError(format!(
                    "reference answers for {query} do not fit the limits; a {mode} comparison needs them all"
                )));
            }
            if let Some(f) = describe_failure(actual) {
                return mismatch(format!("for {query}: {f}"));
            }
            if actual.truncated {
                return mismatch(format!(
                    "for {query}: too many answers (more than {})",
                    actual.solutions.len()
                ));
            }
            let (mut e, mut a) = (expected.solutions.clone(), actual.solutions.clone());
            if mode == CompareMode::SolutionSet {
                e.dedup();
                a.dedup();
            }
            if e == a {
                return Ok(Comparison::Match);
            }
            let missing = multiset_difference(&e, &a);
            if let Some(m) = missing.first() {
                return mismatch(format!("for {query}: missing answer {}", witness(m)));
            }
            let extra = multiset_difference(&a, &e);
            let x = extra.first().expect("sorted lists differ");
            let repeated = mode == CompareMode::SolutionMultiset && e.contains(x);
            mismatch(format!(
                "for {query}: {} {}",
                if repeated { "answer occurs too often:" } else { "unexpected answer" },
                witness(x)
            ))
        }
    }
}

/// Elements of sorted `a` not matched in sorted `b`, with multiplicity.
fn multiset_difference<'a>(a: &'a [Vec<Term>], b: &[Vec<Term>]) -> Vec<&'a Vec<Term>> {
    let mut counts: HashMap<&Vec<Term>, usize> = HashMap::new();
    for x in b {
        *counts.entry(x).or_default() += 1;
    }
    a.iter()
        .filter(|x| match counts.get_mut(*x) {
            Some(n) if *n > 0 => {
                *n -= 1;
                false
            }
            _ => true,
        })
        .collect()
}
