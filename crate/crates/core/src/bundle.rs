//! Problem bundles on disk and their validation.
//!
//! A bundle is a directory holding `problem.toml`, `reference.pl` and,
//! optionally, `structure-target.pl`. The manifest looks like this:
//!
//! ```toml
//! id = "next_prime"
//! title = "The next prime"
//! description = "Define next_prime(N, P): P is the least prime greater than N."
//! domains = ["arithmetic"]
//! structure_mandatory = false      # only meaningful with a structure target
//!
//! [limits]                         # optional, defaults shown
//! max_steps = 200000
//! max_depth = 4000
//! max_solutions = 50
//!
//! [policy]                         # optional
//! allow = ["assertz/1"]            # lift entries of the default deny list
//! deny = ["nb_setval/2"]           # deny more
//! deny_unknown = true
//!
//! [[hints]]
//! after = 3                        # failed attempts before the hint shows
//! text = "..."
//!
//! [[tests]]
//! name = "random"
//! template = "next_prime(int_range(2,10000), P)"
//! trials = 20                      # default 10
//! compare = "first"                # first | set | multiset | prefix:K | succeeds
//!
//! [[aux]]
//! predicate = "is_prime/1"
//! hint = "..."                     # shown alongside the aux result
//! required = false
//! [[aux.tests]]
//! name = "is_prime"
//! template = "is_prime(int_range(2,200))"
//! compare = "succeeds"
//! ```
//!
//! Each test may carry its own `[tests.limits]` table, which replaces the
//! bundle limits for that test field by field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::{is_builtin, Limits};
use crate::grader::{grade, Stage, Status, Verdict};
use crate::reader::parse_program;
use crate::sandbox::{default_policy, scan_static, Policy};
use crate::term::{PredicateIndicator, Program};
use crate::testgen::{CompareMode, TestSpec};
use crate::tutor::{HintLadder, HintRung};

pub const MANIFEST: &str = "problem.toml";
pub const REFERENCE: &str = "reference.pl";
pub const STRUCTURE_TARGET: &str = "structure-target.pl";
pub const DEFAULT_TRIALS: u32 = 10;
/// Seeds the reference is graded under during validation.
pub const VALIDATION_SEEDS: std::ops::Range<u64> = 0..3;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub domains: Vec<String>,
    #[serde(default)]
    pub structure_mandatory: bool,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub hints: Vec<HintRung>,
    #[serde(default)]
    pub tests: Vec<TestConfig>,
    #[serde(default)]
    pub aux: Vec<AuxConfig>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_steps: Option<u64>,
    pub max_depth: Option<usize>,
    pub max_solutions: Option<usize>,
}

impl LimitsConfig {
    fn over(&self, base: Limits) -> Limits {
        Limits {
            max_steps: self.max_steps.unwrap_or(base.max_steps),
            max_depth: self.max_depth.unwrap_or(base.max_depth),
            max_solutions: self.max_solutions.unwrap_or(base.max_solutions),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default)]
    pub allow: Vec<String>,
    #[serde(default)]
    pub deny: Vec<String>,
    #[serde(default = "yes")]
    pub deny_unknown: bool,
}

fn yes() -> bool {
    true
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            allow: Vec::new(),
            deny: Vec::new(),
            deny_unknown: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub name: String,
    pub template: String,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_compare")]
    pub compare: String,
    #[serde(default)]
    pub limits: LimitsConfig,
}

fn default_trials() -> u32 {
    DEFAULT_TRIALS
}

fn default_compare() -> String {
    "first".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    pub predicate: String,
    #[serde(default)]
    pub hint: Option<String>,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub tests: Vec<TestConfig>,
}

#[derive(Debug, Clone)]
pub struct AuxSpec {
    pub indicator: PredicateIndicator,
    pub specs: Vec<TestSpec>,
    pub hint: Option<String>,
    pub required: bool,
}

/// A loaded problem. The reference and the test specs stay on the server.
#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub id: String,
    pub title: String,
    pub description: String,
    pub domains: Vec<String>,
    pub reference_source: String,
    pub reference: Program,
    pub main_specs: Vec<TestSpec>,
    pub aux: Vec<AuxSpec>,
    pub structure_target: Option<Program>,
    pub structure_mandatory: bool,
    pub policy: Policy,
    pub hints: HintLadder,
    pub limits: Limits,
}

/// Everything wrong with a bundle, one item per problem found.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct InvalidBundle {
    pub location: String,
    pub problems: Vec<String>,
}

impl fmt::Display for InvalidBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bundle {}:", self.location)?;
        for p in &self.problems {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

impl ProblemBundle {
    /// Reads a bundle directory. Structural problems are reported; the
    /// reference is not run (see [`validate`]).
    pub fn load(dir: &Path) -> Result<ProblemBundle, InvalidBundle> {
        let fail = |problems: Vec<String>| InvalidBundle {
            location: dir.display().to_string(),
            problems,
        };
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|e| fail(vec![format!("cannot read {name}: {e}")]))
        };
        let manifest_text = read(MANIFEST)?;
        let reference_source = read(REFERENCE)?;
        let target_path = dir.join(STRUCTURE_TARGET);
        let target_source = if target_path.exists() {
            Some(read(STRUCTURE_TARGET)?)
        } else {
            None
        };
        Self::from_sources(&manifest_text, &reference_source, target_source.as_deref()).map_err(|mut e| {
            e.location = dir.display().to_string();
            e
        })
    }

    pub fn from_sources(
        manifest: &str,
        reference_source: &str,
        structure_target: Option<&str>,
    ) -> Result<ProblemBundle, InvalidBundle> {
        let mut problems = Vec::new();
        let fail = |problems: Vec<String>| InvalidBundle {
            location: "<memory>".into(),
            problems,
        };
        let m: Manifest = toml::from_str(manifest).map_err(|e| fail(vec![format!("{MANIFEST}: {e}")]))?;
        if m.id.is_empty() || !m.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            problems.push(format!("id `{}` must be non-empty and use only letters, digits, `_` and `-`", m.id));
        }
        let limits = m.limits.over(Limits::default());
        if let Err(e) = limits.validate() {
            problems.push(format!("[limits]: {e}"));
        }
        let indicators = |list: &[String], what: &str, problems: &mut Vec<String>| -> Vec<PredicateIndicator> {
            list.iter()
                .filter_map(|s| match s.parse::<PredicateIndicator>() {
                    Ok(pi) => Some(pi),
                    Err(e) => {
                        problems.push(format!("[policy] {what}: {e}"));
                        None
                    }
                })
                .collect()
        };
        let allow = indicators(&m.policy.allow, "allow", &mut problems);
        let deny = indicators(&m.policy.deny, "deny", &mut problems);
        let base = default_policy();
        let policy = Policy::new(
            base.denied().iter().cloned().chain(deny),
            allow,
            m.policy.deny_unknown,
        );
        let hints = HintLadder::new(m.hints.clone()).unwrap_or_else(|e| {
            problems.push(format!("[[hints]] {e}"));
            HintLadder::default()
        });

        let reference = match parse_program(reference_source) {
            Ok(p) => p.program,
            Err(diags) => {
                for d in diags.iter().filter(|d| d.is_error()) {
                    problems.push(format!("{REFERENCE}:{}:{}: {} {}", d.span.line, d.span.column, d.code, d.message));
                }
                Program::default()
            }
        };
        let structure_target = structure_target.and_then(|src| match parse_program(src) {
            Ok(p) => Some(p.program),
            Err(diags) => {
                for d in diags.iter().filter(|d| d.is_error()) {
                    problems.push(format!(
                        "{STRUCTURE_TARGET}:{}:{}: {} {}",
                        d.span.line, d.span.column, d.code, d.message
                    ));
                }
                None
            }
        });
        if m.structure_mandatory && structure_target.is_none() && !problems.iter().any(|p| p.starts_with(STRUCTURE_TARGET)) {
            problems.push(format!("structure_mandatory is set but there is no {STRUCTURE_TARGET}"));
        }

        let mut names = BTreeSet::new();
        let mut specs = |tests: &[TestConfig], ctx: &str, problems: &mut Vec<String>| -> Vec<TestSpec> {
            let mut out = Vec::new();
            for t in tests {
                if !names.insert(t.name.clone()) {
                    problems.push(format!("{ctx}: test name `{}` is used twice", t.name));
                    continue;
                }
                let compare = match t.compare.parse::<CompareMode>() {
                    Ok(c) => c,
                    Err(e) => {
                        problems.push(format!("{ctx}: test `{}`: {e}", t.name));
                        continue;
                    }
                };
                match TestSpec::parse(&t.name, &t.template, t.trials, compare, t.limits.over(limits)) {
                    Ok(s) => out.push(s),
                    Err(e) => problems.push(format!("{ctx}: {e}")),
                }
            }
            out
        };
        if m.tests.is_empty() {
            problems.push("[[tests]]: at least one test is required".into());
        }
        let main_specs = specs(&m.tests, "[[tests]]", &mut problems);
        let mut aux = Vec::new();
        let mut seen = BTreeSet::new();
        for a in &m.aux {
            let ctx = format!("[[aux]] {}", a.predicate);
            let indicator = match a.predicate.parse::<PredicateIndicator>() {
                Ok(pi) => pi,
                Err(e) => {
                    problems.push(format!("[[aux]]: {e}"));
                    continue;
                }
            };
            if !seen.insert(indicator.clone()) {
                problems.push(format!("{ctx}: declared twice"));
                continue;
            }
            if a.tests.is_empty() {
                problems.push(format!("{ctx}: needs at least one test"));
            }
            let aux_specs = specs(&a.tests, &ctx, &mut problems);
            for s in &aux_specs {
                if s.indicator() != indicator {
                    problems.push(format!("{ctx}: test `{}` calls {} instead", s.name, s.indicator()));
                }
            }
            aux.push(AuxSpec {
                indicator,
                specs: aux_specs,
                hint: a.hint.clone(),
                required: a.required,
            });
        }
        for s in main_specs.iter().chain(aux.iter().flat_map(|a| a.specs.iter())) {
            let pi = s.indicator();
            if !reference.is_empty() && !reference.defines(&pi) && !is_builtin(&pi) {
                problems.push(format!("test `{}`: the reference does not define {pi}", s.name));
            }
        }
        for v in scan_static(&reference, &policy) {
            problems.push(format!("{REFERENCE}: {v}"));
        }

        if !problems.is_empty() {
            return Err(fail(problems));
        }
        Ok(ProblemBundle {
            id: m.id,
            title: m.title,
            description: m.description,
            domains: m.domains,
            reference_source: reference_source.to_string(),
            reference,
            main_specs,
            aux,
            structure_target,
            structure_mandatory: m.structure_mandatory,
            policy,
            hints,
            limits,
        })
    }
}

/// Grades the reference against its own bundle under a few seeds. Returns
/// one message per failure, empty when the bundle is sound.
pub fn validate(bundle: &ProblemBundle) -> Vec<String> {
    let mut problems = Vec::new();
    for seed in VALIDATION_SEEDS {
        let report = match grade(bundle, &bundle.reference_source, seed) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        if report.verdict == Verdict::Correct
            && report.aux_results.iter().all(|a| a.status == Status::Pass)
            && report.structure_report().is_none_or(|s| s.matched)
        {
            continue;
        }
        for s in &report.stages {
            if s.status == Status::Fail && s.stage != Stage::Semantic {
                problems.push(format!("seed {seed}: reference fails the {} stage", s.stage));
            }
        }
        for t in report.trial_counts.iter().filter(|t| t.failed > 0) {
            problems.push(format!("seed {seed}: reference fails test `{}` in {} trial(s)", t.spec, t.failed));
        }
        for c in &report.counterexamples {
            problems.push(format!("seed {seed}: {c}"));
        }
        for a in &report.aux_results {
            match a.status {
                Status::Pass => {}
                Status::Skipped => problems.push(format!("aux {}: the reference does not define it", a.indicator)),
                Status::Fail => {
                    for c in &a.counterexamples {
                        problems.push(format!("seed {seed}: aux {}: {c}", a.indicator));
                    }
                }
            }
        }
        if let Some(s) = report.structure_report().filter(|s| !s.matched) {
            for p in &s.problems {
                problems.push(format!("reference does not match the structure target: {p}"));
            }
        }
        for d in &report.stage(Stage::Semantic).details {
            if let crate::grader::Detail::Note { message } = d {
                problems.push(format!("seed {seed}: {message}"));
            }
        }
    }
    problems.dedup();
    problems
}

/// Loads and validates one bundle directory.
pub fn load_validated(dir: &Path) -> Result<ProblemBundle, InvalidBundle> {
    let b = ProblemBundle::load(dir)?;
    let problems = validate(&b);
    if problems.is_empty() {
        Ok(b)
    } else {
        Err(InvalidBundle {
            location: dir.display().to_string(),
            problems,
        })
    }
}

/// Every valid bundle under a root directory, keyed and ordered by id.
#[derive(Debug, Clone, Default)]
pub struct Repository {
    bundles: BTreeMap<String, ProblemBundle>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot read bundle root {path}: {source}")]
pub struct RootError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl Repository {
    /// Loads each subdirectory with a manifest. Invalid bundles are skipped
    /// and returned alongside.
    pub fn load(root: &Path) -> Result<(Repository, Vec<InvalidBundle>), RootError> {
        let err = |source| RootError {
            path: root.to_path_buf(),
            source,
        };
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST).is_file())
            .collect();
        dirs.sort();
        let mut repo = Repository::default();
        let mut rejected = Vec::new();
        for dir in dirs {
            match load_validated(&dir) {
                Ok(b) if repo.bundles.contains_key(&b.id) => rejected.push(InvalidBundle {
                    location: dir.display().to_string(),
                    problems: vec![format!("duplicate problem id `{}`", b.id)],
                }),
                Ok(b) => {
                    repo.bundles.insert(b.id.clone(), b);
                }
                Err(e) => rejected.push(e),
            }
        }
        Ok((repo, rejected))
    }

    pub fn from_bundles(bundles: impl IntoIterator<Item = ProblemBundle>) -> Repository {
        Repository {
            bundles: bundles.into_iter().map(|b| (b.id.clone(), b)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&ProblemBundle> {
        self.bundles.get(id)
    }

    /// Bundles in id order.
    pub fn iter(&self) -> impl Iterator<Item = &ProblemBundle> {
        self.bundles.values()
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }
}
