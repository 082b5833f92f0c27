//! Command-line entry points. Exit codes: 0 correct or success, 1 incorrect,
//! 2 usage error, 3 invalid bundle, 4 internal error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bundle::{validate, InvalidBundle, ProblemBundle, Repository};
use crate::grader::{grade_isolated, Verdict};
use crate::service::{AppState, ServiceConfig, SubmissionResponse};
use crate::testgen::{instantiate, CompareMode, master_seed, render_witness, run_reference, TestSpec};

pub const EXIT_CORRECT: i32 = 0;
pub const EXIT_INCORRECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUNDLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Learner id used for the default seed of local grading.
pub const LOCAL_LEARNER: &str = "local";

#[derive(Debug, Parser)]
#[command(name = "prolab", version, about = "Grade Prolog exercises against reference solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grade a solution file against a problem bundle.
    Grade {
        bundle: PathBuf,
        solution: PathBuf,
        /// Master seed for the random test instances.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a bundle: manifest, reference, hints and self-grading.
    Validate { bundle: PathBuf },
    /// Print instantiated test queries with the reference's answers.
    Preview {
        bundle: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per test (default: the test's own trial count).
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Serve every valid bundle under a directory over HTTP.
    Serve {
        root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Attempt log (JSON lines).
        #[arg(long, default_value = "attempts.jsonl")]
        log_file: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CORRECT };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Grade {
            bundle,
            solution,
            seed,
            json,
        } => cmd_grade(&bundle, &solution, seed, json, out),
        Command::Validate { bundle } => cmd_validate(&bundle, out),
        Command::Preview { bundle, seed, trials } => cmd_preview(&bundle, seed, trials, out),
        Command::Serve {
            root,
            port,
            host,
            log_file,
        } => cmd_serve(&root, &host, port, &log_file, err),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "prolab: {message}");
            code
        }
    }
}

struct Failure(i32, String);

fn io_failure(e: std::io::Error) -> Failure {
    Failure(EXIT_INTERNAL, e.to_string())
}

fn load_bundle(dir: &Path) -> Result<ProblemBundle, Failure> {
    if !dir.is_dir() {
        return Err(Failure(EXIT_USAGE, format!("{} is not a directory", dir.display())));
    }
    ProblemBundle::load(dir).map_err(|e| Failure(EXIT_BUNDLE, e.to_string()))
}

fn load_valid_bundle(dir: &Path) -> Result<ProblemBundle, Failure> {
    let b = load_bundle(dir)?;
    let problems = validate(&b);
    if problems.is_empty() {
        Ok(b)
    } else {
        let e = InvalidBundle {
            location: dir.display().to_string(),
            problems,
        };
        Err(Failure(EXIT_BUNDLE, e.to_string()))
    }
}

fn cmd_grade(bundle: &Path, solution: &Path, seed: Option<u64>, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let b = load_valid_bundle(bundle)?;
    let source = std::fs::read_to_string(solution)
        .map_err(|e| Failure(EXIT_USAGE, format!("cannot read {}: {e}", solution.display())))?;
    let seed = seed.unwrap_or_else(|| master_seed(&b.id, LOCAL_LEARNER, 1));
    let report = grade_isolated(&b, &source, seed, None).map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
    let verdict = report.verdict;
    let response = SubmissionResponse::standalone(report);
    if json {
        serde_json::to_writer_pretty(&mut *out, &response).map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
        writeln!(out).map_err(io_failure)?;
    } else {
        write!(out, "{}", response.report).map_err(io_failure)?;
        writeln!(out, "distance: {:.3}", response.distance).map_err(io_failure)?;
    }
    Ok(if verdict == Verdict::Correct { EXIT_CORRECT } else { EXIT_INCORRECT })
}

fn cmd_validate(bundle: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let b = load_valid_bundle(bundle)?;
    let aux_tests: usize = b.aux.iter().map(|a| a.specs.len()).sum();
    writeln!(
        out,
        "{}: valid ({} tests, {} auxiliary predicates with {} tests, {} hints{})",
        b.id,
        b.main_specs.len(),
        b.aux.len(),
        aux_tests,
        b.hints.rungs().len(),
        if b.structure_target.is_some() { ", structure target" } else { "" }
    )
    .map_err(io_failure)?;
    Ok(EXIT_CORRECT)
}

/// One line per instance: `query ⇒ answers`.
pub fn preview_lines(bundle: &ProblemBundle, seed: u64, trials: Option<u32>) -> Vec<String> {
    let mut lines = Vec::new();
    let specs = bundle
        .main_specs
        .iter()
        .chain(bundle.aux.iter().flat_map(|a| a.specs.iter()));
    for spec in specs {
        lines.push(format!("# {} ({}, {} trials)", spec.name, spec.compare, spec.trials));
        for trial in 0..trials.unwrap_or(spec.trials) {
            lines.push(preview_one(bundle, spec, trial, seed));
        }
    }
    lines
}

fn preview_one(bundle: &ProblemBundle, spec: &TestSpec, trial: u32, seed: u64) -> String {
    let inst = instantiate(spec, trial, seed);
    let outcome = run_reference(&bundle.reference, spec, &inst, &bundle.policy);
    let answers = if let Some((_, detail)) = outcome.error() {
        format!("error: {detail}")
    } else if outcome.solutions.is_empty() {
        "false".to_string()
    } else if spec.compare == CompareMode::Succeeds {
        "true".to_string()
    } else {
        let mut shown: Vec<String> = outcome
            .solutions
            .iter()
            .map(|s| render_witness(&inst.outputs, s))
            .collect();
        if outcome.truncated {
            shown.push("...".into());
        }
        shown.join(" ; ")
    };
    format!("{} ⇒ {answers}", inst.query)
}

fn cmd_preview(bundle: &Path, seed: u64, trials: Option<u32>, out: &mut dyn Write) -> Result<i32, Failure> {
    if trials == Some(0) {
        return Err(Failure(EXIT_USAGE, "--trials must be at least 1".into()));
    }
    let b = load_valid_bundle(bundle)?;
    for line in preview_lines(&b, seed, trials) {
        writeln!(out, "{line}").map_err(io_failure)?;
    }
    Ok(EXIT_CORRECT)
}

fn cmd_serve(root: &Path, host: &str, port: u16, log_file: &Path, err: &mut dyn Write) -> Result<i32, Failure> {
    let (repo, rejected) = Repository::load(root).map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    for r in &rejected {
        tracing::warn!("excluding {r}");
        let _ = writeln!(err, "excluding {r}");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_failure)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure(EXIT_USAGE, format!("cannot listen on {host}:{port}: {e}")))?;
        let count = repo.len();
        let state = AppState::with_log(repo, log_file, ServiceConfig::default())
            .map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
        let addr = listener.local_addr().map_err(io_failure)?;
        tracing::info!("serving {count} problems on http://{addr}");
        crate::service::serve(listener, state).await.map_err(io_failure)?;
        Ok(EXIT_CORRECT)
    })
}
