//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach stdout.

mod corpus;
mod fuzz;
mod mutants;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use prolab::bundle::{load_validated, validate, ProblemBundle, Repository};
use prolab::engine::{solve, AllowAll, Limits, NoTrace};
use prolab::grader::{grade, grade_isolated, Detail, FeedbackReport, Stage, Status, Verdict};
use prolab::reader::{parse_program, parse_query};
use prolab::sandbox::ViolationKind;
use prolab::service::{router, AppState, ServiceConfig};
use prolab::term::{Program, Term};
use prolab::testgen::master_seed;
use prolab::tutor::{compute_distance, HintLadder, HintRung};

type Outcome = Result<String, String>;

fn bundles_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bundles")
}

fn bundle(id: &str) -> ProblemBundle {
    load_validated(&bundles_root().join(id)).unwrap_or_else(|e| panic!("{e}"))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn render_answers(program: &str, query: &str, limits: Limits) -> Result<Vec<String>, String> {
    let p = if program.is_empty() {
        Program::default()
    } else {
        parse_program(program).map_err(|d| format!("{d:?}"))?.program
    };
    let q = parse_query(query).map_err(|d| format!("{d:?}"))?;
    let out = solve(&p, &q.goals, &q.vars, limits, &mut AllowAll, &mut NoTrace);
    if let Some(e) = &out.error_detail {
        return Err(e.clone());
    }
    Ok(out
        .solutions
        .iter()
        .map(|s| {
            let bound: Vec<String> = q
                .vars
                .iter()
                .filter(|v| !matches!(s.apply(&Term::Var((*v).clone())), Term::Var(_)))
                .map(|v| format!("{} = {}", v, s.apply(&Term::Var(v.clone()))))
                .collect();
            if bound.is_empty() {
                "true".to_string()
            } else {
                bound.join(", ")
            }
        })
        .collect())
}

fn engine_conformance() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for case in corpus::CASES {
        let mut limits = Limits::default();
        if let Some(cap) = case.cap {
            limits.max_solutions = cap;
        }
        match render_answers(case.program, case.query, limits) {
            Ok(got) if got == case.answers => {}
            Ok(got) => failures.push(format!("{}: got {got:?}", case.name)),
            Err(e) => failures.push(format!("{}: {e}", case.name)),
        }
    }
    let elapsed = start.elapsed();
    check(corpus::CASES.len() >= 25, || format!("only {} cases", corpus::CASES.len()))?;
    check(failures.is_empty(), || failures.join("; "))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{} program/query pairs match in {elapsed:.2?}", corpus::CASES.len()))
}

// ---------------------------------------------------------------- 2

fn abort_rule_holds(r: &FeedbackReport) -> Result<(), String> {
    let st = |s| r.stage(s).status;
    if st(Stage::Syntax) == Status::Fail {
        for s in [Stage::Forbidden, Stage::Semantic, Stage::Structure] {
            check(st(s) == Status::Skipped, || format!("syntax failed but {s:?} is {:?}", st(s)))?;
        }
    }
    if st(Stage::Forbidden) == Status::Fail {
        for s in [Stage::Semantic, Stage::Structure] {
            check(st(s) == Status::Skipped, || format!("forbidden failed but {s:?} is {:?}", st(s)))?;
        }
    }
    if r.verdict == Verdict::Correct {
        check(r.stages.iter().all(|s| s.status != Status::Fail), || "correct with a failed stage".into())?;
    }
    Ok(())
}

fn fuzz_corpus() -> Outcome {
    let bundles: Vec<ProblemBundle> = ["next_prime", "gcd", "naive_sort", "compress"].map(bundle).into();
    let references: Vec<String> = bundles.iter().map(|b| b.reference_source.clone()).collect();
    let corpus = fuzz::corpus(0x5eed, &references);
    let start = Instant::now();
    let (mut syntax, mut forbidden) = (0, 0);
    for (i, (label, source)) in corpus.iter().enumerate() {
        let b = &bundles[i % bundles.len()];
        let deadline = Instant::now() + Duration::from_secs(2);
        let r = grade_isolated(b, source, i as u64, Some(deadline))
            .map_err(|e| format!("{label} #{i} against {}: {e}", b.id))?;
        abort_rule_holds(&r).map_err(|e| format!("{label} #{i}: {e}"))?;
        serde_json::to_string(&r).map_err(|e| format!("{label} #{i}: {e}"))?;
        syntax += (r.stage(Stage::Syntax).status == Status::Fail) as usize;
        forbidden += (r.stage(Stage::Forbidden).status == Status::Fail) as usize;
    }
    check(corpus.len() >= 1000, || format!("only {} submissions", corpus.len()))?;
    Ok(format!(
        "{} submissions, {syntax} syntax failures, {forbidden} forbidden failures, no crashes, {:.1?}",
        corpus.len(),
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 3

const ESCAPES: &[(&str, &str)] = &[
    ("literal halt", "next_prime(N, P) :- halt, P is N + 1."),
    ("literal halt/1", "next_prime(N, P) :- P is N + 1, halt(0)."),
    ("shell via =..", "next_prime(N, P) :- G =.. [shell, ls], call(G), P is N + 1."),
    ("shell via =.. as a goal", "next_prime(N, P) :- X = shell, G =.. [X, ls], G, P is N + 1."),
    ("call/2 literal", "next_prime(N, P) :- call(shell, ls), P is N + 1."),
    ("call/2 indirection", "next_prime(N, P) :- F = shell, call(F, ls), P is N + 1."),
    ("call/3 of call", "next_prime(N, P) :- call(call, halt), P is N + 1."),
    ("call/1 of a bound variable", "next_prime(N, P) :- G = halt, call(G), P is N + 1."),
    ("under negation", "next_prime(N, P) :- \\+ halt, P is N + 1."),
    ("dynamic under negation", "next_prime(N, P) :- \\+ (G = halt, call(G)), P is N + 1."),
    ("under disjunction", "next_prime(N, P) :- ( fail ; halt ), P is N + 1."),
    ("dynamic under disjunction", "next_prime(N, P) :- ( G = shell(ls) ; true ), call(G), P is N + 1."),
    ("under if-then-else", "next_prime(N, P) :- ( N > 0 -> halt ; true ), P is N + 1."),
    ("under findall", "next_prime(N, P) :- findall(X, shell(X), _), P is N + 1."),
    ("assertz of a denied body", "next_prime(N, P) :- assertz((q :- halt)), q, P is N + 1."),
    ("assertz of a call/2 body", "next_prime(N, P) :- assertz((q :- call(shell, ls))), q, P is N + 1."),
    ("assertz with a variable body", "next_prime(N, P) :- G = halt, assertz((q :- G)), q, P is N + 1."),
    ("helper predicate", "next_prime(N, P) :- go(halt), P is N + 1.\ngo(G) :- call(G)."),
];

fn denied_violations(r: &FeedbackReport) -> usize {
    [Stage::Forbidden, Stage::Semantic]
        .iter()
        .flat_map(|s| r.stage(*s).details.iter())
        .filter(|d| matches!(d, Detail::Violation(v) if v.kind == ViolationKind::Denied))
        .count()
}

fn with_assertz_allowed(b: &ProblemBundle) -> ProblemBundle {
    let text = std::fs::read_to_string(bundles_root().join("next_prime/problem.toml")).unwrap();
    let manifest = format!("{text}\n[policy]\nallow = [\"assertz/1\"]\n");
    ProblemBundle::from_sources(&manifest, &b.reference_source, None).unwrap()
}

fn sandbox_escapes() -> Outcome {
    let strict = bundle("next_prime");
    let lenient = with_assertz_allowed(&strict);
    let mut escapes = Vec::new();
    let mut runs = 0;
    for b in [&strict, &lenient] {
        for (name, src) in ESCAPES {
            runs += 1;
            let r = grade(b, src, 7).map_err(|e| format!("{name}: {e}"))?;
            if r.verdict != Verdict::Incorrect || denied_violations(&r) == 0 {
                escapes.push(format!("{name} ({})", if std::ptr::eq(b, &strict) { "default policy" } else { "assertz allowed" }));
            }
        }
    }
    check(escapes.is_empty(), || format!("escaped: {}", escapes.join(", ")))?;
    Ok(format!("{runs} escape attempts rejected, 0 escapes"))
}

// ---------------------------------------------------------------- 4

fn first_primes(n: usize) -> Vec<i64> {
    let is_prime = |k: i64| k >= 2 && (2..).take_while(|d| d * d <= k).all(|d| k % d != 0);
    (2..).filter(|&k| is_prime(k)).take(n).collect()
}

fn anti_gaming() -> Outcome {
    let primes = first_primes(100);
    check(primes[99] == 541, || format!("100th prime is {}", primes[99]))?;
    let facts: String = primes.iter().map(|p| format!("p({p}).\n")).collect();
    let cheat = format!("next_prime(N, P) :- p(P), P > N, !.\n{facts}");
    let full = bundle("next_prime");
    // The cheat against the uniform int_range(2, 10000) test alone.
    let mut random_only = full.clone();
    random_only.main_specs.truncate(1);
    random_only.aux.clear();
    let start = Instant::now();
    let mut caught = [0; 2];
    for attempt in 1..=100 {
        let seed = master_seed("next_prime", "cheater", attempt);
        for (k, b) in [&random_only, &full].into_iter().enumerate() {
            if grade(b, &cheat, seed).map_err(|e| e.to_string())?.verdict == Verdict::Incorrect {
                caught[k] += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    // Sanity: inputs below 541 are answered correctly.
    let small = render_answers(&cheat, "next_prime(530, P).", Limits::default())?;
    check(small == ["P = 541"], || format!("cheat answers {small:?}"))?;
    check(caught.iter().all(|&c| c >= 99), || format!("caught in {caught:?} of 100 seeds"))?;
    check(elapsed < Duration::from_secs(30), || format!("sweep took {elapsed:?}"))?;
    Ok(format!(
        "cheat rejected in {}/100 seeds (random test only) and {}/100 (full bundle), {elapsed:.1?}",
        caught[0], caught[1]
    ))
}

// ---------------------------------------------------------------- 5

fn mutant_source(m: &mutants::Mutant, reference: &str) -> String {
    assert!(reference.contains(m.from), "mutant `{}` does not apply", m.name);
    let src = reference.replacen(m.from, m.to, 1);
    assert_ne!(src, reference);
    src
}

fn mutation_testing() -> Outcome {
    let start = Instant::now();
    let mut weak = Vec::new();
    let mut worst = 100;
    for m in mutants::MUTANTS {
        let b = bundle(m.bundle);
        let src = mutant_source(m, &b.reference_source);
        let mut caught = 0;
        for attempt in 1..=100 {
            let seed = master_seed(m.bundle, "mutant", attempt);
            let deadline = Instant::now() + Duration::from_secs(5);
            let r = grade_isolated(&b, &src, seed, Some(deadline)).map_err(|e| e.to_string())?;
            caught += (r.verdict == Verdict::Incorrect) as u32;
        }
        worst = worst.min(caught);
        if caught < 95 {
            weak.push(format!("{}/{} caught in {caught}", m.bundle, m.name));
        }
    }
    check(mutants::MUTANTS.len() >= 10, || "fewer than 10 mutants".into())?;
    check(weak.is_empty(), || weak.join("; "))?;
    Ok(format!(
        "{} mutants, each Incorrect in at least {worst}/100 seeds, {:.1?}",
        mutants::MUTANTS.len(),
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 6

/// SHA-256 of every sample report, computed once and frozen.
const GOLDEN_DIGEST: &str = "0641c68739e70452b80f5766c8717300fa10d269346f83286aaa4bfa161d3412";

fn sample_set() -> Vec<(ProblemBundle, String, u64)> {
    let mut out = Vec::new();
    for id in ["next_prime", "gcd", "naive_sort", "compress"] {
        let b = bundle(id);
        let mut sources = vec![b.reference_source.clone(), "p(a".to_string(), "foo :- halt.".to_string()];
        sources.extend(mutants::MUTANTS.iter().filter(|m| m.bundle == id).map(|m| mutant_source(m, &b.reference_source)));
        for src in sources {
            for seed in [0, 1, master_seed(id, "sample", 1)] {
                out.push((b.clone(), src.clone(), seed));
            }
        }
    }
    out
}

fn grade_all(samples: &[(ProblemBundle, String, u64)]) -> Result<Vec<u8>, String> {
    let mut bytes = Vec::new();
    for (b, src, seed) in samples {
        let r = grade(b, src, *seed).map_err(|e| e.to_string())?;
        serde_json::to_writer(&mut bytes, &json!({ "report": r, "distance": compute_distance(&r) }))
            .map_err(|e| e.to_string())?;
        bytes.push(b'\n');
    }
    Ok(bytes)
}

fn reproducibility() -> Outcome {
    let samples = sample_set();
    let a = grade_all(&samples)?;
    let b = grade_all(&samples)?;
    check(a == b, || "two runs differ".into())?;
    let digest: String = Sha256::digest(&a).iter().map(|x| format!("{x:02x}")).collect();
    check(digest == GOLDEN_DIGEST, || format!("digest {digest} differs from the frozen {GOLDEN_DIGEST}"))?;
    Ok(format!("{} reports byte-identical across runs, digest {}", samples.len(), &digest[..16]))
}

// ---------------------------------------------------------------- 7

fn bundle_validation() -> Outcome {
    let (repo, rejected) = Repository::load(&bundles_root()).map_err(|e| e.to_string())?;
    check(rejected.is_empty(), || format!("{rejected:?}"))?;
    let np = repo.get("next_prime").ok_or("next_prime missing")?;
    let aux: Vec<String> = np.aux.iter().map(|a| a.indicator.to_string()).collect();
    check(aux == ["is_prime/1", "has_factors/1"], || format!("next_prime aux {aux:?}"))?;
    let gcd = repo.get("gcd").ok_or("gcd missing")?;
    check(gcd.structure_target.is_some(), || "gcd has no structure target".into())?;
    check(repo.get("naive_sort").is_some(), || "no list task".into())?;
    check(repo.get("compress").is_some(), || "no pattern task".into())?;
    for b in repo.iter() {
        let problems = validate(b);
        check(problems.is_empty(), || format!("{}: {problems:?}", b.id))?;
        for seed in [0, 99, master_seed(&b.id, "validation", 1)] {
            let r = grade(b, &b.reference_source, seed).map_err(|e| e.to_string())?;
            let d = compute_distance(&r);
            check(r.verdict == Verdict::Correct && d == 0.0, || format!("{} seed {seed}: {r}", b.id))?;
        }
    }
    Ok(format!("{} bundles valid, references Correct with distance 0", repo.len()))
}

// ---------------------------------------------------------------- 8

fn hint_ladder() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let b = bundle("next_prime");
    let afters: Vec<u32> = b.hints.rungs().iter().map(|r| r.after).collect();
    check(afters == [3, 5], || format!("ladder {afters:?}"))?;
    let state = AppState::in_memory(Repository::from_bundles([b]), ServiceConfig::default());
    let counts: Vec<usize> = rt.block_on(async {
        let mut counts = Vec::new();
        for _ in 0..7 {
            let req = axum::http::Request::post("/api/v1/problems/next_prime/submissions")
                .header("content-type", "application/json")
                .body(axum::body::Body::from(
                    json!({ "learner": "h", "source": "next_prime(N, P) :- P is N + 1." }).to_string(),
                ))
                .unwrap();
            let resp = tower::ServiceExt::oneshot(router(state.clone()), req).await.unwrap();
            let bytes = http_body_util::BodyExt::collect(resp.into_body()).await.unwrap().to_bytes();
            let v: Value = serde_json::from_slice(&bytes).unwrap();
            counts.push(v["hints"].as_array().unwrap().len());
        }
        counts
    });
    check(counts == [0, 0, 1, 1, 2, 2, 2], || format!("hints after attempts 1..7: {counts:?}"))?;

    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (proptest::collection::vec(1u32..6, 0..6), 0u32..40, 0u32..40);
    runner
        .run(&strategy, |(steps, a, b)| {
            let mut after = 0;
            let rungs = steps
                .iter()
                .map(|s| {
                    after += s;
                    HintRung { after, text: format!("hint {after}") }
                })
                .collect();
            let ladder = HintLadder::new(rungs).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let (x, y) = (ladder.hints_due(lo), ladder.hints_due(hi));
            prop_assert!(x.len() <= y.len());
            prop_assert_eq!(&y[..x.len()], &x[..]);
            Ok(())
        })
        .map_err(|e| format!("monotonicity: {e}"))?;
    Ok(format!("hints per attempt {counts:?}, monotonicity holds over 512 ladders"))
}

// ---------------------------------------------------------------- 9

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(root: &Path, log: &Path) -> (Server, u16) {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let child = Command::new(env!("CARGO_BIN_EXE_prolab"))
        .args(["serve", root.to_str().unwrap(), "--port", &port.to_string(), "--log-file", log.to_str().unwrap()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let server = Server(child);
    let start = Instant::now();
    while http(port, "GET", "/api/v1/problems", None).is_err() {
        assert!(start.elapsed() < Duration::from_secs(20), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    }
    (server, port)
}

fn http(port: u16, method: &str, path: &str, body: Option<&Value>) -> Result<Value, String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).map_err(|e| e.to_string())?;
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .map_err(|e| e.to_string())?;
    let mut text = String::new();
    s.read_to_string(&mut text).map_err(|e| e.to_string())?;
    let (head, payload) = text.split_once("\r\n\r\n").ok_or("no response")?;
    if !head.starts_with("HTTP/1.1 200") {
        return Err(head.to_string());
    }
    serde_json::from_str(payload).map_err(|e| e.to_string())
}

fn replay_after_kill() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("attempts.jsonl");
    let gcd = bundle("gcd").reference_source;
    let submissions: [(&str, &str); 6] = [
        ("next_prime", "next_prime(N, P) :- P is N + 1."),
        ("next_prime", "next_prime(N, P) :- P is N + 2."),
        ("gcd", "gcd(X, Y, G) :- G is X mod Y."),
        ("gcd", gcd.as_str()),
        ("compress", "encode([], [])."),
        ("compress", "encode(L, E) :- E = L."),
    ];
    let learners = ["ana", "ben", "cho"];
    let (server, port) = start_server(&bundles_root(), &log);
    let mut changes: std::collections::BTreeMap<(String, String), Vec<Value>> = Default::default();
    for i in 0..50 {
        let learner = learners[i % 3];
        let (problem, source) = submissions[(i * 7 + i / 3) % submissions.len()];
        let v = http(
            port,
            "POST",
            &format!("/api/v1/problems/{problem}/submissions"),
            Some(&json!({ "learner": learner, "source": source })),
        )?;
        changes
            .entry((learner.to_string(), problem.to_string()))
            .or_default()
            .push(json!([v["distance"], v["distanceChange"]]));
    }
    let models = |port| -> Result<Vec<Value>, String> {
        learners.iter().map(|l| http(port, "GET", &format!("/api/v1/learners/{l}/model"), None)).collect()
    };
    let before = models(port)?;
    // SIGKILL: no shutdown path runs.
    drop(server);
    let (_server, port) = start_server(&bundles_root(), &log);
    let after = models(port)?;
    check(before == after, || "models differ after restart".into())?;

    let mut attempts = 0;
    for ((learner, problem), seen) in &changes {
        let model = &after[learners.iter().position(|l| l == learner).unwrap()];
        let history = model["problems"][problem]["distanceHistory"].as_array().ok_or("no history")?;
        check(history.len() == seen.len(), || format!("{learner}/{problem}: {} vs {}", history.len(), seen.len()))?;
        for (k, pair) in seen.iter().enumerate() {
            let d = pair[0].as_f64().unwrap();
            check(history[k].as_f64() == Some(d), || format!("{learner}/{problem} attempt {}", k + 1))?;
            if k == 0 {
                check(pair[1].is_null(), || "first attempt has a distance change".into())?;
            } else {
                let diff = history[k].as_f64().unwrap() - history[k - 1].as_f64().unwrap();
                check(pair[1].as_f64() == Some(diff), || {
                    format!("{learner}/{problem} attempt {}: change {} vs history {diff}", k + 1, pair[1])
                })?;
            }
            attempts += 1;
        }
    }
    check(attempts == 50, || format!("{attempts} attempts seen"))?;
    Ok(format!("50 attempts over {} learner/problem pairs replayed identically after kill", changes.len()))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("engine conformance", engine_conformance),
        ("fuzz corpus and abort rule", fuzz_corpus),
        ("sandbox escapes", sandbox_escapes),
        ("anti-gaming", anti_gaming),
        ("mutation testing", mutation_testing),
        ("reproducibility", reproducibility),
        ("bundle self-validation", bundle_validation),
        ("hint ladder (3,5)", hint_ladder),
        ("learner model replay", replay_after_kill),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let result = std::panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
