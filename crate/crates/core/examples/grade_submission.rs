//! Grades a few submissions for next_prime and prints the four-stage
//! reports with their distances.
//!
//!     cargo run --example grade_submission -- [bundle-dir] [solution.pl]

use std::path::PathBuf;

use prolab::bundle::load_validated;
use prolab::grader::grade;
use prolab::tutor::compute_distance;

const ATTEMPTS: &[(&str, &str)] = &[
    ("syntax error", "next_prime(N, P) :- P is N + ."),
    ("forbidden", "next_prime(N, P) :- halt."),
    ("off by one", "next_prime(N, P) :- P is N + 1."),
    (
        "broken is_prime",
        "next_prime(N, P) :- M is N + 1, f(M, P).
f(M, M) :- is_prime(M), !.
f(M, P) :- M1 is M + 1, f(M1, P).
is_prime(N) :- N > 1, \\+ (between(2, N, F), F * F < N, 0 is N mod F).",
    ),
];

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bundles/next_prime"));
    let bundle = load_validated(&dir).unwrap_or_else(|e| panic!("{e}"));

    let mut attempts: Vec<(String, String)> = ATTEMPTS.iter().map(|(n, s)| (n.to_string(), s.to_string())).collect();
    match args.next() {
        Some(path) => attempts = vec![(path.clone(), std::fs::read_to_string(&path).expect("readable solution"))],
        None => attempts.push(("reference".into(), bundle.reference_source.clone())),
    }
    for (name, src) in attempts {
        let report = grade(&bundle, &src, 2024).expect("bundle is valid");
        println!("== {name}\n{report}distance {:.3}\n", compute_distance(&report));
    }
}
