//! Beginner-facing syntax diagnostics with positions and fix hints.
//!
//!     cargo run --example diagnostics

use prolab::reader::parse_program;

const MISTAKES: &[&str] = &[
    "next_prime(N, P) :- P is N + 1",
    "gcd(X, 0, X).\ngcd(X, Y, G) :- Y > 0, Z is X mod Y gcd(Y, Z, G).",
    "member(X, [X|_]).\nMember(X, [_|T]) :- member(X, T).",
    "p(X) :- q(X.",
    "len([], 0).\nlen([H|T], N) :- len(T, M), N is M + 1.",
];

fn main() {
    for src in MISTAKES {
        println!("{src}");
        match parse_program(src) {
            Ok(parsed) if parsed.warnings.is_empty() => println!("  ok"),
            Ok(parsed) => parsed.warnings.iter().for_each(|w| println!("  {w}")),
            Err(diags) => diags.iter().for_each(|d| println!("  {d}")),
        }
        println!();
    }
}
