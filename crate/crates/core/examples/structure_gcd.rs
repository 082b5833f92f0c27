//! Clause-by-clause comparison with a structure target, up to variable
//! renaming and clause order.
//!
//!     cargo run --example structure_gcd

use prolab::grader::structure_check;
use prolab::reader::parse_program;

const TARGET: &str = "gcd(X, 0, X).\ngcd(X, Y, G) :- Y > 0, Z is X mod Y, gcd(Y, Z, G).";

const SUBMISSIONS: &[&str] = &[
    "gcd(A, B, C) :- B > 0, D is A mod B, gcd(B, D, C).\ngcd(A, 0, A).",
    "gcd(X, 0, X).\ngcd(X, Y, G) :- Z is X mod Y, Y > 0, gcd(Y, Z, G).",
    "gcd(X, 0, X).\ngcd(X, Y, G) :- Y > 0, Z is X mod Y, gcd(Y, Z, G).\ngcd(X, X, X).\nhelper(1).",
];

fn main() {
    let target = parse_program(TARGET).unwrap().program;
    for src in SUBMISSIONS {
        let r = structure_check(&parse_program(src).unwrap().program, &target);
        println!("{src}\n  matched: {}", r.matched);
        for p in &r.problems {
            println!("  {p}");
        }
        if !r.extra_predicates.is_empty() {
            println!("  extra predicates: {:?}", r.extra_predicates);
        }
        println!();
    }
}
