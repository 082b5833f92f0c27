//! Runs a query against a small program and prints the answers and the
//! call/exit/fail trace.
//!
//!     cargo run --example solve_query

use prolab::engine::{solve, AllowAll, Limits, Port, TraceEvent};
use prolab::reader::{parse_program, parse_query};
use prolab::term::Term;

const PROGRAM: &str = "
app([], L, L).
app([H|T], L, [H|R]) :- app(T, L, R).
";

fn main() {
    let program = parse_program(PROGRAM).expect("program parses").program;
    let query = parse_query("app(X, Y, [1,2]).").expect("query parses");
    let mut trace: Vec<TraceEvent> = Vec::new();
    let out = solve(&program, &query.goals, &query.vars, Limits::default(), &mut AllowAll, &mut trace);

    for (i, s) in out.solutions.iter().enumerate() {
        let bindings: Vec<String> = query
            .vars
            .iter()
            .map(|v| format!("{v} = {}", s.apply(&Term::Var(v.clone()))))
            .collect();
        println!("answer {}: {}", i + 1, bindings.join(", "));
    }
    println!("{:?} after {} steps\n", out.halt_reason, out.steps_used);

    for e in trace.iter().take(12) {
        let port = match e.kind {
            Port::Call => "call",
            Port::Exit => "exit",
            Port::Fail => "fail",
        };
        println!("{:>4} {}{port} {}", e.step, "  ".repeat(e.depth), e.goal);
    }

    // Limits stop runaway programs without failing the caller.
    let nat = parse_program("nat(0).\nnat(s(N)) :- nat(N).").unwrap().program;
    let q = parse_query("nat(X).").unwrap();
    let limits = Limits {
        max_solutions: 3,
        ..Limits::default()
    };
    let out = solve(&nat, &q.goals, &q.vars, limits, &mut AllowAll, &mut prolab::engine::NoTrace);
    println!("\nnat(X): {} answers, truncated = {}", out.solutions.len(), out.truncated);
}
