//! The two sandbox layers: a static scan of call positions and the
//! per-call hook that stops goals built at run time.
//!
//!     cargo run --example sandbox

use prolab::engine::{solve, Limits, NoTrace};
use prolab::reader::{parse_program, parse_query};
use prolab::sandbox::{default_policy, scan_static, SandboxHook};

fn main() {
    let policy = default_policy();

    let literal = "p :- \\+ halt.\nq :- assertz((r :- shell(ls))).";
    for v in scan_static(&parse_program(literal).unwrap().program, &policy) {
        println!("static: {v}");
    }

    // `=..` builds the goal, so only the runtime hook can see it.
    let built = parse_program("p :- G =.. [shell, ls], call(G).").unwrap().program;
    println!("static scan of the =.. program: {} violations", scan_static(&built, &policy).len());
    let q = parse_query("p.").unwrap();
    let mut hook = SandboxHook::new(&policy);
    let out = solve(&built, &q.goals, &q.vars, Limits::default(), &mut hook, &mut NoTrace);
    println!("dynamic: {:?}, {}", out.halt_reason, out.error_detail.unwrap_or_default());
    for v in &hook.violations {
        println!("  {v}");
    }

    // Unknown predicates are reported as missing, not as violations.
    let typo = parse_program("p :- lenght([a], N).").unwrap().program;
    let mut hook = SandboxHook::new(&policy);
    let out = solve(&typo, &q.goals, &q.vars, Limits::default(), &mut hook, &mut NoTrace);
    println!("typo: {:?}, {}", out.halt_reason, out.error_detail.unwrap_or_default());
}
