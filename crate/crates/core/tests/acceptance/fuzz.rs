// Malformed and hostile submissions, generated from a fixed seed.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOKENS: &[&str] = &[
    "next_prime", "gcd", "encode", "naive_sort", "X", "Y", "_", "N", "P", "foo", "[]", "[", "]", "|", "(", ")",
    ",", ".", ":-", ";", "->", "\\+", "!", "is", "=", "=..", "+", "-", "*", "//", "mod", "=<", "0", "1", "42",
    "'q a'", "\"str\"", "%c\n", "/*", "*/", "halt", "call", "assertz", "shell", " ", "\n", "\t",
];

const HOSTILE: &[&str] = &[
    "next_prime(N, P) :- halt.",
    "next_prime(N, P) :- halt(1).",
    ":- halt.",
    "next_prime(N, P) :- shell('rm -rf /'), P is N + 1.",
    "next_prime(N, P) :- G =.. [shell, ls], call(G), P is N + 1.",
    "next_prime(N, P) :- call(halt).",
    "next_prime(N, P) :- X = halt, call(X).",
    "next_prime(N, P) :- \\+ halt, P = N.",
    "next_prime(N, P) :- ( true ; halt ), P = N.",
    "next_prime(N, P) :- findall(X, shell(X), _), P = N.",
    "next_prime(N, P) :- assertz((q :- halt)), q, P = N.",
    "next_prime(N, P) :- consult('/etc/passwd'), P = N.",
    "next_prime(N, P) :- open('/etc/passwd', read, S), P = N.",
    "next_prime(N, P) :- next_prime(N, P).",
    "next_prime(N, P) :- M is N + 1, next_prime(M, P).",
    "next_prime(N, P) :- loop(N), P = N.\nloop(X) :- loop(f(X)).",
    "next_prime(N, P) :- X = f(X), P = N.",
    "next_prime(N, P) :- P is N * 99999999999 * 99999999999.",
    "next_prime(N, P) :- P is N // 0.",
    "next_prime(N, P) :- P is foo + 1.",
    "next_prime(N, P) :- P is X + 1.",
    "next_prime(N, P) :- call(G), P = N.",
    "next_prime(N, P) :- undefined_thing(N), P = N.",
    "next_prime(N, P) :- between(1, 1000000000, P), P > N * N * N.",
    "next_prime(N, P) :- findall(X, between(1, 100000000, X), L), P = N.",
    "next_prime(N, P) :- functor(T, f, 100000000), P = N.",
    "next_prime(N, P) :- T =.. [f|T], P = N.",
    "next_prime(N, P) :- arg(0, f(a), P).",
    "next_prime(N, P) :- !, fail.",
    "next_prime(_, _) :- true.",
    "next_prime(N, N).",
    "gcd(X, Y, G) :- gcd(Y, X, G).",
    "gcd(X, Y, G) :- G is X mod Y.",
    "encode(L, E) :- encode(L, E).",
    "encode(L, [L|E]) :- encode([L|L], E).",
    "naive_sort(L, S) :- naive_sort([0|L], S).",
    "true :- halt.",
    "call(X) :- halt.",
    "X.",
    "X :- halt.",
    "1 :- halt.",
    "foo :- 1.",
    "foo :- X, halt.",
    "'\\u0000'.",
    "a :- b :- c.",
    "f(,).",
    "f(a,,b).",
    "p :- [a|b|c].",
    "'unterminated",
    "\"unterminated",
    "/* unterminated comment",
    "p(0'",
    "p(999999999999999999999999999999).",
    "p(X) :- X is 9223372036854775807 + 1.",
    "next_prime(N, P) :- P is 9223372036854775807 + N.",
    "next_prime(N, P) :- P is -9223372036854775807 - 1 - N.",
    "next_prime(N, P) :- P is abs(-9223372036854775807 - 1) + N.",
    "\u{feff}next_prime(N, P) :- P is N + 1.",
    "next_prime(N, P) :- P is N + 1",
    "next_prime(N P) :- P is N + 1.",
    "next_prime(N, P) :- P = N + 1.",
    "next_prime(N, P) :- P is N +* 1.",
    "next_prime(N, P) :- retract(next_prime(_, _)), P = N.",
    "next_prime(N, P) :- asserta(next_prime(N, P)), P = N.",
    "next_prime(N, P) :- op(700, xfx, ===), P = N.",
    "next_prime(N, P) :- call(call, call, halt), P = N.",
    "next_prime(N, P) :- call(;, halt, true), P = N.",
    "next_prime(N, P) :- \\+ \\+ \\+ (G =.. [halt], G), P = N.",
    "next_prime(N, P) :- findall(G, (G = halt ; G = true), Gs), Gs = [H|_], call(H), P = N.",
];

fn random_bytes(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(0..300);
    let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn token_soup(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..60);
    (0..len).map(|_| *TOKENS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn mutated(rng: &mut ChaCha8Rng, reference: &str) -> String {
    let mut chars: Vec<char> = reference.chars().collect();
    for _ in 0..rng.random_range(1..4) {
        let at = rng.random_range(0..chars.len());
        match rng.random_range(0..3) {
            0 => {
                chars.remove(at);
            }
            1 => chars.insert(at, *b".,()[]|:-!'\"%0aX_ \n".choose(rng).unwrap() as char),
            _ => chars[at] = *b"().,;|".choose(rng).unwrap() as char,
        }
        if chars.is_empty() {
            break;
        }
    }
    chars.into_iter().collect()
}

fn deep(rng: &mut ChaCha8Rng) -> String {
    let depth = rng.random_range(1_000..200_000);
    let (open, close) = *[("f(", ")"), ("[", "]"), ("(", ")"), ("- ", ""), ("\\+ ", "")].choose(rng).unwrap();
    let balanced = rng.random_bool(0.5);
    format!(
        "p({}a{}).",
        open.repeat(depth),
        if balanced { close.repeat(depth) } else { close.repeat(depth / 2) }
    )
}

fn huge(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        0 => "fact(a).\n".repeat(110_000),
        1 => format!("p([{}]).", vec!["1"; 500_000].join(",")),
        2 => format!("p :- {}.", vec!["true"; 200_000].join(", ")),
        _ => format!("p('{}').", "x".repeat(1 << 20)),
    }
}

/// `(label, source)` pairs; `references` are mutated to get near-miss programs.
pub fn corpus(seed: u64, references: &[String]) -> Vec<(&'static str, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..300 {
        out.push(("random bytes", random_bytes(&mut rng)));
    }
    for _ in 0..320 {
        out.push(("token soup", token_soup(&mut rng)));
    }
    for i in 0..300 {
        out.push(("mutated reference", mutated(&mut rng, &references[i % references.len()])));
    }
    for _ in 0..24 {
        out.push(("deep nesting", deep(&mut rng)));
    }
    for _ in 0..8 {
        out.push(("huge input", huge(&mut rng)));
    }
    for h in HOSTILE {
        out.push(("hostile", h.to_string()));
    }
    out
}
