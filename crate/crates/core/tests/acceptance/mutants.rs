// Single-bug mutants of the shipped references: one textual edit each.

pub struct Mutant {
    pub bundle: &'static str,
    pub name: &'static str,
    pub from: &'static str,
    pub to: &'static str,
}

const fn m(bundle: &'static str, name: &'static str, from: &'static str, to: &'static str) -> Mutant {
    Mutant { bundle, name, from, to }
}

pub const MUTANTS: &[Mutant] = &[
    m("next_prime", "starts at N instead of N + 1", "M is N + 1", "M is N"),
    m("next_prime", "strict bound accepts prime squares", "F * F =< N, 0 is N mod F", "F * F < N, 0 is N mod F"),
    m("next_prime", "swapped mod operands", "0 is N mod F", "0 is F mod N"),
    m(
        "next_prime",
        "dropped recursive case",
        "first_prime_from(M, P) :-\n    M1 is M + 1,\n    first_prime_from(M1, P).",
        "",
    ),
    m("gcd", "swapped mod operands", "Z is X mod Y", "Z is Y mod X"),
    m("gcd", "wrong base case", "gcd(X, 0, X).", "gcd(X, 0, 0)."),
    m("gcd", "division instead of remainder", "Z is X mod Y", "Z is X // Y"),
    m("gcd", "dropped guard", "    Y > 0,\n", ""),
    m("naive_sort", "strict order drops duplicates", "X =< Y, sorted", "X < Y, sorted"),
    m("naive_sort", "descending order", "X =< Y, sorted", "X >= Y, sorted"),
    m("naive_sort", "dropped singleton case", "sorted([_]).\n", ""),
    m("compress", "count starts at zero", "run(X, 1, Xs, E)", "run(X, 0, Xs, E)"),
    m("compress", "pair reversed", "[X-N|E]) :- run(Y", "[N-X|E]) :- run(Y"),
    m("compress", "dropped empty case", "encode([], []).\n", ""),
];
