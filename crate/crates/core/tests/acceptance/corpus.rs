// Program/query pairs with their answer sequences, worked out by hand from
// SLD resolution with leftmost goal selection and top-down clause order.
// An answer lists the bindings of the query variables that end up bound;
// "true" is an answer with no such bindings. `cap` lowers max_solutions.

pub struct Case {
    pub name: &'static str,
    pub program: &'static str,
    pub query: &'static str,
    pub answers: &'static [&'static str],
    pub cap: Option<usize>,
}

const LISTS: &str = "
app([], L, L).
app([H|T], L, [H|R]) :- app(T, L, R).
mem(X, [X|_]).
mem(X, [_|T]) :- mem(X, T).
rev(L, R) :- rev(L, [], R).
rev([], A, A).
rev([H|T], A, R) :- rev(T, [H|A], R).
nrev([], []).
nrev([H|T], R) :- nrev(T, RT), app(RT, [H], R).
len([], 0).
len([_|T], N) :- len(T, M), N is M + 1.
last([X], X).
last([_|T], X) :- last(T, X).
sum([], 0).
sum([H|T], S) :- sum(T, S1), S is S1 + H.
";

const ARITH: &str = "
fact(0, 1) :- !.
fact(N, F) :- N1 is N - 1, fact(N1, F1), F is N * F1.
fib(0, 0).
fib(1, 1).
fib(N, F) :- N > 1, A is N - 1, B is N - 2, fib(A, FA), fib(B, FB), F is FA + FB.
max(X, Y, X) :- X >= Y, !.
max(_, Y, Y).
sign(X, S) :- ( X > 0 -> S = pos ; X < 0 -> S = neg ; S = zero ).
";

const GCD: &str = "
gcd(X, 0, X).
gcd(X, Y, G) :- Y > 0, Z is X mod Y, gcd(Y, Z, G).
";

const SORT: &str = "
nsort(L, S) :- perm(L, S), sorted(S).
perm([], []).
perm(L, [X|P]) :- sel(X, L, R), perm(R, P).
sel(X, [X|T], T).
sel(X, [H|T], [H|R]) :- sel(X, T, R).
sorted([]).
sorted([_]).
sorted([X, Y|T]) :- X =< Y, sorted([Y|T]).
qs([], []).
qs([H|T], S) :- part(H, T, L, G), qs(L, SL), qs(G, SG), app(SL, [H|SG], S).
part(_, [], [], []).
part(P, [X|Xs], [X|L], G) :- X =< P, !, part(P, Xs, L, G).
part(P, [X|Xs], L, [X|G]) :- part(P, Xs, L, G).
app([], L, L).
app([H|T], L, [H|R]) :- app(T, L, R).
";

const SYMBOLIC: &str = "
d(x, x, 1).
d(N, x, 0) :- number(N).
d(U + V, x, DU + DV) :- d(U, x, DU), d(V, x, DV).
d(U * V, x, DU * V + U * DV) :- d(U, x, DU), d(V, x, DV).
nat(0).
nat(s(N)) :- nat(N).
plus(0, Y, Y).
plus(s(X), Y, s(Z)) :- plus(X, Y, Z).
encode([], []).
encode([X|Xs], E) :- run(X, 1, Xs, E).
run(X, N, [], [X-N]).
run(X, N, [X|Xs], E) :- !, N1 is N + 1, run(X, N1, Xs, E).
run(X, N, [Y|Ys], [X-N|E]) :- run(Y, 1, Ys, E).
";

const fn case(name: &'static str, program: &'static str, query: &'static str, answers: &'static [&'static str]) -> Case {
    Case {
        name,
        program,
        query,
        answers,
        cap: None,
    }
}

pub const CASES: &[Case] = &[
    case(
        "append splits a list",
        LISTS,
        "app(X, Y, [1,2]).",
        &["X = [], Y = [1,2]", "X = [1], Y = [2]", "X = [1,2], Y = []"],
    ),
    case("member enumerates", LISTS, "mem(X, [a,b,c]).", &["X = a", "X = b", "X = c"]),
    case("member fails on absent element", LISTS, "mem(z, [a,b]).", &[]),
    case("accumulator reverse", LISTS, "rev([1,2,3], R).", &["R = [3,2,1]"]),
    case("naive reverse", LISTS, "nrev([1,2,3,4], R).", &["R = [4,3,2,1]"]),
    case("length", LISTS, "len([a,b,c,d], N).", &["N = 4"]),
    case("last element", LISTS, "last([1,2,3], X).", &["X = 3"]),
    case("sum of a list", LISTS, "sum([1,2,3,4,5], S).", &["S = 15"]),
    case(
        "negation filters members",
        LISTS,
        "mem(X, [1,2,3,4]), \\+ mem(X, [2,4]).",
        &["X = 1", "X = 3"],
    ),
    case("call/3 adds arguments", LISTS, "call(mem, X, [p,q]).", &["X = p", "X = q"]),
    case("factorial with cut", ARITH, "fact(10, F).", &["F = 3628800"]),
    case("fibonacci", ARITH, "fib(15, F).", &["F = 610"]),
    case("max takes the second", ARITH, "max(3, 5, M).", &["M = 5"]),
    case("cut prunes the fallback", ARITH, "max(5, 3, M).", &["M = 5"]),
    case("if-then-else chain", ARITH, "sign(-4, S).", &["S = neg"]),
    case(
        "floored mod and truncating division",
        ARITH,
        "X is 7 mod -2, Y is -7 // 2, Z is abs(-3) * 2.",
        &["X = -1, Y = -3, Z = 6"],
    ),
    case("operator precedence", ARITH, "X is 2 * (3 + 4) - 10 // 3.", &["X = 11"]),
    case("gcd of 48 and 18", GCD, "gcd(48, 18, G).", &["G = 6"]),
    case("gcd of coprimes", GCD, "gcd(17, 5, G).", &["G = 1"]),
    case("gcd with zero first", GCD, "gcd(0, 7, G).", &["G = 7"]),
    case("naive sort", SORT, "nsort([3,1,2], S).", &["S = [1,2,3]"]),
    case(
        "permutation order",
        SORT,
        "perm([1,2,3], P).",
        &["P = [1,2,3]", "P = [1,3,2]", "P = [2,1,3]", "P = [2,3,1]", "P = [3,1,2]", "P = [3,2,1]"],
    ),
    case("quicksort", SORT, "qs([3,1,4,1,5,9,2,6], S).", &["S = [1,1,2,3,4,5,6,9]"]),
    case(
        "symbolic derivative",
        SYMBOLIC,
        "d(x * x + 3, x, D).",
        &["D = +(+(*(1,x),*(x,1)),0)"],
    ),
    case("peano addition", SYMBOLIC, "plus(s(s(0)), s(0), Z).", &["Z = s(s(s(0)))"]),
    case(
        "peano subtraction by search",
        SYMBOLIC,
        "plus(X, Y, s(s(0))).",
        &["X = 0, Y = s(s(0))", "X = s(0), Y = s(0)", "X = s(s(0)), Y = 0"],
    ),
    case(
        "run-length encoding",
        SYMBOLIC,
        "encode([a,a,b,a,a,a], E).",
        &["E = [-(a,2),-(b,1),-(a,3)]"],
    ),
    case(
        "univ, functor and arg",
        "",
        "T =.. [f,a,b], functor(T, N, A), arg(2, T, X).",
        &["T = f(a,b), N = f, A = 2, X = b"],
    ),
    case(
        "nested between",
        "",
        "between(1, 3, X), between(X, 3, Y).",
        &["X = 1, Y = 1", "X = 1, Y = 2", "X = 1, Y = 3", "X = 2, Y = 2", "X = 2, Y = 3", "X = 3, Y = 3"],
    ),
    case(
        "findall collects multiples",
        "",
        "findall(X, (between(1, 10, X), 0 is X mod 3), L).",
        &["L = [3,6,9]"],
    ),
    case("disjunction", "", "(X = a ; X = b ; X = c).", &["X = a", "X = b", "X = c"]),
    case("occurs check", "", "X = f(X).", &[]),
    case("bindings propagate", "", "X = f(Y), Y = 1.", &["X = f(1), Y = 1"]),
    case("identity of unbound variables", "", "X == X, \\+ X == Y, f(A) \\== f(B).", &["true"]),
    case(
        "assert and retract",
        "",
        "assertz(cnt(0)), retract(cnt(X)), Y is X + 1, assertz(cnt(Y)), cnt(Z).",
        &["X = 0, Y = 1, Z = 1"],
    ),
    Case {
        name: "infinite generator is capped",
        program: SYMBOLIC,
        query: "nat(X).",
        answers: &["X = 0", "X = s(0)", "X = s(s(0))"],
        cap: Some(3),
    },
];
