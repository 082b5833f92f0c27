//! Source text to programs and queries, with beginner-oriented diagnostics.
//!
//! The operator table is fixed (no `op/3`):
//!
//! | priority | type | operators |
//! |---|---|---|
//! | 1200 | xfx, fx | `:-` |
//! | 1100 | xfy | `;` |
//! | 1050 | xfy | `->` |
//! | 1000 | xfy | `,` |
//! | 900 | fy | `\+` |
//! | 700 | xfx | `= \= == \== is =:= =\= < > =< >= =..` |
//! | 500 | yfx | `+ -` |
//! | 400 | yfx | `* // mod` |
//! | 200 | fy | `-` |
//!
//! Errors are reported per clause: after a syntax error the parser skips to
//! the next clause-ending period and carries on, so one pass reports every
//! broken clause.

mod catalog;
mod lexer;
mod parser;

use serde::{Deserialize, Serialize};

pub use catalog::{Catalog, CatalogEntry, CatalogError, CODES};
pub use lexer::{Token, TokenKind};

use crate::term::{Program, Term, Var};

/// A 1-based source position with a length in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    pub code: String,
    pub severity: Severity,
    #[serde(flatten)]
    pub span: SourceSpan,
    pub message: String,
    pub fix_hint: Option<String>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "line {}, column {}: {kind} [{}] {}",
            self.span.line, self.span.column, self.code, self.message
        )?;
        if let Some(h) = &self.fix_hint {
            write!(f, "\n  hint: {h}")?;
        }
        Ok(())
    }
}

/// A successfully parsed program plus any warnings.
#[derive(Debug, Clone)]
pub struct ParsedProgram {
    pub program: Program,
    pub warnings: Vec<Diagnostic>,
}

/// The goals of one query and its named variables in first-occurrence order.
#[derive(Debug, Clone)]
pub struct Query {
    pub goals: Vec<Term>,
    pub vars: Vec<Var>,
    /// One past the largest variable id in the query.
    pub var_count: usize,
}

/// Tokenizes `source`; comments and layout are dropped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let (tokens, diags) = lexer::lex(source, Catalog::builtin());
    if diags.is_empty() {
        Ok(tokens)
    } else {
        Err(diags)
    }
}

pub fn parse_program(source: &str) -> Result<ParsedProgram, Vec<Diagnostic>> {
    parse_program_with(source, Catalog::builtin())
}

/// Like [`parse_program`] with a custom message catalog.
pub fn parse_program_with(
    source: &str,
    catalog: &Catalog,
) -> Result<ParsedProgram, Vec<Diagnostic>> {
    let (tokens, diags) = lexer::lex(source, catalog);
    if !diags.is_empty() {
        return Err(diags);
    }
    parser::Parser::new(&tokens, catalog).program()
}

pub fn parse_query(source: &str) -> Result<Query, Vec<Diagnostic>> {
    let catalog = Catalog::builtin();
    let (tokens, diags) = lexer::lex(source, catalog);
    if !diags.is_empty() {
        return Err(diags);
    }
    parser::Parser::new(&tokens, catalog).query()
}

/// Parses a single term (no trailing period required); used for manifest
/// test templates.
pub fn parse_term(source: &str) -> Result<(Term, Vec<Var>), Vec<Diagnostic>> {
    let catalog = Catalog::builtin();
    let (tokens, diags) = lexer::lex(source, catalog);
    if !diags.is_empty() {
        return Err(diags);
    }
    parser::Parser::new(&tokens, catalog).single_term()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
    Fy,
    Fx,
}

pub(crate) fn infix_op(name: &str) -> Option<(u16, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "==" | "\\==" | "is" | "=:=" | "=\\=" | "<" | ">" | "=<" | ">=" | "=.." => {
            (700, Assoc::Xfx)
        }
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "//" | "mod" => (400, Assoc::Yfx),
        _ => return None,
    })
}

pub(crate) fn prefix_op(name: &str) -> Option<(u16, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Fx),
        "\\+" => (900, Assoc::Fy),
        "-" => (200, Assoc::Fy),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_equal, PredicateIndicator};

    fn codes(src: &str) -> Vec<String> {
        match parse_program(src) {
            Ok(p) => p.warnings.into_iter().map(|d| d.code).collect(),
            Err(d) => d.into_iter().map(|d| d.code).collect(),
        }
    }

    fn first_error(src: &str) -> Diagnostic {
        parse_program(src)
            .expect_err("expected a syntax error")
            .into_iter()
            .find(|d| d.is_error())
            .unwrap()
    }

    #[test]
    fn tokenize_examples() {
        let toks = tokenize("p(X) :- q(X).").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind.clone()).collect();
        use TokenKind::*;
        assert_eq!(kinds, vec![
            Name("p".into()),
            Punct('('),
            Var("X".into()),
            Punct(')'),
            Name(":-".into()),
            Name("q".into()),
            Punct('('),
            Var("X".into()),
            Punct(')'),
            End
        ]);
        assert_eq!(tokenize("p(a").unwrap().len(), 3);
        assert_eq!(tokenize("p. % comment").unwrap().len(), 2);
    }

    #[test]
    fn parses_a_fact() {
        let p = parse_program("gcd(X,0,X).").unwrap();
        assert_eq!(p.program.len(), 1);
        assert!(p.program.clauses()[0].is_fact());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn missing_period_between_goals() {
        let d = first_error("p(a) q(b).");
        assert_eq!(d.code, "E-MISSING-PERIOD");
        assert_eq!((d.span.line, d.span.column, d.span.length), (1, 5, 0));
        assert!(d.fix_hint.unwrap().contains("period"));
        assert_eq!(first_error("p(a)").code, "E-MISSING-PERIOD");
    }

    #[test]
    fn variable_as_functor() {
        let d = first_error("p(X) :- X(a).");
        assert_eq!(d.code, "E-VAR-AS-FUNCTOR");
        assert_eq!((d.span.line, d.span.column, d.span.length), (1, 9, 1));
        assert!(d.message.contains("cannot be used as a predicate name"));
    }

    #[test]
    fn catalog_errors() {
        assert_eq!(codes("p(a"), ["E-UNEXPECTED-EOF"]);
        assert_eq!(codes("p(a))."), ["E-UNBALANCED-PAREN"]);
        assert_eq!(codes("p(a]."), ["E-UNBALANCED-PAREN"]);
        assert_eq!(codes("p(a."), ["E-UNBALANCED-PAREN"]);
        assert_eq!(codes("p :- X = Y = Z."), ["E-OPERATOR-CLASH"]);
        assert_eq!(codes("p(a :- b)."), ["E-OPERATOR-CLASH"]);
        assert_eq!(codes("p(a b)."), ["E-MISSING-COMMA"]);
        assert_eq!(codes(":- initialization(main)."), ["E-DIRECTIVE"]);
        assert_eq!(codes("X :- foo."), ["E-SINGLETON-VAR", "E-NOT-CALLABLE"]);
        assert_eq!(codes("3."), ["E-NOT-CALLABLE"]);
        assert_eq!(codes("p :- 3."), ["E-NOT-CALLABLE"]);
        assert_eq!(codes("is(X, Y)."), ["E-BUILTIN-REDEFINED", "E-SINGLETON-VAR", "E-SINGLETON-VAR"]);
        assert_eq!(codes("p({a})."), ["E-UNSUPPORTED"]);
    }

    #[test]
    fn recovers_to_report_every_broken_clause() {
        let src = "ok(1).\np(a q.\nok(2).\nr :- X(1).\nok(3).";
        let errs = parse_program(src).unwrap_err();
        let codes: Vec<_> = errs.iter().map(|d| (d.code.as_str(), d.span.line)).collect();
        assert_eq!(codes, [("E-MISSING-COMMA", 2), ("E-VAR-AS-FUNCTOR", 4)]);
    }

    #[test]
    fn singleton_is_only_a_warning() {
        let p = parse_program("p(X, Y) :- q(X).\nq(_Z).\nr(_).").unwrap();
        let w: Vec<_> = p.warnings.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(w, ["E-SINGLETON-VAR"]);
        assert_eq!(p.warnings[0].severity, Severity::Warning);
        assert!(p.warnings[0].message.contains('Y'));
    }

    #[test]
    fn operator_precedence_and_associativity() {
        let q = parse_query("X is 3 + 4 * 2 - 1").unwrap();
        assert_eq!(q.goals[0].to_string(), "is(X,-(+(3,*(4,2)),1))");
        let q = parse_query("a :- b, c ; d -> e").unwrap();
        assert_eq!(q.goals[0].to_string(), ":-(a,;(','(b,c),->(d,e)))");
        let q = parse_query("X = - 1, Y = -1, Z = -(1), W = - a").unwrap();
        let s: Vec<_> = q.goals.iter().map(|g| g.to_string()).collect();
        assert_eq!(s, ["=(X,-(1))", "=(Y,-1)", "=(Z,-(1))", "=(W,-(a))"]);
        let q = parse_query("\\+ \\+ X = a").unwrap();
        assert_eq!(q.goals[0].to_string(), "\\+(\\+(=(X,a)))");
        let q = parse_query("X = [-, +], Y = (-)").unwrap();
        assert_eq!(q.goals[0].to_string(), "=(X,[-,+])");
        assert_eq!(q.goals[1].to_string(), "=(Y,-)");
    }

    #[test]
    fn query_goals_and_vars() {
        let q = parse_query("next_prime(10, P).").unwrap();
        assert_eq!(q.goals.len(), 1);
        let names: Vec<_> = q.vars.iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["P"]);

        let q = parse_query("X = 1, Y is X+1.").unwrap();
        assert_eq!(q.goals.len(), 2);
        let names: Vec<_> = q.vars.iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["X", "Y"]);

        let err = parse_query("foo(").unwrap_err();
        assert_eq!(err[0].code, "E-UNEXPECTED-EOF");
    }

    #[test]
    fn strings_lists_and_quoted_functors() {
        let q = parse_query("X = \"ab\", Y = [1,2|T], Z = ','(a,b), W = '[]'").unwrap();
        let s: Vec<_> = q.goals.iter().map(|g| g.to_string()).collect();
        assert_eq!(s, ["=(X,[97,98])", "=(Y,[1,2|T])", "=(Z,','(a,b))", "=(W,[])"]);
    }

    #[test]
    fn body_goal_spans_follow_conjunction() {
        let p = parse_program("p :-\n  q,\n  ( r ; s ),\n  halt.").unwrap();
        let c = &p.program.clauses()[0];
        assert_eq!(c.body.len(), 3);
        let lines: Vec<_> = c.goal_spans.iter().map(|s| (s.line, s.column)).collect();
        assert_eq!(lines, [(2, 3), (3, 5), (4, 3)]);
    }

    #[test]
    fn deep_nesting_is_a_diagnostic_not_a_crash() {
        let src = format!("p({}a{}).", "f(".repeat(5000), ")".repeat(5000));
        assert_eq!(codes(&src), ["E-TOO-DEEP"]);
        let src = format!("p(X) :- X = {}.", vec!["1"; 5000].join(" + "));
        assert_eq!(codes(&src), ["E-TOO-DEEP"]);
    }

    #[test]
    fn render_round_trips() {
        let src = "app([], L, L).\napp([H|T], L, [H|R]) :- app(T, L, R).\n\
                   q(X) :- \\+ X = 'a b', ( X > 1 -> true ; fail ), Y is -X mod 3, Y =.. [f|_].\n\
                   s(\"hi\", -3, - 3, [-], '.', f(',', '|')).";
        let p = parse_program(src).unwrap().program;
        let again = parse_program(&p.to_string()).unwrap().program;
        assert_eq!(p.len(), again.len());
        for (a, b) in p.clauses().iter().zip(again.clauses()) {
            assert!(alpha_equal(&a.to_term(), &b.to_term()), "{a} vs {b}");
        }
        assert!(again.defines(&PredicateIndicator::new("s", 6)));
    }
}
