use super::lexer::{Token, TokenKind};
use super::{infix_op, prefix_op, Assoc, Catalog, Diagnostic, ParsedProgram, Query, Severity, SourceSpan};
use crate::engine::is_builtin;
use crate::term::{Atom, Clause, Program, Term, Var, VarId};

/// Recursion limit for nested brackets and arguments.
const MAX_NESTING: usize = 200;
/// Limit on the depth of any term built by the reader, lists included.
pub(crate) const MAX_TERM_DEPTH: usize = 1000;

type PResult<T> = Result<T, Diagnostic>;

/// Source positions of operator operands, mirroring the term structure for
/// operator applications only.
struct SpanNode {
    span: SourceSpan,
    kids: Vec<SpanNode>,
}

struct Parsed {
    term: Term,
    prec: u16,
    depth: usize,
    node: SpanNode,
    first: usize,
    last: usize,
}

struct VarEntry {
    name: String,
    id: VarId,
    count: usize,
    span: SourceSpan,
}

pub(crate) struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    catalog: &'a Catalog,
    vars: Vec<VarEntry>,
    next_var: VarId,
    nesting: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(toks: &'a [Token], catalog: &'a Catalog) -> Self {
        Parser {
            toks,
            pos: 0,
            catalog,
            vars: Vec::new(),
            next_var: 0,
            nesting: 0,
        }
    }

    pub(crate) fn program(mut self) -> Result<ParsedProgram, Vec<Diagnostic>> {
        let mut program = Program::default();
        let mut diags = Vec::new();
        while self.pos < self.toks.len() {
            match self.clause() {
                Ok((parsed, warnings)) => {
                    diags.extend(warnings);
                    match self.to_clause(parsed) {
                        Ok(c) => program.push(c),
                        Err(d) => diags.push(d),
                    }
                }
                Err(d) => {
                    diags.push(d);
                    self.skip_clause();
                }
            }
        }
        diags.sort_by_key(|d| (d.span.line, d.span.column));
        if diags.iter().any(Diagnostic::is_error) {
            Err(diags)
        } else {
            Ok(ParsedProgram {
                program,
                warnings: diags,
            })
        }
    }

    pub(crate) fn query(mut self) -> Result<Query, Vec<Diagnostic>> {
        let (term, vars) = self.single_term()?;
        let mut goals = Vec::new();
        crate::term::flatten_conjunction(&term, &mut goals);
        if let Some(bad) = goals.iter().find(|g| matches!(g, Term::Int(_))) {
            let span = self.toks.first().map(|t| t.span).unwrap_or(SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            });
            return Err(vec![self.diag("E-NOT-CALLABLE", span, &[("token", &format!("`{bad}`"))])]);
        }
        Ok(Query {
            goals,
            var_count: self.next_var,
            vars,
        })
    }

    /// One term optionally followed by a period, then end of input.
    pub(crate) fn single_term(&mut self) -> Result<(Term, Vec<Var>), Vec<Diagnostic>> {
        if self.toks.is_empty() {
            return Err(vec![self.diag(
                "E-UNEXPECTED-EOF",
                SourceSpan {
                    line: 1,
                    column: 1,
                    length: 0,
                },
                &[],
            )]);
        }
        let parsed = self.parse(1200).map_err(|d| vec![d])?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::End)) {
            self.pos += 1;
        }
        if let Some(t) = self.peek() {
            return Err(vec![self.unexpected_after_term(t)]);
        }
        let vars = self
            .vars
            .iter()
            .filter(|v| v.name != "_")
            .map(|v| Var::named(v.id, &v.name))
            .collect();
        Ok((parsed.term, vars))
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn diag(&self, code: &str, span: SourceSpan, args: &[(&str, &str)]) -> Diagnostic {
        let (message, fix_hint) = self.catalog.render(code, args);
        Diagnostic {
            code: code.to_string(),
            severity: Severity::Error,
            span,
            message,
            fix_hint,
        }
    }

    fn eof_diag(&self) -> Diagnostic {
        let span = match self.toks.last() {
            Some(t) => SourceSpan {
                line: t.end_line,
                column: t.end_column,
                length: 0,
            },
            None => SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            },
        };
        self.diag("E-UNEXPECTED-EOF", span, &[])
    }

    fn skip_clause(&mut self) {
        while let Some(t) = self.peek() {
            self.pos += 1;
            if t.kind == TokenKind::End {
                break;
            }
        }
    }

    fn clause(&mut self) -> PResult<(Parsed, Vec<Diagnostic>)> {
        self.vars.clear();
        self.next_var = 0;
        let parsed = self.parse(1200)?;
        match self.peek() {
            Some(t) if t.kind == TokenKind::End => self.pos += 1,
            Some(t) => return Err(self.unexpected_after_term(t)),
            None => {
                let last = &self.toks[self.pos - 1];
                let span = SourceSpan {
                    line: last.end_line,
                    column: last.end_column,
                    length: 0,
                };
                return Err(self.diag(
                    "E-MISSING-PERIOD",
                    span,
                    &[("token", "the end of the text"), ("prev", &last.describe())],
                ));
            }
        }
        let warnings = self
            .vars
            .iter()
            .filter(|v| v.count == 1 && !v.name.starts_with('_'))
            .map(|v| {
                let mut d = self.diag("E-SINGLETON-VAR", v.span, &[("name", &v.name)]);
                d.severity = Severity::Warning;
                d
            })
            .collect();
        Ok((parsed, warnings))
    }

    fn unexpected_after_term(&self, t: &Token) -> Diagnostic {
        match &t.kind {
            TokenKind::Punct(c @ (')' | ']')) => self.unbalanced(t, *c),
            TokenKind::Punct(',') => self.diag("E-OPERATOR-CLASH", t.span, &[("token", &t.describe())]),
            TokenKind::Name(n) if infix_op(n).is_some() => {
                self.diag("E-OPERATOR-CLASH", t.span, &[("token", &t.describe())])
            }
            _ if can_start_term(t) => {
                let prev = &self.toks[self.pos - 1];
                let span = SourceSpan {
                    line: prev.end_line,
                    column: prev.end_column,
                    length: 0,
                };
                self.diag(
                    "E-MISSING-PERIOD",
                    span,
                    &[("token", &t.describe()), ("prev", &prev.describe())],
                )
            }
            _ => self.diag("E-UNEXPECTED-TOKEN", t.span, &[("token", &t.describe())]),
        }
    }

    fn unbalanced(&self, t: &Token, close: char) -> Diagnostic {
        let open = if close == ']' { "[" } else { "(" };
        let close = close.to_string();
        self.diag(
            "E-UNBALANCED-PAREN",
            t.span,
            &[("token", &t.describe()), ("open", open), ("close", &close)],
        )
    }

    fn cover(&self, first: usize, last: usize) -> SourceSpan {
        let a = &self.toks[first];
        let b = &self.toks[last];
        let length = if a.span.line == b.end_line {
            b.end_column - a.span.column
        } else {
            a.span.length
        };
        SourceSpan {
            line: a.span.line,
            column: a.span.column,
            length,
        }
    }

    fn leaf(&self, term: Term, first: usize, last: usize, depth: usize) -> Parsed {
        Parsed {
            term,
            prec: 0,
            depth,
            node: SpanNode {
                span: self.cover(first, last),
                kids: Vec::new(),
            },
            first,
            last,
        }
    }

    fn check_depth(&self, depth: usize, first: usize) -> PResult<()> {
        if depth > MAX_TERM_DEPTH {
            return Err(self.diag("E-TOO-DEEP", self.toks[first].span, &[]));
        }
        Ok(())
    }

    fn parse(&mut self, max: u16) -> PResult<Parsed> {
        self.nesting += 1;
        let result = if self.nesting > MAX_NESTING {
            let span = self.peek().map(|t| t.span).unwrap_or(self.toks[self.pos - 1].span);
            Err(self.diag("E-TOO-DEEP", span, &[]))
        } else {
            self.parse_inner(max)
        };
        self.nesting -= 1;
        result
    }

    fn parse_inner(&mut self, max: u16) -> PResult<Parsed> {
        let mut left = self.primary(max)?;
        loop {
            let Some(t) = self.peek() else { break };
            let name = match &t.kind {
                TokenKind::Name(n) => n.as_str(),
                TokenKind::Punct(',') => ",",
                _ => break,
            };
            let Some((p, assoc)) = infix_op(name) else { break };
            if p > max {
                break;
            }
            let (lmax, rmax) = match assoc {
                Assoc::Xfx => (p - 1, p - 1),
                Assoc::Xfy => (p - 1, p),
                _ => (p, p - 1),
            };
            if left.prec > lmax {
                break;
            }
            self.pos += 1;
            let right = self.parse(rmax)?;
            let depth = 1 + left.depth.max(right.depth);
            self.check_depth(depth, left.first)?;
            let (first, last) = (left.first, right.last);
            left = Parsed {
                term: Term::compound(name, vec![left.term, right.term]),
                prec: p,
                depth,
                node: SpanNode {
                    span: self.cover(first, last),
                    kids: vec![left.node, right.node],
                },
                first,
                last,
            };
        }
        Ok(left)
    }

    fn primary(&mut self, max: u16) -> PResult<Parsed> {
        let Some(t) = self.peek() else {
            return Err(self.eof_diag());
        };
        let start = self.pos;
        let next = self.peek_at(1);
        let functional = next.is_some_and(|n| n.kind == TokenKind::Punct('(') && !n.layout_before);
        match &t.kind {
            TokenKind::Int(v) => {
                self.pos += 1;
                Ok(self.leaf(Term::Int(*v), start, start, 0))
            }
            TokenKind::Str(s) => {
                self.pos += 1;
                let depth = s.chars().count();
                self.check_depth(depth, start)?;
                let codes = s.chars().map(|c| Term::Int(c as i64)).collect();
                Ok(self.leaf(Term::list(codes), start, start, depth))
            }
            TokenKind::Var(name) => {
                if functional {
                    let lower = name.trim_start_matches('_').to_lowercase();
                    return Err(self.diag(
                        "E-VAR-AS-FUNCTOR",
                        t.span,
                        &[("name", name), ("lower", &lower)],
                    ));
                }
                self.pos += 1;
                let v = self.variable(name, t.span);
                Ok(self.leaf(v, start, start, 0))
            }
            TokenKind::Punct('(') => {
                self.pos += 1;
                let mut inner = self.parse(1200)?;
                self.expect_close(')')?;
                inner.prec = 0;
                inner.first = start;
                inner.last = self.pos - 1;
                Ok(inner)
            }
            TokenKind::Punct('[') => {
                self.pos += 1;
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Punct(']'))) {
                    self.pos += 1;
                    return Ok(self.leaf(Term::nil(), start, self.pos - 1, 0));
                }
                self.list(start)
            }
            TokenKind::Punct('{') => Err(self.diag("E-UNSUPPORTED", t.span, &[("token", "Curly-brace notation")])),
            TokenKind::Punct(c @ (')' | ']')) => Err(self.unbalanced(t, *c)),
            TokenKind::Punct(_) | TokenKind::End => {
                Err(self.diag("E-UNEXPECTED-TOKEN", t.span, &[("token", &t.describe())]))
            }
            TokenKind::QuotedName(name) => {
                self.pos += 1;
                if functional {
                    return self.functional(name, start);
                }
                Ok(self.leaf(Term::atom(name), start, start, 0))
            }
            TokenKind::Name(name) => {
                self.pos += 1;
                if functional {
                    return self.functional(name, start);
                }
                if name == "-" {
                    if let Some(Token {
                        kind: TokenKind::Int(v),
                        layout_before: false,
                        ..
                    }) = next
                    {
                        self.pos += 1;
                        return Ok(self.leaf(Term::Int(-*v), start, start + 1, 0));
                    }
                }
                if let Some((p, assoc)) = prefix_op(name) {
                    let operand_follows = next.is_some_and(|n| {
                        can_start_term(n)
                            && !matches!(&n.kind, TokenKind::Name(m) if infix_op(m).is_some() && prefix_op(m).is_none())
                    });
                    if operand_follows {
                        if p > max {
                            return Err(self.diag("E-OPERATOR-CLASH", t.span, &[("token", &t.describe())]));
                        }
                        let argmax = if assoc == Assoc::Fy { p } else { p - 1 };
                        let arg = self.parse(argmax)?;
                        let depth = arg.depth + 1;
                        self.check_depth(depth, start)?;
                        let last = arg.last;
                        return Ok(Parsed {
                            term: Term::compound(name, vec![arg.term]),
                            prec: p,
                            depth,
                            node: SpanNode {
                                span: self.cover(start, last),
                                kids: vec![arg.node],
                            },
                            first: start,
                            last,
                        });
                    }
                }
                Ok(self.leaf(Term::atom(name), start, start, 0))
            }
        }
    }

    fn functional(&mut self, name: &str, start: usize) -> PResult<Parsed> {
        // Consume '('.
        self.pos += 1;
        let mut args = Vec::new();
        let mut depth = 0;
        loop {
            let a = self.parse(999)?;
            depth = depth.max(a.depth + 1);
            args.push(a.term);
            match self.peek() {
                Some(t) if t.kind == TokenKind::Punct(',') => self.pos += 1,
                Some(t) if t.kind == TokenKind::Punct(')') => {
                    self.pos += 1;
                    break;
                }
                other => return Err(self.bad_separator(other, ')')),
            }
        }
        self.check_depth(depth, start)?;
        Ok(self.leaf(Term::compound_atom(Atom::new(name), args), start, self.pos - 1, depth))
    }

    fn list(&mut self, start: usize) -> PResult<Parsed> {
        let mut items = Vec::new();
        let mut depth = 0usize;
        let tail = loop {
            let item = self.parse(999)?;
            depth = depth.max(item.depth) + 1;
            self.check_depth(depth + items.len(), start)?;
            items.push(item.term);
            match self.peek() {
                Some(t) if t.kind == TokenKind::Punct(',') => self.pos += 1,
                Some(t) if t.kind == TokenKind::Punct('|') => {
                    self.pos += 1;
                    let tail = self.parse(999)?;
                    depth = depth.max(tail.depth);
                    self.expect_close(']')?;
                    break tail.term;
                }
                Some(t) if t.kind == TokenKind::Punct(']') => {
                    self.pos += 1;
                    break Term::nil();
                }
                other => return Err(self.bad_separator(other, ']')),
            }
        };
        let depth = depth + items.len();
        self.check_depth(depth, start)?;
        Ok(self.leaf(Term::list_with_tail(items, tail), start, self.pos - 1, depth))
    }

    fn expect_close(&mut self, close: char) -> PResult<()> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Punct(close) => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.bad_separator(other, close)),
        }
    }

    /// Diagnoses the token found where a separator or `close` was expected.
    fn bad_separator(&self, found: Option<&Token>, close: char) -> Diagnostic {
        let Some(t) = found else {
            return self.eof_diag();
        };
        match &t.kind {
            TokenKind::End | TokenKind::Punct(')' | ']') => {
                let open = if close == ']' { "[" } else { "(" };
                let close = close.to_string();
                self.diag(
                    "E-UNBALANCED-PAREN",
                    t.span,
                    &[("token", &t.describe()), ("open", open), ("close", &close)],
                )
            }
            TokenKind::Name(n) if infix_op(n).is_some() => {
                self.diag("E-OPERATOR-CLASH", t.span, &[("token", &t.describe())])
            }
            _ if can_start_term(t) => self.diag("E-MISSING-COMMA", t.span, &[("token", &t.describe())]),
            _ => self.diag("E-UNEXPECTED-TOKEN", t.span, &[("token", &t.describe())]),
        }
    }

    fn variable(&mut self, name: &str, span: SourceSpan) -> Term {
        if name == "_" {
            let id = self.next_var;
            self.next_var += 1;
            self.vars.push(VarEntry {
                name: "_".into(),
                id,
                count: 1,
                span,
            });
            return Term::var(id);
        }
        if let Some(v) = self.vars.iter_mut().find(|v| v.name == name) {
            v.count += 1;
            return Term::named_var(v.id, name);
        }
        let id = self.next_var;
        self.next_var += 1;
        self.vars.push(VarEntry {
            name: name.to_string(),
            id,
            count: 1,
            span,
        });
        Term::named_var(id, name)
    }

    fn to_clause(&self, parsed: Parsed) -> PResult<Clause> {
        let span = parsed.node.span;
        let term = parsed.term;
        if term.as_compound(":-", 1).is_some() {
            return Err(self.diag("E-DIRECTIVE", span, &[]));
        }
        let (head, body, goal_spans) = match term.as_compound(":-", 2) {
            Some(parts) => {
                let body_node = parsed.node.kids.get(1);
                let mut goals = Vec::new();
                let mut spans = Vec::new();
                flatten_spanned(&parts[1], body_node, span, &mut goals, &mut spans);
                (parts[0].clone(), goals, spans)
            }
            None => (term.clone(), Vec::new(), Vec::new()),
        };
        let head_span = parsed.node.kids.first().map_or(span, |n| n.span);
        match &head {
            Term::Var(v) => {
                return Err(self.diag("E-NOT-CALLABLE", head_span, &[("token", &format!("The variable {v}"))]))
            }
            Term::Int(i) => {
                return Err(self.diag("E-NOT-CALLABLE", head_span, &[("token", &format!("The number {i}"))]))
            }
            _ => {}
        }
        let pi = head.indicator().expect("callable head");
        if is_builtin(&pi) {
            let lower = pi.name.as_str().to_string();
            return Err(self.diag(
                "E-BUILTIN-REDEFINED",
                head_span,
                &[("name", &pi.to_string()), ("lower", &lower)],
            ));
        }
        for (g, s) in body.iter().zip(&goal_spans) {
            if let Term::Int(i) = g {
                return Err(self.diag("E-NOT-CALLABLE", *s, &[("token", &format!("The number {i}"))]));
            }
        }
        let mut clause = Clause::new(head, body);
        clause.var_count = clause.var_count.max(self.next_var);
        clause.span = Some(span);
        clause.goal_spans = goal_spans;
        Ok(clause)
    }
}

fn flatten_spanned(
    t: &Term,
    node: Option<&SpanNode>,
    fallback: SourceSpan,
    goals: &mut Vec<Term>,
    spans: &mut Vec<SourceSpan>,
) {
    let span = node.map_or(fallback, |n| n.span);
    if let Some(parts) = t.as_compound(",", 2) {
        let kids = node.filter(|n| n.kids.len() == 2);
        flatten_spanned(&parts[0], kids.map(|n| &n.kids[0]), span, goals, spans);
        flatten_spanned(&parts[1], kids.map(|n| &n.kids[1]), span, goals, spans);
        return;
    }
    goals.push(t.clone());
    spans.push(span);
}

fn can_start_term(t: &Token) -> bool {
    match &t.kind {
        TokenKind::Name(_)
        | TokenKind::QuotedName(_)
        | TokenKind::Var(_)
        | TokenKind::Int(_)
        | TokenKind::Str(_) => true,
        TokenKind::Punct(c) => matches!(c, '(' | '[' | '{'),
        TokenKind::End => false,
    }
}
