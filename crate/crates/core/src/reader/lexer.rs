use super::{Diagnostic, Severity, SourceSpan};
use crate::reader::catalog::Catalog;
use crate::term::is_symbol_char;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Unquoted atom: letters, symbol characters, `!` or `;`.
    Name(String),
    /// Quoted atom; never treated as an operator.
    QuotedName(String),
    Var(String),
    Int(i64),
    /// Double-quoted text, read as a list of character codes.
    Str(String),
    /// One of `( ) [ ] { } , |`.
    Punct(char),
    /// The clause-terminating period.
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
    /// Whitespace or a comment precedes the token.
    pub layout_before: bool,
    /// Line and column just past the token's last character.
    pub end_line: usize,
    pub end_column: usize,
}

impl Token {
    /// How the token is named in diagnostics.
    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Name(n) | TokenKind::QuotedName(n) | TokenKind::Var(n) => format!("`{n}`"),
            TokenKind::Int(i) => format!("`{i}`"),
            TokenKind::Str(s) => format!("`\"{s}\"`"),
            TokenKind::Punct(c) => format!("`{c}`"),
            TokenKind::End => "`.`".to_string(),
        }
    }
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

/// Splits `source` into tokens, skipping layout and comments. Lexical errors
/// are collected; lexing continues after each one.
pub fn lex(source: &str, catalog: &Catalog) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        _src: source,
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut layout = true;

    while let Some(c) = cur.peek() {
        let (line, column, start) = (cur.line, cur.column, cur.pos);
        let mk_diag = |code: &str, len: usize, args: &[(&str, &str)], line, column| {
            let (message, fix_hint) = catalog.render(code, args);
            Diagnostic {
                code: code.to_string(),
                severity: Severity::Error,
                span: SourceSpan {
                    line,
                    column,
                    length: len,
                },
                message,
                fix_hint,
            }
        };

        if c.is_whitespace() {
            cur.bump();
            layout = true;
            continue;
        }
        if c == '%' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            layout = true;
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            let mut closed = false;
            while let Some(c) = cur.bump() {
                if c == '*' && cur.peek() == Some('/') {
                    cur.bump();
                    closed = true;
                    break;
                }
            }
            if !closed {
                diags.push(mk_diag("E-UNTERMINATED-COMMENT", 2, &[], line, column));
            }
            layout = true;
            continue;
        }

        let kind = if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            let text: String = cur.chars[start..cur.pos].iter().collect();
            match text.parse::<i64>() {
                Ok(v) => TokenKind::Int(v),
                Err(_) => {
                    let shown = format!("`{text}`");
                    diags.push(mk_diag(
                        "E-BAD-NUMBER",
                        cur.pos - start,
                        &[("token", &shown)],
                        line,
                        column,
                    ));
                    TokenKind::Int(0)
                }
            }
        } else if c == '_' || c.is_uppercase() {
            while cur.peek().is_some_and(is_alnum) {
                cur.bump();
            }
            TokenKind::Var(cur.chars[start..cur.pos].iter().collect())
        } else if c.is_alphabetic() {
            while cur.peek().is_some_and(is_alnum) {
                cur.bump();
            }
            TokenKind::Name(cur.chars[start..cur.pos].iter().collect())
        } else if c == '.'
            && cur
                .peek_at(1)
                .is_none_or(|n| n.is_whitespace() || n == '%')
        {
            cur.bump();
            TokenKind::End
        } else if is_symbol_char(c) {
            while cur.peek().is_some_and(is_symbol_char) {
                cur.bump();
            }
            TokenKind::Name(cur.chars[start..cur.pos].iter().collect())
        } else if c == '!' || c == ';' {
            cur.bump();
            TokenKind::Name(c.to_string())
        } else if "()[]{},|".contains(c) {
            cur.bump();
            TokenKind::Punct(c)
        } else if c == '\'' || c == '"' {
            cur.bump();
            match read_quoted(&mut cur, c) {
                Some(text) if c == '\'' => TokenKind::QuotedName(text),
                Some(text) => TokenKind::Str(text),
                None => {
                    let close = c.to_string();
                    diags.push(mk_diag(
                        "E-UNTERMINATED-QUOTE",
                        1,
                        &[("close", &close)],
                        line,
                        column,
                    ));
                    layout = true;
                    continue;
                }
            }
        } else {
            cur.bump();
            let shown = format!("`{c}`");
            diags.push(mk_diag("E-BAD-CHAR", 1, &[("token", &shown)], line, column));
            layout = true;
            continue;
        };

        tokens.push(Token {
            kind,
            span: SourceSpan {
                line,
                column,
                length: cur.pos - start,
            },
            layout_before: layout,
            end_line: cur.line,
            end_column: cur.column,
        });
        layout = false;
    }
    (tokens, diags)
}

fn is_alnum(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Reads up to the closing `quote` on the same line. Returns `None` (having
/// consumed the rest of the line) when the quote is not closed.
fn read_quoted(cur: &mut Cursor<'_>, quote: char) -> Option<String> {
    let mut out = String::new();
    loop {
        let c = cur.peek()?;
        if c == '\n' {
            return None;
        }
        cur.bump();
        if c == quote {
            if cur.peek() == Some(quote) {
                cur.bump();
                out.push(quote);
                continue;
            }
            return Some(out);
        }
        if c == '\\' {
            let e = cur.peek()?;
            if e == '\n' {
                return None;
            }
            cur.bump();
            out.push(match e {
                'n' => '\n',
                't' => '\t',
                other => other,
            });
            continue;
        }
        out.push(c);
    }
}
