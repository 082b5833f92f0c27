//! The term language shared by every other module: atoms, integers,
//! variables and compounds, plus clauses, programs and substitutions.
//!
//! Terms are immutable and cheap to clone (names and argument vectors are
//! reference counted), so programs can be shared between concurrent runs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::reader::SourceSpan;

pub type VarId = usize;

/// An interned-by-refcount atom name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Self {
        Atom(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Atom {
    fn from(s: &str) -> Self {
        Atom::new(s)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, &self.0)
    }
}

/// A logic variable. Identity is the numeric id; the name only affects
/// printing.
#[derive(Clone)]
pub struct Var {
    pub id: VarId,
    pub name: Option<Arc<str>>,
}

impl Var {
    pub fn new(id: VarId) -> Self {
        Var { id, name: None }
    }

    pub fn named(id: VarId, name: &str) -> Self {
        Var {
            id,
            name: Some(Arc::from(name)),
        }
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "{}#{}", n, self.id),
            None => write!(f, "_G{}", self.id),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) if &**n != "_" => f.write_str(n),
            _ => write!(f, "_G{}", self.id),
        }
    }
}

#[derive(Clone)]
pub enum Term {
    Atom(Atom),
    Int(i64),
    Var(Var),
    /// Always has at least one argument; zero-arity callables are atoms.
    Compound { functor: Atom, args: Arc<[Term]> },
}

pub const NIL: &str = "[]";
pub const CONS: &str = ".";

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(Atom::new(name))
    }

    pub fn int(value: i64) -> Term {
        Term::Int(value)
    }

    pub fn var(id: VarId) -> Term {
        Term::Var(Var::new(id))
    }

    pub fn named_var(id: VarId, name: &str) -> Term {
        Term::Var(Var::named(id, name))
    }

    /// Builds `functor(args...)`, collapsing to an atom when `args` is empty.
    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        Term::compound_atom(Atom::new(functor), args)
    }

    pub fn compound_atom(functor: Atom, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound {
                functor,
                args: args.into(),
            }
        }
    }

    pub fn nil() -> Term {
        Term::atom(NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::compound(CONS, vec![head, tail])
    }

    /// Builds a list from `items` ending in `tail` (`[]` for a proper list).
    pub fn list_with_tail(items: Vec<Term>, tail: Term) -> Term {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::cons(item, acc))
    }

    pub fn list(items: Vec<Term>) -> Term {
        Term::list_with_tail(items, Term::nil())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Compound { .. })
    }

    pub fn is_atom(&self, name: &str) -> bool {
        matches!(self, Term::Atom(a) if a.as_str() == name)
    }

    pub fn is_nil(&self) -> bool {
        self.is_atom(NIL)
    }

    /// Name and arity for callable terms.
    pub fn indicator(&self) -> Option<PredicateIndicator> {
        match self {
            Term::Atom(a) => Some(PredicateIndicator {
                name: a.clone(),
                arity: 0,
            }),
            Term::Compound { functor, args } => Some(PredicateIndicator {
                name: functor.clone(),
                arity: args.len(),
            }),
            _ => None,
        }
    }

    /// Functor name and arguments of a callable term (atoms have no args).
    pub fn functor_args(&self) -> Option<(&str, &[Term])> {
        match self {
            Term::Atom(a) => Some((a.as_str(), &[])),
            Term::Compound { functor, args } => Some((functor.as_str(), args)),
            _ => None,
        }
    }

    /// Matches a compound with the given functor and arity.
    pub fn as_compound(&self, name: &str, arity: usize) -> Option<&[Term]> {
        match self {
            Term::Compound { functor, args } if functor.as_str() == name && args.len() == arity => {
                Some(args)
            }
            _ => None,
        }
    }

    /// Elements of a proper list, or `None` for partial/improper lists.
    pub fn list_items(&self) -> Option<Vec<&Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            if cur.is_nil() {
                return Some(out);
            }
            let cell = cur.as_compound(CONS, 2)?;
            out.push(&cell[0]);
            cur = &cell[1];
        }
    }

    pub fn is_ground(&self) -> bool {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                Term::Var(_) => return false,
                Term::Compound { args, .. } => stack.extend(args.iter()),
                _ => {}
            }
        }
        true
    }

    /// Applies `f` to every variable, rebuilding the term.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Term {
        rebuild(self, &mut |t| match t {
            Term::Var(v) => Some(f(v)),
            _ => None,
        })
    }

    fn type_rank(&self) -> u8 {
        match self {
            Term::Var(_) => 0,
            Term::Int(_) => 1,
            Term::Atom(_) => 2,
            Term::Compound { .. } => 3,
        }
    }
}

/// Standard order: Var < Int < Atom < Compound; compounds by arity, then
/// name, then arguments left to right.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut stack = vec![(self, other)];
        while let Some((a, b)) = stack.pop() {
            let ord = match (a, b) {
                (Term::Var(x), Term::Var(y)) => x.id.cmp(&y.id),
                (Term::Int(x), Term::Int(y)) => x.cmp(y),
                (Term::Atom(x), Term::Atom(y)) => x.cmp(y),
                (
                    Term::Compound {
                        functor: fa,
                        args: aa,
                    },
                    Term::Compound {
                        functor: fb,
                        args: ab,
                    },
                ) => {
                    let ord = aa.len().cmp(&ab.len()).then_with(|| fa.cmp(fb));
                    if ord.is_eq() && !Arc::ptr_eq(aa, ab) {
                        stack.extend(aa.iter().zip(ab.iter()).rev());
                    }
                    ord
                }
                _ => a.type_rank().cmp(&b.type_rank()),
            };
            if ord.is_ne() {
                return ord;
            }
        }
        Ordering::Equal
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            t.type_rank().hash(state);
            match t {
                Term::Var(v) => v.id.hash(state),
                Term::Int(i) => i.hash(state),
                Term::Atom(a) => a.hash(state),
                Term::Compound { functor, args } => {
                    functor.hash(state);
                    args.len().hash(state);
                    stack.extend(args.iter().rev());
                }
            }
        }
    }
}

/// Dropping a long list or a deeply nested term must not recurse once per
/// level, so uniquely owned children are detached onto a heap stack first.
impl Drop for Term {
    fn drop(&mut self) {
        let Term::Compound { args, .. } = self else {
            return;
        };
        let Some(children) = Arc::get_mut(args) else {
            return;
        };
        let mut stack: Vec<Term> = Vec::new();
        detach(children, &mut stack);
        while let Some(mut t) = stack.pop() {
            if let Term::Compound { args, .. } = &mut t {
                if let Some(children) = Arc::get_mut(args) {
                    detach(children, &mut stack);
                }
            }
        }
    }
}

fn detach(children: &mut [Term], stack: &mut Vec<Term>) {
    for c in children {
        if matches!(c, Term::Compound { .. }) {
            stack.push(std::mem::replace(c, Term::Int(0)));
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical rendering: no operators, atoms quoted where the reader needs
/// it, lists in bracket notation.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => write_atom(f, a.as_str()),
            Term::Int(i) => write!(f, "{i}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Compound { functor, args } => {
                if functor.as_str() == CONS && args.len() == 2 {
                    return write_list(f, self);
                }
                write_atom(f, functor.as_str())?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, list: &Term) -> fmt::Result {
    f.write_str("[")?;
    let mut cur = list;
    let mut first = true;
    loop {
        match cur.as_compound(CONS, 2) {
            Some(cell) => {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                write!(f, "{}", cell[0])?;
                cur = &cell[1];
            }
            None => {
                if !cur.is_nil() {
                    write!(f, "|{cur}")?;
                }
                return f.write_str("]");
            }
        }
    }
}

/// Rebuilds `t` bottom-up, replacing every subterm for which `leaf` returns
/// a value. The rightmost argument is followed in a loop, so long lists do
/// not deepen the native stack.
pub(crate) fn rebuild(t: &Term, leaf: &mut impl FnMut(&Term) -> Option<Term>) -> Term {
    let mut spine: Vec<(Atom, Vec<Term>)> = Vec::new();
    let mut cur = t;
    let last = loop {
        if let Some(r) = leaf(cur) {
            break r;
        }
        match cur {
            Term::Compound { functor, args } => {
                let (init, tail) = args.split_at(args.len() - 1);
                let init = init.iter().map(|a| rebuild(a, leaf)).collect();
                spine.push((functor.clone(), init));
                cur = &tail[0];
            }
            other => break other.clone(),
        }
    };
    spine.into_iter().rev().fold(last, |acc, (functor, mut init)| {
        init.push(acc);
        Term::Compound {
            functor,
            args: init.into(),
        }
    })
}

pub(crate) const SYMBOL_CHARS: &str = "#$&*+-./:<=>?@^~\\";

pub(crate) fn is_symbol_char(c: char) -> bool {
    SYMBOL_CHARS.contains(c)
}

/// True when `name` can be written without quotes.
pub fn atom_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return true;
    };
    if matches!(name, "[]" | "!" | ";") {
        return false;
    }
    if first.is_ascii_lowercase() {
        return !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    }
    if name.chars().all(is_symbol_char) {
        // A lone '.' reads as a clause terminator and "/*" opens a comment.
        return name == "." || name.starts_with("/*");
    }
    true
}

fn write_atom(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if !atom_needs_quotes(name) {
        return f.write_str(name);
    }
    f.write_str("'")?;
    for c in name.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

/// Serializes any displayable value as its text rendering.
pub(crate) fn serialize_display<T: fmt::Display, S: serde::Serializer>(
    value: &T,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

/// `name/arity`, e.g. `is_prime/1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateIndicator {
    pub name: Atom,
    pub arity: usize,
}

impl PredicateIndicator {
    pub fn new(name: &str, arity: usize) -> Self {
        PredicateIndicator {
            name: Atom::new(name),
            arity,
        }
    }
}

impl fmt::Display for PredicateIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl fmt::Debug for PredicateIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not a predicate indicator of the form name/arity")]
pub struct BadIndicator(pub String);

impl FromStr for PredicateIndicator {
    type Err = BadIndicator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arity) = s.rsplit_once('/').ok_or_else(|| BadIndicator(s.into()))?;
        let arity = arity.parse().map_err(|_| BadIndicator(s.into()))?;
        let name = name.trim();
        let name = name
            .strip_prefix('\'')
            .and_then(|n| n.strip_suffix('\''))
            .unwrap_or(name);
        if name.is_empty() {
            return Err(BadIndicator(s.into()));
        }
        Ok(PredicateIndicator::new(name, arity))
    }
}

impl Serialize for PredicateIndicator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PredicateIndicator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `head :- body`. The body is a flat goal list; facts have an empty body.
#[derive(Clone, Debug)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    /// One past the largest variable id used in the clause.
    pub var_count: usize,
    pub span: Option<SourceSpan>,
    /// Source span of each body goal, parallel to `body` when present.
    pub goal_spans: Vec<SourceSpan>,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Term>) -> Clause {
        let var_count = std::iter::once(&head)
            .chain(body.iter())
            .flat_map(variables_of)
            .map(|id| id + 1)
            .max()
            .unwrap_or(0);
        Clause {
            head,
            body,
            var_count,
            span: None,
            goal_spans: Vec::new(),
        }
    }

    /// Builds a clause from a `H :- B` or fact term, flattening `,`/2 in the
    /// body and renumbering variables densely from zero.
    pub fn from_term(term: &Term) -> Clause {
        let (head, body) = match term.as_compound(":-", 2) {
            Some(parts) => {
                let mut goals = Vec::new();
                flatten_conjunction(&parts[1], &mut goals);
                (parts[0].clone(), goals)
            }
            None => (term.clone(), Vec::new()),
        };
        let mut ids = HashMap::new();
        let mut renumber = |v: &Var| {
            let next = ids.len();
            let id = *ids.entry(v.id).or_insert(next);
            Term::Var(Var {
                id,
                name: v.name.clone(),
            })
        };
        let head = head.map_vars(&mut renumber);
        let body = body.iter().map(|g| g.map_vars(&mut renumber)).collect();
        Clause::new(head, body)
    }

    pub fn indicator(&self) -> PredicateIndicator {
        self.head
            .indicator()
            .expect("clause heads are callable by construction")
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// The clause as a single term: the head for facts, `H :- B` otherwise.
    pub fn to_term(&self) -> Term {
        if self.body.is_empty() {
            return self.head.clone();
        }
        Term::compound(":-", vec![self.head.clone(), conjunction(&self.body)])
    }
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

/// Appends the conjuncts of a `,`/2 tree to `out`.
pub fn flatten_conjunction(t: &Term, out: &mut Vec<Term>) {
    let mut cur = t;
    while let Some(parts) = cur.as_compound(",", 2) {
        flatten_conjunction(&parts[0], out);
        cur = &parts[1];
    }
    out.push(cur.clone());
}

/// Right-nested `,`/2 of `goals`; `true` when empty.
pub fn conjunction(goals: &[Term]) -> Term {
    match goals.split_last() {
        None => Term::atom("true"),
        Some((last, init)) => init
            .iter()
            .rev()
            .fold(last.clone(), |acc, g| Term::compound(",", vec![g.clone(), acc])),
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = if self.body.is_empty() {
            self.head.to_string()
        } else {
            let goals: Vec<String> = self.body.iter().map(|g| g.to_string()).collect();
            format!("{} :- {}", self.head, goals.join(", "))
        };
        f.write_str(&text)?;
        if text.ends_with(is_symbol_char) {
            f.write_str(" ")?;
        }
        f.write_str(".")
    }
}

/// An ordered clause store with a per-predicate index.
#[derive(Clone, Debug, Default)]
pub struct Program {
    clauses: Vec<Arc<Clause>>,
    index: BTreeMap<PredicateIndicator, Vec<usize>>,
}

impl Program {
    pub fn new(clauses: Vec<Clause>) -> Program {
        let mut p = Program::default();
        for c in clauses {
            p.push(c);
        }
        p
    }

    pub fn push(&mut self, clause: Clause) {
        let pos = self.clauses.len();
        self.index.entry(clause.indicator()).or_default().push(pos);
        self.clauses.push(Arc::new(clause));
    }

    pub fn clauses(&self) -> &[Arc<Clause>] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Clauses of one predicate in source order.
    pub fn clauses_for<'a>(
        &'a self,
        pi: &PredicateIndicator,
    ) -> impl Iterator<Item = &'a Arc<Clause>> + 'a {
        self.index
            .get(pi)
            .into_iter()
            .flatten()
            .map(move |&i| &self.clauses[i])
    }

    pub fn defines(&self, pi: &PredicateIndicator) -> bool {
        self.index.contains_key(pi)
    }

    /// Defined predicates in indicator order.
    pub fn predicates(&self) -> impl Iterator<Item = &PredicateIndicator> {
        self.index.keys()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Variable bindings produced by unification.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<VarId, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: VarId) -> Option<&Term> {
        self.bindings.get(&id)
    }

    pub fn bind(&mut self, id: VarId, value: Term) {
        self.bindings.insert(id, value);
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Term)> {
        self.bindings.iter().map(|(k, v)| (*k, v))
    }

    pub fn domain(&self) -> impl Iterator<Item = VarId> + '_ {
        self.bindings.keys().copied()
    }

    /// Follows variable-to-variable chains until an unbound variable or a
    /// non-variable term.
    pub fn deref<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(&v.id) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    pub fn apply(&self, t: &Term) -> Term {
        let mut spine: Vec<(Atom, Vec<Term>)> = Vec::new();
        let mut cur = self.deref(t);
        while let Term::Compound { functor, args } = cur {
            let (init, tail) = args.split_at(args.len() - 1);
            spine.push((functor.clone(), init.iter().map(|a| self.apply(a)).collect()));
            cur = self.deref(&tail[0]);
        }
        spine.into_iter().rev().fold(cur.clone(), |acc, (functor, mut init)| {
            init.push(acc);
            Term::Compound {
                functor,
                args: init.into(),
            }
        })
    }
}

impl FromIterator<(VarId, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (VarId, Term)>>(iter: I) -> Self {
        Substitution {
            bindings: iter.into_iter().collect(),
        }
    }
}

/// Replaces every bound variable of `t` by its fully dereferenced value.
pub fn apply_substitution(t: &Term, s: &Substitution) -> Term {
    s.apply(t)
}

/// Variable ids of `t` in first-occurrence order, without duplicates.
pub fn variables_of(t: &Term) -> Vec<VarId> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut stack = vec![t];
    while let Some(t) = stack.pop() {
        match t {
            Term::Var(v) => {
                if seen.insert(v.id) {
                    out.push(v.id);
                }
            }
            Term::Compound { args, .. } => stack.extend(args.iter().rev()),
            _ => {}
        }
    }
    out
}

/// Source of never-before-issued variable ids.
#[derive(Debug, Clone)]
pub struct FreshVars {
    next: VarId,
}

impl FreshVars {
    pub fn starting_at(next: VarId) -> Self {
        FreshVars { next }
    }

    pub fn next_id(&mut self) -> VarId {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> VarId {
        self.next
    }
}

/// Renames every variable of `c` to a fresh id, keeping display names.
pub fn rename_apart(c: &Clause, fresh: &mut FreshVars) -> Clause {
    let mut map: HashMap<VarId, VarId> = HashMap::new();
    let mut rename = |v: &Var| {
        let id = *map.entry(v.id).or_insert_with(|| fresh.next_id());
        Term::Var(Var {
            id,
            name: v.name.clone(),
        })
    };
    let head = c.head.map_vars(&mut rename);
    let body = c.body.iter().map(|g| g.map_vars(&mut rename)).collect();
    let mut out = Clause::new(head, body);
    out.span = c.span;
    out.goal_spans = c.goal_spans.clone();
    out
}

/// Equality up to a bijective renaming of variables.
pub fn alpha_equal(a: &Term, b: &Term) -> bool {
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    alpha_walk(a, b, &mut fwd, &mut bwd)
}

/// Like [`alpha_equal`] but over sequences sharing one renaming.
pub fn alpha_equal_all(a: &[Term], b: &[Term]) -> bool {
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| alpha_walk(x, y, &mut fwd, &mut bwd))
}

fn alpha_walk(
    a: &Term,
    b: &Term,
    fwd: &mut HashMap<VarId, VarId>,
    bwd: &mut HashMap<VarId, VarId>,
) -> bool {
    let mut stack = vec![(a, b)];
    while let Some((a, b)) = stack.pop() {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let f = *fwd.entry(x.id).or_insert(y.id);
                let r = *bwd.entry(y.id).or_insert(x.id);
                if f != y.id || r != x.id {
                    return false;
                }
            }
            (Term::Int(x), Term::Int(y)) if x == y => {}
            (Term::Atom(x), Term::Atom(y)) if x == y => {}
            (
                Term::Compound {
                    functor: fa,
                    args: aa,
                },
                Term::Compound {
                    functor: fb,
                    args: ab,
                },
            ) if fa == fb && aa.len() == ab.len() => stack.extend(aa.iter().zip(ab.iter())),
            _ => return false,
        }
    }
    true
}

/// Renames variables by first occurrence to ids `0..n` named `_A`, `_B`, ...
/// so alpha-equivalent terms become structurally equal.
pub fn canonical_vars(terms: &[Term]) -> Vec<Term> {
    let mut map: HashMap<VarId, VarId> = HashMap::new();
    terms
        .iter()
        .map(|t| {
            t.map_vars(&mut |v| {
                let next = map.len();
                let id = *map.entry(v.id).or_insert(next);
                Term::Var(Var::named(id, &canonical_var_name(id)))
            })
        })
        .collect()
}

fn canonical_var_name(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        format!("_{letter}")
    } else {
        format!("_{letter}{}", i / 26)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::named_var(0, "X")
    }
    fn y() -> Term {
        Term::named_var(1, "Y")
    }

    #[test]
    fn variables_in_first_occurrence_order() {
        let t = Term::compound("f", vec![x(), Term::compound("g", vec![y(), x()])]);
        assert_eq!(variables_of(&t), vec![0, 1]);
        assert!(variables_of(&Term::atom("a")).is_empty());
        assert_eq!(variables_of(&Term::named_var(7, "Z")), vec![7]);
    }

    #[test]
    fn rename_apart_shares_fresh_ids() {
        let fact = Clause::new(
            Term::compound("gcd", vec![Term::int(0), y(), y()]),
            vec![],
        );
        let mut fresh = FreshVars::starting_at(8);
        let r = rename_apart(&fact, &mut fresh);
        assert_eq!(r.head.to_string(), "gcd(0,Y,Y)");
        assert_eq!(variables_of(&r.head), vec![8]);
        assert_eq!(fresh.peek(), 9);
        assert!(alpha_equal(&r.head, &fact.head));

        let rule = Clause::new(
            Term::compound("p", vec![x()]),
            vec![Term::compound("q", vec![x()])],
        );
        let r = rename_apart(&rule, &mut fresh);
        assert_eq!(variables_of(&r.head), vec![9]);
        assert_eq!(variables_of(&r.body[0]), vec![9]);

        let ground = Clause::new(Term::compound("p", vec![Term::int(1)]), vec![]);
        assert_eq!(rename_apart(&ground, &mut fresh), ground);
        assert_eq!(fresh.peek(), 10);
    }

    #[test]
    fn alpha_equality_cases() {
        let a = |n| Term::named_var(n, "A");
        let f = |args| Term::compound("f", args);
        assert!(alpha_equal(&f(vec![x(), y(), x()]), &f(vec![a(5), a(6), a(5)])));
        assert!(!alpha_equal(&f(vec![x(), y(), x()]), &f(vec![a(5), a(6), a(6)])));
        assert!(!alpha_equal(&f(vec![x()]), &f(vec![Term::atom("a")])));
        // bijection, not just a function
        assert!(!alpha_equal(&f(vec![x(), y()]), &f(vec![a(5), a(5)])));
    }

    #[test]
    fn substitution_application() {
        let s: Substitution = [(0, Term::atom("a"))].into_iter().collect();
        let t = Term::compound("f", vec![x(), y()]);
        assert_eq!(apply_substitution(&t, &s).to_string(), "f(a,Y)");

        let s: Substitution = [(0, y()), (1, Term::atom("b"))].into_iter().collect();
        assert_eq!(apply_substitution(&x(), &s), Term::atom("b"));
        assert_eq!(apply_substitution(&Term::atom("a"), &s), Term::atom("a"));
    }

    #[test]
    fn canonical_rendering() {
        let l = Term::list(vec![Term::int(1), Term::int(-2)]);
        assert_eq!(l.to_string(), "[1,-2]");
        let partial = Term::list_with_tail(vec![Term::atom("a")], x());
        assert_eq!(partial.to_string(), "[a|X]");
        assert_eq!(Term::atom("hello world").to_string(), "'hello world'");
        assert_eq!(Term::atom("[]").to_string(), "[]");
        assert_eq!(Term::atom(",").to_string(), "','");
        assert_eq!(Term::atom("it's").to_string(), "'it\\'s'");
        assert_eq!(
            Term::compound("is", vec![x(), Term::compound("+", vec![Term::int(1), y()])])
                .to_string(),
            "is(X,+(1,Y))"
        );
        assert_eq!(Term::compound("-", vec![Term::int(1)]).to_string(), "-(1)");
    }

    #[test]
    fn standard_order_ranks_types() {
        let mut ts = vec![
            Term::compound("f", vec![Term::int(1)]),
            Term::atom("a"),
            Term::int(3),
            x(),
            Term::compound("a", vec![Term::int(1), Term::int(2)]),
            Term::compound("g", vec![Term::int(0)]),
        ];
        ts.sort();
        let s: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
        assert_eq!(s, ["X", "3", "a", "f(1)", "g(0)", "a(1,2)"]);
    }

    #[test]
    fn indicator_parsing() {
        let pi: PredicateIndicator = "is_prime/1".parse().unwrap();
        assert_eq!(pi, PredicateIndicator::new("is_prime", 1));
        assert_eq!(pi.to_string(), "is_prime/1");
        let slash: PredicateIndicator = "'/'/2".parse().unwrap();
        assert_eq!(slash.name.as_str(), "/");
        assert!("halt".parse::<PredicateIndicator>().is_err());
        assert!("/0".parse::<PredicateIndicator>().is_err());
    }

    #[test]
    fn program_index_preserves_source_order() {
        let c = |n: i64| Clause::new(Term::compound("p", vec![Term::int(n)]), vec![]);
        let q = Clause::new(Term::atom("q"), vec![]);
        let p = Program::new(vec![c(1), q, c(2)]);
        let got: Vec<String> = p
            .clauses_for(&PredicateIndicator::new("p", 1))
            .map(|c| c.head.to_string())
            .collect();
        assert_eq!(got, ["p(1)", "p(2)"]);
        assert!(p.defines(&PredicateIndicator::new("q", 0)));
        assert!(!p.defines(&PredicateIndicator::new("q", 1)));
    }

    #[test]
    fn clause_from_term_flattens_and_renumbers() {
        let t = Term::compound(
            ":-",
            vec![
                Term::compound("p", vec![Term::named_var(40, "X")]),
                Term::compound(
                    ",",
                    vec![
                        Term::compound("q", vec![Term::named_var(40, "X")]),
                        Term::compound(",", vec![Term::atom("r"), Term::named_var(41, "Y")]),
                    ],
                ),
            ],
        );
        let c = Clause::from_term(&t);
        assert_eq!(c.body.len(), 3);
        assert_eq!(c.var_count, 2);
        assert_eq!(c.to_string(), "p(X) :- q(X), r, Y.");
        assert!(alpha_equal(&c.to_term(), &t));
    }
}
