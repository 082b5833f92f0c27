//! Unification with occurs-check, generic over where bindings live.

use std::sync::Arc;

use crate::term::{Substitution, Term, VarId};

/// Bounds the number of term nodes a run may visit outside of inference
/// steps, so large shared terms cannot stall a run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Work {
    left: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Exhausted;

impl Work {
    pub(crate) fn new(budget: u64) -> Self {
        Work { left: budget }
    }

    pub(crate) fn unlimited() -> Self {
        Work { left: u64::MAX }
    }

    #[inline]
    pub(crate) fn tick(&mut self) -> Result<(), Exhausted> {
        if self.left == 0 {
            return Err(Exhausted);
        }
        self.left -= 1;
        Ok(())
    }
}

pub(crate) trait Bindings {
    fn lookup(&self, id: VarId) -> Option<&Term>;
    fn bind(&mut self, id: VarId, value: Term);
}

impl Bindings for Substitution {
    fn lookup(&self, id: VarId) -> Option<&Term> {
        self.get(id)
    }

    fn bind(&mut self, id: VarId, value: Term) {
        Substitution::bind(self, id, value)
    }
}

pub(crate) fn deref<'a, B: Bindings + ?Sized>(b: &'a B, mut t: &'a Term) -> &'a Term {
    while let Term::Var(v) = t {
        match b.lookup(v.id) {
            Some(next) => t = next,
            None => break,
        }
    }
    t
}

fn occurs<B: Bindings + ?Sized>(b: &B, id: VarId, t: &Term, work: &mut Work) -> Result<bool, Exhausted> {
    let mut stack = vec![t];
    while let Some(t) = stack.pop() {
        work.tick()?;
        match deref(b, t) {
            Term::Var(v) if v.id == id => return Ok(true),
            Term::Compound { args, .. } => stack.extend(args.iter()),
            _ => {}
        }
    }
    Ok(false)
}

/// Unifies `x` and `y`, recording bindings in `b`. On `Ok(false)` some
/// bindings may already have been made; callers undo them.
pub(crate) fn unify_in<B: Bindings + ?Sized>(
    b: &mut B,
    x: &Term,
    y: &Term,
    work: &mut Work,
) -> Result<bool, Exhausted> {
    unify_fresh(b, x, y, VarId::MAX, work)
}

/// Unification where every variable numbered `fresh_from` or above is
/// brand new (a just-renamed clause head) and the older terms cannot reach
/// them through existing bindings.
///
/// Until an older variable gets bound, a new variable can only be bound to
/// an older term, which cannot contain it, so the occurs check is skipped.
/// This keeps head unification against long lists linear.
pub(crate) fn unify_fresh<B: Bindings + ?Sized>(
    b: &mut B,
    x: &Term,
    y: &Term,
    fresh_from: VarId,
    work: &mut Work,
) -> Result<bool, Exhausted> {
    let mut old_bound = false;
    let mut stack = vec![(x.clone(), y.clone())];
    while let Some((x, y)) = stack.pop() {
        work.tick()?;
        let x = deref(b, &x).clone();
        let y = deref(b, &y).clone();
        match (&x, &y) {
            (Term::Var(a), Term::Var(c)) if a.id == c.id => {}
            (Term::Var(a), Term::Var(c)) => {
                // Bind the younger variable to the older one.
                let (young, old) = if a.id > c.id { (a, &y) } else { (c, &x) };
                old_bound |= young.id < fresh_from;
                b.bind(young.id, old.clone());
            }
            (Term::Var(a), other) | (other, Term::Var(a)) => {
                let is_old = a.id < fresh_from;
                if (is_old || old_bound) && occurs(b, a.id, other, work)? {
                    return Ok(false);
                }
                old_bound |= is_old;
                b.bind(a.id, other.clone());
            }
            (Term::Int(i), Term::Int(j)) => {
                if i != j {
                    return Ok(false);
                }
            }
            (Term::Atom(p), Term::Atom(q)) => {
                if p != q {
                    return Ok(false);
                }
            }
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
                if fa != fb || aa.len() != ab.len() {
                    return Ok(false);
                }
                if Arc::ptr_eq(aa, ab) {
                    continue;
                }
                for (p, q) in aa.iter().zip(ab.iter()).rev() {
                    stack.push((p.clone(), q.clone()));
                }
            }
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Structural identity after dereferencing (`==`).
pub(crate) fn identical<B: Bindings + ?Sized>(
    b: &B,
    x: &Term,
    y: &Term,
    work: &mut Work,
) -> Result<bool, Exhausted> {
    let mut stack = vec![(x, y)];
    while let Some((x, y)) = stack.pop() {
        work.tick()?;
        match (deref(b, x), deref(b, y)) {
            (Term::Var(a), Term::Var(c)) if a.id == c.id => {}
            (Term::Int(i), Term::Int(j)) if i == j => {}
            (Term::Atom(p), Term::Atom(q)) if p == q => {}
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
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Fully dereferences `t`. Right-nested structure such as list spines is
/// walked iteratively.
pub(crate) fn resolve<B: Bindings + ?Sized>(b: &B, t: &Term, work: &mut Work) -> Result<Term, Exhausted> {
    let mut spine: Vec<(crate::term::Atom, Vec<Term>)> = Vec::new();
    let mut cur = deref(b, t);
    let last = loop {
        work.tick()?;
        match cur {
            Term::Compound { functor, args } => {
                let (init, tail) = args.split_at(args.len() - 1);
                let init = init
                    .iter()
                    .map(|a| resolve(b, a, work))
                    .collect::<Result<Vec<_>, _>>()?;
                spine.push((functor.clone(), init));
                cur = deref(b, &tail[0]);
            }
            other => break other.clone(),
        }
    };
    Ok(spine.into_iter().rev().fold(last, |acc, (functor, mut init)| {
        init.push(acc);
        Term::Compound {
            functor,
            args: init.into(),
        }
    }))
}

/// Most general unifier of `t1` and `t2` extending `s`, or `None`.
pub fn unify(t1: &Term, t2: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    match unify_in(&mut out, t1, t2, &mut Work::unlimited()) {
        Ok(true) => Some(out),
        _ => None,
    }
}
