//! Integer arithmetic for `is/2` and the comparison builtins.
//!
//! Evaluable functors: `+/2`, `-/2`, `*/2`, `///2` (truncating), `mod/2`
//! (floored, the result takes the sign of the divisor), `-/1` and `abs/1`.

use crate::term::{Substitution, Term};

use super::unify::{deref, Bindings, Work};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("arithmetic on an unbound variable")]
    Instantiation,
    #[error("`{0}` is not an arithmetic expression")]
    Type(String),
    #[error("division by zero")]
    ZeroDivisor,
    #[error("integer overflow")]
    Overflow,
    #[error("expression too large to evaluate")]
    TooLarge,
}

#[derive(Clone, Copy)]
enum Op {
    Add,
    Sub,
    Mul,
    IntDiv,
    Mod,
    Neg,
    Abs,
}

impl Op {
    fn lookup(name: &str, arity: usize) -> Option<Op> {
        Some(match (name, arity) {
            ("+", 2) => Op::Add,
            ("-", 2) => Op::Sub,
            ("*", 2) => Op::Mul,
            ("//", 2) => Op::IntDiv,
            ("mod", 2) => Op::Mod,
            ("-", 1) => Op::Neg,
            ("abs", 1) => Op::Abs,
            _ => return None,
        })
    }

    fn apply(self, a: i64, b: i64) -> Result<i64, ArithError> {
        let r = match self {
            Op::Add => a.checked_add(b),
            Op::Sub => a.checked_sub(b),
            Op::Mul => a.checked_mul(b),
            Op::IntDiv => {
                if b == 0 {
                    return Err(ArithError::ZeroDivisor);
                }
                a.checked_div(b)
            }
            Op::Mod => {
                if b == 0 {
                    return Err(ArithError::ZeroDivisor);
                }
                a.checked_rem(b).map(|r| if r != 0 && (r < 0) != (b < 0) { r + b } else { r })
            }
            Op::Neg => a.checked_neg(),
            Op::Abs => a.checked_abs(),
        };
        r.ok_or(ArithError::Overflow)
    }
}

enum Task<'a> {
    Eval(&'a Term),
    Apply(Op),
}

pub(crate) fn eval_in<B: Bindings + ?Sized>(
    b: &B,
    t: &Term,
    work: &mut Work,
) -> Result<i64, ArithError> {
    let mut tasks = vec![Task::Eval(t)];
    let mut values: Vec<i64> = Vec::new();
    while let Some(task) = tasks.pop() {
        work.tick().map_err(|_| ArithError::TooLarge)?;
        match task {
            Task::Eval(t) => match deref(b, t) {
                Term::Int(i) => values.push(*i),
                Term::Var(_) => return Err(ArithError::Instantiation),
                Term::Atom(a) => return Err(ArithError::Type(format!("{a}"))),
                Term::Compound { functor, args } => {
                    let op = Op::lookup(functor.as_str(), args.len())
                        .ok_or_else(|| ArithError::Type(format!("{functor}/{}", args.len())))?;
                    tasks.push(Task::Apply(op));
                    for a in args.iter().rev() {
                        tasks.push(Task::Eval(a));
                    }
                }
            },
            Task::Apply(op) => {
                let v = match op {
                    Op::Neg | Op::Abs => {
                        let a = values.pop().expect("operand evaluated");
                        op.apply(a, 0)?
                    }
                    _ => {
                        let rhs = values.pop().expect("operand evaluated");
                        let lhs = values.pop().expect("operand evaluated");
                        op.apply(lhs, rhs)?
                    }
                };
                values.push(v);
            }
        }
    }
    Ok(values.pop().expect("expression has a value"))
}

/// Evaluates `t` under `s`.
pub fn eval_arith(t: &Term, s: &Substitution) -> Result<i64, ArithError> {
    eval_in(s, t, &mut Work::unlimited())
}
