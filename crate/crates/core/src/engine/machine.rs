use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use crate::term::{rebuild, Atom, Clause, PredicateIndicator, Program, Substitution, Term, Var, VarId};

use super::arith::{eval_in, ArithError};
use super::unify::{deref, identical, resolve, unify_fresh, unify_in, Bindings, Work};
use super::{
    is_builtin, CallSite, Decision, HaltReason, Limits, PolicyHook, Port, SolveOutcome, Solver,
    TraceEvent, TraceSink,
};

/// Node visits allowed per step for unification, copying and arithmetic.
const WORK_PER_STEP: u64 = 64;
/// Goal snapshots in trace events stop dereferencing after this many nodes.
const SNAPSHOT_NODES: u64 = 10_000;
const DEADLINE_CHECK_EVERY: u64 = 256;

struct Store {
    bindings: Vec<Option<Term>>,
    trail: Vec<VarId>,
}

impl Bindings for Store {
    fn lookup(&self, id: VarId) -> Option<&Term> {
        self.bindings.get(id).and_then(Option::as_ref)
    }

    fn bind(&mut self, id: VarId, value: Term) {
        if id >= self.bindings.len() {
            self.bindings.resize(id + 1, None);
        }
        self.bindings[id] = Some(value);
        self.trail.push(id);
    }
}

enum Item {
    Goal { goal: Term, depth: usize, cut: usize },
    Exit { goal: Term, depth: usize },
    /// Drops every choice point at or above the given height.
    CutTo(usize),
    /// Records a findall answer, then backtracks for the next one.
    Yield { template: Term, collector: usize },
    Fail,
    Solution,
}

struct Frame {
    item: Item,
    next: Cont,
}

type Cont = Option<Rc<Frame>>;

impl Drop for Frame {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut f) => next = f.next.take(),
                Err(_) => break,
            }
        }
    }
}

fn push(item: Item, next: Cont) -> Cont {
    Some(Rc::new(Frame { item, next }))
}

enum Alt {
    /// Emits the `Fail` port of a call once all its alternatives are gone.
    CallPort { goal: Term, depth: usize },
    Clauses {
        goal: Term,
        depth: usize,
        clauses: Arc<Vec<Arc<Clause>>>,
        next: usize,
        cont: Cont,
    },
    Resume(Cont),
    Findall { collector: usize, result: Term, cont: Cont },
    Between { var: Term, next: i64, hi: i64, cont: Cont },
}

struct Choice {
    alt: Alt,
    trail: usize,
    vars: VarId,
}

struct Stop {
    reason: HaltReason,
    detail: Option<String>,
}

impl Stop {
    fn new(reason: HaltReason, detail: Option<String>) -> Self {
        Stop { reason, detail }
    }
}

type Step<T = Cont> = Result<T, Stop>;

#[derive(PartialEq, Eq)]
enum Key<'a> {
    Int(i64),
    Atom(&'a Atom),
    Functor(&'a Atom, usize),
}

fn key(t: &Term) -> Option<Key<'_>> {
    match t {
        Term::Int(i) => Some(Key::Int(*i)),
        Term::Atom(a) => Some(Key::Atom(a)),
        Term::Compound { functor, args } => Some(Key::Functor(functor, args.len())),
        Term::Var(_) => None,
    }
}

fn first_arg(t: &Term) -> Option<&Term> {
    match t {
        Term::Compound { args, .. } => args.first(),
        _ => None,
    }
}

fn rename(t: &Term, offset: VarId) -> Term {
    rebuild(t, &mut |t| match t {
        Term::Var(v) => Some(Term::var(v.id + offset)),
        _ => None,
    })
}

pub(super) struct Machine<'a> {
    limits: Limits,
    probe: bool,
    deadline: Option<Instant>,
    db: HashMap<PredicateIndicator, Arc<Vec<Arc<Clause>>>>,
    store: Store,
    next_var: VarId,
    choices: Vec<Choice>,
    collectors: Vec<Vec<Term>>,
    steps: u64,
    work: Work,
    probing: bool,
    hook: &'a mut dyn PolicyHook,
    sink: &'a mut dyn TraceSink,
    tracing: bool,
    solutions: Vec<Substitution>,
}

impl<'a> Machine<'a> {
    pub(super) fn new(
        solver: &Solver,
        program: &Program,
        goals: &[Term],
        hook: &'a mut dyn PolicyHook,
        sink: &'a mut dyn TraceSink,
    ) -> Self {
        let db = program
            .predicates()
            .map(|pi| (pi.clone(), Arc::new(program.clauses_for(pi).cloned().collect())))
            .collect();
        let next_var = goals
            .iter()
            .flat_map(crate::term::variables_of)
            .max()
            .map_or(0, |m| m + 1);
        let tracing = sink.enabled();
        Machine {
            limits: solver.limits,
            probe: solver.probe_exhaustion,
            deadline: solver.deadline,
            db,
            store: Store {
                bindings: Vec::new(),
                trail: Vec::new(),
            },
            next_var,
            choices: Vec::new(),
            collectors: Vec::new(),
            steps: 0,
            work: Work::new(solver.limits.max_steps.saturating_mul(WORK_PER_STEP)),
            probing: false,
            hook,
            sink,
            tracing,
            solutions: Vec::new(),
        }
    }

    pub(super) fn run(mut self, goals: &[Term], query_vars: &[Var]) -> SolveOutcome {
        let mut cont = push(Item::Solution, None);
        for g in goals.iter().rev() {
            cont = push(
                Item::Goal {
                    goal: g.clone(),
                    depth: 0,
                    cut: 0,
                },
                cont,
            );
        }
        let stop = loop {
            match self.step(cont, query_vars) {
                Ok(next) => cont = next,
                Err(stop) => break stop,
            }
        };
        // Continuations can share long chains; release them before the
        // outcome is built so drops stay iterative.
        self.choices.clear();
        SolveOutcome {
            solutions: std::mem::take(&mut self.solutions),
            truncated: stop.reason.is_cap(),
            exhausted: stop.reason == HaltReason::Complete,
            steps_used: self.steps,
            halt_reason: stop.reason,
            error_detail: stop.detail,
        }
    }

    fn step(&mut self, cont: Cont, query_vars: &[Var]) -> Step {
        let frame = cont.expect("every continuation ends in a solution frame");
        let next = frame.next.clone();
        match &frame.item {
            Item::Goal { goal, depth, cut } => self.call(goal, *depth, *cut, next),
            Item::Exit { goal, depth } => {
                self.port(Port::Exit, goal, *depth)?;
                Ok(next)
            }
            Item::CutTo(h) => {
                self.cut_to(*h);
                Ok(next)
            }
            Item::Yield {
                template,
                collector,
            } => {
                let copy = self.resolve(template)?;
                self.collectors[*collector].push(copy);
                self.backtrack()
            }
            Item::Fail => self.backtrack(),
            Item::Solution => self.solution(query_vars),
        }
    }

    // ---- bookkeeping ----

    fn cap(&self, reason: HaltReason) -> Stop {
        if self.probing {
            return Stop::new(HaltReason::SolutionCap, None);
        }
        let detail = match reason {
            HaltReason::StepCap => format!("step limit reached ({})", self.limits.max_steps),
            HaltReason::DepthCap => format!("depth limit reached ({})", self.limits.max_depth),
            _ => String::new(),
        };
        Stop::new(reason, Some(detail))
    }

    fn tick(&mut self) -> Step<u64> {
        if self.steps >= self.limits.max_steps {
            return Err(self.cap(HaltReason::StepCap));
        }
        self.steps += 1;
        if self.steps % DEADLINE_CHECK_EVERY == 0
            && self.deadline.is_some_and(|d| Instant::now() >= d)
        {
            if self.probing {
                return Err(Stop::new(HaltReason::SolutionCap, None));
            }
            return Err(Stop::new(
                HaltReason::StepCap,
                Some("time limit exceeded".into()),
            ));
        }
        Ok(self.steps)
    }

    fn out_of_work(&self) -> Stop {
        self.cap(HaltReason::StepCap)
    }

    fn runtime(&self, message: String) -> Stop {
        Stop::new(HaltReason::RuntimeError, Some(message))
    }

    fn snapshot(&self, t: &Term) -> Term {
        resolve(&self.store, t, &mut Work::new(SNAPSHOT_NODES)).unwrap_or_else(|_| t.clone())
    }

    fn port(&mut self, kind: Port, goal: &Term, depth: usize) -> Step<()> {
        let step = self.tick()?;
        if self.tracing {
            let goal = self.snapshot(goal);
            self.sink.event(TraceEvent {
                kind,
                goal,
                depth,
                step,
            });
        }
        Ok(())
    }

    fn resolve(&mut self, t: &Term) -> Step<Term> {
        resolve(&self.store, t, &mut self.work).map_err(|_| self.out_of_work())
    }

    fn unify(&mut self, a: &Term, b: &Term) -> Step<bool> {
        unify_in(&mut self.store, a, b, &mut self.work).map_err(|_| self.out_of_work())
    }

    fn deref(&self, t: &Term) -> Term {
        deref(&self.store, t).clone()
    }

    fn alloc_vars(&mut self, n: usize) -> VarId {
        let first = self.next_var;
        self.next_var += n;
        first
    }

    fn undo(&mut self, trail: usize, vars: VarId) {
        while self.store.trail.len() > trail {
            let id = self.store.trail.pop().expect("trail above mark");
            self.store.bindings[id] = None;
        }
        self.next_var = vars;
        self.store.bindings.truncate(vars);
    }

    fn push_choice(&mut self, alt: Alt) {
        self.choices.push(Choice {
            alt,
            trail: self.store.trail.len(),
            vars: self.next_var,
        });
    }

    fn cut_to(&mut self, height: usize) {
        debug_assert!(!self.choices[height.min(self.choices.len())..]
            .iter()
            .any(|c| matches!(c.alt, Alt::Findall { .. })));
        self.choices.truncate(height);
    }

    /// Registers the `Fail` port of a call and appends its `Exit` port to
    /// the continuation.
    fn enter(&mut self, goal: &Term, depth: usize, next: Cont) -> Cont {
        self.push_choice(Alt::CallPort {
            goal: goal.clone(),
            depth,
        });
        push(
            Item::Exit {
                goal: goal.clone(),
                depth,
            },
            next,
        )
    }

    fn backtrack(&mut self) -> Step {
        loop {
            let Some(choice) = self.choices.pop() else {
                return Err(Stop::new(HaltReason::Complete, None));
            };
            self.undo(choice.trail, choice.vars);
            match choice.alt {
                Alt::CallPort { goal, depth } => self.port(Port::Fail, &goal, depth)?,
                Alt::Clauses {
                    goal,
                    depth,
                    clauses,
                    next,
                    cont,
                } => {
                    self.tick()?;
                    return self.try_clauses(goal, depth, clauses, next, cont);
                }
                Alt::Resume(cont) => {
                    self.tick()?;
                    return Ok(cont);
                }
                Alt::Findall {
                    collector,
                    result,
                    cont,
                } => {
                    self.tick()?;
                    debug_assert_eq!(collector + 1, self.collectors.len());
                    let items = self.collectors.pop().expect("collector for findall");
                    let list = self.fresh_list(items)?;
                    if self.unify(&result, &list)? {
                        return Ok(cont);
                    }
                }
                Alt::Between {
                    var,
                    next,
                    hi,
                    cont,
                } => {
                    self.tick()?;
                    if next < hi {
                        self.push_choice(Alt::Between {
                            var: var.clone(),
                            next: next + 1,
                            hi,
                            cont: cont.clone(),
                        });
                    }
                    if self.unify(&var, &Term::int(next))? {
                        return Ok(cont);
                    }
                }
            }
        }
    }

    /// Builds a list of the collected answers, each with its own fresh
    /// variables.
    fn fresh_list(&mut self, items: Vec<Term>) -> Step<Term> {
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let mut map: HashMap<VarId, VarId> = HashMap::new();
            let mut fresh = self.next_var;
            let copy = rebuild(&item, &mut |t| match t {
                Term::Var(v) => Some(Term::var(*map.entry(v.id).or_insert_with(|| {
                    fresh += 1;
                    fresh - 1
                }))),
                _ => None,
            });
            self.next_var = fresh;
            out.push(copy);
        }
        Ok(Term::list(out))
    }

    fn solution(&mut self, query_vars: &[Var]) -> Step {
        if self.probing {
            return Err(Stop::new(HaltReason::SolutionCap, None));
        }
        let mut s = Substitution::new();
        for v in query_vars {
            let t = self.resolve(&Term::Var(v.clone()))?;
            if !matches!(&t, Term::Var(w) if w.id == v.id) {
                s.bind(v.id, t);
            }
        }
        self.solutions.push(s);
        if self.solutions.len() >= self.limits.max_solutions {
            if !self.probe {
                return Err(Stop::new(HaltReason::SolutionCap, None));
            }
            self.probing = true;
        }
        self.backtrack()
    }

    // ---- calls ----

    fn call(&mut self, goal: &Term, depth: usize, cut: usize, next: Cont) -> Step {
        if depth > self.limits.max_depth {
            return Err(self.cap(HaltReason::DepthCap));
        }
        let goal = self.deref(goal);
        let pi = match &goal {
            Term::Var(_) => {
                return Err(self.runtime("instantiation error: a goal is an unbound variable".into()))
            }
            Term::Int(i) => return Err(self.runtime(format!("type error: `{i}` is not a callable goal"))),
            _ => goal.indicator().expect("callable"),
        };
        let builtin = is_builtin(&pi);
        let user_defined = self.db.contains_key(&pi);
        let decision = self.hook.check(&CallSite {
            goal: &goal,
            indicator: pi.clone(),
            builtin,
            user_defined,
            step: self.steps + 1,
            depth,
        });
        match decision {
            Decision::Allow => {}
            Decision::Deny(reason) => return Err(Stop::new(HaltReason::PolicyViolation, Some(reason))),
            Decision::Missing(reason) => return Err(self.runtime(reason)),
        }
        if !builtin && !user_defined {
            return Err(self.runtime(format!("predicate not defined: {pi}")));
        }
        self.port(Port::Call, &goal, depth)?;
        if builtin {
            self.builtin(goal, &pi, depth, cut, next)
        } else {
            let cont = self.enter(&goal, depth, next);
            let clauses = self.db[&pi].clone();
            self.try_clauses(goal, depth, clauses, 0, cont)
        }
    }

    fn candidate(&self, goal: &Term, clauses: &[Arc<Clause>], from: usize) -> Option<usize> {
        let goal_key = first_arg(goal).and_then(|a| key(deref(&self.store, a)));
        let Some(goal_key) = goal_key else {
            return (from < clauses.len()).then_some(from);
        };
        (from..clauses.len()).find(|&i| {
            first_arg(&clauses[i].head)
                .and_then(key)
                .is_none_or(|k| k == goal_key)
        })
    }

    fn try_clauses(
        &mut self,
        goal: Term,
        depth: usize,
        clauses: Arc<Vec<Arc<Clause>>>,
        from: usize,
        cont: Cont,
    ) -> Step {
        let Some(i) = self.candidate(&goal, &clauses, from) else {
            return self.backtrack();
        };
        let barrier = self.choices.len();
        let clause = clauses[i].clone();
        if let Some(j) = self.candidate(&goal, &clauses, i + 1) {
            self.push_choice(Alt::Clauses {
                goal: goal.clone(),
                depth,
                clauses,
                next: j,
                cont: cont.clone(),
            });
        }
        let offset = self.alloc_vars(clause.var_count);
        let head = rename(&clause.head, offset);
        let unified = unify_fresh(&mut self.store, &goal, &head, offset, &mut self.work)
            .map_err(|_| self.out_of_work())?;
        if !unified {
            return self.backtrack();
        }
        let mut cont = cont;
        for g in clause.body.iter().rev() {
            cont = push(
                Item::Goal {
                    goal: rename(g, offset),
                    depth: depth + 1,
                    cut: barrier,
                },
                cont,
            );
        }
        Ok(cont)
    }

    fn succeed_if(&mut self, ok: bool, goal: &Term, depth: usize, next: Cont) -> Step {
        if ok {
            self.port(Port::Exit, goal, depth)?;
            Ok(next)
        } else {
            self.port(Port::Fail, goal, depth)?;
            self.backtrack()
        }
    }

    fn builtin(&mut self, goal: Term, pi: &PredicateIndicator, depth: usize, cut: usize, next: Cont) -> Step {
        let args: Vec<Term> = match &goal {
            Term::Compound { args, .. } => args.to_vec(),
            _ => Vec::new(),
        };
        let sub = |g: &Term, cut: usize, next: Cont| {
            push(
                Item::Goal {
                    goal: g.clone(),
                    depth: depth + 1,
                    cut,
                },
                next,
            )
        };
        match (pi.name.as_str(), pi.arity) {
            ("!", 0) => {
                self.cut_to(cut);
                self.succeed_if(true, &goal, depth, next)
            }
            (",", 2) => {
                let cont = self.enter(&goal, depth, next);
                Ok(sub(&args[0], cut, sub(&args[1], cut, cont)))
            }
            (";", 2) => {
                let cont = self.enter(&goal, depth, next);
                let lhs = self.deref(&args[0]);
                let h = self.choices.len();
                self.push_choice(Alt::Resume(sub(&args[1], cut, cont.clone())));
                match lhs.as_compound("->", 2) {
                    Some(ite) => {
                        let local = self.choices.len();
                        Ok(sub(&ite[0], local, push(Item::CutTo(h), sub(&ite[1], cut, cont))))
                    }
                    None => Ok(sub(&lhs, cut, cont)),
                }
            }
            ("->", 2) => {
                let cont = self.enter(&goal, depth, next);
                let h = self.choices.len();
                Ok(sub(&args[0], h, push(Item::CutTo(h), sub(&args[1], cut, cont))))
            }
            ("\\+", 1) => {
                let cont = self.enter(&goal, depth, next);
                let h = self.choices.len();
                self.push_choice(Alt::Resume(cont));
                let local = self.choices.len();
                Ok(sub(&args[0], local, push(Item::CutTo(h), push(Item::Fail, None))))
            }
            ("call", _) => {
                let target = self.call_target(&args)?;
                let cont = self.enter(&goal, depth, next);
                let local = self.choices.len();
                Ok(sub(&target, local, cont))
            }
            ("findall", 3) => {
                let cont = self.enter(&goal, depth, next);
                let collector = self.collectors.len();
                self.collectors.push(Vec::new());
                self.push_choice(Alt::Findall {
                    collector,
                    result: args[2].clone(),
                    cont,
                });
                let local = self.choices.len();
                Ok(sub(
                    &args[1],
                    local,
                    push(
                        Item::Yield {
                            template: args[0].clone(),
                            collector,
                        },
                        None,
                    ),
                ))
            }
            ("between", 3) => {
                let lo = self.int_arg(&args[0], &goal)?;
                let hi = self.int_arg(&args[1], &goal)?;
                let x = self.deref(&args[2]);
                let cont = self.enter(&goal, depth, next);
                match x {
                    Term::Int(i) => {
                        if lo <= i && i <= hi {
                            Ok(cont)
                        } else {
                            self.backtrack()
                        }
                    }
                    Term::Var(_) => {
                        if lo > hi {
                            return self.backtrack();
                        }
                        if lo < hi {
                            self.push_choice(Alt::Between {
                                var: x.clone(),
                                next: lo + 1,
                                hi,
                                cont: cont.clone(),
                            });
                        }
                        self.unify(&x, &Term::int(lo))?;
                        Ok(cont)
                    }
                    other => Err(self.type_error("integer", &other, &goal)),
                }
            }
            _ => {
                let ok = self.simple(&goal, pi, &args)?;
                self.succeed_if(ok, &goal, depth, next)
            }
        }
    }

    fn call_target(&mut self, args: &[Term]) -> Step<Term> {
        let g = self.deref(&args[0]);
        let extra = &args[1..];
        match &g {
            Term::Var(_) => Err(self.runtime("instantiation error: call/N with an unbound goal".into())),
            Term::Int(i) => Err(self.runtime(format!("type error: `{i}` is not a callable goal"))),
            Term::Atom(a) => Ok(Term::compound_atom(a.clone(), extra.to_vec())),
            Term::Compound { functor, args } => {
                let mut all = args.to_vec();
                all.extend_from_slice(extra);
                Ok(Term::compound_atom(functor.clone(), all))
            }
        }
    }

    fn shown(&self, goal: &Term) -> String {
        self.snapshot(goal).to_string()
    }

    fn type_error(&self, expected: &str, culprit: &Term, goal: &Term) -> Stop {
        self.runtime(format!(
            "type error: expected {expected}, found `{}` in `{}`",
            self.snapshot(culprit),
            self.shown(goal)
        ))
    }

    fn instantiation(&self, goal: &Term) -> Stop {
        self.runtime(format!(
            "instantiation error: arguments are not sufficiently instantiated in `{}`",
            self.shown(goal)
        ))
    }

    fn int_arg(&self, t: &Term, goal: &Term) -> Step<i64> {
        match self.deref(t) {
            Term::Int(i) => Ok(i),
            Term::Var(_) => Err(self.instantiation(goal)),
            other => Err(self.type_error("integer", &other, goal)),
        }
    }

    fn eval(&mut self, t: &Term, goal: &Term) -> Step<i64> {
        match eval_in(&self.store, t, &mut self.work) {
            Ok(v) => Ok(v),
            Err(ArithError::TooLarge) => Err(self.out_of_work()),
            Err(ArithError::Instantiation) => Err(self.instantiation(goal)),
            Err(e @ ArithError::Type(_)) => Err(self.runtime(format!("type error: {e} in `{}`", self.shown(goal)))),
            Err(e) => Err(self.runtime(format!("evaluation error: {e} in `{}`", self.shown(goal)))),
        }
    }

    /// Deterministic builtins.
    fn simple(&mut self, goal: &Term, pi: &PredicateIndicator, args: &[Term]) -> Step<bool> {
        Ok(match (pi.name.as_str(), pi.arity) {
            ("true", 0) => true,
            ("fail", 0) => false,
            ("=", 2) => self.unify(&args[0], &args[1])?,
            ("\\=", 2) => {
                let mark = self.store.trail.len();
                let unifies = self.unify(&args[0], &args[1])?;
                let vars = self.next_var;
                self.undo(mark, vars);
                !unifies
            }
            ("==", 2) | ("\\==", 2) => {
                let same = identical(&self.store, &args[0], &args[1], &mut self.work)
                    .map_err(|_| self.out_of_work())?;
                same == (pi.name.as_str() == "==")
            }
            ("var", 1) => self.deref(&args[0]).is_var(),
            ("nonvar", 1) => !self.deref(&args[0]).is_var(),
            ("atom", 1) => matches!(self.deref(&args[0]), Term::Atom(_)),
            ("number", 1) => matches!(self.deref(&args[0]), Term::Int(_)),
            ("is", 2) => {
                let v = self.eval(&args[1], goal)?;
                self.unify(&args[0], &Term::int(v))?
            }
            (op @ ("=:=" | "=\\=" | "<" | ">" | "=<" | ">="), 2) => {
                let a = self.eval(&args[0], goal)?;
                let b = self.eval(&args[1], goal)?;
                match op {
                    "=:=" => a == b,
                    "=\\=" => a != b,
                    "<" => a < b,
                    ">" => a > b,
                    "=<" => a <= b,
                    _ => a >= b,
                }
            }
            ("functor", 3) => self.functor(goal, args)?,
            ("arg", 3) => self.arg(goal, args)?,
            ("=..", 2) => self.univ(goal, args)?,
            ("assertz", 1) => self.assertz(goal, &args[0])?,
            ("retract", 1) => self.retract(goal, &args[0])?,
            _ => unreachable!("{pi} is dispatched elsewhere"),
        })
    }

    fn functor(&mut self, goal: &Term, args: &[Term]) -> Step<bool> {
        let t = self.deref(&args[0]);
        match &t {
            Term::Var(_) => {
                let arity = self.int_arg(&args[2], goal)?;
                let name = self.deref(&args[1]);
                if arity < 0 {
                    return Err(self.runtime(format!(
                        "domain error: arity must not be negative in `{}`",
                        self.shown(goal)
                    )));
                }
                let built = match (&name, arity) {
                    (Term::Var(_), _) => return Err(self.instantiation(goal)),
                    (Term::Atom(_) | Term::Int(_), 0) => name.clone(),
                    (Term::Atom(a), n) => {
                        for _ in 0..n {
                            self.work.tick().map_err(|_| self.out_of_work())?;
                        }
                        let first = self.alloc_vars(n as usize);
                        Term::compound_atom(a.clone(), (0..n as usize).map(|i| Term::var(first + i)).collect())
                    }
                    (other, _) => return Err(self.type_error("atom", other, goal)),
                };
                self.unify(&args[0], &built)
            }
            Term::Compound { functor, args: targs } => {
                let n = targs.len() as i64;
                Ok(self.unify(&args[1], &Term::Atom(functor.clone()))? && self.unify(&args[2], &Term::int(n))?)
            }
            atomic => Ok(self.unify(&args[1], atomic)? && self.unify(&args[2], &Term::int(0))?),
        }
    }

    fn arg(&mut self, goal: &Term, args: &[Term]) -> Step<bool> {
        let n = self.int_arg(&args[0], goal)?;
        match &self.deref(&args[1]) {
            Term::Compound { args: targs, .. } => {
                if n < 1 || n as usize > targs.len() {
                    return Ok(false);
                }
                self.unify(&args[2], &targs[n as usize - 1])
            }
            Term::Var(_) => Err(self.instantiation(goal)),
            other => Err(self.type_error("compound", other, goal)),
        }
    }

    fn univ(&mut self, goal: &Term, args: &[Term]) -> Step<bool> {
        match &self.deref(&args[0]) {
            Term::Var(_) => {
                let list = self.resolve(&args[1])?;
                let Some(items) = list.list_items() else {
                    return Err(self.instantiation(goal));
                };
                let Some((head, rest)) = items.split_first() else {
                    return Err(self.runtime(format!(
                        "domain error: `=..` needs a non-empty list in `{}`",
                        self.shown(goal)
                    )));
                };
                let built = match (*head, rest.is_empty()) {
                    (Term::Var(_), _) => return Err(self.instantiation(goal)),
                    (t @ (Term::Atom(_) | Term::Int(_)), true) => t.clone(),
                    (Term::Atom(a), false) => {
                        Term::compound_atom(a.clone(), rest.iter().map(|t| (*t).clone()).collect())
                    }
                    (other, _) => return Err(self.type_error("atom", other, goal)),
                };
                self.unify(&args[0], &built)
            }
            Term::Compound { functor, args: targs } => {
                let list = Term::list(
                    std::iter::once(Term::Atom(functor.clone()))
                        .chain(targs.iter().cloned())
                        .collect(),
                );
                self.unify(&args[1], &list)
            }
            atomic => self.unify(&args[1], &Term::list(vec![atomic.clone()])),
        }
    }

    /// Splits a clause term into head and body, checking the head.
    fn clause_parts(&mut self, goal: &Term, t: &Term) -> Step<(Term, Term, PredicateIndicator)> {
        let t = self.deref(t);
        let (head, body) = match t.as_compound(":-", 2) {
            Some(parts) => (self.deref(&parts[0]), parts[1].clone()),
            None => (t.clone(), Term::atom("true")),
        };
        let pi = match &head {
            Term::Var(_) => return Err(self.instantiation(goal)),
            Term::Int(_) => return Err(self.type_error("callable", &head, goal)),
            _ => head.indicator().expect("callable"),
        };
        if is_builtin(&pi) {
            return Err(self.runtime(format!("permission error: cannot modify builtin {pi}")));
        }
        Ok((head, body, pi))
    }

    fn assertz(&mut self, goal: &Term, t: &Term) -> Step<bool> {
        let (head, body, pi) = self.clause_parts(goal, t)?;
        let head = self.resolve(&head)?;
        let body = self.resolve(&body)?;
        let term = if body.is_atom("true") {
            head
        } else {
            Term::compound(":-", vec![head, body])
        };
        let clause = Clause::from_term(&term);
        if let Some(bad) = clause.body.iter().find(|g| matches!(g, Term::Int(_))) {
            return Err(self.type_error("callable", bad, goal));
        }
        let entry = self.db.entry(pi).or_default();
        Arc::make_mut(entry).push(Arc::new(clause));
        Ok(true)
    }

    fn retract(&mut self, goal: &Term, t: &Term) -> Step<bool> {
        let (head, body, pi) = self.clause_parts(goal, t)?;
        let Some(clauses) = self.db.get(&pi).cloned() else {
            return Ok(false);
        };
        for (i, clause) in clauses.iter().enumerate() {
            let mark = self.store.trail.len();
            let vars = self.next_var;
            let offset = self.alloc_vars(clause.var_count);
            let c_head = rename(&clause.head, offset);
            let c_body = rename(&crate::term::conjunction(&clause.body), offset);
            if self.unify(&head, &c_head)? && self.unify(&body, &c_body)? {
                let entry = self.db.get_mut(&pi).expect("predicate present");
                Arc::make_mut(entry).remove(i);
                return Ok(true);
            }
            self.undo(mark, vars);
        }
        Ok(false)
    }
}
