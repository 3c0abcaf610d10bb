//! Local symbolic evaluation: each statement evaluates, in isolation from
//! the rest of the system, to a set of conditioned symbolic traces with
//! continuations. Unknown interaction results (inputs, message values,
//! callee ids, futures) are represented by fresh starred variables that the
//! global composition later concretises.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::event::{Event, EventKind};
use crate::expr::{EvalError, SExpr, Var};
use crate::lang::{fresh_prog_var, Class, LanguageVariant, Program, Stmt};
use crate::state::{eval_expr, SymbolicState};
use crate::trace::{insert_event, PathCondition, Trace};
use crate::value::Value;

/// One local evaluation result: `pc ▷ body · K(cont)`. `cont == Empty`
/// means the continuation is the finished marker `∘`. `jumped` records that
/// the step ended in a `goto`, so a sequential context must not append its
/// remainder.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct LocalStep {
    pub pc: PathCondition,
    pub body: Trace,
    pub cont: Stmt,
    pub jumped: bool,
}

impl LocalStep {
    fn new(pc: PathCondition, body: Trace, cont: Stmt) -> LocalStep {
        LocalStep {
            pc,
            body,
            cont,
            jumped: false,
        }
    }
}

impl fmt::Display for LocalStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |> {} . K({})", self.pc, self.body, self.cont)
    }
}

/// Errors of local evaluation. Expression errors (unbound variable, sort
/// error, overflow, division by zero) abort the run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LocalError {
    Eval(EvalError),
    UnknownMethod(String),
    UnknownClass(String),
    UnknownLabel(String),
    ArityMismatch(String),
    /// The recursive unfolding of an atomic section exceeded the bound.
    AtomicBoundExceeded,
    MissingDestiny,
}

impl fmt::Display for LocalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalError::Eval(e) => write!(f, "{e}"),
            LocalError::UnknownMethod(m) => write!(f, "unknown method `{m}`"),
            LocalError::UnknownClass(c) => write!(f, "unknown class `{c}`"),
            LocalError::UnknownLabel(l) => write!(f, "unknown label `{l}`"),
            LocalError::ArityMismatch(m) => write!(f, "wrong number of arguments for `{m}`"),
            LocalError::AtomicBoundExceeded => {
                write!(f, "atomic section exceeded the unfolding bound")
            }
            LocalError::MissingDestiny => {
                write!(f, "`return` evaluated outside of a method task")
            }
        }
    }
}

impl From<EvalError> for LocalError {
    fn from(e: EvalError) -> LocalError {
        LocalError::Eval(e)
    }
}

/// Evaluation context: the program tables plus the identity of the running
/// task where relevant.
#[derive(Clone, Debug)]
pub struct Ctx<'p> {
    pub program: &'p Program,
    pub variant: LanguageVariant,
    /// The executing object (class variants).
    pub this_obj: Option<Value>,
    /// The future the running task must resolve (active objects).
    pub destiny: Option<Value>,
    /// Label table of the executing process (channel variant).
    pub labels: Option<&'p BTreeMap<String, Stmt>>,
    /// Bound on rule applications while unfolding one atomic section.
    pub atomic_bound: usize,
}

pub const DEFAULT_ATOMIC_BOUND: usize = 10_000;

impl<'p> Ctx<'p> {
    pub fn new(program: &'p Program) -> Ctx<'p> {
        Ctx {
            program,
            variant: program.variant(),
            this_obj: None,
            destiny: None,
            labels: None,
            atomic_bound: DEFAULT_ATOMIC_BOUND,
        }
    }
}

/// Deterministic supply of fresh symbolic variables: for each capital-letter
/// prefix, the smallest index whose name is not yet in use.
pub struct FreshSyms {
    used: BTreeSet<Var>,
}

impl FreshSyms {
    pub fn for_state(state: &SymbolicState) -> FreshSyms {
        FreshSyms {
            used: state.dom().cloned().collect(),
        }
    }

    pub fn next(&mut self, prefix: char) -> Var {
        let mut k = 0usize;
        loop {
            let v = Var::new(&alloc::format!("{prefix}{k}"));
            if !self.used.contains(&v) {
                self.used.insert(v.clone());
                return v;
            }
            k += 1;
        }
    }
}

fn co_norm(a: Stmt, b: Stmt) -> Stmt {
    match (a, b) {
        (Stmt::Empty, b) => b,
        (a, Stmt::Empty) => a,
        (a, b) => Stmt::Co(Box::new(a), Box::new(b)),
    }
}

/// Qualify every field of `class` with the executing object, so method code
/// can only ever name its own object's fields.
pub fn localize_body(class: &Class, oid: &Value, body: &Stmt) -> Stmt {
    let mut out = body.clone();
    for fd in &class.fields {
        out = out.subst_var(fd, &field_var(fd, oid));
    }
    out
}

/// The state name of field `fd` on object `oid`.
pub fn field_var(fd: &Var, oid: &Value) -> Var {
    Var::new(&alloc::format!("{}@{oid}", fd.as_str()))
}

/// Object-qualified field name under a still-symbolic object `sym`.
pub fn field_var_sym(fd: &Var, sym: &Var) -> Var {
    Var::new(&alloc::format!("{}@{sym}", fd.as_str()))
}

fn singleton(state: &SymbolicState) -> Trace {
    Trace::singleton(state.clone())
}

type Steps = Result<Vec<LocalStep>, LocalError>;

/// The local evaluation function `val_σ(s)`.
pub fn val(ctx: &Ctx, sigma: &SymbolicState, s: &Stmt) -> Steps {
    let mut steps = val_raw(ctx, sigma, s)?;
    steps.retain(|st| st.pc.is_consistent());
    Ok(steps)
}

fn val_raw(ctx: &Ctx, sigma: &SymbolicState, s: &Stmt) -> Steps {
    match s {
        // The finished marker has no local steps.
        Stmt::Empty => Ok(Vec::new()),

        Stmt::Skip => Ok(alloc::vec![LocalStep::new(
            PathCondition::new(),
            singleton(sigma),
            Stmt::Empty,
        )]),

        Stmt::Assign(x, e) => {
            let next = sigma.update(x, e)?;
            let body = singleton(sigma).push_state(next);
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                body,
                Stmt::Empty
            )])
        }

        Stmt::If(e, s1) => {
            let g = eval_expr(sigma, e)?;
            Ok(alloc::vec![
                LocalStep::new(
                    PathCondition::singleton(g.clone()),
                    singleton(sigma),
                    (**s1).clone(),
                ),
                LocalStep::new(
                    PathCondition::singleton(g.negated()),
                    singleton(sigma),
                    Stmt::Empty,
                ),
            ])
        }

        Stmt::While(e, s1) => {
            let g = eval_expr(sigma, e)?;
            Ok(alloc::vec![
                LocalStep::new(
                    PathCondition::singleton(g.clone()),
                    singleton(sigma),
                    Stmt::seq((**s1).clone(), s.clone()),
                ),
                LocalStep::new(
                    PathCondition::singleton(g.negated()),
                    singleton(sigma),
                    Stmt::Empty,
                ),
            ])
        }

        Stmt::Seq(a, b) => {
            let steps = val_raw(ctx, sigma, a)?;
            Ok(steps
                .into_iter()
                .map(|st| {
                    let cont = if st.jumped {
                        st.cont
                    } else {
                        Stmt::seq(st.cont, (**b).clone())
                    };
                    LocalStep { cont, ..st }
                })
                .collect())
        }

        Stmt::Labeled(_, inner) => val_raw(ctx, sigma, inner),

        Stmt::Co(a, b) => {
            let mut out = Vec::new();
            for st in val_raw(ctx, sigma, a)? {
                out.push(LocalStep {
                    cont: co_norm(st.cont.clone(), (**b).clone()),
                    jumped: false,
                    ..st
                });
            }
            for st in val_raw(ctx, sigma, b)? {
                out.push(LocalStep {
                    cont: co_norm((**a).clone(), st.cont.clone()),
                    jumped: false,
                    ..st
                });
            }
            Ok(out)
        }

        Stmt::Atomic(inner) => eval_atomic(ctx, sigma, s, inner),

        Stmt::Block(decls, body) => {
            if decls.is_empty() {
                return val_raw(ctx, sigma, body);
            }
            let mut taken: BTreeSet<Var> = sigma.dom().cloned().collect();
            taken.extend(body.free_vars());
            let mut next = sigma.clone();
            let mut renamed = (**body).clone();
            for d in decls {
                let fresh = fresh_prog_var(d, &taken);
                taken.insert(fresh.clone());
                next = next.update(&fresh, &SExpr::int(0))?;
                renamed = renamed.subst_var(d, &fresh);
            }
            let body_tr = singleton(sigma).push_state(next);
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                body_tr,
                renamed
            )])
        }

        Stmt::Input(x) => {
            let mut fresh = FreshSyms::for_state(sigma);
            let y = fresh.next('Y');
            let ev = Event::new(EventKind::Inp, alloc::vec![SExpr::Var(y.clone())]);
            let (tr, extended) = insert_event(sigma, ev, &[y.clone()])?;
            let final_state = extended.update(x, &SExpr::Var(y))?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::Call(m, es) => {
            let decl = ctx
                .program
                .methods
                .get(m)
                .ok_or_else(|| LocalError::UnknownMethod(m.clone()))?;
            if decl.params.len() != es.len() {
                return Err(LocalError::ArityMismatch(m.clone()));
            }
            let ev = Event::with_method(EventKind::Inv, m, es.clone());
            let (tr, _) = insert_event(sigma, ev, &[])?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr,
                Stmt::Empty
            )])
        }

        Stmt::Guarded(g, inner) => {
            let gv = eval_expr(sigma, g)?;
            Ok(alloc::vec![
                LocalStep::new(
                    PathCondition::singleton(gv.clone()),
                    singleton(sigma),
                    (**inner).clone(),
                ),
                // A false guard reschedules the whole guarded statement.
                LocalStep::new(
                    PathCondition::singleton(gv.negated()),
                    singleton(sigma),
                    s.clone(),
                ),
            ])
        }

        Stmt::Select(branches) => {
            let mut out = Vec::new();
            let mut all_false = PathCondition::new();
            for (g, body) in branches {
                let gv = eval_expr(sigma, g)?;
                out.push(LocalStep::new(
                    PathCondition::singleton(gv.clone()),
                    singleton(sigma),
                    body.clone(),
                ));
                all_false.insert(gv.negated());
            }
            // All guards false: the selection blocks and is rescheduled.
            out.push(LocalStep::new(all_false, singleton(sigma), s.clone()));
            Ok(out)
        }

        Stmt::Goto(l) => {
            let target = ctx
                .labels
                .and_then(|tbl| tbl.get(l))
                .ok_or_else(|| LocalError::UnknownLabel(l.clone()))?;
            Ok(alloc::vec![LocalStep {
                pc: PathCondition::new(),
                body: singleton(sigma),
                cont: target.clone(),
                jumped: true,
            }])
        }

        Stmt::Send(e, dest) => {
            let mut fresh = FreshSyms::for_state(sigma);
            let i = fresh.next('I');
            let ev = Event::new(
                EventKind::Send,
                alloc::vec![e.clone(), dest.clone(), SExpr::Var(i.clone())],
            );
            let (tr, _) = insert_event(sigma, ev, &[i])?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr,
                Stmt::Empty
            )])
        }

        Stmt::Receive(x, src) => {
            let mut fresh = FreshSyms::for_state(sigma);
            let y = fresh.next('Y');
            let i = fresh.next('I');
            let ev = Event::new(
                EventKind::Receive,
                alloc::vec![SExpr::Var(y.clone()), src.clone(), SExpr::Var(i.clone())],
            );
            let (tr, extended) = insert_event(sigma, ev, &[y.clone(), i])?;
            let final_state = extended.update(x, &SExpr::Var(y))?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::Spawn(x, m, es) => {
            let decl = ctx
                .program
                .methods
                .get(m)
                .ok_or_else(|| LocalError::UnknownMethod(m.clone()))?;
            if decl.params.len() != es.len() {
                return Err(LocalError::ArityMismatch(m.clone()));
            }
            let mut fresh = FreshSyms::for_state(sigma);
            let p = fresh.next('P');
            let mut payload = es.clone();
            payload.push(SExpr::Var(p.clone()));
            let ev = Event::with_method(EventKind::Spawn, m, payload);
            let (tr, extended) = insert_event(sigma, ev, &[p.clone()])?;
            let final_state = extended.update(x, &SExpr::Var(p))?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::New(x, cname, es) => {
            let class = ctx
                .program
                .classes
                .get(cname)
                .ok_or_else(|| LocalError::UnknownClass(cname.clone()))?;
            if class.fields.len() != es.len() {
                return Err(LocalError::ArityMismatch(cname.clone()));
            }
            let mut fresh = FreshSyms::for_state(sigma);
            let o = fresh.next('X');
            let mut payload = alloc::vec![SExpr::Var(o.clone())];
            payload.extend(es.iter().cloned());
            let ev = Event::new(EventKind::New, payload);
            let (tr, extended) = insert_event(sigma, ev, &[o.clone()])?;
            // Bind the creator's variable and the new object's fields, the
            // latter under object-qualified names (still symbolic here).
            let mut final_state = extended.update(x, &SExpr::Var(o.clone()))?;
            for (fd, e) in class.fields.iter().zip(es.iter()) {
                final_state = final_state.update(&field_var_sym(fd, &o), e)?;
            }
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::AsyncSend(callee, m, es) => {
            let (_, _, decl) = ctx
                .program
                .lookup_method(m)
                .ok_or_else(|| LocalError::UnknownMethod(m.clone()))?;
            if decl.params.len() != es.len() {
                return Err(LocalError::ArityMismatch(m.clone()));
            }
            let mut fresh = FreshSyms::for_state(sigma);
            let i = fresh.next('I');
            let mut payload = es.clone();
            payload.push(callee.clone());
            payload.push(SExpr::Var(i.clone()));
            let ev = Event::with_method(EventKind::Inv, m, payload);
            let (tr, _) = insert_event(sigma, ev, &[i])?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr,
                Stmt::Empty
            )])
        }

        Stmt::AsyncAssign(x, callee, m, es) => {
            let (_, _, decl) = ctx
                .program
                .lookup_method(m)
                .ok_or_else(|| LocalError::UnknownMethod(m.clone()))?;
            if decl.params.len() != es.len() {
                return Err(LocalError::ArityMismatch(m.clone()));
            }
            let mut fresh = FreshSyms::for_state(sigma);
            let fut = fresh.next('F');
            let mut payload = es.clone();
            payload.push(callee.clone());
            payload.push(SExpr::Var(fut.clone()));
            let ev = Event::with_method(EventKind::Inv, m, payload);
            let (tr, extended) = insert_event(sigma, ev, &[fut.clone()])?;
            let final_state = extended.update(x, &SExpr::Var(fut))?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::AwaitBool(e) => {
            let g = eval_expr(sigma, e)?;
            // Only the satisfied case yields a step; otherwise the task
            // simply stays suspended (no applicable rule instance).
            Ok(alloc::vec![LocalStep::new(
                PathCondition::singleton(g),
                singleton(sigma),
                Stmt::Empty,
            )])
        }

        Stmt::AwaitFut(e) => {
            let mut fresh = FreshSyms::for_state(sigma);
            let v = fresh.next('V');
            let ev = Event::new(
                EventKind::CompR,
                alloc::vec![e.clone(), SExpr::Var(v.clone())],
            );
            let (tr, _) = insert_event(sigma, ev, &[v])?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr,
                Stmt::Empty
            )])
        }

        Stmt::Get(x, e) => {
            let mut fresh = FreshSyms::for_state(sigma);
            let v = fresh.next('V');
            let ev = Event::new(
                EventKind::CompR,
                alloc::vec![e.clone(), SExpr::Var(v.clone())],
            );
            let (tr, extended) = insert_event(sigma, ev, &[v.clone()])?;
            let final_state = extended.update(x, &SExpr::Var(v))?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr.push_state(final_state),
                Stmt::Empty,
            )])
        }

        Stmt::Return(e) => {
            let destiny = ctx.destiny.ok_or(LocalError::MissingDestiny)?;
            let ev = Event::new(
                EventKind::Comp,
                alloc::vec![SExpr::Val(destiny), e.clone()],
            );
            let (tr, _) = insert_event(sigma, ev, &[])?;
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                tr,
                Stmt::Empty
            )])
        }

        Stmt::SyncCall(m, es) => {
            let (_, class, decl) = ctx
                .program
                .lookup_method(m)
                .ok_or_else(|| LocalError::UnknownMethod(m.clone()))?;
            if decl.params.len() != es.len() {
                return Err(LocalError::ArityMismatch(m.clone()));
            }
            let oid = ctx.this_obj.ok_or(LocalError::MissingDestiny)?;
            // Inline the body: bind fresh locals to the argument values and
            // drop the trailing `return` (the result is discarded).
            let body = strip_trailing_return(&decl.body);
            let localized = localize_body(class, &oid, &body);
            let mut taken: BTreeSet<Var> = sigma.dom().cloned().collect();
            taken.extend(localized.free_vars());
            let mut renamed = localized;
            let mut assigns = Vec::new();
            for (p, e) in decl.params.iter().zip(es.iter()) {
                let fresh = fresh_prog_var(p, &taken);
                taken.insert(fresh.clone());
                renamed = renamed.subst_var(p, &fresh);
                assigns.push(Stmt::Assign(fresh, e.clone()));
            }
            assigns.push(renamed);
            Ok(alloc::vec![LocalStep::new(
                PathCondition::new(),
                singleton(sigma),
                Stmt::seq_all(assigns),
            )])
        }
    }
}

fn strip_trailing_return(body: &Stmt) -> Stmt {
    match body {
        Stmt::Return(_) => Stmt::Empty,
        Stmt::Seq(a, b) => Stmt::seq((**a).clone(), strip_trailing_return(b)),
        other => other.clone(),
    }
}

/// Unfold an atomic section to completion, bounded by `ctx.atomic_bound`
/// rule applications. A false head guard reschedules the whole section;
/// branches that block in the interior are infeasible (an atomic section
/// runs only when it can run to completion).
fn eval_atomic(ctx: &Ctx, sigma: &SymbolicState, whole: &Stmt, inner: &Stmt) -> Steps {
    let mut out = Vec::new();
    let mut work: Vec<(PathCondition, Trace, Stmt)> = Vec::new();
    match inner {
        Stmt::Guarded(g, body) => {
            let gv = eval_expr(sigma, g)?;
            out.push(LocalStep::new(
                PathCondition::singleton(gv.negated()),
                singleton(sigma),
                whole.clone(),
            ));
            work.push((
                PathCondition::singleton(gv),
                singleton(sigma),
                (**body).clone(),
            ));
        }
        _ => work.push((PathCondition::new(), singleton(sigma), inner.clone())),
    }
    let mut budget = ctx.atomic_bound;
    while let Some((pc, body, cont)) = work.pop() {
        if cont.is_empty() {
            out.push(LocalStep::new(pc, body, Stmt::Empty));
            continue;
        }
        if budget == 0 {
            return Err(LocalError::AtomicBoundExceeded);
        }
        budget -= 1;
        let here = body
            .last_state()
            .expect("atomic bodies always end in a state")
            .as_ref()
            .clone();
        for step in val_raw(ctx, &here, &cont)? {
            let merged_pc = pc.union(&step.pc);
            if !merged_pc.is_consistent() {
                continue;
            }
            // An interior statement that rescheduled itself (blocked guard)
            // cannot make progress within the atomic section: infeasible.
            if step.body.len() == 1 && step.cont == cont {
                continue;
            }
            let merged_body = body.drop_last().append(&step.body);
            work.push((merged_pc, merged_body, step.cont));
        }
    }
    Ok(out)
}

/// Activation of a procedure `m` (procedure and multiprocessor variants):
/// fresh primed locals bound to fresh symbolic arguments, an invocation-
/// reaction event carrying the argument symbols, and the renamed body as
/// continuation.
pub fn activate_proc_method(
    ctx: &Ctx,
    sigma: &SymbolicState,
    m: &str,
) -> Result<LocalStep, LocalError> {
    let decl = ctx
        .program
        .methods
        .get(m)
        .ok_or_else(|| LocalError::UnknownMethod(String::from(m)))?;
    let mut fresh = FreshSyms::for_state(sigma);
    let syms: Vec<Var> = decl.params.iter().map(|_| fresh.next('Y')).collect();
    let payload: Vec<SExpr> = syms.iter().map(|y| SExpr::Var(y.clone())).collect();
    let ev = Event::with_method(EventKind::InvR, m, payload);
    let (tr, extended) = insert_event(sigma, ev, &syms)?;
    let mut taken: BTreeSet<Var> = extended.dom().cloned().collect();
    taken.extend(decl.body.free_vars());
    let mut renamed = decl.body.clone();
    let mut state = extended;
    for (p, y) in decl.params.iter().zip(syms.iter()) {
        let local = fresh_prog_var(p, &taken);
        taken.insert(local.clone());
        state = state.update(&local, &SExpr::Var(y.clone()))?;
        renamed = renamed.subst_var(p, &local);
    }
    Ok(LocalStep::new(
        PathCondition::new(),
        tr.push_state(state),
        renamed,
    ))
}

/// Activation of an actor method on object `oid`: fresh symbolic arguments
/// plus a fresh symbolic invocation id, and the field-localized body.
pub fn activate_actor_method(
    ctx: &Ctx,
    sigma: &SymbolicState,
    m: &str,
    oid: &Value,
) -> Result<LocalStep, LocalError> {
    let (_, class, decl) = ctx
        .program
        .lookup_method(m)
        .ok_or_else(|| LocalError::UnknownMethod(String::from(m)))?;
    let mut fresh = FreshSyms::for_state(sigma);
    let syms: Vec<Var> = decl.params.iter().map(|_| fresh.next('Z')).collect();
    let id = fresh.next('I');
    let mut payload: Vec<SExpr> = syms.iter().map(|z| SExpr::Var(z.clone())).collect();
    payload.push(SExpr::Var(id.clone()));
    let ev = Event::with_method(EventKind::InvR, m, payload);
    let mut all_fresh = syms.clone();
    all_fresh.push(id);
    let (tr, extended) = insert_event(sigma, ev, &all_fresh)?;
    let localized = localize_body(class, oid, &decl.body);
    let mut taken: BTreeSet<Var> = extended.dom().cloned().collect();
    taken.extend(localized.free_vars());
    let mut renamed = localized;
    let mut state = extended;
    for (p, z) in decl.params.iter().zip(syms.iter()) {
        let local = fresh_prog_var(p, &taken);
        taken.insert(local.clone());
        state = state.update(&local, &SExpr::Var(z.clone()))?;
        renamed = renamed.subst_var(p, &local);
    }
    Ok(LocalStep::new(
        PathCondition::new(),
        tr.push_state(state),
        renamed,
    ))
}

/// Activation of an active-object method task with future `fut` on object
/// `oid`: fresh symbolic arguments and a fresh symbolic caller, with the
/// future already concrete in the event payload.
pub fn activate_ao_method(
    ctx: &Ctx,
    sigma: &SymbolicState,
    m: &str,
    oid: &Value,
    fut: Value,
) -> Result<LocalStep, LocalError> {
    let (_, class, decl) = ctx
        .program
        .lookup_method(m)
        .ok_or_else(|| LocalError::UnknownMethod(String::from(m)))?;
    let mut fresh = FreshSyms::for_state(sigma);
    let syms: Vec<Var> = decl.params.iter().map(|_| fresh.next('X')).collect();
    let caller = fresh.next('Y');
    let mut payload: Vec<SExpr> = syms.iter().map(|x| SExpr::Var(x.clone())).collect();
    payload.push(SExpr::Var(caller.clone()));
    payload.push(SExpr::Val(fut));
    let ev = Event::with_method(EventKind::InvR, m, payload);
    let mut all_fresh = syms.clone();
    all_fresh.push(caller);
    let (tr, extended) = insert_event(sigma, ev, &all_fresh)?;
    let localized = localize_body(class, oid, &decl.body);
    let mut taken: BTreeSet<Var> = extended.dom().cloned().collect();
    taken.extend(localized.free_vars());
    let mut renamed = localized;
    let mut state = extended;
    for (p, x) in decl.params.iter().zip(syms.iter()) {
        let local = fresh_prog_var(p, &taken);
        taken.insert(local.clone());
        state = state.update(&local, &SExpr::Var(x.clone()))?;
        renamed = renamed.subst_var(p, &local);
    }
    Ok(LocalStep::new(
        PathCondition::new(),
        tr.push_state(state),
        renamed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;
    use crate::lang::{parse, parse_stmt};
    use crate::trace::Item;

    fn seq_prog() -> Program {
        Program::from_stmt(LanguageVariant::Seq, Stmt::Skip)
    }

    fn st(pairs: &[(&str, i64)]) -> SymbolicState {
        SymbolicState::from_bindings(
            pairs
                .iter()
                .map(|(x, n)| (Var::new(x), SExpr::int(*n))),
        )
    }

    #[test]
    fn assign_appends_the_updated_state() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("x := x + 1", LanguageVariant::Seq).unwrap();
        let steps = val(&ctx, &st(&[("x", 1)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].body.len(), 2);
        assert_eq!(
            steps[0].body.last_state().unwrap().as_ref(),
            &st(&[("x", 2)])
        );
        assert!(steps[0].cont.is_empty());
    }

    #[test]
    fn skip_appends_nothing() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let steps = val(&ctx, &st(&[("x", 0)]), &Stmt::Skip).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].body.len(), 1);
    }

    #[test]
    fn if_on_concrete_guard_keeps_only_the_true_branch() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("if x == 0 { y := 1 }", LanguageVariant::Seq).unwrap();
        let steps = val(&ctx, &st(&[("x", 0), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cont, parse_stmt("y := 1", LanguageVariant::Seq).unwrap());
        assert!(steps[0].pc.is_empty());
    }

    #[test]
    fn if_on_symbolic_guard_produces_both_conditioned_branches() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let mut sigma = st(&[("y", 0)]);
        sigma.bind_raw(Var::new("Y0"), SExpr::Star);
        sigma.bind_raw(Var::new("x"), SExpr::var("Y0"));
        let s = parse_stmt("if x > 0 { y := 1 }", LanguageVariant::Seq).unwrap();
        let steps = val(&ctx, &sigma, &s).unwrap();
        assert_eq!(steps.len(), 2);
        let gt = SExpr::bin(Op::Gt, SExpr::var("Y0"), SExpr::int(0));
        assert_eq!(steps[0].pc, PathCondition::singleton(gt.clone()));
        assert_eq!(steps[1].pc, PathCondition::singleton(gt.negated()));
    }

    #[test]
    fn while_unfolds_to_body_then_loop() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("while x < 2 { x := x + 1 }", LanguageVariant::Seq).unwrap();
        let steps = val(&ctx, &st(&[("x", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(
            steps[0].cont,
            Stmt::seq(
                parse_stmt("x := x + 1", LanguageVariant::Seq).unwrap(),
                s.clone()
            )
        );
    }

    #[test]
    fn co_interleaves_one_step_per_side() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("co x := 1 || y := 2 oc", LanguageVariant::Par).unwrap();
        let steps = val(&ctx, &st(&[("x", 0), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 2);
        // Each side finishes its statement, leaving the other side alone.
        assert_eq!(steps[0].cont, parse_stmt("y := 2", LanguageVariant::Seq).unwrap());
        assert_eq!(steps[1].cont, parse_stmt("x := 1", LanguageVariant::Seq).unwrap());
    }

    #[test]
    fn atomic_unfolds_to_completion_in_one_step() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("atomic(x := 1; y := x + 1)", LanguageVariant::Par).unwrap();
        let steps = val(&ctx, &st(&[("x", 0), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(steps[0].cont.is_empty());
        assert_eq!(
            steps[0].body.last_state().unwrap().as_ref(),
            &st(&[("x", 1), ("y", 2)])
        );
        // Interior states are visible consecutively.
        assert_eq!(steps[0].body.len(), 3);
    }

    #[test]
    fn atomic_bound_is_enforced() {
        let p = seq_prog();
        let mut ctx = Ctx::new(&p);
        ctx.atomic_bound = 3;
        let s = parse_stmt(
            "atomic(x := 1; x := 2; x := 3; x := 4; x := 5)",
            LanguageVariant::Par,
        )
        .unwrap();
        assert_eq!(
            val(&ctx, &st(&[("x", 0)]), &s),
            Err(LocalError::AtomicBoundExceeded)
        );
    }

    #[test]
    fn guarded_statement_reschedules_when_false() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt(":: x > 0; y := 1", LanguageVariant::Par).unwrap();
        // Concrete false guard: only the rescheduling branch survives.
        let steps = val(&ctx, &st(&[("x", 0), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cont, s);
        // Concrete true guard: only the proceed branch.
        let steps = val(&ctx, &st(&[("x", 1), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cont, parse_stmt("y := 1", LanguageVariant::Seq).unwrap());
    }

    #[test]
    fn input_introduces_a_fresh_symbol_and_event() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("input(x)", LanguageVariant::Par).unwrap();
        let steps = val(&ctx, &st(&[("x", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        let body = &steps[0].body;
        assert_eq!(body.len(), 4);
        let ev = body.events()[0];
        assert_eq!(ev.kind, EventKind::Inp);
        assert_eq!(ev.payload, alloc::vec![SExpr::var("Y0")]);
        let last = body.last_state().unwrap();
        assert_eq!(last.get(&Var::new("x")), Some(&SExpr::var("Y0")));
        assert!(last.is_symbolic_var(&Var::new("Y0")));
    }

    #[test]
    fn goto_drops_the_sequential_remainder() {
        let prog = parse(
            "proctype a() { label top: x := x + 1; goto top; x := 99 }",
            LanguageVariant::PromelaMini,
        )
        .unwrap();
        let mut ctx = Ctx::new(&prog);
        ctx.labels = Some(&prog.procs[0].labels);
        let goto_stmt = parse_stmt("goto top", LanguageVariant::PromelaMini).unwrap();
        let inner = Stmt::seq(
            goto_stmt,
            parse_stmt("x := 99", LanguageVariant::Seq).unwrap(),
        );
        let steps = val(&ctx, &st(&[("x", 0)]), &inner).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cont, *prog.procs[0].labels.get("top").unwrap());
    }

    #[test]
    fn proc_activation_shape() {
        let prog = parse(
            "method m(x) { y := x } main { call(m, 2) }",
            LanguageVariant::Proc,
        )
        .unwrap();
        let ctx = Ctx::new(&prog);
        let step = activate_proc_method(&ctx, &st(&[("y", 0)]), "m").unwrap();
        // [σ, invREv(m, Y0), σ[Y0↦∗], σ[Y0↦∗][x'↦Y0]]
        assert_eq!(step.body.len(), 4);
        let ev = step.body.events()[0];
        assert_eq!(ev.kind, EventKind::InvR);
        assert_eq!(ev.method.as_deref(), Some("m"));
        assert_eq!(ev.payload, alloc::vec![SExpr::var("Y0")]);
        let last = step.body.last_state().unwrap();
        assert_eq!(last.get(&Var::new("x'")), Some(&SExpr::var("Y0")));
        assert_eq!(
            step.cont,
            Stmt::Assign(Var::new("y"), SExpr::var("x'")),
        );
    }

    #[test]
    fn ao_activation_localizes_fields_and_carries_the_future() {
        let prog = parse(
            "class C { n; method m(x) { n := n + x; return n } } main { o := new C(0); f := o!m(1); await f?; y := f.get }",
            LanguageVariant::ActiveObject,
        )
        .unwrap();
        let ctx = Ctx::new(&prog);
        let mut sigma = SymbolicState::new();
        sigma.bind_raw(Var::new("n@o1"), SExpr::int(0));
        let step =
            activate_ao_method(&ctx, &sigma, "m", &Value::Oid(1), Value::Fid(1)).unwrap();
        let ev = step.body.events()[0];
        assert_eq!(ev.kind, EventKind::InvR);
        // payload = [X0 (arg), Y0 (caller), f1 (future)]
        assert_eq!(
            ev.payload,
            alloc::vec![
                SExpr::var("X0"),
                SExpr::var("Y0"),
                SExpr::Val(Value::Fid(1))
            ]
        );
        let cont = step.cont.to_string();
        assert!(cont.contains("n@o1"), "fields localized: {cont}");
        assert!(cont.contains("x'"), "params renamed: {cont}");
    }

    #[test]
    fn new_binds_object_variable_and_fields() {
        let prog = parse(
            "class C { n; method m(x) { n := x } } main { o := new C(7); o!m(1) }",
            LanguageVariant::Actor,
        )
        .unwrap();
        let ctx = Ctx::new(&prog);
        let s = parse_stmt("o := new C(7)", LanguageVariant::Actor).unwrap();
        let steps = val(&ctx, &SymbolicState::new(), &s).unwrap();
        assert_eq!(steps.len(), 1);
        let last = steps[0].body.last_state().unwrap();
        assert_eq!(last.get(&Var::new("o")), Some(&SExpr::var("X0")));
        assert_eq!(last.get(&Var::new("n@X0")), Some(&SExpr::int(7)));
        let ev = steps[0].body.events()[0];
        assert_eq!(ev.kind, EventKind::New);
        assert_eq!(ev.payload, alloc::vec![SExpr::var("X0"), SExpr::int(7)]);
    }

    #[test]
    fn await_bool_yields_only_the_satisfied_branch() {
        let prog = parse(
            "class C { method m(x) { return x } } main { skip }",
            LanguageVariant::ActiveObject,
        )
        .unwrap();
        let ctx = Ctx::new(&prog);
        // Concrete false guard → no steps at all (task stays suspended).
        let s = Stmt::AwaitBool(SExpr::bin(Op::Gt, SExpr::var("x"), SExpr::int(0)));
        let steps = val(&ctx, &st(&[("x", 0)]), &s).unwrap();
        assert!(steps.is_empty());
        let steps = val(&ctx, &st(&[("x", 1)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(steps[0].cont.is_empty());
    }

    #[test]
    fn return_emits_completion_on_the_destiny_future() {
        let prog = parse(
            "class C { method m(x) { return x } } main { skip }",
            LanguageVariant::ActiveObject,
        )
        .unwrap();
        let mut ctx = Ctx::new(&prog);
        ctx.destiny = Some(Value::Fid(3));
        let s = Stmt::Return(SExpr::var("x"));
        let steps = val(&ctx, &st(&[("x", 5)]), &s).unwrap();
        let ev = steps[0].body.events()[0];
        assert_eq!(ev.kind, EventKind::Comp);
        assert_eq!(
            ev.payload,
            alloc::vec![SExpr::Val(Value::Fid(3)), SExpr::int(5)]
        );
    }

    #[test]
    fn block_renames_and_binds_zero() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        let s = parse_stmt("{ x; x := x + 1; y := x }", LanguageVariant::Par).unwrap();
        let steps = val(&ctx, &st(&[("x", 9), ("y", 0)]), &s).unwrap();
        assert_eq!(steps.len(), 1);
        let last = steps[0].body.last_state().unwrap();
        assert_eq!(last.get(&Var::new("x'")), Some(&SExpr::int(0)));
        assert_eq!(last.get(&Var::new("x")), Some(&SExpr::int(9)));
        assert!(steps[0].cont.to_string().contains("x'"));
    }

    #[test]
    fn local_bodies_start_and_end_with_states() {
        let p = seq_prog();
        let ctx = Ctx::new(&p);
        for src in ["skip", "x := 1", "input(x)", "send(x, 1)", "atomic(x := 2)"] {
            let s = parse_stmt(src, LanguageVariant::Multi).unwrap();
            for step in val(&ctx, &st(&[("x", 0)]), &s).unwrap() {
                assert!(matches!(step.body.first_item(), Some(Item::State(_))));
                assert!(matches!(step.body.last_item(), Some(Item::State(_))));
            }
        }
    }
}
