//! A dynamic-logic sequent calculus over symbolic traces.
//!
//! Sequents have the form `Γ, pc ⇒ τ φ`: a set of first-order assumptions, a
//! path condition, a symbolic trace accumulated so far, and a succedent that
//! may contain modalities `[s]φ` (possibly indexed, `[s]_i φ`, when several
//! tasks run interleaved). A sequent is valid when for every concretisation ρ
//! of the trace whose path condition holds: if the first state of `ρ(τ)`
//! satisfies all of `Γ`, the last state satisfies `φ` — with each modality
//! `[s]φ` read as partial correctness over the finite completed runs of `s`.
//!
//! The module provides:
//! - [`apply_rule`]: one calculus rule applied to a sequent, yielding premises;
//! - [`prove`]: deterministic bounded proof search with loop unrolling;
//! - [`discharge_fo`]: first-order leaf discharge by enumerating every
//!   concretisation over a finite integer domain;
//! - [`check_sat`]: three-valued satisfaction of a formula on a concrete
//!   trace, re-entering the global enumerator for modalities;
//! - [`soundness_harness`]: empirical soundness — every proved triple is
//!   re-checked against the enumerated runs, with optional rule corruption
//!   ([`Fault`]) to demonstrate that broken rules do get caught.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::compose::{Bounds, Engine, Status};
use crate::event::{Event, EventKind};
use crate::expr::{EvalError, SExpr, Var};
use crate::lang::{fresh_prog_var, LanguageVariant, Program, Stmt};
use crate::state::{eval_expr, ConcretizationMapping, SymbolicState};
use crate::trace::{
    chop, concretize_trace, insert_event, ChopError, PathCondition, Trace, TracePiece,
};
use crate::value::Value;

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

/// First-order trace formulas with modalities. `Modal(i, s, φ)` is `[s]_i φ`
/// (`i = None` for the plain unindexed form); `s = Empty` renders as `[∘]φ`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Formula {
    Atom(SExpr),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Var, Box<Formula>),
    Exists(Var, Box<Formula>),
    Modal(Option<u32>, Box<Stmt>, Box<Formula>),
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::Atom(SExpr::tt())
    }

    pub fn atom(e: SExpr) -> Formula {
        Formula::Atom(e)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn modal(s: Stmt, f: Formula) -> Formula {
        Formula::Modal(None, Box::new(s), Box::new(f))
    }

    pub fn modal_indexed(i: u32, s: Stmt, f: Formula) -> Formula {
        Formula::Modal(Some(i), Box::new(s), Box::new(f))
    }

    /// True if a modality occurs anywhere in the formula.
    pub fn has_modal(&self) -> bool {
        match self {
            Formula::Atom(_) => false,
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.has_modal(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => a.has_modal() || b.has_modal(),
            Formula::Modal(..) => true,
        }
    }

    /// Substitution `φ[x ← e]`. It rewrites atoms and descends through
    /// connectives, quantifiers (respecting shadowing) and modality
    /// *postconditions* — but never into the modality's program text, which
    /// denotes code, not a term over the current state.
    pub fn subst(&self, x: &Var, e: &SExpr) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(a.subst(x, e)),
            Formula::Not(f) => Formula::not(f.subst(x, e)),
            Formula::And(a, b) => Formula::and(a.subst(x, e), b.subst(x, e)),
            Formula::Or(a, b) => Formula::Or(Box::new(a.subst(x, e)), Box::new(b.subst(x, e))),
            Formula::Implies(a, b) => Formula::implies(a.subst(x, e), b.subst(x, e)),
            Formula::Iff(a, b) => Formula::Iff(Box::new(a.subst(x, e)), Box::new(b.subst(x, e))),
            Formula::Forall(v, f) if v == x => Formula::Forall(v.clone(), f.clone()),
            Formula::Forall(v, f) => Formula::Forall(v.clone(), Box::new(f.subst(x, e))),
            Formula::Exists(v, f) if v == x => Formula::Exists(v.clone(), f.clone()),
            Formula::Exists(v, f) => Formula::Exists(v.clone(), Box::new(f.subst(x, e))),
            Formula::Modal(i, s, f) => Formula::Modal(*i, s.clone(), Box::new(f.subst(x, e))),
        }
    }

    /// Every variable mentioned: atom variables, quantifier binders, free
    /// variables of modality programs.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Atom(e) => e.collect_vars(out),
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                out.insert(v.clone());
                f.collect_vars(out);
            }
            Formula::Modal(_, s, f) => {
                out.extend(s.free_vars());
                f.collect_vars(out);
            }
        }
    }

    /// Program variables mentioned in atoms (identifiers starting with a
    /// lowercase letter), excluding quantifier-bound ones. Used to decide
    /// which variables the initial all-unknown state must cover.
    pub fn prog_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut bound = BTreeSet::new();
        self.collect_prog_vars(&mut out, &mut bound);
        out
    }

    fn collect_prog_vars(&self, out: &mut BTreeSet<Var>, bound: &mut BTreeSet<Var>) {
        match self {
            Formula::Atom(e) => {
                for v in e.vars() {
                    let lower = v
                        .as_str()
                        .chars()
                        .next()
                        .map(|c| c.is_ascii_lowercase())
                        .unwrap_or(false);
                    if lower && !bound.contains(&v) {
                        out.insert(v);
                    }
                }
            }
            Formula::Not(f) => f.collect_prog_vars(out, bound),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.collect_prog_vars(out, bound);
                b.collect_prog_vars(out, bound);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                let fresh = bound.insert(v.clone());
                f.collect_prog_vars(out, bound);
                if fresh {
                    bound.remove(v);
                }
            }
            Formula::Modal(_, _, f) => f.collect_prog_vars(out, bound),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(e) => write!(f, "{e}"),
            Formula::Not(g) => write!(f, "~({g})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <-> {b})"),
            Formula::Forall(v, g) => write!(f, "(A {v}. {g})"),
            Formula::Exists(v, g) => write!(f, "(E {v}. {g})"),
            Formula::Modal(i, s, g) => {
                write!(f, "[")?;
                if s.is_empty() {
                    write!(f, "~")?;
                } else {
                    write!(f, "{s}")?;
                }
                write!(f, "]")?;
                if let Some(i) = i {
                    write!(f, "_{i}")?;
                }
                write!(f, "({g})")
            }
        }
    }
}

/// Flatten a right-or-left-nested conjunction into its conjunct list.
pub fn conjuncts(f: &Formula) -> Vec<Formula> {
    match f {
        Formula::And(a, b) => {
            let mut out = conjuncts(a);
            out.extend(conjuncts(b));
            out
        }
        other => vec![other.clone()],
    }
}

/// Rebuild a conjunction from conjuncts, dropping literal `tt` entries.
pub fn conjoin(parts: Vec<Formula>) -> Formula {
    let mut parts: Vec<Formula> = parts.into_iter().filter(|p| *p != Formula::tt()).collect();
    match parts.len() {
        0 => Formula::tt(),
        1 => parts.pop().unwrap(),
        _ => {
            let mut it = parts.into_iter();
            let first = it.next().unwrap();
            it.fold(first, Formula::and)
        }
    }
}

// ---------------------------------------------------------------------------
// Sequents
// ---------------------------------------------------------------------------

/// `Γ, pc ⇒ τ φ`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Sequent {
    pub gamma: Vec<Formula>,
    pub pc: PathCondition,
    pub trace: Trace,
    pub phi: Formula,
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, g) in self.gamma.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "}}, {} => <{} items", self.pc, self.trace.len())?;
        if let Some(last) = self.trace.last_state() {
            write!(f, ", last {last}")?;
        }
        write!(f, "> {}", self.phi)
    }
}

/// The all-unknown initial state over a variable set: each program variable
/// `x` is bound to a fresh symbolic variable `Xk`, itself bound to `∗`. The
/// indirection keeps states well-formed under updates (an assignment
/// `x := x + 1` yields `x ↦ Xk + 1`, never a self-referential binding).
pub fn sigma_star(vars: &BTreeSet<Var>) -> SymbolicState {
    let mut st = SymbolicState::new();
    for (k, x) in vars.iter().enumerate() {
        let sym = Var::new(&format!("X{k}"));
        st.bind_raw(sym.clone(), SExpr::Star);
        st.bind_raw(x.clone(), SExpr::Var(sym));
    }
    st
}

/// The entry sequent `Γ, {} ⇒ ⟨σ∗⟩ [s]φ` for a contract `(Γ, s, φ)`.
pub fn entry_sequent(vars: &BTreeSet<Var>, gamma: Vec<Formula>, s: Stmt, post: Formula) -> Sequent {
    Sequent {
        gamma,
        pc: PathCondition::new(),
        trace: Trace::singleton(sigma_star(vars)),
        phi: Formula::modal(s, post),
    }
}

/// The variable set an entry sequent must cover for a whole program: free
/// variables of `main` and of every method body (minus formal parameters),
/// plus the program variables of the contract formulas.
pub fn contract_vars(prog: &Program, formulas: &[&Formula]) -> BTreeSet<Var> {
    let mut vars = BTreeSet::new();
    if let Some(main) = &prog.main {
        vars.extend(main.free_vars());
    }
    for m in prog.methods.values() {
        let mut fv = m.body.free_vars();
        for p in &m.params {
            fv.remove(p);
        }
        vars.extend(fv);
    }
    for f in formulas {
        vars.extend(f.prog_vars());
    }
    vars
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// Calculus rules. The `Par*` family handles a leading parallel composition:
/// `Par` schedules one of two atomic branch heads, the others resolve control
/// structure inside a branch first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Rule {
    /// `Γ,pc ⇒ τ φ` from `Γ,pc ⇒ τ [∘]φ`.
    Empty,
    /// Extend the trace by the updated state.
    Assign,
    Skip,
    /// Path-condition split on the guard.
    Cond,
    /// Unfold one iteration into a conditional.
    While,
    /// Run the protected statement before anything else.
    Atomic,
    /// Scope entry: rename the first declared local to a fresh name and
    /// initialise it; an empty declaration list just unwraps the block.
    Local,
    /// Chop an input event with a fresh symbol onto the trace.
    Input,
    /// Path-condition split: run the body, or stutter on a false guard.
    GrdStmt,
    ParEmpty1,
    ParEmpty2,
    Par,
    ParIf1,
    ParIf2,
    ParWhile1,
    ParWhile2,
    ParLocal1,
    ParLocal2,
    ParGrd1,
    ParGrd2,
    /// Chop an invocation event onto the trace.
    MtdCall,
    /// Chop an invocation-reaction event and add a fresh indexed modality
    /// running the method body; side condition: more matching invocations
    /// than reactions in the trace so far.
    MtdRun { method: String, args: Vec<SExpr> },
    /// Context rule on a conjunction of indexed modalities: premises cover
    /// every schedulable conjunct, unfolding all interleavings.
    Interleave,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Empty => "Empty",
            Rule::Assign => "Assign",
            Rule::Skip => "skip",
            Rule::Cond => "Cond",
            Rule::While => "While",
            Rule::Atomic => "Atomic",
            Rule::Local => "Local",
            Rule::Input => "Input",
            Rule::GrdStmt => "GrdStmt",
            Rule::ParEmpty1 => "Par-Empty1",
            Rule::ParEmpty2 => "Par-Empty2",
            Rule::Par => "Par",
            Rule::ParIf1 => "Par-If1",
            Rule::ParIf2 => "Par-If2",
            Rule::ParWhile1 => "Par-While1",
            Rule::ParWhile2 => "Par-While2",
            Rule::ParLocal1 => "Par-Local1",
            Rule::ParLocal2 => "Par-Local2",
            Rule::ParGrd1 => "Par-Grd1",
            Rule::ParGrd2 => "Par-Grd2",
            Rule::MtdCall => "MtdCall",
            Rule::MtdRun { .. } => "MtdRun",
            Rule::Interleave => "Interleave",
        }
    }
}

/// Rule application failures.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RuleError {
    /// The sequent does not have the shape the rule expects.
    Shape { rule: &'static str, expected: String },
    /// The leading statement has no calculus rule.
    Unsupported(String),
    /// A rule side condition does not hold.
    SideCondition(String),
    Eval(EvalError),
    Chop(ChopError),
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::Shape { rule, expected } => {
                write!(f, "rule {rule} expects {expected}")
            }
            RuleError::Unsupported(msg) => write!(f, "no calculus rule applies: {msg}"),
            RuleError::SideCondition(msg) => write!(f, "side condition failed: {msg}"),
            RuleError::Eval(e) => write!(f, "{e}"),
            RuleError::Chop(e) => write!(f, "{e}"),
        }
    }
}

impl From<EvalError> for RuleError {
    fn from(e: EvalError) -> Self {
        RuleError::Eval(e)
    }
}

impl From<ChopError> for RuleError {
    fn from(e: ChopError) -> Self {
        RuleError::Chop(e)
    }
}

/// Split a statement into its first executable statement and the remainder,
/// looking through sequencing and labels.
fn split_head(s: &Stmt) -> (Stmt, Stmt) {
    match s {
        Stmt::Seq(a, b) => {
            let (h, t) = split_head(a);
            (h, Stmt::seq(t, (**b).clone()))
        }
        Stmt::Labeled(_, inner) => split_head(inner),
        _ => (s.clone(), Stmt::Empty),
    }
}

/// Atomic statements: they take exactly one scheduling step, so a parallel
/// composition may schedule them directly.
fn is_atomic_stmt(s: &Stmt) -> bool {
    matches!(
        s,
        Stmt::Assign(..) | Stmt::Skip | Stmt::Atomic(_) | Stmt::Input(_)
    )
}

/// The rule resolving the leading statement of a modality.
pub fn head_rule(s: &Stmt) -> Result<Rule, RuleError> {
    let (head, _) = split_head(s);
    match &head {
        Stmt::Empty => Ok(Rule::Empty),
        Stmt::Assign(..) => Ok(Rule::Assign),
        Stmt::Skip => Ok(Rule::Skip),
        Stmt::If(..) => Ok(Rule::Cond),
        Stmt::While(..) => Ok(Rule::While),
        Stmt::Atomic(_) => Ok(Rule::Atomic),
        Stmt::Block(..) => Ok(Rule::Local),
        Stmt::Input(_) => Ok(Rule::Input),
        Stmt::Guarded(..) => Ok(Rule::GrdStmt),
        Stmt::Call(..) => Ok(Rule::MtdCall),
        Stmt::Co(l, r) => par_rule(l, r),
        other => Err(RuleError::Unsupported(format!(
            "leading statement `{other}` is outside the calculus fragment"
        ))),
    }
}

fn par_rule(l: &Stmt, r: &Stmt) -> Result<Rule, RuleError> {
    if l.is_empty() {
        return Ok(Rule::ParEmpty1);
    }
    if r.is_empty() {
        return Ok(Rule::ParEmpty2);
    }
    let (lh, _) = split_head(l);
    let (rh, _) = split_head(r);
    // Resolve branch-internal control structure before scheduling.
    match (&lh, &rh) {
        (Stmt::If(..), _) => return Ok(Rule::ParIf1),
        (_, Stmt::If(..)) => return Ok(Rule::ParIf2),
        (Stmt::While(..), _) => return Ok(Rule::ParWhile1),
        (_, Stmt::While(..)) => return Ok(Rule::ParWhile2),
        (Stmt::Block(..), _) => return Ok(Rule::ParLocal1),
        (_, Stmt::Block(..)) => return Ok(Rule::ParLocal2),
        (Stmt::Guarded(..), _) => return Ok(Rule::ParGrd1),
        (_, Stmt::Guarded(..)) => return Ok(Rule::ParGrd2),
        _ => {}
    }
    if is_atomic_stmt(&lh) && is_atomic_stmt(&rh) {
        return Ok(Rule::Par);
    }
    Err(RuleError::Unsupported(format!(
        "parallel branches lead with `{lh}` and `{rh}`"
    )))
}

/// One premise produced by a rule on a single modality: additions to the path
/// condition, the new trace, the replacement formula for the conjunct, and
/// whether the premise unfolds a loop (counted against the unroll budget).
struct BasePremise {
    pc: PathCondition,
    trace: Trace,
    replacement: Formula,
    unrolls: bool,
}

fn last_state_of(trace: &Trace, rule: &'static str) -> Result<SymbolicState, RuleError> {
    trace
        .last_state()
        .map(|s| (**s).clone())
        .ok_or(RuleError::Shape {
            rule,
            expected: "a trace ending in a state".to_owned(),
        })
}

fn chop_triple(trace: &Trace, triple: Trace) -> Result<Trace, RuleError> {
    let out = chop(
        &TracePiece::unconditional(trace.clone()),
        &TracePiece::unconditional(triple),
    )?;
    Ok(out.body)
}

/// All variables that must not be captured when inventing a fresh name.
fn taken_vars(seq: &Sequent) -> BTreeSet<Var> {
    let mut taken = BTreeSet::new();
    for item in seq.trace.items() {
        if let Some(st) = item.as_state() {
            taken.extend(st.dom().cloned());
        }
    }
    taken.extend(seq.phi.vars());
    for g in &seq.gamma {
        taken.extend(g.vars());
    }
    taken.extend(seq.pc.vars());
    taken
}

fn fresh_symbol(prefix: &str, taken: &BTreeSet<Var>) -> Var {
    for k in 0u32.. {
        let v = Var::new(&format!("{prefix}{k}"));
        if !taken.contains(&v) {
            return v;
        }
    }
    unreachable!()
}

/// Apply a rule to a single modality conjunct `[s]_i φ` under the sequent's
/// path condition and trace.
fn apply_base(
    seq: &Sequent,
    idx: Option<u32>,
    s: &Stmt,
    inner: &Formula,
    rule: &Rule,
    fault: Option<Fault>,
) -> Result<Vec<BasePremise>, RuleError> {
    let (head, rest) = split_head(s);
    let pc = seq.pc.clone();
    let trace = seq.trace.clone();
    let remodal = |stmt: Stmt| Formula::Modal(idx, Box::new(stmt), Box::new(inner.clone()));
    let keep = |stmt: Stmt, trace: Trace| BasePremise {
        pc: pc.clone(),
        trace,
        replacement: remodal(stmt),
        unrolls: false,
    };
    match (rule, &head) {
        (Rule::Empty, Stmt::Empty) => Ok(vec![BasePremise {
            pc,
            trace,
            replacement: inner.clone(),
            unrolls: false,
        }]),
        (Rule::Assign, Stmt::Assign(x, e)) => {
            let sigma = last_state_of(&trace, "Assign")?;
            let sigma2 = match fault {
                // Deliberately corrupted rule for the soundness harness:
                // the premise forgets the state update.
                Some(Fault::AssignDropsUpdate) => sigma.clone(),
                None => sigma.update(x, e)?,
            };
            Ok(vec![keep(rest, trace.push_state(sigma2))])
        }
        (Rule::Skip, Stmt::Skip) => Ok(vec![keep(rest, trace)]),
        (Rule::Cond, Stmt::If(e, body)) => {
            let sigma = last_state_of(&trace, "Cond")?;
            let ev = eval_expr(&sigma, e)?;
            let mut pc_tt = pc.clone();
            pc_tt.insert(ev.clone());
            let mut pc_ff = pc.clone();
            pc_ff.insert(ev.negated());
            Ok(vec![
                BasePremise {
                    pc: pc_ff,
                    trace: trace.clone(),
                    replacement: remodal(rest.clone()),
                    unrolls: false,
                },
                BasePremise {
                    pc: pc_tt,
                    trace,
                    replacement: remodal(Stmt::seq((**body).clone(), rest)),
                    unrolls: false,
                },
            ])
        }
        (Rule::While, Stmt::While(e, body)) => {
            let unfolded = Stmt::If(
                e.clone(),
                Box::new(Stmt::seq((**body).clone(), head.clone())),
            );
            Ok(vec![BasePremise {
                pc,
                trace,
                replacement: remodal(Stmt::seq(unfolded, rest)),
                unrolls: true,
            }])
        }
        (Rule::Atomic, Stmt::Atomic(st)) => Ok(vec![keep(Stmt::seq((**st).clone(), rest), trace)]),
        (Rule::Local, Stmt::Block(decls, body)) => {
            if decls.is_empty() {
                return Ok(vec![keep(Stmt::seq((**body).clone(), rest), trace)]);
            }
            let x = decls[0].clone();
            let taken = taken_vars(seq);
            let x2 = fresh_prog_var(&x, &taken);
            let body2 = body.subst_var(&x, &x2);
            let inner_block = Stmt::Block(decls[1..].to_vec(), Box::new(body2));
            let stmt = Stmt::seq(
                Stmt::Assign(x2, SExpr::int(0)),
                Stmt::seq(inner_block, rest),
            );
            Ok(vec![keep(stmt, trace)])
        }
        (Rule::Input, Stmt::Input(x)) => {
            let sigma = last_state_of(&trace, "Input")?;
            let taken = taken_vars(seq);
            let y = fresh_symbol("Y", &taken);
            let ev = Event::new(EventKind::Inp, vec![SExpr::Var(y.clone())]);
            let (triple, _) = insert_event(&sigma, ev, core::slice::from_ref(&y))?;
            let trace2 = chop_triple(&trace, triple)?;
            let stmt = Stmt::seq(Stmt::Assign(x.clone(), SExpr::Var(y)), rest);
            Ok(vec![keep(stmt, trace2)])
        }
        (Rule::GrdStmt, Stmt::Guarded(g, gbody)) => {
            let sigma = last_state_of(&trace, "GrdStmt")?;
            let gv = eval_expr(&sigma, g)?;
            let mut pc_tt = pc.clone();
            pc_tt.insert(gv.clone());
            let mut pc_ff = pc.clone();
            pc_ff.insert(gv.negated());
            Ok(vec![
                BasePremise {
                    pc: pc_tt,
                    trace: trace.clone(),
                    replacement: remodal(Stmt::seq((**gbody).clone(), rest.clone())),
                    unrolls: false,
                },
                // Stutter: the guard is false now; the statement is retried.
                BasePremise {
                    pc: pc_ff,
                    trace,
                    replacement: remodal(s.clone()),
                    unrolls: false,
                },
            ])
        }
        (Rule::MtdCall, Stmt::Call(m, es)) => {
            let sigma = last_state_of(&trace, "MtdCall")?;
            let payload: Vec<SExpr> = es
                .iter()
                .map(|e| eval_expr(&sigma, e))
                .collect::<Result<_, _>>()?;
            let ev = Event::with_method(EventKind::Inv, m, payload);
            let (triple, _) = insert_event(&sigma, ev, &[])?;
            let trace2 = chop_triple(&trace, triple)?;
            Ok(vec![keep(rest, trace2)])
        }
        (par @ (Rule::ParEmpty1
        | Rule::ParEmpty2
        | Rule::Par
        | Rule::ParIf1
        | Rule::ParIf2
        | Rule::ParWhile1
        | Rule::ParWhile2
        | Rule::ParLocal1
        | Rule::ParLocal2
        | Rule::ParGrd1
        | Rule::ParGrd2), Stmt::Co(l, r)) => {
            apply_par(seq, idx, s, inner, par, l, r, &rest, fault)
        }
        (rule, head) => Err(RuleError::Shape {
            rule: rule.name(),
            expected: format!("a different leading statement than `{head}`"),
        }),
    }
}

/// The parallel-composition rules on a leading `co l || r oc`.
#[allow(clippy::too_many_arguments)]
fn apply_par(
    seq: &Sequent,
    idx: Option<u32>,
    whole: &Stmt,
    inner: &Formula,
    rule: &Rule,
    l: &Stmt,
    r: &Stmt,
    rest: &Stmt,
    _fault: Option<Fault>,
) -> Result<Vec<BasePremise>, RuleError> {
    let pc = seq.pc.clone();
    let trace = seq.trace.clone();
    let remodal = |stmt: Stmt| Formula::Modal(idx, Box::new(stmt), Box::new(inner.clone()));
    let co = |a: Stmt, b: Stmt| Stmt::Co(Box::new(a), Box::new(b));
    let premise = |pc: PathCondition, stmt: Stmt, unrolls: bool| BasePremise {
        pc,
        trace: trace.clone(),
        replacement: remodal(stmt),
        unrolls,
    };
    let sigma = last_state_of(&trace, rule.name_static())?;
    // Branch decomposition; `swap` mirrors the rule onto the right branch.
    let build = |this: &Stmt, other: &Stmt, swap: bool| -> Result<Vec<BasePremise>, RuleError> {
        let (h, t) = split_head(this);
        let reco = |branch: Stmt| {
            if swap {
                co(other.clone(), branch)
            } else {
                co(branch, other.clone())
            }
        };
        match (rule, &h) {
            (Rule::ParIf1 | Rule::ParIf2, Stmt::If(e, body)) => {
                let ev = eval_expr(&sigma, e)?;
                let mut pc_tt = pc.clone();
                pc_tt.insert(ev.clone());
                let mut pc_ff = pc.clone();
                pc_ff.insert(ev.negated());
                Ok(vec![
                    premise(pc_ff, Stmt::seq(reco(t.clone()), rest.clone()), false),
                    premise(
                        pc_tt,
                        Stmt::seq(reco(Stmt::seq((**body).clone(), t)), rest.clone()),
                        false,
                    ),
                ])
            }
            (Rule::ParWhile1 | Rule::ParWhile2, Stmt::While(e, body)) => {
                let unfolded = Stmt::If(e.clone(), Box::new(Stmt::seq((**body).clone(), h.clone())));
                Ok(vec![premise(
                    pc.clone(),
                    Stmt::seq(reco(Stmt::seq(unfolded, t)), rest.clone()),
                    true,
                )])
            }
            (Rule::ParLocal1 | Rule::ParLocal2, Stmt::Block(decls, body)) => {
                if decls.is_empty() {
                    return Ok(vec![premise(
                        pc.clone(),
                        Stmt::seq(reco(Stmt::seq((**body).clone(), t)), rest.clone()),
                        false,
                    )]);
                }
                let x = decls[0].clone();
                let taken = taken_vars(seq);
                let x2 = fresh_prog_var(&x, &taken);
                let body2 = body.subst_var(&x, &x2);
                let inner_block = Stmt::Block(decls[1..].to_vec(), Box::new(body2));
                let branch = Stmt::seq(
                    Stmt::Assign(x2, SExpr::int(0)),
                    Stmt::seq(inner_block, t),
                );
                Ok(vec![premise(
                    pc.clone(),
                    Stmt::seq(reco(branch), rest.clone()),
                    false,
                )])
            }
            (Rule::ParGrd1 | Rule::ParGrd2, Stmt::Guarded(g, gbody)) => {
                let gv = eval_expr(&sigma, g)?;
                let mut pc_tt = pc.clone();
                pc_tt.insert(gv.clone());
                let mut pc_ff = pc.clone();
                pc_ff.insert(gv.negated());
                Ok(vec![
                    premise(
                        pc_tt,
                        Stmt::seq(reco(Stmt::seq((**gbody).clone(), t)), rest.clone()),
                        false,
                    ),
                    // Stutter on a false guard: the statement is unchanged.
                    premise(pc_ff, whole.clone(), false),
                ])
            }
            (rule, head) => Err(RuleError::Shape {
                rule: rule.name(),
                expected: format!("branch head `{head}` does not fit"),
            }),
        }
    };
    match rule {
        Rule::ParEmpty1 => Ok(vec![premise(
            pc.clone(),
            Stmt::seq(r.clone(), rest.clone()),
            false,
        )]),
        Rule::ParEmpty2 => Ok(vec![premise(
            pc.clone(),
            Stmt::seq(l.clone(), rest.clone()),
            false,
        )]),
        Rule::Par => {
            let (lh, lt) = split_head(l);
            let (rh, rt) = split_head(r);
            if !is_atomic_stmt(&lh) || !is_atomic_stmt(&rh) {
                return Err(RuleError::Shape {
                    rule: "Par",
                    expected: "atomic statements leading both branches".to_owned(),
                });
            }
            Ok(vec![
                premise(
                    pc.clone(),
                    Stmt::seq(lh, Stmt::seq(co(lt, r.clone()), rest.clone())),
                    false,
                ),
                premise(
                    pc.clone(),
                    Stmt::seq(rh, Stmt::seq(co(l.clone(), rt), rest.clone())),
                    false,
                ),
            ])
        }
        Rule::ParIf1 | Rule::ParWhile1 | Rule::ParLocal1 | Rule::ParGrd1 => build(l, r, false),
        Rule::ParIf2 | Rule::ParWhile2 | Rule::ParLocal2 | Rule::ParGrd2 => build(r, l, true),
        _ => unreachable!(),
    }
}

impl Rule {
    fn name_static(&self) -> &'static str {
        self.name()
    }
}

/// Count how many invocation events with this method and payload exceed
/// their invocation reactions in the trace (structural payload equality).
fn invocation_excess(trace: &Trace, method: &str, payload: &[SExpr]) -> i64 {
    let mut excess = 0i64;
    for ev in trace.events() {
        if ev.method.as_deref() == Some(method) && ev.payload == payload {
            match ev.kind {
                EventKind::Inv => excess += 1,
                EventKind::InvR => excess -= 1,
                _ => {}
            }
        }
    }
    excess
}

/// The oldest invocation event still lacking a reaction, for a method the
/// program defines with matching arity.
fn mtd_run_candidate(prog: &Program, seq: &Sequent) -> Option<(String, Vec<SExpr>)> {
    if prog.methods.is_empty() {
        return None;
    }
    for ev in seq.trace.events() {
        if ev.kind != EventKind::Inv {
            continue;
        }
        let m = ev.method.as_deref()?;
        let Some(mdef) = prog.methods.get(m) else {
            continue;
        };
        if mdef.params.len() != ev.payload.len() {
            continue;
        }
        if invocation_excess(&seq.trace, m, &ev.payload) > 0 {
            return Some((m.to_owned(), ev.payload.clone()));
        }
    }
    None
}

fn max_modal_index(f: &Formula) -> u32 {
    match f {
        Formula::Atom(_) => 0,
        Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => max_modal_index(g),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Implies(a, b)
        | Formula::Iff(a, b) => max_modal_index(a).max(max_modal_index(b)),
        Formula::Modal(i, _, g) => i.unwrap_or(0).max(max_modal_index(g)),
    }
}

/// Apply one calculus rule to a sequent, producing its premises. Premises
/// identical to the conclusion (a guard stuttering in an otherwise unchanged
/// proof state) are cut: such a cycle only covers divergent runs, which
/// contribute no completed trace to the partial-correctness reading.
pub fn apply_rule(prog: &Program, seq: &Sequent, rule: &Rule) -> Result<Vec<Sequent>, RuleError> {
    Ok(apply_internal(prog, seq, rule, None)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

fn apply_internal(
    prog: &Program,
    seq: &Sequent,
    rule: &Rule,
    fault: Option<Fault>,
) -> Result<Vec<(Sequent, bool)>, RuleError> {
    let cj = conjuncts(&seq.phi);
    let rebuild = |parts: Vec<Formula>, pc: PathCondition, trace: Trace| Sequent {
        gamma: seq.gamma.clone(),
        pc,
        trace,
        phi: conjoin(parts),
    };
    let out: Vec<(Sequent, bool)> = match rule {
        Rule::MtdRun { method, args } => {
            if invocation_excess(&seq.trace, method, args) <= 0 {
                return Err(RuleError::SideCondition(format!(
                    "no pending invocation of `{method}` in the trace"
                )));
            }
            let mdef = prog
                .methods
                .get(method)
                .ok_or_else(|| RuleError::SideCondition(format!("unknown method `{method}`")))?;
            if mdef.params.len() != args.len() {
                return Err(RuleError::SideCondition(format!(
                    "arity mismatch for `{method}`"
                )));
            }
            let sigma = last_state_of(&seq.trace, "MtdRun")?;
            let ev = Event::with_method(EventKind::InvR, method, args.clone());
            let (triple, _) = insert_event(&sigma, ev, &[])?;
            let trace2 = chop_triple(&seq.trace, triple)?;
            let i = max_modal_index(&seq.phi) + 1;
            let assigns = Stmt::seq_all(
                mdef.params
                    .iter()
                    .zip(args)
                    .map(|(p, a)| Stmt::Assign(p.clone(), a.clone()))
                    .collect(),
            );
            let body = Stmt::Block(
                mdef.params.clone(),
                Box::new(Stmt::seq(assigns, mdef.body.clone())),
            );
            let mut parts = cj;
            parts.push(Formula::modal_indexed(i, body, Formula::tt()));
            vec![(rebuild(parts, seq.pc.clone(), trace2), false)]
        }
        Rule::Interleave => {
            let mut premises = Vec::new();
            for (pos, c) in cj.iter().enumerate() {
                let Formula::Modal(idx, s, inner) = c else {
                    continue;
                };
                if s.is_empty() {
                    continue;
                }
                let r = head_rule(s)?;
                for bp in apply_base(seq, *idx, s, inner, &r, fault)? {
                    let mut parts = cj.clone();
                    parts[pos] = bp.replacement;
                    premises.push((rebuild(parts, bp.pc, bp.trace), bp.unrolls));
                }
            }
            if premises.is_empty() {
                return Err(RuleError::Shape {
                    rule: "Interleave",
                    expected: "a conjunction containing a non-empty modality".to_owned(),
                });
            }
            premises
        }
        Rule::Empty => {
            let pos = cj
                .iter()
                .position(|c| matches!(c, Formula::Modal(_, s, _) if s.is_empty()))
                .ok_or(RuleError::Shape {
                    rule: "Empty",
                    expected: "an empty modality `[~]phi` among the conjuncts".to_owned(),
                })?;
            let Formula::Modal(_, _, inner) = &cj[pos] else {
                unreachable!()
            };
            let mut parts = cj.clone();
            parts[pos] = (**inner).clone();
            vec![(rebuild(parts, seq.pc.clone(), seq.trace.clone()), false)]
        }
        base => {
            // Single-modality succedent: apply the rule to that modality.
            let modal_positions: Vec<usize> = cj
                .iter()
                .enumerate()
                .filter(|(_, c)| matches!(c, Formula::Modal(..)))
                .map(|(i, _)| i)
                .collect();
            if modal_positions.len() != 1 || cj.len() != 1 {
                return Err(RuleError::Shape {
                    rule: base.name(),
                    expected: "a single-modality succedent (use Interleave on conjunctions)"
                        .to_owned(),
                });
            }
            let pos = modal_positions[0];
            let Formula::Modal(idx, s, inner) = &cj[pos] else {
                unreachable!()
            };
            apply_base(seq, *idx, s, inner, base, fault)?
                .into_iter()
                .map(|bp| {
                    let mut parts = cj.clone();
                    parts[pos] = bp.replacement;
                    (rebuild(parts, bp.pc, bp.trace), bp.unrolls)
                })
                .collect()
        }
    };
    // Cut stutter premises identical to the conclusion.
    Ok(out.into_iter().filter(|(s, _)| s != seq).collect())
}

/// The rule the deterministic strategy selects for a sequent, left to right:
/// pending method activations first, then empty modalities, then the single
/// modality's head rule or the interleaving context rule.
pub fn choose_rule(prog: &Program, seq: &Sequent) -> Result<Rule, RuleError> {
    if let Some((method, args)) = mtd_run_candidate(prog, seq) {
        return Ok(Rule::MtdRun { method, args });
    }
    let cj = conjuncts(&seq.phi);
    for c in &cj {
        if c.has_modal() && !matches!(c, Formula::Modal(..)) {
            return Err(RuleError::Unsupported(format!(
                "modality nested under a connective in `{c}`"
            )));
        }
    }
    if cj
        .iter()
        .any(|c| matches!(c, Formula::Modal(_, s, _) if s.is_empty()))
    {
        return Ok(Rule::Empty);
    }
    let modal: Vec<&Formula> = cj
        .iter()
        .filter(|c| matches!(c, Formula::Modal(..)))
        .collect();
    match (cj.len(), modal.len()) {
        (_, 0) => Err(RuleError::Unsupported(
            "no modality left; the sequent is first-order".to_owned(),
        )),
        (1, 1) => {
            let Formula::Modal(_, s, _) = modal[0] else {
                unreachable!()
            };
            head_rule(s)
        }
        _ => Ok(Rule::Interleave),
    }
}

// ---------------------------------------------------------------------------
// First-order discharge
// ---------------------------------------------------------------------------

/// Iterator over all valuations of a symbol set into an integer interval.
struct Valuations {
    syms: Vec<Var>,
    lo: i64,
    hi: i64,
    cur: Vec<i64>,
    done: bool,
}

impl Valuations {
    fn new(syms: Vec<Var>, (lo, hi): (i64, i64)) -> Valuations {
        let n = syms.len();
        Valuations {
            syms,
            lo,
            hi,
            cur: vec![lo; n],
            done: lo > hi,
        }
    }
}

impl Iterator for Valuations {
    type Item = ConcretizationMapping;

    fn next(&mut self) -> Option<ConcretizationMapping> {
        if self.done {
            return None;
        }
        let out: ConcretizationMapping = self
            .syms
            .iter()
            .zip(&self.cur)
            .map(|(x, v)| (x.clone(), Value::Int(*v)))
            .collect();
        // Odometer increment.
        let mut i = self.cur.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.cur[i] < self.hi {
                self.cur[i] += 1;
                break;
            }
            self.cur[i] = self.lo;
        }
        Some(out)
    }
}

/// Candidate values for a quantified variable in a concrete state: every
/// integer of the domain, plus — for each id sort occurring in the state —
/// the ids present and one fresh id of that sort.
fn quantifier_candidates(state: &SymbolicState, (lo, hi): (i64, i64)) -> Vec<Value> {
    let mut out: Vec<Value> = (lo..=hi).map(Value::Int).collect();
    let mut max_by_sort: BTreeMap<u8, u32> = BTreeMap::new();
    let mut ids: BTreeSet<Value> = BTreeSet::new();
    for (_, se) in state.iter() {
        if let Some(v) = se.as_value() {
            let sort = match v {
                Value::Pid(n) => Some((0u8, *n)),
                Value::Mid(n) => Some((1, *n)),
                Value::Oid(n) => Some((2, *n)),
                Value::Fid(n) => Some((3, *n)),
                Value::Cid(n) => Some((4, *n)),
                _ => None,
            };
            if let Some((s, n)) = sort {
                ids.insert(*v);
                let e = max_by_sort.entry(s).or_insert(n);
                *e = (*e).max(n);
            }
        }
    }
    out.extend(ids);
    for (s, n) in max_by_sort {
        out.push(match s {
            0 => Value::Pid(n + 1),
            1 => Value::Mid(n + 1),
            2 => Value::Oid(n + 1),
            3 => Value::Fid(n + 1),
            _ => Value::Cid(n + 1),
        });
    }
    out
}

/// Two-valued evaluation of a modality-free formula in a concrete state.
/// Quantifiers enumerate [`quantifier_candidates`]; a candidate whose sort
/// does not fit the atoms (evaluation error) is skipped.
pub fn eval_fo(state: &SymbolicState, f: &Formula, domain: (i64, i64)) -> Result<bool, String> {
    match f {
        Formula::Atom(e) => match eval_expr(state, e) {
            Ok(SExpr::Val(Value::Bool(b))) => Ok(b),
            Ok(other) => Err(format!("atom `{e}` did not resolve to a boolean: `{other}`")),
            Err(err) => Err(format!("{err}")),
        },
        Formula::Not(g) => Ok(!eval_fo(state, g, domain)?),
        Formula::And(a, b) => Ok(eval_fo(state, a, domain)? && eval_fo(state, b, domain)?),
        Formula::Or(a, b) => Ok(eval_fo(state, a, domain)? || eval_fo(state, b, domain)?),
        Formula::Implies(a, b) => Ok(!eval_fo(state, a, domain)? || eval_fo(state, b, domain)?),
        Formula::Iff(a, b) => Ok(eval_fo(state, a, domain)? == eval_fo(state, b, domain)?),
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let forall = matches!(f, Formula::Forall(..));
            for cand in quantifier_candidates(state, domain) {
                let mut st = state.clone();
                st.bind_raw(v.clone(), SExpr::Val(cand));
                match eval_fo(&st, g, domain) {
                    Ok(b) => {
                        if forall && !b {
                            return Ok(false);
                        }
                        if !forall && b {
                            return Ok(true);
                        }
                    }
                    Err(_) => continue, // candidate outside the atom's sort
                }
            }
            Ok(forall)
        }
        Formula::Modal(..) => Err("modality in a first-order context".to_owned()),
    }
}

/// Result of discharging a first-order sequent over a finite domain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DischargeVerdict {
    /// Valid for every concretisation over the domain.
    Valid,
    /// A concretisation under which the sequent fails.
    Counter(ConcretizationMapping),
    /// The check could not be carried out (too many valuations, evaluation
    /// residue, …); never coerced to valid or invalid.
    Unknown(String),
}

/// Discharge a first-order sequent `Γ, pc ⇒ τ φ` by enumerating every
/// valuation of the trace's symbolic variables over the integer interval:
/// whenever the path condition holds and the first state of `ρ(τ)` satisfies
/// `Γ`, the last state must satisfy `φ`.
pub fn discharge_fo(
    seq: &Sequent,
    domain: (i64, i64),
    max_valuations: usize,
) -> DischargeVerdict {
    if seq.phi.has_modal() || seq.gamma.iter().any(Formula::has_modal) {
        return DischargeVerdict::Unknown("sequent is not first-order".to_owned());
    }
    let mut syms: BTreeSet<Var> = BTreeSet::new();
    for item in seq.trace.items() {
        if let Some(st) = item.as_state() {
            syms.extend(st.symb());
        }
    }
    let (lo, hi) = domain;
    if lo > hi {
        return DischargeVerdict::Unknown("empty domain".to_owned());
    }
    let width = (hi - lo + 1) as u128;
    let mut total: u128 = 1;
    for _ in 0..syms.len() {
        total = total.saturating_mul(width);
        if total > max_valuations as u128 {
            return DischargeVerdict::Unknown(format!(
                "{} symbols over a domain of {} values exceed the valuation budget",
                syms.len(),
                width
            ));
        }
    }
    'rho: for rho in Valuations::new(syms.into_iter().collect(), domain) {
        let rho_state = SymbolicState::from_bindings(
            rho.iter().map(|(x, v)| (x.clone(), SExpr::Val(*v))),
        );
        for e in seq.pc.iter() {
            match eval_expr(&rho_state, e) {
                Ok(SExpr::Val(Value::Bool(true))) => {}
                Ok(SExpr::Val(Value::Bool(false))) => continue 'rho,
                Ok(other) => {
                    return DischargeVerdict::Unknown(format!(
                        "path condition `{e}` did not resolve: `{other}`"
                    ))
                }
                Err(err) => return DischargeVerdict::Unknown(format!("{err}")),
            }
        }
        let conc = match concretize_trace(&rho, &seq.trace) {
            Ok(t) => t,
            Err(err) => return DischargeVerdict::Unknown(format!("{err}")),
        };
        let (Some(first), Some(last)) = (conc.first_state(), conc.last_state()) else {
            return DischargeVerdict::Unknown("trace has no states".to_owned());
        };
        for g in &seq.gamma {
            match eval_fo(first, g, domain) {
                Ok(true) => {}
                Ok(false) => continue 'rho,
                Err(err) => return DischargeVerdict::Unknown(err),
            }
        }
        match eval_fo(last, &seq.phi, domain) {
            Ok(true) => {}
            Ok(false) => return DischargeVerdict::Counter(rho),
            Err(err) => return DischargeVerdict::Unknown(err),
        }
    }
    DischargeVerdict::Valid
}

// ---------------------------------------------------------------------------
// Proof search
// ---------------------------------------------------------------------------

/// Deliberately corrupted rules, used by the soundness harness to show that
/// broken proofs are caught by the runtime re-check.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Fault {
    /// The Assign rule forgets the state update.
    AssignDropsUpdate,
}

#[derive(Clone, Debug)]
pub struct ProverOptions {
    /// Bound on rule applications along any proof branch.
    pub max_depth: usize,
    /// Bound on loop unfoldings along any proof branch.
    pub loop_unroll: usize,
    /// Integer interval for first-order discharge.
    pub domain: (i64, i64),
    /// Bound on enumerated valuations per discharge.
    pub max_valuations: usize,
    /// Optional rule corruption.
    pub fault: Option<Fault>,
}

impl Default for ProverOptions {
    fn default() -> ProverOptions {
        ProverOptions {
            max_depth: 400,
            loop_unroll: 8,
            domain: (-2, 2),
            max_valuations: 1_000_000,
            fault: None,
        }
    }
}

/// One node of a closed proof tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProofNode {
    pub rule: String,
    pub conclusion: String,
    pub premises: Vec<ProofNode>,
}

impl ProofNode {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::size).sum::<usize>()
    }
}

/// Outcome of a proof attempt.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    Proved(ProofNode),
    /// A first-order leaf failed with a concrete counter-valuation.
    Refuted {
        leaf: String,
        counter: ConcretizationMapping,
    },
    /// The attempt was blocked (depth or unroll bound, unsupported shape,
    /// indeterminate discharge) at the given leaf.
    Stuck { leaf: String, reason: String },
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved(_))
    }
}

enum ProveFailure {
    Refuted {
        leaf: String,
        counter: ConcretizationMapping,
    },
    Stuck {
        leaf: String,
        reason: String,
    },
}

/// Deterministic bounded proof search: the strategy picks one rule per
/// sequent ([`choose_rule`]), recurses into every premise left to right, and
/// discharges first-order leaves over the finite domain.
pub fn prove(prog: &Program, seq: &Sequent, opts: &ProverOptions) -> Verdict {
    match prove_seq(prog, seq, opts, opts.max_depth, opts.loop_unroll) {
        Ok(node) => Verdict::Proved(node),
        Err(ProveFailure::Refuted { leaf, counter }) => Verdict::Refuted { leaf, counter },
        Err(ProveFailure::Stuck { leaf, reason }) => Verdict::Stuck { leaf, reason },
    }
}

fn prove_seq(
    prog: &Program,
    seq: &Sequent,
    opts: &ProverOptions,
    depth: usize,
    unroll: usize,
) -> Result<ProofNode, ProveFailure> {
    let leaf = |rule: &str| ProofNode {
        rule: rule.to_owned(),
        conclusion: format!("{seq}"),
        premises: Vec::new(),
    };
    if !seq.pc.is_consistent() {
        return Ok(leaf("pc-ff"));
    }
    let has_pending_run = mtd_run_candidate(prog, seq).is_some();
    if !seq.phi.has_modal() && !has_pending_run {
        return match discharge_fo(seq, opts.domain, opts.max_valuations) {
            DischargeVerdict::Valid => Ok(leaf("discharge")),
            DischargeVerdict::Counter(counter) => Err(ProveFailure::Refuted {
                leaf: format!("{seq}"),
                counter,
            }),
            DischargeVerdict::Unknown(reason) => Err(ProveFailure::Stuck {
                leaf: format!("{seq}"),
                reason,
            }),
        };
    }
    if depth == 0 {
        return Err(ProveFailure::Stuck {
            leaf: format!("{seq}"),
            reason: "proof depth bound reached".to_owned(),
        });
    }
    let rule = if has_pending_run {
        let (method, args) = mtd_run_candidate(prog, seq).unwrap();
        Rule::MtdRun { method, args }
    } else {
        choose_rule(prog, seq).map_err(|e| ProveFailure::Stuck {
            leaf: format!("{seq}"),
            reason: format!("{e}"),
        })?
    };
    let premises = apply_internal(prog, seq, &rule, opts.fault).map_err(|e| {
        ProveFailure::Stuck {
            leaf: format!("{seq}"),
            reason: format!("{e}"),
        }
    })?;
    let mut children = Vec::new();
    for (premise, unrolls) in premises {
        let u = if unrolls {
            if unroll == 0 {
                return Err(ProveFailure::Stuck {
                    leaf: format!("{premise}"),
                    reason: "loop unroll bound reached".to_owned(),
                });
            }
            unroll - 1
        } else {
            unroll
        };
        children.push(prove_seq(prog, &premise, opts, depth - 1, u)?);
    }
    Ok(ProofNode {
        rule: rule.name().to_owned(),
        conclusion: format!("{seq}"),
        premises: children,
    })
}

/// Prove a whole-program contract `Γ ⇒ ⟨σ∗⟩ [main] φ`.
pub fn prove_program(
    prog: &Program,
    gamma: Vec<Formula>,
    post: Formula,
    opts: &ProverOptions,
) -> Verdict {
    let Some(main) = prog.main.clone() else {
        return Verdict::Stuck {
            leaf: "<no main>".to_owned(),
            reason: "program has no entry point".to_owned(),
        };
    };
    let mut refs: Vec<&Formula> = gamma.iter().collect();
    refs.push(&post);
    let vars = contract_vars(prog, &refs);
    let seq = entry_sequent(&vars, gamma, main, post);
    prove(prog, &seq, opts)
}

// ---------------------------------------------------------------------------
// Trace satisfaction
// ---------------------------------------------------------------------------

/// Three-valued truth: enumeration bounds can leave a modality undecided,
/// and such verdicts are reported as indeterminate, never coerced.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Truth {
    True,
    False,
    Indeterminate,
}

impl Truth {
    fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Indeterminate => Truth::Indeterminate,
        }
    }

    fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Indeterminate,
        }
    }

    fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Indeterminate,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Does a concrete trace satisfy a formula? Non-modal parts are evaluated in
/// the last state; a modality `[s]φ` re-enters the global enumerator from
/// that state and requires `φ` on the final state of every completed run.
/// Truncated runs make the verdict indeterminate; deadlocked and divergent
/// runs (cut by the stutter detector) contribute no completed trace and are
/// vacuous under the partial-correctness reading.
pub fn check_sat(
    prog: &Program,
    trace: &Trace,
    f: &Formula,
    bounds: &Bounds,
    domain: (i64, i64),
) -> Truth {
    match trace.last_state() {
        None => Truth::Indeterminate,
        Some(st) => eval_sat(prog, st, f, bounds, domain),
    }
}

fn eval_sat(
    prog: &Program,
    state: &SymbolicState,
    f: &Formula,
    bounds: &Bounds,
    domain: (i64, i64),
) -> Truth {
    match f {
        Formula::Atom(e) => match eval_expr(state, e) {
            Ok(SExpr::Val(Value::Bool(b))) => Truth::from_bool(b),
            _ => Truth::Indeterminate,
        },
        Formula::Not(g) => eval_sat(prog, state, g, bounds, domain).not(),
        Formula::And(a, b) => eval_sat(prog, state, a, bounds, domain)
            .and(eval_sat(prog, state, b, bounds, domain)),
        Formula::Or(a, b) => eval_sat(prog, state, a, bounds, domain)
            .or(eval_sat(prog, state, b, bounds, domain)),
        Formula::Implies(a, b) => eval_sat(prog, state, a, bounds, domain)
            .not()
            .or(eval_sat(prog, state, b, bounds, domain)),
        Formula::Iff(a, b) => {
            let ta = eval_sat(prog, state, a, bounds, domain);
            let tb = eval_sat(prog, state, b, bounds, domain);
            ta.and(tb).or(ta.not().and(tb.not()))
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let forall = matches!(f, Formula::Forall(..));
            let mut acc = Truth::from_bool(forall);
            for cand in quantifier_candidates(state, domain) {
                let mut st = state.clone();
                st.bind_raw(v.clone(), SExpr::Val(cand));
                let t = eval_sat(prog, &st, g, bounds, domain);
                acc = if forall { acc.and(t) } else { acc.or(t) };
            }
            acc
        }
        Formula::Modal(_, s, inner) => {
            let entry = Stmt::seq(prefix_assigns(state), (**s).clone());
            let mut p2 = prog.clone();
            p2.variant = Some(prog.variant());
            p2.main = Some(entry);
            let mut engine = Engine::new(&p2);
            engine.domain = domain;
            let result = match engine.enumerate(bounds) {
                Ok(r) => r,
                Err(_) => return Truth::Indeterminate,
            };
            let mut undecided = result.budget_exhausted;
            for (t, status) in &result.traces {
                match status {
                    Status::Truncated => undecided = true,
                    // No completed extension exists down this branch:
                    // vacuous for partial correctness.
                    Status::Deadlocked => {}
                    Status::Completed => match t.last_state() {
                        None => undecided = true,
                        Some(st2) => match eval_sat(prog, st2, inner, bounds, domain) {
                            Truth::False => return Truth::False,
                            Truth::Indeterminate => undecided = true,
                            Truth::True => {}
                        },
                    },
                }
            }
            if undecided {
                Truth::Indeterminate
            } else {
                Truth::True
            }
        }
    }
}

/// Assignments re-establishing a concrete state when a program fragment is
/// re-run through the enumerator (whose own initial state binds everything
/// to 0). Symbolic bindings are skipped; callers pass concrete states.
fn prefix_assigns(state: &SymbolicState) -> Stmt {
    Stmt::seq_all(
        state
            .iter()
            .filter_map(|(x, se)| {
                se.as_value()
                    .map(|v| Stmt::Assign(x.clone(), SExpr::Val(*v)))
            })
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Empirical soundness harness
// ---------------------------------------------------------------------------

/// A contract triple `{pre} s {post}`.
#[derive(Clone, Debug)]
pub struct HarnessCase {
    pub pre: Formula,
    pub stmt: Stmt,
    pub post: Formula,
}

/// Outcome of the empirical soundness run.
#[derive(Clone, Debug, Default)]
pub struct HarnessReport {
    pub total: usize,
    pub proved: usize,
    /// Cases the prover could not close, with the reason (not a soundness
    /// problem; they are simply not re-checked).
    pub skipped: Vec<(usize, String)>,
    /// Completed runs whose final state was checked against the post.
    pub runs_checked: usize,
    /// Proved triples contradicted by an enumerated run — any entry here is
    /// a soundness violation of the calculus (or of an injected fault).
    pub violations: Vec<String>,
    /// Runs that could not be decided (enumeration truncated, residue).
    pub indeterminate: usize,
}

/// For every triple: attempt a proof of `pre ⇒ ⟨σ∗⟩ [s] post`; when proved,
/// enumerate every initial valuation over the domain satisfying `pre`, run
/// the program through the global enumerator, and check `post` on the final
/// state of every completed run. Violations are collected, never silenced —
/// with an injected [`Fault`] they demonstrate the harness has teeth.
pub fn soundness_harness(
    variant: LanguageVariant,
    cases: &[HarnessCase],
    opts: &ProverOptions,
    bounds: &Bounds,
) -> HarnessReport {
    let mut report = HarnessReport {
        total: cases.len(),
        ..HarnessReport::default()
    };
    for (k, case) in cases.iter().enumerate() {
        let prog = Program::from_stmt(variant, case.stmt.clone());
        let mut vars = case.stmt.free_vars();
        vars.extend(case.pre.prog_vars());
        vars.extend(case.post.prog_vars());
        let seq = entry_sequent(&vars, vec![case.pre.clone()], case.stmt.clone(), case.post.clone());
        match prove(&prog, &seq, opts) {
            Verdict::Proved(_) => report.proved += 1,
            Verdict::Refuted { leaf, .. } => {
                report.skipped.push((k, format!("refuted at {leaf}")));
                continue;
            }
            Verdict::Stuck { reason, .. } => {
                report.skipped.push((k, reason));
                continue;
            }
        }
        let var_list: Vec<Var> = vars.iter().cloned().collect();
        for rho in Valuations::new(var_list, opts.domain) {
            let sigma0 = SymbolicState::from_bindings(
                rho.iter().map(|(x, v)| (x.clone(), SExpr::Val(*v))),
            );
            match eval_fo(&sigma0, &case.pre, opts.domain) {
                Ok(true) => {}
                _ => continue,
            }
            let entry = Stmt::seq(prefix_assigns(&sigma0), case.stmt.clone());
            let p2 = Program::from_stmt(variant, entry);
            let engine = Engine::new(&p2);
            let result = match engine.enumerate(bounds) {
                Ok(r) => r,
                Err(e) => {
                    report
                        .violations
                        .push(format!("case {k}: enumeration failed: {e}"));
                    continue;
                }
            };
            if result.budget_exhausted {
                report.indeterminate += 1;
            }
            for (t, status) in &result.traces {
                match status {
                    Status::Truncated => report.indeterminate += 1,
                    Status::Deadlocked => {}
                    Status::Completed => {
                        let Some(last) = t.last_state() else {
                            report.indeterminate += 1;
                            continue;
                        };
                        report.runs_checked += 1;
                        match eval_fo(last, &case.post, opts.domain) {
                            Ok(true) => {}
                            Ok(false) => report.violations.push(format!(
                                "case {k}: proved triple violated from {sigma0}: final state {last} fails `{}`",
                                case.post
                            )),
                            Err(err) => {
                                report.indeterminate += 1;
                                let _ = err;
                            }
                        }
                    }
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;
    use crate::lang::{parse, parse_stmt};

    fn seqv() -> LanguageVariant {
        LanguageVariant::Seq
    }

    fn atom(src: &str) -> Formula {
        Formula::Atom(crate::lang::parse_expr(src).expect("expr"))
    }

    fn entry_for(stmt: &Stmt, gamma: Vec<Formula>, post: Formula) -> Sequent {
        let mut vars = stmt.free_vars();
        for g in &gamma {
            vars.extend(g.prog_vars());
        }
        vars.extend(post.prog_vars());
        entry_sequent(&vars, gamma, stmt.clone(), post)
    }

    #[test]
    fn assign_sequence_proves_the_displayed_postcondition() {
        let stmt = parse_stmt("x := 1; y := x + 1", seqv()).expect("parse");
        let prog = Program::from_stmt(seqv(), stmt.clone());
        let seq = entry_for(&stmt, Vec::new(), atom("y == 2"));
        let v = prove(&prog, &seq, &ProverOptions::default());
        assert!(v.is_proved(), "expected a proof, got {v:?}");
    }

    #[test]
    fn wrong_postcondition_yields_a_counter_valuation() {
        let stmt = parse_stmt("x := 1", seqv()).expect("parse");
        let prog = Program::from_stmt(seqv(), stmt.clone());
        let seq = entry_for(&stmt, Vec::new(), atom("x == 2"));
        match prove(&prog, &seq, &ProverOptions::default()) {
            Verdict::Refuted { counter, .. } => {
                // The initial value of x is irrelevant; the first valuation
                // over the default domain is reported.
                assert_eq!(counter.get(&Var::new("X0")), Some(&Value::Int(-2)));
            }
            other => panic!("expected a refutation, got {other:?}"),
        }
    }

    #[test]
    fn input_postcondition_holds_on_the_default_domain() {
        let par = LanguageVariant::Par;
        let stmt = parse_stmt("input(x)", par).expect("parse");
        let prog = Program::from_stmt(par, stmt.clone());
        let seq = entry_for(&stmt, Vec::new(), atom("x >= -2"));
        assert!(prove(&prog, &seq, &ProverOptions::default()).is_proved());
        let seq2 = entry_for(&stmt, Vec::new(), atom("x >= 0"));
        assert!(matches!(
            prove(&prog, &seq2, &ProverOptions::default()),
            Verdict::Refuted { .. }
        ));
    }

    #[test]
    fn symbolic_discharge_example() {
        // Γ = {X > 0}, trace ends in [y ↦ X + 1]: y > 1 is valid over the
        // domain, y > 2 fails exactly at X = 1.
        let mut st = SymbolicState::new();
        st.bind_raw(Var::new("X"), SExpr::Star);
        st.bind_raw(
            Var::new("y"),
            SExpr::bin(Op::Add, SExpr::var("X"), SExpr::int(1)),
        );
        let x_pos = Formula::Atom(SExpr::bin(Op::Gt, SExpr::var("X"), SExpr::int(0)));
        let seq = Sequent {
            gamma: vec![x_pos],
            pc: PathCondition::new(),
            trace: Trace::singleton(st),
            phi: atom("y > 1"),
        };
        assert_eq!(discharge_fo(&seq, (-3, 3), 1_000_000), DischargeVerdict::Valid);
        let seq2 = Sequent {
            phi: atom("y > 2"),
            ..seq
        };
        match discharge_fo(&seq2, (-3, 3), 1_000_000) {
            DischargeVerdict::Counter(rho) => {
                assert_eq!(rho.get(&Var::new("X")), Some(&Value::Int(1)));
            }
            other => panic!("expected a counter-valuation, got {other:?}"),
        }
    }

    #[test]
    fn guard_with_true_precondition_proves() {
        let stmt = parse_stmt(":: x > 0; y := 1", LanguageVariant::Par).expect("parse");
        let prog = Program::from_stmt(LanguageVariant::Par, stmt.clone());
        let seq = entry_for(&stmt, vec![atom("x > 0")], atom("y == 1"));
        let v = prove(&prog, &seq, &ProverOptions::default());
        assert!(v.is_proved(), "expected a proof, got {v:?}");
    }

    #[test]
    fn concrete_loop_proves_with_unrolling() {
        let stmt = parse_stmt("x := 2; while x > 0 { x := x - 1 }", seqv()).expect("parse");
        let prog = Program::from_stmt(seqv(), stmt.clone());
        let seq = entry_for(&stmt, Vec::new(), atom("x == 0"));
        let v = prove(&prog, &seq, &ProverOptions::default());
        assert!(v.is_proved(), "expected a proof, got {v:?}");
    }

    #[test]
    fn par_atomic_example_proved_and_free_interleaving_refuted() {
        let par = LanguageVariant::Par;
        let at = parse_stmt("co atomic(x := 1; y := x + 1) || x := 2 oc", par).expect("parse");
        let prog = Program::from_stmt(par, at.clone());
        let seq = entry_for(&at, Vec::new(), atom("y == 2"));
        let v = prove(&prog, &seq, &ProverOptions::default());
        assert!(v.is_proved(), "expected a proof, got {v:?}");

        let co = parse_stmt("co x := 1; y := x + 1 || x := 2 oc", par).expect("parse");
        let prog2 = Program::from_stmt(par, co.clone());
        let seq2 = entry_for(&co, Vec::new(), atom("y == 2"));
        assert!(matches!(
            prove(&prog2, &seq2, &ProverOptions::default()),
            Verdict::Refuted { .. }
        ));
    }

    #[test]
    fn procedure_contract_proved_via_invocation_rules() {
        let src = "method m(a) { y := a } main { call(m, 2) }";
        let prog = parse(src, LanguageVariant::Proc).expect("parse");
        let v = prove_program(&prog, Vec::new(), atom("y == 2"), &ProverOptions::default());
        assert!(v.is_proved(), "expected a proof, got {v:?}");
    }

    #[test]
    fn divergence_is_vacuous_for_partial_correctness() {
        let prog = Program::from_stmt(seqv(), parse_stmt("skip", seqv()).expect("parse"));
        let loop_stmt = parse_stmt("while 1 == 1 { skip }", seqv()).expect("parse");
        let mut st = SymbolicState::new();
        st.bind_raw(Var::new("x"), SExpr::int(0));
        let tr = Trace::singleton(st);
        let f = Formula::modal(loop_stmt, Formula::Atom(SExpr::ff()));
        assert_eq!(
            check_sat(&prog, &tr, &f, &Bounds::default(), (-2, 2)),
            Truth::True
        );
    }

    #[test]
    fn truncated_enumeration_is_indeterminate() {
        let prog = Program::from_stmt(seqv(), parse_stmt("skip", seqv()).expect("parse"));
        let body = parse_stmt("x := 1; y := 2; z := 3", seqv()).expect("parse");
        let tr = Trace::singleton(SymbolicState::new());
        let f = Formula::modal(body, atom("z == 3"));
        let tight = Bounds {
            max_steps: 1,
            ..Bounds::default()
        };
        assert_eq!(
            check_sat(&prog, &tr, &f, &tight, (-2, 2)),
            Truth::Indeterminate
        );
        assert_eq!(
            check_sat(&prog, &tr, &f, &Bounds::default(), (-2, 2)),
            Truth::True
        );
    }

    #[test]
    fn harness_is_clean_normally_and_catches_the_injected_fault() {
        let cases = vec![
            HarnessCase {
                pre: Formula::tt(),
                stmt: parse_stmt("x := 1", seqv()).expect("parse"),
                post: atom("x == 1"),
            },
            HarnessCase {
                pre: atom("y > 0"),
                stmt: parse_stmt("x := y + 1", seqv()).expect("parse"),
                post: atom("x > 1"),
            },
            // Only provable by the corrupted Assign rule (which forgets the
            // update); the runtime re-check then contradicts the "proof".
            HarnessCase {
                pre: atom("x == 0"),
                stmt: parse_stmt("x := 1", seqv()).expect("parse"),
                post: atom("x == 0"),
            },
        ];
        let bounds = Bounds::default();
        let clean = soundness_harness(seqv(), &cases, &ProverOptions::default(), &bounds);
        assert_eq!(clean.proved, 2);
        assert_eq!(clean.skipped.len(), 1);
        assert!(clean.violations.is_empty(), "{:?}", clean.violations);
        assert!(clean.runs_checked > 0);

        let faulty_opts = ProverOptions {
            fault: Some(Fault::AssignDropsUpdate),
            ..ProverOptions::default()
        };
        let faulty = soundness_harness(seqv(), &cases, &faulty_opts, &bounds);
        assert!(
            !faulty.violations.is_empty(),
            "the corrupted Assign rule must surface violations"
        );
    }

    #[test]
    fn substitution_skips_modality_programs() {
        let stmt = parse_stmt("x := 5", seqv()).expect("parse");
        let f = Formula::and(
            atom("x + 1 > 0"),
            Formula::modal(stmt.clone(), atom("x == 5")),
        );
        let g = f.subst(&Var::new("x"), &SExpr::int(7));
        let cj = conjuncts(&g);
        assert_eq!(cj[0], Formula::Atom(SExpr::bin(
            Op::Gt,
            SExpr::bin(Op::Add, SExpr::int(7), SExpr::int(1)),
            SExpr::int(0),
        )));
        match &cj[1] {
            Formula::Modal(_, s, inner) => {
                assert_eq!(**s, stmt, "program text must not be rewritten");
                // The postcondition is rewritten; the program is not.
                assert_eq!(**inner, atom("7 == 5").clone());
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn apply_rule_reports_shape_mismatches() {
        let stmt = parse_stmt("x := 1", seqv()).expect("parse");
        let prog = Program::from_stmt(seqv(), stmt.clone());
        let seq = entry_for(&stmt, Vec::new(), atom("x == 1"));
        assert!(apply_rule(&prog, &seq, &Rule::Cond).is_err());
        let prems = apply_rule(&prog, &seq, &Rule::Assign).expect("assign applies");
        assert_eq!(prems.len(), 1);
        assert_eq!(prems[0].trace.len(), 2);
    }
}
