//! Abstract syntax, language variants, tables, and initial states.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{SExpr, Var};
use crate::state::SymbolicState;
use crate::value::Value;

/// The language stratum a program is written in. Gates which statement forms
/// parse and which composition engine runs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum LanguageVariant {
    /// Sequential while-language.
    Seq,
    /// Adds interleaving (`co … || … oc`), atomic, blocks, input, guards.
    Par,
    /// Adds asynchronous procedure calls.
    Proc,
    /// Shared-memory multiprocessor: send/receive/spawn over processes.
    Multi,
    /// Channel-based guarded language in the style of ProMeLa.
    PromelaMini,
    /// Actor language with classes and asynchronous calls.
    Actor,
    /// Active objects with futures and cooperative scheduling.
    ActiveObject,
}

impl LanguageVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LanguageVariant::Seq => "seq",
            LanguageVariant::Par => "par",
            LanguageVariant::Proc => "proc",
            LanguageVariant::Multi => "multi",
            LanguageVariant::PromelaMini => "promela",
            LanguageVariant::Actor => "actor",
            LanguageVariant::ActiveObject => "ao",
        }
    }

    pub fn from_name(s: &str) -> Option<LanguageVariant> {
        Some(match s {
            "seq" => LanguageVariant::Seq,
            "par" => LanguageVariant::Par,
            "proc" => LanguageVariant::Proc,
            "multi" => LanguageVariant::Multi,
            "promela" | "promela-mini" => LanguageVariant::PromelaMini,
            "actor" => LanguageVariant::Actor,
            "ao" | "active-object" => LanguageVariant::ActiveObject,
            _ => return None,
        })
    }
}

/// Statements of the unified surface language. `Empty` is the internal `∘`
/// continuation marker and never parses.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Stmt {
    Empty,
    Skip,
    Assign(Var, SExpr),
    If(SExpr, Box<Stmt>),
    While(SExpr, Box<Stmt>),
    Seq(Box<Stmt>, Box<Stmt>),
    Co(Box<Stmt>, Box<Stmt>),
    Atomic(Box<Stmt>),
    /// `{ x; y; s }` — local variable scope.
    Block(Vec<Var>, Box<Stmt>),
    Input(Var),
    Call(String, Vec<SExpr>),
    /// `:: g; s` — guarded statement.
    Guarded(SExpr, Box<Stmt>),
    /// `if :: g; s :: g; s fi` — blocking guarded selection.
    Select(Vec<(SExpr, Stmt)>),
    Goto(String),
    Labeled(String, Box<Stmt>),
    /// `send(e, dest)` (also written `c!e` in the channel variant).
    Send(SExpr, SExpr),
    /// `receive(x, src)` (also written `c?x`).
    Receive(Var, SExpr),
    /// `x := spawn(m, ē)`.
    Spawn(Var, String, Vec<SExpr>),
    /// `e!m(ē)` — actor asynchronous call without a future.
    AsyncSend(SExpr, String, Vec<SExpr>),
    /// `x := e!m(ē)` — asynchronous call binding a future.
    AsyncAssign(Var, SExpr, String, Vec<SExpr>),
    /// `x := new C(ē)`.
    New(Var, String, Vec<SExpr>),
    AwaitBool(SExpr),
    /// `await e?` — suspend until the future is resolved.
    AwaitFut(SExpr),
    /// `x := e.get`.
    Get(Var, SExpr),
    Return(SExpr),
    /// `this.m(ē)` — synchronous self-call.
    SyncCall(String, Vec<SExpr>),
}

impl Stmt {
    pub fn seq(a: Stmt, b: Stmt) -> Stmt {
        match (a, b) {
            (Stmt::Empty, b) => b,
            (a, Stmt::Empty) => a,
            (a, b) => Stmt::Seq(Box::new(a), Box::new(b)),
        }
    }

    /// Fold a list of statements into a right-nested sequence.
    pub fn seq_all(stmts: Vec<Stmt>) -> Stmt {
        let mut out = Stmt::Empty;
        for s in stmts.into_iter().rev() {
            out = Stmt::seq(s, out);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Stmt::Empty)
    }

    /// The first executable statement, looking through sequences, labels and
    /// decl-free blocks.
    pub fn leading(&self) -> &Stmt {
        match self {
            Stmt::Seq(a, _) => a.leading(),
            Stmt::Labeled(_, s) => s.leading(),
            Stmt::Block(decls, s) if decls.is_empty() => s.leading(),
            _ => self,
        }
    }

    /// True if the task owning this continuation is suspended (its next
    /// executable statement is an await).
    pub fn is_suspended(&self) -> bool {
        matches!(self.leading(), Stmt::AwaitBool(_) | Stmt::AwaitFut(_))
    }

    /// Free program variables: everything read or written, minus variables
    /// shadowed by block declarations.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out);
        out
    }

    fn collect_free_vars(&self, out: &mut BTreeSet<Var>) {
        let mut exprs: Vec<&SExpr> = Vec::new();
        match self {
            Stmt::Empty | Stmt::Skip | Stmt::Goto(_) => {}
            Stmt::Assign(x, e) => {
                out.insert(x.clone());
                exprs.push(e);
            }
            Stmt::If(e, s) | Stmt::While(e, s) | Stmt::Guarded(e, s) => {
                exprs.push(e);
                s.collect_free_vars(out);
            }
            Stmt::Seq(a, b) | Stmt::Co(a, b) => {
                a.collect_free_vars(out);
                b.collect_free_vars(out);
            }
            Stmt::Atomic(s) | Stmt::Labeled(_, s) => s.collect_free_vars(out),
            Stmt::Block(decls, s) => {
                let mut inner = BTreeSet::new();
                s.collect_free_vars(&mut inner);
                for d in decls {
                    inner.remove(d);
                }
                out.extend(inner);
            }
            Stmt::Input(x) => {
                out.insert(x.clone());
            }
            Stmt::Call(_, es) | Stmt::SyncCall(_, es) => exprs.extend(es.iter()),
            Stmt::Select(branches) => {
                for (g, s) in branches {
                    exprs.push(g);
                    s.collect_free_vars(out);
                }
            }
            Stmt::Send(e, d) => {
                exprs.push(e);
                exprs.push(d);
            }
            Stmt::Receive(x, e) => {
                out.insert(x.clone());
                exprs.push(e);
            }
            Stmt::Spawn(x, _, es) => {
                out.insert(x.clone());
                exprs.extend(es.iter());
            }
            Stmt::AsyncSend(callee, _, es) => {
                exprs.push(callee);
                exprs.extend(es.iter());
            }
            Stmt::AsyncAssign(x, callee, _, es) => {
                out.insert(x.clone());
                exprs.push(callee);
                exprs.extend(es.iter());
            }
            Stmt::New(x, _, es) => {
                out.insert(x.clone());
                exprs.extend(es.iter());
            }
            Stmt::AwaitBool(e) | Stmt::AwaitFut(e) | Stmt::Return(e) => exprs.push(e),
            Stmt::Get(x, e) => {
                out.insert(x.clone());
                exprs.push(e);
            }
        }
        for e in exprs {
            e.collect_vars(out);
        }
    }

    /// Textual substitution of program variable `x` by `y`, respecting block
    /// shadowing. `y` must be fresh for the statement.
    pub fn subst_var(&self, x: &Var, y: &Var) -> Stmt {
        let e = SExpr::Var(y.clone());
        self.subst_var_expr(x, &e)
    }

    /// Substitute variable `x` by expression `e` in every expression
    /// position; assignment-target occurrences require `e` to be a variable.
    pub fn subst_var_expr(&self, x: &Var, e: &SExpr) -> Stmt {
        let sub = |ex: &SExpr| ex.subst(x, e);
        let sub_lhs = |v: &Var| -> Var {
            if v == x {
                match e {
                    SExpr::Var(y) => y.clone(),
                    // Substituting a non-variable into a write position cannot
                    // happen for well-formed renamings; keep the original.
                    _ => v.clone(),
                }
            } else {
                v.clone()
            }
        };
        match self {
            Stmt::Empty => Stmt::Empty,
            Stmt::Skip => Stmt::Skip,
            Stmt::Assign(v, ex) => Stmt::Assign(sub_lhs(v), sub(ex)),
            Stmt::If(g, s) => Stmt::If(sub(g), Box::new(s.subst_var_expr(x, e))),
            Stmt::While(g, s) => Stmt::While(sub(g), Box::new(s.subst_var_expr(x, e))),
            Stmt::Seq(a, b) => Stmt::Seq(
                Box::new(a.subst_var_expr(x, e)),
                Box::new(b.subst_var_expr(x, e)),
            ),
            Stmt::Co(a, b) => Stmt::Co(
                Box::new(a.subst_var_expr(x, e)),
                Box::new(b.subst_var_expr(x, e)),
            ),
            Stmt::Atomic(s) => Stmt::Atomic(Box::new(s.subst_var_expr(x, e))),
            Stmt::Block(decls, s) => {
                if decls.contains(x) {
                    self.clone()
                } else {
                    Stmt::Block(decls.clone(), Box::new(s.subst_var_expr(x, e)))
                }
            }
            Stmt::Input(v) => Stmt::Input(sub_lhs(v)),
            Stmt::Call(m, es) => Stmt::Call(m.clone(), es.iter().map(sub).collect()),
            Stmt::Guarded(g, s) => Stmt::Guarded(sub(g), Box::new(s.subst_var_expr(x, e))),
            Stmt::Select(branches) => Stmt::Select(
                branches
                    .iter()
                    .map(|(g, s)| (sub(g), s.subst_var_expr(x, e)))
                    .collect(),
            ),
            Stmt::Goto(l) => Stmt::Goto(l.clone()),
            Stmt::Labeled(l, s) => Stmt::Labeled(l.clone(), Box::new(s.subst_var_expr(x, e))),
            Stmt::Send(ex, d) => Stmt::Send(sub(ex), sub(d)),
            Stmt::Receive(v, d) => Stmt::Receive(sub_lhs(v), sub(d)),
            Stmt::Spawn(v, m, es) => {
                Stmt::Spawn(sub_lhs(v), m.clone(), es.iter().map(sub).collect())
            }
            Stmt::AsyncSend(c, m, es) => {
                Stmt::AsyncSend(sub(c), m.clone(), es.iter().map(sub).collect())
            }
            Stmt::AsyncAssign(v, c, m, es) => Stmt::AsyncAssign(
                sub_lhs(v),
                sub(c),
                m.clone(),
                es.iter().map(sub).collect(),
            ),
            Stmt::New(v, cls, es) => {
                Stmt::New(sub_lhs(v), cls.clone(), es.iter().map(sub).collect())
            }
            Stmt::AwaitBool(g) => Stmt::AwaitBool(sub(g)),
            Stmt::AwaitFut(g) => Stmt::AwaitFut(sub(g)),
            Stmt::Get(v, ex) => Stmt::Get(sub_lhs(v), sub(ex)),
            Stmt::Return(ex) => Stmt::Return(sub(ex)),
            Stmt::SyncCall(m, es) => Stmt::SyncCall(m.clone(), es.iter().map(sub).collect()),
        }
    }
}

fn fmt_args(f: &mut fmt::Formatter<'_>, es: &[SExpr]) -> fmt::Result {
    write!(f, "(")?;
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{e}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Empty => write!(f, "∘"),
            Stmt::Skip => write!(f, "skip"),
            Stmt::Assign(x, e) => write!(f, "{x} := {e}"),
            Stmt::If(e, s) => write!(f, "if {e} {{ {s} }}"),
            Stmt::While(e, s) => write!(f, "while {e} {{ {s} }}"),
            Stmt::Seq(a, b) => write!(f, "{a}; {b}"),
            Stmt::Co(a, b) => write!(f, "co {a} || {b} oc"),
            Stmt::Atomic(s) => write!(f, "atomic({s})"),
            Stmt::Block(decls, s) => {
                write!(f, "{{ ")?;
                for d in decls {
                    write!(f, "{d}; ")?;
                }
                write!(f, "{s} }}")
            }
            Stmt::Input(x) => write!(f, "input({x})"),
            Stmt::Call(m, es) => {
                write!(f, "call({m}")?;
                for e in es {
                    write!(f, ", {e}")?;
                }
                write!(f, ")")
            }
            Stmt::Guarded(g, s) => write!(f, ":: {g}; {s}"),
            Stmt::Select(branches) => {
                write!(f, "if")?;
                for (g, s) in branches {
                    write!(f, " :: {g}; {s}")?;
                }
                write!(f, " fi")
            }
            Stmt::Goto(l) => write!(f, "goto {l}"),
            Stmt::Labeled(l, s) => write!(f, "label {l}: {s}"),
            Stmt::Send(e, d) => write!(f, "send({e}, {d})"),
            Stmt::Receive(x, d) => write!(f, "receive({x}, {d})"),
            Stmt::Spawn(x, m, es) => {
                write!(f, "{x} := spawn({m}")?;
                for e in es {
                    write!(f, ", {e}")?;
                }
                write!(f, ")")
            }
            Stmt::AsyncSend(c, m, es) => {
                write!(f, "{c}!{m}")?;
                fmt_args(f, es)
            }
            Stmt::AsyncAssign(x, c, m, es) => {
                write!(f, "{x} := {c}!{m}")?;
                fmt_args(f, es)
            }
            Stmt::New(x, cls, es) => {
                write!(f, "{x} := new {cls}")?;
                fmt_args(f, es)
            }
            Stmt::AwaitBool(e) => write!(f, "await {e}"),
            Stmt::AwaitFut(e) => write!(f, "await {e}?"),
            Stmt::Get(x, e) => write!(f, "{x} := {e}.get"),
            Stmt::Return(e) => write!(f, "return {e}"),
            Stmt::SyncCall(m, es) => {
                write!(f, "this.{m}")?;
                fmt_args(f, es)
            }
        }
    }
}

/// A method (or procedure) declaration.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Method {
    pub params: Vec<Var>,
    pub body: Stmt,
}

/// A class declaration: fields plus methods.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Class {
    pub fields: Vec<Var>,
    pub methods: BTreeMap<String, Method>,
}

/// A process declaration in the channel variant. `labels` maps each label to
/// the code from that point to the end of the body.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProcDef {
    pub name: String,
    pub body: Stmt,
    pub labels: BTreeMap<String, Stmt>,
}

/// A channel declaration; `owner` is the pid of the declaring process for
/// process-local channels, `None` for global channels.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChannelDecl {
    pub var: Var,
    pub owner: Option<u32>,
}

/// A parsed program with its tables.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub variant: Option<LanguageVariant>,
    pub main: Option<Stmt>,
    pub methods: BTreeMap<String, Method>,
    pub classes: BTreeMap<String, Class>,
    pub procs: Vec<ProcDef>,
    pub channels: Vec<ChannelDecl>,
}

impl Program {
    pub fn variant(&self) -> LanguageVariant {
        self.variant.unwrap_or(LanguageVariant::Seq)
    }

    /// Wrap a bare statement as a program of the given variant (used by the
    /// calculus when a modality re-enters the enumerator).
    pub fn from_stmt(variant: LanguageVariant, s: Stmt) -> Program {
        Program {
            variant: Some(variant),
            main: Some(s),
            ..Program::default()
        }
    }

    /// Global method lookup for the class variants; method names are unique
    /// across classes there.
    pub fn lookup_method(&self, m: &str) -> Option<(&String, &Class, &Method)> {
        for (cname, class) in &self.classes {
            if let Some(mth) = class.methods.get(m) {
                return Some((cname, class, mth));
            }
        }
        None
    }

    pub fn channel_owner(&self, cid: u32) -> Option<u32> {
        self.channels.get(cid as usize).and_then(|c| c.owner)
    }
}

/// The initial state: every program variable bound to the default value 0.
/// Formal parameters and block-declared locals are excluded (they are
/// renamed or substituted away before first read). The class variants start
/// from the empty state; the channel variant additionally binds channel
/// variables to their channel ids.
pub fn initial_state(p: &Program) -> SymbolicState {
    let mut state = SymbolicState::new();
    match p.variant() {
        LanguageVariant::Actor | LanguageVariant::ActiveObject => state,
        LanguageVariant::PromelaMini => {
            let chan_vars: BTreeSet<Var> = p.channels.iter().map(|c| c.var.clone()).collect();
            for proc in &p.procs {
                for x in proc.body.free_vars() {
                    if !chan_vars.contains(&x) {
                        state.bind_raw(x, SExpr::int(0));
                    }
                }
            }
            for (k, c) in p.channels.iter().enumerate() {
                state.bind_raw(c.var.clone(), SExpr::Val(Value::Cid(k as u32)));
            }
            state
        }
        _ => {
            let mut vars = BTreeSet::new();
            if let Some(main) = &p.main {
                vars.extend(main.free_vars());
            }
            for m in p.methods.values() {
                let mut body_vars = m.body.free_vars();
                for par in &m.params {
                    body_vars.remove(par);
                }
                vars.extend(body_vars);
            }
            for x in vars {
                state.bind_raw(x, SExpr::int(0));
            }
            state
        }
    }
}

/// Pick a fresh program variable derived from `base` by appending primes,
/// avoiding the state domain and a set of names in use.
pub fn fresh_prog_var(base: &Var, taken: &BTreeSet<Var>) -> Var {
    let mut name = base.as_str().to_owned();
    loop {
        name.push('\'');
        let v = Var::new(&name);
        if !taken.contains(&v) {
            return v;
        }
    }
}
