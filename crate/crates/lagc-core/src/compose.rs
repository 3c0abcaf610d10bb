//! Global composition: per-variant step rules over configurations, the
//! well-formedness-directed concretisation search, and bounded enumeration
//! of all maximal concrete global traces.
//!
//! A configuration pairs the concrete tagged global trace built so far with
//! the variant's task structure. One step selects a runnable task (or a
//! pending method activation), evaluates it locally to conditioned symbolic
//! traces, searches for concretisation mappings that satisfy the path
//! condition and keep the extended trace well formed, and chops the
//! concretised piece onto the global trace.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::event::{Event, EventKind, TagError};
use crate::expr::{EvalError, SExpr, Var};
use crate::lang::{initial_state, LanguageVariant, Program, Stmt};
use crate::localeval::{
    activate_actor_method, activate_ao_method, activate_proc_method, val, Ctx, LocalError,
    LocalStep, DEFAULT_ATOMIC_BOUND,
};
use crate::state::{ConcretizationMapping, ConcretizeError, SymbolicState};
use crate::trace::{chop, concretize_trace, ChopError, Trace, TracePiece};
use crate::value::Value;
use crate::wf::{ChannelOwners, WfChecker, WfPolicy};

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// A runnable continuation together with the identity it executes under.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Task {
    pub cont: Stmt,
    /// The executing object (class variants).
    pub this: Option<Value>,
    /// The future this task must resolve (active objects).
    pub destiny: Option<Value>,
    /// Index of the owning process declaration (channel variant); gives the
    /// task its label table.
    pub proc: Option<usize>,
}

impl Task {
    fn plain(cont: Stmt) -> Task {
        Task {
            cont,
            this: None,
            destiny: None,
            proc: None,
        }
    }
}

/// The per-variant task structure. Finished continuations are simplified
/// away, and pools are kept sorted with empty entries removed, so structural
/// equality coincides with configuration equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum TaskPool {
    /// One continuation (sequential and interleaved variants).
    Single(Option<Task>),
    /// A multiset of continuations sharing one processor (procedure variant).
    Pool(Vec<Task>),
    /// Processor id to task multiset (message-passing and channel variants).
    PerPid(BTreeMap<u32, Vec<Task>>),
    /// Object id to task multiset (class variants).
    PerObj(BTreeMap<u32, Vec<Task>>),
}

impl TaskPool {
    pub fn is_terminal(&self) -> bool {
        match self {
            TaskPool::Single(t) => t.is_none(),
            TaskPool::Pool(ts) => ts.is_empty(),
            TaskPool::PerPid(m) | TaskPool::PerObj(m) => m.values().all(Vec::is_empty),
        }
    }

    /// Canonical form: multisets sorted, empty map entries removed.
    fn canonical(mut self) -> TaskPool {
        match &mut self {
            TaskPool::Single(_) => {}
            TaskPool::Pool(ts) => ts.sort(),
            TaskPool::PerPid(m) | TaskPool::PerObj(m) => {
                m.retain(|_, ts| !ts.is_empty());
                for ts in m.values_mut() {
                    ts.sort();
                }
            }
        }
        self
    }
}

/// A global configuration: concrete tagged trace plus task structure.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Configuration {
    pub sh: Trace,
    pub tasks: TaskPool,
}

impl Configuration {
    pub fn is_terminal(&self) -> bool {
        self.tasks.is_terminal()
    }
}

/// The cooperative-scheduling invariant of the active-object variant: every
/// object has at most one task that is not suspended at an await.
pub fn ao_single_active(cfg: &Configuration) -> bool {
    match &cfg.tasks {
        TaskPool::PerObj(m) => m
            .values()
            .all(|ts| ts.iter().filter(|t| !t.cont.is_suspended()).count() <= 1),
        _ => true,
    }
}

/// A search node: the configuration plus the incremental well-formedness
/// checker that has consumed exactly the events of `cfg.sh`.
#[derive(Clone, Debug)]
pub struct Node {
    pub cfg: Configuration,
    pub depth: usize,
    checker: WfChecker,
}

// ---------------------------------------------------------------------------
// Engine parameters
// ---------------------------------------------------------------------------

/// Sizes of the finite id pools, one per id sort.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PoolSizes {
    pub mids: u32,
    pub pids: u32,
    pub oids: u32,
    pub fids: u32,
}

pub const DEFAULT_POOL_SIZE: u32 = 8;

impl Default for PoolSizes {
    fn default() -> PoolSizes {
        PoolSizes {
            mids: DEFAULT_POOL_SIZE,
            pids: DEFAULT_POOL_SIZE,
            oids: DEFAULT_POOL_SIZE,
            fids: DEFAULT_POOL_SIZE,
        }
    }
}

/// Exploration bounds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Bounds {
    /// Maximum composition steps along one branch.
    pub max_steps: usize,
    /// Maximum number of collected traces.
    pub max_traces: usize,
}

pub const DEFAULT_MAX_STEPS: usize = 1_000;
pub const DEFAULT_MAX_TRACES: usize = 10_000;

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds {
            max_steps: DEFAULT_MAX_STEPS,
            max_traces: DEFAULT_MAX_TRACES,
        }
    }
}

/// How a maximal run ended.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Status {
    /// All task structures empty.
    Completed,
    /// Tasks remain but no step applies.
    Deadlocked,
    /// The step bound was hit.
    Truncated,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::Deadlocked => "deadlocked",
            Status::Truncated => "truncated",
        }
    }
}

/// The enumerated trace set with per-trace statuses.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RunResult {
    pub traces: Vec<(Trace, Status)>,
    pub budget_exhausted: bool,
}

/// Merge raw per-branch results into the canonical output: sorted,
/// deduplicated, truncated to the trace budget.
pub fn finalize(parts: Vec<RunResult>, max_traces: usize) -> RunResult {
    let mut budget_exhausted = parts.iter().any(|p| p.budget_exhausted);
    let mut traces: Vec<(Trace, Status)> = parts.into_iter().flat_map(|p| p.traces).collect();
    traces.sort();
    traces.dedup();
    if traces.len() > max_traces {
        traces.truncate(max_traces);
        budget_exhausted = true;
    }
    RunResult {
        traces,
        budget_exhausted,
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Faults that abort an exploration (expression errors and internal
/// composition defects), as opposed to branches that are merely pruned.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EngineError {
    Local(LocalError),
    Eval(EvalError),
    Concretize(ConcretizeError),
    Chop(ChopError),
    Tag(TagError),
    /// The program has no runnable code for the variant.
    NoEntryPoint,
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Local(e) => write!(f, "{e}"),
            EngineError::Eval(e) => write!(f, "{e}"),
            EngineError::Concretize(e) => write!(f, "{e}"),
            EngineError::Chop(e) => write!(f, "{e}"),
            EngineError::Tag(e) => write!(f, "{e}"),
            EngineError::NoEntryPoint => write!(f, "program has no runnable code"),
        }
    }
}

impl From<LocalError> for EngineError {
    fn from(e: LocalError) -> Self {
        EngineError::Local(e)
    }
}
impl From<EvalError> for EngineError {
    fn from(e: EvalError) -> Self {
        EngineError::Eval(e)
    }
}
impl From<ConcretizeError> for EngineError {
    fn from(e: ConcretizeError) -> Self {
        EngineError::Concretize(e)
    }
}
impl From<ChopError> for EngineError {
    fn from(e: ChopError) -> Self {
        EngineError::Chop(e)
    }
}
impl From<TagError> for EngineError {
    fn from(e: TagError) -> Self {
        EngineError::Tag(e)
    }
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

/// The composition engine: program tables plus all tunable parameters.
pub struct Engine<'p> {
    pub program: &'p Program,
    pub variant: LanguageVariant,
    pub policy: WfPolicy,
    pub owners: ChannelOwners,
    /// Inclusive range enumerated for input statements.
    pub domain: (i64, i64),
    pub pools: PoolSizes,
    pub atomic_bound: usize,
}

pub const DEFAULT_DOMAIN: (i64, i64) = (-2, 2);

impl<'p> Engine<'p> {
    pub fn new(program: &'p Program) -> Engine<'p> {
        let variant = program.variant();
        Engine {
            program,
            variant,
            policy: WfPolicy::default_for(variant),
            owners: program
                .channels
                .iter()
                .enumerate()
                .filter_map(|(k, c)| c.owner.map(|o| (k as u32, o)))
                .collect(),
            domain: DEFAULT_DOMAIN,
            pools: PoolSizes::default(),
            atomic_bound: DEFAULT_ATOMIC_BOUND,
        }
    }

    fn ctx_for(&self, task: &Task) -> Ctx<'p> {
        Ctx {
            program: self.program,
            variant: self.variant,
            this_obj: task.this,
            destiny: task.destiny,
            labels: task.proc.map(|i| &self.program.procs[i].labels),
            atomic_bound: self.atomic_bound,
        }
    }

    /// Id values that are spoken for before any event mentions them.
    fn reserved_ids(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        match self.variant {
            LanguageVariant::Multi => {
                out.insert(Value::Pid(0));
            }
            LanguageVariant::PromelaMini => {
                for i in 0..self.program.procs.len() {
                    out.insert(Value::Pid(i as u32));
                }
            }
            LanguageVariant::Actor => {
                out.insert(Value::Oid(0));
            }
            LanguageVariant::ActiveObject => {
                out.insert(Value::Oid(0));
                out.insert(Value::Fid(0));
            }
            _ => {}
        }
        out
    }

    /// The variant's initial configuration with its seeded trace prefix.
    pub fn initial(&self) -> Result<Node, EngineError> {
        let init = initial_state(self.program);
        let main = || {
            self.program
                .main
                .clone()
                .ok_or(EngineError::NoEntryPoint)
        };
        let (sh, tasks) = match self.variant {
            LanguageVariant::Seq | LanguageVariant::Par => (
                Trace::singleton(init),
                TaskPool::Single(Some(Task::plain(main()?))),
            ),
            LanguageVariant::Proc => (
                Trace::singleton(init),
                TaskPool::Pool(vec![Task::plain(main()?)]),
            ),
            LanguageVariant::Multi => {
                // Thread creation for the initial process: a spawn event for
                // `main` targeting processor 0 is already in the trace.
                let ev = Event::with_method(
                    EventKind::Spawn,
                    "main",
                    vec![SExpr::Val(Value::Pid(0))],
                )
                .tagged(Value::Pid(0))?;
                let sh = Trace::singleton(init.clone())
                    .push_event(ev)
                    .push_state(init);
                let mut m = BTreeMap::new();
                m.insert(0u32, vec![Task::plain(main()?)]);
                (sh, TaskPool::PerPid(m))
            }
            LanguageVariant::PromelaMini => {
                if self.program.procs.is_empty() {
                    return Err(EngineError::NoEntryPoint);
                }
                let mut m = BTreeMap::new();
                for (i, p) in self.program.procs.iter().enumerate() {
                    let mut t = Task::plain(p.body.clone());
                    t.proc = Some(i);
                    m.insert(i as u32, vec![t]);
                }
                (Trace::singleton(init), TaskPool::PerPid(m))
            }
            LanguageVariant::Actor | LanguageVariant::ActiveObject => {
                // The initial object already exists: its creation event opens
                // the trace and the main task runs on it.
                let o0 = Value::Oid(0);
                let ev = Event::new(EventKind::New, vec![SExpr::Val(o0)]).tagged(o0)?;
                let sh = Trace::singleton(init.clone())
                    .push_event(ev)
                    .push_state(init);
                let mut task = Task::plain(main()?);
                task.this = Some(o0);
                if self.variant == LanguageVariant::ActiveObject {
                    task.destiny = Some(Value::Fid(0));
                }
                let mut m = BTreeMap::new();
                m.insert(0u32, vec![task]);
                (sh, TaskPool::PerObj(m))
            }
        };
        let mut checker = WfChecker::new(self.policy.clone(), self.owners.clone());
        for ev in sh.events() {
            debug_assert!(checker.extend(ev), "seeded event violates wf");
            let _ = &checker;
        }
        Ok(Node {
            cfg: Configuration {
                sh,
                tasks: tasks.canonical(),
            },
            depth: 0,
            checker,
        })
    }

    // -- step ---------------------------------------------------------------

    /// All successor nodes of `node`, sorted and deduplicated by
    /// configuration. An empty result on a non-terminal configuration means
    /// deadlock.
    pub fn successors(&self, node: &Node) -> Result<Vec<Node>, EngineError> {
        let info = ShInfo::scan(&node.cfg.sh, self.reserved_ids());
        let mut out: Vec<Node> = Vec::new();
        match &node.cfg.tasks {
            TaskPool::Single(opt) => {
                if let Some(task) = opt {
                    for (step, nt) in self.task_steps(node, task)? {
                        self.emit(node, &info, &step, Value::Pid(0), TaskPool::Single(nt), &mut out)?;
                    }
                }
            }
            TaskPool::Pool(tasks) => {
                // Thread creation first: pending invocations activate before
                // any ordinary task step.
                let mut act = Vec::new();
                for m in self.counting_pending_methods(&info, None) {
                    let ctx = Ctx {
                        atomic_bound: self.atomic_bound,
                        ..Ctx::new(self.program)
                    };
                    let sigma = last_state(&node.cfg.sh);
                    let step = activate_proc_method(&ctx, sigma, &m)?;
                    let mut ts = tasks.clone();
                    if !step.cont.is_empty() {
                        ts.push(Task::plain(step.cont.clone()));
                    }
                    self.emit(node, &info, &step, Value::Pid(0), TaskPool::Pool(ts).canonical(), &mut act)?;
                }
                if !act.is_empty() {
                    out = act;
                } else {
                    for (i, task) in tasks.iter().enumerate() {
                        for (step, nt) in self.task_steps(node, task)? {
                            let mut ts = tasks.clone();
                            ts.remove(i);
                            if let Some(t) = nt {
                                ts.push(t);
                            }
                            self.emit(node, &info, &step, Value::Pid(0), TaskPool::Pool(ts).canonical(), &mut out)?;
                        }
                    }
                }
            }
            TaskPool::PerPid(pool) => {
                let mut act = Vec::new();
                if self.variant == LanguageVariant::Multi {
                    for (p, m) in self.multi_pending_activations(&info) {
                        let ctx = Ctx {
                            atomic_bound: self.atomic_bound,
                            ..Ctx::new(self.program)
                        };
                        let sigma = last_state(&node.cfg.sh);
                        let step = activate_proc_method(&ctx, sigma, &m)?;
                        let mut pool2 = pool.clone();
                        if !step.cont.is_empty() {
                            pool2.entry(p).or_default().push(Task::plain(step.cont.clone()));
                        }
                        self.emit(node, &info, &step, Value::Pid(p), TaskPool::PerPid(pool2).canonical(), &mut act)?;
                    }
                }
                if !act.is_empty() {
                    out = act;
                } else {
                    for (p, tasks) in pool {
                        for (i, task) in tasks.iter().enumerate() {
                            for (step, nt) in self.task_steps(node, task)? {
                                let mut pool2 = pool.clone();
                                let ts = pool2.get_mut(p).expect("pool entry exists");
                                ts.remove(i);
                                if let Some(t) = nt {
                                    ts.push(t);
                                }
                                self.emit(node, &info, &step, Value::Pid(*p), TaskPool::PerPid(pool2).canonical(), &mut out)?;
                            }
                        }
                    }
                }
            }
            TaskPool::PerObj(pool) => {
                let ao = self.variant == LanguageVariant::ActiveObject;
                let mut act = Vec::new();
                for (o, m, fut) in self.actor_pending_activations(&info) {
                    let tasks_o = pool.get(&o).map(Vec::as_slice).unwrap_or(&[]);
                    if ao && !tasks_o.iter().all(|t| t.cont.is_suspended()) {
                        // A new method may only start when no task of the
                        // object is active.
                        continue;
                    }
                    let ctx = Ctx {
                        atomic_bound: self.atomic_bound,
                        ..Ctx::new(self.program)
                    };
                    let sigma = last_state(&node.cfg.sh);
                    let oid = Value::Oid(o);
                    let (step, task) = if ao {
                        let fut = fut.expect("future id of a pending invocation");
                        let step = activate_ao_method(&ctx, sigma, &m, &oid, fut)?;
                        let mut t = Task::plain(step.cont.clone());
                        t.this = Some(oid);
                        t.destiny = Some(fut);
                        (step, t)
                    } else {
                        let step = activate_actor_method(&ctx, sigma, &m, &oid)?;
                        let mut t = Task::plain(step.cont.clone());
                        t.this = Some(oid);
                        (step, t)
                    };
                    let mut pool2 = pool.clone();
                    if !task.cont.is_empty() {
                        pool2.entry(o).or_default().push(task);
                    }
                    self.emit(node, &info, &step, oid, TaskPool::PerObj(pool2).canonical(), &mut act)?;
                }
                let progress_allowed = |o: u32, i: usize| {
                    if !ao {
                        return true;
                    }
                    // Cooperative scheduling: a task may only run while every
                    // other task of its object is suspended.
                    pool[&o]
                        .iter()
                        .enumerate()
                        .all(|(j, t)| j == i || t.cont.is_suspended())
                };
                if !ao && !act.is_empty() {
                    out = act;
                } else {
                    out = act;
                    for (o, tasks) in pool {
                        for (i, task) in tasks.iter().enumerate() {
                            if !progress_allowed(*o, i) {
                                continue;
                            }
                            for (step, nt) in self.task_steps(node, task)? {
                                let mut pool2 = pool.clone();
                                let ts = pool2.get_mut(o).expect("pool entry exists");
                                ts.remove(i);
                                if let Some(t) = nt {
                                    ts.push(t);
                                }
                                self.emit(node, &info, &step, Value::Oid(*o), TaskPool::PerObj(pool2).canonical(), &mut out)?;
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.cfg.cmp(&b.cfg));
        out.dedup_by(|a, b| a.cfg == b.cfg);
        Ok(out)
    }

    /// Local evaluation of one task, paired with the surviving task (if any)
    /// for each step.
    fn task_steps(
        &self,
        node: &Node,
        task: &Task,
    ) -> Result<Vec<(LocalStep, Option<Task>)>, EngineError> {
        let ctx = self.ctx_for(task);
        let sigma = last_state(&node.cfg.sh);
        let steps = val(&ctx, sigma, &task.cont)?;
        Ok(steps
            .into_iter()
            .map(|step| {
                let nt = if step.cont.is_empty() {
                    None
                } else {
                    Some(Task {
                        cont: step.cont.clone(),
                        ..task.clone()
                    })
                };
                (step, nt)
            })
            .collect())
    }

    /// Concretise, check and commit one local step under every admissible
    /// mapping, pushing the resulting nodes.
    fn emit(
        &self,
        node: &Node,
        info: &ShInfo<'_>,
        step: &LocalStep,
        tag: Value,
        tasks: TaskPool,
        out: &mut Vec<Node>,
    ) -> Result<(), EngineError> {
        for rho in self.concretizations(info, step, tag)? {
            if let Some((sh, checker)) = self.commit(&node.cfg.sh, &node.checker, step, &rho, tag)? {
                out.push(Node {
                    cfg: Configuration {
                        sh,
                        tasks: tasks.clone(),
                    },
                    depth: node.depth + 1,
                    checker,
                });
            }
        }
        Ok(())
    }

    // -- activation candidate scans -----------------------------------------

    /// Methods with at least one pending invocation under plain invocation
    /// counting (procedure variant; `tag` restricts to one processor).
    fn counting_pending_methods(&self, info: &ShInfo<'_>, tag: Option<Value>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for ev in &info.events {
            if ev.kind != EventKind::Inv {
                continue;
            }
            if tag.is_some() && ev.tag != tag {
                continue;
            }
            let Some(m) = &ev.method else { continue };
            if !self.program.methods.contains_key(m) || out.contains(m) {
                continue;
            }
            let Some(vals) = values(&ev.payload) else { continue };
            if info.counting_excess(m, &vals, tag) > 0 {
                out.insert(m.clone());
            }
        }
        out
    }

    /// Pending activations `(processor, method)` in the message-passing
    /// variant: local invocations on the processor plus spawns targeting it.
    fn multi_pending_activations(&self, info: &ShInfo<'_>) -> BTreeSet<(u32, String)> {
        let mut out = BTreeSet::new();
        for ev in &info.events {
            let (p, m, vals) = match ev.kind {
                EventKind::Inv => {
                    let Some(Value::Pid(p)) = ev.tag else { continue };
                    let Some(m) = &ev.method else { continue };
                    let Some(vals) = values(&ev.payload) else { continue };
                    (p, m, vals)
                }
                EventKind::Spawn => {
                    let Some(Value::Pid(p)) = ev.last_value().copied() else {
                        continue;
                    };
                    let Some(m) = &ev.method else { continue };
                    let Some(vals) = values(ev.leading(1)) else { continue };
                    (p, m, vals)
                }
                _ => continue,
            };
            if !self.program.methods.contains_key(m) {
                continue;
            }
            if info.multi_excess(p, m, &vals) > 0 {
                out.insert((p, m.clone()));
            }
        }
        out
    }

    /// Pending activations `(object, method, future)` in the class variants:
    /// invocation events without a reaction yet. The future component is the
    /// invocation's last payload value in the active-object variant.
    fn actor_pending_activations(&self, info: &ShInfo<'_>) -> BTreeSet<(u32, String, Option<Value>)> {
        let ao = self.variant == LanguageVariant::ActiveObject;
        let mut out = BTreeSet::new();
        for ev in &info.events {
            if ev.kind != EventKind::Inv {
                continue;
            }
            let Some(id) = ev.last_value().copied() else { continue };
            if info.matched_invr.contains(&id) {
                continue;
            }
            let Some(Value::Oid(o)) = ev.penultimate_value().copied() else {
                continue;
            };
            let Some(m) = &ev.method else { continue };
            if self.program.lookup_method(m).is_none() {
                continue;
            }
            out.insert((o, m.clone(), if ao { Some(id) } else { None }));
        }
        out
    }

    // -- concretisation search ----------------------------------------------

    /// All concretisation mappings of a local step's symbolic variables that
    /// respect the events already in `sh`: id creation takes the smallest
    /// unused id of its sort (bounded by the pool), matching-role symbols
    /// unify against events in the trace, input values range over the
    /// configured domain.
    pub fn find_concretizations(
        &self,
        sh: &Trace,
        step: &LocalStep,
        tag: Value,
    ) -> Result<Vec<ConcretizationMapping>, EngineError> {
        let info = ShInfo::scan(sh, self.reserved_ids());
        self.concretizations(&info, step, tag)
    }

    fn concretizations(
        &self,
        info: &ShInfo<'_>,
        step: &LocalStep,
        tag: Value,
    ) -> Result<Vec<ConcretizationMapping>, EngineError> {
        let mut partials: Vec<Partial> = vec![Partial::default()];
        for ev in step.body.events() {
            let mut next = Vec::new();
            for p in &partials {
                for cand in self.event_candidates(info, ev, tag, p) {
                    if let Some(merged) = p.merged(&cand) {
                        next.push(merged);
                    }
                }
            }
            partials = next;
            if partials.is_empty() {
                break;
            }
        }
        Ok(partials.into_iter().map(|p| p.rho).collect())
    }

    /// Candidate bindings for the symbolic variables of one event.
    fn event_candidates(
        &self,
        info: &ShInfo<'_>,
        ev: &Event,
        tag: Value,
        partial: &Partial,
    ) -> Vec<Cand> {
        match ev.kind {
            EventKind::Inp => {
                let Some(y) = payload_var(ev, 0) else {
                    return vec![Cand::empty()];
                };
                (self.domain.0..=self.domain.1)
                    .map(|d| Cand::bind(y.clone(), Value::Int(d)))
                    .collect()
            }
            EventKind::Send => self.fresh_cand(ev.payload.last(), info, partial),
            EventKind::Spawn => self.fresh_cand(ev.payload.last(), info, partial),
            EventKind::New => self.fresh_cand(ev.payload.first(), info, partial),
            EventKind::Inv => self.fresh_cand(ev.payload.last(), info, partial),
            EventKind::Receive => self.receive_cands(info, ev, tag, partial),
            EventKind::CompR => self.compr_cands(info, ev),
            EventKind::InvR => self.invr_cands(info, ev, tag, partial),
            EventKind::Comp => vec![Cand::empty()],
        }
    }

    /// Bind an id-creating symbol to the smallest unused id of its sort;
    /// pool exhaustion yields no candidate and prunes the branch.
    fn fresh_cand(&self, slot: Option<&SExpr>, info: &ShInfo<'_>, partial: &Partial) -> Vec<Cand> {
        let Some(SExpr::Var(x)) = slot else {
            // Already concrete (e.g. a local invocation with explicit args).
            return vec![Cand::empty()];
        };
        if let Some(v) = partial.rho.get(x) {
            return vec![Cand::bind(x.clone(), *v)];
        }
        let (mk, cap): (fn(u32) -> Value, u32) = match x.as_str().chars().next() {
            Some('P') => (Value::Pid, self.pools.pids),
            Some('X') => (Value::Oid, self.pools.oids),
            Some('F') => (Value::Fid, self.pools.fids),
            _ => (Value::Mid, self.pools.mids),
        };
        (0..cap)
            .map(mk)
            .find(|v| !info.ids.contains(v) && !partial.claimed.contains(v))
            .map(|v| {
                let mut c = Cand::bind(x.clone(), v);
                c.claims.push(v);
                c
            })
            .into_iter()
            .collect()
    }

    /// Unify a receive `(value, peer, id)` against every compatible
    /// unconsumed send already in the trace.
    fn receive_cands(&self, info: &ShInfo<'_>, ev: &Event, tag: Value, partial: &Partial) -> Vec<Cand> {
        let Some(y) = payload_var(ev, 0) else { return Vec::new() };
        let Some(peer) = ev.penultimate_value().copied() else {
            return Vec::new();
        };
        let Some(i) = ev.payload.last().and_then(as_var) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for send in &info.events {
            if send.kind != EventKind::Send {
                continue;
            }
            let Some(id) = send.last_value().copied() else { continue };
            if info.consumed_mids.contains(&id) || partial.claimed.contains(&id) {
                continue;
            }
            let ok = match peer {
                Value::Cid(_) => send.penultimate_value() == Some(&peer),
                _ => {
                    send.penultimate_value() == Some(&tag) && send.tag == Some(peer)
                }
            };
            if !ok {
                continue;
            }
            let Some(v) = send.payload.first().and_then(|se| se.as_value()).copied() else {
                continue;
            };
            let mut c = Cand::bind(y.clone(), v);
            c.binds.push((i.clone(), id));
            c.claims.push(id);
            out.push(c);
        }
        out
    }

    /// Unify a completion-reaction `(future, value)` against the completion
    /// events of that future.
    fn compr_cands(&self, info: &ShInfo<'_>, ev: &Event) -> Vec<Cand> {
        let Some(fut) = ev.payload.first().and_then(|se| se.as_value()).copied() else {
            return Vec::new();
        };
        let Some(v) = ev.payload.last().and_then(as_var) else {
            return Vec::new();
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for comp in &info.events {
            if comp.kind != EventKind::Comp {
                continue;
            }
            if comp.payload.first().and_then(|se| se.as_value()) != Some(&fut) {
                continue;
            }
            let Some(val) = comp.last_value().copied() else { continue };
            if seen.insert(val) {
                out.push(Cand::bind(v.clone(), val));
            }
        }
        out
    }

    /// Bind the argument symbols of an invocation reaction against the
    /// pending invocations it may answer.
    fn invr_cands(&self, info: &ShInfo<'_>, ev: &Event, tag: Value, partial: &Partial) -> Vec<Cand> {
        let Some(m) = &ev.method else { return Vec::new() };
        match self.variant {
            LanguageVariant::Proc | LanguageVariant::Multi => {
                // Payload is exactly the argument symbols; enumerate the
                // distinct argument tuples with more invocations (or spawns)
                // than reactions.
                let arg_vars: Option<Vec<&Var>> = ev.payload.iter().map(as_var).collect();
                let Some(arg_vars) = arg_vars else { return Vec::new() };
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for src in &info.events {
                    let vals = match src.kind {
                        EventKind::Inv if src.method.as_ref() == Some(m) => {
                            if self.variant == LanguageVariant::Multi && src.tag != Some(tag) {
                                continue;
                            }
                            values(&src.payload)
                        }
                        EventKind::Spawn
                            if self.variant == LanguageVariant::Multi
                                && src.method.as_ref() == Some(m)
                                && src.last_value() == Some(&tag) =>
                        {
                            values(src.leading(1))
                        }
                        _ => continue,
                    };
                    let Some(vals) = vals else { continue };
                    if vals.len() != arg_vars.len() || !seen.insert(vals.clone()) {
                        continue;
                    }
                    let excess = if self.variant == LanguageVariant::Multi {
                        let Value::Pid(p) = tag else { continue };
                        info.multi_excess(p, m, &vals)
                    } else {
                        info.counting_excess(m, &vals, None)
                    };
                    if excess > 0 {
                        out.push(Cand {
                            binds: arg_vars.iter().map(|&x| x.clone()).zip(vals).collect(),
                            claims: Vec::new(),
                        });
                    }
                }
                out
            }
            LanguageVariant::Actor => {
                // Payload `args…, id`: unify against each unanswered
                // invocation targeting this object.
                let Some(i) = ev.payload.last().and_then(as_var) else {
                    return Vec::new();
                };
                let arg_vars: Option<Vec<&Var>> = ev.leading(1).iter().map(as_var).collect();
                let Some(arg_vars) = arg_vars else { return Vec::new() };
                let mut out = Vec::new();
                for inv in &info.events {
                    if inv.kind != EventKind::Inv || inv.method.as_ref() != Some(m) {
                        continue;
                    }
                    if inv.penultimate_value() != Some(&tag) {
                        continue;
                    }
                    let Some(id) = inv.last_value().copied() else { continue };
                    if info.matched_invr.contains(&id) || partial.claimed.contains(&id) {
                        continue;
                    }
                    let Some(vals) = values(inv.leading(2)) else { continue };
                    if vals.len() != arg_vars.len() {
                        continue;
                    }
                    let mut c = Cand {
                        binds: arg_vars.iter().map(|&x| x.clone()).zip(vals).collect(),
                        claims: vec![id],
                    };
                    c.binds.push((i.clone(), id));
                    out.push(c);
                }
                out
            }
            LanguageVariant::ActiveObject => {
                // Payload `args…, caller, future` with the future already
                // concrete: the matching invocation is unique.
                let Some(fut) = ev.last_value().copied() else { return Vec::new() };
                let Some(caller_var) = ev
                    .payload
                    .len()
                    .checked_sub(2)
                    .and_then(|k| as_var(&ev.payload[k]))
                else {
                    return Vec::new();
                };
                let arg_vars: Option<Vec<&Var>> = ev.leading(2).iter().map(as_var).collect();
                let Some(arg_vars) = arg_vars else { return Vec::new() };
                let mut out = Vec::new();
                for inv in &info.events {
                    if inv.kind != EventKind::Inv || inv.method.as_ref() != Some(m) {
                        continue;
                    }
                    if inv.last_value() != Some(&fut) || inv.penultimate_value() != Some(&tag) {
                        continue;
                    }
                    let Some(caller) = inv.tag else { continue };
                    let Some(vals) = values(inv.leading(2)) else { continue };
                    if vals.len() != arg_vars.len() {
                        continue;
                    }
                    let mut c = Cand {
                        binds: arg_vars.iter().map(|&x| x.clone()).zip(vals).collect(),
                        claims: Vec::new(),
                    };
                    c.binds.push((caller_var.clone(), caller));
                    out.push(c);
                }
                out
            }
            _ => Vec::new(),
        }
    }

    // -- commit -------------------------------------------------------------

    /// Apply one concretisation to a local step and chop the result onto the
    /// global trace: path condition must hold, fields of freshly created
    /// objects are renamed to their concrete owner, concretised symbols are
    /// dropped from the states, events are tagged, and every new event must
    /// pass the incremental well-formedness check. `None` means the branch
    /// is infeasible.
    fn commit(
        &self,
        sh: &Trace,
        checker: &WfChecker,
        step: &LocalStep,
        rho: &ConcretizationMapping,
        tag: Value,
    ) -> Result<Option<(Trace, WfChecker)>, EngineError> {
        let rho_state = SymbolicState::from_bindings(
            rho.iter().map(|(x, v)| (x.clone(), SExpr::Val(*v))),
        );
        let residual = step.pc.eval_under(&rho_state)?;
        if !residual.is_empty() {
            return Ok(None);
        }
        // Fields introduced under a symbolic object name move to the
        // concrete object.
        let mut renames: BTreeMap<Var, Var> = BTreeMap::new();
        for item in step.body.items() {
            if let crate::trace::Item::State(s) = item {
                for x in s.dom() {
                    if renames.contains_key(x) {
                        continue;
                    }
                    if let Some((fd, sym)) = x.as_str().split_once('@') {
                        if let Some(v) = rho.get(&Var::new(sym)) {
                            renames.insert(x.clone(), Var::new(&alloc::format!("{fd}@{v}")));
                        }
                    }
                }
            }
        }
        let renamed = if renames.is_empty() {
            step.body.clone()
        } else {
            step.body.rename_vars(&renames)
        };
        let conc = concretize_trace(rho, &renamed)?;
        let dropped = conc.drop_state_vars(&rho.keys().cloned().collect());
        let tagged = dropped.tag(tag)?;
        let mut ck = checker.clone();
        for ev in tagged.events() {
            if !ck.extend(ev) {
                return Ok(None);
            }
        }
        let piece = chop(
            &TracePiece::unconditional(sh.clone()),
            &TracePiece::unconditional(tagged),
        )?;
        Ok(Some((piece.body, ck)))
    }

    // -- enumeration --------------------------------------------------------

    /// Exhaustive bounded enumeration from the initial configuration.
    pub fn enumerate(&self, bounds: &Bounds) -> Result<RunResult, EngineError> {
        let raw = self.explore(self.initial()?, &[], bounds)?;
        Ok(finalize(vec![raw], bounds.max_traces))
    }

    /// Depth-first exploration of one subtree. `ancestors` are the
    /// configurations on the path above `node` (used to cut zero-growth
    /// cycles); results are raw (unsorted, not deduplicated).
    pub fn explore(
        &self,
        node: Node,
        ancestors: &[Configuration],
        bounds: &Bounds,
    ) -> Result<RunResult, EngineError> {
        let mut acc = RunResult::default();
        let mut path: Vec<Configuration> = ancestors.to_owned();
        self.dfs(node, bounds, &mut path, &mut acc)?;
        Ok(acc)
    }

    fn dfs(
        &self,
        node: Node,
        bounds: &Bounds,
        path: &mut Vec<Configuration>,
        acc: &mut RunResult,
    ) -> Result<(), EngineError> {
        if acc.traces.len() > bounds.max_traces {
            acc.budget_exhausted = true;
            return Ok(());
        }
        if node.depth >= bounds.max_steps {
            let status = if node.cfg.is_terminal() {
                Status::Completed
            } else {
                Status::Truncated
            };
            acc.traces.push((node.cfg.sh, status));
            return Ok(());
        }
        path.push(node.cfg.clone());
        // Even with every task pool empty the configuration may not be
        // maximal: a pending invocation can still activate a new task.
        let succs: Vec<Node> = self
            .successors(&node)?
            .into_iter()
            .filter(|n| !path.contains(&n.cfg))
            .collect();
        if succs.is_empty() {
            let status = if node.cfg.is_terminal() {
                Status::Completed
            } else {
                // Either genuinely stuck or only zero-growth cycles remain;
                // both are maximal runs that never complete.
                Status::Deadlocked
            };
            acc.traces.push((node.cfg.sh.clone(), status));
        } else {
            for s in succs {
                self.dfs(s, bounds, path, acc)?;
                if acc.budget_exhausted {
                    break;
                }
            }
        }
        path.pop();
        Ok(())
    }
}

fn last_state(sh: &Trace) -> &SymbolicState {
    sh.last_state().expect("global trace ends with a state")
}

// ---------------------------------------------------------------------------
// Trace scans and partial mappings
// ---------------------------------------------------------------------------

/// One pass over the global trace's events, cached for a whole step.
struct ShInfo<'a> {
    events: Vec<&'a Event>,
    /// Every id-sorted value mentioned by any event or reserved up front.
    ids: BTreeSet<Value>,
    /// Message ids already consumed by a receive.
    consumed_mids: BTreeSet<Value>,
    /// Invocation ids (or futures) already answered by a reaction.
    matched_invr: BTreeSet<Value>,
}

impl<'a> ShInfo<'a> {
    fn scan(sh: &'a Trace, reserved: BTreeSet<Value>) -> ShInfo<'a> {
        let events = sh.events();
        let mut ids = reserved;
        let mut consumed_mids = BTreeSet::new();
        let mut matched_invr = BTreeSet::new();
        for ev in &events {
            if let Some(t) = ev.tag {
                if is_id(&t) {
                    ids.insert(t);
                }
            }
            for se in &ev.payload {
                if let Some(v) = se.as_value() {
                    if is_id(v) {
                        ids.insert(*v);
                    }
                }
            }
            match ev.kind {
                EventKind::Receive => {
                    if let Some(id) = ev.last_value() {
                        consumed_mids.insert(*id);
                    }
                }
                EventKind::InvR => {
                    if let Some(id) = ev.last_value() {
                        matched_invr.insert(*id);
                    }
                }
                _ => {}
            }
        }
        ShInfo {
            events,
            ids,
            consumed_mids,
            matched_invr,
        }
    }

    /// Pending invocations of `m` with arguments `vals` under plain counting
    /// (optionally restricted to one processor tag).
    fn counting_excess(&self, m: &str, vals: &[Value], tag: Option<Value>) -> usize {
        let mut invs = 0usize;
        let mut invrs = 0usize;
        for ev in &self.events {
            if ev.method.as_deref() != Some(m) {
                continue;
            }
            if tag.is_some() && ev.tag != tag {
                continue;
            }
            match ev.kind {
                EventKind::Inv if values(&ev.payload).as_deref() == Some(vals) => invs += 1,
                EventKind::InvR if values(&ev.payload).as_deref() == Some(vals) => invrs += 1,
                _ => {}
            }
        }
        invs.saturating_sub(invrs)
    }

    /// Pending activations of `m(vals)` on processor `p`: local invocations
    /// on `p` plus spawns targeting `p`, minus reactions on `p`.
    fn multi_excess(&self, p: u32, m: &str, vals: &[Value]) -> usize {
        let tag = Some(Value::Pid(p));
        let mut pending = 0usize;
        let mut invrs = 0usize;
        for ev in &self.events {
            if ev.method.as_deref() != Some(m) {
                continue;
            }
            match ev.kind {
                EventKind::Inv
                    if ev.tag == tag && values(&ev.payload).as_deref() == Some(vals) =>
                {
                    pending += 1
                }
                EventKind::Spawn
                    if ev.last_value() == Some(&Value::Pid(p))
                        && values(ev.leading(1)).as_deref() == Some(vals) =>
                {
                    pending += 1
                }
                EventKind::InvR
                    if ev.tag == tag && values(&ev.payload).as_deref() == Some(vals) =>
                {
                    invrs += 1
                }
                _ => {}
            }
        }
        pending.saturating_sub(invrs)
    }
}

fn is_id(v: &Value) -> bool {
    matches!(
        v,
        Value::Pid(_) | Value::Mid(_) | Value::Oid(_) | Value::Fid(_) | Value::Cid(_)
    )
}

fn values(payload: &[SExpr]) -> Option<Vec<Value>> {
    payload.iter().map(|se| se.as_value().copied()).collect()
}

fn as_var(se: &SExpr) -> Option<&Var> {
    match se {
        SExpr::Var(x) => Some(x),
        _ => None,
    }
}

fn payload_var(ev: &Event, i: usize) -> Option<&Var> {
    ev.payload.get(i).and_then(as_var)
}

/// A partially built concretisation: the mapping so far plus the ids it has
/// allocated or consumed (so later events of the same step cannot reuse
/// them).
#[derive(Clone, Default)]
struct Partial {
    rho: ConcretizationMapping,
    claimed: BTreeSet<Value>,
}

impl Partial {
    fn merged(&self, cand: &Cand) -> Option<Partial> {
        let mut out = self.clone();
        for (x, v) in &cand.binds {
            match out.rho.get(x) {
                Some(old) if old != v => return None,
                _ => {
                    out.rho.insert(x.clone(), *v);
                }
            }
        }
        out.claimed.extend(cand.claims.iter().copied());
        Some(out)
    }
}

/// One way to bind an event's symbols.
#[derive(Clone, Debug)]
struct Cand {
    binds: Vec<(Var, Value)>,
    claims: Vec<Value>,
}

impl Cand {
    fn empty() -> Cand {
        Cand {
            binds: Vec::new(),
            claims: Vec::new(),
        }
    }

    fn bind(x: Var, v: Value) -> Cand {
        Cand {
            binds: vec![(x, v)],
            claims: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use alloc::string::ToString;

    fn run(src: &str, v: LanguageVariant) -> RunResult {
        let prog = parse(src, v).expect("fixture parses");
        Engine::new(&prog)
            .enumerate(&Bounds::default())
            .expect("fixture enumerates")
    }

    fn finals(res: &RunResult) -> Vec<String> {
        res.traces
            .iter()
            .filter(|(_, s)| *s == Status::Completed)
            .map(|(t, _)| t.last_state().expect("ends with state").to_string())
            .collect()
    }

    #[test]
    fn sequential_program_yields_the_exact_displayed_trace() {
        let res = run("x := 1; y := x + 1", LanguageVariant::Seq);
        assert!(!res.budget_exhausted);
        assert_eq!(res.traces.len(), 1);
        let (trace, status) = &res.traces[0];
        assert_eq!(*status, Status::Completed);
        let items: Vec<String> = trace
            .items()
            .iter()
            .map(|it| match it {
                crate::trace::Item::State(s) => s.to_string(),
                crate::trace::Item::Event(e) => e.to_string(),
            })
            .collect();
        assert_eq!(
            items,
            vec![
                "[x -> 0, y -> 0]".to_string(),
                "[x -> 1, y -> 0]".to_string(),
                "[x -> 1, y -> 2]".to_string(),
            ]
        );
    }

    #[test]
    fn interleaving_example_has_exactly_three_traces() {
        let res = run("co x := 1; y := x + 1 || x := 2 oc", LanguageVariant::Par);
        let fs = finals(&res);
        assert_eq!(res.traces.len(), 3);
        assert_eq!(fs.len(), 3);
        let set: BTreeSet<String> = fs.into_iter().collect();
        let expect: BTreeSet<String> = [
            "[x -> 2, y -> 2]",
            "[x -> 2, y -> 3]",
            "[x -> 1, y -> 2]",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(set, expect);
    }

    #[test]
    fn atomic_section_removes_the_interleaved_trace() {
        let res = run(
            "co atomic(x := 1; y := x + 1) || x := 2 oc",
            LanguageVariant::Par,
        );
        let fs = finals(&res);
        assert_eq!(fs.len(), 2);
        for f in &fs {
            assert!(f.contains("y -> 2"), "final {f} should have y = 2");
        }
    }

    #[test]
    fn procedure_call_example_has_three_traces_and_one_final_state() {
        let res = run(
            "method m(x) { y := x; x := x + 1 } main { call(m, 1); z := 2 }",
            LanguageVariant::Proc,
        );
        let fs = finals(&res);
        assert_eq!(fs.len(), 3, "finals: {fs:?}");
        for f in &fs {
            assert_eq!(f, "[x' -> 2, y -> 1, z -> 2]");
        }
    }

    #[test]
    fn active_object_example_matches_the_worked_derivation() {
        let src = "class C { method m(n) { n := n + 1; return n } } \
                   main { { a; x; f; y; a := 1; x := new C(); f := x!m(a); await f?; y := f.get } }";
        let res = run(src, LanguageVariant::ActiveObject);
        let completed: Vec<&Trace> = res
            .traces
            .iter()
            .filter(|(_, s)| *s == Status::Completed)
            .map(|(t, _)| t)
            .collect();
        assert!(!completed.is_empty());
        assert!(res
            .traces
            .iter()
            .all(|(_, s)| *s == Status::Completed));
        let int = |n: i64| SExpr::Val(Value::Int(n));
        let oid = |n: u32| SExpr::Val(Value::Oid(n));
        let fid = |n: u32| SExpr::Val(Value::Fid(n));
        for t in completed {
            assert_eq!(
                t.last_state().unwrap().to_string(),
                "[a' -> 1, f' -> f1, n' -> 2, x' -> o1, y' -> 2]"
            );
            let evs = t.events();
            let kinds: Vec<EventKind> = evs.iter().map(|e| e.kind).collect();
            assert_eq!(
                kinds,
                vec![
                    EventKind::New,
                    EventKind::New,
                    EventKind::Inv,
                    EventKind::InvR,
                    EventKind::Comp,
                    EventKind::CompR,
                    EventKind::CompR,
                ]
            );
            assert_eq!(evs[1].payload, vec![oid(1)]);
            assert_eq!(evs[1].tag, Some(Value::Oid(0)));
            assert_eq!(evs[2].method.as_deref(), Some("m"));
            assert_eq!(evs[2].payload, vec![int(1), oid(1), fid(1)]);
            assert_eq!(evs[2].tag, Some(Value::Oid(0)));
            assert_eq!(evs[3].method.as_deref(), Some("m"));
            assert_eq!(evs[3].payload, vec![int(1), oid(0), fid(1)]);
            assert_eq!(evs[3].tag, Some(Value::Oid(1)));
            assert_eq!(evs[4].payload, vec![fid(1), int(2)]);
            assert_eq!(evs[4].tag, Some(Value::Oid(1)));
            for ev in &evs[5..] {
                assert_eq!(ev.payload, vec![fid(1), int(2)]);
                assert_eq!(ev.tag, Some(Value::Oid(0)));
            }
        }
    }

    #[test]
    fn channel_send_then_receive_completes_once() {
        let res = run(
            "chan c;\nproctype a() { c!5 }\nproctype b() { c?x }",
            LanguageVariant::PromelaMini,
        );
        let fs = finals(&res);
        assert_eq!(fs.len(), 1, "finals: {fs:?}");
        assert!(fs[0].contains("x -> 5"), "final: {}", fs[0]);
        assert!(res.traces.iter().all(|(_, s)| *s == Status::Completed));
    }

    #[test]
    fn spawn_creates_a_processor_and_runs_its_method() {
        let res = run(
            "method work(v) { y := v } main { p := spawn(work, 7) }",
            LanguageVariant::Multi,
        );
        let fs = finals(&res);
        assert_eq!(fs.len(), 1, "finals: {fs:?}");
        assert_eq!(fs[0], "[p -> p1, v' -> 7, y -> 7]");
    }

    #[test]
    fn guard_stutter_and_divergence_report_deadlock() {
        let res = run(":: x > 0; y := 1", LanguageVariant::Par);
        assert_eq!(res.traces.len(), 1);
        assert_eq!(res.traces[0].1, Status::Deadlocked);

        let res = run("while 1 == 1 { skip }", LanguageVariant::Seq);
        assert_eq!(res.traces.len(), 1);
        assert_eq!(res.traces[0].1, Status::Deadlocked);
    }

    #[test]
    fn input_enumerates_the_domain() {
        let res = run("input(x); y := x + 1", LanguageVariant::Par);
        let fs = finals(&res);
        assert_eq!(fs.len(), 5); // default domain -2..2
        assert!(fs.contains(&"[x -> 2, y -> 3]".to_string()));
        assert!(fs.contains(&"[x -> -2, y -> -1]".to_string()));
    }
}
