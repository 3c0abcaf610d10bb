//! Conditioned traces: persistent sequences of states and events, the
//! semantic chop, event insertion, trace concretisation, tagging, and the
//! structural well-formedness validators.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::event::{Event, TagError};
use crate::expr::{EvalError, SExpr, Var};
use crate::state::{concretize_state, eval_expr, ConcretizationMapping, ConcretizeError, SymbolicState};
use crate::value::Value;

/// One entry of a trace: a symbolic state or an event marker.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Item {
    State(Arc<SymbolicState>),
    Event(Event),
}

impl Item {
    pub fn as_state(&self) -> Option<&Arc<SymbolicState>> {
        match self {
            Item::State(s) => Some(s),
            Item::Event(_) => None,
        }
    }

    pub fn as_event(&self) -> Option<&Event> {
        match self {
            Item::Event(ev) => Some(ev),
            Item::State(_) => None,
        }
    }
}

struct Node {
    item: Item,
    prev: Trace,
    len: usize,
}

/// A persistent trace: a newest-first cons list with shared tails, so
/// branching exploration extends a common prefix in O(1).
#[derive(Clone, Default)]
pub struct Trace {
    head: Option<Arc<Node>>,
}

impl Drop for Trace {
    fn drop(&mut self) {
        // Unlink iteratively so long traces do not recurse on drop.
        let mut cur = self.head.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut n) => cur = n.prev.head.take(),
                Err(_) => break,
            }
        }
    }
}

impl Trace {
    pub fn empty() -> Trace {
        Trace::default()
    }

    pub fn singleton(state: SymbolicState) -> Trace {
        Trace::empty().push_state(state)
    }

    pub fn len(&self) -> usize {
        self.head.as_ref().map_or(0, |n| n.len)
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none()
    }

    pub fn push(&self, item: Item) -> Trace {
        Trace {
            head: Some(Arc::new(Node {
                item,
                prev: self.clone(),
                len: self.len() + 1,
            })),
        }
    }

    pub fn push_state(&self, state: SymbolicState) -> Trace {
        self.push(Item::State(Arc::new(state)))
    }

    pub fn push_state_arc(&self, state: Arc<SymbolicState>) -> Trace {
        self.push(Item::State(state))
    }

    pub fn push_event(&self, ev: Event) -> Trace {
        self.push(Item::Event(ev))
    }

    /// Iterate newest → oldest.
    pub fn iter_rev(&self) -> RevIter<'_> {
        RevIter {
            cur: self.head.as_deref(),
        }
    }

    /// All items oldest-first.
    pub fn items(&self) -> Vec<&Item> {
        let mut v: Vec<&Item> = self.iter_rev().collect();
        v.reverse();
        v
    }

    /// All events oldest-first.
    pub fn events(&self) -> Vec<&Event> {
        let mut v: Vec<&Event> = self
            .iter_rev()
            .filter_map(|it| it.as_event())
            .collect();
        v.reverse();
        v
    }

    pub fn last_item(&self) -> Option<&Item> {
        self.head.as_ref().map(|n| &n.item)
    }

    pub fn first_item(&self) -> Option<&Item> {
        self.iter_rev().last()
    }

    /// The final state, when the trace ends with one.
    pub fn last_state(&self) -> Option<&Arc<SymbolicState>> {
        self.last_item().and_then(Item::as_state)
    }

    /// The initial state, when the trace starts with one.
    pub fn first_state(&self) -> Option<&Arc<SymbolicState>> {
        self.first_item().and_then(Item::as_state)
    }

    /// The trace without its newest item.
    pub fn drop_last(&self) -> Trace {
        match &self.head {
            None => Trace::empty(),
            Some(n) => n.prev.clone(),
        }
    }

    /// Append all items of `other`, oldest-first.
    pub fn append(&self, other: &Trace) -> Trace {
        let mut out = self.clone();
        for item in other.items() {
            out = out.push(item.clone());
        }
        out
    }

    /// Rename state-domain variables (and payload occurrences) throughout.
    pub fn rename_vars(&self, map: &BTreeMap<Var, Var>) -> Trace {
        if map.is_empty() {
            return self.clone();
        }
        let mut out = Trace::empty();
        for item in self.items() {
            out = match item {
                Item::State(s) => out.push_state(s.rename_vars(map)),
                Item::Event(ev) => {
                    let renamed = ev
                        .map_payload(|se| {
                            let mut e = se.clone();
                            for (from, to) in map {
                                e = e.subst(from, &SExpr::Var(to.clone()));
                            }
                            Ok::<SExpr, EvalError>(e)
                        })
                        .expect("renaming cannot fail");
                    out.push_event(renamed)
                }
            };
        }
        out
    }

    /// Drop the given variables from every state.
    pub fn drop_state_vars(&self, vars: &BTreeSet<Var>) -> Trace {
        if vars.is_empty() {
            return self.clone();
        }
        let mut out = Trace::empty();
        for item in self.items() {
            out = match item {
                Item::State(s) => out.push_state(s.without(vars.iter())),
                Item::Event(ev) => out.push_event(ev.clone()),
            };
        }
        out
    }

    /// Tag every event with the given process/object id.
    pub fn tag(&self, id: Value) -> Result<Trace, TagError> {
        let mut out = Trace::empty();
        for item in self.items() {
            out = match item {
                Item::State(s) => out.push(Item::State(s.clone())),
                Item::Event(ev) => out.push_event(ev.tagged(id)?),
            };
        }
        Ok(out)
    }
}

pub struct RevIter<'a> {
    cur: Option<&'a Node>,
}

impl<'a> Iterator for RevIter<'a> {
    type Item = &'a Item;
    fn next(&mut self) -> Option<&'a Item> {
        let node = self.cur?;
        self.cur = node.prev.head.as_deref();
        Some(&node.item)
    }
}

impl PartialEq for Trace {
    fn eq(&self, other: &Trace) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut a = self.head.as_ref();
        let mut b = other.head.as_ref();
        while let (Some(na), Some(nb)) = (a, b) {
            if Arc::ptr_eq(na, nb) {
                return true; // shared tail
            }
            if na.item != nb.item {
                return false;
            }
            a = na.prev.head.as_ref();
            b = nb.prev.head.as_ref();
        }
        true
    }
}

impl Eq for Trace {}

impl PartialOrd for Trace {
    fn partial_cmp(&self, other: &Trace) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Trace {
    /// Total order: by length, then lexicographically newest-first. Used only
    /// for canonical sorting of results and configurations.
    fn cmp(&self, other: &Trace) -> Ordering {
        match self.len().cmp(&other.len()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let mut a = self.head.as_ref();
        let mut b = other.head.as_ref();
        while let (Some(na), Some(nb)) = (a, b) {
            if Arc::ptr_eq(na, nb) {
                return Ordering::Equal;
            }
            match na.item.cmp(&nb.item) {
                Ordering::Equal => {}
                ord => return ord,
            }
            a = na.prev.head.as_ref();
            b = nb.prev.head.as_ref();
        }
        Ordering::Equal
    }
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.items()).finish()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, item) in self.items().into_iter().enumerate() {
            if i > 0 {
                write!(f, " . ")?;
            }
            match item {
                Item::State(s) => write!(f, "{s}")?,
                Item::Event(ev) => write!(f, "{ev}")?,
            }
        }
        write!(f, ">")
    }
}

/// A path condition: a conjunction of boolean expressions. Literal `tt`
/// entries are dropped on insertion; the condition is inconsistent when a
/// literal `ff` is present.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PathCondition(BTreeSet<SExpr>);

impl PathCondition {
    pub fn new() -> PathCondition {
        PathCondition::default()
    }

    pub fn singleton(e: SExpr) -> PathCondition {
        let mut pc = PathCondition::new();
        pc.insert(e);
        pc
    }

    pub fn insert(&mut self, e: SExpr) {
        if e != SExpr::tt() {
            self.0.insert(e);
        }
    }

    pub fn union(&self, other: &PathCondition) -> PathCondition {
        let mut out = self.clone();
        for e in &other.0 {
            out.insert(e.clone());
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &SExpr> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Consistent unless a clause already evaluated to `ff`.
    pub fn is_consistent(&self) -> bool {
        !self.0.contains(&SExpr::ff())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for e in &self.0 {
            e.collect_vars(&mut out);
        }
        out
    }

    /// Evaluate every clause in the given state; fully resolved `tt` clauses
    /// disappear.
    pub fn eval_under(&self, state: &SymbolicState) -> Result<PathCondition, EvalError> {
        let mut out = PathCondition::new();
        for e in &self.0 {
            out.insert(eval_expr(state, e)?);
        }
        Ok(out)
    }
}

impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// A conditioned trace without continuation: `pc ▷ body`.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct TracePiece {
    pub pc: PathCondition,
    pub body: Trace,
}

impl TracePiece {
    pub fn new(pc: PathCondition, body: Trace) -> TracePiece {
        TracePiece { pc, body }
    }

    pub fn unconditional(body: Trace) -> TracePiece {
        TracePiece {
            pc: PathCondition::new(),
            body,
        }
    }
}

impl fmt::Display for TracePiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |> {}", self.pc, self.body)
    }
}

/// Why a chop was undefined.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ChopError {
    EmptyOperand,
    LeftEndsWithEvent,
    RightStartsWithEvent,
    /// The first state of the right trace does not extend the last state of
    /// the left trace.
    NotAnExtension,
}

impl fmt::Display for ChopError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChopError::EmptyOperand => write!(f, "chop of an empty trace"),
            ChopError::LeftEndsWithEvent => write!(f, "left chop operand ends with an event"),
            ChopError::RightStartsWithEvent => {
                write!(f, "right chop operand starts with an event")
            }
            ChopError::NotAnExtension => write!(
                f,
                "first state of the right trace does not extend the last state of the left trace"
            ),
        }
    }
}

/// The semantic chop `left ** right`: glue the traces at their shared
/// boundary state, keeping the (possibly larger) boundary state of the right
/// trace, and join the path conditions.
pub fn chop(left: &TracePiece, right: &TracePiece) -> Result<TracePiece, ChopError> {
    if left.body.is_empty() || right.body.is_empty() {
        return Err(ChopError::EmptyOperand);
    }
    let last = left.body.last_state().ok_or(ChopError::LeftEndsWithEvent)?;
    let first = right
        .body
        .first_state()
        .ok_or(ChopError::RightStartsWithEvent)?;
    if !first.extends(last) {
        return Err(ChopError::NotAnExtension);
    }
    Ok(TracePiece {
        pc: left.pc.union(&right.pc),
        body: left.body.drop_last().append(&right.body),
    })
}

/// Event insertion `σ ≫ ev ◁ V̄`: bind the fresh symbolic variables, evaluate
/// the payload in the extended state, and produce the three-item trace
/// `⟨σ, ev(…), σ'⟩` together with `σ'`.
pub fn insert_event(
    state: &SymbolicState,
    ev: Event,
    fresh: &[Var],
) -> Result<(Trace, SymbolicState), EvalError> {
    let extended = state.extend_star(fresh.iter())?;
    let evaluated = ev.map_payload(|se| eval_expr(&extended, se))?;
    let trace = Trace::empty()
        .push_state(state.clone())
        .push_event(evaluated)
        .push_state(extended.clone());
    Ok((trace, extended))
}

/// Concretise every state and event payload of a trace with `rho`.
pub fn concretize_trace(
    rho: &ConcretizationMapping,
    trace: &Trace,
) -> Result<Trace, ConcretizeError> {
    let rho_state = SymbolicState::from_bindings(
        rho.iter().map(|(x, v)| (x.clone(), SExpr::Val(*v))),
    );
    let mut out = Trace::empty();
    for item in trace.items() {
        out = match item {
            Item::State(s) => out.push_state(concretize_state(rho, s)?),
            Item::Event(ev) => {
                let evd = ev.map_payload(|se| eval_expr(&rho_state, se))?;
                out.push_event(evd)
            }
        };
    }
    Ok(out)
}

/// Structural trace defects reported by the validators. The index is the
/// offending item position, oldest-first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TraceDefect {
    Empty,
    BoundaryNotAState,
    AdjacentEvents(usize),
    StateNotWellFormed(usize),
    /// A variable bound to a non-star expression was later re-bound to star.
    SymbolRebound(Var),
    PcVarNotSymbolic(Var),
    EventVarNotSymbolic(usize, Var),
    /// The states around an event differ (beyond fresh starred variables in
    /// the symbolic reading).
    EventStatesDiffer(usize),
    StateNotConcrete(usize),
    EventNotConcrete(usize),
    PcNotResolved,
}

impl fmt::Display for TraceDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceDefect::Empty => write!(f, "trace is empty"),
            TraceDefect::BoundaryNotAState => {
                write!(f, "trace does not start and end with a state")
            }
            TraceDefect::AdjacentEvents(i) => write!(f, "adjacent events at position {i}"),
            TraceDefect::StateNotWellFormed(i) => {
                write!(f, "state at position {i} is not well-formed")
            }
            TraceDefect::SymbolRebound(x) => {
                write!(f, "variable `{x}` re-abstracted to star after being bound")
            }
            TraceDefect::PcVarNotSymbolic(x) => {
                write!(f, "path-condition variable `{x}` is not symbolic in any state")
            }
            TraceDefect::EventVarNotSymbolic(i, x) => write!(
                f,
                "variable `{x}` of the event at position {i} is not symbolic in any state"
            ),
            TraceDefect::EventStatesDiffer(i) => {
                write!(f, "states surrounding the event at position {i} differ")
            }
            TraceDefect::StateNotConcrete(i) => {
                write!(f, "state at position {i} is not concrete")
            }
            TraceDefect::EventNotConcrete(i) => {
                write!(f, "event payload at position {i} is not concrete")
            }
            TraceDefect::PcNotResolved => {
                write!(f, "path condition of a concrete trace is not fully resolved")
            }
        }
    }
}

fn check_shape(items: &[&Item]) -> Result<(), TraceDefect> {
    if items.is_empty() {
        return Err(TraceDefect::Empty);
    }
    if !matches!(items[0], Item::State(_)) || !matches!(items[items.len() - 1], Item::State(_)) {
        return Err(TraceDefect::BoundaryNotAState);
    }
    for (i, w) in items.windows(2).enumerate() {
        if matches!(w[0], Item::Event(_)) && matches!(w[1], Item::Event(_)) {
            return Err(TraceDefect::AdjacentEvents(i));
        }
    }
    Ok(())
}

/// Structural well-formedness of a symbolic conditioned trace:
/// all states well-formed; no variable re-abstracted to star; path-condition
/// and event-payload variables symbolic somewhere; every event surrounded by
/// its state, the trailing copy possibly extended by fresh starred variables.
pub fn check_symbolic(piece: &TracePiece) -> Result<(), TraceDefect> {
    let items = piece.body.items();
    check_shape(&items)?;
    let mut union_symb: BTreeSet<Var> = BTreeSet::new();
    let mut bound_concrete: BTreeSet<Var> = BTreeSet::new();
    for (i, item) in items.iter().enumerate() {
        if let Item::State(s) = item {
            if !s.is_well_formed() {
                return Err(TraceDefect::StateNotWellFormed(i));
            }
            for (x, se) in s.iter() {
                if matches!(se, SExpr::Star) {
                    if bound_concrete.contains(x) {
                        return Err(TraceDefect::SymbolRebound(x.clone()));
                    }
                    union_symb.insert(x.clone());
                } else {
                    bound_concrete.insert(x.clone());
                }
            }
        }
    }
    for x in piece.pc.vars() {
        if !union_symb.contains(&x) {
            return Err(TraceDefect::PcVarNotSymbolic(x));
        }
    }
    for (i, item) in items.iter().enumerate() {
        if let Item::Event(ev) = item {
            for x in ev.vars() {
                if !union_symb.contains(&x) {
                    return Err(TraceDefect::EventVarNotSymbolic(i, x));
                }
            }
            let pre = items[i - 1].as_state().expect("checked shape");
            let post = items[i + 1].as_state().expect("checked shape");
            if !post.extends(pre) {
                return Err(TraceDefect::EventStatesDiffer(i));
            }
            for (x, se) in post.iter() {
                if !pre.contains(x) && !matches!(se, SExpr::Star) {
                    return Err(TraceDefect::EventStatesDiffer(i));
                }
            }
        }
    }
    Ok(())
}

/// Strict validation of a concrete trace: every state and payload concrete,
/// identical states around every event, fully resolved path condition.
pub fn check_concrete(piece: &TracePiece) -> Result<(), TraceDefect> {
    let items = piece.body.items();
    check_shape(&items)?;
    if !piece.pc.is_empty() {
        return Err(TraceDefect::PcNotResolved);
    }
    for (i, item) in items.iter().enumerate() {
        match item {
            Item::State(s) => {
                if !s.is_concrete() {
                    return Err(TraceDefect::StateNotConcrete(i));
                }
            }
            Item::Event(ev) => {
                if !ev.is_concrete() {
                    return Err(TraceDefect::EventNotConcrete(i));
                }
                let pre = items[i - 1].as_state().expect("checked shape");
                let post = items[i + 1].as_state().expect("checked shape");
                if pre != post {
                    return Err(TraceDefect::EventStatesDiffer(i));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventKind;
    use crate::expr::Op;

    fn st(pairs: &[(&str, SExpr)]) -> SymbolicState {
        SymbolicState::from_bindings(pairs.iter().map(|(x, se)| (Var::new(x), se.clone())))
    }

    fn sigma1() -> SymbolicState {
        st(&[
            ("x0", SExpr::bin(Op::Add, SExpr::var("Y0"), SExpr::int(42))),
            ("Y0", SExpr::Star),
            ("w0", SExpr::int(42)),
            ("x1", SExpr::var("Y1")),
            ("Y1", SExpr::Star),
        ])
    }

    #[test]
    fn chop_of_identical_singletons_is_identity() {
        let t = TracePiece::unconditional(Trace::singleton(st(&[("x", SExpr::int(1))])));
        let out = chop(&t, &t).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn chop_appends_and_joins_path_conditions() {
        // chop({Y0>Y1} |> <σ1>, {} |> <σ1 . σ1[x0↦17]>)
        //   = {Y0>Y1} |> <σ1 . σ1[x0↦17]>
        let pc = PathCondition::singleton(SExpr::bin(Op::Gt, SExpr::var("Y0"), SExpr::var("Y1")));
        let left = TracePiece::new(pc.clone(), Trace::singleton(sigma1()));
        let mut updated = sigma1();
        updated.bind_raw(Var::new("x0"), SExpr::int(17));
        let right = TracePiece::unconditional(
            Trace::singleton(sigma1()).push_state(updated.clone()),
        );
        let out = chop(&left, &right).unwrap();
        assert_eq!(out.pc, pc);
        assert_eq!(out.body.len(), 2);
        assert_eq!(out.body.first_state().unwrap().as_ref(), &sigma1());
        assert_eq!(out.body.last_state().unwrap().as_ref(), &updated);
    }

    #[test]
    fn chop_requires_extension() {
        let a = TracePiece::unconditional(Trace::singleton(st(&[("x", SExpr::int(1))])));
        let b = TracePiece::unconditional(Trace::singleton(st(&[("x", SExpr::int(2))])));
        assert_eq!(chop(&a, &b), Err(ChopError::NotAnExtension));
    }

    #[test]
    fn chop_boundary_state_may_grow_on_the_right() {
        let small = st(&[("x", SExpr::int(1))]);
        let big = st(&[("x", SExpr::int(1)), ("Y", SExpr::Star)]);
        let a = TracePiece::unconditional(Trace::singleton(small));
        let b = TracePiece::unconditional(Trace::singleton(big.clone()));
        let out = chop(&a, &b).unwrap();
        assert_eq!(out.body.last_state().unwrap().as_ref(), &big);
    }

    #[test]
    fn chop_is_associative_when_defined() {
        let s0 = st(&[("x", SExpr::int(0))]);
        let s1 = st(&[("x", SExpr::int(1))]);
        let s2 = st(&[("x", SExpr::int(2))]);
        let a = TracePiece::unconditional(Trace::singleton(s0.clone()).push_state(s1.clone()));
        let b = TracePiece::unconditional(Trace::singleton(s1.clone()).push_state(s2.clone()));
        let c = TracePiece::unconditional(Trace::singleton(s2.clone()).push_state(s0.clone()));
        let left = chop(&chop(&a, &b).unwrap(), &c).unwrap();
        let right = chop(&a, &chop(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
        assert_eq!(left.body.len(), 4);
    }

    #[test]
    fn insert_event_produces_the_triple() {
        let s = st(&[("x", SExpr::int(1))]);
        let ev = Event::new(EventKind::Inp, alloc::vec![SExpr::var("Y")]);
        let (tr, extended) = insert_event(&s, ev, &[Var::new("Y")]).unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(tr.first_state().unwrap().as_ref(), &s);
        assert_eq!(tr.last_state().unwrap().as_ref(), &extended);
        assert!(extended.is_symbolic_var(&Var::new("Y")));
        // The payload stays the symbolic variable after evaluation.
        let ev2 = tr.events()[0];
        assert_eq!(ev2.payload, alloc::vec![SExpr::var("Y")]);
        // wft4 holds and the result chops onto any trace ending in `s`.
        let piece = TracePiece::unconditional(tr);
        assert_eq!(check_symbolic(&piece), Ok(()));
        let sh = TracePiece::unconditional(Trace::singleton(s));
        assert!(chop(&sh, &piece).is_ok());
    }

    #[test]
    fn insert_event_payload_is_evaluated_in_extended_state() {
        let s = st(&[("x", SExpr::int(3))]);
        let ev = Event::new(
            EventKind::Send,
            alloc::vec![SExpr::bin(Op::Add, SExpr::var("x"), SExpr::int(1))],
        );
        let (tr, _) = insert_event(&s, ev, &[]).unwrap();
        assert_eq!(tr.events()[0].payload, alloc::vec![SExpr::int(4)]);
    }

    #[test]
    fn concretize_trace_identity_on_concrete() {
        let s = st(&[("x", SExpr::int(1))]);
        let tr = Trace::singleton(s.clone()).push_state(s);
        let rho = ConcretizationMapping::new();
        assert_eq!(concretize_trace(&rho, &tr).unwrap(), tr);
    }

    #[test]
    fn concretize_then_drop_symbols_passes_concrete_validator() {
        let s = st(&[("x", SExpr::int(1))]);
        let ev = Event::new(EventKind::Inp, alloc::vec![SExpr::var("Y")]);
        let (tr, _) = insert_event(&s, ev, &[Var::new("Y")]).unwrap();
        let rho: ConcretizationMapping =
            [(Var::new("Y"), Value::Int(7))].into_iter().collect();
        let conc = concretize_trace(&rho, &tr).unwrap();
        let dropped = conc.drop_state_vars(&rho.keys().cloned().collect());
        let piece = TracePiece::unconditional(dropped.clone());
        assert_eq!(check_concrete(&piece), Ok(()));
        assert_eq!(
            dropped.events()[0].payload,
            alloc::vec![SExpr::Val(Value::Int(7))]
        );
    }

    #[test]
    fn symbolic_validator_rejects_reabstraction() {
        let a = st(&[("x", SExpr::int(1))]);
        let b = st(&[("x", SExpr::Star)]);
        let tr = Trace::singleton(a).push_state(b);
        let got = check_symbolic(&TracePiece::unconditional(tr));
        assert_eq!(got, Err(TraceDefect::SymbolRebound(Var::new("x"))));
    }

    #[test]
    fn symbolic_validator_rejects_unanchored_pc_vars() {
        let tr = Trace::singleton(st(&[("x", SExpr::int(1))]));
        let pc = PathCondition::singleton(SExpr::bin(Op::Gt, SExpr::var("Z"), SExpr::int(0)));
        let got = check_symbolic(&TracePiece::new(pc, tr));
        assert_eq!(got, Err(TraceDefect::PcVarNotSymbolic(Var::new("Z"))));
    }

    #[test]
    fn concrete_validator_rejects_differing_event_frames() {
        let a = st(&[("x", SExpr::int(1))]);
        let b = st(&[("x", SExpr::int(2))]);
        let tr = Trace::singleton(a)
            .push_event(Event::new(EventKind::Inp, alloc::vec![SExpr::int(0)]))
            .push_state(b);
        let got = check_concrete(&TracePiece::unconditional(tr));
        assert_eq!(got, Err(TraceDefect::EventStatesDiffer(1)));
    }

    #[test]
    fn trace_ordering_is_total_and_consistent() {
        let s = st(&[("x", SExpr::int(1))]);
        let t1 = Trace::singleton(s.clone());
        let t2 = t1.push_state(st(&[("x", SExpr::int(2))]));
        assert!(t1 < t2);
        assert_eq!(t1.cmp(&t1.clone()), Ordering::Equal);
        assert_eq!(t1, t1.clone());
    }

    #[test]
    fn long_traces_drop_without_overflow() {
        let mut t = Trace::singleton(SymbolicState::new());
        for i in 0..200_000 {
            t = t.push_state(st(&[("x", SExpr::int(i))]));
        }
        drop(t);
    }

    #[test]
    fn path_condition_normalizes_tt_and_detects_ff() {
        let mut pc = PathCondition::new();
        pc.insert(SExpr::tt());
        assert!(pc.is_empty() && pc.is_consistent());
        pc.insert(SExpr::ff());
        assert!(!pc.is_consistent());
    }
}
