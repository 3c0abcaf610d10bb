//! Well-formedness of global traces: pluggable base policies (invocation
//! counting, message passing, actors, futures) plus optional communication
//! patterns (asynchronous, FIFO, bounded, causally ordered, synchronous) and
//! channel visibility rules.
//!
//! Every predicate exists twice, on purpose: an incremental checker used
//! during composition ([`WfChecker`]) and an independent whole-trace
//! validator ([`validate_events`]) used to cross-check it.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::event::{Event, EventKind};
use crate::trace::{check_concrete, TraceDefect, TracePiece};
use crate::value::Value;

/// The base well-formedness discipline of a language stratum.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum BaseWf {
    /// No event constraints.
    Trivial,
    /// Procedure calls: an invocation reaction needs more prior matching
    /// invocations than prior reactions.
    Counting,
    /// Message passing: unique message ids, receive-once with a matching
    /// earlier send, unique spawned process ids, reactions counted against
    /// invocations plus spawns.
    Multi,
    /// Actors: unique object creation, invocation ids globally unique,
    /// reactions matched to an invocation targeting the reacting object.
    Actor,
    /// Futures: the actor discipline with caller/callee recorded on both
    /// sides, plus completion events resolving futures and completion
    /// reactions requiring a matching completion.
    Future,
}

/// Optional communication patterns layered on top of the base.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Pattern {
    /// Asynchronous: every receive consumes a matching earlier send.
    Ac,
    /// FIFO delivery per ordered process pair (implies `Ac`).
    Fifo,
    /// At most N messages in flight (implies `Fifo`).
    Bounded(u32),
    /// Causal order delivery (implies `Ac`).
    Co,
    /// Synchronous: a receive immediately follows its send (implies `Ac`).
    Sync,
    /// Channel events only on visible channels: global, owned, or learned
    /// from an earlier receive.
    ChannelVisibility,
    /// Each message id consumed at most once.
    ConsumeOnce,
}

/// A complete policy: one base plus any number of patterns.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct WfPolicy {
    pub base: BaseWf,
    pub patterns: BTreeSet<Pattern>,
}

impl WfPolicy {
    pub fn trivial() -> WfPolicy {
        WfPolicy {
            base: BaseWf::Trivial,
            patterns: BTreeSet::new(),
        }
    }

    pub fn base(base: BaseWf) -> WfPolicy {
        WfPolicy {
            base,
            patterns: BTreeSet::new(),
        }
    }

    pub fn with_pattern(mut self, p: Pattern) -> WfPolicy {
        self.patterns.insert(p);
        self
    }

    pub fn default_for(variant: crate::lang::LanguageVariant) -> WfPolicy {
        use crate::lang::LanguageVariant as V;
        match variant {
            V::Seq | V::Par => WfPolicy::trivial(),
            V::Proc => WfPolicy::base(BaseWf::Counting),
            V::Multi => WfPolicy::base(BaseWf::Multi).with_pattern(Pattern::Ac),
            V::PromelaMini => WfPolicy::base(BaseWf::Multi)
                .with_pattern(Pattern::Ac)
                .with_pattern(Pattern::ChannelVisibility)
                .with_pattern(Pattern::ConsumeOnce),
            V::Actor => WfPolicy::base(BaseWf::Actor),
            V::ActiveObject => WfPolicy::base(BaseWf::Future),
        }
    }

    /// Parse `base[+pattern]*`, e.g. `multi+fifo+bd:3`.
    pub fn parse(s: &str) -> Result<WfPolicy, String> {
        let mut parts = s.split('+');
        let base = match parts.next().unwrap_or("") {
            "trivial" => BaseWf::Trivial,
            "counting" => BaseWf::Counting,
            "multi" => BaseWf::Multi,
            "actor" => BaseWf::Actor,
            "future" => BaseWf::Future,
            other => return Err(alloc::format!("unknown wf base `{other}`")),
        };
        let mut policy = WfPolicy::base(base);
        for p in parts {
            let pat = if let Some(n) = p.strip_prefix("bd:") {
                let n: u32 = n
                    .parse()
                    .map_err(|_| alloc::format!("bad bound in `{p}`"))?;
                Pattern::Bounded(n)
            } else {
                match p {
                    "ac" => Pattern::Ac,
                    "fifo" => Pattern::Fifo,
                    "co" => Pattern::Co,
                    "sync" => Pattern::Sync,
                    "visibility" => Pattern::ChannelVisibility,
                    "consume-once" => Pattern::ConsumeOnce,
                    other => return Err(alloc::format!("unknown wf pattern `{other}`")),
                }
            };
            policy.patterns.insert(pat);
        }
        Ok(policy)
    }
}

impl fmt::Display for WfPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = match self.base {
            BaseWf::Trivial => "trivial",
            BaseWf::Counting => "counting",
            BaseWf::Multi => "multi",
            BaseWf::Actor => "actor",
            BaseWf::Future => "future",
        };
        write!(f, "{b}")?;
        for p in &self.patterns {
            match p {
                Pattern::Ac => write!(f, "+ac")?,
                Pattern::Fifo => write!(f, "+fifo")?,
                Pattern::Bounded(n) => write!(f, "+bd:{n}")?,
                Pattern::Co => write!(f, "+co")?,
                Pattern::Sync => write!(f, "+sync")?,
                Pattern::ChannelVisibility => write!(f, "+visibility")?,
                Pattern::ConsumeOnce => write!(f, "+consume-once")?,
            }
        }
        Ok(())
    }
}

/// Channel ownership: channel id → owning process id, for process-local
/// channels only.
pub type ChannelOwners = BTreeMap<u32, u32>;

// ----- payload access helpers (concrete events only) -----

fn values(payload: &[crate::expr::SExpr]) -> Option<Vec<Value>> {
    payload.iter().map(|se| se.as_value().copied()).collect()
}

fn key_of(ev: &Event, trailing: usize) -> Option<(Option<String>, Vec<Value>)> {
    let vals = values(ev.leading(trailing))?;
    Some((ev.method.clone(), vals))
}

fn last_val(ev: &Event) -> Option<Value> {
    ev.last_value().copied()
}

fn penultimate_val(ev: &Event) -> Option<Value> {
    ev.penultimate_value().copied()
}

// =========================================================================
// Whole-trace validator (declarative second implementation)
// =========================================================================

/// Check a concrete event sequence against a policy. On failure returns the
/// index of the first event whose addition breaks well-formedness.
pub fn validate_events(
    policy: &WfPolicy,
    owners: &ChannelOwners,
    events: &[Event],
) -> Result<(), usize> {
    for i in 0..events.len() {
        if !event_ok(policy, owners, &events[..i], &events[i]) {
            return Err(i);
        }
    }
    for p in &policy.patterns {
        let ok = match p {
            Pattern::Ac => wf_ac(events),
            Pattern::Fifo => wf_fifo(events),
            Pattern::Bounded(n) => wf_bounded(*n, events),
            Pattern::Co => wf_co(events),
            Pattern::Sync => wf_sync(events),
            Pattern::ChannelVisibility => wf_visibility(owners, events),
            Pattern::ConsumeOnce => wf_consume_once(events),
        };
        if !ok {
            // Attribute pattern failures to the shortest violating prefix.
            for i in 0..events.len() {
                let pre = &events[..=i];
                let ok_here = match p {
                    Pattern::Ac => wf_ac(pre),
                    Pattern::Fifo => wf_fifo(pre),
                    Pattern::Bounded(n) => wf_bounded(*n, pre),
                    Pattern::Co => wf_co(pre),
                    Pattern::Sync => wf_sync(pre),
                    Pattern::ChannelVisibility => wf_visibility(owners, pre),
                    Pattern::ConsumeOnce => wf_consume_once(pre),
                };
                if !ok_here {
                    return Err(i);
                }
            }
            return Err(events.len().saturating_sub(1));
        }
    }
    Ok(())
}

/// Validate a full concrete conditioned trace: structure plus events.
pub fn validate_trace(
    policy: &WfPolicy,
    owners: &ChannelOwners,
    piece: &TracePiece,
) -> Result<(), TraceViolation> {
    check_concrete(piece).map_err(TraceViolation::Structure)?;
    let events: Vec<Event> = piece.body.events().into_iter().cloned().collect();
    validate_events(policy, owners, &events).map_err(TraceViolation::Event)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TraceViolation {
    Structure(TraceDefect),
    /// Index of the first offending event.
    Event(usize),
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::Structure(d) => write!(f, "{d}"),
            TraceViolation::Event(i) => write!(f, "well-formedness violated at event {i}"),
        }
    }
}

/// Is `ev` admissible after the history `before` under the base policy?
fn event_ok(policy: &WfPolicy, _owners: &ChannelOwners, before: &[Event], ev: &Event) -> bool {
    match policy.base {
        BaseWf::Trivial => true,
        BaseWf::Counting => counting_ok(before, ev),
        BaseWf::Multi => multi_ok(before, ev),
        BaseWf::Actor => actor_ok(before, ev, false),
        BaseWf::Future => actor_ok(before, ev, true),
    }
}

fn counting_ok(before: &[Event], ev: &Event) -> bool {
    if ev.kind != EventKind::InvR {
        return true;
    }
    let Some(key) = key_of(ev, 0) else { return false };
    let invs = before
        .iter()
        .filter(|e| e.kind == EventKind::Inv && key_of(e, 0).as_ref() == Some(&key))
        .count();
    let invrs = before
        .iter()
        .filter(|e| e.kind == EventKind::InvR && key_of(e, 0).as_ref() == Some(&key))
        .count();
    invs > invrs
}

fn multi_ok(before: &[Event], ev: &Event) -> bool {
    match ev.kind {
        EventKind::Send => {
            // Fresh message id.
            let Some(id) = last_val(ev) else { return false };
            !before
                .iter()
                .any(|e| e.kind == EventKind::Send && last_val(e) == Some(id))
        }
        EventKind::Spawn => {
            let Some(pid) = last_val(ev) else { return false };
            !before
                .iter()
                .any(|e| e.kind == EventKind::Spawn && last_val(e) == Some(pid))
        }
        EventKind::Receive => {
            // Receive-once; matching a send is the `ac` pattern's job.
            let Some(id) = last_val(ev) else { return false };
            !before
                .iter()
                .any(|e| e.kind == EventKind::Receive && last_val(e) == Some(id))
        }
        EventKind::InvR => {
            // A reaction on processor p counts invocations issued on p plus
            // spawns targeting p.
            let Some(key) = key_of(ev, 0) else { return false };
            let invs = before
                .iter()
                .filter(|e| {
                    e.kind == EventKind::Inv
                        && e.tag == ev.tag
                        && key_of(e, 0).as_ref() == Some(&key)
                })
                .count();
            let spawns = before
                .iter()
                .filter(|e| {
                    e.kind == EventKind::Spawn
                        && key_of(e, 1).as_ref() == Some(&key)
                        && last_val(e) == ev.tag
                })
                .count();
            let invrs = before
                .iter()
                .filter(|e| {
                    e.kind == EventKind::InvR
                        && e.tag == ev.tag
                        && key_of(e, 0).as_ref() == Some(&key)
                })
                .count();
            invs + spawns > invrs
        }
        _ => true,
    }
}

/// sendEv^q(v̄, p, i) matches receiveEv^p(v̄, q, i): same id and values, the
/// send targets the receiver, the receive names the sender.
fn send_matches_receive(send: &Event, recv: &Event) -> bool {
    send.kind == EventKind::Send
        && last_val(send) == last_val(recv)
        && values(send.leading(2)) == values(recv.leading(2))
        && penultimate_val(send).map(Some) == Some(recv.tag)
        && send.tag == penultimate_val(recv)
}

/// A send and a receive over the same channel: the peer slot holds the
/// channel on both sides.
fn chan_send_matches_receive(send: &Event, recv: &Event) -> bool {
    send.kind == EventKind::Send
        && last_val(send) == last_val(recv)
        && values(send.leading(2)) == values(recv.leading(2))
        && matches!(penultimate_val(send), Some(Value::Cid(_)))
        && penultimate_val(send) == penultimate_val(recv)
}

fn comm_matches(send: &Event, recv: &Event) -> bool {
    send_matches_receive(send, recv) || chan_send_matches_receive(send, recv)
}

fn actor_ok(before: &[Event], ev: &Event, futures: bool) -> bool {
    match ev.kind {
        EventKind::New => {
            let Some(obj) = ev.payload.first().and_then(|se| se.as_value().copied()) else {
                return false;
            };
            !before.iter().any(|e| {
                e.kind == EventKind::New
                    && e.payload.first().and_then(|se| se.as_value().copied()) == Some(obj)
            })
        }
        EventKind::Inv => {
            // Callee exists, invocation id globally fresh.
            let Some(callee) = penultimate_val(ev) else { return false };
            let Some(id) = last_val(ev) else { return false };
            let created = before.iter().any(|e| {
                e.kind == EventKind::New
                    && e.payload.first().and_then(|se| se.as_value().copied()) == Some(callee)
            });
            created
                && !before
                    .iter()
                    .any(|e| e.kind == EventKind::Inv && last_val(e) == Some(id))
        }
        EventKind::InvR => {
            let Some(id) = last_val(ev) else { return false };
            if before
                .iter()
                .any(|e| e.kind == EventKind::InvR && last_val(e) == Some(id))
            {
                return false;
            }
            if futures {
                // invREv^o(v̄, caller, f) matches invEv^caller(v̄, o, m, f).
                let Some(caller) = penultimate_val(ev) else { return false };
                before.iter().any(|e| {
                    e.kind == EventKind::Inv
                        && e.method == ev.method
                        && last_val(e) == Some(id)
                        && values(e.leading(2)) == values(ev.leading(2))
                        && penultimate_val(e).map(Some) == Some(ev.tag)
                        && e.tag == Some(caller)
                })
            } else {
                // invREv^o(v̄, i) matches invEv(v̄, o, m, i).
                before.iter().any(|e| {
                    e.kind == EventKind::Inv
                        && e.method == ev.method
                        && last_val(e) == Some(id)
                        && values(e.leading(2)) == values(ev.leading(1))
                        && penultimate_val(e).map(Some) == Some(ev.tag)
                })
            }
        }
        EventKind::Comp => true,
        EventKind::CompR => {
            if !futures {
                return true;
            }
            // compREv(f, v) needs an earlier compEv(f, v); reads repeat freely.
            let fut = ev.payload.first().and_then(|se| se.as_value().copied());
            let v = last_val(ev);
            if fut.is_none() || v.is_none() {
                return false;
            }
            before.iter().any(|e| {
                e.kind == EventKind::Comp
                    && e.payload.first().and_then(|se| se.as_value().copied()) == fut
                    && last_val(e) == v
            })
        }
        _ => true,
    }
}

// ----- communication patterns (whole-sequence predicates) -----

fn comm_events(events: &[Event]) -> Vec<(usize, &Event)> {
    events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.kind, EventKind::Send | EventKind::Receive))
        .collect()
}

/// Asynchronous communication: every receive consumes a matching earlier
/// send, each message id at most once.
pub fn wf_ac(events: &[Event]) -> bool {
    let comm = comm_events(events);
    for (pos, (i, ev)) in comm.iter().enumerate() {
        if ev.kind != EventKind::Receive {
            continue;
        }
        let id = last_val(ev);
        if id.is_none() {
            return false;
        }
        let consumed_before = comm[..pos]
            .iter()
            .any(|(_, e)| e.kind == EventKind::Receive && last_val(e) == id);
        if consumed_before {
            return false;
        }
        let matched = events[..*i].iter().any(|e| comm_matches(e, ev));
        if !matched {
            return false;
        }
    }
    true
}

/// FIFO: asynchronous, and messages between each ordered endpoint pair are
/// received in the order they were sent.
pub fn wf_fifo(events: &[Event]) -> bool {
    if !wf_ac(events) {
        return false;
    }
    let comm = comm_events(events);
    // pair = (sender tag, peer slot). Track pending ids per pair in order.
    let mut pending: BTreeMap<(Option<Value>, Option<Value>), VecDeque<Value>> = BTreeMap::new();
    for (_, ev) in comm {
        match ev.kind {
            EventKind::Send => {
                let Some(id) = last_val(ev) else { return false };
                pending
                    .entry((ev.tag, penultimate_val(ev)))
                    .or_default()
                    .push_back(id);
            }
            EventKind::Receive => {
                let id = last_val(ev);
                // Find the pair queue containing this id; it must be at the
                // front of its queue.
                for q in pending.values_mut() {
                    if let Some(pos) = q.iter().position(|m| Some(*m) == id) {
                        if pos != 0 {
                            return false;
                        }
                        q.pop_front();
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    true
}

/// Bounded: FIFO with at most `n` messages in flight at any prefix.
pub fn wf_bounded(n: u32, events: &[Event]) -> bool {
    if !wf_fifo(events) {
        return false;
    }
    let mut in_flight: i64 = 0;
    for (_, ev) in comm_events(events) {
        match ev.kind {
            EventKind::Send => {
                in_flight += 1;
                if in_flight > i64::from(n) {
                    return false;
                }
            }
            EventKind::Receive => in_flight -= 1,
            _ => {}
        }
    }
    true
}

/// Causal order: asynchronous, and when one send causally precedes another
/// towards the same destination, their receives occur in the same order.
/// Causality: same-process program order plus send-to-matching-receive
/// edges, closed transitively.
pub fn wf_co(events: &[Event]) -> bool {
    if !wf_ac(events) {
        return false;
    }
    let n = events.len();
    // reach[i] = set of indices causally after i.
    let mut succ: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); n];
    for i in 0..n {
        for (j, later) in events.iter().enumerate().skip(i + 1) {
            if events[i].tag == later.tag && events[i].tag.is_some() {
                succ[i].insert(j);
            }
        }
        if events[i].kind == EventKind::Send {
            for (j, later) in events.iter().enumerate().skip(i + 1) {
                if later.kind == EventKind::Receive && comm_matches(&events[i], later) {
                    succ[i].insert(j);
                }
            }
        }
    }
    // Transitive closure (small sequences; cubic is fine).
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            let current: Vec<usize> = succ[i].iter().copied().collect();
            for j in current {
                let extra: Vec<usize> = succ[j].difference(&succ[i]).copied().collect();
                if !extra.is_empty() {
                    succ[i].extend(extra);
                    changed = true;
                }
            }
        }
    }
    let recv_pos = |send: &Event| -> Option<usize> {
        events
            .iter()
            .position(|e| e.kind == EventKind::Receive && comm_matches(send, e))
    };
    for i in 0..n {
        if events[i].kind != EventKind::Send {
            continue;
        }
        for j in succ[i].iter().copied() {
            if events[j].kind != EventKind::Send {
                continue;
            }
            if penultimate_val(&events[i]) != penultimate_val(&events[j]) {
                continue; // different destinations
            }
            if let (Some(ri), Some(rj)) = (recv_pos(&events[i]), recv_pos(&events[j])) {
                if rj < ri {
                    return false;
                }
            }
        }
    }
    true
}

/// Synchronous: asynchronous, every communication event directly following
/// a send is that send's receive, and every receive directly follows its
/// send.
pub fn wf_sync(events: &[Event]) -> bool {
    if !wf_ac(events) {
        return false;
    }
    let comm = comm_events(events);
    for (pos, (_, ev)) in comm.iter().enumerate() {
        match ev.kind {
            EventKind::Send => match comm.get(pos + 1) {
                Some((_, next)) => {
                    if !(next.kind == EventKind::Receive && comm_matches(ev, next)) {
                        return false;
                    }
                }
                None => return false, // dangling send
            },
            EventKind::Receive => match pos.checked_sub(1).and_then(|p| comm.get(p)) {
                Some((_, prev)) => {
                    if !(prev.kind == EventKind::Send && comm_matches(prev, ev)) {
                        return false;
                    }
                }
                None => return false,
            },
            _ => {}
        }
    }
    true
}

/// Channel visibility: an event on a process-local channel is only allowed
/// for the owner or for a process that earlier received the channel as a
/// message value.
pub fn wf_visibility(owners: &ChannelOwners, events: &[Event]) -> bool {
    for (i, ev) in events.iter().enumerate() {
        if !matches!(ev.kind, EventKind::Send | EventKind::Receive) {
            continue;
        }
        let Some(Value::Cid(c)) = penultimate_val(ev) else {
            continue; // not a channel event (pid-addressed messaging)
        };
        let Some(owner) = owners.get(&c) else {
            continue; // global channel
        };
        let pid = ev.tag;
        if pid == Some(Value::Pid(*owner)) {
            continue;
        }
        let learned = events[..i].iter().any(|e| {
            e.kind == EventKind::Receive
                && e.tag == pid
                && e.payload.first().and_then(|se| se.as_value().copied())
                    == Some(Value::Cid(c))
        });
        if !learned {
            return false;
        }
    }
    true
}

/// Each message id consumed by at most one receive.
pub fn wf_consume_once(events: &[Event]) -> bool {
    let mut seen = BTreeSet::new();
    for ev in events {
        if ev.kind == EventKind::Receive {
            let Some(id) = last_val(ev) else { return false };
            if !seen.insert(id) {
                return false;
            }
        }
    }
    true
}

// =========================================================================
// Incremental checker
// =========================================================================

/// Incremental well-formedness: cheap-to-clone counters updated one event at
/// a time during composition. `extend` answers whether the event is
/// admissible and commits it when it is.
#[derive(Clone, Debug)]
pub struct WfChecker {
    policy: WfPolicy,
    owners: ChannelOwners,
    // counting / multi / actor / future. The invocation-count keys carry
    // the processor tag for the per-processor discipline (`None` for the
    // untagged single-processor one).
    inv_count: BTreeMap<(Option<String>, Vec<Value>, Option<Value>), usize>,
    invr_count: BTreeMap<(Option<String>, Vec<Value>, Option<Value>), usize>,
    spawn_count: BTreeMap<(Option<String>, Vec<Value>, Value), usize>,
    send_ids: BTreeSet<Value>,
    spawn_pids: BTreeSet<Value>,
    consumed: BTreeSet<Value>,
    pending_sends: Vec<Event>,
    ac_consumed: BTreeSet<Value>,
    pat_consumed: BTreeSet<Value>,
    objects: BTreeSet<Value>,
    inv_by_id: BTreeMap<Value, Event>,
    invr_ids: BTreeSet<Value>,
    comp_pairs: BTreeSet<(Value, Value)>,
    // patterns
    fifo_pending: BTreeMap<(Option<Value>, Option<Value>), VecDeque<Value>>,
    in_flight: u32,
    last_comm_send: Option<Event>,
    learned_channels: BTreeMap<Value, BTreeSet<Value>>,
    /// Replay log, kept only when the causal-order pattern is active.
    co_log: Option<Vec<Event>>,
}

impl WfChecker {
    pub fn new(policy: WfPolicy, owners: ChannelOwners) -> WfChecker {
        let co_log = policy
            .patterns
            .contains(&Pattern::Co)
            .then(Vec::new);
        WfChecker {
            policy,
            owners,
            inv_count: BTreeMap::new(),
            invr_count: BTreeMap::new(),
            spawn_count: BTreeMap::new(),
            send_ids: BTreeSet::new(),
            spawn_pids: BTreeSet::new(),
            consumed: BTreeSet::new(),
            pending_sends: Vec::new(),
            ac_consumed: BTreeSet::new(),
            pat_consumed: BTreeSet::new(),
            objects: BTreeSet::new(),
            inv_by_id: BTreeMap::new(),
            invr_ids: BTreeSet::new(),
            comp_pairs: BTreeSet::new(),
            fifo_pending: BTreeMap::new(),
            in_flight: 0,
            last_comm_send: None,
            learned_channels: BTreeMap::new(),
            co_log,
        }
    }

    /// Admit `ev` if well-formedness is preserved; returns `false` (leaving
    /// the checker unusable for further extensions) otherwise.
    pub fn extend(&mut self, ev: &Event) -> bool {
        self.extend_base(ev) && self.extend_patterns(ev)
    }

    fn extend_base(&mut self, ev: &Event) -> bool {
        match self.policy.base {
            BaseWf::Trivial => true,
            BaseWf::Counting => self.extend_counting(ev),
            BaseWf::Multi => self.extend_multi(ev),
            BaseWf::Actor => self.extend_actor(ev, false),
            BaseWf::Future => self.extend_actor(ev, true),
        }
    }

    fn extend_counting(&mut self, ev: &Event) -> bool {
        match ev.kind {
            EventKind::Inv => {
                let Some((m, args)) = key_of(ev, 0) else { return false };
                *self.inv_count.entry((m, args, None)).or_default() += 1;
                true
            }
            EventKind::InvR => {
                let Some((m, args)) = key_of(ev, 0) else { return false };
                let key = (m, args, None);
                let invs = self.inv_count.get(&key).copied().unwrap_or(0);
                let invrs = self.invr_count.entry(key).or_default();
                if invs > *invrs {
                    *invrs += 1;
                    true
                } else {
                    false
                }
            }
            _ => true,
        }
    }

    fn extend_multi(&mut self, ev: &Event) -> bool {
        match ev.kind {
            EventKind::Send => {
                let Some(id) = last_val(ev) else { return false };
                if !self.send_ids.insert(id) {
                    return false;
                }
                self.pending_sends.push(ev.clone());
                true
            }
            EventKind::Spawn => {
                let Some(pid) = last_val(ev) else { return false };
                if !self.spawn_pids.insert(pid) {
                    return false;
                }
                let Some((m, args)) = key_of(ev, 1) else { return false };
                *self.spawn_count.entry((m, args, pid)).or_default() += 1;
                true
            }
            EventKind::Receive => {
                // Receive-once; send-matching is the `ac` pattern's job.
                let Some(id) = last_val(ev) else { return false };
                self.consumed.insert(id)
            }
            EventKind::Inv => {
                let Some((m, args)) = key_of(ev, 0) else { return false };
                *self.inv_count.entry((m, args, ev.tag)).or_default() += 1;
                true
            }
            EventKind::InvR => {
                let Some((m, args)) = key_of(ev, 0) else { return false };
                let Some(tag) = ev.tag else { return false };
                let key = (m, args, Some(tag));
                let invs = self.inv_count.get(&key).copied().unwrap_or(0);
                let spawns = self
                    .spawn_count
                    .get(&(key.0.clone(), key.1.clone(), tag))
                    .copied()
                    .unwrap_or(0);
                let invrs = self.invr_count.entry(key).or_default();
                if invs + spawns > *invrs {
                    *invrs += 1;
                    true
                } else {
                    false
                }
            }
            _ => true,
        }
    }

    fn extend_actor(&mut self, ev: &Event, futures: bool) -> bool {
        match ev.kind {
            EventKind::New => {
                let Some(obj) = ev.payload.first().and_then(|se| se.as_value().copied())
                else {
                    return false;
                };
                self.objects.insert(obj)
            }
            EventKind::Inv => {
                let Some(callee) = penultimate_val(ev) else { return false };
                let Some(id) = last_val(ev) else { return false };
                if !self.objects.contains(&callee) || self.inv_by_id.contains_key(&id) {
                    return false;
                }
                self.inv_by_id.insert(id, ev.clone());
                true
            }
            EventKind::InvR => {
                let Some(id) = last_val(ev) else { return false };
                if !self.invr_ids.insert(id) {
                    return false;
                }
                let Some(inv) = self.inv_by_id.get(&id) else { return false };
                if inv.method != ev.method {
                    return false;
                }
                if futures {
                    let Some(caller) = penultimate_val(ev) else { return false };
                    values(inv.leading(2)) == values(ev.leading(2))
                        && penultimate_val(inv).map(Some) == Some(ev.tag)
                        && inv.tag == Some(caller)
                } else {
                    values(inv.leading(2)) == values(ev.leading(1))
                        && penultimate_val(inv).map(Some) == Some(ev.tag)
                }
            }
            EventKind::Comp => {
                if futures {
                    let (Some(fut), Some(v)) = (
                        ev.payload.first().and_then(|se| se.as_value().copied()),
                        last_val(ev),
                    ) else {
                        return false;
                    };
                    self.comp_pairs.insert((fut, v));
                }
                true
            }
            EventKind::CompR => {
                if !futures {
                    return true;
                }
                let (Some(fut), Some(v)) = (
                    ev.payload.first().and_then(|se| se.as_value().copied()),
                    last_val(ev),
                ) else {
                    return false;
                };
                self.comp_pairs.contains(&(fut, v))
            }
            _ => true,
        }
    }

    fn extend_patterns(&mut self, ev: &Event) -> bool {
        let patterns = self.policy.patterns.clone();
        if patterns.is_empty() {
            return true;
        }
        let is_comm = matches!(ev.kind, EventKind::Send | EventKind::Receive);
        // Visibility is checked before state updates (needs prior knowledge).
        if patterns.contains(&Pattern::ChannelVisibility) && is_comm {
            if let Some(Value::Cid(c)) = penultimate_val(ev) {
                if let Some(owner) = self.owners.get(&c).copied() {
                    let visible = ev.tag == Some(Value::Pid(owner))
                        || ev
                            .tag
                            .map(|p| {
                                self.learned_channels
                                    .get(&p)
                                    .is_some_and(|s| s.contains(&Value::Cid(c)))
                            })
                            .unwrap_or(false);
                    if !visible {
                        return false;
                    }
                }
            }
        }
        if patterns.contains(&Pattern::ConsumeOnce) && ev.kind == EventKind::Receive {
            let Some(id) = last_val(ev) else { return false };
            if !self.pat_consumed.insert(id) {
                return false;
            }
        }
        // Asynchronous matching underlies fifo, bounded and sync as well.
        let ac_active = patterns.contains(&Pattern::Ac)
            || patterns.contains(&Pattern::Fifo)
            || patterns.iter().any(|p| matches!(p, Pattern::Bounded(_)))
            || patterns.contains(&Pattern::Sync);
        if ac_active {
            match ev.kind {
                EventKind::Send => self.pending_sends.push(ev.clone()),
                EventKind::Receive => {
                    let Some(id) = last_val(ev) else { return false };
                    if !self.ac_consumed.insert(id) {
                        return false;
                    }
                    let Some(pos) =
                        self.pending_sends.iter().position(|s| comm_matches(s, ev))
                    else {
                        return false;
                    };
                    self.pending_sends.remove(pos);
                }
                _ => {}
            }
        }
        if is_comm {
            if patterns.contains(&Pattern::Sync) {
                match ev.kind {
                    EventKind::Send => {
                        if self.last_comm_send.is_some() {
                            return false; // previous send still undelivered
                        }
                        self.last_comm_send = Some(ev.clone());
                    }
                    EventKind::Receive => {
                        let Some(send) = self.last_comm_send.take() else {
                            return false;
                        };
                        if !comm_matches(&send, ev) {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
            let fifo_active = patterns.contains(&Pattern::Fifo)
                || patterns.iter().any(|p| matches!(p, Pattern::Bounded(_)));
            if fifo_active {
                match ev.kind {
                    EventKind::Send => {
                        let Some(id) = last_val(ev) else { return false };
                        self.fifo_pending
                            .entry((ev.tag, penultimate_val(ev)))
                            .or_default()
                            .push_back(id);
                    }
                    EventKind::Receive => {
                        let id = last_val(ev);
                        for q in self.fifo_pending.values_mut() {
                            if let Some(pos) = q.iter().position(|m| Some(*m) == id) {
                                if pos != 0 {
                                    return false;
                                }
                                q.pop_front();
                                break;
                            }
                        }
                    }
                    _ => {}
                }
            }
            if let Some(bound) = patterns.iter().find_map(|p| match p {
                Pattern::Bounded(n) => Some(*n),
                _ => None,
            }) {
                match ev.kind {
                    EventKind::Send => {
                        self.in_flight += 1;
                        if self.in_flight > bound {
                            return false;
                        }
                    }
                    EventKind::Receive => {
                        self.in_flight = self.in_flight.saturating_sub(1);
                    }
                    _ => {}
                }
            }
            if patterns.contains(&Pattern::ChannelVisibility) && ev.kind == EventKind::Receive {
                if let (Some(p), Some(v)) = (
                    ev.tag,
                    ev.payload.first().and_then(|se| se.as_value().copied()),
                ) {
                    if matches!(v, Value::Cid(_)) {
                        self.learned_channels.entry(p).or_default().insert(v);
                    }
                }
            }
        }
        if let Some(log) = &mut self.co_log {
            log.push(ev.clone());
            if !wf_co(log) {
                return false;
            }
        }
        true
    }
}
