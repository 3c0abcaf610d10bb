//! Event markers inserted into traces, with optional process/object tags.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, SExpr, Var};
use crate::value::Value;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EventKind {
    /// User input.
    Inp,
    /// Invocation of a procedure / asynchronous method call.
    Inv,
    /// Invocation reaction: start of a method body's execution.
    InvR,
    /// Message send.
    Send,
    /// Message receive.
    Receive,
    /// Process spawn.
    Spawn,
    /// Object creation.
    New,
    /// Completion: a future is resolved.
    Comp,
    /// Completion reaction: a future's value is fetched.
    CompR,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Inp => "inpEv",
            EventKind::Inv => "invEv",
            EventKind::InvR => "invREv",
            EventKind::Send => "sendEv",
            EventKind::Receive => "receiveEv",
            EventKind::Spawn => "spawnEv",
            EventKind::New => "newEv",
            EventKind::Comp => "compEv",
            EventKind::CompR => "compREv",
        }
    }

    pub fn from_name(s: &str) -> Option<EventKind> {
        Some(match s {
            "inpEv" => EventKind::Inp,
            "invEv" => EventKind::Inv,
            "invREv" => EventKind::InvR,
            "sendEv" => EventKind::Send,
            "receiveEv" => EventKind::Receive,
            "spawnEv" => EventKind::Spawn,
            "newEv" => EventKind::New,
            "compEv" => EventKind::Comp,
            "compREv" => EventKind::CompR,
            _ => return None,
        })
    }
}

/// A structured event marker. Payload layout is positional per kind and
/// language stratum; the helper accessors document the conventions used by
/// the composition and well-formedness code:
///
/// - `Inp`: `[value]`
/// - `Inv` (procedures): method + `[arg]`
/// - `Inv` (actors): method + `[args…, callee, id]`
/// - `InvR` (procedures): method + `[arg]`
/// - `InvR` (actors): method + `[args…, id]`
/// - `InvR` (futures): method + `[args…, caller, id]`
/// - `Send`/`Receive`: `[values…, peer-or-channel, message-id]`
/// - `Spawn`: method + `[args…, new-pid]`
/// - `New`: `[object, ctor-args…]`
/// - `Comp`/`CompR`: `[future, value]`
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Event {
    pub kind: EventKind,
    pub method: Option<String>,
    pub payload: Vec<SExpr>,
    pub tag: Option<Value>,
}

impl Event {
    pub fn new(kind: EventKind, payload: Vec<SExpr>) -> Event {
        Event {
            kind,
            method: None,
            payload,
            tag: None,
        }
    }

    pub fn with_method(kind: EventKind, method: &str, payload: Vec<SExpr>) -> Event {
        Event {
            kind,
            method: Some(String::from(method)),
            payload,
            tag: None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        self.payload.iter().all(|se| se.is_concrete())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for se in &self.payload {
            se.collect_vars(&mut out);
        }
        out
    }

    /// Tag the event with a process/object id. Retagging with the same id is
    /// the identity; a different id signals a composition bug.
    pub fn tagged(&self, id: Value) -> Result<Event, TagError> {
        match self.tag {
            Some(t) if t != id => Err(TagError {
                existing: t,
                requested: id,
            }),
            _ => Ok(Event {
                tag: Some(id),
                ..self.clone()
            }),
        }
    }

    pub fn map_payload<E>(
        &self,
        mut f: impl FnMut(&SExpr) -> Result<SExpr, E>,
    ) -> Result<Event, E> {
        let payload = self
            .payload
            .iter()
            .map(|se| f(se))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Event {
            payload,
            ..self.clone()
        })
    }

    /// Last payload entry as a concrete value (message/future id position for
    /// send/receive/inv/invR conventions).
    pub fn last_value(&self) -> Option<&Value> {
        self.payload.last().and_then(|se| se.as_value())
    }

    /// Payload entry `len - 2` as a concrete value (peer/channel/callee/caller
    /// position).
    pub fn penultimate_value(&self) -> Option<&Value> {
        if self.payload.len() < 2 {
            return None;
        }
        self.payload[self.payload.len() - 2].as_value()
    }

    /// Leading payload entries, excluding the trailing `n` positional slots.
    pub fn leading(&self, trailing: usize) -> &[SExpr] {
        &self.payload[..self.payload.len().saturating_sub(trailing)]
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(tag) = &self.tag {
            write!(f, "^{tag}")?;
        }
        write!(f, "(")?;
        let mut first = true;
        if let Some(m) = &self.method {
            write!(f, "{m}")?;
            first = false;
        }
        for se in &self.payload {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{se}")?;
            first = false;
        }
        write!(f, ")")
    }
}

/// Attempt to retag an event with a conflicting id.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TagError {
    pub existing: Value,
    pub requested: Value,
}

impl fmt::Display for TagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "event already tagged with {} (requested {})",
            self.existing, self.requested
        )
    }
}

/// Evaluate that this payload is concrete, or report which entry is not.
pub fn require_concrete_payload(ev: &Event) -> Result<(), EvalError> {
    for se in &ev.payload {
        if !se.is_concrete() {
            return Err(EvalError::StarInExpression);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagging_is_idempotent_and_conflicts_error() {
        let ev = Event::with_method(EventKind::Inv, "m", alloc::vec![SExpr::int(1)]);
        let t = ev.tagged(Value::Pid(0)).unwrap();
        assert_eq!(t.tagged(Value::Pid(0)).unwrap(), t);
        assert!(t.tagged(Value::Pid(1)).is_err());
    }

    #[test]
    fn display_format() {
        let ev = Event::with_method(EventKind::Send, "", alloc::vec![]);
        let _ = ev; // smoke: constructors compile
        let ev = Event::new(
            EventKind::Send,
            alloc::vec![
                SExpr::int(5),
                SExpr::Val(Value::Pid(1)),
                SExpr::Val(Value::Mid(0))
            ],
        )
        .tagged(Value::Pid(0))
        .unwrap();
        assert_eq!(alloc::format!("{ev}"), "sendEv^p0(5, p1, i0)");
    }
}
