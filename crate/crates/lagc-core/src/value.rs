//! Concrete values: bounded integers, booleans, and the tagged id sorts.

use core::fmt;

/// A concrete value. Each id kind is a distinct tagged natural number; id
/// kinds are not interconvertible and support only equality.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    /// Process identifier.
    Pid(u32),
    /// Message identifier.
    Mid(u32),
    /// Object identifier.
    Oid(u32),
    /// Future identifier.
    Fid(u32),
    /// Channel identifier.
    Cid(u32),
}

impl Value {
    pub const TT: Value = Value::Bool(true);
    pub const FF: Value = Value::Bool(false);

    pub fn sort_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Pid(_) => "pid",
            Value::Mid(_) => "mid",
            Value::Oid(_) => "oid",
            Value::Fid(_) => "fid",
            Value::Cid(_) => "cid",
        }
    }

    /// True if both values belong to the same sort (comparable with `==`).
    pub fn same_sort(&self, other: &Value) -> bool {
        self.sort_name() == other.sort_name()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(true) => write!(f, "tt"),
            Value::Bool(false) => write!(f, "ff"),
            Value::Pid(n) => write!(f, "p{n}"),
            Value::Mid(n) => write!(f, "i{n}"),
            Value::Oid(n) => write!(f, "o{n}"),
            Value::Fid(n) => write!(f, "f{n}"),
            Value::Cid(n) => write!(f, "c{n}"),
        }
    }
}
