//! Expressions and starred expressions over variables and values.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use crate::value::Value;

/// A variable name. Cheap to clone; ordered for use in deterministic maps.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Var {
        Var(Arc::from(name))
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Var {
        Var::new(s)
    }
}

impl From<String> for Var {
    fn from(s: String) -> Var {
        Var(Arc::from(s.as_str()))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary operators. Arithmetic and order comparison apply to integers;
/// `Eq`/`Neq` apply within a single sort.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Neq,
    Lt,
    Leq,
    Gt,
    Geq,
}

impl Op {
    pub fn symbol(&self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Eq => "==",
            Op::Neq => "!=",
            Op::Lt => "<",
            Op::Leq => "<=",
            Op::Gt => ">",
            Op::Geq => ">=",
        }
    }
}

/// A starred expression: expression or the unknown marker `∗`. Plain
/// expressions are the star-free subset; the parser never produces `Star`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum SExpr {
    Var(Var),
    Val(Value),
    Bin(Op, Arc<SExpr>, Arc<SExpr>),
    Star,
}

impl SExpr {
    pub fn var(name: &str) -> SExpr {
        SExpr::Var(Var::new(name))
    }
    pub fn int(n: i64) -> SExpr {
        SExpr::Val(Value::Int(n))
    }
    pub fn tt() -> SExpr {
        SExpr::Val(Value::TT)
    }
    pub fn ff() -> SExpr {
        SExpr::Val(Value::FF)
    }
    pub fn bin(op: Op, l: SExpr, r: SExpr) -> SExpr {
        SExpr::Bin(op, Arc::new(l), Arc::new(r))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            SExpr::Val(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self, SExpr::Val(_))
    }

    /// All variables occurring in the expression.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            SExpr::Var(x) => {
                out.insert(x.clone());
            }
            SExpr::Val(_) | SExpr::Star => {}
            SExpr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn contains_star(&self) -> bool {
        match self {
            SExpr::Star => true,
            SExpr::Var(_) | SExpr::Val(_) => false,
            SExpr::Bin(_, l, r) => l.contains_star() || r.contains_star(),
        }
    }

    /// Substitute every occurrence of variable `x` by expression `e`.
    pub fn subst(&self, x: &Var, e: &SExpr) -> SExpr {
        match self {
            SExpr::Var(y) if y == x => e.clone(),
            SExpr::Var(_) | SExpr::Val(_) | SExpr::Star => self.clone(),
            SExpr::Bin(op, l, r) => SExpr::bin(*op, l.subst(x, e), r.subst(x, e)),
        }
    }

    /// Logical negation of a boolean expression, kept star-free and without a
    /// dedicated negation node: comparisons invert their operator, boolean
    /// literals flip, and anything else becomes `e == ff`.
    pub fn negated(&self) -> SExpr {
        match self {
            SExpr::Val(Value::Bool(b)) => SExpr::Val(Value::Bool(!b)),
            SExpr::Bin(op, l, r) => {
                let inv = match op {
                    Op::Eq => Some(Op::Neq),
                    Op::Neq => Some(Op::Eq),
                    Op::Lt => Some(Op::Geq),
                    Op::Geq => Some(Op::Lt),
                    Op::Gt => Some(Op::Leq),
                    Op::Leq => Some(Op::Gt),
                    _ => None,
                };
                match inv {
                    Some(op) => SExpr::Bin(op, l.clone(), r.clone()),
                    None => SExpr::bin(Op::Eq, self.clone(), SExpr::ff()),
                }
            }
            _ => SExpr::bin(Op::Eq, self.clone(), SExpr::ff()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            SExpr::Bin(op, _, _) => match op {
                Op::Eq | Op::Neq | Op::Lt | Op::Leq | Op::Gt | Op::Geq => 1,
                Op::Add | Op::Sub => 2,
                Op::Mul | Op::Div => 3,
            },
            _ => 4,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Var(x) => write!(f, "{x}"),
            SExpr::Val(v) => write!(f, "{v}"),
            SExpr::Star => write!(f, "*"),
            SExpr::Bin(op, l, r) => {
                let p = self.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Same-precedence right operands are parenthesized so that
                // printing is unambiguous under left associativity.
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

/// Errors raised while evaluating expressions in a state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EvalError {
    /// A variable not bound in the evaluating state.
    Unbound(Var),
    /// Operator applied to operands of the wrong sorts.
    Sort {
        op: Op,
        left: &'static str,
        right: &'static str,
    },
    DivisionByZero,
    Overflow,
    /// `∗` encountered where an expression was required.
    StarInExpression,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(x) => write!(f, "unbound variable `{x}`"),
            EvalError::Sort { op, left, right } => {
                write!(f, "sort error: {left} {} {right}", op.symbol())
            }
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::Overflow => write!(f, "integer overflow"),
            EvalError::StarInExpression => write!(f, "star marker used as an expression"),
        }
    }
}

/// Apply a binary operator to two concrete values with checked arithmetic.
pub fn apply_op(op: Op, l: &Value, r: &Value) -> Result<Value, EvalError> {
    use Value::*;
    let sort_err = || EvalError::Sort {
        op,
        left: l.sort_name(),
        right: r.sort_name(),
    };
    match op {
        Op::Add | Op::Sub | Op::Mul | Op::Div => match (l, r) {
            (Int(a), Int(b)) => {
                let res = match op {
                    Op::Add => a.checked_add(*b),
                    Op::Sub => a.checked_sub(*b),
                    Op::Mul => a.checked_mul(*b),
                    Op::Div => {
                        if *b == 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.checked_div(*b)
                    }
                    _ => unreachable!(),
                };
                res.map(Int).ok_or(EvalError::Overflow)
            }
            _ => Err(sort_err()),
        },
        Op::Lt | Op::Leq | Op::Gt | Op::Geq => match (l, r) {
            (Int(a), Int(b)) => Ok(Bool(match op {
                Op::Lt => a < b,
                Op::Leq => a <= b,
                Op::Gt => a > b,
                Op::Geq => a >= b,
                _ => unreachable!(),
            })),
            _ => Err(sort_err()),
        },
        Op::Eq | Op::Neq => {
            if !l.same_sort(r) {
                return Err(sort_err());
            }
            let eq = l == r;
            Ok(Bool(if op == Op::Eq { eq } else { !eq }))
        }
    }
}
