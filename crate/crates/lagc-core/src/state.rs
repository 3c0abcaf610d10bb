//! Symbolic states: finite partial maps from variables to starred
//! expressions, with evaluation, simplifying update, well-formedness, and
//! concretisation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{apply_op, EvalError, SExpr, Var};
use crate::value::Value;

/// A finite partial map Var → SExpr. A variable bound to `∗` is *symbolic*.
/// States are kept simplified: concrete values are propagated into bound
/// expressions on every update.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SymbolicState {
    bindings: BTreeMap<Var, SExpr>,
}

/// A finite map from (symbolic) variables to concrete values, used to turn
/// symbolic states and traces into concrete ones.
pub type ConcretizationMapping = BTreeMap<Var, Value>;

impl SymbolicState {
    pub fn new() -> SymbolicState {
        SymbolicState::default()
    }

    pub fn from_bindings<I: IntoIterator<Item = (Var, SExpr)>>(iter: I) -> SymbolicState {
        SymbolicState {
            bindings: iter.into_iter().collect(),
        }
    }

    pub fn get(&self, x: &Var) -> Option<&SExpr> {
        self.bindings.get(x)
    }

    pub fn contains(&self, x: &Var) -> bool {
        self.bindings.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &SExpr)> {
        self.bindings.iter()
    }

    pub fn dom(&self) -> impl Iterator<Item = &Var> {
        self.bindings.keys()
    }

    /// The set of symbolic variables: those bound to `∗`.
    pub fn symb(&self) -> BTreeSet<Var> {
        self.bindings
            .iter()
            .filter(|(_, se)| matches!(se, SExpr::Star))
            .map(|(x, _)| x.clone())
            .collect()
    }

    pub fn is_symbolic_var(&self, x: &Var) -> bool {
        matches!(self.bindings.get(x), Some(SExpr::Star))
    }

    /// A state is concrete when no variable is symbolic and every binding is
    /// a value.
    pub fn is_concrete(&self) -> bool {
        self.bindings.values().all(|se| se.is_concrete())
    }

    /// Well-formedness: every variable occurring in a bound expression is
    /// itself bound to `∗`.
    pub fn is_well_formed(&self) -> bool {
        self.bindings.values().all(|se| {
            se.vars()
                .iter()
                .all(|x| matches!(self.bindings.get(x), Some(SExpr::Star)))
        })
    }

    /// State extension: `self` extends `smaller` when it agrees with every
    /// binding of `smaller`.
    pub fn extends(&self, smaller: &SymbolicState) -> bool {
        smaller
            .bindings
            .iter()
            .all(|(x, se)| self.bindings.get(x) == Some(se))
    }

    /// Bind every variable in `fresh` to `∗`. The variables must not already
    /// be in the domain.
    pub fn extend_star<'a, I: IntoIterator<Item = &'a Var>>(
        &self,
        fresh: I,
    ) -> Result<SymbolicState, EvalError> {
        let mut out = self.clone();
        for x in fresh {
            if out.bindings.insert(x.clone(), SExpr::Star).is_some() {
                // A "fresh" variable colliding with the domain is an internal
                // invariant breach surfaced as an evaluation error.
                return Err(EvalError::Unbound(x.clone()));
            }
        }
        Ok(out)
    }

    /// Insert a binding without evaluation or simplification. Intended for
    /// constructing test states and initial states.
    pub fn bind_raw(&mut self, x: Var, se: SExpr) {
        self.bindings.insert(x, se);
    }

    /// Remove the given variables (used to drop concretised symbolic
    /// variables from output states).
    pub fn without<'a, I: IntoIterator<Item = &'a Var>>(&self, vars: I) -> SymbolicState {
        let mut out = self.clone();
        for x in vars {
            out.bindings.remove(x);
        }
        out
    }

    /// Rename domain variables according to `map` (used for object-qualified
    /// field names once the object symbol is concretised).
    pub fn rename_vars(&self, map: &BTreeMap<Var, Var>) -> SymbolicState {
        if map.is_empty() {
            return self.clone();
        }
        SymbolicState {
            bindings: self
                .bindings
                .iter()
                .map(|(x, se)| (map.get(x).unwrap_or(x).clone(), se.clone()))
                .collect(),
        }
    }

    /// Update at `x` with `se` evaluated in the current state, then propagate
    /// concrete values through the remaining bindings.
    pub fn update(&self, x: &Var, se: &SExpr) -> Result<SymbolicState, EvalError> {
        let v = eval_expr(self, se)?;
        let mut out = self.clone();
        out.bindings.insert(x.clone(), v);
        out.simplify()?;
        Ok(out)
    }

    /// Apply several updates in sequence.
    pub fn update_many(&self, updates: &[(Var, SExpr)]) -> Result<SymbolicState, EvalError> {
        let mut out = self.clone();
        for (x, se) in updates {
            out = out.update(x, se)?;
        }
        Ok(out)
    }

    /// Re-evaluate every non-star binding until a fixpoint is reached.
    fn simplify(&mut self) -> Result<(), EvalError> {
        // Each productive pass resolves at least one binding further toward a
        // value, so `len + 1` passes always suffice.
        for _ in 0..=self.bindings.len() {
            let mut changed = false;
            let keys: Vec<Var> = self.bindings.keys().cloned().collect();
            for x in keys {
                let se = self.bindings[&x].clone();
                if matches!(se, SExpr::Star) {
                    continue;
                }
                let evd = eval_expr(self, &se)?;
                if evd != se {
                    self.bindings.insert(x, evd);
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
        }
        Ok(())
    }
}

impl fmt::Display for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (x, se)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match se {
                SExpr::Star => write!(f, "{x} -> *")?,
                _ => write!(f, "{x} -> {se}")?,
            }
        }
        write!(f, "]")
    }
}

/// The evaluation function: reduces known variables to their values, folds
/// operators whose operands reduce to values, and leaves symbolic variables
/// in place.
pub fn eval_expr(state: &SymbolicState, e: &SExpr) -> Result<SExpr, EvalError> {
    match e {
        SExpr::Val(_) => Ok(e.clone()),
        SExpr::Star => Err(EvalError::StarInExpression),
        SExpr::Var(x) => match state.get(x) {
            None => Err(EvalError::Unbound(x.clone())),
            Some(SExpr::Star) => Ok(SExpr::Var(x.clone())),
            Some(se) => Ok(se.clone()),
        },
        SExpr::Bin(op, l, r) => {
            let le = eval_expr(state, l)?;
            let re = eval_expr(state, r)?;
            match (le.as_value(), re.as_value()) {
                (Some(lv), Some(rv)) => Ok(SExpr::Val(apply_op(*op, lv, rv)?)),
                _ => Ok(SExpr::bin(*op, le, re)),
            }
        }
    }
}

/// Errors raised by state concretisation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ConcretizeError {
    /// The mapping misses a symbolic variable of the state.
    MissingSymbol(Var),
    /// The mapping binds a non-symbolic variable of the state's domain.
    ClashingBinding(Var),
    Eval(EvalError),
}

impl fmt::Display for ConcretizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcretizeError::MissingSymbol(x) => {
                write!(f, "concretisation mapping misses symbolic variable `{x}`")
            }
            ConcretizeError::ClashingBinding(x) => {
                write!(f, "concretisation mapping binds non-symbolic variable `{x}`")
            }
            ConcretizeError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl From<EvalError> for ConcretizeError {
    fn from(e: EvalError) -> Self {
        ConcretizeError::Eval(e)
    }
}

/// Concretisation of `state` with `rho`: requires dom(ρ) ∩ dom(σ) = symb(σ);
/// the result is ρ ∪ { x ↦ eval under ρ of σ(x) } and is concrete.
pub fn concretize_state(
    rho: &ConcretizationMapping,
    state: &SymbolicState,
) -> Result<SymbolicState, ConcretizeError> {
    for x in state.symb() {
        if !rho.contains_key(&x) {
            return Err(ConcretizeError::MissingSymbol(x));
        }
    }
    for x in rho.keys() {
        if state.contains(x) && !state.is_symbolic_var(x) {
            return Err(ConcretizeError::ClashingBinding(x.clone()));
        }
    }
    let rho_state = SymbolicState::from_bindings(
        rho.iter().map(|(x, v)| (x.clone(), SExpr::Val(*v))),
    );
    let mut out = rho_state.clone();
    for (x, se) in state.iter() {
        if rho.contains_key(x) {
            continue;
        }
        out.bind_raw(x.clone(), eval_expr(&rho_state, se)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;

    /// σ₁ = [x₀ ↦ Y₀+42, Y₀ ↦ ∗, w₀ ↦ 42, x₁ ↦ Y₁, Y₁ ↦ ∗]
    fn sigma1() -> SymbolicState {
        SymbolicState::from_bindings([
            (
                Var::new("x0"),
                SExpr::bin(Op::Add, SExpr::var("Y0"), SExpr::int(42)),
            ),
            (Var::new("Y0"), SExpr::Star),
            (Var::new("w0"), SExpr::int(42)),
            (Var::new("x1"), SExpr::var("Y1")),
            (Var::new("Y1"), SExpr::Star),
        ])
    }

    /// σ₂ = σ₃ = [x₀ ↦ 45, Y₀ ↦ 3, w₀ ↦ 42, x₁ ↦ 2, Y₁ ↦ 2]
    fn sigma2() -> SymbolicState {
        SymbolicState::from_bindings([
            (Var::new("x0"), SExpr::int(45)),
            (Var::new("Y0"), SExpr::int(3)),
            (Var::new("w0"), SExpr::int(42)),
            (Var::new("x1"), SExpr::int(2)),
            (Var::new("Y1"), SExpr::int(2)),
        ])
    }

    #[test]
    fn eval_leaves_symbolic_variables_in_place() {
        // val(x0 + Y0 + Y1) = (Y0 + 42) + Y0 + Y1
        let e = SExpr::bin(
            Op::Add,
            SExpr::bin(Op::Add, SExpr::var("x0"), SExpr::var("Y0")),
            SExpr::var("Y1"),
        );
        let expect = SExpr::bin(
            Op::Add,
            SExpr::bin(
                Op::Add,
                SExpr::bin(Op::Add, SExpr::var("Y0"), SExpr::int(42)),
                SExpr::var("Y0"),
            ),
            SExpr::var("Y1"),
        );
        assert_eq!(eval_expr(&sigma1(), &e), Ok(expect));
    }

    #[test]
    fn eval_of_values_and_folding() {
        assert_eq!(eval_expr(&sigma1(), &SExpr::int(5)), Ok(SExpr::int(5)));
        let s = SymbolicState::from_bindings([(Var::new("x"), SExpr::int(2))]);
        let e = SExpr::bin(Op::Mul, SExpr::var("x"), SExpr::int(3));
        assert_eq!(eval_expr(&s, &e), Ok(SExpr::int(6)));
    }

    #[test]
    fn eval_unbound_variable_is_an_error() {
        let s = SymbolicState::new();
        assert_eq!(
            eval_expr(&s, &SExpr::var("z")),
            Err(EvalError::Unbound(Var::new("z")))
        );
    }

    #[test]
    fn eval_is_idempotent() {
        let e = SExpr::bin(
            Op::Add,
            SExpr::bin(Op::Add, SExpr::var("x0"), SExpr::var("Y0")),
            SExpr::var("Y1"),
        );
        let once = eval_expr(&sigma1(), &e).unwrap();
        let twice = eval_expr(&sigma1(), &once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn update_propagates_concrete_values() {
        // σ₁[Y₀↦3][Y₁↦2] simplifies to σ₂.
        let s = sigma1()
            .update(&Var::new("Y0"), &SExpr::int(3))
            .unwrap()
            .update(&Var::new("Y1"), &SExpr::int(2))
            .unwrap();
        assert_eq!(s, sigma2());
        assert!(s.is_concrete());
        assert!(s.is_well_formed());
    }

    #[test]
    fn identity_update() {
        let s = sigma2();
        let s2 = s.update(&Var::new("x0"), &SExpr::var("x0")).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn update_then_constant_propagation() {
        let s = SymbolicState::from_bindings([(Var::new("x"), SExpr::int(1))]);
        let s2 = s
            .update(
                &Var::new("y"),
                &SExpr::bin(Op::Add, SExpr::var("x"), SExpr::int(1)),
            )
            .unwrap();
        assert_eq!(
            s2,
            SymbolicState::from_bindings([
                (Var::new("x"), SExpr::int(1)),
                (Var::new("y"), SExpr::int(2)),
            ])
        );
    }

    #[test]
    fn concretize_sigma1_gives_sigma3() {
        let rho: ConcretizationMapping = [
            (Var::new("Y0"), Value::Int(3)),
            (Var::new("Y1"), Value::Int(2)),
        ]
        .into_iter()
        .collect();
        let s3 = concretize_state(&rho, &sigma1()).unwrap();
        assert_eq!(s3, sigma2());
        assert!(s3.symb().is_empty());
    }

    #[test]
    fn concretize_concrete_state_with_empty_rho() {
        let rho = ConcretizationMapping::new();
        assert_eq!(concretize_state(&rho, &sigma2()), Ok(sigma2()));
    }

    #[test]
    fn concretize_allows_extra_bindings() {
        // ρ₂ = [X↦2, Y↦0] on σ₄ = [X↦∗, z↦3] → [X↦2, Y↦0, z↦3]
        let rho: ConcretizationMapping = [
            (Var::new("X"), Value::Int(2)),
            (Var::new("Y"), Value::Int(0)),
        ]
        .into_iter()
        .collect();
        let s4 = SymbolicState::from_bindings([
            (Var::new("X"), SExpr::Star),
            (Var::new("z"), SExpr::int(3)),
        ]);
        let out = concretize_state(&rho, &s4).unwrap();
        assert_eq!(
            out,
            SymbolicState::from_bindings([
                (Var::new("X"), SExpr::int(2)),
                (Var::new("Y"), SExpr::int(0)),
                (Var::new("z"), SExpr::int(3)),
            ])
        );
    }

    #[test]
    fn concretize_missing_symbol_fails() {
        let rho: ConcretizationMapping =
            [(Var::new("Y0"), Value::Int(3))].into_iter().collect();
        assert_eq!(
            concretize_state(&rho, &sigma1()),
            Err(ConcretizeError::MissingSymbol(Var::new("Y1")))
        );
    }
}
