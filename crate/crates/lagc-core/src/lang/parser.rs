//! Recursive-descent parser for the unified surface language, with
//! per-variant statement gating.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Op, SExpr, Var};
use crate::lang::ast::{
    ChannelDecl, Class, LanguageVariant, Method, ProcDef, Program, Stmt,
};
use crate::lang::lexer::{lex, Tok, Token};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ParseError {
    /// Malformed input, with 1-based source position.
    Syntax { line: u32, col: u32, msg: String },
    /// Structurally valid input using a construct the chosen language
    /// variant does not admit.
    Gate(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, col, msg } => {
                write!(f, "syntax error at {line}:{col}: {msg}")
            }
            ParseError::Gate(msg) => write!(f, "language gate violation: {msg}"),
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    variant: LanguageVariant,
    loop_counter: u32,
    /// Stack of `__endN` labels for `break` inside desugared `do` loops.
    break_targets: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: String) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            self.err(alloc::format!("expected {tok}, found {}", self.peek()))
        }
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek() == &tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(alloc::format!("expected {what}, found {other}")),
        }
    }

    /// A program variable: identifiers starting with a capital letter are
    /// reserved for symbolic names.
    fn var(&mut self) -> PResult<Var> {
        let (line, col) = self.here();
        let name = self.ident("variable name")?;
        if name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: alloc::format!(
                    "identifier `{name}` starts with a capital letter; capitalized names are reserved for symbolic variables"
                ),
            });
        }
        Ok(Var::new(&name))
    }

    fn lower_name(&mut self, what: &str) -> PResult<String> {
        let (line, col) = self.here();
        let name = self.ident(what)?;
        if name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: alloc::format!("{what} `{name}` must start with a lowercase letter"),
            });
        }
        Ok(name)
    }

    fn class_name(&mut self) -> PResult<String> {
        let (line, col) = self.here();
        let name = self.ident("class name")?;
        if !name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: alloc::format!("class name `{name}` must start with a capital letter"),
            });
        }
        Ok(name)
    }

    // ----- expressions -----

    fn expr(&mut self) -> PResult<SExpr> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::EqEq => Some(Op::Eq),
            Tok::NotEq => Some(Op::Neq),
            Tok::Lt => Some(Op::Lt),
            Tok::Leq => Some(Op::Leq),
            Tok::Gt => Some(Op::Gt),
            Tok::Geq => Some(Op::Geq),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let right = self.additive()?;
            Ok(SExpr::bin(op, left, right))
        } else {
            Ok(left)
        }
    }

    fn additive(&mut self) -> PResult<SExpr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => Op::Add,
                Tok::Minus => Op::Sub,
                _ => break,
            };
            self.bump();
            let right = self.multiplicative()?;
            left = SExpr::bin(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> PResult<SExpr> {
        let mut left = self.primary()?;
        loop {
            let op = match self.peek() {
                Tok::StarSym => Op::Mul,
                Tok::Slash => Op::Div,
                _ => break,
            };
            self.bump();
            let right = self.primary()?;
            left = SExpr::bin(op, left, right);
        }
        Ok(left)
    }

    fn primary(&mut self) -> PResult<SExpr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(SExpr::int(n))
            }
            Tok::Minus => {
                self.bump();
                let inner = self.primary()?;
                Ok(match inner {
                    SExpr::Val(crate::value::Value::Int(n)) => SExpr::int(-n),
                    other => SExpr::bin(Op::Sub, SExpr::int(0), other),
                })
            }
            Tok::True => {
                self.bump();
                Ok(SExpr::tt())
            }
            Tok::False => {
                self.bump();
                Ok(SExpr::ff())
            }
            Tok::Ident(_) => {
                let v = self.var()?;
                Ok(SExpr::Var(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => self.err(alloc::format!("expected expression, found {other}")),
        }
    }

    fn args(&mut self) -> PResult<Vec<SExpr>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                out.push(self.expr()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    // ----- statements -----

    fn at_seq_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Eof
                | Tok::RBrace
                | Tok::RParen
                | Tok::Fi
                | Tok::Od
                | Tok::Oc
                | Tok::Bar2
                | Tok::ColonColon
                | Tok::Else
        )
    }

    /// A (possibly sequential) statement, stopping at closing delimiters,
    /// branch separators, and end of input.
    fn stmt(&mut self) -> PResult<Stmt> {
        let mut items = Vec::new();
        loop {
            items.push(self.seq_item()?);
            if !self.eat(Tok::Semi) {
                break;
            }
            if self.at_seq_end() {
                break; // tolerate a trailing semicolon
            }
        }
        Ok(Stmt::seq_all(items))
    }

    fn seq_item(&mut self) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::Skip => {
                self.bump();
                Ok(Stmt::Skip)
            }
            Tok::Label => {
                self.bump();
                let l = self.lower_name("label name")?;
                self.expect(Tok::Colon)?;
                let s = self.seq_item()?;
                Ok(Stmt::Labeled(l, Box::new(s)))
            }
            Tok::Goto => {
                self.bump();
                let l = self.lower_name("label name")?;
                Ok(Stmt::Goto(l))
            }
            Tok::Break => {
                self.bump();
                match self.break_targets.last() {
                    Some(end) => Ok(Stmt::Goto(end.clone())),
                    None => self.err(String::from("`break` outside of a do loop")),
                }
            }
            Tok::If => {
                self.bump();
                if self.peek() == &Tok::ColonColon {
                    let branches = self.guarded_branches()?;
                    self.expect(Tok::Fi)?;
                    Ok(Stmt::Select(branches))
                } else {
                    let g = self.expr()?;
                    self.expect(Tok::LBrace)?;
                    let s = self.stmt()?;
                    self.expect(Tok::RBrace)?;
                    Ok(Stmt::If(g, Box::new(s)))
                }
            }
            Tok::While => {
                self.bump();
                let g = self.expr()?;
                self.expect(Tok::LBrace)?;
                let s = self.stmt()?;
                self.expect(Tok::RBrace)?;
                Ok(Stmt::While(g, Box::new(s)))
            }
            Tok::Do => {
                self.bump();
                let n = self.loop_counter;
                self.loop_counter += 1;
                let head = alloc::format!("__do{n}");
                let end = alloc::format!("__end{n}");
                self.break_targets.push(end.clone());
                let branches = self.guarded_branches()?;
                self.break_targets.pop();
                self.expect(Tok::Od)?;
                let looped: Vec<(SExpr, Stmt)> = branches
                    .into_iter()
                    .map(|(g, s)| (g, Stmt::seq(s, Stmt::Goto(head.clone()))))
                    .collect();
                Ok(Stmt::seq(
                    Stmt::Labeled(head, Box::new(Stmt::Select(looped))),
                    Stmt::Labeled(end, Box::new(Stmt::Skip)),
                ))
            }
            Tok::Co => {
                self.bump();
                let a = self.stmt()?;
                self.expect(Tok::Bar2)?;
                let b = self.stmt()?;
                self.expect(Tok::Oc)?;
                Ok(Stmt::Co(Box::new(a), Box::new(b)))
            }
            Tok::Atomic => {
                self.bump();
                self.expect(Tok::LParen)?;
                let s = self.stmt()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Atomic(Box::new(s)))
            }
            Tok::LBrace => {
                self.bump();
                let mut decls = Vec::new();
                while matches!(self.peek(), Tok::Ident(_)) && self.peek2() == &Tok::Semi {
                    decls.push(self.var()?);
                    self.expect(Tok::Semi)?;
                }
                let s = self.stmt()?;
                self.expect(Tok::RBrace)?;
                Ok(Stmt::Block(decls, Box::new(s)))
            }
            Tok::Input => {
                self.bump();
                self.expect(Tok::LParen)?;
                let x = self.var()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Input(x))
            }
            Tok::Call => {
                self.bump();
                self.expect(Tok::LParen)?;
                let m = self.lower_name("procedure name")?;
                let mut es = Vec::new();
                while self.eat(Tok::Comma) {
                    es.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Ok(Stmt::Call(m, es))
            }
            Tok::ColonColon => {
                self.bump();
                let g = self.expr()?;
                self.expect(Tok::Semi)?;
                // The guard owns the remainder of the sequence.
                let s = self.stmt()?;
                Ok(Stmt::Guarded(g, Box::new(s)))
            }
            Tok::Send => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::Comma)?;
                let d = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Send(e, d))
            }
            Tok::Receive => {
                self.bump();
                self.expect(Tok::LParen)?;
                let x = self.var()?;
                self.expect(Tok::Comma)?;
                let d = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Receive(x, d))
            }
            Tok::Await => {
                self.bump();
                let e = self.expr()?;
                if self.eat(Tok::Quest) {
                    Ok(Stmt::AwaitFut(e))
                } else {
                    Ok(Stmt::AwaitBool(e))
                }
            }
            Tok::Return => {
                self.bump();
                let e = self.expr()?;
                Ok(Stmt::Return(e))
            }
            Tok::This => {
                self.bump();
                self.expect(Tok::Dot)?;
                let m = self.lower_name("method name")?;
                let es = self.args()?;
                Ok(Stmt::SyncCall(m, es))
            }
            Tok::Ident(_) => self.ident_statement(),
            other => self.err(alloc::format!("expected a statement, found {other}")),
        }
    }

    /// Statements that begin with an identifier: assignment forms, the
    /// channel shorthands `c!e` / `c?x`, and actor sends `o!m(ē)`.
    fn ident_statement(&mut self) -> PResult<Stmt> {
        match self.peek2().clone() {
            Tok::Assign => {
                let x = self.var()?;
                self.bump(); // :=
                self.assign_rhs(x)
            }
            Tok::Bang => {
                let lhs = self.var()?;
                self.bump(); // !
                if self.variant == LanguageVariant::PromelaMini {
                    let e = self.expr()?;
                    Ok(Stmt::Send(e, SExpr::Var(lhs)))
                } else {
                    let m = self.lower_name("method name")?;
                    let es = self.args()?;
                    Ok(Stmt::AsyncSend(SExpr::Var(lhs), m, es))
                }
            }
            Tok::Quest => {
                let c = self.var()?;
                self.bump(); // ?
                let x = self.var()?;
                Ok(Stmt::Receive(x, SExpr::Var(c)))
            }
            other => self.err(alloc::format!(
                "expected `:=`, `!` or `?` after identifier, found {other}"
            )),
        }
    }

    fn assign_rhs(&mut self, x: Var) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::Spawn => {
                self.bump();
                self.expect(Tok::LParen)?;
                let m = self.lower_name("procedure name")?;
                let mut es = Vec::new();
                while self.eat(Tok::Comma) {
                    es.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Ok(Stmt::Spawn(x, m, es))
            }
            Tok::New => {
                self.bump();
                let cls = self.class_name()?;
                let es = self.args()?;
                Ok(Stmt::New(x, cls, es))
            }
            _ => {
                let e = self.expr()?;
                match self.peek() {
                    Tok::Bang => {
                        self.bump();
                        let m = self.lower_name("method name")?;
                        let es = self.args()?;
                        Ok(Stmt::AsyncAssign(x, e, m, es))
                    }
                    Tok::Dot => {
                        self.bump();
                        self.expect(Tok::Get)?;
                        Ok(Stmt::Get(x, e))
                    }
                    _ => Ok(Stmt::Assign(x, e)),
                }
            }
        }
    }

    fn guarded_branches(&mut self) -> PResult<Vec<(SExpr, Stmt)>> {
        let mut out = Vec::new();
        while self.eat(Tok::ColonColon) {
            let g = self.expr()?;
            self.expect(Tok::Semi)?;
            let s = self.stmt()?;
            out.push((g, s));
        }
        if out.is_empty() {
            return self.err(String::from("expected at least one `::` branch"));
        }
        Ok(out)
    }

    // ----- declarations -----

    fn method_decl(&mut self) -> PResult<(String, Method)> {
        self.expect(Tok::Method)?;
        let name = self.lower_name("method name")?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                params.push(self.var()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let body = self.stmt()?;
        self.expect(Tok::RBrace)?;
        Ok((name, Method { params, body }))
    }

    fn class_decl(&mut self) -> PResult<(String, Class)> {
        self.expect(Tok::Class)?;
        let name = self.class_name()?;
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while matches!(self.peek(), Tok::Ident(_)) && self.peek2() == &Tok::Semi {
            fields.push(self.var()?);
            self.expect(Tok::Semi)?;
        }
        let mut methods = BTreeMap::new();
        while self.peek() == &Tok::Method {
            let (mname, m) = self.method_decl()?;
            if methods.insert(mname.clone(), m).is_some() {
                return Err(ParseError::Gate(alloc::format!(
                    "duplicate method `{mname}` in class `{name}`"
                )));
            }
        }
        self.expect(Tok::RBrace)?;
        Ok((name, Class { fields, methods }))
    }

    fn main_block(&mut self) -> PResult<Stmt> {
        if self.eat(Tok::Main) {
            self.expect(Tok::LBrace)?;
            let s = self.stmt()?;
            self.expect(Tok::RBrace)?;
            Ok(s)
        } else {
            self.stmt()
        }
    }
}

/// Collect the label table for a process body: each label maps to the code
/// from that point to the end of the body.
fn collect_labels(s: &Stmt, rest: Stmt, map: &mut BTreeMap<String, Stmt>) -> Result<(), ParseError> {
    match s {
        Stmt::Seq(a, b) => {
            collect_labels(a, Stmt::seq((**b).clone(), rest.clone()), map)?;
            collect_labels(b, rest, map)
        }
        Stmt::Labeled(l, inner) => {
            let target = Stmt::seq((**inner).clone(), rest.clone());
            if map.insert(l.clone(), target).is_some() {
                return Err(ParseError::Gate(alloc::format!("duplicate label `{l}`")));
            }
            collect_labels(inner, rest, map)
        }
        Stmt::Select(branches) => {
            for (_, body) in branches {
                collect_labels(body, rest.clone(), map)?;
            }
            Ok(())
        }
        Stmt::Guarded(_, inner) => collect_labels(inner, rest, map),
        _ => Ok(()),
    }
}

/// Verify an active-object method body: it must end with `return e`, and
/// `return` may appear nowhere else.
fn check_return_tail(body: &Stmt, method: &str) -> Result<(), ParseError> {
    fn last_and_prefix(s: &Stmt) -> (&Stmt, Vec<&Stmt>) {
        match s {
            Stmt::Seq(a, b) => {
                let (last, mut pre) = last_and_prefix(b);
                pre.insert(0, a);
                (last, pre)
            }
            other => (other, Vec::new()),
        }
    }
    fn contains_return(s: &Stmt) -> bool {
        match s {
            Stmt::Return(_) => true,
            Stmt::Seq(a, b) | Stmt::Co(a, b) => contains_return(a) || contains_return(b),
            Stmt::If(_, s)
            | Stmt::While(_, s)
            | Stmt::Atomic(s)
            | Stmt::Block(_, s)
            | Stmt::Guarded(_, s)
            | Stmt::Labeled(_, s) => contains_return(s),
            Stmt::Select(bs) => bs.iter().any(|(_, s)| contains_return(s)),
            _ => false,
        }
    }
    let (last, prefix) = last_and_prefix(body);
    if !matches!(last, Stmt::Return(_)) {
        return Err(ParseError::Gate(alloc::format!(
            "method `{method}` must end with `return e`"
        )));
    }
    for s in prefix {
        if contains_return(s) {
            return Err(ParseError::Gate(alloc::format!(
                "`return` may only appear as the final statement of method `{method}`"
            )));
        }
    }
    Ok(())
}

/// Per-variant statement admissibility.
fn gate_stmt(variant: LanguageVariant, s: &Stmt, in_atomic: bool) -> Result<(), ParseError> {
    use LanguageVariant as V;
    let bad = |what: &str| {
        Err(ParseError::Gate(alloc::format!(
            "`{what}` is not available in the {} variant",
            variant.name()
        )))
    };
    let ok_here = match s {
        Stmt::Empty | Stmt::Skip | Stmt::Assign(..) | Stmt::Seq(..) => true,
        Stmt::If(..) => !matches!(variant, V::PromelaMini),
        Stmt::While(..) => matches!(variant, V::Seq | V::Par | V::Proc | V::Multi | V::ActiveObject),
        Stmt::Co(..) => matches!(variant, V::Par | V::Proc | V::Multi),
        Stmt::Atomic(..) => matches!(variant, V::Par | V::Proc | V::Multi | V::PromelaMini | V::Actor),
        Stmt::Block(..) => matches!(
            variant,
            V::Par | V::Proc | V::Multi | V::Actor | V::ActiveObject
        ),
        Stmt::Input(..) => matches!(variant, V::Par | V::Proc | V::Multi),
        Stmt::Call(..) => matches!(variant, V::Proc | V::Multi),
        Stmt::Guarded(..) | Stmt::Select(..) => matches!(variant, V::Par | V::Proc | V::Multi | V::PromelaMini),
        Stmt::Goto(..) | Stmt::Labeled(..) => matches!(variant, V::PromelaMini),
        Stmt::Send(..) | Stmt::Receive(..) => matches!(variant, V::Multi | V::PromelaMini),
        Stmt::Spawn(..) => matches!(variant, V::Multi),
        Stmt::AsyncSend(..) => matches!(variant, V::Actor),
        Stmt::AsyncAssign(..) | Stmt::AwaitBool(..) | Stmt::AwaitFut(..) | Stmt::Get(..)
        | Stmt::Return(..) | Stmt::SyncCall(..) => matches!(variant, V::ActiveObject),
        Stmt::New(..) => matches!(variant, V::Actor | V::ActiveObject),
    };
    if !ok_here {
        let name: &str = match s {
            Stmt::If(..) => "if",
            Stmt::While(..) => "while",
            Stmt::Co(..) => "co",
            Stmt::Atomic(..) => "atomic",
            Stmt::Block(..) => "block",
            Stmt::Input(..) => "input",
            Stmt::Call(..) => "call",
            Stmt::Guarded(..) => ":: guard",
            Stmt::Select(..) => "if :: … fi",
            Stmt::Goto(..) => "goto",
            Stmt::Labeled(..) => "label",
            Stmt::Send(..) => "send",
            Stmt::Receive(..) => "receive",
            Stmt::Spawn(..) => "spawn",
            Stmt::AsyncSend(..) => "asynchronous send",
            Stmt::AsyncAssign(..) => "asynchronous call",
            Stmt::New(..) => "new",
            Stmt::AwaitBool(..) | Stmt::AwaitFut(..) => "await",
            Stmt::Get(..) => "get",
            Stmt::Return(..) => "return",
            Stmt::SyncCall(..) => "synchronous self-call",
            _ => "statement",
        };
        return bad(name);
    }
    if in_atomic {
        match s {
            Stmt::While(..) => {
                return Err(ParseError::Gate(String::from(
                    "`while` is not allowed inside `atomic`",
                )))
            }
            Stmt::Goto(..) | Stmt::Labeled(..) => {
                return Err(ParseError::Gate(String::from(
                    "labels and `goto` are not allowed inside `atomic`",
                )))
            }
            Stmt::Co(..) => {
                return Err(ParseError::Gate(String::from(
                    "`co` is not allowed inside `atomic`",
                )))
            }
            _ => {}
        }
    }
    match s {
        Stmt::Seq(a, b) | Stmt::Co(a, b) => {
            gate_stmt(variant, a, in_atomic)?;
            gate_stmt(variant, b, in_atomic)
        }
        Stmt::If(_, s) | Stmt::While(_, s) | Stmt::Block(_, s) | Stmt::Labeled(_, s) => {
            gate_stmt(variant, s, in_atomic)
        }
        Stmt::Guarded(_, inner) => {
            // In the channel variant an interior guard may only sit at the
            // head of an atomic section or a branch; nested guards elsewhere
            // are handled by the same recursion.
            gate_stmt(variant, inner, in_atomic)
        }
        Stmt::Atomic(inner) => {
            // A single head guard is allowed in the channel variant.
            let body: &Stmt = match (&**inner, variant) {
                (Stmt::Guarded(_, b), V::PromelaMini) => b,
                _ => inner,
            };
            gate_stmt(variant, body, true)
        }
        Stmt::Select(branches) => {
            for (_, s) in branches {
                gate_stmt(variant, s, in_atomic)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Parse `source` under `variant`, producing a fully gated program with its
/// method/class/process tables.
pub fn parse(source: &str, variant: LanguageVariant) -> Result<Program, ParseError> {
    let toks = lex(source).map_err(|e| ParseError::Syntax {
        line: e.line,
        col: e.col,
        msg: e.msg,
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        variant,
        loop_counter: 0,
        break_targets: Vec::new(),
    };
    let mut prog = Program {
        variant: Some(variant),
        ..Program::default()
    };
    use LanguageVariant as V;
    match variant {
        V::Seq | V::Par => {
            prog.main = Some(p.main_block()?);
            p.expect(Tok::Eof)?;
        }
        V::Proc | V::Multi => {
            while p.peek() == &Tok::Method {
                let (name, m) = p.method_decl()?;
                if prog.methods.insert(name.clone(), m).is_some() {
                    return Err(ParseError::Gate(alloc::format!(
                        "duplicate method `{name}`"
                    )));
                }
            }
            prog.main = Some(p.main_block()?);
            p.expect(Tok::Eof)?;
        }
        V::PromelaMini => {
            while p.eat(Tok::Chan) {
                let v = p.var()?;
                p.expect(Tok::Semi)?;
                prog.channels.push(ChannelDecl {
                    var: v,
                    owner: None,
                });
            }
            let mut pid: u32 = 0;
            while p.eat(Tok::Proctype) {
                let name = p.lower_name("process name")?;
                p.expect(Tok::LParen)?;
                p.expect(Tok::RParen)?;
                p.expect(Tok::LBrace)?;
                // Leading `chan x;` declarations are process-local channels,
                // renamed to a globally unique `x__K` (K = channel index).
                let mut body_prefix: Vec<(Var, Var)> = Vec::new();
                while p.eat(Tok::Chan) {
                    let v = p.var()?;
                    p.expect(Tok::Semi)?;
                    let k = prog.channels.len();
                    let mangled = Var::new(&alloc::format!("{}__{k}", v.as_str()));
                    prog.channels.push(ChannelDecl {
                        var: mangled.clone(),
                        owner: Some(pid),
                    });
                    body_prefix.push((v, mangled));
                }
                let mut body = p.stmt()?;
                p.expect(Tok::RBrace)?;
                for (orig, mangled) in body_prefix.iter().rev() {
                    body = body.subst_var(orig, mangled);
                }
                let mut labels = BTreeMap::new();
                collect_labels(&body, Stmt::Empty, &mut labels)?;
                prog.procs.push(ProcDef { name, body, labels });
                pid += 1;
            }
            p.expect(Tok::Eof)?;
            if prog.procs.is_empty() {
                return Err(ParseError::Gate(String::from(
                    "the channel variant needs at least one proctype",
                )));
            }
            let mut names = BTreeSet::new();
            for proc in &prog.procs {
                if !names.insert(proc.name.clone()) {
                    return Err(ParseError::Gate(alloc::format!(
                        "duplicate proctype `{}`",
                        proc.name
                    )));
                }
            }
        }
        V::Actor | V::ActiveObject => {
            let mut all_methods: BTreeSet<String> = BTreeSet::new();
            while p.peek() == &Tok::Class {
                let (name, class) = p.class_decl()?;
                for m in class.methods.keys() {
                    if !all_methods.insert(m.clone()) {
                        return Err(ParseError::Gate(alloc::format!(
                            "method name `{m}` is declared in more than one class"
                        )));
                    }
                }
                if prog.classes.insert(name.clone(), class).is_some() {
                    return Err(ParseError::Gate(alloc::format!(
                        "duplicate class `{name}`"
                    )));
                }
            }
            prog.main = Some(p.main_block()?);
            p.expect(Tok::Eof)?;
            if variant == V::ActiveObject {
                for (cname, class) in &prog.classes {
                    for (mname, m) in &class.methods {
                        check_return_tail(&m.body, &alloc::format!("{cname}.{mname}"))?;
                    }
                }
            }
        }
    }

    // Gate everything that was parsed.
    if let Some(main) = &prog.main {
        gate_main(variant, main)?;
    }
    for m in prog.methods.values() {
        gate_stmt(variant, &m.body, false)?;
    }
    for c in prog.classes.values() {
        for m in c.methods.values() {
            gate_stmt(variant, &m.body, false)?;
        }
    }
    for proc in &prog.procs {
        gate_stmt(variant, &proc.body, false)?;
        check_gotos_resolve(&proc.body, &proc.labels)?;
    }
    Ok(prog)
}

fn gate_main(variant: LanguageVariant, main: &Stmt) -> Result<(), ParseError> {
    // `return` never appears in main code, only in method tails.
    if matches!(variant, LanguageVariant::ActiveObject) {
        fn has_return(s: &Stmt) -> bool {
            match s {
                Stmt::Return(_) => true,
                Stmt::Seq(a, b) | Stmt::Co(a, b) => has_return(a) || has_return(b),
                Stmt::If(_, s) | Stmt::While(_, s) | Stmt::Atomic(s) | Stmt::Block(_, s) => {
                    has_return(s)
                }
                _ => false,
            }
        }
        if has_return(main) {
            return Err(ParseError::Gate(String::from(
                "`return` may only appear at the end of a method body",
            )));
        }
    }
    gate_stmt(variant, main, false)
}

fn check_gotos_resolve(s: &Stmt, labels: &BTreeMap<String, Stmt>) -> Result<(), ParseError> {
    match s {
        Stmt::Goto(l) => {
            if !labels.contains_key(l) {
                return Err(ParseError::Gate(alloc::format!("undefined label `{l}`")));
            }
            Ok(())
        }
        Stmt::Seq(a, b) | Stmt::Co(a, b) => {
            check_gotos_resolve(a, labels)?;
            check_gotos_resolve(b, labels)
        }
        Stmt::If(_, s)
        | Stmt::While(_, s)
        | Stmt::Atomic(s)
        | Stmt::Block(_, s)
        | Stmt::Guarded(_, s)
        | Stmt::Labeled(_, s) => check_gotos_resolve(s, labels),
        Stmt::Select(bs) => {
            for (_, s) in bs {
                check_gotos_resolve(s, labels)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Parse a bare expression (contract-formula atoms, CLI helper).
pub fn parse_expr(source: &str) -> Result<SExpr, ParseError> {
    let toks = lex(source).map_err(|e| ParseError::Syntax {
        line: e.line,
        col: e.col,
        msg: e.msg,
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        variant: LanguageVariant::Seq,
        loop_counter: 0,
        break_targets: Vec::new(),
    };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

/// Parse a bare statement under a variant (test and calculus helper).
pub fn parse_stmt(source: &str, variant: LanguageVariant) -> Result<Stmt, ParseError> {
    let toks = lex(source).map_err(|e| ParseError::Syntax {
        line: e.line,
        col: e.col,
        msg: e.msg,
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        variant,
        loop_counter: 0,
        break_targets: Vec::new(),
    };
    let s = p.stmt()?;
    p.expect(Tok::Eof)?;
    gate_stmt(variant, &s, false)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;
    use alloc::string::ToString;

    #[test]
    fn parses_simple_sequence() {
        let s = parse_stmt("x:=1; y:=x+1", LanguageVariant::Seq).unwrap();
        assert_eq!(
            s,
            Stmt::seq(
                Stmt::Assign(Var::new("x"), SExpr::int(1)),
                Stmt::Assign(
                    Var::new("y"),
                    SExpr::bin(Op::Add, SExpr::var("x"), SExpr::int(1))
                ),
            )
        );
    }

    #[test]
    fn gates_reject_par_constructs_in_seq() {
        assert!(matches!(
            parse_stmt("co x:=1 || y:=2 oc", LanguageVariant::Seq),
            Err(ParseError::Gate(_))
        ));
        assert!(parse_stmt("co x:=1 || y:=2 oc", LanguageVariant::Par).is_ok());
    }

    #[test]
    fn capitalized_variables_are_rejected() {
        assert!(matches!(
            parse_stmt("X := 1", LanguageVariant::Seq),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn while_inside_atomic_is_a_gate_violation() {
        assert!(matches!(
            parse_stmt("atomic(while x < 1 { x := x+1 })", LanguageVariant::Par),
            Err(ParseError::Gate(_))
        ));
    }

    #[test]
    fn do_loops_desugar_to_labels_and_select() {
        let s = parse_stmt(
            "do :: x < 2; x := x + 1 :: x == 2; break od",
            LanguageVariant::PromelaMini,
        )
        .unwrap();
        let printed = s.to_string();
        assert!(printed.starts_with("label __do0: if ::"));
        assert!(printed.contains("goto __end0"));
        assert!(printed.ends_with("label __end0: skip"));
        // Round trip: printing and reparsing is stable.
        let again = parse_stmt(&printed, LanguageVariant::PromelaMini).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn promela_channel_shorthand() {
        let prog = parse(
            "chan c;\nproctype a() { c!5 }\nproctype b() { c?x }",
            LanguageVariant::PromelaMini,
        )
        .unwrap();
        assert_eq!(prog.channels.len(), 1);
        assert_eq!(
            prog.procs[0].body,
            Stmt::Send(SExpr::int(5), SExpr::var("c"))
        );
        assert_eq!(
            prog.procs[1].body,
            Stmt::Receive(Var::new("x"), SExpr::var("c"))
        );
    }

    #[test]
    fn promela_local_channels_are_mangled_and_owned() {
        let prog = parse(
            "proctype a() { chan d; d!1; d?x }",
            LanguageVariant::PromelaMini,
        )
        .unwrap();
        assert_eq!(prog.channels.len(), 1);
        assert_eq!(prog.channels[0].var, Var::new("d__0"));
        assert_eq!(prog.channels[0].owner, Some(0));
        assert!(prog.procs[0].body.to_string().contains("d__0"));
    }

    #[test]
    fn labels_map_to_rest_of_body() {
        let prog = parse(
            "proctype a() { x := 1; label top: x := x + 1; goto top }",
            LanguageVariant::PromelaMini,
        )
        .unwrap();
        let target = prog.procs[0].labels.get("top").unwrap();
        assert_eq!(
            *target,
            Stmt::seq(
                Stmt::Assign(
                    Var::new("x"),
                    SExpr::bin(Op::Add, SExpr::var("x"), SExpr::int(1))
                ),
                Stmt::Goto("top".to_string()),
            )
        );
    }

    #[test]
    fn undefined_goto_is_rejected() {
        assert!(matches!(
            parse("proctype a() { goto nowhere }", LanguageVariant::PromelaMini),
            Err(ParseError::Gate(_))
        ));
    }

    #[test]
    fn actor_program_parses() {
        let src = "class C { n; method m(x) { n := n + x } } main { o := new C(0); o!m(1) }";
        let prog = parse(src, LanguageVariant::Actor).unwrap();
        let class = prog.classes.get("C").unwrap();
        assert_eq!(class.fields, alloc::vec![Var::new("n")]);
        assert!(class.methods.contains_key("m"));
    }

    #[test]
    fn active_object_methods_must_end_in_return() {
        let bad = "class C { method m(n) { n := n + 1 } } main { skip }";
        assert!(matches!(
            parse(bad, LanguageVariant::ActiveObject),
            Err(ParseError::Gate(_))
        ));
        let good = "class C { method m(n) { n := n + 1; return n } } main { x := new C(); f := x!m(1); await f?; y := f.get }";
        assert!(parse(good, LanguageVariant::ActiveObject).is_ok());
    }

    #[test]
    fn proc_programs_carry_method_tables() {
        let src = "method m(x) { y := x + 1 } main { call(m, 2) }";
        let prog = parse(src, LanguageVariant::Proc).unwrap();
        assert!(prog.methods.contains_key("m"));
        assert_eq!(prog.main.as_ref().unwrap().to_string(), "call(m, 2)");
    }

    #[test]
    fn negative_literals_fold() {
        let s = parse_stmt("x := -3", LanguageVariant::Seq).unwrap();
        assert_eq!(s, Stmt::Assign(Var::new("x"), SExpr::int(-3)));
    }

    #[test]
    fn assignment_value_roundtrip_display() {
        for src in [
            "x := 1; while x < 3 { x := x + 1 }",
            "co skip || atomic(x := 1; y := 2) oc",
            "{ t; t := 1; input(t) }",
            "if x == 0 { x := 1 }",
        ] {
            let s = parse_stmt(src, LanguageVariant::Par).unwrap();
            let again = parse_stmt(&s.to_string(), LanguageVariant::Par).unwrap();
            assert_eq!(s, again, "round-trip failed for `{src}`");
        }
        let _ = Value::Int(0);
    }
}
