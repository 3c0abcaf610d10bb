//! Surface language: ASTs, parser, variant gating, method/class tables, and
//! initial states.

mod ast;
mod lexer;
mod parser;

pub use ast::*;
pub use parser::{parse, parse_expr, parse_stmt, ParseError};
