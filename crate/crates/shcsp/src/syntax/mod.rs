//! Abstract syntax, concrete grammar, parser, pretty-printer, and static
//! checks for the SHCSP process language.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod validate;

pub use ast::{
    rat, BoolExpr, CmpOp, CommEvent, EvalError, Expr, InterruptBranch, Lookup, Process, Rational,
    SdeBlock,
};
pub use parser::{parse, parse_bool, parse_expr, parse_rational, ParseError};
pub use pretty::{pretty, pretty_bool, pretty_expr};
pub use validate::{validate, Diagnostic};
