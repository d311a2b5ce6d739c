//! The μImp language: syntax, parser, printer and interpreter.

mod ast;
pub mod interp;
mod parser;
mod printer;
pub mod testcase;
mod width;

pub use ast::{Atom, BinOp, CmpOp, CondExpr, Decl, Expr, Program, Stmt, StmtId, StmtKind};
pub use interp::{
    eval_math, run, ExecMode, InputError, Interpreter, Observer, RunOutcome, RuntimeError, Semantics, Status, Trap,
    Valuation, DEFAULT_FUEL,
};
pub use parser::{parse, parse_expr, ParseError};
pub use printer::{pretty_print, print_stmt};
pub use testcase::{parse_tests, TestCase, TestVerdict};
pub use width::IntWidth;
