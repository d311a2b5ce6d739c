use std::collections::HashSet;

use thiserror::Error;

use super::ast::{BinOp, CmpOp, CondExpr, Decl, Expr, Program, Stmt, StmtKind};
use super::width::IntWidth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty program")]
    EmptyProgram,
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("{line}:{col}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { name: String, line: usize, col: usize },
    #[error("{line}:{col}: declaration of `{name}` after the first statement")]
    LateDeclaration { name: String, line: usize, col: usize },
    #[error("{line}:{col}: integer literal out of range")]
    LiteralOutOfRange { line: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u128),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 21] = [
    "&&", "||", "<=", ">=", "==", "!=", ";", ",", "(", ")", "{", "}", "=", "+", "-", "*", "/", "<", ">", "!", "%",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut n: u128 = 0;
            while i < chars.len() && chars[i].is_ascii_digit() {
                n = n
                    .checked_mul(10)
                    .and_then(|n| n.checked_add(chars[i].to_digit(10).unwrap() as u128))
                    .ok_or(ParseError::LiteralOutOfRange {
                        line: start_line,
                        col: start_col,
                    })?;
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Int(n),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let sym = SYMBOLS.iter().find(|s| rest.starts_with(**s)).copied();
        match sym {
            Some(s) if s != "%" => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: start_line,
                    col: start_col,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    expected: "a token".to_string(),
                    found: format!("`{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    declared: HashSet<String>,
}

const KEYWORDS: [&str; 9] = ["input", "i8", "i16", "i32", "i64", "while", "if", "else", "return"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.tok.describe(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    fn ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.line, t.col))
            }
            _ => self.err("identifier"),
        }
    }

    fn width_kw(&self) -> Option<IntWidth> {
        match &self.peek().tok {
            Tok::Ident(s) => s.parse().ok(),
            _ => None,
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls: Vec<Decl> = Vec::new();
        loop {
            let input = self.is_kw("input");
            if !input && self.width_kw().is_none() {
                break;
            }
            if input {
                self.bump();
            }
            let Some(width) = self.width_kw() else {
                return self.err("integer width");
            };
            self.bump();
            loop {
                let (name, line, col) = self.ident()?;
                if !self.declared.insert(name.clone()) {
                    return Err(ParseError::DuplicateDeclaration { name, line, col });
                }
                decls.push(Decl { name, width, input });
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect_sym(";")?;
        }
        let mut body = Vec::new();
        while self.peek().tok != Tok::Eof {
            body.push(self.stmt()?);
        }
        if decls.is_empty() && body.is_empty() {
            return Err(ParseError::EmptyProgram);
        }
        Ok(Program::new(decls, body))
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.peek().tok == Tok::Eof {
                return self.err("`}`");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.is_kw("input") || self.width_kw().is_some() {
            // Report declarations in statement position precisely.
            let save = self.pos;
            if self.is_kw("input") {
                self.bump();
            }
            self.bump();
            let t = self.peek().clone();
            let name = match t.tok {
                Tok::Ident(s) => s,
                _ => String::new(),
            };
            self.pos = save;
            return Err(ParseError::LateDeclaration {
                name,
                line: t.line,
                col: t.col,
            });
        }
        if self.is_kw("while") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.cond()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            return Ok(Stmt::new(StmtKind::While { cond, body }));
        }
        if self.is_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.cond()?;
            self.expect_sym(")")?;
            let then_branch = self.block()?;
            let else_branch = if self.is_kw("else") {
                self.bump();
                Some(self.block()?)
            } else {
                None
            };
            return Ok(Stmt::new(StmtKind::If {
                cond,
                then_branch,
                else_branch,
            }));
        }
        if self.is_kw("return") {
            self.bump();
            self.expect_sym(";")?;
            return Ok(Stmt::new(StmtKind::Return));
        }
        let (target, line, col) = match self.ident() {
            Ok(x) => x,
            Err(_) => return self.err("statement"),
        };
        if !self.declared.contains(&target) {
            return Err(ParseError::UndeclaredVariable { name: target, line, col });
        }
        self.expect_sym("=")?;
        let value = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::assign(target, value))
    }

    fn cond(&mut self) -> Result<CondExpr, ParseError> {
        let mut lhs = self.cond_and()?;
        while self.is_sym("||") {
            self.bump();
            let rhs = self.cond_and()?;
            lhs = CondExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> Result<CondExpr, ParseError> {
        let mut lhs = self.cond_unary()?;
        while self.is_sym("&&") {
            self.bump();
            let rhs = self.cond_unary()?;
            lhs = CondExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_unary(&mut self) -> Result<CondExpr, ParseError> {
        if self.is_sym("!") {
            self.bump();
            let inner = self.cond_unary()?;
            return Ok(CondExpr::Not(Box::new(inner)));
        }
        if self.is_sym("(") {
            // `(` opens either a grouped condition or a parenthesized
            // arithmetic operand; try the former first.
            let save = self.pos;
            self.bump();
            if let Ok(inner) = self.cond() {
                if self.is_sym(")") {
                    self.bump();
                    if self.cmp_op().is_none() && !self.is_arith_op() {
                        return Ok(CondExpr::Group(Box::new(inner)));
                    }
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let Some(op) = self.cmp_op() else {
            return self.err("comparison operator");
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(CondExpr::atom(lhs, op, rhs))
    }

    fn is_arith_op(&self) -> bool {
        ["+", "-", "*", "/"].iter().any(|s| self.is_sym(s))
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match &self.peek().tok {
            Tok::Sym("<") => Some(CmpOp::Lt),
            Tok::Sym("<=") => Some(CmpOp::Le),
            Tok::Sym(">") => Some(CmpOp::Gt),
            Tok::Sym(">=") => Some(CmpOp::Ge),
            Tok::Sym("==") => Some(CmpOp::Eq),
            Tok::Sym("!=") => Some(CmpOp::Ne),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                break;
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.primary()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                break;
            };
            self.bump();
            let rhs = self.primary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(n) => {
                self.bump();
                literal(n, false, t.line, t.col)
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(n) = self.bump().tok else { unreachable!() };
                literal(n, true, t.line, t.col)
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::paren(inner))
            }
            Tok::Ident(_) => {
                let (name, line, col) = match self.ident() {
                    Ok(x) => x,
                    Err(_) => return self.err("expression"),
                };
                if !self.declared.contains(&name) {
                    return Err(ParseError::UndeclaredVariable { name, line, col });
                }
                Ok(Expr::Var(name))
            }
            _ => self.err("expression"),
        }
    }
}

fn literal(n: u128, negative: bool, line: usize, col: usize) -> Result<Expr, ParseError> {
    let limit = if negative {
        IntWidth::I64.min().unsigned_abs()
    } else {
        IntWidth::I64.max() as u128
    };
    if n > limit {
        return Err(ParseError::LiteralOutOfRange { line, col });
    }
    let v = n as i128;
    Ok(Expr::Const(if negative { -v } else { v }))
}

/// Parses μImp source. Declarations come first, then statements.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        declared: HashSet::new(),
    };
    p.program()
}

/// Parses a standalone arithmetic expression. Identifiers are not resolved.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut declared = HashSet::new();
    for t in &toks {
        if let Tok::Ident(s) = &t.tok {
            declared.insert(s.clone());
        }
    }
    let mut p = Parser { toks, pos: 0, declared };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return p.err("end of input");
    }
    Ok(e)
}
