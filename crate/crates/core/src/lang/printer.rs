//! Canonical μImp text form: one declaration or statement per line, four
//! space indentation, `} else {` on one line.

use std::fmt::{self, Write as _};

use super::ast::{CondExpr, Decl, Expr, Program, Stmt, StmtKind};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Paren(inner) => write!(f, "({inner})"),
            Expr::Binary { op, lhs, rhs } => {
                // Trees built programmatically may lack the grouping the
                // printed form needs; add it here so the text reparses to
                // the same value.
                let l_needs = matches!(lhs.as_ref(), Expr::Binary { op: lop, .. } if lop.precedence() < op.precedence());
                let r_needs = matches!(rhs.as_ref(), Expr::Binary { op: rop, .. } if rop.precedence() <= op.precedence());
                if l_needs {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {op} ")?;
                if r_needs {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

impl fmt::Display for CondExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CondExpr::Atom(a) => write!(f, "{} {} {}", a.lhs, a.op, a.rhs),
            CondExpr::Group(c) => write!(f, "({c})"),
            CondExpr::Not(c) => match c.as_ref() {
                CondExpr::Not(_) | CondExpr::Group(_) => write!(f, "!{c}"),
                _ => write!(f, "!({c})"),
            },
            CondExpr::And(l, r) => {
                let wrap_l = matches!(l.as_ref(), CondExpr::Or(..));
                let wrap_r = matches!(r.as_ref(), CondExpr::Or(..) | CondExpr::And(..));
                write_cond_side(f, l, wrap_l)?;
                f.write_str(" && ")?;
                write_cond_side(f, r, wrap_r)
            }
            CondExpr::Or(l, r) => {
                let wrap_r = matches!(r.as_ref(), CondExpr::Or(..));
                write_cond_side(f, l, false)?;
                f.write_str(" || ")?;
                write_cond_side(f, r, wrap_r)
            }
        }
    }
}

fn write_cond_side(f: &mut fmt::Formatter<'_>, c: &CondExpr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.input {
            f.write_str("input ")?;
        }
        write!(f, "{} {};", self.width, self.name)
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{pad}{target} = {value};");
        }
        StmtKind::Return => {
            let _ = writeln!(out, "{pad}return;");
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "{pad}while ({cond}) {{");
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            write_block(out, then_branch, depth + 1);
            match else_branch {
                Some(e) => {
                    let _ = writeln!(out, "{pad}}} else {{");
                    write_block(out, e, depth + 1);
                    let _ = writeln!(out, "{pad}}}");
                }
                None => {
                    let _ = writeln!(out, "{pad}}}");
                }
            }
        }
    }
}

/// Renders a statement (and any nested block) in canonical form.
pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0);
    out
}

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        let _ = writeln!(out, "{d}");
    }
    write_block(&mut out, &p.body, 0);
    out
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
