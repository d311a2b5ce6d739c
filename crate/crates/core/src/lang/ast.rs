use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::width::IntWidth;

/// Pre-order statement number, starting at 1. Assigned by the parser and by
/// [`Program::renumber`]; transformations such as slicing keep the original
/// ids so edit sites can be mapped back.
pub type StmtId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i128),
    Var(String),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Source-level parentheses, kept so printing preserves grouping.
    Paren(Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn paren(inner: Expr) -> Expr {
        Expr::Paren(Box::new(inner))
    }

    /// Strips any number of enclosing parentheses.
    pub fn unparen(&self) -> &Expr {
        let mut e = self;
        while let Expr::Paren(inner) = e {
            e = inner;
        }
        e
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Paren(inner) => inner.collect_vars(out),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Binary { lhs, rhs, .. } => lhs.mentions(name) || rhs.mentions(name),
            Expr::Paren(inner) => inner.mentions(name),
        }
    }

    pub fn contains_op(&self, op: BinOp) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Binary { op: o, lhs, rhs } => *o == op || lhs.contains_op(op) || rhs.contains_op(op),
            Expr::Paren(inner) => inner.contains_op(op),
        }
    }

    /// Number of binary nodes.
    pub fn binary_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 0,
            Expr::Binary { lhs, rhs, .. } => 1 + lhs.binary_count() + rhs.binary_count(),
            Expr::Paren(inner) => inner.binary_count(),
        }
    }

    /// Inserts `Paren` nodes wherever precedence or left-associativity would
    /// otherwise regroup the tree when printed. Existing parentheses are kept.
    pub fn grouped(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Paren(inner) => Expr::paren(inner.grouped()),
            Expr::Binary { op, lhs, rhs } => {
                let mut l = lhs.grouped();
                let mut r = rhs.grouped();
                if let Expr::Binary { op: lop, .. } = &l {
                    if lop.precedence() < op.precedence() {
                        l = Expr::paren(l);
                    }
                }
                if let Expr::Binary { op: rop, .. } = &r {
                    if rop.precedence() <= op.precedence() {
                        r = Expr::paren(r);
                    }
                }
                Expr::bin(*op, l, r)
            }
        }
    }

    /// Replaces every occurrence of variable `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Binary { op, lhs, rhs } => {
                Expr::bin(*op, lhs.substitute(name, with), rhs.substitute(name, with))
            }
            Expr::Paren(inner) => Expr::paren(inner.substitute(name, with)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn eval(self, l: i128, r: i128) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }

    /// The operator obtained by swapping operands (`a < b` iff `b > a`).
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }

    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CondExpr {
    Atom(Atom),
    And(Box<CondExpr>, Box<CondExpr>),
    Or(Box<CondExpr>, Box<CondExpr>),
    Not(Box<CondExpr>),
    Group(Box<CondExpr>),
}

impl CondExpr {
    pub fn atom(lhs: Expr, op: CmpOp, rhs: Expr) -> CondExpr {
        CondExpr::Atom(Atom { lhs, op, rhs })
    }

    /// Atoms in left-to-right source order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            CondExpr::Atom(a) => out.push(a),
            CondExpr::And(l, r) | CondExpr::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            CondExpr::Not(c) | CondExpr::Group(c) => c.collect_atoms(out),
        }
    }

    /// Atoms paired with their polarity: `false` when under an odd number of
    /// negations.
    pub fn atoms_with_polarity(&self) -> Vec<(&Atom, bool)> {
        fn walk<'a>(c: &'a CondExpr, pol: bool, out: &mut Vec<(&'a Atom, bool)>) {
            match c {
                CondExpr::Atom(a) => out.push((a, pol)),
                CondExpr::And(l, r) | CondExpr::Or(l, r) => {
                    walk(l, pol, out);
                    walk(r, pol, out);
                }
                CondExpr::Not(inner) => walk(inner, !pol, out),
                CondExpr::Group(inner) => walk(inner, pol, out),
            }
        }
        let mut out = Vec::new();
        walk(self, true, &mut out);
        out
    }

    /// Applies `f` to the atom at position `index` (source order).
    pub fn map_atom(&self, index: usize, f: &dyn Fn(&Atom) -> Atom) -> CondExpr {
        fn walk(c: &CondExpr, index: usize, seen: &mut usize, f: &dyn Fn(&Atom) -> Atom) -> CondExpr {
            match c {
                CondExpr::Atom(a) => {
                    let here = *seen;
                    *seen += 1;
                    if here == index {
                        CondExpr::Atom(f(a))
                    } else {
                        c.clone()
                    }
                }
                CondExpr::And(l, r) => {
                    let l = walk(l, index, seen, f);
                    CondExpr::And(Box::new(l), Box::new(walk(r, index, seen, f)))
                }
                CondExpr::Or(l, r) => {
                    let l = walk(l, index, seen, f);
                    CondExpr::Or(Box::new(l), Box::new(walk(r, index, seen, f)))
                }
                CondExpr::Not(inner) => CondExpr::Not(Box::new(walk(inner, index, seen, f))),
                CondExpr::Group(inner) => CondExpr::Group(Box::new(walk(inner, index, seen, f))),
            }
        }
        walk(self, index, &mut 0, f)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            a.lhs.collect_vars(&mut out);
            a.rhs.collect_vars(&mut out);
        }
        out
    }

    /// Inserts `Group` nodes where `&&`/`||` precedence would otherwise
    /// regroup the tree when printed.
    pub fn grouped(&self) -> CondExpr {
        match self {
            CondExpr::Atom(a) => CondExpr::Atom(Atom {
                lhs: a.lhs.grouped(),
                op: a.op,
                rhs: a.rhs.grouped(),
            }),
            CondExpr::Group(c) => CondExpr::Group(Box::new(c.grouped())),
            CondExpr::Not(c) => {
                let inner = c.grouped();
                let inner = match inner {
                    CondExpr::Atom(..) | CondExpr::And(..) | CondExpr::Or(..) => CondExpr::Group(Box::new(inner)),
                    other => other,
                };
                CondExpr::Not(Box::new(inner))
            }
            CondExpr::And(l, r) => {
                let wrap_or = |c: CondExpr, right: bool| match c {
                    CondExpr::Or(..) => CondExpr::Group(Box::new(c)),
                    CondExpr::And(..) if right => CondExpr::Group(Box::new(c)),
                    other => other,
                };
                CondExpr::And(Box::new(wrap_or(l.grouped(), false)), Box::new(wrap_or(r.grouped(), true)))
            }
            CondExpr::Or(l, r) => {
                let r = match r.grouped() {
                    c @ CondExpr::Or(..) => CondExpr::Group(Box::new(c)),
                    other => other,
                };
                CondExpr::Or(Box::new(l.grouped()), Box::new(r))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign {
        target: String,
        value: Expr,
    },
    While {
        cond: CondExpr,
        body: Vec<Stmt>,
    },
    If {
        cond: CondExpr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    Return,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { id: 0, kind }
    }

    pub fn assign(target: impl Into<String>, value: Expr) -> Stmt {
        Stmt::new(StmtKind::Assign {
            target: target.into(),
            value,
        })
    }

    pub fn is_loop(&self) -> bool {
        matches!(self.kind, StmtKind::While { .. })
    }

    /// Child statement blocks in source order.
    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::While { body, .. } => vec![body],
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v = vec![then_branch];
                if let Some(e) = else_branch {
                    v.push(e);
                }
                v
            }
            _ => Vec::new(),
        }
    }

    /// Variables assigned anywhere within this statement.
    pub fn assigned_vars(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            StmtKind::Assign { target, .. } => {
                out.insert(target.clone());
            }
            _ => {
                for b in self.blocks() {
                    for s in b {
                        s.assigned_vars(out);
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub width: IntWidth,
    pub input: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn new(decls: Vec<Decl>, body: Vec<Stmt>) -> Program {
        let mut p = Program { decls, body };
        p.renumber();
        p
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn width_of(&self, name: &str) -> Option<IntWidth> {
        self.decl(name).map(|d| d.width)
    }

    pub fn set_width(&mut self, name: &str, width: IntWidth) {
        if let Some(d) = self.decls.iter_mut().find(|d| d.name == name) {
            d.width = width;
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| d.input)
    }

    /// Reassigns statement ids in pre-order starting at 1.
    pub fn renumber(&mut self) {
        fn walk(stmts: &mut [Stmt], next: &mut StmtId) {
            for s in stmts {
                s.id = *next;
                *next += 1;
                match &mut s.kind {
                    StmtKind::While { body, .. } => walk(body, next),
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, next);
                        if let Some(e) = else_branch {
                            walk(e, next);
                        }
                    }
                    _ => {}
                }
            }
        }
        let mut next = 1;
        walk(&mut self.body, &mut next);
    }

    /// All statements in pre-order.
    pub fn statements(&self) -> Vec<&Stmt> {
        fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                out.push(s);
                for b in s.blocks() {
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    pub fn find(&self, id: StmtId) -> Option<&Stmt> {
        self.statements().into_iter().find(|s| s.id == id)
    }

    pub fn find_mut(&mut self, id: StmtId) -> Option<&mut Stmt> {
        fn walk(stmts: &mut [Stmt], id: StmtId) -> Option<&mut Stmt> {
            for s in stmts {
                if s.id == id {
                    return Some(s);
                }
                let found = match &mut s.kind {
                    StmtKind::While { body, .. } => walk(body, id),
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => walk(then_branch, id).or_else(|| else_branch.as_mut().and_then(|e| walk(e, id))),
                    _ => None,
                };
                if found.is_some() {
                    return found;
                }
            }
            None
        }
        walk(&mut self.body, id)
    }

    /// Ids of all `while` statements in pre-order.
    pub fn loops(&self) -> Vec<StmtId> {
        self.statements().into_iter().filter(|s| s.is_loop()).map(|s| s.id).collect()
    }

    /// Returns a copy with the right-hand side of assignment `id` replaced.
    pub fn with_rhs(&self, id: StmtId, value: Expr) -> Option<Program> {
        let mut p = self.clone();
        match &mut p.find_mut(id)?.kind {
            StmtKind::Assign { value: v, .. } => {
                *v = value;
                Some(p)
            }
            _ => None,
        }
    }

    /// Returns a copy with the condition of `while`/`if` statement `id` replaced.
    pub fn with_cond(&self, id: StmtId, cond: CondExpr) -> Option<Program> {
        let mut p = self.clone();
        match &mut p.find_mut(id)?.kind {
            StmtKind::While { cond: c, .. } | StmtKind::If { cond: c, .. } => {
                *c = cond;
                Some(p)
            }
            _ => None,
        }
    }

    /// Halting statements: every `return`, plus the final top-level
    /// statement. There are no procedures, so no return is excluded for
    /// belonging to a called function.
    pub fn halting_statements(&self) -> BTreeSet<StmtId> {
        let mut out: BTreeSet<StmtId> = self
            .statements()
            .into_iter()
            .filter(|s| matches!(s.kind, StmtKind::Return))
            .map(|s| s.id)
            .collect();
        if let Some(last) = self.body.last() {
            out.insert(last.id);
        }
        out
    }
}
