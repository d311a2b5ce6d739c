//! Fuel-bounded interpreter.
//!
//! Programs are lowered once into an index-addressed form so that the
//! enumeration-heavy analyses can run the same program many times cheaply.
//! Each executed statement and each loop-condition evaluation costs one step.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{BinOp, CmpOp, CondExpr, Expr, Program, Stmt, StmtId, StmtKind};
use super::width::IntWidth;
use crate::overflow::rules::{check_div, check_op, check_store, OverflowKind, RuleMode};

/// Variable valuation keyed by name.
pub type Valuation = BTreeMap<String, i128>;

/// Default step budget.
pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecMode {
    /// Two's-complement wraparound at each operation and store.
    Wrapped,
    /// Traps before the first operation or store that a rule flags.
    Checked(RuleMode),
    /// Unbounded integers (bounded in practice by `i128`).
    Mathematical,
}

impl ExecMode {
    pub fn checked() -> ExecMode {
        ExecMode::Checked(RuleMode::Corrected)
    }
}

/// Semantics used when a program is executed for its behaviour rather than
/// for overflow detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Semantics {
    Wrapped,
    #[default]
    Mathematical,
}

impl Semantics {
    pub fn mode(self) -> ExecMode {
        match self {
            Semantics::Wrapped => ExecMode::Wrapped,
            Semantics::Mathematical => ExecMode::Mathematical,
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semantics::Wrapped => "wrapped",
            Semantics::Mathematical => "mathematical",
        })
    }
}

impl FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wrapped" => Ok(Semantics::Wrapped),
            "mathematical" | "math" => Ok(Semantics::Mathematical),
            other => Err(format!("unknown semantics `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Halted,
    FuelExhausted,
    OverflowTrap,
    RuntimeError,
    /// An observer asked to stop; only produced by [`Interpreter::run_observed`].
    Interrupted,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuntimeError {
    DivisionByZero,
    UninitializedRead(String),
    /// A mathematical-mode value left the `i128` range.
    MathRangeExceeded,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeError::DivisionByZero => f.write_str("division by zero"),
            RuntimeError::UninitializedRead(v) => write!(f, "read of unassigned variable `{v}`"),
            RuntimeError::MathRangeExceeded => f.write_str("value exceeds the i128 range"),
        }
    }
}

/// Where a checked-mode run trapped.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trap {
    pub stmt: StmtId,
    /// Index into the statement's split list; `None` for the final store.
    pub sub: Option<usize>,
    pub kind: OverflowKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub status: Status,
    pub store: Valuation,
    pub steps: u64,
    /// Statement at which the run stopped: the halting statement, the trap
    /// site, or the erroring statement.
    pub site: Option<StmtId>,
    pub trap: Option<Trap>,
    pub error: Option<RuntimeError>,
}

impl RunOutcome {
    pub fn halted(&self) -> bool {
        self.status == Status::Halted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("missing value for input variable `{0}`")]
    MissingInput(String),
    #[error("`{0}` is not an input variable")]
    NotAnInput(String),
    #[error("value {value} for `{name}` is outside {width}")]
    OutOfRange { name: String, value: i128, width: IntWidth },
    #[error("fuel must be at least 1")]
    NoFuel,
}

/// Hooks into execution. All methods have no-op defaults.
pub trait Observer {
    fn on_assign(&mut self, _stmt: StmtId, _var: usize, _value: i128) {}

    /// Called when a `while` statement starts executing (not per iteration).
    fn on_loop_enter(&mut self, _loop_id: StmtId) {}

    /// Called before each evaluation of a loop condition. Returning `false`
    /// stops the run with [`Status::Interrupted`].
    fn on_loop_head(&mut self, _loop_id: StmtId, _store: &[Option<i128>]) -> bool {
        true
    }
}

struct NoObserver;
impl Observer for NoObserver {}

#[derive(Clone, Debug)]
enum CExpr {
    Const(i128),
    Var(usize),
    Bin {
        op: BinOp,
        lhs: Box<CExpr>,
        rhs: Box<CExpr>,
        site: usize,
    },
}

#[derive(Clone, Debug)]
enum CCond {
    Atom(CExpr, CmpOp, CExpr),
    And(Box<CCond>, Box<CCond>),
    Or(Box<CCond>, Box<CCond>),
    Not(Box<CCond>),
}

#[derive(Clone, Debug)]
enum CKind {
    Assign {
        target: usize,
        width: IntWidth,
        value: CExpr,
    },
    While {
        cond: CCond,
        width: IntWidth,
        body: Vec<CStmt>,
    },
    If {
        cond: CCond,
        width: IntWidth,
        then_branch: Vec<CStmt>,
        else_branch: Vec<CStmt>,
    },
    Return,
}

#[derive(Clone, Debug)]
struct CStmt {
    id: StmtId,
    kind: CKind,
}

enum Flow {
    Normal,
    Return(StmtId),
    Stop(Status),
}

/// A program lowered for repeated execution.
#[derive(Clone, Debug)]
pub struct Interpreter {
    names: Vec<String>,
    widths: Vec<IntWidth>,
    inputs: Vec<usize>,
    body: Vec<CStmt>,
    last_top: Option<StmtId>,
}

struct Machine<'a, O: Observer> {
    interp: &'a Interpreter,
    store: Vec<Option<i128>>,
    steps: u64,
    fuel: u64,
    mode: ExecMode,
    observer: &'a mut O,
    trap: Option<Trap>,
    error: Option<RuntimeError>,
    site: Option<StmtId>,
}

/// Width at which arithmetic inside a condition is checked: the widest
/// variable the condition mentions, or `i64` when it mentions none.
pub fn cond_width(p: &Program, cond: &CondExpr) -> IntWidth {
    cond.vars()
        .iter()
        .filter_map(|v| p.width_of(v))
        .max()
        .unwrap_or(IntWidth::I64)
}

impl Interpreter {
    pub fn new(p: &Program) -> Interpreter {
        let names: Vec<String> = p.decls.iter().map(|d| d.name.clone()).collect();
        let widths = p.decls.iter().map(|d| d.width).collect();
        let inputs = p
            .decls
            .iter()
            .enumerate()
            .filter(|(_, d)| d.input)
            .map(|(i, _)| i)
            .collect();
        let mut interp = Interpreter {
            names,
            widths,
            inputs,
            body: Vec::new(),
            last_top: p.body.last().map(|s| s.id),
        };
        interp.body = p.body.iter().map(|s| interp.lower_stmt(p, s)).collect();
        interp
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn var_names(&self) -> &[String] {
        &self.names
    }

    fn lower_expr(&self, e: &Expr, next_site: &mut usize) -> CExpr {
        match e {
            Expr::Const(c) => CExpr::Const(*c),
            Expr::Var(v) => CExpr::Var(self.var_index(v).expect("variables are resolved by the parser")),
            Expr::Paren(inner) => self.lower_expr(inner, next_site),
            Expr::Binary { op, lhs, rhs } => {
                let l = self.lower_expr(lhs, next_site);
                let r = self.lower_expr(rhs, next_site);
                let site = *next_site;
                *next_site += 1;
                CExpr::Bin {
                    op: *op,
                    lhs: Box::new(l),
                    rhs: Box::new(r),
                    site,
                }
            }
        }
    }

    fn lower_cond(&self, c: &CondExpr, next_site: &mut usize) -> CCond {
        match c {
            CondExpr::Atom(a) => {
                let l = self.lower_expr(&a.lhs, next_site);
                let r = self.lower_expr(&a.rhs, next_site);
                CCond::Atom(l, a.op, r)
            }
            CondExpr::And(l, r) => {
                let l = self.lower_cond(l, next_site);
                CCond::And(Box::new(l), Box::new(self.lower_cond(r, next_site)))
            }
            CondExpr::Or(l, r) => {
                let l = self.lower_cond(l, next_site);
                CCond::Or(Box::new(l), Box::new(self.lower_cond(r, next_site)))
            }
            CondExpr::Not(inner) => CCond::Not(Box::new(self.lower_cond(inner, next_site))),
            CondExpr::Group(inner) => self.lower_cond(inner, next_site),
        }
    }

    fn lower_stmt(&self, p: &Program, s: &Stmt) -> CStmt {
        let kind = match &s.kind {
            StmtKind::Assign { target, value } => {
                let t = self.var_index(target).expect("resolved target");
                CKind::Assign {
                    target: t,
                    width: self.widths[t],
                    value: self.lower_expr(value, &mut 0),
                }
            }
            StmtKind::While { cond, body } => CKind::While {
                cond: self.lower_cond(cond, &mut 0),
                width: cond_width(p, cond),
                body: body.iter().map(|b| self.lower_stmt(p, b)).collect(),
            },
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => CKind::If {
                cond: self.lower_cond(cond, &mut 0),
                width: cond_width(p, cond),
                then_branch: then_branch.iter().map(|b| self.lower_stmt(p, b)).collect(),
                else_branch: else_branch
                    .iter()
                    .flatten()
                    .map(|b| self.lower_stmt(p, b))
                    .collect(),
            },
            StmtKind::Return => CKind::Return,
        };
        CStmt { id: s.id, kind }
    }

    /// Validates `input` and produces the initial store.
    pub fn initial_store(&self, input: &Valuation) -> Result<Vec<Option<i128>>, InputError> {
        let mut store = vec![None; self.names.len()];
        for (k, v) in input {
            let idx = self.var_index(k).filter(|i| self.inputs.contains(i));
            let Some(idx) = idx else {
                return Err(InputError::NotAnInput(k.clone()));
            };
            if !self.widths[idx].contains(*v) {
                return Err(InputError::OutOfRange {
                    name: k.clone(),
                    value: *v,
                    width: self.widths[idx],
                });
            }
            store[idx] = Some(*v);
        }
        for &i in &self.inputs {
            if store[i].is_none() {
                return Err(InputError::MissingInput(self.names[i].clone()));
            }
        }
        Ok(store)
    }

    pub fn run(&self, input: &Valuation, fuel: u64, mode: ExecMode) -> Result<RunOutcome, InputError> {
        self.run_observed(input, fuel, mode, &mut NoObserver)
    }

    pub fn run_observed<O: Observer>(
        &self,
        input: &Valuation,
        fuel: u64,
        mode: ExecMode,
        observer: &mut O,
    ) -> Result<RunOutcome, InputError> {
        let store = self.initial_store(input)?;
        self.run_store(store, fuel, mode, observer)
    }

    /// Runs from an already validated store (see [`Interpreter::initial_store`]).
    pub fn run_store<O: Observer>(
        &self,
        store: Vec<Option<i128>>,
        fuel: u64,
        mode: ExecMode,
        observer: &mut O,
    ) -> Result<RunOutcome, InputError> {
        if fuel == 0 {
            return Err(InputError::NoFuel);
        }
        let mut m = Machine {
            interp: self,
            store,
            steps: 0,
            fuel,
            mode,
            observer,
            trap: None,
            error: None,
            site: None,
        };
        let status = match m.exec_block(&self.body) {
            Flow::Normal => {
                m.site = self.last_top;
                Status::Halted
            }
            Flow::Return(id) => {
                m.site = Some(id);
                Status::Halted
            }
            Flow::Stop(s) => s,
        };
        let store = m
            .store
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.names[i].clone(), v)))
            .collect();
        Ok(RunOutcome {
            status,
            store,
            steps: m.steps,
            site: m.site,
            trap: m.trap,
            error: m.error,
        })
    }
}

enum EvalErr {
    Trap(Option<usize>, OverflowKind),
    Error(RuntimeError),
}

impl<O: Observer> Machine<'_, O> {
    fn tick(&mut self, id: StmtId) -> Result<(), Flow> {
        if self.steps >= self.fuel {
            self.site = Some(id);
            return Err(Flow::Stop(Status::FuelExhausted));
        }
        self.steps += 1;
        Ok(())
    }

    fn fail(&mut self, id: StmtId, e: EvalErr) -> Flow {
        self.site = Some(id);
        match e {
            EvalErr::Trap(sub, kind) => {
                self.trap = Some(Trap { stmt: id, sub, kind });
                Flow::Stop(Status::OverflowTrap)
            }
            EvalErr::Error(err) => {
                self.error = Some(err);
                Flow::Stop(Status::RuntimeError)
            }
        }
    }

    fn exec_block(&mut self, stmts: &[CStmt]) -> Flow {
        for s in stmts {
            match self.exec(s) {
                Flow::Normal => {}
                other => return other,
            }
        }
        Flow::Normal
    }

    fn exec(&mut self, s: &CStmt) -> Flow {
        if let Err(f) = self.tick(s.id) {
            return f;
        }
        match &s.kind {
            CKind::Assign { target, width, value } => {
                let v = match self.eval(value, *width) {
                    Ok(v) => v,
                    Err(e) => return self.fail(s.id, e),
                };
                let stored = match self.mode {
                    ExecMode::Wrapped => width.wrap(v),
                    ExecMode::Mathematical => v,
                    ExecMode::Checked(_) => {
                        let k = check_store(v, *width);
                        if k.is_overflow() {
                            return self.fail(s.id, EvalErr::Trap(None, k));
                        }
                        v
                    }
                };
                self.store[*target] = Some(stored);
                self.observer.on_assign(s.id, *target, stored);
                Flow::Normal
            }
            CKind::Return => Flow::Return(s.id),
            CKind::If {
                cond,
                width,
                then_branch,
                else_branch,
            } => match self.cond(cond, *width) {
                Err(e) => self.fail(s.id, e),
                Ok(true) => self.exec_block(then_branch),
                Ok(false) => self.exec_block(else_branch),
            },
            CKind::While { cond, width, body } => {
                self.observer.on_loop_enter(s.id);
                let mut first = true;
                loop {
                    // The first condition evaluation is paid for by the
                    // statement tick above.
                    if !first {
                        if let Err(f) = self.tick(s.id) {
                            return f;
                        }
                    }
                    first = false;
                    if !self.observer.on_loop_head(s.id, &self.store) {
                        self.site = Some(s.id);
                        return Flow::Stop(Status::Interrupted);
                    }
                    match self.cond(cond, *width) {
                        Err(e) => return self.fail(s.id, e),
                        Ok(false) => return Flow::Normal,
                        Ok(true) => match self.exec_block(body) {
                            Flow::Normal => {}
                            other => return other,
                        },
                    }
                }
            }
        }
    }

    fn cond(&mut self, c: &CCond, w: IntWidth) -> Result<bool, EvalErr> {
        match c {
            CCond::Atom(l, op, r) => {
                let l = self.eval(l, w)?;
                let r = self.eval(r, w)?;
                Ok(op.eval(l, r))
            }
            CCond::And(l, r) => Ok(self.cond(l, w)? && self.cond(r, w)?),
            CCond::Or(l, r) => Ok(self.cond(l, w)? || self.cond(r, w)?),
            CCond::Not(inner) => Ok(!self.cond(inner, w)?),
        }
    }

    fn eval(&mut self, e: &CExpr, w: IntWidth) -> Result<i128, EvalErr> {
        match e {
            CExpr::Const(c) => Ok(*c),
            CExpr::Var(i) => self.store[*i]
                .ok_or_else(|| EvalErr::Error(RuntimeError::UninitializedRead(self.interp.names[*i].clone()))),
            CExpr::Bin { op, lhs, rhs, site } => {
                let x = self.eval(lhs, w)?;
                let y = self.eval(rhs, w)?;
                if *op == BinOp::Div && y == 0 {
                    return Err(EvalErr::Error(RuntimeError::DivisionByZero));
                }
                match self.mode {
                    ExecMode::Mathematical => apply_exact(*op, x, y).ok_or(EvalErr::Error(RuntimeError::MathRangeExceeded)),
                    ExecMode::Wrapped => Ok(w.wrap(apply_exact(*op, x, y).unwrap_or_else(|| apply_wrapping(*op, x, y)))),
                    ExecMode::Checked(rules) => {
                        let k = if !(w.contains(x) && w.contains(y)) {
                            // operands read from a wider variable fall outside
                            // the rules' case analysis; judge the exact result
                            apply_exact(*op, x, y).map_or(OverflowKind::IO, |r| check_store(r, w))
                        } else if *op == BinOp::Div {
                            check_div(x, y, w)
                        } else {
                            check_op(*op, x, y, w, rules)
                        };
                        if k.is_overflow() {
                            return Err(EvalErr::Trap(Some(*site), k));
                        }
                        // With the literal rules an overflow can slip
                        // through; the machine then wraps like hardware.
                        Ok(w.wrap(apply_exact(*op, x, y).unwrap_or_else(|| apply_wrapping(*op, x, y))))
                    }
                }
            }
        }
    }
}

/// `x op y` over `i128`, `None` if it leaves that range. `y != 0` for division.
pub fn apply_exact(op: BinOp, x: i128, y: i128) -> Option<i128> {
    match op {
        BinOp::Add => x.checked_add(y),
        BinOp::Sub => x.checked_sub(y),
        BinOp::Mul => x.checked_mul(y),
        BinOp::Div => x.checked_div(y),
    }
}

fn apply_wrapping(op: BinOp, x: i128, y: i128) -> i128 {
    match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Div => x.wrapping_div(y),
    }
}

/// Evaluates an expression over unbounded integers. `Err` on a zero divisor,
/// an unbound variable, or leaving the `i128` range.
pub fn eval_math(e: &Expr, env: &Valuation) -> Result<i128, RuntimeError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(v) => env.get(v).copied().ok_or_else(|| RuntimeError::UninitializedRead(v.clone())),
        Expr::Paren(inner) => eval_math(inner, env),
        Expr::Binary { op, lhs, rhs } => {
            let x = eval_math(lhs, env)?;
            let y = eval_math(rhs, env)?;
            if *op == BinOp::Div && y == 0 {
                return Err(RuntimeError::DivisionByZero);
            }
            apply_exact(*op, x, y).ok_or(RuntimeError::MathRangeExceeded)
        }
    }
}

/// Parses, lowers and runs in one call.
pub fn run(p: &Program, input: &Valuation, fuel: u64, mode: ExecMode) -> Result<RunOutcome, InputError> {
    Interpreter::new(p).run(input, fuel, mode)
}
