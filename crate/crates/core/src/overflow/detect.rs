use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::interval::{Interval, Ranges};
use super::rules::{check_store, OverflowKind, RuleMode};
use super::split::split_stmt;
use crate::lang::interp::cond_width;
use crate::lang::testcase::format_valuation;
use crate::lang::{
    BinOp, CondExpr, ExecMode, Expr, IntWidth, Interpreter, Program, Status, Stmt, StmtId, StmtKind, TestCase, Trap,
    Valuation, DEFAULT_FUEL,
};

/// Largest input space the exhaustive detector will enumerate.
pub const MAX_EXHAUSTIVE_SPACE: u128 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    Concrete,
    Interval,
    Exhaustive,
}

impl fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionMode::Concrete => "concrete",
            DetectionMode::Interval => "interval",
            DetectionMode::Exhaustive => "exhaustive",
        })
    }
}

impl std::str::FromStr for DetectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concrete" => Ok(DetectionMode::Concrete),
            "interval" => Ok(DetectionMode::Interval),
            "exhaustive" => Ok(DetectionMode::Exhaustive),
            other => Err(format!("unknown detection mode `{other}`")),
        }
    }
}

/// One detected overflow class at one site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowFinding {
    pub stmt: StmtId,
    /// Index into the statement's split list; `None` for the store into the
    /// assigned variable.
    pub sub: Option<usize>,
    pub sub_expr: String,
    pub kind: OverflowKind,
    pub witness: Option<Valuation>,
    pub mode: DetectionMode,
    /// Exhaustive mode only: number of inputs that trap here.
    pub witness_count: Option<u64>,
}

impl OverflowFinding {
    pub fn sort_key(&self) -> (StmtId, usize, OverflowKind) {
        (self.stmt, self.sub.unwrap_or(usize::MAX), self.kind)
    }
}

impl fmt::Display for OverflowFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let witness = match &self.witness {
            Some(w) => format_valuation(w),
            None => "-".to_string(),
        };
        write!(
            f,
            "{} stmt={} sub={} witness={} mode={}",
            self.kind, self.stmt, self.sub_expr, witness, self.mode
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectError {
    #[error("input space of {size} valuations exceeds the limit of {limit}")]
    InputSpaceTooLarge { size: u128, limit: u128 },
    #[error("variable `{name}` is {width}, wider than the cap {cap}")]
    WidthAboveCap { name: String, width: IntWidth, cap: IntWidth },
    #[error("range for `{name}` ({range}) lies outside {width}")]
    RangeOutsideWidth { name: String, range: Interval, width: IntWidth },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectConfig {
    pub rule_mode: RuleMode,
    pub fuel: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            rule_mode: RuleMode::Corrected,
            fuel: DEFAULT_FUEL,
        }
    }
}

/// A test input that could not be checked for overflow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub test: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConcreteDetection {
    pub findings: Vec<OverflowFinding>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Text of the sub-expression a trap refers to.
pub fn describe_site(p: &Program, stmt: StmtId, sub: Option<usize>) -> String {
    let Some(s) = p.find(stmt) else {
        return "?".to_string();
    };
    match sub {
        Some(i) => {
            let sp = split_stmt(s);
            if i < sp.len() {
                sp.render(i)
            } else {
                "?".to_string()
            }
        }
        None => match &s.kind {
            StmtKind::Assign { value, .. } => value.to_string(),
            _ => "?".to_string(),
        },
    }
}

fn finding_from_trap(p: &Program, t: &Trap, witness: Option<Valuation>, mode: DetectionMode) -> OverflowFinding {
    OverflowFinding {
        stmt: t.stmt,
        sub: t.sub,
        sub_expr: describe_site(p, t.stmt, t.sub),
        kind: t.kind,
        witness,
        mode,
        witness_count: None,
    }
}

/// Runs every test in checked mode; one finding per distinct
/// (statement, sub-expression, kind), witnessed by the first test hitting it.
pub fn detect_concrete(p: &Program, tests: &[TestCase], cfg: DetectConfig) -> ConcreteDetection {
    let interp = Interpreter::new(p);
    let mut seen: BTreeMap<(StmtId, usize, OverflowKind), OverflowFinding> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (i, t) in tests.iter().enumerate() {
        match interp.run(&t.input, cfg.fuel, ExecMode::Checked(cfg.rule_mode)) {
            Err(e) => diagnostics.push(Diagnostic {
                test: i,
                message: e.to_string(),
            }),
            Ok(out) => match out.status {
                Status::OverflowTrap => {
                    let trap = out.trap.expect("trap status carries a trap");
                    let f = finding_from_trap(p, &trap, Some(t.input.clone()), DetectionMode::Concrete);
                    seen.entry(f.sort_key()).or_insert(f);
                }
                Status::RuntimeError => diagnostics.push(Diagnostic {
                    test: i,
                    message: format!(
                        "runtime error at stmt {}: {}",
                        out.site.unwrap_or(0),
                        out.error.map(|e| e.to_string()).unwrap_or_default()
                    ),
                }),
                Status::FuelExhausted => diagnostics.push(Diagnostic {
                    test: i,
                    message: "fuel exhausted".to_string(),
                }),
                _ => {}
            },
        }
    }
    ConcreteDetection {
        findings: seen.into_values().collect(),
        diagnostics,
    }
}

/// Enumeration domain of each input in declaration order: the declared
/// range when given, otherwise the full width.
pub fn input_domains(p: &Program, ranges: &Ranges) -> Result<Vec<(String, Interval)>, DetectError> {
    p.inputs()
        .map(|d| {
            let r = ranges.get(&d.name).copied().unwrap_or(Interval::of_width(d.width));
            if !r.within(d.width) {
                return Err(DetectError::RangeOutsideWidth {
                    name: d.name.clone(),
                    range: r,
                    width: d.width,
                });
            }
            Ok((d.name.clone(), r))
        })
        .collect()
}

pub fn space_size(domains: &[(String, Interval)]) -> u128 {
    domains
        .iter()
        .fold(1u128, |acc, (_, r)| acc.saturating_mul(r.size()))
}

/// The `index`-th valuation in lexicographic order (first input most significant).
pub fn valuation_at(domains: &[(String, Interval)], mut index: u128) -> Valuation {
    let mut vals = vec![0i128; domains.len()];
    for (i, (_, r)) in domains.iter().enumerate().rev() {
        let size = r.size();
        vals[i] = r.lo + (index % size) as i128;
        index /= size;
    }
    domains
        .iter()
        .zip(vals)
        .map(|((n, _), v)| (n.clone(), v))
        .collect()
}

type TrapKey = (StmtId, usize, OverflowKind);

#[derive(Clone, Copy)]
struct TrapStat {
    first: u128,
    count: u64,
    sub: Option<usize>,
}

fn merge(mut a: BTreeMap<TrapKey, TrapStat>, b: BTreeMap<TrapKey, TrapStat>) -> BTreeMap<TrapKey, TrapStat> {
    for (k, v) in b {
        a.entry(k)
            .and_modify(|e| {
                e.first = e.first.min(v.first);
                e.count += v.count;
            })
            .or_insert(v);
    }
    a
}

/// Exhaustive checked-mode enumeration over the given input ranges.
pub fn detect_exhaustive_in(p: &Program, ranges: &Ranges, cfg: DetectConfig) -> Result<Vec<OverflowFinding>, DetectError> {
    let domains = input_domains(p, ranges)?;
    let size = space_size(&domains);
    if size > MAX_EXHAUSTIVE_SPACE {
        return Err(DetectError::InputSpaceTooLarge {
            size,
            limit: MAX_EXHAUSTIVE_SPACE,
        });
    }
    let interp = Interpreter::new(p);
    let mode = ExecMode::Checked(cfg.rule_mode);
    let stats = (0..size as u64)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<TrapKey, TrapStat>, i| {
            let input = valuation_at(&domains, i as u128);
            if let Ok(out) = interp.run(&input, cfg.fuel, mode) {
                if let Some(t) = out.trap {
                    let key = (t.stmt, t.sub.unwrap_or(usize::MAX), t.kind);
                    acc.entry(key)
                        .and_modify(|e| {
                            e.first = e.first.min(i as u128);
                            e.count += 1;
                        })
                        .or_insert(TrapStat {
                            first: i as u128,
                            count: 1,
                            sub: t.sub,
                        });
                }
            }
            acc
        })
        .reduce(BTreeMap::new, merge);
    Ok(stats
        .into_iter()
        .map(|((stmt, _, kind), st)| OverflowFinding {
            stmt,
            sub: st.sub,
            sub_expr: describe_site(p, stmt, st.sub),
            kind,
            witness: Some(valuation_at(&domains, st.first)),
            mode: DetectionMode::Exhaustive,
            witness_count: Some(st.count),
        })
        .collect())
}

/// Exhaustive detection over the full width range of every input. All
/// declared variables must be at most `width_cap` wide.
pub fn detect_exhaustive(p: &Program, width_cap: IntWidth, cfg: DetectConfig) -> Result<Vec<OverflowFinding>, DetectError> {
    let domains = input_domains(p, &Ranges::new())?;
    let size = space_size(&domains);
    if size > MAX_EXHAUSTIVE_SPACE {
        return Err(DetectError::InputSpaceTooLarge {
            size,
            limit: MAX_EXHAUSTIVE_SPACE,
        });
    }
    if let Some(d) = p.decls.iter().find(|d| d.width > width_cap) {
        return Err(DetectError::WidthAboveCap {
            name: d.name.clone(),
            width: d.width,
            cap: width_cap,
        });
    }
    detect_exhaustive_in(p, &Ranges::new(), cfg)
}

struct IntervalAnalysis<'a> {
    p: &'a Program,
    found: BTreeMap<TrapKey, OverflowFinding>,
}

type Env = BTreeMap<String, Interval>;

impl IntervalAnalysis<'_> {
    fn report(&mut self, stmt: StmtId, sub: Option<usize>, kind: OverflowKind) {
        let f = OverflowFinding {
            stmt,
            sub,
            sub_expr: describe_site(self.p, stmt, sub),
            kind,
            witness: None,
            mode: DetectionMode::Interval,
            witness_count: None,
        };
        self.found.entry(f.sort_key()).or_insert(f);
    }

    fn var(&self, env: &Env, v: &str) -> Interval {
        env.get(v)
            .copied()
            .unwrap_or_else(|| Interval::of_width(self.p.width_of(v).unwrap_or(IntWidth::I64)))
    }

    /// Interval of `e`; reports every step whose result can leave `w`.
    /// Returns `None` when evaluation can never complete.
    fn expr(&mut self, e: &Expr, w: IntWidth, env: &Env, stmt: StmtId, site: &mut usize) -> Option<Interval> {
        match e {
            Expr::Const(c) => Some(Interval::point(*c)),
            Expr::Var(v) => Some(self.var(env, v)),
            Expr::Paren(inner) => self.expr(inner, w, env, stmt, site),
            Expr::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs, w, env, stmt, site);
                let r = self.expr(rhs, w, env, stmt, site);
                let here = *site;
                *site += 1;
                let res = Interval::apply(*op, l?, r?)?;
                if res.hi > w.max() {
                    self.report(stmt, Some(here), OverflowKind::IO);
                }
                if res.lo < w.min() {
                    self.report(stmt, Some(here), OverflowKind::IU);
                }
                if *op == BinOp::Div && res == Interval::point(0) && l? == Interval::point(0) {
                    return Some(res);
                }
                // Checked execution stops at the overflow, so only in-range
                // results flow onward.
                res.clamp(w)
            }
        }
    }

    fn cond(&mut self, c: &CondExpr, stmt: StmtId, env: &Env) {
        let w = cond_width(self.p, c);
        let mut site = 0;
        for a in c.atoms() {
            self.expr(&a.lhs, w, env, stmt, &mut site);
            self.expr(&a.rhs, w, env, stmt, &mut site);
        }
    }

    fn block(&mut self, stmts: &[Stmt], mut env: Env) -> Env {
        for s in stmts {
            env = self.stmt(s, env);
        }
        env
    }

    fn stmt(&mut self, s: &Stmt, mut env: Env) -> Env {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let w = self.p.width_of(target).unwrap_or(IntWidth::I64);
                let v = self.expr(value, w, &env, s.id, &mut 0);
                if let Some(v) = v {
                    let k = check_store(v.hi, w);
                    if k.is_overflow() {
                        self.report(s.id, None, k);
                    }
                    let k = check_store(v.lo, w);
                    if k.is_overflow() {
                        self.report(s.id, None, k);
                    }
                    match v.clamp(w) {
                        Some(c) => {
                            env.insert(target.clone(), c);
                        }
                        None => {
                            env.insert(target.clone(), Interval::of_width(w));
                        }
                    }
                } else {
                    env.insert(target.clone(), Interval::of_width(w));
                }
                env
            }
            StmtKind::Return => env,
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.cond(cond, s.id, &env);
                let t = self.block(then_branch, env.clone());
                let e = match else_branch {
                    Some(b) => self.block(b, env),
                    None => env,
                };
                join(t, e)
            }
            StmtKind::While { cond, body } => {
                let mut assigned = BTreeSet::new();
                s.assigned_vars(&mut assigned);
                for v in &assigned {
                    let w = self.p.width_of(v).unwrap_or(IntWidth::I64);
                    env.insert(v.clone(), Interval::of_width(w));
                }
                self.cond(cond, s.id, &env);
                self.block(body, env.clone());
                env
            }
        }
    }
}

fn join(a: Env, b: Env) -> Env {
    let mut out = a.clone();
    for (k, v) in b {
        out.entry(k).and_modify(|e| *e = e.hull(&v)).or_insert(v);
    }
    out
}

/// Static interval propagation. Sound for the declared ranges: every
/// overflow reachable in checked execution is reported. Loop-assigned
/// variables are widened to their full width range.
pub fn detect_interval(p: &Program, ranges: &Ranges) -> Vec<OverflowFinding> {
    let mut env = Env::new();
    for d in p.inputs() {
        let r = ranges.get(&d.name).copied().unwrap_or(Interval::of_width(d.width));
        env.insert(d.name.clone(), r);
    }
    let mut a = IntervalAnalysis {
        p,
        found: BTreeMap::new(),
    };
    a.block(&p.body, env);
    a.found.into_values().collect()
}
