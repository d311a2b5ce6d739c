//! Termination prover for single loops.
//!
//! Three rungs are tried in order: an exact decision for one-variable affine
//! loops, a search for revisited loop states over enumerated or sampled
//! inputs, and exhaustive halting over a fully enumerated input space. A
//! definite answer is only given with a proof; otherwise the answer is UN.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::slice::slice;
use crate::equiv::normalize;
use crate::lang::testcase::format_valuation;
use crate::lang::{
    CmpOp, Expr, IntWidth, Interpreter, Observer, Program, RuntimeError, Semantics, Status, StmtId, StmtKind,
    Valuation,
};
use crate::overflow::{Interval, Ranges};

/// Step budget per run used by the prover.
pub const PROVER_FUEL: u64 = 100_000;
/// Input spaces up to this size are enumerated completely.
pub const MAX_ENUMERATION: u128 = 1 << 16;
/// Number of sampled inputs for larger spaces.
pub const SAMPLE_COUNT: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0x5EED;
/// Non-halting runs without a lasso after which the search gives up.
const MAX_OPEN_RUNS: usize = 64;
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Answer {
    TR,
    NT,
    UN,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::TR => "TR",
            Answer::NT => "NT",
            Answer::UN => "UN",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Certificate {
    /// Decided from the closed form of an affine update.
    Affine,
    /// Every input of a fully enumerated space halts.
    Exhaustive,
    None,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certificate::Affine => "affine",
            Certificate::Exhaustive => "exhaustive",
            Certificate::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NtEvidence {
    /// The loop-head state after `stem` iterations recurs every `cycle`.
    Lasso { stem: u64, cycle: u64 },
    /// The control variable moves away from the exit region forever.
    Divergence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rung {
    Symbolic,
    Lasso,
    Exhaustive,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProverVerdict {
    pub answer: Answer,
    pub loop_id: StmtId,
    pub witness: Option<Valuation>,
    pub evidence: Option<NtEvidence>,
    pub certificate: Certificate,
    pub rung: Rung,
}

impl ProverVerdict {
    fn unknown(loop_id: StmtId) -> ProverVerdict {
        ProverVerdict {
            answer: Answer::UN,
            loop_id,
            witness: None,
            evidence: None,
            certificate: Certificate::None,
            rung: Rung::None,
        }
    }
}

impl fmt::Display for ProverVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let witness = self.witness.as_ref().map(format_valuation).unwrap_or_else(|| "-".to_string());
        let (stem, cycle) = match self.evidence {
            Some(NtEvidence::Lasso { stem, cycle }) => (stem.to_string(), cycle.to_string()),
            _ => ("-".to_string(), "-".to_string()),
        };
        write!(
            f,
            "verdict={} loop={} witness={} stem={} cycle={} cert={}",
            self.answer, self.loop_id, witness, stem, cycle, self.certificate
        )
    }
}

/// Which rungs of the ladder may run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rungs {
    pub symbolic: bool,
    pub lasso: bool,
    pub exhaustive: bool,
}

impl Rungs {
    pub const ALL: Rungs = Rungs {
        symbolic: true,
        lasso: true,
        exhaustive: true,
    };
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProverConfig {
    pub semantics: Semantics,
    pub fuel: u64,
    /// Input domains; inputs without a range range over their width.
    pub ranges: Ranges,
    pub seed: u64,
    pub rungs: Rungs,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            semantics: Semantics::default(),
            fuel: PROVER_FUEL,
            ranges: Ranges::new(),
            seed: DEFAULT_SEED,
            rungs: Rungs::ALL,
        }
    }
}

impl ProverConfig {
    pub fn with_ranges(ranges: Ranges) -> ProverConfig {
        ProverConfig {
            ranges,
            ..ProverConfig::default()
        }
    }

    fn domain(&self, p: &Program, var: &str) -> Option<Interval> {
        let d = p.decl(var)?;
        Some(self.ranges.get(var).copied().unwrap_or(Interval::of_width(d.width)))
    }
}

/// Anything that can answer termination queries for a loop.
pub trait Prover: Sync {
    fn prove(&self, p: &Program, loop_id: StmtId) -> ProverVerdict;
}

/// The built-in rung ladder.
#[derive(Clone, Debug, Default)]
pub struct LadderProver {
    pub config: ProverConfig,
}

impl Prover for LadderProver {
    fn prove(&self, p: &Program, loop_id: StmtId) -> ProverVerdict {
        prove_termination(p, loop_id, &self.config)
    }
}

/// Order used to pick canonical witnesses: by magnitude, non-negative first.
fn zero_key(v: i128) -> (u128, bool) {
    (v.unsigned_abs(), v < 0)
}

fn closest_to_zero(r: Interval) -> i128 {
    if r.contains(0) {
        0
    } else if r.lo > 0 {
        r.lo
    } else {
        r.hi
    }
}

fn ordered_values(r: Interval) -> Vec<i128> {
    let mut v: Vec<i128> = (r.lo..=r.hi).collect();
    v.sort_by_key(|&x| zero_key(x));
    v
}

fn intersect(a: Interval, lo: Option<i128>, hi: Option<i128>) -> Option<Interval> {
    let lo = lo.map_or(a.lo, |l| l.max(a.lo));
    let hi = hi.map_or(a.hi, |h| h.min(a.hi));
    (lo <= hi).then_some(Interval { lo, hi })
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Decision {
    Terminates,
    Diverges { x0: i128, c: i128 },
    Unknown,
}

/// Some `(x0, c)` with `x0 ∈ xs`, `c ∈ cs` and `x0 op c`, each chosen
/// closest to zero (x0 first). `op` is not `!=`.
fn pick_pair(xs: Interval, cs: Interval, op: CmpOp) -> Option<(i128, i128)> {
    let ys = match op {
        CmpOp::Lt => intersect(xs, None, Some(cs.hi - 1)),
        CmpOp::Le => intersect(xs, None, Some(cs.hi)),
        CmpOp::Gt => intersect(xs, Some(cs.lo + 1), None),
        CmpOp::Ge => intersect(xs, Some(cs.lo), None),
        CmpOp::Eq => intersect(xs, Some(cs.lo), Some(cs.hi)),
        CmpOp::Ne => unreachable!("pick_pair handles ordered comparisons only"),
    }?;
    let x0 = closest_to_zero(ys);
    let cands = match op {
        CmpOp::Lt => intersect(cs, Some(x0 + 1), None),
        CmpOp::Le => intersect(cs, Some(x0), None),
        CmpOp::Gt => intersect(cs, None, Some(x0 - 1)),
        CmpOp::Ge => intersect(cs, None, Some(x0)),
        CmpOp::Eq => Some(Interval::point(x0)),
        CmpOp::Ne => None,
    }?;
    Some((x0, closest_to_zero(cands)))
}

/// Decides whether `while (x op c) x = a*x + b` can run forever over the
/// mathematical integers, for some `x0 ∈ dx`, `c ∈ dc`.
fn decide_affine(a: i128, b: i128, op: CmpOp, dx: Interval, dc: Interval) -> Decision {
    let found = |r: Option<(i128, i128)>| match r {
        Some((x0, c)) => Decision::Diverges { x0, c },
        None => Decision::Terminates,
    };
    if a == 0 {
        // one step to b, then constant: runs forever iff both x0 and b pass
        if op == CmpOp::Ne {
            return Decision::Unknown;
        }
        let cs = match op {
            CmpOp::Lt => intersect(dc, Some(b + 1), None),
            CmpOp::Le => intersect(dc, Some(b), None),
            CmpOp::Gt => intersect(dc, None, Some(b - 1)),
            CmpOp::Ge => intersect(dc, None, Some(b)),
            CmpOp::Eq => intersect(dc, Some(b), Some(b)),
            CmpOp::Ne => None,
        };
        return match cs {
            None => Decision::Terminates,
            Some(cs) => found(pick_pair(dx, cs, op)),
        };
    }
    if a < 0 {
        return Decision::Unknown;
    }
    // g(x) = (a - 1) x + b is the step taken from x; for a >= 1 its sign
    // never changes along the orbit, and a nonzero step is unbounded.
    let m = a - 1;
    let g_le0 = |dx: Interval| -> Option<Interval> {
        if m == 0 {
            (b <= 0).then_some(dx)
        } else {
            intersect(dx, None, Some(floor_div(-b, m)))
        }
    };
    let g_ge0 = |dx: Interval| -> Option<Interval> {
        if m == 0 {
            (b >= 0).then_some(dx)
        } else {
            intersect(dx, Some(ceil_div(-b, m)), None)
        }
    };
    match op {
        CmpOp::Lt | CmpOp::Le => match g_le0(dx) {
            None => Decision::Terminates,
            Some(xs) => found(pick_pair(xs, dc, op)),
        },
        CmpOp::Gt | CmpOp::Ge => match g_ge0(dx) {
            None => Decision::Terminates,
            Some(xs) => found(pick_pair(xs, dc, op)),
        },
        CmpOp::Eq => {
            let fixed = g_le0(dx).and_then(g_ge0);
            match fixed {
                None => Decision::Terminates,
                Some(xs) => found(pick_pair(xs, dc, op)),
            }
        }
        CmpOp::Ne => {
            if m != 0 {
                return Decision::Unknown;
            }
            decide_step_disequality(b, dx, dc)
        }
    }
}

/// `while (x != c) x = x + b`: stops iff `c` lies on the orbit.
fn decide_step_disequality(b: i128, dx: Interval, dc: Interval) -> Decision {
    let diverges = |x0: i128, c: i128| -> bool {
        if x0 == c {
            return false;
        }
        if b == 0 {
            return true;
        }
        let d = c - x0;
        !(d % b == 0 && d / b > 0)
    };
    let take = |r: Interval, n: usize| -> Vec<i128> {
        let mut v: Vec<i128> = Vec::new();
        let start = closest_to_zero(r);
        let mut k: i128 = 0;
        while v.len() < n && (start - k >= r.lo || start + k <= r.hi) {
            for cand in [start + k, start - k] {
                if r.contains(cand) && !v.contains(&cand) && v.len() < n {
                    v.push(cand);
                }
            }
            k += 1;
        }
        v.extend([r.lo, r.hi]);
        v.sort_by_key(|&x| zero_key(x));
        v.dedup();
        v
    };
    let n = (b.unsigned_abs().min(64) as usize) + 2;
    let xs = take(dx, n);
    let cs = take(dc, n);
    for &x0 in &xs {
        for &c in &cs {
            if diverges(x0, c) {
                return Decision::Diverges { x0, c };
            }
        }
    }
    let single = dx.lo == dx.hi && dc.lo == dc.hi;
    let one_sided = (b == 1 && dx.hi <= dc.lo) || (b == -1 && dx.lo >= dc.hi);
    if single || one_sided {
        Decision::Terminates
    } else {
        Decision::Unknown
    }
}

/// Range of `e` with `var` in `xs` and other variables fixed, or `None` if
/// an intermediate result can leave `w`.
fn range_within(e: &Expr, var: &str, xs: Interval, w: IntWidth) -> Option<Interval> {
    let r = match e {
        Expr::Const(c) => Interval::point(*c),
        Expr::Var(v) if v == var => xs,
        Expr::Var(_) => return None,
        Expr::Paren(inner) => return range_within(inner, var, xs, w),
        Expr::Binary { op, lhs, rhs } => {
            let l = range_within(lhs, var, xs, w)?;
            let r = range_within(rhs, var, xs, w)?;
            Interval::apply(*op, l, r)?
        }
    };
    r.within(w).then_some(r)
}

/// The affine shape the symbolic rung decides.
struct AffineLoop {
    var: String,
    update: Expr,
    a: i128,
    b: i128,
    op: CmpOp,
    dx: Interval,
    dc: Interval,
    /// Inputs whose value the witness sets: the control variable and the
    /// bound variable, when they are unassigned inputs.
    x_input: bool,
    c_input: Option<String>,
}

fn affine_shape(pm: &Program, loop_id: StmtId, cfg: &ProverConfig) -> Option<AffineLoop> {
    let k = pm.body.iter().position(|s| s.id == loop_id)?;
    let StmtKind::While { cond, body } = &pm.body[k].kind else {
        return None;
    };
    let [single] = body.as_slice() else {
        return None;
    };
    let StmtKind::Assign { target: x, value } = &single.kind else {
        return None;
    };
    let atoms = cond.atoms_with_polarity();
    let [(atom, positive)] = atoms.as_slice() else {
        return None;
    };
    let op = if *positive { atom.op } else { atom.op.negated() };
    let (op, bound) = match (atom.lhs.unparen(), atom.rhs.unparen()) {
        (Expr::Var(v), rhs) if v == x => (op, rhs.clone()),
        (lhs, Expr::Var(v)) if v == x => (op.flipped(), lhs.clone()),
        _ => return None,
    };
    let poly = normalize(value).ok()?;
    let mut a = 0;
    let mut b = 0;
    for (mono, coeff) in poly.terms() {
        match mono.len() {
            0 => b = coeff,
            1 if mono.get(x.as_str()) == Some(&1) => a = coeff,
            _ => return None,
        }
    }
    // pre-loop context: constant assignments only
    let mut consts: BTreeMap<&str, i128> = BTreeMap::new();
    for s in &pm.body[..k] {
        let StmtKind::Assign { target, value } = &s.kind else {
            return None;
        };
        let p = normalize(value).ok()?;
        if !p.vars().is_empty() {
            return None;
        }
        let v = p.terms().next().map_or(0, |(_, c)| c);
        consts.insert(target.as_str(), v);
    }
    let domain_of = |name: &str| -> Option<(Interval, bool)> {
        if let Some(v) = consts.get(name) {
            return Some((Interval::point(*v), false));
        }
        let d = pm.decl(name)?;
        d.input.then(|| (cfg.domain(pm, name).expect("declared"), true))
    };
    let (dx, x_input) = domain_of(x)?;
    let (dc, c_input) = match &bound {
        Expr::Const(c) => (Interval::point(*c), None),
        Expr::Var(y) if y != x => {
            let (d, input) = domain_of(y)?;
            (d, input.then(|| y.clone()))
        }
        _ => return None,
    };
    Some(AffineLoop {
        var: x.clone(),
        update: value.clone(),
        a,
        b,
        op,
        dx,
        dc,
        x_input,
        c_input,
    })
}

/// States the loop head can see while the condition holds, for a loop the
/// mathematical analysis showed terminating.
fn head_states(l: &AffineLoop) -> Option<Interval> {
    let hull = |a: Interval, b: Interval| a.hull(&b);
    match l.op {
        CmpOp::Lt => intersect(l.dx, None, Some(l.dc.hi - 1)),
        CmpOp::Le => intersect(l.dx, None, Some(l.dc.hi)),
        CmpOp::Gt => intersect(l.dx, Some(l.dc.lo + 1), None),
        CmpOp::Ge => intersect(l.dx, Some(l.dc.lo), None),
        CmpOp::Eq => intersect(l.dx, Some(l.dc.lo), Some(l.dc.hi)),
        CmpOp::Ne => Some(hull(l.dx, l.dc)),
    }
}

fn symbolic(pm: &Program, loop_id: StmtId, cfg: &ProverConfig) -> Option<ProverVerdict> {
    let l = affine_shape(pm, loop_id, cfg)?;
    let decision = decide_affine(l.a, l.b, l.op, l.dx, l.dc);
    let width = pm.width_of(&l.var)?;
    let fixed = |x0: i128| l.a * x0 + l.b == x0;
    let decision = match (cfg.semantics, decision) {
        (Semantics::Mathematical, d) => d,
        (Semantics::Wrapped, Decision::Terminates) => match head_states(&l) {
            None => Decision::Terminates,
            Some(states) => match range_within(&l.update, &l.var, states, width) {
                Some(_) => Decision::Terminates,
                None => Decision::Unknown,
            },
        },
        (Semantics::Wrapped, Decision::Diverges { x0, c }) => {
            // only a fixed point is sure to survive wraparound
            if fixed(x0) && range_within(&l.update, &l.var, Interval::point(x0), width).is_some() {
                Decision::Diverges { x0, c }
            } else {
                Decision::Unknown
            }
        }
        (Semantics::Wrapped, Decision::Unknown) => Decision::Unknown,
    };
    let (x0, c) = match decision {
        Decision::Unknown => return None,
        Decision::Terminates => {
            return Some(ProverVerdict {
                answer: Answer::TR,
                loop_id,
                witness: None,
                evidence: None,
                certificate: Certificate::Affine,
                rung: Rung::Symbolic,
            })
        }
        Decision::Diverges { x0, c } => (x0, c),
    };
    let mut witness = default_inputs(pm, cfg);
    if l.x_input {
        witness.insert(l.var.clone(), x0);
    }
    if let Some(y) = &l.c_input {
        witness.insert(y.clone(), c);
    }
    let evidence = if fixed(x0) {
        NtEvidence::Lasso { stem: 0, cycle: 1 }
    } else {
        NtEvidence::Divergence
    };
    Some(ProverVerdict {
        answer: Answer::NT,
        loop_id,
        witness: Some(witness),
        evidence: Some(evidence),
        certificate: Certificate::Affine,
        rung: Rung::Symbolic,
    })
}

/// Every input at the value of its domain closest to zero.
fn default_inputs(p: &Program, cfg: &ProverConfig) -> Valuation {
    p.inputs()
        .map(|d| (d.name.clone(), closest_to_zero(cfg.domain(p, &d.name).expect("declared"))))
        .collect()
}

/// Brent cycle detection on the loop-head states of one loop.
struct LassoWatch {
    loop_id: StmtId,
    tortoise: Option<Vec<Option<i128>>>,
    power: u64,
    lam: u64,
    found: bool,
}

impl LassoWatch {
    fn new(loop_id: StmtId) -> LassoWatch {
        LassoWatch {
            loop_id,
            tortoise: None,
            power: 1,
            lam: 1,
            found: false,
        }
    }
}

impl Observer for LassoWatch {
    fn on_loop_enter(&mut self, loop_id: StmtId) {
        if loop_id == self.loop_id {
            self.tortoise = None;
            self.power = 1;
            self.lam = 1;
        }
    }

    fn on_loop_head(&mut self, loop_id: StmtId, store: &[Option<i128>]) -> bool {
        if loop_id != self.loop_id {
            return true;
        }
        if self.tortoise.as_deref() == Some(store) {
            self.found = true;
            return false;
        }
        if self.lam == self.power {
            self.tortoise = Some(store.to_vec());
            self.power *= 2;
            self.lam = 0;
        }
        self.lam += 1;
        true
    }
}

/// Exact lasso recorder used for replays.
struct LassoRecord {
    loop_id: StmtId,
    seen: HashMap<Vec<Option<i128>>, u64>,
    count: u64,
    lasso: Option<(u64, u64)>,
}

impl Observer for LassoRecord {
    fn on_loop_enter(&mut self, loop_id: StmtId) {
        if loop_id == self.loop_id {
            self.seen.clear();
            self.count = 0;
        }
    }

    fn on_loop_head(&mut self, loop_id: StmtId, store: &[Option<i128>]) -> bool {
        if loop_id != self.loop_id {
            return true;
        }
        if let Some(&first) = self.seen.get(store) {
            self.lasso = Some((first, self.count - first));
            return false;
        }
        self.seen.insert(store.to_vec(), self.count);
        self.count += 1;
        true
    }
}

/// Re-runs `witness` on the slice of `loop_id` and reports the first
/// revisited loop-head state as `(stem, cycle)`.
pub fn replay_lasso(p: &Program, loop_id: StmtId, witness: &Valuation, cfg: &ProverConfig) -> Option<(u64, u64)> {
    let pm = slice(p, loop_id)?;
    let mut rec = LassoRecord {
        loop_id,
        seen: HashMap::new(),
        count: 0,
        lasso: None,
    };
    Interpreter::new(&pm)
        .run_observed(witness, cfg.fuel, cfg.semantics.mode(), &mut rec)
        .ok()?;
    rec.lasso
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RunClass {
    Halted,
    Lasso,
    Open,
}

fn classify_run(interp: &Interpreter, input: &Valuation, loop_id: StmtId, cfg: &ProverConfig) -> RunClass {
    let mut watch = LassoWatch::new(loop_id);
    match interp.run_observed(input, cfg.fuel, cfg.semantics.mode(), &mut watch) {
        Err(_) => RunClass::Open,
        Ok(out) => match out.status {
            Status::Halted => RunClass::Halted,
            Status::Interrupted if watch.found => RunClass::Lasso,
            // an aborted run does not loop forever
            Status::RuntimeError if out.error != Some(RuntimeError::MathRangeExceeded) => RunClass::Halted,
            _ => RunClass::Open,
        },
    }
}

/// Inputs to run: the full space in canonical order when small enough,
/// otherwise a seeded sample (plus the canonical first point), sorted.
fn candidate_inputs(pm: &Program, cfg: &ProverConfig) -> (Vec<Valuation>, bool) {
    let base = default_inputs(pm, cfg);
    let mut used = BTreeSet::new();
    for s in pm.statements() {
        match &s.kind {
            StmtKind::Assign { value, .. } => used.extend(value.vars()),
            StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => used.extend(cond.vars()),
            StmtKind::Return => {}
        }
    }
    let vars: Vec<(String, Interval)> = pm
        .inputs()
        .filter(|d| used.contains(&d.name))
        .map(|d| (d.name.clone(), cfg.domain(pm, &d.name).expect("declared")))
        .collect();
    let size = vars.iter().fold(1u128, |acc, (_, r)| acc.saturating_mul(r.size()));
    if size <= MAX_ENUMERATION {
        let orders: Vec<Vec<i128>> = vars.iter().map(|(_, r)| ordered_values(*r)).collect();
        let mut out = Vec::with_capacity(size as usize);
        for mut idx in 0..size {
            let mut v = base.clone();
            for (i, (name, _)) in vars.iter().enumerate().rev() {
                let n = orders[i].len() as u128;
                v.insert(name.clone(), orders[i][(idx % n) as usize]);
                idx /= n;
            }
            out.push(v);
        }
        return (out, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut set: BTreeSet<Vec<(u128, bool)>> = BTreeSet::new();
    let mut out: Vec<Valuation> = Vec::new();
    let key = |v: &Valuation| -> Vec<(u128, bool)> { vars.iter().map(|(n, _)| zero_key(v[n])).collect() };
    let first = base.clone();
    set.insert(key(&first));
    out.push(first);
    for _ in 0..SAMPLE_COUNT {
        let mut v = base.clone();
        for (name, r) in &vars {
            v.insert(name.clone(), rng.random_range(r.lo..=r.hi));
        }
        if set.insert(key(&v)) {
            out.push(v);
        }
    }
    out.sort_by_key(|v| key(v));
    (out, false)
}

fn enumerate(pm: &Program, p: &Program, loop_id: StmtId, cfg: &ProverConfig) -> Option<ProverVerdict> {
    let (inputs, complete) = candidate_inputs(pm, cfg);
    let interp = Interpreter::new(pm);
    let mut open = 0usize;
    for chunk in inputs.chunks(CHUNK) {
        let classes: Vec<RunClass> = chunk.par_iter().map(|v| classify_run(&interp, v, loop_id, cfg)).collect();
        for (v, c) in chunk.iter().zip(&classes) {
            match c {
                RunClass::Lasso if cfg.rungs.lasso => {
                    let (stem, cycle) = replay_lasso(p, loop_id, v, cfg)?;
                    return Some(ProverVerdict {
                        answer: Answer::NT,
                        loop_id,
                        witness: Some(v.clone()),
                        evidence: Some(NtEvidence::Lasso { stem, cycle }),
                        certificate: Certificate::None,
                        rung: Rung::Lasso,
                    });
                }
                RunClass::Halted => {}
                _ => open += 1,
            }
        }
        if open > 0 && (!cfg.rungs.lasso || open >= MAX_OPEN_RUNS) {
            return None;
        }
    }
    (complete && open == 0 && cfg.rungs.exhaustive).then_some(ProverVerdict {
        answer: Answer::TR,
        loop_id,
        witness: None,
        evidence: None,
        certificate: Certificate::Exhaustive,
        rung: Rung::Exhaustive,
    })
}

/// Decides whether loop `loop_id` of `p` terminates for every input in the
/// configured domains.
pub fn prove_termination(p: &Program, loop_id: StmtId, cfg: &ProverConfig) -> ProverVerdict {
    let Some(pm) = slice(p, loop_id) else {
        return ProverVerdict::unknown(loop_id);
    };
    if cfg.rungs.symbolic {
        if let Some(v) = symbolic(&pm, loop_id, cfg) {
            return v;
        }
    }
    if cfg.rungs.lasso || cfg.rungs.exhaustive {
        if let Some(v) = enumerate(&pm, p, loop_id, cfg) {
            return v;
        }
    }
    ProverVerdict::unknown(loop_id)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "answer", rename_all = "lowercase")]
pub enum TerminationBug {
    Yes { loop_id: StmtId, witness: Valuation, verdict: ProverVerdict },
    No,
    Unknown,
}

/// Whether some input keeps `p` from ever halting: a loop proven NT gives a
/// witness; all loops proven TR means no bug.
pub fn has_termination_bug(p: &Program, prover: &dyn Prover) -> TerminationBug {
    let mut all_tr = true;
    for l in p.loops() {
        let v = prover.prove(p, l);
        match v.answer {
            Answer::NT => {
                return TerminationBug::Yes {
                    loop_id: l,
                    witness: v.witness.clone().unwrap_or_default(),
                    verdict: v,
                }
            }
            Answer::UN => all_tr = false,
            Answer::TR => {}
        }
    }
    if all_tr {
        TerminationBug::No
    } else {
        TerminationBug::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, run};
    use crate::overflow::parse_ranges;

    fn prove(src: &str) -> ProverVerdict {
        let p = parse(src).unwrap();
        let l = p.loops()[0];
        prove_termination(&p, l, &ProverConfig::default())
    }

    fn val(pairs: &[(&str, i128)]) -> Valuation {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn countdown_terminates_by_affine_argument() {
        let v = prove("input i8 x; while (x > 0) { x = x - 1; }");
        assert_eq!(v.answer, Answer::TR);
        assert_eq!(v.certificate, Certificate::Affine);
        assert_eq!(v.to_string(), "verdict=TR loop=1 witness=- stem=- cycle=- cert=affine");
    }

    #[test]
    fn descending_below_an_upper_bound_diverges() {
        let v = prove("input i8 x; while (x < 10) { x = x - 1; }");
        assert_eq!(v.answer, Answer::NT);
        assert_eq!(v.witness, Some(val(&[("x", 0)])));
        assert_eq!(v.evidence, Some(NtEvidence::Divergence));
        assert_eq!(v.to_string(), "verdict=NT loop=1 witness=x=0 stem=- cycle=- cert=affine");
    }

    #[test]
    fn parity_miss_diverges() {
        let v = prove("input i8 x; while (x != 7) { x = x + 2; }");
        assert_eq!(v.answer, Answer::NT);
        assert_eq!(v.witness, Some(val(&[("x", 0)])));
        let v = prove("i8 x; x = 1; while (x != 7) { x = x + 2; }");
        assert_eq!(v.answer, Answer::TR);
    }

    #[test]
    fn wrapped_semantics_is_cautious() {
        let p = parse("input i8 x; while (x < 10) { x = x - 1; }").unwrap();
        let cfg = ProverConfig {
            semantics: Semantics::Wrapped,
            ..ProverConfig::default()
        };
        // under wraparound every start value eventually exits
        let v = prove_termination(&p, 1, &cfg);
        assert_eq!(v.answer, Answer::TR);
        assert_eq!(v.certificate, Certificate::Exhaustive);
        let p = parse("input i8 x; while (x < 100) { x = x + 1; }").unwrap();
        assert_eq!(prove_termination(&p, 1, &cfg).certificate, Certificate::Affine);
    }

    #[test]
    fn lasso_found_by_enumeration() {
        let src = "input i8 x; i8 y; y = 0; while (x > 0) { y = 1 - y; if (y > 5) { x = x - 1; } }";
        let v = prove(src);
        assert_eq!(v.answer, Answer::NT);
        assert_eq!(v.rung, Rung::Lasso);
        assert_eq!(v.witness, Some(val(&[("x", 1)])));
        let Some(NtEvidence::Lasso { stem, cycle }) = v.evidence else {
            panic!("expected lasso");
        };
        assert_eq!((stem, cycle), (0, 2));
        let p = parse(src).unwrap();
        assert_eq!(replay_lasso(&p, 2, &val(&[("x", 1)]), &ProverConfig::default()), Some((0, 2)));
    }

    #[test]
    fn exhaustive_rung_for_non_affine_loop() {
        let v = prove("input i8 x; while (x > 1) { x = x / 2; }");
        assert_eq!(v.answer, Answer::TR);
        assert_eq!(v.certificate, Certificate::Exhaustive);
    }

    #[test]
    fn large_space_without_proof_is_unknown() {
        let v = prove("input i32 x, y; while (x * x < y) { x = x + y / 3; }");
        assert_eq!(v.answer, Answer::UN);
    }

    #[test]
    fn geometric_growth_with_positive_range() {
        let p = parse("input i8 x; while (x < 100) { x = x * 2; }").unwrap();
        let v = prove_termination(&p, 1, &ProverConfig::with_ranges(parse_ranges("x=1..50").unwrap()));
        assert_eq!(v.answer, Answer::TR);
        let v = prove_termination(&p, 1, &ProverConfig::default());
        assert_eq!(v.answer, Answer::NT);
        assert_eq!(v.witness, Some(val(&[("x", 0)])));
        assert_eq!(v.evidence, Some(NtEvidence::Lasso { stem: 0, cycle: 1 }));
    }

    #[test]
    fn bug_detection_over_program() {
        let prover = LadderProver::default();
        let p = parse("input i8 x; while (x > 0) { x = x - 1; }").unwrap();
        assert_eq!(has_termination_bug(&p, &prover), TerminationBug::No);
        let p = parse("input i8 x; while (x < 10) { x = x - 1; }").unwrap();
        match has_termination_bug(&p, &prover) {
            TerminationBug::Yes { witness, .. } => assert_eq!(witness, val(&[("x", 0)])),
            other => panic!("expected a bug, got {other:?}"),
        }
        let w = val(&[("x", 0)]);
        assert_eq!(run(&p, &w, 1000, Semantics::Mathematical.mode()).unwrap().status, Status::FuelExhausted);
    }

    #[test]
    fn affine_decisions() {
        let all = Interval::of_width(IntWidth::I8);
        assert_eq!(
            decide_affine(1, -1, CmpOp::Gt, all, Interval::point(0)),
            Decision::Terminates
        );
        assert_eq!(
            decide_affine(3, 4, CmpOp::Lt, Interval::new(0, 10), Interval::point(50)),
            Decision::Terminates
        );
        // fixed point of 3x + 4 is -2
        assert_eq!(
            decide_affine(3, 4, CmpOp::Lt, all, Interval::point(50)),
            Decision::Diverges { x0: -2, c: 50 }
        );
        assert_eq!(
            decide_affine(0, 5, CmpOp::Lt, all, Interval::point(10)),
            Decision::Diverges { x0: 0, c: 10 }
        );
        assert_eq!(decide_affine(0, 50, CmpOp::Lt, all, Interval::point(10)), Decision::Terminates);
        assert_eq!(decide_affine(2, 0, CmpOp::Ne, all, Interval::point(1)), Decision::Unknown);
    }
}
