//! Repair of non-terminating loops by monotone mutation of the loop's
//! update expressions and condition operators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use crate::lang::{
    pretty_print, Atom, BinOp, CmpOp, CondExpr, Expr, Interpreter, Program, Stmt, StmtId, StmtKind, TestCase,
    TestVerdict, Valuation,
};
use crate::termination::{
    boundedness, classify_monotonic, control_variables, has_termination_bug, sign_region, slice, static_monotonic,
    update_shape, Answer, BoundKind, ControlVarSet, Direction, LadderProver, MonoClass, MonotonicityTrace, Prover,
    ProverConfig, ProverVerdict, SignRegion, TerminationBug,
};

/// Step budget for running tests on candidate programs.
pub const TEST_FUEL: u64 = 100_000;

fn ser_expr<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

fn ser_op<S: Serializer>(op: &CmpOp, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(op.symbol())
}

fn ser_ops<S: Serializer>(ops: &[CmpOp], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ops.iter().map(|o| o.symbol()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleId {
    #[serde(rename = "R1-update-decreasing")]
    R1,
    #[serde(rename = "R2-update-increasing")]
    R2,
    #[serde(rename = "R3-cond-from-update")]
    R3,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleId::R1 => "R1-update-decreasing",
            RuleId::R2 => "R2-update-increasing",
            RuleId::R3 => "R3-cond-from-update",
        })
    }
}

/// A triggered mutation rule bound to one condition atom and the
/// assignment that updates its variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MutationRule {
    pub id: RuleId,
    pub var: String,
    /// Index of the atom in the loop condition, in source order.
    pub atom: usize,
    pub update: StmtId,
    #[serde(serialize_with = "ser_expr")]
    pub update_expr: Expr,
    /// Direction update mutants must have (R1, R2).
    pub direction: Option<Direction>,
    /// Replacement comparison operators, with `var` on the left (R3).
    #[serde(serialize_with = "ser_ops")]
    pub cond_ops: Vec<CmpOp>,
    pub sign: SignRegion,
}

/// Operators R3 allows for an update `var op b`, excluding `current`.
fn r3_ops(op: BinOp, b: i128, sign: SignRegion, current: CmpOp) -> Vec<CmpOp> {
    if b <= 0 {
        return Vec::new();
    }
    let scaling = matches!(op, BinOp::Mul | BinOp::Div);
    if scaling && (sign != SignRegion::Positive || b < 2) {
        return Vec::new();
    }
    let ops = match op {
        BinOp::Add | BinOp::Mul => [CmpOp::Lt, CmpOp::Le, CmpOp::Eq],
        BinOp::Sub | BinOp::Div => [CmpOp::Gt, CmpOp::Ge, CmpOp::Eq],
    };
    ops.into_iter().filter(|&o| o != current).collect()
}

/// Candidate updates `var op b` monotone in `dir` within `sign`. The
/// constant ladder is the original constant, then 1, then 2; scaling by
/// `b > 1` is used only where the sign makes it monotone.
pub fn monotone_mutate(e: &Expr, dir: Direction, var: &str, sign: SignRegion) -> Vec<Expr> {
    let mut ladder: Vec<i128> = Vec::new();
    if let Some((_, b)) = update_shape(e, var) {
        if b > 0 {
            ladder.push(b);
        }
    }
    for b in [1, 2] {
        if !ladder.contains(&b) {
            ladder.push(b);
        }
    }
    let (step, scale) = match (dir, sign) {
        (Direction::Increasing, SignRegion::Positive) => (BinOp::Add, Some(BinOp::Mul)),
        (Direction::Increasing, _) => (BinOp::Add, None),
        (Direction::Decreasing, SignRegion::Positive) => (BinOp::Sub, Some(BinOp::Div)),
        (Direction::Decreasing, SignRegion::Negative) => (BinOp::Sub, Some(BinOp::Mul)),
        (Direction::Decreasing, SignRegion::Unknown) => (BinOp::Sub, None),
    };
    let mut out: Vec<Expr> = ladder
        .iter()
        .map(|&b| Expr::bin(step, Expr::var(var), Expr::Const(b)))
        .collect();
    if let Some(op) = scale {
        out.extend(
            ladder
                .iter()
                .filter(|&&b| b > 1)
                .map(|&b| Expr::bin(op, Expr::var(var), Expr::Const(b))),
        );
    }
    let original = e.unparen();
    out.retain(|m| m != original);
    out
}

/// An update of a bounded condition variable, with its sign region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Update {
    pub stmt: StmtId,
    pub expr: Expr,
    pub sign: SignRegion,
}

/// Rules triggered by the atoms of `cond` given the updates of their
/// variables. Only atoms comparing a variable with a constant or variable
/// bound, under an ordering comparison, trigger rules.
pub fn applicable_rules(cond: &CondExpr, updates: &BTreeMap<String, Update>) -> Vec<MutationRule> {
    let mut monotone = Vec::new();
    let mut derived = Vec::new();
    for ab in boundedness(cond) {
        let (Some(var), Some(op)) = (&ab.var, ab.op) else {
            continue;
        };
        let Some(u) = updates.get(var) else {
            continue;
        };
        let direction = match ab.kind {
            BoundKind::BoundedBelow => Direction::Decreasing,
            BoundKind::BoundedAbove => Direction::Increasing,
            BoundKind::Unclassified => continue,
        };
        let rule = |id, direction, cond_ops| MutationRule {
            id,
            var: var.clone(),
            atom: ab.atom,
            update: u.stmt,
            update_expr: u.expr.clone(),
            direction,
            cond_ops,
            sign: u.sign,
        };
        let id = match direction {
            Direction::Decreasing => RuleId::R1,
            Direction::Increasing => RuleId::R2,
        };
        monotone.push(rule(id, Some(direction), Vec::new()));
        if let Some((uop, b)) = update_shape(&u.expr, var) {
            let ops = r3_ops(uop, b, u.sign, op);
            if !ops.is_empty() {
                derived.push(rule(RuleId::R3, None, ops));
            }
        }
    }
    monotone.extend(derived);
    monotone
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UpdateEdit {
    pub stmt: StmtId,
    pub var: String,
    #[serde(serialize_with = "ser_expr")]
    pub before: Expr,
    #[serde(serialize_with = "ser_expr")]
    pub after: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CondEdit {
    pub atom: usize,
    pub var: String,
    #[serde(serialize_with = "ser_op")]
    pub before: CmpOp,
    #[serde(serialize_with = "ser_op")]
    pub after: CmpOp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TerminationPatch {
    pub loop_id: StmtId,
    pub rules: Vec<RuleId>,
    pub update: Option<UpdateEdit>,
    pub condition: Option<CondEdit>,
    #[serde(skip)]
    pub program: Program,
}

impl fmt::Display for TerminationPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(u) = &self.update {
            parts.push(format!("update {} = {} -> {} = {}", u.var, u.before, u.var, u.after));
        }
        if let Some(c) = &self.condition {
            parts.push(format!("cond atom {} {} {} -> {}", c.atom, c.var, c.before.symbol(), c.after.symbol()));
        }
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("no mutation rule applies")]
    EmptySpace,
    #[error("statement {0} is not a loop")]
    NotALoop(StmtId),
}

/// Rewrites atom `index` of `cond` so that, read with `var` on the left
/// and after negations, it compares with `op`.
fn retarget_atom(cond: &CondExpr, index: usize, var: &str, op: CmpOp) -> CondExpr {
    let positive = cond.atoms_with_polarity().get(index).is_none_or(|(_, p)| *p);
    let written = if positive { op } else { op.negated() };
    cond.map_atom(index, &|a: &Atom| {
        let var_left = matches!(a.lhs.unparen(), Expr::Var(v) if v == var);
        Atom {
            lhs: a.lhs.clone(),
            op: if var_left { written } else { written.flipped() },
            rhs: a.rhs.clone(),
        }
    })
}

/// Whether the update is monotone in the direction the effective
/// comparison needs to be falsified eventually.
fn direction_consistent(op: CmpOp, update: &Expr, var: &str, sign: SignRegion) -> bool {
    let Some((_, dir)) = static_monotonic(update, var, sign) else {
        return false;
    };
    match op {
        CmpOp::Lt | CmpOp::Le => dir == Direction::Increasing,
        CmpOp::Gt | CmpOp::Ge => dir == Direction::Decreasing,
        CmpOp::Eq => true,
        CmpOp::Ne => false,
    }
}

/// The ordered candidate space for loop `loop_id`: update mutants, then
/// condition mutants, then combined edits. Candidates whose edited atom and
/// update disagree in direction are never emitted. Edits apply to `p`.
pub fn build_patch_space(
    p: &Program,
    loop_id: StmtId,
    rules: &[MutationRule],
) -> Result<Vec<TerminationPatch>, SpaceError> {
    let Some(Stmt {
        kind: StmtKind::While { cond, .. },
        ..
    }) = p.find(loop_id)
    else {
        return Err(SpaceError::NotALoop(loop_id));
    };
    if rules.is_empty() {
        return Err(SpaceError::EmptySpace);
    }
    let bounds = boundedness(cond);
    let effective = |atom: usize| bounds[atom].op.expect("rules bind classified atoms");
    let mut out: Vec<TerminationPatch> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut push = |patch: TerminationPatch, out: &mut Vec<TerminationPatch>| {
        if seen.insert(pretty_print(&patch.program)) {
            out.push(patch);
        }
    };
    // division converges to 0, so it only exits a guard that 0 fails
    let zero_exits = |atom: usize, op: CmpOp| match (op, &bounds[atom].bound) {
        (CmpOp::Gt, Some(Expr::Const(c))) => *c >= 0,
        (CmpOp::Ge, Some(Expr::Const(c))) => *c >= 1,
        _ => false,
    };
    let divides = |e: &Expr, var: &str| matches!(update_shape(e, var), Some((BinOp::Div, _)));
    let update_mutants = |r: &MutationRule| -> Vec<Expr> {
        match r.direction {
            Some(dir) => monotone_mutate(&r.update_expr, dir, &r.var, r.sign)
                .into_iter()
                .filter(|m| direction_consistent(effective(r.atom), m, &r.var, r.sign))
                .filter(|m| !divides(m, &r.var) || zero_exits(r.atom, effective(r.atom)))
                .collect(),
            None => Vec::new(),
        }
    };
    for r in rules.iter().filter(|r| r.direction.is_some()) {
        for m in update_mutants(r) {
            let program = p.with_rhs(r.update, m.clone()).expect("update is an assignment");
            let patch = TerminationPatch {
                loop_id,
                rules: vec![r.id],
                update: Some(UpdateEdit {
                    stmt: r.update,
                    var: r.var.clone(),
                    before: r.update_expr.clone(),
                    after: m,
                }),
                condition: None,
                program,
            };
            push(patch, &mut out);
        }
    }
    for r in rules.iter().filter(|r| r.id == RuleId::R3) {
        for &op in &r.cond_ops {
            if !direction_consistent(op, &r.update_expr, &r.var, r.sign) {
                continue;
            }
            if divides(&r.update_expr, &r.var) && !zero_exits(r.atom, op) {
                continue;
            }
            let c = retarget_atom(cond, r.atom, &r.var, op);
            let patch = TerminationPatch {
                loop_id,
                rules: vec![RuleId::R3],
                update: None,
                condition: Some(CondEdit {
                    atom: r.atom,
                    var: r.var.clone(),
                    before: effective(r.atom),
                    after: op,
                }),
                program: p.with_cond(loop_id, c).expect("loop"),
            };
            push(patch, &mut out);
        }
    }
    for r in rules.iter().filter(|r| r.direction.is_some()) {
        for m in update_mutants(r) {
            let Some((mop, b)) = update_shape(&m, &r.var) else {
                continue;
            };
            for op in r3_ops(mop, b, r.sign, effective(r.atom)) {
                if !direction_consistent(op, &m, &r.var, r.sign) {
                    continue;
                }
                if mop == BinOp::Div && !zero_exits(r.atom, op) {
                    continue;
                }
                let c = retarget_atom(cond, r.atom, &r.var, op);
                let program = p
                    .with_rhs(r.update, m.clone())
                    .and_then(|q| q.with_cond(loop_id, c))
                    .expect("update and loop exist");
                let patch = TerminationPatch {
                    loop_id,
                    rules: vec![r.id, RuleId::R3],
                    update: Some(UpdateEdit {
                        stmt: r.update,
                        var: r.var.clone(),
                        before: r.update_expr.clone(),
                        after: m.clone(),
                    }),
                    condition: Some(CondEdit {
                        atom: r.atom,
                        var: r.var.clone(),
                        before: effective(r.atom),
                        after: op,
                    }),
                    program,
                };
                push(patch, &mut out);
            }
        }
    }
    if out.is_empty() {
        return Err(SpaceError::EmptySpace);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Plausible,
    Invalid,
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Validity::Valid => "valid",
            Validity::Plausible => "plausible",
            Validity::Invalid => "invalid",
        })
    }
}

/// The three-way case split: any failing test or an NT answer makes a
/// patch invalid; otherwise TR makes it valid and UN plausible.
pub fn validity(all_tests_pass: bool, prover: Option<Answer>) -> Validity {
    match (all_tests_pass, prover) {
        (false, _) | (true, Some(Answer::NT)) | (true, None) => Validity::Invalid,
        (true, Some(Answer::TR)) => Validity::Valid,
        (true, Some(Answer::UN)) => Validity::Plausible,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PatchVerdict {
    pub classification: Validity,
    /// Per-test verdicts, in test order.
    #[serde(serialize_with = "ser_verdicts")]
    pub tests: Vec<TestVerdict>,
    /// `None` when a test failed and the prover was not consulted.
    pub prover: Option<ProverVerdict>,
}

fn ser_verdicts<S: Serializer>(v: &[TestVerdict], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|t| t.to_string()))
}

/// Prover wrapper counting invocations.
pub struct CountingProver<'a> {
    inner: &'a dyn Prover,
    calls: AtomicUsize,
}

impl<'a> CountingProver<'a> {
    pub fn new(inner: &'a dyn Prover) -> CountingProver<'a> {
        CountingProver {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Prover for CountingProver<'_> {
    fn prove(&self, p: &Program, loop_id: StmtId) -> ProverVerdict {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.prove(p, loop_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermRepairConfig {
    pub prover: ProverConfig,
    pub test_fuel: u64,
}

impl Default for TermRepairConfig {
    fn default() -> Self {
        TermRepairConfig {
            prover: ProverConfig::default(),
            test_fuel: TEST_FUEL,
        }
    }
}

/// Runs every test on the patched program, then asks the prover about the
/// patched loop only if all of them pass.
pub fn classify_patch(
    patch: &TerminationPatch,
    tests: &[TestCase],
    prover: &dyn Prover,
    cfg: &TermRepairConfig,
) -> PatchVerdict {
    let interp = Interpreter::new(&patch.program);
    let mode = cfg.prover.semantics.mode();
    let verdicts: Vec<TestVerdict> = tests.iter().map(|t| t.run(&interp, cfg.test_fuel, mode)).collect();
    let all_pass = verdicts.iter().all(|v| *v == TestVerdict::Pass);
    let answer = all_pass.then(|| prover.prove(&patch.program, patch.loop_id));
    PatchVerdict {
        classification: validity(all_pass, answer.as_ref().map(|v| v.answer)),
        tests: verdicts,
        prover: answer,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermFailure {
    /// The program has no non-terminating loop.
    NoTerminationBug,
    /// No loop could be shown non-terminating.
    TerminationUnknown,
    /// The loop is not monotone or no rule applies to it.
    FallbackUnsupported,
    BudgetExpired,
    NoValidPatch,
}

impl fmt::Display for TermFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermFailure::NoTerminationBug => "no-termination-bug",
            TermFailure::TerminationUnknown => "termination-unknown",
            TermFailure::FallbackUnsupported => "fallback-unsupported",
            TermFailure::BudgetExpired => "budget-expired",
            TermFailure::NoValidPatch => "no-valid-patch-found",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum TermOutcome {
    Valid { candidate: usize },
    Plausible { candidate: usize },
    Failure { reason: TermFailure },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub edit: String,
    pub rules: Vec<RuleId>,
    pub verdict: PatchVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TermRepairReport {
    pub loop_id: Option<StmtId>,
    pub witness: Option<Valuation>,
    /// Indices of tests that exhaust fuel on the original program.
    pub hanging_tests: Vec<usize>,
    pub control_variables: Option<ControlVarSet>,
    pub slice: Option<String>,
    pub monotonicity: Vec<MonotonicityTrace>,
    pub rules: Vec<MutationRule>,
    pub candidates: Vec<CandidateRecord>,
    pub prover_calls: usize,
    pub outcome: TermOutcome,
    /// Source of the patched program for valid and plausible outcomes.
    pub patched: Option<String>,
    #[serde(skip)]
    pub patch: Option<TerminationPatch>,
}

impl TermRepairReport {
    fn failure(reason: TermFailure) -> TermRepairReport {
        TermRepairReport {
            loop_id: None,
            witness: None,
            hanging_tests: Vec::new(),
            control_variables: None,
            slice: None,
            monotonicity: Vec::new(),
            rules: Vec::new(),
            candidates: Vec::new(),
            prover_calls: 0,
            outcome: TermOutcome::Failure { reason },
            patched: None,
            patch: None,
        }
    }

    pub fn failure_reason(&self) -> Option<TermFailure> {
        match self.outcome {
            TermOutcome::Failure { reason } => Some(reason),
            _ => None,
        }
    }

    pub fn validity(&self) -> Option<Validity> {
        match self.outcome {
            TermOutcome::Valid { .. } => Some(Validity::Valid),
            TermOutcome::Plausible { .. } => Some(Validity::Plausible),
            TermOutcome::Failure { .. } => None,
        }
    }
}

/// Repairs `p` with the built-in prover.
pub fn repair_termination(p: &Program, tests: &[TestCase], budget: Duration, cfg: &TermRepairConfig) -> TermRepairReport {
    let prover = LadderProver {
        config: cfg.prover.clone(),
    };
    repair_termination_with(p, tests, budget, cfg, &prover)
}

/// Assignments directly or nested in `stmts`.
fn assignments<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
    for s in stmts {
        if let StmtKind::Assign { .. } = s.kind {
            out.push(s);
        }
        for b in s.blocks() {
            assignments(b, out);
        }
    }
}

/// Repairs the first non-terminating loop of `p`: control variables, slice,
/// monotonicity gate, patch space, then classification of candidates in
/// order until a valid one is found or the budget runs out.
pub fn repair_termination_with(
    p: &Program,
    tests: &[TestCase],
    budget: Duration,
    cfg: &TermRepairConfig,
    prover: &dyn Prover,
) -> TermRepairReport {
    let start = Instant::now();
    let expired = || start.elapsed() >= budget;
    if expired() {
        return TermRepairReport::failure(TermFailure::BudgetExpired);
    }
    let counting = CountingProver::new(prover);
    let (loop_id, witness) = match has_termination_bug(p, prover) {
        TerminationBug::Yes { loop_id, witness, .. } => (loop_id, witness),
        TerminationBug::No => return TermRepairReport::failure(TermFailure::NoTerminationBug),
        TerminationBug::Unknown => return TermRepairReport::failure(TermFailure::TerminationUnknown),
    };
    let mode = cfg.prover.semantics.mode();
    let interp = Interpreter::new(p);
    let hanging_tests = tests
        .iter()
        .enumerate()
        .filter(|(_, t)| t.run(&interp, cfg.test_fuel, mode) == TestVerdict::Hang)
        .map(|(i, _)| i)
        .collect();
    let mut report = TermRepairReport::failure(TermFailure::FallbackUnsupported);
    report.loop_id = Some(loop_id);
    report.witness = Some(witness.clone());
    report.hanging_tests = hanging_tests;

    let control = control_variables(p, loop_id).expect("loop id from the prover");
    report.control_variables = Some(control.clone());
    let p_min = slice(p, loop_id).expect("loop id from the prover");
    report.slice = Some(pretty_print(&p_min));

    let Some(Stmt {
        kind: StmtKind::While { cond, body },
        ..
    }) = p_min.find(loop_id)
    else {
        unreachable!("slice keeps its loop");
    };
    let mut probes: Vec<Valuation> = tests.iter().map(|t| t.input.clone()).collect();
    probes.push(witness);
    let mut in_loop = Vec::new();
    assignments(body, &mut in_loop);
    let bounded: BTreeSet<String> = boundedness(cond)
        .into_iter()
        .filter(|b| b.kind != BoundKind::Unclassified)
        .filter_map(|b| b.var)
        .filter(|v| control.contains(v))
        .collect();
    let mut updates: BTreeMap<String, Update> = BTreeMap::new();
    for var in &bounded {
        let writes: Vec<&Stmt> = in_loop
            .iter()
            .copied()
            .filter(|s| matches!(&s.kind, StmtKind::Assign { target, .. } if target == var))
            .collect();
        let sign = sign_region(&p_min, var, loop_id, &cfg.prover.ranges, &probes, mode, cfg.test_fuel);
        for s in &writes {
            let trace = classify_monotonic(&p_min, s.id, loop_id, &probes, sign, mode, cfg.test_fuel)
                .expect("assignment");
            let bad = trace.class == MonoClass::NonMonotonic;
            report.monotonicity.push(trace);
            if bad {
                return report;
            }
        }
        if let [s] = writes.as_slice() {
            let StmtKind::Assign { value, .. } = &s.kind else {
                unreachable!()
            };
            updates.insert(
                var.clone(),
                Update {
                    stmt: s.id,
                    expr: value.clone(),
                    sign,
                },
            );
        }
    }
    report.rules = applicable_rules(cond, &updates);
    let space = match build_patch_space(p, loop_id, &report.rules) {
        Ok(s) => s,
        Err(_) => return report,
    };

    let mut plausible: Option<usize> = None;
    for (index, patch) in space.iter().enumerate() {
        if expired() {
            report.prover_calls = counting.calls();
            report.outcome = match plausible {
                Some(i) => accept(&mut report, &space, i, false),
                None => TermOutcome::Failure {
                    reason: TermFailure::BudgetExpired,
                },
            };
            return report;
        }
        let verdict = classify_patch(patch, tests, &counting, cfg);
        let class = verdict.classification;
        report.candidates.push(CandidateRecord {
            index,
            edit: patch.to_string(),
            rules: patch.rules.clone(),
            verdict,
        });
        match class {
            Validity::Valid => {
                report.prover_calls = counting.calls();
                report.outcome = accept(&mut report, &space, index, true);
                return report;
            }
            Validity::Plausible if plausible.is_none() => plausible = Some(index),
            _ => {}
        }
    }
    report.prover_calls = counting.calls();
    report.outcome = match plausible {
        Some(i) => accept(&mut report, &space, i, false),
        None => TermOutcome::Failure {
            reason: TermFailure::NoValidPatch,
        },
    };
    report
}

fn accept(report: &mut TermRepairReport, space: &[TerminationPatch], index: usize, valid: bool) -> TermOutcome {
    report.patched = Some(pretty_print(&space[index].program));
    report.patch = Some(space[index].clone());
    if valid {
        TermOutcome::Valid { candidate: index }
    } else {
        TermOutcome::Plausible { candidate: index }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse_expr, parse_tests};
    use crate::overflow::parse_ranges;

    fn texts(v: &[Expr]) -> Vec<String> {
        v.iter().map(|e| e.to_string()).collect()
    }

    #[test]
    fn ladders() {
        let e = parse_expr("x - 1").unwrap();
        assert_eq!(texts(&monotone_mutate(&e, Direction::Increasing, "x", SignRegion::Positive)), ["x + 1", "x + 2", "x * 2"]);
        assert_eq!(texts(&monotone_mutate(&e, Direction::Increasing, "x", SignRegion::Unknown)), ["x + 1", "x + 2"]);
        let e = parse_expr("x + 1").unwrap();
        assert_eq!(texts(&monotone_mutate(&e, Direction::Decreasing, "x", SignRegion::Positive)), ["x - 1", "x - 2", "x / 2"]);
        assert_eq!(texts(&monotone_mutate(&e, Direction::Increasing, "x", SignRegion::Positive)), ["x + 2", "x * 2"]);
        let e = parse_expr("x + 3").unwrap();
        assert_eq!(texts(&monotone_mutate(&e, Direction::Decreasing, "x", SignRegion::Negative)), ["x - 3", "x - 1", "x - 2", "x * 3", "x * 2"]);
    }

    fn loop_parts(src: &str) -> (Program, CondExpr, StmtId, Expr) {
        let p = parse(src).unwrap();
        let l = p.loops()[0];
        let StmtKind::While { cond, body } = &p.find(l).unwrap().kind else {
            unreachable!()
        };
        let StmtKind::Assign { value, .. } = &body[0].kind else {
            unreachable!()
        };
        let (c, id, v) = (cond.clone(), body[0].id, value.clone());
        (p, c, id, v)
    }

    fn one_update(var: &str, stmt: StmtId, expr: Expr, sign: SignRegion) -> BTreeMap<String, Update> {
        [(var.to_string(), Update { stmt, expr, sign })].into()
    }

    #[test]
    fn rule_triggers() {
        let (_, c, id, e) = loop_parts("input i8 x; while (x < 10) { x = x - 1; }");
        let rules = applicable_rules(&c, &one_update("x", id, e, SignRegion::Unknown));
        let ids: Vec<RuleId> = rules.iter().map(|r| r.id).collect();
        assert_eq!(ids, [RuleId::R2, RuleId::R3]);
        assert_eq!(rules[1].cond_ops, [CmpOp::Gt, CmpOp::Ge, CmpOp::Eq]);

        let (_, c, id, e) = loop_parts("input i8 x; while (x > 0) { x = x + 1; }");
        let rules = applicable_rules(&c, &one_update("x", id, e, SignRegion::Positive));
        assert_eq!(rules[0].id, RuleId::R1);
        assert_eq!(rules[1].cond_ops, [CmpOp::Lt, CmpOp::Le, CmpOp::Eq]);

        let (_, c, id, e) = loop_parts("input i8 x, y; while (x != y) { x = x + 1; }");
        assert!(applicable_rules(&c, &one_update("x", id, e, SignRegion::Unknown)).is_empty());
    }

    #[test]
    fn space_order() {
        let (p, c, id, e) = loop_parts("input i8 x; while (x < 10) { x = x - 1; }");
        let rules = applicable_rules(&c, &one_update("x", id, e, SignRegion::Unknown));
        let space = build_patch_space(&p, 1, &rules).unwrap();
        let edits: Vec<String> = space.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            edits,
            [
                "update x = x - 1 -> x = x + 1",
                "update x = x - 1 -> x = x + 2",
                "cond atom 0 x < -> >",
                "cond atom 0 x < -> >=",
                "cond atom 0 x < -> ==",
                "update x = x - 1 -> x = x + 1; cond atom 0 x < -> <=",
                "update x = x - 1 -> x = x + 1; cond atom 0 x < -> ==",
                "update x = x - 1 -> x = x + 2; cond atom 0 x < -> <=",
                "update x = x - 1 -> x = x + 2; cond atom 0 x < -> ==",
            ]
        );
        assert_eq!(pretty_print(&space[2].program), "input i8 x;\nwhile (x > 10) {\n    x = x - 1;\n}\n");
        let (p, c, id, e) = loop_parts("input i8 x, y; while (x != y) { x = x + 1; }");
        let rules = applicable_rules(&c, &one_update("x", id, e, SignRegion::Unknown));
        assert_eq!(build_patch_space(&p, 1, &rules), Err(SpaceError::EmptySpace));
    }

    #[test]
    fn negated_and_flipped_atoms_are_retargeted() {
        let p = parse("input i8 x; while (!(10 <= x)) { x = x - 1; }").unwrap();
        let StmtKind::While { cond, .. } = &p.body[0].kind else {
            unreachable!()
        };
        // effective atom is x < 10; retarget to x > 10
        let c = retarget_atom(cond, 0, "x", CmpOp::Gt);
        let q = p.with_cond(1, c).unwrap();
        assert_eq!(pretty_print(&q), "input i8 x;\nwhile (!(10 >= x)) {\n    x = x - 1;\n}\n");
    }

    #[test]
    fn validity_table() {
        assert_eq!(validity(true, Some(Answer::TR)), Validity::Valid);
        assert_eq!(validity(true, Some(Answer::UN)), Validity::Plausible);
        assert_eq!(validity(true, Some(Answer::NT)), Validity::Invalid);
        assert_eq!(validity(false, None), Validity::Invalid);
        assert_eq!(validity(false, Some(Answer::TR)), Validity::Invalid);
    }

    const NT_LOOP: &str = "input i8 x; while (x < 10) { x = x - 1; }";

    #[test]
    fn end_to_end_repair() {
        let p = parse(NT_LOOP).unwrap();
        let tests = parse_tests("in: x=0 ; out: x=10\nin: x=3 ; out: x=10\n").unwrap();
        let r = repair_termination(&p, &tests, Duration::from_secs(5), &TermRepairConfig::default());
        assert_eq!(r.outcome, TermOutcome::Valid { candidate: 0 });
        assert_eq!(r.patched.as_deref(), Some("input i8 x;\nwhile (x < 10) {\n    x = x + 1;\n}\n"));
        assert_eq!(r.hanging_tests, [0, 1]);
        assert_eq!(r.prover_calls, 1);
    }

    #[test]
    fn failing_tests_skip_the_prover() {
        let tests = parse_tests("in: x=0 ; out: x=10\n").unwrap();
        let cfg = TermRepairConfig::default();
        let prover = LadderProver::default();
        let counting = CountingProver::new(&prover);
        let c = parse("input i8 x; while (x == 10) { x = x - 1; }").unwrap();
        let patch = TerminationPatch {
            loop_id: 1,
            rules: vec![RuleId::R3],
            update: None,
            condition: None,
            program: c,
        };
        let v = classify_patch(&patch, &tests, &counting, &cfg);
        assert_eq!(v.classification, Validity::Invalid);
        assert_eq!(v.tests, [TestVerdict::WrongOutput]);
        assert_eq!(counting.calls(), 0);
    }

    #[test]
    fn terminating_but_wrong_is_invalid() {
        let p = parse(NT_LOOP).unwrap();
        // the first candidate terminates but overshoots
        let tests = parse_tests("in: x=0 ; out: x=11\n").unwrap();
        let r = repair_termination(&p, &tests, Duration::from_secs(5), &TermRepairConfig::default());
        assert_eq!(r.candidates[0].verdict.classification, Validity::Invalid);
        assert!(r.candidates[0].verdict.prover.is_none());
    }

    #[test]
    fn non_monotonic_loop_is_unsupported() {
        let p = parse("input i8 x; while (x < 10) { x = 3 - x; }").unwrap();
        let tests = parse_tests("in: x=1 ; out:\n").unwrap();
        let r = repair_termination(&p, &tests, Duration::from_secs(5), &TermRepairConfig::default());
        assert_eq!(r.failure_reason(), Some(TermFailure::FallbackUnsupported));
        assert!(r.candidates.is_empty());
    }

    #[test]
    fn zero_budget() {
        let p = parse(NT_LOOP).unwrap();
        let r = repair_termination(&p, &[], Duration::ZERO, &TermRepairConfig::default());
        assert_eq!(r.failure_reason(), Some(TermFailure::BudgetExpired));
        assert!(r.candidates.is_empty());
    }

    #[test]
    fn terminating_program_has_nothing_to_repair() {
        let p = parse("input i8 x; while (x > 0) { x = x - 1; }").unwrap();
        let r = repair_termination(&p, &[], Duration::from_secs(5), &TermRepairConfig::default());
        assert_eq!(r.failure_reason(), Some(TermFailure::NoTerminationBug));
    }

    #[test]
    fn positive_range_enables_scaling() {
        let p = parse("input i8 x; while (x < 100) { x = x - 1; }").unwrap();
        let tests = parse_tests("in: x=1 ; out:\n").unwrap();
        let cfg = TermRepairConfig {
            prover: ProverConfig::with_ranges(parse_ranges("x=1..50").unwrap()),
            ..TermRepairConfig::default()
        };
        let r = repair_termination(&p, &tests, Duration::from_secs(5), &cfg);
        assert_eq!(r.validity(), Some(Validity::Valid));
        let sign = r.rules[0].sign;
        assert_eq!(sign, SignRegion::Unknown, "x decreases inside the loop, so its range does not fix the sign");
    }
}
