use std::fmt;

use serde::Serialize;

use crate::lang::{BinOp, ExecMode, Expr, Interpreter, Observer, Program, StmtId, StmtKind, Valuation};
use super::contains;
use crate::overflow::Ranges;

/// Values recorded per probe before the run is stopped.
pub const TRACE_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonoClass {
    RegularArithmetic,
    RegularGeometric,
    IrregularMonotonic,
    NonMonotonic,
    InsufficientData,
}

impl MonoClass {
    pub fn is_monotonic(self) -> bool {
        matches!(
            self,
            MonoClass::RegularArithmetic | MonoClass::RegularGeometric | MonoClass::IrregularMonotonic
        )
    }
}

impl fmt::Display for MonoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonoClass::RegularArithmetic => "regular-arithmetic",
            MonoClass::RegularGeometric => "regular-geometric",
            MonoClass::IrregularMonotonic => "irregular-monotonic",
            MonoClass::NonMonotonic => "non-monotonic",
            MonoClass::InsufficientData => "insufficient-data",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Increasing => Direction::Decreasing,
            Direction::Decreasing => Direction::Increasing,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
        })
    }
}

/// Known sign of a variable whenever its loop runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignRegion {
    /// Always at least 1.
    Positive,
    /// Always at most -1.
    Negative,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotonicityTrace {
    pub stmt: StmtId,
    pub var: String,
    /// Values assigned by `stmt` during the first execution of the loop,
    /// one sequence per probe.
    pub sequences: Vec<Vec<i128>>,
    pub class: MonoClass,
    pub direction: Option<Direction>,
    /// Classified from the update's shape without running it.
    pub static_path: bool,
}

fn seq_direction(s: &[i128]) -> Option<Direction> {
    if s.windows(2).all(|w| w[1] > w[0]) {
        Some(Direction::Increasing)
    } else if s.windows(2).all(|w| w[1] < w[0]) {
        Some(Direction::Decreasing)
    } else {
        None
    }
}

fn is_arithmetic(s: &[i128]) -> bool {
    s.windows(3).all(|w| w[1] - w[0] == w[2] - w[1])
}

fn is_geometric(s: &[i128]) -> bool {
    s.iter().all(|&v| v != 0) && s.windows(3).all(|w| w[0].checked_mul(w[2]) == w[1].checked_mul(w[1]))
}

/// Joint classification of several observed sequences. Sequences with
/// fewer than two values carry no information.
pub fn classify_sequences(seqs: &[Vec<i128>]) -> (MonoClass, Option<Direction>) {
    let informative: Vec<&Vec<i128>> = seqs.iter().filter(|s| s.len() >= 2).collect();
    if informative.is_empty() {
        return (MonoClass::InsufficientData, None);
    }
    let mut dir = None;
    for s in &informative {
        match (seq_direction(s), dir) {
            (None, _) => return (MonoClass::NonMonotonic, None),
            (Some(d), None) => dir = Some(d),
            (Some(d), Some(prev)) if d != prev => return (MonoClass::NonMonotonic, None),
            _ => {}
        }
    }
    let class = if informative.iter().all(|s| is_arithmetic(s)) {
        MonoClass::RegularArithmetic
    } else if informative.iter().all(|s| is_geometric(s)) {
        MonoClass::RegularGeometric
    } else {
        MonoClass::IrregularMonotonic
    };
    (class, dir)
}

/// `Some((b, op))` when `e` is `var op b` (or `b + var`, `b * var`) with a
/// constant `b`.
pub fn update_shape(e: &Expr, var: &str) -> Option<(BinOp, i128)> {
    let Expr::Binary { op, lhs, rhs } = e.unparen() else {
        return None;
    };
    match (lhs.unparen(), rhs.unparen()) {
        (Expr::Var(v), Expr::Const(b)) if v == var => Some((*op, *b)),
        (Expr::Const(b), Expr::Var(v)) if v == var && matches!(op, BinOp::Add | BinOp::Mul) => Some((*op, *b)),
        _ => None,
    }
}

/// Classification of `var = var op b` from its shape alone, for a positive
/// constant `b` and, for `*` and `/`, a known sign of `var`.
pub fn static_monotonic(e: &Expr, var: &str, sign: SignRegion) -> Option<(MonoClass, Direction)> {
    let (op, b) = update_shape(e, var)?;
    match op {
        BinOp::Add if b > 0 => Some((MonoClass::RegularArithmetic, Direction::Increasing)),
        BinOp::Sub if b > 0 => Some((MonoClass::RegularArithmetic, Direction::Decreasing)),
        BinOp::Mul if b > 1 => match sign {
            SignRegion::Positive => Some((MonoClass::RegularGeometric, Direction::Increasing)),
            SignRegion::Negative => Some((MonoClass::RegularGeometric, Direction::Decreasing)),
            SignRegion::Unknown => None,
        },
        // truncation toward zero: strictly shrinking while away from zero,
        // without a constant ratio
        BinOp::Div if b > 1 => match sign {
            SignRegion::Positive => Some((MonoClass::IrregularMonotonic, Direction::Decreasing)),
            SignRegion::Negative => Some((MonoClass::IrregularMonotonic, Direction::Increasing)),
            SignRegion::Unknown => None,
        },
        _ => None,
    }
}

struct Recorder {
    stmt: StmtId,
    loop_id: StmtId,
    entries: u32,
    values: Vec<i128>,
}

impl Observer for Recorder {
    fn on_assign(&mut self, stmt: StmtId, _var: usize, value: i128) {
        if stmt == self.stmt && self.entries == 1 && self.values.len() < TRACE_LIMIT {
            self.values.push(value);
        }
    }

    fn on_loop_enter(&mut self, loop_id: StmtId) {
        if loop_id == self.loop_id {
            self.entries += 1;
        }
    }

    fn on_loop_head(&mut self, _loop_id: StmtId, _store: &[Option<i128>]) -> bool {
        self.values.len() < TRACE_LIMIT && self.entries <= 1
    }
}

/// Values assigned by `stmt` during the first execution of `loop_id`, per
/// probe. Probes that are not valid inputs give empty sequences.
pub fn trace_values(p: &Program, stmt: StmtId, loop_id: StmtId, probes: &[Valuation], mode: ExecMode, fuel: u64) -> Vec<Vec<i128>> {
    let interp = Interpreter::new(p);
    probes
        .iter()
        .map(|input| {
            let mut rec = Recorder {
                stmt,
                loop_id,
                entries: 0,
                values: Vec::new(),
            };
            let _ = interp.run_observed(input, fuel, mode, &mut rec);
            rec.values
        })
        .collect()
}

/// Classifies the assignment `stmt` inside `loop_id`. The static shape rule
/// is used when it applies; probes are still traced and recorded.
pub fn classify_monotonic(
    p: &Program,
    stmt: StmtId,
    loop_id: StmtId,
    probes: &[Valuation],
    sign: SignRegion,
    mode: ExecMode,
    fuel: u64,
) -> Option<MonotonicityTrace> {
    let StmtKind::Assign { target, value } = &p.find(stmt)?.kind else {
        return None;
    };
    let sequences = trace_values(p, stmt, loop_id, probes, mode, fuel);
    let (class, direction, static_path) = match static_monotonic(value, target, sign) {
        Some((c, d)) => (c, Some(d), true),
        None => {
            let (c, d) = classify_sequences(&sequences);
            (c, d, false)
        }
    };
    Some(MonotonicityTrace {
        stmt,
        var: target.clone(),
        sequences,
        class,
        direction,
        static_path,
    })
}

struct HeadValues {
    loop_id: StmtId,
    index: usize,
    seen: Vec<i128>,
}

impl Observer for HeadValues {
    fn on_loop_head(&mut self, loop_id: StmtId, store: &[Option<i128>]) -> bool {
        if loop_id == self.loop_id {
            if let Some(v) = store[self.index] {
                self.seen.push(v);
            }
            return self.seen.len() < TRACE_LIMIT;
        }
        true
    }
}

/// Sign of `var` at the head of `loop_id`. A declared range of an input
/// the program never reassigns outside the loop decides it; otherwise the
/// values observed at the loop head on the probes do (all probes must
/// reach the loop).
pub fn sign_region(p: &Program, var: &str, loop_id: StmtId, ranges: &Ranges, probes: &[Valuation], mode: ExecMode, fuel: u64) -> SignRegion {
    let Some(loop_stmt) = p.find(loop_id) else {
        return SignRegion::Unknown;
    };
    let assigned_outside = p.statements().into_iter().any(|s| {
        matches!(&s.kind, StmtKind::Assign { target, .. } if target == var)
            && loop_stmt.blocks().iter().all(|b| b.iter().all(|c| !contains(c, s.id)))
    });
    let grows_away = |from_positive: bool| -> bool {
        // every in-loop update of var must keep the sign
        p.statements().into_iter().all(|s| match &s.kind {
            StmtKind::Assign { target, value } if target == var && contains(loop_stmt, s.id) => {
                match update_shape(value, var) {
                    Some((BinOp::Add, b)) => (b >= 0) == from_positive || b == 0,
                    Some((BinOp::Sub, b)) => (b <= 0) == from_positive || b == 0,
                    Some((BinOp::Mul, b)) => b >= 1,
                    _ => false,
                }
            }
            _ => true,
        })
    };
    let is_input = p.decl(var).is_some_and(|d| d.input);
    if is_input && !assigned_outside {
        if let Some(r) = ranges.get(var) {
            if r.lo >= 1 && grows_away(true) {
                return SignRegion::Positive;
            }
            if r.hi <= -1 && grows_away(false) {
                return SignRegion::Negative;
            }
        }
    }
    if probes.is_empty() {
        return SignRegion::Unknown;
    }
    let Some(index) = Interpreter::new(p).var_index(var) else {
        return SignRegion::Unknown;
    };
    let interp = Interpreter::new(p);
    let mut all = Vec::new();
    for input in probes {
        let mut obs = HeadValues {
            loop_id,
            index,
            seen: Vec::new(),
        };
        if interp.run_observed(input, fuel, mode, &mut obs).is_err() || obs.seen.is_empty() {
            return SignRegion::Unknown;
        }
        all.extend(obs.seen);
    }
    if all.iter().all(|&v| v >= 1) {
        SignRegion::Positive
    } else if all.iter().all(|&v| v <= -1) {
        SignRegion::Negative
    } else {
        SignRegion::Unknown
    }
}
