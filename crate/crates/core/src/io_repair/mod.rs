//! Repair of overflow findings by expression rewriting and type widening.

mod mutants;
mod validate;
mod widen;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use similar::TextDiff;

pub use mutants::{derivation, rewrite_mutants, MAX_CHAIN};
pub use validate::{validate_rewrite, RepairContext, RewritePatch, RewriteValidation, Scope, ValidateError};
pub use widen::{widen, WidenError, WideningPatch};

use crate::lang::{pretty_print, Expr, IntWidth, Program, StmtId, StmtKind};
use crate::overflow::OverflowFinding;

pub(crate) fn ser_expr<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rewrite,
    Widen,
}

impl Strategy {
    pub const DEFAULT_ORDER: [Strategy; 2] = [Strategy::Rewrite, Strategy::Widen];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Rewrite => "rewrite",
            Strategy::Widen => "widen",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rewrite" => Ok(Strategy::Rewrite),
            "widen" => Ok(Strategy::Widen),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum IoPatch {
    Rewrite(RewritePatch),
    Widen(WideningPatch),
}

impl IoPatch {
    pub fn strategy(&self) -> Strategy {
        match self {
            IoPatch::Rewrite(_) => Strategy::Rewrite,
            IoPatch::Widen(_) => Strategy::Widen,
        }
    }

    pub fn apply(&self, p: &Program) -> Program {
        match self {
            IoPatch::Rewrite(r) => r.apply(p).expect("patch targets an existing statement"),
            IoPatch::Widen(w) => w.apply(p),
        }
    }
}

/// One examined candidate and its fate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub strategy: Strategy,
    pub description: String,
    pub evidence: Option<Scope>,
    pub accepted: bool,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IoRepairReport {
    pub finding: OverflowFinding,
    pub candidates: Vec<Candidate>,
    /// Consumers outside the program that would observe a widened type.
    /// The language has no external calls, so this is always empty.
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoRepairOutcome {
    pub patch: Option<IoPatch>,
    pub evidence: Option<Scope>,
    pub report: IoRepairReport,
}

impl IoRepairOutcome {
    pub fn succeeded(&self) -> bool {
        self.patch.is_some()
    }
}

/// Record written next to a patched program.
#[derive(Clone, Debug, Serialize)]
pub struct PatchRecord {
    pub strategy: Strategy,
    pub target: StmtId,
    pub before: String,
    pub after: String,
    pub evidence: Scope,
}

pub fn patch_record(finding: &OverflowFinding, patch: &IoPatch, evidence: Scope) -> PatchRecord {
    let (before, after) = match patch {
        IoPatch::Rewrite(r) => (r.original.to_string(), r.mutated.to_string()),
        IoPatch::Widen(w) => {
            let fmt_side = |new: bool| {
                w.widened
                    .iter()
                    .map(|(v, (o, n))| format!("{} {v}", if new { n } else { o }))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            (fmt_side(false), fmt_side(true))
        }
    };
    PatchRecord {
        strategy: patch.strategy(),
        target: finding.stmt,
        before,
        after,
        evidence,
    }
}

/// Unified diff between the printed forms of two programs.
pub fn unified_diff(before: &Program, after: &Program, name: &str) -> String {
    let (a, b) = (pretty_print(before), pretty_print(after));
    TextDiff::from_lines(&a, &b)
        .unified_diff()
        .header(name, &format!("{name} (patched)"))
        .to_string()
}

fn try_rewrites(p: &Program, stmt: StmtId, rhs: &Expr, ctx: &RepairContext, report: &mut IoRepairReport) -> Option<(IoPatch, Scope)> {
    let patches: Vec<RewritePatch> = rewrite_mutants(rhs)
        .into_iter()
        .map(|m| RewritePatch {
            target: stmt,
            original: rhs.clone(),
            derivation: derivation(rhs, &m),
            mutated: m,
        })
        .collect();
    let results: Vec<_> = patches.par_iter().map(|pt| validate_rewrite(p, pt, ctx)).collect();
    let mut winner = None;
    for (pt, res) in patches.into_iter().zip(results) {
        let description = format!("{} -> {}", pt.original, pt.mutated);
        let cand = match res {
            Ok(v) => Candidate {
                strategy: Strategy::Rewrite,
                description,
                evidence: Some(v.evidence),
                accepted: v.accepted(),
                reason: v.reason(),
            },
            Err(e) => Candidate {
                strategy: Strategy::Rewrite,
                description,
                evidence: None,
                accepted: false,
                reason: Some(e.to_string()),
            },
        };
        if cand.accepted && winner.is_none() {
            winner = Some((IoPatch::Rewrite(pt), cand.evidence.expect("accepted has evidence")));
        }
        report.candidates.push(cand);
    }
    winner
}

fn try_widenings(p: &Program, var: &str, ctx: &RepairContext, report: &mut IoRepairReport) -> Option<(IoPatch, Scope)> {
    let current = p.width_of(var)?;
    let targets: Vec<IntWidth> = IntWidth::ALL.into_iter().filter(|w| *w > current).collect();
    if targets.is_empty() {
        report.candidates.push(Candidate {
            strategy: Strategy::Widen,
            description: format!("widen {var} beyond {current}"),
            evidence: None,
            accepted: false,
            reason: Some(WidenError::WidthExhausted(var.to_string()).to_string()),
        });
    }
    for target in targets {
        let description = format!("widen {var}: {current} -> {target}");
        let mut cand = Candidate {
            strategy: Strategy::Widen,
            description,
            evidence: None,
            accepted: false,
            reason: None,
        };
        match widen(p, var, target, ctx) {
            Err(e) => cand.reason = Some(e.to_string()),
            Ok(w) => {
                let q = w.apply(p);
                let ranges = w.input_ranges(p, &ctx.ranges);
                let scope = ctx.scope_for(&q, &ranges);
                cand.evidence = Some(scope);
                match ctx.findings(&q, &ranges, scope) {
                    Err(e) => cand.reason = Some(e.to_string()),
                    Ok(found) => match found.iter().find(|f| w.closure.contains(&f.stmt)) {
                        Some(f) => cand.reason = Some(format!("still overflows: {f}")),
                        None => cand.accepted = true,
                    },
                }
                if cand.accepted {
                    report.candidates.push(cand);
                    return Some((IoPatch::Widen(w), scope));
                }
            }
        }
        report.candidates.push(cand);
    }
    None
}

/// Searches for a patch for `finding`, trying strategies in `order`; the
/// first accepted candidate wins. Every examined candidate is reported.
pub fn repair_io(p: &Program, finding: &OverflowFinding, order: &[Strategy], ctx: &RepairContext) -> IoRepairOutcome {
    let mut report = IoRepairReport {
        finding: finding.clone(),
        candidates: Vec::new(),
        warnings: Vec::new(),
        failure: None,
    };
    let stmt = p.find(finding.stmt);
    let Some(StmtKind::Assign { target, value }) = stmt.map(|s| &s.kind) else {
        report.failure = Some(format!(
            "no-valid-patch-found: statement {} is not an assignment",
            finding.stmt
        ));
        return IoRepairOutcome {
            patch: None,
            evidence: None,
            report,
        };
    };
    for strategy in order {
        let found = match strategy {
            Strategy::Rewrite => try_rewrites(p, finding.stmt, value, ctx, &mut report),
            Strategy::Widen => try_widenings(p, target, ctx, &mut report),
        };
        if let Some((patch, evidence)) = found {
            return IoRepairOutcome {
                patch: Some(patch),
                evidence: Some(evidence),
                report,
            };
        }
    }
    report.failure = Some("no-valid-patch-found".to_string());
    IoRepairOutcome {
        patch: None,
        evidence: None,
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::overflow::{detect_interval, parse_ranges};

    fn first_finding(p: &Program, ctx: &RepairContext) -> OverflowFinding {
        detect_interval(p, &ctx.ranges).into_iter().next().expect("a finding")
    }

    #[test]
    fn rewrite_fixes_sum_with_subtraction() {
        let p = parse("input i8 a, b, c; i8 e; e = a + b - c;").unwrap();
        let ctx = RepairContext::with_ranges(parse_ranges("a=100..110,b=100..110,c=100..110").unwrap());
        let out = repair_io(&p, &first_finding(&p, &ctx), &Strategy::DEFAULT_ORDER, &ctx);
        match out.patch {
            Some(IoPatch::Rewrite(r)) => assert_eq!(r.mutated.to_string(), "a - c + b"),
            other => panic!("expected rewrite, got {other:?}"),
        }
        assert_eq!(out.evidence, Some(Scope::Exhaustive));
        assert!(out.report.warnings.is_empty());
    }

    #[test]
    fn widening_when_no_order_helps() {
        let p = parse("input i8 a, b; i8 c; c = a + b;").unwrap();
        let ctx = RepairContext::with_ranges(parse_ranges("a=100..127,b=100..127").unwrap());
        let out = repair_io(&p, &first_finding(&p, &ctx), &Strategy::DEFAULT_ORDER, &ctx);
        let Some(IoPatch::Widen(w)) = &out.patch else {
            panic!("expected widening, got {:?}", out.patch);
        };
        assert_eq!(w.widened["c"], (IntWidth::I8, IntWidth::I16));
        let rejected: Vec<_> = out.report.candidates.iter().filter(|c| !c.accepted).collect();
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].strategy, Strategy::Rewrite);
        let diff = unified_diff(&p, &out.patch.as_ref().unwrap().apply(&p), "prog.mi");
        assert!(diff.contains("+i16 c;"), "{diff}");
    }

    #[test]
    fn no_patch_at_i64() {
        let p = parse("input i64 a, b; i64 c; c = a + b;").unwrap();
        let ctx = RepairContext::default();
        let out = repair_io(&p, &first_finding(&p, &ctx), &Strategy::DEFAULT_ORDER, &ctx);
        assert!(out.patch.is_none());
        assert_eq!(out.report.failure.as_deref(), Some("no-valid-patch-found"));
        assert_eq!(out.report.candidates.len(), 2);
    }

    #[test]
    fn strategy_order_is_respected() {
        let p = parse("input i8 a, b, c; i8 e; e = a + b - c;").unwrap();
        let ctx = RepairContext::with_ranges(parse_ranges("a=100..110,b=100..110,c=100..110").unwrap());
        let f = first_finding(&p, &ctx);
        let out = repair_io(&p, &f, &[Strategy::Widen, Strategy::Rewrite], &ctx);
        assert_eq!(out.patch.unwrap().strategy(), Strategy::Widen);
        let again = repair_io(&p, &f, &[Strategy::Widen, Strategy::Rewrite], &ctx);
        assert_eq!(again.report, repair_io(&p, &f, &[Strategy::Widen, Strategy::Rewrite], &ctx).report);
    }
}
