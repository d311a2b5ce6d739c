use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equiv::{equivalent, EquivError, Equivalence};
use crate::lang::testcase::format_valuation;
use crate::lang::{Expr, Program, StmtId, StmtKind, TestCase, DEFAULT_FUEL};
use crate::overflow::detect::{input_domains, space_size, MAX_EXHAUSTIVE_SPACE};
use crate::overflow::{
    detect_concrete, detect_exhaustive_in, detect_interval, DetectConfig, DetectError, OverflowFinding, Ranges,
    RuleMode,
};

/// Evidence used to claim that a patched statement no longer overflows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Every input in the declared ranges, enumerated.
    Exhaustive,
    /// Static interval propagation over the declared ranges.
    Interval,
    /// Only the supplied tests.
    Tests,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Exhaustive => "exhaustive",
            Scope::Interval => "interval",
            Scope::Tests => "tests",
        })
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Scope::Exhaustive),
            "interval" => Ok(Scope::Interval),
            "tests" => Ok(Scope::Tests),
            other => Err(format!("unknown validation scope `{other}`")),
        }
    }
}

/// Inputs shared by every validation step of an overflow repair.
#[derive(Clone, Debug, Default)]
pub struct RepairContext {
    pub ranges: Ranges,
    pub tests: Vec<TestCase>,
    /// `None` picks exhaustive when the input space is small enough and
    /// interval otherwise.
    pub scope: Option<Scope>,
    pub rule_mode: RuleMode,
}

impl RepairContext {
    pub fn with_ranges(ranges: Ranges) -> RepairContext {
        RepairContext {
            ranges,
            ..RepairContext::default()
        }
    }

    pub fn scope_for(&self, p: &Program, ranges: &Ranges) -> Scope {
        if let Some(s) = self.scope {
            return s;
        }
        match input_domains(p, ranges) {
            Ok(d) if space_size(&d) <= MAX_EXHAUSTIVE_SPACE => Scope::Exhaustive,
            _ => Scope::Interval,
        }
    }

    fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            rule_mode: self.rule_mode,
            fuel: DEFAULT_FUEL,
        }
    }

    /// Findings on `p` under `scope`, with `ranges` as the input domains.
    pub fn findings(&self, p: &Program, ranges: &Ranges, scope: Scope) -> Result<Vec<OverflowFinding>, DetectError> {
        match scope {
            Scope::Exhaustive => detect_exhaustive_in(p, ranges, self.detect_config()),
            Scope::Interval => Ok(detect_interval(p, ranges)),
            Scope::Tests => Ok(detect_concrete(p, &self.tests, self.detect_config()).findings),
        }
    }
}

/// Replacement of an assignment's right-hand side by a reordering of it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RewritePatch {
    pub target: StmtId,
    #[serde(serialize_with = "crate::io_repair::ser_expr")]
    pub original: Expr,
    #[serde(serialize_with = "crate::io_repair::ser_expr")]
    pub mutated: Expr,
    pub derivation: Vec<String>,
}

impl RewritePatch {
    pub fn apply(&self, p: &Program) -> Option<Program> {
        p.with_rhs(self.target, self.mutated.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidateError {
    #[error("statement {0} does not exist")]
    UnknownStatement(StmtId),
    #[error("statement {0} is not an assignment")]
    NotAnAssignment(StmtId),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
}

/// Both conjuncts of the rewrite acceptance condition, reported separately.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RewriteValidation {
    pub evidence: Scope,
    /// First overflow still present at the patched statement.
    pub overflow: Option<OverflowFinding>,
    pub equivalence: Equivalence,
}

impl RewriteValidation {
    pub fn overflow_free(&self) -> bool {
        self.overflow.is_none()
    }

    pub fn accepted(&self) -> bool {
        self.overflow_free() && self.equivalence.holds()
    }

    pub fn reason(&self) -> Option<String> {
        let mut parts = Vec::new();
        if let Some(f) = &self.overflow {
            let w = f.witness.as_ref().map(format_valuation);
            parts.push(match w {
                Some(w) => format!("sub-expression {} still overflows (witness {w})", f.sub_expr),
                None => format!("sub-expression {} may still overflow ({} analysis)", f.sub_expr, f.mode),
            });
        }
        if let Equivalence::Inequivalent { witness } = &self.equivalence {
            parts.push(format!("inequivalent, witness {}", format_valuation(witness)));
        }
        (!parts.is_empty()).then(|| parts.join("; "))
    }
}

/// Checks a rewrite: no overflow left at the target statement under the
/// chosen scope, and the new expression equals the old one over the integers.
pub fn validate_rewrite(p: &Program, patch: &RewritePatch, ctx: &RepairContext) -> Result<RewriteValidation, ValidateError> {
    let stmt = p.find(patch.target).ok_or(ValidateError::UnknownStatement(patch.target))?;
    if !matches!(stmt.kind, StmtKind::Assign { .. }) {
        return Err(ValidateError::NotAnAssignment(patch.target));
    }
    let equivalence = equivalent(&patch.original, &patch.mutated)?;
    let patched = patch.apply(p).expect("target checked above");
    let scope = ctx.scope_for(&patched, &ctx.ranges);
    let overflow = ctx
        .findings(&patched, &ctx.ranges, scope)?
        .into_iter()
        .find(|f| f.stmt == patch.target);
    Ok(RewriteValidation {
        evidence: scope,
        overflow,
        equivalence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::lang::parse_expr;
    use crate::overflow::parse_ranges;

    fn setup() -> (Program, RepairContext) {
        let p = parse("input i8 a, b, c; i8 e; e = a + b - c;").unwrap();
        let ctx = RepairContext::with_ranges(parse_ranges("a=100..110,b=100..110,c=100..110").unwrap());
        (p, ctx)
    }

    fn patch(to: &str) -> RewritePatch {
        RewritePatch {
            target: 1,
            original: parse_expr("a + b - c").unwrap(),
            mutated: parse_expr(to).unwrap(),
            derivation: Vec::new(),
        }
    }

    #[test]
    fn accepted_reordering() {
        let (p, ctx) = setup();
        let v = validate_rewrite(&p, &patch("a - c + b"), &ctx).unwrap();
        assert_eq!(v.evidence, Scope::Exhaustive);
        assert!(v.accepted(), "{:?}", v.reason());
        let ctx = RepairContext {
            scope: Some(Scope::Interval),
            ..ctx
        };
        assert!(validate_rewrite(&p, &patch("a - c + b"), &ctx).unwrap().accepted());
    }

    #[test]
    fn rejected_when_leading_sum_remains() {
        let (p, ctx) = setup();
        let v = validate_rewrite(&p, &patch("b + a - c"), &ctx).unwrap();
        assert!(!v.accepted());
        assert!(v.equivalence.holds());
        let f = v.overflow.unwrap();
        assert_eq!(f.sub_expr, "b + a");
        let w = f.witness.unwrap();
        assert_eq!((w["a"], w["b"]), (100, 100));
    }

    #[test]
    fn rejected_when_inequivalent() {
        let (p, ctx) = setup();
        let v = validate_rewrite(&p, &patch("a + b"), &ctx).unwrap();
        assert!(!v.accepted());
        match &v.equivalence {
            Equivalence::Inequivalent { witness } => assert_eq!(witness["c"], 1),
            Equivalence::Equivalent => panic!("expected inequivalence"),
        }
        assert!(v.reason().unwrap().contains("inequivalent, witness"));
    }

    #[test]
    fn target_must_be_an_assignment() {
        let p = parse("input i8 a; while (a > 0) { a = a - 1; }").unwrap();
        let ctx = RepairContext::default();
        let mut pt = patch("a");
        pt.original = parse_expr("a").unwrap();
        assert_eq!(validate_rewrite(&p, &pt, &ctx), Err(ValidateError::NotAnAssignment(1)));
    }
}
