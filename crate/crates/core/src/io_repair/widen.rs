use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::validate::{RepairContext, Scope};
use crate::lang::{IntWidth, Program, StmtId, StmtKind};
use crate::overflow::{DetectError, Interval, OverflowFinding, Ranges};

/// New widths for a seed variable and the variables that depend on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WideningPatch {
    pub seed: String,
    /// Variable to (old width, new width).
    pub widened: BTreeMap<String, (IntWidth, IntWidth)>,
    /// Order in which variables were widened; the statement is the
    /// dependent assignment that forced it (`None` for the seed).
    pub trace: Vec<(String, Option<StmtId>)>,
    /// Assignments that write a widened variable or read one.
    pub closure: Vec<StmtId>,
}

impl WideningPatch {
    pub fn apply(&self, p: &Program) -> Program {
        let mut q = p.clone();
        for (v, (_, new)) in &self.widened {
            q.set_width(v, *new);
        }
        q
    }

    /// Declared ranges, plus the original width range of every widened
    /// input that has none, so widening never enlarges the input domain.
    pub fn input_ranges(&self, p: &Program, ranges: &Ranges) -> Ranges {
        let mut out = ranges.clone();
        for d in p.inputs() {
            if let Some((old, _)) = self.widened.get(&d.name) {
                out.entry(d.name.clone()).or_insert(Interval::of_width(*old));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WidenError {
    #[error("`{0}` is not declared")]
    UnknownVariable(String),
    #[error("`{var}` is already {current}, not narrower than {target}")]
    NotWider { var: String, current: IntWidth, target: IntWidth },
    #[error("`{0}` would need a type wider than i64")]
    WidthExhausted(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

fn closure_statements(p: &Program, seed: &str, widened: &BTreeMap<String, (IntWidth, IntWidth)>) -> Vec<StmtId> {
    p.statements()
        .into_iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Assign { target, value } => {
                let reads = value.vars().iter().any(|v| widened.contains_key(v));
                (target == seed || reads).then_some(s.id)
            }
            _ => None,
        })
        .collect()
}

/// Widens `seed` to `target` and, to a fixpoint, every variable assigned
/// from an expression that reads a widened variable and can overflow at
/// its current width.
pub fn widen(p: &Program, seed: &str, target: IntWidth, ctx: &RepairContext) -> Result<WideningPatch, WidenError> {
    let current = p.width_of(seed).ok_or_else(|| WidenError::UnknownVariable(seed.to_string()))?;
    if current == IntWidth::I64 {
        return Err(WidenError::WidthExhausted(seed.to_string()));
    }
    if target <= current {
        return Err(WidenError::NotWider {
            var: seed.to_string(),
            current,
            target,
        });
    }
    let mut patch = WideningPatch {
        seed: seed.to_string(),
        widened: BTreeMap::from([(seed.to_string(), (current, target))]),
        trace: vec![(seed.to_string(), None)],
        closure: Vec::new(),
    };
    loop {
        let q = patch.apply(p);
        let ranges = patch.input_ranges(p, &ctx.ranges);
        let scope = match ctx.scope {
            Some(Scope::Tests) => Scope::Tests,
            _ => ctx.scope_for(&q, &ranges),
        };
        let flagged: BTreeSet<StmtId> = ctx
            .findings(&q, &ranges, scope)?
            .iter()
            .map(|f: &OverflowFinding| f.stmt)
            .collect();
        let mut changed = false;
        for s in q.statements() {
            let StmtKind::Assign { target: var, value } = &s.kind else {
                continue;
            };
            if var == seed || !flagged.contains(&s.id) {
                continue;
            }
            if !value.vars().iter().any(|v| patch.widened.contains_key(v)) {
                continue;
            }
            let now = q.width_of(var).expect("assigned variables are declared");
            let next = if now < target { Some(target) } else { now.wider() };
            let Some(next) = next else {
                return Err(WidenError::WidthExhausted(var.clone()));
            };
            let old = p.width_of(var).expect("declared");
            patch.widened.insert(var.clone(), (old, next));
            patch.trace.push((var.clone(), Some(s.id)));
            changed = true;
            // one widening per round keeps the trace in discovery order
            break;
        }
        if !changed {
            patch.closure = closure_statements(p, seed, &patch.widened);
            return Ok(patch);
        }
    }
}
