use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::lang::{CondExpr, Program, Stmt, StmtId, StmtKind};

/// Variables whose values can change the outcome of a loop condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlVarSet {
    pub loop_id: StmtId,
    pub variables: BTreeSet<String>,
    /// For each variable, the chain of variables leading from it to the
    /// condition; condition variables have a one-element chain.
    pub derivation: BTreeMap<String, Vec<String>>,
}

impl ControlVarSet {
    pub fn contains(&self, v: &str) -> bool {
        self.variables.contains(v)
    }
}

/// Assignments in `stmts` (recursively) with the conditions guarding each
/// one inside the block.
fn guarded_assignments<'a>(stmts: &'a [Stmt], guards: &mut Vec<&'a CondExpr>, out: &mut Vec<(&'a Stmt, Vec<&'a CondExpr>)>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { .. } => out.push((s, guards.clone())),
            StmtKind::While { cond, body } => {
                guards.push(cond);
                guarded_assignments(body, guards, out);
                guards.pop();
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                guards.push(cond);
                guarded_assignments(then_branch, guards, out);
                if let Some(e) = else_branch {
                    guarded_assignments(e, guards, out);
                }
                guards.pop();
            }
            StmtKind::Return => {}
        }
    }
}

/// Condition variables of `loop_id` closed under backward data dependence
/// through the assignments of its body. Variables of conditions guarding an
/// assignment to a control variable are included as well. `None` if
/// `loop_id` is not a loop.
pub fn control_variables(p: &Program, loop_id: StmtId) -> Option<ControlVarSet> {
    let stmt = p.find(loop_id)?;
    let StmtKind::While { cond, body } = &stmt.kind else {
        return None;
    };
    let mut derivation: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for v in cond.vars() {
        derivation.insert(v.clone(), vec![v]);
    }
    let mut assigns = Vec::new();
    guarded_assignments(body, &mut Vec::new(), &mut assigns);
    loop {
        let mut added = false;
        for (s, guards) in &assigns {
            let StmtKind::Assign { target, value } = &s.kind else {
                continue;
            };
            let Some(chain) = derivation.get(target).cloned() else {
                continue;
            };
            let mut sources: BTreeSet<String> = value.vars();
            for g in guards {
                sources.extend(g.vars());
            }
            for v in sources {
                if let std::collections::btree_map::Entry::Vacant(slot) = derivation.entry(v) {
                    let mut c = vec![slot.key().clone()];
                    c.extend(chain.iter().cloned());
                    slot.insert(c);
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    Some(ControlVarSet {
        loop_id,
        variables: derivation.keys().cloned().collect(),
        derivation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn vars(src: &str) -> Vec<String> {
        let p = parse(src).unwrap();
        let l = p.loops()[0];
        control_variables(&p, l).unwrap().variables.into_iter().collect()
    }

    #[test]
    fn step_variable_is_control() {
        assert_eq!(vars("input i8 x, d; while (x < 10) { x = x + d; }"), ["d", "x"]);
    }

    #[test]
    fn accumulator_is_excluded() {
        assert_eq!(
            vars("input i8 n; i8 i, s; i = 0; s = 0; while (i < n) { i = i + 1; s = s + i; }"),
            ["i", "n"]
        );
    }

    #[test]
    fn both_atoms_and_dependence() {
        assert_eq!(vars("input i8 a, b, c; while (a > 0 && b > 0) { a = a - c; }"), ["a", "b", "c"]);
    }

    #[test]
    fn guard_of_update_is_control() {
        assert_eq!(vars("input i8 x, y; while (x < 10) { if (y > 0) { x = x + 1; } }"), ["x", "y"]);
    }

    #[test]
    fn derivation_chain() {
        let p = parse("input i8 x, d, e; while (x < 10) { x = x + d; d = e; }").unwrap();
        let c = control_variables(&p, 1).unwrap();
        assert_eq!(c.derivation["e"], ["e", "d", "x"]);
        assert_eq!(c.derivation["x"], ["x"]);
    }

    #[test]
    fn non_loop_has_no_control_set() {
        let p = parse("input i8 x; x = 1;").unwrap();
        assert!(control_variables(&p, 1).is_none());
    }
}
