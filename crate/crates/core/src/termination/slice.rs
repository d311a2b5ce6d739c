use std::collections::BTreeSet;

use super::contains;
use crate::lang::{Program, Stmt, StmtId, StmtKind};

fn all_vars(s: &Stmt, out: &mut BTreeSet<String>) {
    match &s.kind {
        StmtKind::Assign { target, value } => {
            out.insert(target.clone());
            out.extend(value.vars());
        }
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => {
            out.extend(cond.vars());
            for b in s.blocks() {
                for c in b {
                    all_vars(c, out);
                }
            }
        }
        StmtKind::Return => {}
    }
}

/// Backward slice of a loop: its condition is always relevant, and the body
/// is re-sliced until the relevant set stops growing.
fn slice_loop(s: &Stmt, relevant: &mut BTreeSet<String>) -> Stmt {
    let StmtKind::While { cond, body } = &s.kind else {
        unreachable!("slice_loop on a non-loop");
    };
    relevant.extend(cond.vars());
    loop {
        let mut r = relevant.clone();
        let sliced = slice_block(body, &mut r);
        if r == *relevant {
            return Stmt {
                id: s.id,
                kind: StmtKind::While {
                    cond: cond.clone(),
                    body: sliced,
                },
            };
        }
        *relevant = r;
    }
}

/// Keeps the statements of `stmts` that can affect a variable in
/// `relevant` or whether execution halts: relevant assignments, returns,
/// every loop, and branches containing any of these. Walks backwards and
/// grows `relevant` with what the kept statements read.
fn slice_block(stmts: &[Stmt], relevant: &mut BTreeSet<String>) -> Vec<Stmt> {
    let mut kept = Vec::new();
    for s in stmts.iter().rev() {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                if relevant.contains(target) {
                    relevant.extend(value.vars());
                    kept.push(s.clone());
                }
            }
            StmtKind::Return => kept.push(s.clone()),
            StmtKind::While { .. } => kept.push(slice_loop(s, relevant)),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut r_then = relevant.clone();
                let t = slice_block(then_branch, &mut r_then);
                let mut r_else = relevant.clone();
                let e = else_branch.as_ref().map(|b| slice_block(b, &mut r_else));
                let e_empty = e.as_ref().is_none_or(|b| b.is_empty());
                if !t.is_empty() || !e_empty {
                    relevant.extend(r_then);
                    relevant.extend(r_else);
                    relevant.extend(cond.vars());
                    kept.push(Stmt {
                        id: s.id,
                        kind: StmtKind::If {
                            cond: cond.clone(),
                            then_branch: t,
                            else_branch: if e_empty { None } else { e },
                        },
                    });
                }
            }
        }
    }
    kept.reverse();
    kept
}

/// The minimal program for deciding whether `loop_id` terminates: the loop
/// with its body reduced to the statements its condition depends on, plus
/// the preceding statements those depend on. Statement ids are those of
/// `p`. Every input declaration is kept so inputs of `p` run unchanged.
/// Returns `None` if `loop_id` is not a loop of `p`.
pub fn slice(p: &Program, loop_id: StmtId) -> Option<Program> {
    if !p.find(loop_id)?.is_loop() {
        return None;
    }
    let k = p.body.iter().position(|s| contains(s, loop_id))?;
    let mut relevant = BTreeSet::new();
    let anchor = if p.body[k].id == loop_id {
        slice_loop(&p.body[k], &mut relevant)
    } else {
        // a nested loop keeps its enclosing top-level statement whole
        all_vars(&p.body[k], &mut relevant);
        p.body[k].clone()
    };
    let mut body = slice_block(&p.body[..k], &mut relevant);
    body.push(anchor);
    let mut used = BTreeSet::new();
    for s in &body {
        all_vars(s, &mut used);
    }
    let decls = p
        .decls
        .iter()
        .filter(|d| d.input || used.contains(&d.name))
        .cloned()
        .collect();
    Some(Program { decls, body })
}
