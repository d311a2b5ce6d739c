use serde::Serialize;

use crate::lang::{CmpOp, CondExpr, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// The loop continues only while the variable stays below the bound.
    BoundedAbove,
    /// The loop continues only while the variable stays above the bound.
    BoundedBelow,
    Unclassified,
}

/// Classification of one condition atom, rewritten as `var op bound`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomBound {
    /// Position of the atom in source order.
    pub atom: usize,
    pub var: Option<String>,
    /// Effective comparison with `var` on the left, after negations.
    pub op: Option<CmpOp>,
    #[serde(serialize_with = "ser_opt_expr")]
    pub bound: Option<Expr>,
    pub kind: BoundKind,
}

fn ser_opt_expr<S: serde::Serializer>(e: &Option<Expr>, s: S) -> Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

fn kind_of(op: CmpOp) -> BoundKind {
    match op {
        CmpOp::Lt | CmpOp::Le => BoundKind::BoundedAbove,
        CmpOp::Gt | CmpOp::Ge => BoundKind::BoundedBelow,
        CmpOp::Eq | CmpOp::Ne => BoundKind::Unclassified,
    }
}

fn is_simple(e: &Expr) -> bool {
    matches!(e.unparen(), Expr::Var(_) | Expr::Const(_))
}

/// Classifies every atom of `cond`. Atoms must compare a variable with a
/// constant or another variable; a constant on the left is flipped, and
/// an atom under an odd number of negations has its operator negated.
pub fn boundedness(cond: &CondExpr) -> Vec<AtomBound> {
    cond.atoms_with_polarity()
        .into_iter()
        .enumerate()
        .map(|(i, (a, positive))| {
            let op = if positive { a.op } else { a.op.negated() };
            let unclassified = AtomBound {
                atom: i,
                var: None,
                op: None,
                bound: None,
                kind: BoundKind::Unclassified,
            };
            if !is_simple(&a.lhs) || !is_simple(&a.rhs) {
                return unclassified;
            }
            let (var, op, bound) = match (a.lhs.unparen(), a.rhs.unparen()) {
                (Expr::Var(v), rhs) => (v.clone(), op, rhs.clone()),
                (Expr::Const(_), Expr::Var(v)) => (v.clone(), op.flipped(), a.lhs.unparen().clone()),
                _ => return unclassified,
            };
            AtomBound {
                atom: i,
                var: Some(var),
                op: Some(op),
                bound: Some(bound),
                kind: kind_of(op),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::lang::StmtKind;

    fn cond(src: &str) -> CondExpr {
        let p = parse(&format!("input i8 x, y; while ({src}) {{ x = x; }}")).unwrap();
        match &p.body[0].kind {
            StmtKind::While { cond, .. } => cond.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn upper_bound() {
        let b = boundedness(&cond("x < 10"));
        assert_eq!(b[0].kind, BoundKind::BoundedAbove);
        assert_eq!(b[0].bound, Some(Expr::Const(10)));
        assert_eq!(b[0].var.as_deref(), Some("x"));
    }

    #[test]
    fn lower_bound() {
        assert_eq!(boundedness(&cond("x >= 0"))[0].kind, BoundKind::BoundedBelow);
        assert_eq!(boundedness(&cond("0 < x"))[0].kind, BoundKind::BoundedBelow);
        assert_eq!(boundedness(&cond("!(x < 0)"))[0].kind, BoundKind::BoundedBelow);
    }

    #[test]
    fn disequality_is_unclassified() {
        assert_eq!(boundedness(&cond("x != y"))[0].kind, BoundKind::Unclassified);
        assert_eq!(boundedness(&cond("x + 1 < y"))[0].kind, BoundKind::Unclassified);
    }

    #[test]
    fn variable_bound() {
        let b = boundedness(&cond("x > 0 && x <= y"));
        assert_eq!(b[1].kind, BoundKind::BoundedAbove);
        assert_eq!(b[1].bound, Some(Expr::var("y")));
    }
}
