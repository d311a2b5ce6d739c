//! Decomposition of an expression into the single-operator steps that
//! evaluate it.

use std::collections::BTreeSet;
use std::fmt;

use crate::lang::{BinOp, Expr, Stmt, StmtKind, Valuation};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    /// A constant or a program variable.
    Leaf(Expr),
    /// The result of an earlier entry in the same split list.
    Temp(usize),
}

/// One binary step: `lhs op rhs` over original leaves and earlier results.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubExpr {
    pub op: BinOp,
    pub lhs: Operand,
    pub rhs: Operand,
    /// The subtree of the original expression this step computes.
    pub source: Expr,
}

/// Split list plus the names used when printing temporaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub steps: Vec<SubExpr>,
    temp_names: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn temp_name(&self, i: usize) -> &str {
        &self.temp_names[i]
    }

    /// Entry `i` rendered with named temporaries, e.g. `a + t0`.
    pub fn render(&self, i: usize) -> String {
        let s = &self.steps[i];
        format!("{} {} {}", self.operand(&s.lhs), s.op, self.operand(&s.rhs))
    }

    fn operand(&self, o: &Operand) -> String {
        match o {
            Operand::Leaf(e) => e.to_string(),
            Operand::Temp(t) => self.temp_names[*t].clone(),
        }
    }

    /// Operand values of every step under `env`, computed over unbounded
    /// integers. Stops early (shorter result) on a zero divisor or an unbound
    /// variable.
    pub fn operand_values(&self, env: &Valuation) -> Vec<(i128, i128)> {
        let mut results: Vec<i128> = Vec::with_capacity(self.steps.len());
        let mut out = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let get = |o: &Operand, results: &Vec<i128>| -> Option<i128> {
                match o {
                    Operand::Temp(t) => results.get(*t).copied(),
                    Operand::Leaf(Expr::Const(c)) => Some(*c),
                    Operand::Leaf(Expr::Var(v)) => env.get(v).copied(),
                    Operand::Leaf(_) => None,
                }
            };
            let (Some(x), Some(y)) = (get(&s.lhs, &results), get(&s.rhs, &results)) else {
                break;
            };
            if s.op == BinOp::Div && y == 0 {
                break;
            }
            let Some(r) = crate::lang::interp::apply_exact(s.op, x, y) else {
                break;
            };
            out.push((x, y));
            results.push(r);
        }
        out
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.steps.len()).map(|i| self.render(i)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

fn walk(e: &Expr, steps: &mut Vec<SubExpr>) -> Operand {
    match e {
        Expr::Const(_) | Expr::Var(_) => Operand::Leaf(e.clone()),
        Expr::Paren(inner) => walk(inner, steps),
        Expr::Binary { op, lhs, rhs } => {
            let l = walk(lhs, steps);
            let r = walk(rhs, steps);
            steps.push(SubExpr {
                op: *op,
                lhs: l,
                rhs: r,
                source: e.clone(),
            });
            Operand::Temp(steps.len() - 1)
        }
    }
}

fn fresh_names(count: usize, taken: &BTreeSet<String>) -> Vec<String> {
    let mut prefix = "t".to_string();
    while taken
        .iter()
        .any(|v| v.starts_with(&prefix) && v[prefix.len()..].chars().all(|c| c.is_ascii_digit()))
    {
        prefix.push('_');
    }
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

fn finish(steps: Vec<SubExpr>, taken: &BTreeSet<String>) -> Split {
    let temp_names = fresh_names(steps.len(), taken);
    Split { steps, temp_names }
}

/// Splits `e` into its binary steps in evaluation order (left operand,
/// right operand, then the node). The last entry computes `e` itself.
pub fn split(e: &Expr) -> Split {
    let mut steps = Vec::new();
    walk(e, &mut steps);
    finish(steps, &e.vars())
}

/// Steps of every expression a statement evaluates before control moves on:
/// the right-hand side of an assignment, or the atoms of a condition (left
/// side, then right side, in source order). Indices match [`crate::lang::Trap::sub`].
pub fn split_stmt(s: &Stmt) -> Split {
    let mut steps = Vec::new();
    let mut taken = BTreeSet::new();
    match &s.kind {
        StmtKind::Assign { value, .. } => {
            walk(value, &mut steps);
            taken = value.vars();
        }
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => {
            for a in cond.atoms() {
                walk(&a.lhs, &mut steps);
                walk(&a.rhs, &mut steps);
            }
            taken = cond.vars();
        }
        StmtKind::Return => {}
    }
    finish(steps, &taken)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_expr;

    #[test]
    fn product_inside_sum() {
        let s = split(&parse_expr("a + b * c").unwrap());
        assert_eq!(s.len(), 2);
        assert_eq!(s.render(0), "b * c");
        assert_eq!(s.render(1), "a + t0");
        assert_eq!(s.steps[1].rhs, Operand::Temp(0));
    }

    #[test]
    fn single_variable_has_no_steps() {
        assert!(split(&parse_expr("a").unwrap()).is_empty());
    }

    #[test]
    fn left_associative_chain() {
        let s = split(&parse_expr("a + b - c").unwrap());
        assert_eq!(s.render(0), "a + b");
        assert_eq!(s.render(1), "t0 - c");
        assert_eq!(s.steps[1].source, parse_expr("a + b - c").unwrap());
    }

    #[test]
    fn parentheses_are_transparent() {
        let s = split(&parse_expr("(a - c) + b").unwrap());
        assert_eq!(s.render(0), "a - c");
        assert_eq!(s.render(1), "t0 + b");
    }

    #[test]
    fn temporaries_avoid_program_names() {
        let s = split(&parse_expr("t0 + t1 * 2").unwrap());
        assert_eq!(s.render(1), "t0 + t_0");
    }

    #[test]
    fn operand_values_follow_evaluation() {
        let s = split(&parse_expr("a + b - c").unwrap());
        let env: Valuation = [("a", 100), ("b", 100), ("c", 150)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(s.operand_values(&env), vec![(100, 100), (200, 150)]);
    }
}
