//! Reorderings of same-precedence operator chains.

use std::collections::BTreeMap;

use crate::lang::{BinOp, Expr};

/// Chains longer than this are not permuted (their sub-terms still are).
pub const MAX_CHAIN: usize = 8;

/// Generation stops after this many candidates.
const MAX_CANDIDATES: usize = 50_000;

/// A term of an additive chain with its sign.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Signed {
    negative: bool,
    term: Expr,
}

fn flatten_additive(e: &Expr, out: &mut Vec<Signed>) {
    match e {
        Expr::Binary {
            op: op @ (BinOp::Add | BinOp::Sub),
            lhs,
            rhs,
        } => {
            flatten_additive(lhs, out);
            out.push(Signed {
                negative: *op == BinOp::Sub,
                term: (**rhs).clone(),
            });
        }
        other => out.push(Signed {
            negative: false,
            term: other.clone(),
        }),
    }
}

fn flatten_multiplicative(e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary {
            op: BinOp::Mul,
            lhs,
            rhs,
        } => {
            flatten_multiplicative(lhs, out);
            out.push((**rhs).clone());
        }
        other => out.push(other.clone()),
    }
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Every expression equal to `e` up to reordering of chains, `e` included.
fn variants(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Const(_) | Expr::Var(_) => vec![e.clone()],
        Expr::Paren(inner) => variants(inner).into_iter().map(Expr::paren).collect(),
        Expr::Binary { op, .. } => match op {
            BinOp::Add | BinOp::Sub => {
                let mut chain = Vec::new();
                flatten_additive(e, &mut chain);
                let options: Vec<Vec<Expr>> = chain.iter().map(|s| variants(&s.term)).collect();
                let orders = if chain.len() <= MAX_CHAIN {
                    permutations(chain.len())
                } else {
                    vec![(0..chain.len()).collect()]
                };
                let mut out = Vec::new();
                for order in orders {
                    if chain[order[0]].negative {
                        continue;
                    }
                    for choice in product(&order.iter().map(|&i| options[i].len()).collect::<Vec<_>>()) {
                        let mut acc: Option<Expr> = None;
                        for (slot, &i) in order.iter().enumerate() {
                            let t = options[i][choice[slot]].clone();
                            acc = Some(match acc {
                                None => t,
                                Some(a) => Expr::bin(if chain[i].negative { BinOp::Sub } else { BinOp::Add }, a, t),
                            });
                        }
                        out.push(acc.expect("nonempty chain").grouped());
                        if out.len() >= MAX_CANDIDATES {
                            return out;
                        }
                    }
                }
                out
            }
            BinOp::Mul => {
                let mut chain = Vec::new();
                flatten_multiplicative(e, &mut chain);
                let options: Vec<Vec<Expr>> = chain.iter().map(variants).collect();
                let orders = if chain.len() <= MAX_CHAIN {
                    permutations(chain.len())
                } else {
                    vec![(0..chain.len()).collect()]
                };
                let mut out = Vec::new();
                for order in orders {
                    for choice in product(&order.iter().map(|&i| options[i].len()).collect::<Vec<_>>()) {
                        let mut acc: Option<Expr> = None;
                        for (slot, &i) in order.iter().enumerate() {
                            let t = options[i][choice[slot]].clone();
                            acc = Some(match acc {
                                None => t,
                                Some(a) => Expr::bin(BinOp::Mul, a, t),
                            });
                        }
                        out.push(acc.expect("nonempty chain").grouped());
                        if out.len() >= MAX_CANDIDATES {
                            return out;
                        }
                    }
                }
                out
            }
            BinOp::Div => vec![e.clone()],
        },
    }
}

/// Mixed-radix counter over `sizes`.
fn product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// All distinct reorderings of the additive and multiplicative chains of
/// `e`, excluding `e` itself, sorted by printed form. Expressions with
/// division have no mutants.
pub fn rewrite_mutants(e: &Expr) -> Vec<Expr> {
    if e.contains_op(BinOp::Div) {
        return Vec::new();
    }
    let original = e.to_string();
    let mut by_text: BTreeMap<String, Expr> = BTreeMap::new();
    for v in variants(e) {
        let text = v.to_string();
        if text != original {
            by_text.entry(text).or_insert(v);
        }
    }
    by_text.into_values().collect()
}

/// Steps turning the top-level chain of `from` into that of `to`, each an
/// exchange of two adjacent terms. Nested reorderings are reported as one
/// step per changed term.
pub fn derivation(from: &Expr, to: &Expr) -> Vec<String> {
    let (a, b) = (top_terms(from), top_terms(to));
    if a.len() != b.len() || a.len() < 2 {
        return vec![format!("rewrite {from} to {to}")];
    }
    let mut steps = Vec::new();
    let mut cur = a.clone();
    // match terms of `to` to positions of `from` by text; fall back to order
    let mut used = vec![false; a.len()];
    let mut target_pos = Vec::new();
    for t in &b {
        let k = (0..a.len())
            .find(|&k| !used[k] && a[k] == *t)
            .or_else(|| (0..a.len()).find(|&k| !used[k]));
        let k = k.expect("same length");
        used[k] = true;
        target_pos.push(k);
    }
    let mut order: Vec<usize> = (0..a.len()).collect();
    for (i, &want) in target_pos.iter().enumerate() {
        let mut j = order.iter().position(|&x| x == want).expect("present");
        while j > i {
            steps.push(format!("swap {} and {}", cur[j - 1], cur[j]));
            cur.swap(j - 1, j);
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    for (x, y) in cur.iter().zip(&b) {
        if x != y {
            steps.push(format!("reorder {x} to {y}"));
        }
    }
    steps
}

fn top_terms(e: &Expr) -> Vec<String> {
    match e {
        Expr::Binary {
            op: BinOp::Add | BinOp::Sub,
            ..
        } => {
            let mut chain = Vec::new();
            flatten_additive(e, &mut chain);
            chain
                .iter()
                .map(|s| format!("{}{}", if s.negative { "-" } else { "+" }, s.term))
                .collect()
        }
        Expr::Binary { op: BinOp::Mul, .. } => {
            let mut chain = Vec::new();
            flatten_multiplicative(e, &mut chain);
            chain.iter().map(|t| t.to_string()).collect()
        }
        other => vec![other.to_string()],
    }
}
