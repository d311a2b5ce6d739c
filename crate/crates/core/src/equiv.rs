//! Equivalence of arithmetic expressions over the unbounded integers.
//!
//! Expressions over `+`, `-` and `*` are brought into a canonical polynomial
//! form; two expressions denote the same function iff their forms coincide.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{eval_math, BinOp, Expr, Valuation};

/// Variable name to exponent, exponents always positive.
pub type Monomial = BTreeMap<String, u32>;

/// Integer polynomial with no zero coefficients stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, i128>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("operator `{0}` is not supported")]
    UnsupportedOperator(BinOp),
    #[error("coefficient overflow while normalizing")]
    CoefficientOverflow,
    #[error("grid of {0} points exceeds the limit of 10^7")]
    GridTooLarge(u128),
    #[error("variable `{var}` has degree {degree}, above the bound {bound}")]
    DegreeAboveBound { var: String, degree: u32, bound: u32 },
}

/// Largest grid [`grid_check`] evaluates.
pub const MAX_GRID_POINTS: u128 = 10_000_000;

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial::default()
    }

    pub fn constant(c: i128) -> Polynomial {
        let mut p = Polynomial::zero();
        if c != 0 {
            p.terms.insert(Monomial::new(), c);
        }
        p
    }

    pub fn variable(name: &str) -> Polynomial {
        let mut p = Polynomial::zero();
        p.terms.insert(Monomial::from([(name.to_string(), 1)]), 1);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i128)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.terms.keys().flat_map(|m| m.keys().cloned()).collect()
    }

    /// Highest exponent of `var` in any term.
    pub fn degree_in(&self, var: &str) -> u32 {
        self.terms.keys().filter_map(|m| m.get(var).copied()).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: i128) -> Result<(), EquivError> {
        let slot = self.terms.entry(m.clone()).or_insert(0);
        *slot = slot.checked_add(c).ok_or(EquivError::CoefficientOverflow)?;
        if *slot == 0 {
            self.terms.remove(&m);
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, EquivError> {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c)?;
        }
        Ok(out)
    }

    pub fn neg(&self) -> Result<Polynomial, EquivError> {
        let mut out = Polynomial::zero();
        for (m, c) in self.terms() {
            out.terms
                .insert(m.clone(), c.checked_neg().ok_or(EquivError::CoefficientOverflow)?);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, EquivError> {
        self.add(&other.neg()?)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, EquivError> {
        let mut out = Polynomial::zero();
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                let mut m = m1.clone();
                for (v, e) in m2 {
                    *m.entry(v.clone()).or_insert(0) += e;
                }
                out.add_term(m, c1.checked_mul(c2).ok_or(EquivError::CoefficientOverflow)?)?;
            }
        }
        Ok(out)
    }

    /// Value at `env`; variables absent from `env` count as zero.
    pub fn eval(&self, env: &Valuation) -> Option<i128> {
        let mut total: i128 = 0;
        for (m, c) in self.terms() {
            let mut t = c;
            for (v, e) in m {
                let x = env.get(v).copied().unwrap_or(0);
                t = t.checked_mul(x.checked_pow(*e)?)?;
            }
            total = total.checked_add(t)?;
        }
        Some(total)
    }

    /// An expression computing this polynomial: terms in canonical order,
    /// each a coefficient times a left-nested product of variables.
    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (m, c) in self.terms() {
            let mut factors: Vec<Expr> = Vec::new();
            for (v, e) in m {
                for _ in 0..*e {
                    factors.push(Expr::var(v.clone()));
                }
            }
            let magnitude = if acc.is_some() { c.abs() } else { c };
            let mut term = if factors.is_empty() || magnitude != 1 {
                Some(Expr::Const(magnitude))
            } else {
                None
            };
            for f in factors {
                term = Some(match term {
                    None => f,
                    Some(t) => Expr::bin(BinOp::Mul, t, f),
                });
            }
            let term = term.expect("nonempty term");
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::bin(if c < 0 { BinOp::Sub } else { BinOp::Add }, a, term),
            });
        }
        acc.unwrap_or(Expr::Const(0))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            let mono: Vec<String> = m
                .iter()
                .map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
                .collect();
            let sign = if c < 0 { "-" } else { "+" };
            if i == 0 {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mag = c.unsigned_abs();
            match (mono.is_empty(), mag) {
                (true, _) => write!(f, "{mag}")?,
                (false, 1) => write!(f, "{}", mono.join("*"))?,
                (false, _) => write!(f, "{mag}*{}", mono.join("*"))?,
            }
        }
        Ok(())
    }
}

/// Canonical polynomial of an expression over `+`, `-`, `*`.
pub fn normalize(e: &Expr) -> Result<Polynomial, EquivError> {
    match e {
        Expr::Const(c) => Ok(Polynomial::constant(*c)),
        Expr::Var(v) => Ok(Polynomial::variable(v)),
        Expr::Paren(inner) => normalize(inner),
        Expr::Binary { op, lhs, rhs } => {
            let l = normalize(lhs)?;
            let r = normalize(rhs)?;
            match op {
                BinOp::Add => l.add(&r),
                BinOp::Sub => l.sub(&r),
                BinOp::Mul => l.mul(&r),
                BinOp::Div => Err(EquivError::UnsupportedOperator(BinOp::Div)),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Equivalence {
    Equivalent,
    /// A valuation of every variable of both sides at which they differ.
    Inequivalent { witness: Valuation },
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Calls `f` on every point of `{0..=bound}^n` in ascending lexicographic
/// order (first variable most significant) until it returns `true`.
fn scan_grid(vars: &[String], bound: u32, mut f: impl FnMut(&Valuation) -> bool) -> Option<Valuation> {
    let mut point: Valuation = vars.iter().map(|v| (v.clone(), 0)).collect();
    loop {
        if f(&point) {
            return Some(point);
        }
        // increment the last coordinate with carry
        let mut carried = true;
        for v in vars.iter().rev() {
            let x = point.get_mut(v).expect("grid variable");
            if *x < bound as i128 {
                *x += 1;
                carried = false;
                break;
            }
            *x = 0;
        }
        if carried {
            return None;
        }
    }
}

/// Decides `e1 = e2` over the integers. On inequivalence the witness is the
/// least grid point (variables sorted by name) where the difference
/// polynomial is nonzero; such a point exists within the per-variable degree.
pub fn equivalent(e1: &Expr, e2: &Expr) -> Result<Equivalence, EquivError> {
    let diff = normalize(e1)?.sub(&normalize(e2)?)?;
    if diff.is_zero() {
        return Ok(Equivalence::Equivalent);
    }
    let all: BTreeSet<String> = e1.vars().union(&e2.vars()).cloned().collect();
    let vars: Vec<String> = all.into_iter().collect();
    let bound = vars.iter().map(|v| diff.degree_in(v)).max().unwrap_or(0);
    let witness = scan_grid(&vars, bound, |pt| diff.eval(pt).is_none_or(|v| v != 0))
        .expect("a nonzero polynomial is nonzero somewhere on its degree grid");
    Ok(Equivalence::Inequivalent { witness })
}

/// Upper bound on the degree of each variable, read off the syntax tree.
pub fn syntactic_degrees(e: &Expr) -> BTreeMap<String, u32> {
    match e {
        Expr::Const(_) => BTreeMap::new(),
        Expr::Var(v) => BTreeMap::from([(v.clone(), 1)]),
        Expr::Paren(inner) => syntactic_degrees(inner),
        Expr::Binary { op, lhs, rhs } => {
            let l = syntactic_degrees(lhs);
            let r = syntactic_degrees(rhs);
            let mut out = l.clone();
            for (v, d) in r {
                let slot = out.entry(v).or_insert(0);
                *slot = match op {
                    BinOp::Mul | BinOp::Div => *slot + d,
                    BinOp::Add | BinOp::Sub => (*slot).max(d),
                };
            }
            out
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridVerdict {
    Agree,
    Disagree { witness: Valuation },
}

/// Evaluates both expressions in mathematical semantics on every point of
/// `{0..=degree_bound}^n` and reports the first disagreement. Agreement
/// implies equivalence when no variable exceeds `degree_bound`.
pub fn grid_check(e1: &Expr, e2: &Expr, degree_bound: u32) -> Result<GridVerdict, EquivError> {
    let all: BTreeSet<String> = e1.vars().union(&e2.vars()).cloned().collect();
    let vars: Vec<String> = all.into_iter().collect();
    for e in [e1, e2] {
        for (var, degree) in syntactic_degrees(e) {
            if degree > degree_bound {
                return Err(EquivError::DegreeAboveBound {
                    var,
                    degree,
                    bound: degree_bound,
                });
            }
        }
    }
    let points = (degree_bound as u128 + 1).checked_pow(vars.len() as u32).unwrap_or(u128::MAX);
    if points > MAX_GRID_POINTS {
        return Err(EquivError::GridTooLarge(points));
    }
    let found = scan_grid(&vars, degree_bound, |pt| eval_math(e1, pt).ok() != eval_math(e2, pt).ok());
    Ok(match found {
        Some(witness) => GridVerdict::Disagree { witness },
        None => GridVerdict::Agree,
    })
}
