use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lang::{BinOp, IntWidth};

/// Closed integer interval `[lo, hi]`, `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i128,
    pub hi: i128,
}

/// Declared value ranges of input variables.
pub type Ranges = BTreeMap<String, Interval>;

impl Interval {
    pub fn new(lo: i128, hi: i128) -> Interval {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: i128) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn of_width(w: IntWidth) -> Interval {
        Interval { lo: w.min(), hi: w.max() }
    }

    pub fn contains(&self, v: i128) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn within(&self, w: IntWidth) -> bool {
        w.contains(self.lo) && w.contains(self.hi)
    }

    /// Number of integers in the interval.
    pub fn size(&self) -> u128 {
        (self.hi - self.lo) as u128 + 1
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Intersection with the range of `w`; `None` when disjoint.
    pub fn clamp(&self, w: IntWidth) -> Option<Interval> {
        let lo = self.lo.max(w.min());
        let hi = self.hi.min(w.max());
        (lo <= hi).then_some(Interval { lo, hi })
    }

    fn from_points(points: &[i128]) -> Interval {
        let lo = *points.iter().min().expect("at least one point");
        let hi = *points.iter().max().expect("at least one point");
        Interval { lo, hi }
    }

    /// Outward-sound image of `op`. Operands are assumed to lie within the
    /// `i64` range, so corner products fit in `i128`. Returns `None` only for
    /// division by the point interval `[0, 0]`, which never completes.
    pub fn apply(op: BinOp, a: Interval, b: Interval) -> Option<Interval> {
        match op {
            BinOp::Add => Some(Interval {
                lo: a.lo + b.lo,
                hi: a.hi + b.hi,
            }),
            BinOp::Sub => Some(Interval {
                lo: a.lo - b.hi,
                hi: a.hi - b.lo,
            }),
            BinOp::Mul => Some(Interval::from_points(&[a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi])),
            BinOp::Div => {
                // Truncating division is monotone in each argument on each
                // sign region of the divisor, so corners of the nonzero parts
                // bound it.
                let mut pts = Vec::new();
                for part in [(b.lo, b.hi.min(-1)), (b.lo.max(1), b.hi)] {
                    if part.0 <= part.1 {
                        for x in [a.lo, a.hi] {
                            for y in [part.0, part.1] {
                                pts.push(x / y);
                            }
                        }
                    }
                }
                (!pts.is_empty()).then(|| Interval::from_points(&pts))
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = String;

    /// Accepts `lo..hi` (inclusive) or a single integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |t: &str| t.trim().parse::<i128>().map_err(|_| format!("bad bound `{}`", t.trim()));
        let (lo, hi) = match s.split_once("..") {
            Some((l, h)) => (parse(l)?, parse(h.trim_start_matches('='))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        Ok(Interval { lo, hi })
    }
}

/// Parses `a=0..100,b=5` into ranges.
pub fn parse_ranges(s: &str) -> Result<Ranges, String> {
    let mut out = Ranges::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `name=lo..hi`, found `{part}`"))?;
        out.insert(k.trim().to_string(), v.parse()?);
    }
    Ok(out)
}

pub fn format_ranges(r: &Ranges) -> String {
    r.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}
