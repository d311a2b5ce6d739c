//! Precondition rules deciding whether `x op y` leaves the range of a width.
//!
//! Every rule inspects the individual operand values before the operation
//! is performed; nothing here computes `x op y` and looks for wraparound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lang::{BinOp, IntWidth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OverflowKind {
    /// Result above `intmax`.
    IO,
    /// Result below `intmin`.
    IU,
    None,
}

impl OverflowKind {
    pub fn is_overflow(self) -> bool {
        self != OverflowKind::None
    }
}

impl fmt::Display for OverflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverflowKind::IO => "IO",
            OverflowKind::IU => "IU",
            OverflowKind::None => "none",
        })
    }
}

/// Which rule set [`check_op`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RuleMode {
    /// The original sign-based case analyses, taken literally. Known to miss
    /// negative-operand overflow for `*` and to misjudge the `-` cases.
    Literal,
    /// Exact characterization: IO iff the mathematical result exceeds
    /// `intmax`, IU iff it falls below `intmin`.
    #[default]
    Corrected,
}

impl fmt::Display for RuleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleMode::Literal => "literal",
            RuleMode::Corrected => "corrected",
        })
    }
}

impl FromStr for RuleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(RuleMode::Literal),
            "corrected" => Ok(RuleMode::Corrected),
            other => Err(format!("unknown rule mode `{other}`")),
        }
    }
}

/// Truncating division, as C computes `intmax / x`.
fn tdiv(a: i128, b: i128) -> i128 {
    a / b
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

fn literal_rule(op: BinOp, x: i128, y: i128, w: IntWidth) -> OverflowKind {
    let (max, min) = (w.max(), w.min());
    let (io, iu) = match op {
        BinOp::Add => (x > 0 && y > max - x, x < 0 && y < min - x),
        BinOp::Sub => (x > 0 && y < x - max, x < 0 && y < min - x),
        BinOp::Mul => (x > 0 && y > tdiv(max, x), x < 0 && y < tdiv(min, x)),
        BinOp::Div => return OverflowKind::None,
    };
    if io {
        OverflowKind::IO
    } else if iu {
        OverflowKind::IU
    } else {
        OverflowKind::None
    }
}

fn corrected_rule(op: BinOp, x: i128, y: i128, w: IntWidth) -> OverflowKind {
    let (max, min) = (w.max(), w.min());
    let (io, iu) = match op {
        BinOp::Add => (y > 0 && x > max - y, y < 0 && x < min - y),
        BinOp::Sub => (y < 0 && x > max + y, y > 0 && x < min + y),
        BinOp::Mul => {
            if x > 0 {
                (y > floor_div(max, x), y < ceil_div(min, x))
            } else if x < 0 {
                (y < ceil_div(max, x), y > floor_div(min, x))
            } else {
                (false, false)
            }
        }
        BinOp::Div => return check_div(x, y, w),
    };
    if io {
        OverflowKind::IO
    } else if iu {
        OverflowKind::IU
    } else {
        OverflowKind::None
    }
}

/// Decides whether `x op y` overflows width `w` under the chosen rule set.
///
/// Division has no sign-based rule; in corrected mode it
/// defers to [`check_div`], in literal mode it never fires.
pub fn check_op(op: BinOp, x: i128, y: i128, w: IntWidth, mode: RuleMode) -> OverflowKind {
    match mode {
        RuleMode::Literal => literal_rule(op, x, y, w),
        RuleMode::Corrected => corrected_rule(op, x, y, w),
    }
}

/// Division overflows only for `intmin / -1`. A zero divisor is a runtime
/// error handled by the caller, not an overflow.
pub fn check_div(x: i128, y: i128, w: IntWidth) -> OverflowKind {
    if y == 0 {
        return OverflowKind::None;
    }
    // Exact for operands outside `w` too, which happens when a widened
    // variable feeds a narrower target.
    let q = x / y;
    if q > w.max() {
        OverflowKind::IO
    } else if q < w.min() {
        OverflowKind::IU
    } else {
        OverflowKind::None
    }
}

/// Classifies a value about to be stored into a variable of width `w`.
pub fn check_store(v: i128, w: IntWidth) -> OverflowKind {
    if v > w.max() {
        OverflowKind::IO
    } else if v < w.min() {
        OverflowKind::IU
    } else {
        OverflowKind::None
    }
}
