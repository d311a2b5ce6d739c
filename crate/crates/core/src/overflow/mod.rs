//! Integer overflow detection.

pub mod detect;
pub mod interval;
pub mod rules;
pub mod split;

pub use detect::{
    detect_concrete, detect_exhaustive, detect_exhaustive_in, detect_interval, ConcreteDetection, DetectConfig,
    DetectError, DetectionMode, OverflowFinding,
};
pub use interval::{format_ranges, parse_ranges, Interval, Ranges};
pub use rules::{check_div, check_op, check_store, OverflowKind, RuleMode};
pub use split::{split, split_stmt, Operand, Split, SubExpr};
