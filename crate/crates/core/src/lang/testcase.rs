//! Test-case files: one test per line, `in: x=3,y=5 ; out: z=8`.
//!
//! The `out` part is a projection of the halting store; an empty projection
//! only requires the run to halt.

use std::fmt;

use thiserror::Error;

use super::interp::{ExecMode, Interpreter, RunOutcome, Status, Valuation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub input: Valuation,
    pub expected: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("test file line {line}: {message}")]
pub struct TestFileError {
    pub line: usize,
    pub message: String,
}

/// Parses a comma-separated `k=v` list. Empty text yields an empty map.
pub fn parse_valuation(text: &str) -> Result<Valuation, String> {
    let mut out = Valuation::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `name=value`, found `{part}`"))?;
        let v: i128 = v.trim().parse().map_err(|_| format!("bad integer `{}`", v.trim()))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            return Err(format!("`{}` given twice", k.trim()));
        }
    }
    Ok(out)
}

pub fn format_valuation(v: &Valuation) -> String {
    v.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

pub fn parse_tests(text: &str) -> Result<Vec<TestCase>, TestFileError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("").split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TestFileError { line: i + 1, message };
        let (lhs, rhs) = line.split_once(';').ok_or_else(|| err("missing `;` between `in:` and `out:`".into()))?;
        let input = lhs
            .trim()
            .strip_prefix("in:")
            .ok_or_else(|| err("expected `in:`".into()))?;
        let output = rhs
            .trim()
            .strip_prefix("out:")
            .ok_or_else(|| err("expected `out:`".into()))?;
        out.push(TestCase {
            input: parse_valuation(input).map_err(err)?,
            expected: parse_valuation(output).map_err(err)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TestVerdict {
    Pass,
    /// Halted with a store that differs on the projected variables.
    WrongOutput,
    /// Did not halt within fuel.
    Hang,
    /// Trapped, errored, or the input was rejected.
    Crash,
}

impl fmt::Display for TestVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestVerdict::Pass => "pass",
            TestVerdict::WrongOutput => "wrong-output",
            TestVerdict::Hang => "hang",
            TestVerdict::Crash => "crash",
        })
    }
}

impl TestCase {
    pub fn judge(&self, outcome: &RunOutcome) -> TestVerdict {
        match outcome.status {
            Status::Halted => {
                let ok = self
                    .expected
                    .iter()
                    .all(|(k, v)| outcome.store.get(k) == Some(v));
                if ok {
                    TestVerdict::Pass
                } else {
                    TestVerdict::WrongOutput
                }
            }
            Status::FuelExhausted | Status::Interrupted => TestVerdict::Hang,
            Status::OverflowTrap | Status::RuntimeError => TestVerdict::Crash,
        }
    }

    pub fn run(&self, interp: &Interpreter, fuel: u64, mode: ExecMode) -> TestVerdict {
        match interp.run(&self.input, fuel, mode) {
            Ok(out) => self.judge(&out),
            Err(_) => TestVerdict::Crash,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "in: {} ; out: {}",
            format_valuation(&self.input),
            format_valuation(&self.expected)
        )
    }
}
