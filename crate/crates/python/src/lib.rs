//! Python bindings. Every function takes program source text and returns
//! plain Python data (dicts, lists, strings) built from the JSON reports.

use std::path::Path;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use specfix_core::equiv::{equivalent, Equivalence};
use specfix_core::harness::{self, load_manifest, run_corpus, HarnessConfig};
use specfix_core::io_repair::{repair_io, Strategy};
use specfix_core::lang::{parse, parse_expr, parse_tests, pretty_print, Program, StmtId, TestCase};
use specfix_core::overflow::{parse_ranges, Ranges};
use specfix_core::term_repair::repair_termination;
use specfix_core::termination::{has_termination_bug, prove_termination, LadderProver, TerminationBug};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn program(source: &str) -> PyResult<Program> {
    parse(source).map_err(value_error)
}

fn ranges(spec: Option<&str>) -> PyResult<Ranges> {
    spec.map_or(Ok(Ranges::new()), |s| parse_ranges(s).map_err(value_error))
}

fn tests(text: Option<&str>) -> PyResult<Vec<TestCase>> {
    text.map_or(Ok(Vec::new()), |t| parse_tests(t).map_err(value_error))
}

fn config(options: &[(&str, Option<&str>)]) -> PyResult<HarnessConfig> {
    let mut cfg = HarnessConfig::default();
    for (k, v) in options {
        if let Some(v) = v {
            cfg.set(k, v).map_err(value_error)?;
        }
    }
    Ok(cfg)
}

/// Overflow findings as a list of dicts.
#[pyfunction]
#[pyo3(signature = (source, ranges=None, tests=None, mode=None, rule_mode=None))]
fn detect<'py>(
    py: Python<'py>,
    source: &str,
    ranges: Option<&str>,
    tests: Option<&str>,
    mode: Option<&str>,
    rule_mode: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = program(source)?;
    let cfg = config(&[("mode", mode), ("rule-mode", rule_mode)])?;
    let (mode, findings) = harness::detect(&p, &self::ranges(ranges)?, &self::tests(tests)?, &cfg).map_err(value_error)?;
    to_py(py, &serde_json::json!({ "mode": mode, "findings": findings }))
}

/// One verdict dict per loop, or for `loop_id` only.
#[pyfunction]
#[pyo3(signature = (source, loop_id=None, ranges=None, semantics=None, seed=None))]
fn prove<'py>(
    py: Python<'py>,
    source: &str,
    loop_id: Option<StmtId>,
    ranges: Option<&str>,
    semantics: Option<&str>,
    seed: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = program(source)?;
    let cfg = config(&[("semantics", semantics), ("seed", seed)])?;
    let loops = match loop_id {
        Some(l) if p.loops().contains(&l) => vec![l],
        Some(l) => return Err(value_error(format!("statement {l} is not a loop"))),
        None => p.loops(),
    };
    let pcfg = cfg.prover_config(&self::ranges(ranges)?);
    let verdicts: Vec<_> = loops.iter().map(|&l| prove_termination(&p, l, &pcfg)).collect();
    to_py(py, &verdicts)
}

/// Repairs a non-terminating loop if one is proven, else the first overflow.
/// The result carries `fixed`, the patched source, or `None`.
#[pyfunction]
#[pyo3(signature = (source, tests=None, ranges=None, budget=None))]
fn repair<'py>(
    py: Python<'py>,
    source: &str,
    tests: Option<&str>,
    ranges: Option<&str>,
    budget: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = program(source)?;
    let tests = self::tests(tests)?;
    let ranges = self::ranges(ranges)?;
    let cfg = config(&[("budget", budget)])?;
    let prover = LadderProver {
        config: cfg.prover_config(&ranges),
    };
    if let TerminationBug::Yes { .. } = has_termination_bug(&p, &prover) {
        let rep = repair_termination(&p, &tests, cfg.budget_duration(), &cfg.term_config(&ranges));
        let fixed = rep.patch.as_ref().map(|patch| pretty_print(&patch.program));
        return to_py(py, &serde_json::json!({ "kind": "termination", "report": rep, "fixed": fixed }));
    }
    let (_, findings) = harness::detect(&p, &ranges, &tests, &cfg).map_err(value_error)?;
    let Some(f) = findings.first() else {
        return to_py(py, &serde_json::json!({ "kind": "none", "fixed": null }));
    };
    let out = repair_io(&p, f, &[Strategy::Rewrite, Strategy::Widen], &cfg.repair_context(&ranges, &tests));
    let fixed = out.patch.as_ref().map(|patch| pretty_print(&patch.apply(&p)));
    to_py(py, &serde_json::json!({ "kind": "overflow", "report": out.report, "fixed": fixed }))
}

/// Polynomial equivalence of two expressions; a witness valuation when they differ.
#[pyfunction]
fn check_equiv<'py>(py: Python<'py>, lhs: &str, rhs: &str) -> PyResult<Bound<'py, PyAny>> {
    let a = parse_expr(lhs).map_err(value_error)?;
    let b = parse_expr(rhs).map_err(value_error)?;
    match equivalent(&a, &b).map_err(value_error)? {
        Equivalence::Equivalent => to_py(py, &serde_json::json!({ "equivalent": true })),
        Equivalence::Inequivalent { witness } => {
            to_py(py, &serde_json::json!({ "equivalent": false, "witness": witness }))
        }
    }
}

/// Runs a corpus manifest and returns the full report.
#[pyfunction]
#[pyo3(signature = (manifest, jobs=None))]
fn corpus<'py>(py: Python<'py>, manifest: &str, jobs: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let entries = load_manifest(Path::new(manifest)).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let cfg = config(&[("jobs", jobs)])?;
    let report = py.detach(|| run_corpus(&entries, &cfg));
    to_py(py, &report)
}

#[pymodule]
fn specfix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(prove, m)?)?;
    m.add_function(wrap_pyfunction!(repair, m)?)?;
    m.add_function(wrap_pyfunction!(check_equiv, m)?)?;
    m.add_function(wrap_pyfunction!(corpus, m)?)?;
    Ok(())
}
