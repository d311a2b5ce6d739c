//! Batch runs over a corpus of programs with ground truth, and the shared
//! glue between configuration and the analyses.

pub mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

pub use manifest::{
    format_findings, load_manifest, parse_manifest, ConfigEcho, CorpusEntry, EntryKind, ExpectedVerdict,
    HarnessConfig, ManifestError,
};

use crate::io_repair::{repair_io, IoPatch, RepairContext, Strategy};
use crate::lang::{parse, parse_tests, run, BinOp, IntWidth, Program, RuntimeError, Status, StmtId, TestCase};
use crate::overflow::detect::{input_domains, space_size, MAX_EXHAUSTIVE_SPACE};
use crate::overflow::{
    check_op, detect_concrete, detect_exhaustive_in, detect_interval, DetectConfig, DetectError, DetectionMode,
    OverflowFinding, OverflowKind, Ranges, RuleMode,
};
use crate::term_repair::{repair_termination, TermOutcome, TermRepairConfig, TEST_FUEL};
use crate::termination::{prove_termination, replay_lasso, Answer, NtEvidence, ProverConfig, ProverVerdict, PROVER_FUEL};

pub const SCHEMA: &str = "specfix-report/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

impl HarnessConfig {
    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            rule_mode: self.rule_mode,
            fuel: self.fuel.unwrap_or(DetectConfig::default().fuel),
        }
    }

    pub fn prover_config(&self, ranges: &Ranges) -> ProverConfig {
        ProverConfig {
            semantics: self.semantics,
            fuel: self.fuel.unwrap_or(PROVER_FUEL),
            ranges: ranges.clone(),
            seed: self.seed,
            ..ProverConfig::default()
        }
    }

    pub fn term_config(&self, ranges: &Ranges) -> TermRepairConfig {
        TermRepairConfig {
            prover: self.prover_config(ranges),
            test_fuel: self.fuel.unwrap_or(TEST_FUEL),
        }
    }

    pub fn repair_context(&self, ranges: &Ranges, tests: &[TestCase]) -> RepairContext {
        RepairContext {
            ranges: ranges.clone(),
            tests: tests.to_vec(),
            scope: None,
            rule_mode: self.rule_mode,
        }
    }

    pub fn budget_duration(&self) -> Duration {
        Duration::from_secs_f64(self.budget)
    }
}

/// Runs overflow detection in the configured mode. Without a mode,
/// exhaustive detection is used when the input space allows it.
pub fn detect(
    p: &Program,
    ranges: &Ranges,
    tests: &[TestCase],
    cfg: &HarnessConfig,
) -> Result<(DetectionMode, Vec<OverflowFinding>), DetectError> {
    let mode = match cfg.mode {
        Some(m) => m,
        None => {
            let size = space_size(&input_domains(p, ranges)?);
            if size <= MAX_EXHAUSTIVE_SPACE {
                DetectionMode::Exhaustive
            } else {
                DetectionMode::Interval
            }
        }
    };
    let findings = match mode {
        DetectionMode::Concrete => detect_concrete(p, tests, cfg.detect_config()).findings,
        DetectionMode::Exhaustive => detect_exhaustive_in(p, ranges, cfg.detect_config())?,
        DetectionMode::Interval => detect_interval(p, ranges),
    };
    Ok((mode, findings))
}

/// Checks an NT verdict by re-running its witness: a lasso must recur with
/// the same stem and cycle, a divergence must not halt within fuel.
pub fn confirm_nt(p: &Program, v: &ProverVerdict, cfg: &ProverConfig) -> bool {
    let Some(w) = &v.witness else {
        return false;
    };
    match v.evidence {
        Some(NtEvidence::Lasso { stem, cycle }) => replay_lasso(p, v.loop_id, w, cfg) == Some((stem, cycle)),
        Some(NtEvidence::Divergence) => match run(p, w, cfg.fuel, cfg.semantics.mode()) {
            Ok(out) => {
                out.status == Status::FuelExhausted
                    || (out.status == Status::RuntimeError && out.error == Some(RuntimeError::MathRangeExceeded))
            }
            Err(_) => false,
        },
        None => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Pass,
    Mismatch,
    Unchecked,
    Error,
}

impl std::fmt::Display for EntryStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EntryStatus::Pass => "PASS",
            EntryStatus::Mismatch => "MISMATCH",
            EntryStatus::Unchecked => "UNCHECKED",
            EntryStatus::Error => "ERROR",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IoRepairSummary {
    pub finding: String,
    pub patched: bool,
    pub strategy: Option<String>,
    pub candidates: usize,
    pub program: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TermRepairSummary {
    pub outcome: String,
    pub candidates: usize,
    pub prover_calls: usize,
    pub edit: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EntryResult {
    pub path: String,
    pub kind: EntryKind,
    pub status: EntryStatus,
    pub mismatches: Vec<String>,
    pub detection: Option<DetectionMode>,
    pub findings: Vec<String>,
    pub verdicts: Vec<String>,
    pub io_repair: Option<IoRepairSummary>,
    pub term_repair: Option<TermRepairSummary>,
    pub error: Option<String>,
    #[serde(skip)]
    finding_kinds: Vec<OverflowKind>,
    #[serde(skip)]
    answers: Vec<Answer>,
}

impl EntryResult {
    fn new(e: &CorpusEntry) -> EntryResult {
        EntryResult {
            path: e.name.clone(),
            kind: e.kind,
            status: EntryStatus::Pass,
            mismatches: Vec::new(),
            detection: None,
            findings: Vec::new(),
            verdicts: Vec::new(),
            io_repair: None,
            term_repair: None,
            error: None,
            finding_kinds: Vec::new(),
            answers: Vec::new(),
        }
    }

    fn fail(mut self, message: String) -> EntryResult {
        self.status = EntryStatus::Error;
        self.error = Some(message);
        self
    }
}

fn read(path: &std::path::Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

/// Runs one entry end to end and compares it with its ground truth.
pub fn run_entry(e: &CorpusEntry, cfg: &HarnessConfig) -> EntryResult {
    let r = EntryResult::new(e);
    let p = match read(&e.path).and_then(|s| parse(&s).map_err(|err| format!("{}: {err}", e.name))) {
        Ok(p) => p,
        Err(m) => return r.fail(m),
    };
    let tests = match &e.tests {
        Some(t) => match read(t).and_then(|s| parse_tests(&s).map_err(|err| err.to_string())) {
            Ok(t) => t,
            Err(m) => return r.fail(m),
        },
        None => Vec::new(),
    };
    match check_entry(e, &p, &tests, cfg, r.clone()) {
        Ok(mut r) => {
            r.status = if !r.mismatches.is_empty() {
                EntryStatus::Mismatch
            } else if !e.has_ground_truth() {
                EntryStatus::Unchecked
            } else {
                EntryStatus::Pass
            };
            r
        }
        Err(m) => r.fail(m),
    }
}

fn check_entry(
    e: &CorpusEntry,
    p: &Program,
    tests: &[TestCase],
    cfg: &HarnessConfig,
    mut r: EntryResult,
) -> Result<EntryResult, String> {
    let detect_wanted = e.kind != EntryKind::TerminationBug || e.findings.is_some();
    let mut findings = Vec::new();
    if detect_wanted {
        let (mode, f) = detect(p, &e.ranges, tests, cfg).map_err(|err| err.to_string())?;
        r.detection = Some(mode);
        r.findings = f.iter().map(|x| x.to_string()).collect();
        r.finding_kinds = f.iter().map(|x| x.kind).collect();
        findings = f;
    }
    let got: BTreeSet<(OverflowKind, StmtId)> = findings.iter().map(|f| (f.kind, f.stmt)).collect();
    let expected: Option<BTreeSet<(OverflowKind, StmtId)>> = match (&e.findings, e.kind) {
        (Some(x), _) => Some(x.iter().copied().collect()),
        (None, EntryKind::Clean) => Some(BTreeSet::new()),
        _ => None,
    };
    if let Some(x) = expected {
        if x != got {
            let fmt = |s: &BTreeSet<(OverflowKind, StmtId)>| format_findings(&s.iter().copied().collect::<Vec<_>>());
            r.mismatches
                .push(format!("findings: expected [{}], got [{}]", fmt(&x), fmt(&got)));
        }
    }

    let pcfg = cfg.prover_config(&e.ranges);
    let loops = p.loops();
    let mut verdicts: BTreeMap<StmtId, ProverVerdict> = BTreeMap::new();
    for &l in &loops {
        let v = prove_termination(p, l, &pcfg);
        if v.answer == Answer::NT && !confirm_nt(p, &v, &pcfg) {
            r.mismatches.push(format!("loop {l}: NT witness does not replay"));
        }
        r.verdicts.push(v.to_string());
        r.answers.push(v.answer);
        verdicts.insert(l, v);
    }
    match &e.verdicts {
        Some(expected) => {
            for x in expected {
                let Some(l) = x.loop_id.or(loops.first().copied()) else {
                    r.mismatches.push("verdict given for a program without loops".to_string());
                    continue;
                };
                let Some(v) = verdicts.get(&l) else {
                    r.mismatches.push(format!("loop {l}: not a loop"));
                    continue;
                };
                let wrong = matches!(
                    (x.answer, v.answer),
                    (Answer::TR, Answer::NT) | (Answer::NT, Answer::TR)
                ) || (x.answer == Answer::UN && v.answer != Answer::UN);
                if wrong {
                    r.mismatches
                        .push(format!("loop {l}: expected {}, got {}", x.answer, v.answer));
                }
            }
        }
        None if e.kind == EntryKind::Clean => {
            for v in verdicts.values().filter(|v| v.answer == Answer::NT) {
                r.mismatches.push(format!("loop {}: clean entry proven NT", v.loop_id));
            }
        }
        None => {}
    }

    if let Some(want) = &e.repair {
        match e.kind {
            EntryKind::IoBug | EntryKind::Clean => {
                let got = match findings.first() {
                    None => "none".to_string(),
                    Some(f) => {
                        let ctx = cfg.repair_context(&e.ranges, tests);
                        let out = repair_io(p, f, &Strategy::DEFAULT_ORDER, &ctx);
                        let program = out.patch.as_ref().map(|x| crate::lang::pretty_print(&x.apply(p)));
                        r.io_repair = Some(IoRepairSummary {
                            finding: f.to_string(),
                            patched: out.succeeded(),
                            strategy: out.patch.as_ref().map(|x: &IoPatch| x.strategy().to_string()),
                            candidates: out.report.candidates.len(),
                            program,
                        });
                        if out.succeeded() { "patch" } else { "none" }.to_string()
                    }
                };
                if &got != want {
                    r.mismatches.push(format!("repair: expected {want}, got {got}"));
                }
            }
            EntryKind::TerminationBug => {
                let rep = repair_termination(p, tests, cfg.budget_duration(), &cfg.term_config(&e.ranges));
                let got = match rep.outcome {
                    TermOutcome::Valid { .. } => "valid".to_string(),
                    TermOutcome::Plausible { .. } => "plausible".to_string(),
                    TermOutcome::Failure { reason } => reason.to_string(),
                };
                r.term_repair = Some(TermRepairSummary {
                    outcome: got.clone(),
                    candidates: rep.candidates.len(),
                    prover_calls: rep.prover_calls,
                    edit: rep.patch.as_ref().map(|x| x.to_string()),
                });
                if &got != want {
                    r.mismatches.push(format!("repair: expected {want}, got {got}"));
                }
            }
        }
    }
    Ok(r)
}

/// Number of operand pairs at width `w` where `check_op` under `mode`
/// disagrees with comparing the exact result against the width's bounds.
pub fn rule_oracle_disagreements(op: BinOp, w: IntWidth, mode: RuleMode) -> u64 {
    let mut n = 0;
    for x in w.min()..=w.max() {
        for y in w.min()..=w.max() {
            let exact = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => continue,
            };
            let oracle = if exact > w.max() {
                OverflowKind::IO
            } else if exact < w.min() {
                OverflowKind::IU
            } else {
                OverflowKind::None
            };
            if check_op(op, x, y, w, mode) != oracle {
                n += 1;
            }
        }
    }
    n
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub entries: usize,
    pub pass: usize,
    pub mismatch: usize,
    pub unchecked: usize,
    pub error: usize,
    pub findings: BTreeMap<String, usize>,
    pub verdicts: BTreeMap<String, usize>,
    pub io_patches: BTreeMap<String, usize>,
    pub term_repairs: BTreeMap<String, usize>,
    /// Disagreements of each rule mode with the exact oracle on i8 pairs.
    pub rule_oracle_disagreements: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportHeader {
    pub schema: String,
    pub version: String,
    pub generated_unix: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportBody {
    pub config: ConfigEcho,
    pub warnings: Vec<String>,
    pub entries: Vec<EntryResult>,
    pub totals: Totals,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub body: ReportBody,
}

impl RunReport {
    /// Whether every ground-truth check passed.
    pub fn all_passed(&self) -> bool {
        self.body.totals.mismatch == 0 && self.body.totals.error == 0
    }

    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn body_text(&self) -> String {
        let b = &self.body;
        let mut s = String::new();
        for w in &b.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for e in &b.entries {
            let _ = write!(s, "{:<9} {} [{}]", e.status, e.path, e.kind);
            if !e.findings.is_empty() {
                let _ = write!(s, " findings={}", e.findings.len());
            }
            if !e.verdicts.is_empty() {
                let answers: Vec<String> = e.answers.iter().map(|a| a.to_string()).collect();
                let _ = write!(s, " verdicts={}", answers.join(","));
            }
            if let Some(io) = &e.io_repair {
                let _ = write!(s, " repair={}", if io.patched { "patch" } else { "none" });
            }
            if let Some(t) = &e.term_repair {
                let _ = write!(s, " repair={}", t.outcome);
            }
            s.push('\n');
            for m in &e.mismatches {
                let _ = writeln!(s, "    mismatch: {m}");
            }
            if let Some(err) = &e.error {
                let _ = writeln!(s, "    error: {err}");
            }
        }
        let t = &b.totals;
        let _ = writeln!(
            s,
            "entries={} pass={} mismatch={} unchecked={} error={}",
            t.entries, t.pass, t.mismatch, t.unchecked, t.error
        );
        s
    }

    pub fn to_text(&self) -> String {
        format!(
            "# {} version={} generated={} elapsed_ms={}\n{}",
            self.header.schema,
            self.header.version,
            self.header.generated_unix,
            self.header.elapsed_ms,
            self.body_text()
        )
    }
}

fn totals(entries: &[EntryResult]) -> Totals {
    let mut t = Totals {
        entries: entries.len(),
        ..Totals::default()
    };
    for e in entries {
        match e.status {
            EntryStatus::Pass => t.pass += 1,
            EntryStatus::Mismatch => t.mismatch += 1,
            EntryStatus::Unchecked => t.unchecked += 1,
            EntryStatus::Error => t.error += 1,
        }
        for k in &e.finding_kinds {
            *t.findings.entry(k.to_string()).or_default() += 1;
        }
        for a in &e.answers {
            *t.verdicts.entry(a.to_string()).or_default() += 1;
        }
        if let Some(io) = &e.io_repair {
            *t.io_patches.entry(if io.patched { "patch" } else { "none" }.to_string()).or_default() += 1;
        }
        if let Some(tr) = &e.term_repair {
            *t.term_repairs.entry(tr.outcome.clone()).or_default() += 1;
        }
    }
    for mode in [RuleMode::Corrected, RuleMode::Literal] {
        let per_op = [BinOp::Add, BinOp::Sub, BinOp::Mul]
            .into_iter()
            .map(|op| (op.symbol().to_string(), rule_oracle_disagreements(op, IntWidth::I8, mode)))
            .collect();
        t.rule_oracle_disagreements.insert(mode.to_string(), per_op);
    }
    t
}

/// Runs every entry, up to `cfg.jobs` at a time. Results keep manifest
/// order, so the report body depends only on the inputs and config.
pub fn run_corpus(entries: &[CorpusEntry], cfg: &HarnessConfig) -> RunReport {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<EntryResult> = pool.install(|| entries.par_iter().map(|e| run_entry(e, cfg)).collect());
    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push("manifest has no entries".to_string());
    }
    let generated_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    RunReport {
        header: ReportHeader {
            schema: SCHEMA.to_string(),
            version: VERSION.to_string(),
            generated_unix,
            elapsed_ms: start.elapsed().as_millis() as u64,
        },
        body: ReportBody {
            config: cfg.echo(),
            warnings,
            totals: totals(&results),
            entries: results,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn corpus(files: &[(&str, &str)], manifest: &str) -> (tempfile::TempDir, Vec<CorpusEntry>) {
        let d = tempfile::tempdir().unwrap();
        for (name, text) in files {
            std::fs::write(d.path().join(name), text).unwrap();
        }
        let m = parse_manifest(manifest, d.path()).unwrap();
        (d, m)
    }

    const ADD: &str = "input i8 a, b; i8 c; c = a + b;";
    const LOOP: &str = "input i8 x; while (x < 10) { x = x - 1; }";

    #[test]
    fn io_entry_passes_and_mislabel_is_reported() {
        let (_d, m) = corpus(
            &[("add.mi", ADD)],
            "add.mi ; io-bug ; findings=IO@1,IU@1 ; repair=patch\nadd.mi ; io-bug ; findings=IO@1\n",
        );
        let rep = run_corpus(&m, &HarnessConfig::default());
        assert_eq!(rep.body.entries[0].status, EntryStatus::Pass, "{:?}", rep.body.entries[0]);
        assert_eq!(rep.body.entries[1].status, EntryStatus::Mismatch);
        assert!(!rep.all_passed());
        assert!(rep.body_text().contains("mismatch: findings: expected [IO@1], got [IO@1,IU@1]"));
    }

    #[test]
    fn termination_entry_is_repaired() {
        let (_d, m) = corpus(
            &[("loop.mi", LOOP), ("loop.tests", "in: x=0 ; out: x=10\nin: x=3 ; out: x=10\n")],
            "loop.mi ; termination-bug ; tests=loop.tests ; verdict=NT ; repair=valid\n",
        );
        let rep = run_corpus(&m, &HarnessConfig::default());
        let e = &rep.body.entries[0];
        assert_eq!(e.status, EntryStatus::Pass, "{e:?}");
        assert_eq!(e.term_repair.as_ref().unwrap().edit.as_deref(), Some("update x = x - 1 -> x = x + 1"));
        assert_eq!(rep.body.totals.term_repairs["valid"], 1);
    }

    #[test]
    fn missing_file_is_an_error_and_empty_manifest_warns() {
        let m = parse_manifest("nope.mi ; clean", Path::new("/nonexistent")).unwrap();
        let rep = run_corpus(&m, &HarnessConfig::default());
        assert_eq!(rep.body.entries[0].status, EntryStatus::Error);
        let rep = run_corpus(&[], &HarnessConfig::default());
        assert!(rep.all_passed());
        assert_eq!(rep.body.warnings, ["manifest has no entries"]);
    }

    #[test]
    fn bodies_are_deterministic_across_job_counts() {
        let (_d, m) = corpus(
            &[("add.mi", ADD), ("loop.mi", LOOP)],
            "add.mi ; io-bug ; findings=IO@1,IU@1\nloop.mi ; termination-bug ; verdict=NT\nadd.mi ; clean\n",
        );
        let one = run_corpus(&m, &HarnessConfig::default());
        let cfg = HarnessConfig {
            jobs: 3,
            ..HarnessConfig::default()
        };
        let three = run_corpus(&m, &cfg);
        assert_eq!(one.body_json(), three.body_json());
        assert_eq!(one.body.entries[2].status, EntryStatus::Mismatch);
    }

    #[test]
    fn rule_modes_against_oracle() {
        assert_eq!(rule_oracle_disagreements(BinOp::Add, IntWidth::I8, RuleMode::Corrected), 0);
        assert_eq!(rule_oracle_disagreements(BinOp::Add, IntWidth::I8, RuleMode::Literal), 0);
        assert!(rule_oracle_disagreements(BinOp::Mul, IntWidth::I8, RuleMode::Literal) > 0);
    }
}
