//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use specfix_core::equiv::{equivalent, grid_check, syntactic_degrees, Equivalence, GridVerdict};
use specfix_core::harness::{confirm_nt, load_manifest, run_corpus, CorpusEntry, EntryKind, HarnessConfig};
use specfix_core::io_repair::{repair_io, rewrite_mutants, Strategy};
use specfix_core::lang::{
    eval_math, parse, parse_tests, BinOp, ExecMode, Expr, IntWidth, Interpreter, Program, Status, StmtId, StmtKind,
    TestCase, Valuation,
};
use specfix_core::overflow::detect::{input_domains, space_size, valuation_at};
use specfix_core::overflow::{check_op, detect_exhaustive_in, DetectConfig, OverflowKind, Ranges, RuleMode};
use specfix_core::term_repair::{build_patch_space, repair_termination_with, RuleId, TermFailure, TermOutcome, Validity};
use specfix_core::termination::{
    prove_termination, slice, update_shape, Answer, LadderProver, NtEvidence, Prover, ProverVerdict,
};

const SLICE_FUEL: u64 = 100_000;
const MAX_ENUMERABLE: u128 = 1 << 16;

fn corpus() -> Vec<CorpusEntry> {
    load_manifest(&Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/manifest.txt")).expect("bundled manifest")
}

fn load(e: &CorpusEntry) -> Program {
    parse(&std::fs::read_to_string(&e.path).expect("corpus file")).expect("corpus program parses")
}

fn load_tests(e: &CorpusEntry) -> Vec<TestCase> {
    e.tests
        .as_ref()
        .map(|t| parse_tests(&std::fs::read_to_string(t).expect("tests file")).expect("tests parse"))
        .unwrap_or_default()
}

/// Every input valuation in the declared ranges, or `None` past `limit`.
fn enumerate_inputs(p: &Program, ranges: &Ranges, limit: u128) -> Option<Vec<Valuation>> {
    let domains = input_domains(p, ranges).ok()?;
    let n = space_size(&domains);
    (n <= limit).then(|| (0..n).map(|i| valuation_at(&domains, i)).collect())
}

/// Mathematical comparison oracle for one operation.
fn oracle(op: BinOp, x: i128, y: i128, w: IntWidth) -> OverflowKind {
    let r = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => unreachable!(),
    };
    if r > w.max() {
        OverflowKind::IO
    } else if r < w.min() {
        OverflowKind::IU
    } else {
        OverflowKind::None
    }
}

fn criterion_1() -> String {
    let start = Instant::now();
    let w = IntWidth::I8;
    let mut faithful = BTreeMap::new();
    for op in [BinOp::Add, BinOp::Sub, BinOp::Mul] {
        let mut corrected_bad = 0u64;
        let mut literal_bad = 0u64;
        let mut literal_bad_iu = 0u64;
        let mut literal_bad_nonneg = 0u64;
        for x in w.min()..=w.max() {
            for y in w.min()..=w.max() {
                let truth = oracle(op, x, y, w);
                if check_op(op, x, y, w, RuleMode::Corrected) != truth {
                    corrected_bad += 1;
                }
                if check_op(op, x, y, w, RuleMode::Literal) != truth {
                    literal_bad += 1;
                    if truth == OverflowKind::IU {
                        literal_bad_iu += 1;
                    }
                    if x >= 0 && y >= 0 {
                        literal_bad_nonneg += 1;
                    }
                }
            }
        }
        assert_eq!(corrected_bad, 0, "corrected {op} disagrees with the oracle");
        match op {
            BinOp::Add => assert_eq!(literal_bad, 0, "literal-mode + should agree"),
            BinOp::Sub => assert!(literal_bad_iu > 0, "literal-mode - should miss underflows"),
            BinOp::Mul => {
                assert!(literal_bad > 0, "literal-mode * should disagree");
                assert_eq!(literal_bad_nonneg, 0, "literal-mode * disagreements need a negative operand");
            }
            BinOp::Div => unreachable!(),
        }
        faithful.insert(op.symbol(), literal_bad);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    let counts: Vec<String> = faithful.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    format!("corrected=0 mismatches, literal-mode disagreements {} ({elapsed:.2?})", counts.join(" "))
}

fn criterion_2() -> String {
    let p = parse("input i8 a, b; i8 c; c = a + b;").unwrap();
    let findings = detect_exhaustive_in(&p, &Ranges::new(), DetectConfig::default()).unwrap();
    let count = |k: OverflowKind| {
        findings
            .iter()
            .filter(|f| f.kind == k)
            .map(|f| f.witness_count.expect("exhaustive counts"))
            .sum::<u64>()
    };
    let (io, iu) = (count(OverflowKind::IO), count(OverflowKind::IU));
    // closed form: sum of 1..=127 pairs above intmax, 1..=128 below intmin
    let closed_io: u64 = (1..=127).sum();
    let closed_iu: u64 = (1..=128).sum();
    let brute = |pred: &dyn Fn(i128) -> bool| {
        (-128i128..=127)
            .flat_map(|a| (-128i128..=127).map(move |b| a + b))
            .filter(|s| pred(*s))
            .count() as u64
    };
    assert_eq!((closed_io, closed_iu), (8128, 8256));
    assert_eq!(brute(&|s| s > 127), 8128);
    assert_eq!(brute(&|s| s < -128), 8256);
    assert_eq!((io, iu), (8128, 8256));
    format!("IO={io} IU={iu}")
}

/// Checked run of `q` never traps on `inputs` and its final store matches
/// the mathematical run of `p`.
fn meets_contract(p: &Program, q: &Program, inputs: &[Valuation]) -> bool {
    let (ip, iq) = (Interpreter::new(p), Interpreter::new(q));
    inputs.iter().all(|v| {
        let (Ok(a), Ok(b)) = (ip.run(v, SLICE_FUEL, ExecMode::Mathematical), iq.run(v, SLICE_FUEL, ExecMode::checked())) else {
            return false;
        };
        a.halted() && b.halted() && a.store == b.store
    })
}

/// Every width assignment to the declared variables that only widens,
/// fewest widened variables first.
fn widenings(p: &Program) -> Vec<Program> {
    let names: Vec<(String, IntWidth)> = p.decls.iter().map(|d| (d.name.clone(), d.width)).collect();
    let mut all: Vec<Vec<IntWidth>> = vec![Vec::new()];
    for (_, w) in &names {
        let choices: Vec<IntWidth> = IntWidth::ALL.into_iter().filter(|c| c >= w).collect();
        all = all
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(*c);
                    v
                })
            })
            .collect();
    }
    let changed = |ws: &Vec<IntWidth>| ws.iter().zip(&names).filter(|(a, (_, b))| *a != b).count();
    all.retain(|ws| changed(ws) > 0);
    all.sort_by_key(|ws| changed(ws));
    all.into_iter()
        .map(|ws| {
            let mut q = p.clone();
            for (w, (n, _)) in ws.into_iter().zip(&names) {
                q.set_width(n, w);
            }
            q
        })
        .collect()
}

fn criterion_3() -> String {
    let start = Instant::now();
    let cfg = HarnessConfig::default();
    let mut checked = 0;
    let mut patched = 0;
    for e in corpus().iter().filter(|e| e.kind == EntryKind::IoBug) {
        let p = load(e);
        if p.decls.iter().any(|d| d.width != IntWidth::I8) {
            continue;
        }
        let inputs = enumerate_inputs(&p, &e.ranges, MAX_ENUMERABLE).expect("i8 entries are enumerable");
        let findings = detect_exhaustive_in(&p, &e.ranges, DetectConfig::default()).unwrap();
        let f = findings.first().unwrap_or_else(|| panic!("{}: no finding", e.name));
        let StmtKind::Assign { value, .. } = &p.find(f.stmt).unwrap().kind else {
            panic!("{}: finding outside an assignment", e.name);
        };
        let exists = rewrite_mutants(value)
            .into_iter()
            .map(|m| p.with_rhs(f.stmt, m).unwrap())
            .chain(widenings(&p))
            .any(|q| meets_contract(&p, &q, &inputs));
        if let Some(label) = &e.repair {
            assert_eq!(label == "patch", exists, "{}: manifest label disagrees with search", e.name);
        }
        let out = repair_io(&p, f, &Strategy::DEFAULT_ORDER, &cfg.repair_context(&e.ranges, &[]));
        assert_eq!(out.succeeded(), exists, "{}: repair {} but a patch exists={exists}", e.name, out.succeeded());
        if let Some(patch) = &out.patch {
            let q = patch.apply(&p);
            assert!(meets_contract(&p, &q, &inputs), "{}: accepted patch fails validation", e.name);
            patched += 1;
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert!(checked >= 10, "only {checked} i8 overflow programs");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!("{checked} programs, {patched} patched, all validated ({elapsed:.2?})")
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    const VARS: [&str; 3] = ["a", "b", "c"];
    if depth == 0 || rng.random_range(0..4) == 0 {
        return if rng.random_bool(0.6) {
            Expr::var(VARS[rng.random_range(0..3)])
        } else {
            Expr::Const(rng.random_range(-3..=3))
        };
    }
    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul][rng.random_range(0..3)];
    Expr::bin(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
}

/// A random equality-preserving rewrite: commute, distribute or regroup.
fn rewrite(rng: &mut ChaCha8Rng, e: &Expr) -> Expr {
    match e {
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (rewrite(rng, lhs), rewrite(rng, rhs));
            match (op, rng.random_range(0..3)) {
                (BinOp::Add | BinOp::Mul, 0) => Expr::bin(*op, r, l),
                (BinOp::Mul, 1) => match &r {
                    Expr::Binary {
                        op: inner @ (BinOp::Add | BinOp::Sub),
                        lhs: x,
                        rhs: y,
                    } => Expr::bin(
                        *inner,
                        Expr::bin(BinOp::Mul, l.clone(), (**x).clone()),
                        Expr::bin(BinOp::Mul, l, (**y).clone()),
                    ),
                    _ => Expr::bin(BinOp::Mul, l, r),
                },
                (BinOp::Sub, 1) => Expr::bin(BinOp::Add, l, Expr::bin(BinOp::Mul, Expr::Const(-1), r)),
                _ => Expr::bin(*op, l, r),
            }
        }
        Expr::Paren(inner) => rewrite(rng, inner),
        other => other.clone(),
    }
}

fn criterion_4() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE01);
    let (mut same, mut diff) = (0, 0);
    for i in 0..1000 {
        let e1 = random_expr(&mut rng, 4);
        let e2 = if i % 2 == 0 { rewrite(&mut rng, &e1) } else { random_expr(&mut rng, 4) };
        let bound = syntactic_degrees(&e1)
            .into_values()
            .chain(syntactic_degrees(&e2).into_values())
            .max()
            .unwrap_or(0)
            .max(1);
        let verdict = equivalent(&e1, &e2).unwrap();
        let grid = grid_check(&e1, &e2, bound).unwrap();
        assert_eq!(verdict.holds(), grid == GridVerdict::Agree, "pair {i}: `{e1}` vs `{e2}`");
        match verdict {
            Equivalence::Equivalent => same += 1,
            Equivalence::Inequivalent { witness } => {
                let mut env = witness.clone();
                for v in e1.vars().union(&e2.vars()) {
                    env.entry(v.clone()).or_insert(0);
                }
                assert_ne!(eval_math(&e1, &env), eval_math(&e2, &env), "pair {i}: witness does not separate");
                diff += 1;
            }
        }
    }
    format!("1000 pairs ({same} equivalent, {diff} inequivalent), 0 disagreements")
}

fn criterion_5() -> String {
    let start = Instant::now();
    let cfg = HarnessConfig::default();
    let (mut loops, mut definite, mut nt) = (0, 0, 0);
    for e in corpus() {
        let Some(expected) = &e.verdicts else { continue };
        let p = load(&e);
        let pcfg = cfg.prover_config(&e.ranges);
        for ev in expected {
            let loop_id = ev.loop_id.unwrap_or_else(|| p.loops()[0]);
            let v = prove_termination(&p, loop_id, &pcfg);
            loops += 1;
            if v.answer == Answer::UN {
                continue;
            }
            definite += 1;
            assert_eq!(v.answer, ev.answer, "{} loop {loop_id}: wrong definite verdict", e.name);
            if v.answer == Answer::NT {
                nt += 1;
                assert!(confirm_nt(&p, &v, &pcfg), "{} loop {loop_id}: witness does not replay", e.name);
                if let Some(NtEvidence::Lasso { .. }) = v.evidence {
                    assert!(v.witness.is_some());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(loops >= 20, "only {loops} loops with known status");
    assert!(definite >= 15, "only {definite} definite verdicts");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    format!("{loops} loops, {definite} definite, 0 wrong, {nt} NT witnesses replayed ({elapsed:.2?})")
}

fn criterion_6() -> String {
    let cfg = HarnessConfig::default();
    let (mut loops, mut candidates) = (0, 0);
    for e in corpus().iter().filter(|e| e.kind == EntryKind::TerminationBug) {
        let p = load(e);
        let tcfg = cfg.term_config(&e.ranges);
        let prover = LadderProver {
            config: tcfg.prover.clone(),
        };
        let rep = repair_termination_with(&p, &load_tests(e), Duration::from_secs(5), &tcfg, &prover);
        let (Some(loop_id), Some(control)) = (rep.loop_id, &rep.control_variables) else {
            continue;
        };
        let affine = !rep.rules.is_empty()
            && rep
                .rules
                .iter()
                .all(|r| matches!(update_shape(&r.update_expr, &r.var), Some((BinOp::Add | BinOp::Sub, _))));
        if control.variables.len() != 1 || !affine {
            continue;
        }
        let Ok(space) = build_patch_space(&p, loop_id, &rep.rules) else {
            continue;
        };
        loops += 1;
        for patch in space.iter().filter(|c| c.rules.iter().any(|r| matches!(r, RuleId::R1 | RuleId::R2))) {
            let v = prove_termination(&patch.program, loop_id, &tcfg.prover);
            assert_eq!(v.answer, Answer::TR, "{}: candidate `{patch}` is {}", e.name, v.answer);
            candidates += 1;
        }
    }
    assert!(loops > 0, "no single-variable affine loops");
    format!("{loops} loops, {candidates} R1/R2 candidates, all TR")
}

/// Wraps a prover; answers UN for every program except `original` when
/// `unknown` is set, and records calls on test-failing programs.
struct Spy<'a> {
    inner: &'a dyn Prover,
    original: Program,
    tests: Vec<TestCase>,
    fuel: u64,
    unknown: bool,
    calls: AtomicUsize,
    failing: Mutex<Vec<String>>,
}

impl Prover for Spy<'_> {
    fn prove(&self, p: &Program, loop_id: StmtId) -> ProverVerdict {
        if *p == self.original {
            return self.inner.prove(p, loop_id);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !all_pass(p, &self.tests, self.fuel) {
            self.failing.lock().unwrap().push(specfix_core::lang::pretty_print(p));
        }
        let mut v = self.inner.prove(p, loop_id);
        if self.unknown {
            v.answer = Answer::UN;
        }
        v
    }
}

fn all_pass(p: &Program, tests: &[TestCase], fuel: u64) -> bool {
    let interp = Interpreter::new(p);
    tests.iter().all(|t| match interp.run(&t.input, fuel, ExecMode::Mathematical) {
        Ok(out) => out.status == Status::Halted && t.expected.iter().all(|(k, v)| out.store.get(k) == Some(v)),
        Err(_) => false,
    })
}

fn criterion_7() -> String {
    let cfg = HarnessConfig::default();
    let mut runs: Vec<(String, Program, Vec<TestCase>, Ranges, bool)> = Vec::new();
    for e in corpus().iter().filter(|e| e.kind == EntryKind::TerminationBug && e.tests.is_some()) {
        runs.push((e.name.clone(), load(e), load_tests(e), e.ranges.clone(), false));
    }
    let extra = [
        ("invalid-first", "input i8 x; while (x < 10) { x = x - 1; }", "in: x=1 ; out: x=11\n"),
        ("no-candidate-passes", "input i8 x; while (x < 10) { x = x - 1; }", "in: x=0 ; out: x=99\n"),
    ];
    for (name, src, tests) in extra {
        let p = parse(src).unwrap();
        let t = parse_tests(tests).unwrap();
        runs.push((name.into(), p.clone(), t.clone(), Ranges::new(), false));
        runs.push((format!("{name}-unknown"), p, t, Ranges::new(), true));
    }
    let (mut records, mut classes) = (0, BTreeMap::new());
    for (name, p, tests, ranges, unknown) in runs {
        let tcfg = cfg.term_config(&ranges);
        let inner = LadderProver {
            config: tcfg.prover.clone(),
        };
        let spy = Spy {
            inner: &inner,
            original: p.clone(),
            tests: tests.clone(),
            fuel: tcfg.test_fuel,
            unknown,
            calls: AtomicUsize::new(0),
            failing: Mutex::new(Vec::new()),
        };
        let rep = repair_termination_with(&p, &tests, Duration::from_secs(5), &tcfg, &spy);
        let failing = spy.failing.lock().unwrap();
        assert!(failing.is_empty(), "{name}: prover invoked on test-failing candidates {failing:?}");
        assert_eq!(rep.prover_calls, spy.calls.load(Ordering::SeqCst), "{name}: prover call count");
        let Some(loop_id) = rep.loop_id else { continue };
        let Ok(space) = build_patch_space(&p, loop_id, &rep.rules) else {
            continue;
        };
        for rec in &rep.candidates {
            let patch = &space[rec.index];
            let pass = all_pass(&patch.program, &tests, tcfg.test_fuel);
            let expected = if !pass {
                Validity::Invalid
            } else {
                let mut answer = inner.prove(&patch.program, loop_id).answer;
                if unknown {
                    answer = Answer::UN;
                }
                match answer {
                    Answer::TR => Validity::Valid,
                    Answer::UN => Validity::Plausible,
                    Answer::NT => Validity::Invalid,
                }
            };
            assert_eq!(rec.verdict.classification, expected, "{name}: candidate {}", rec.edit);
            assert_eq!(rec.verdict.prover.is_some(), pass, "{name}: prover consulted iff tests pass");
            *classes.entry(expected.to_string()).or_insert(0) += 1;
            records += 1;
        }
        let calls = rep.candidates.iter().filter(|r| r.verdict.prover.is_some()).count();
        assert_eq!(rep.prover_calls, calls, "{name}: calls vs consulted candidates");
    }
    assert!(records > 0);
    let summary: Vec<String> = classes.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{records} classifications recomputed ({}), 0 mismatches", summary.join(" "))
}

fn criterion_8() -> String {
    let cfg = HarnessConfig::default();
    let (mut valid, mut fallback) = (0, 0);
    for e in corpus().iter().filter(|e| e.kind == EntryKind::TerminationBug) {
        let Some(label) = e.repair.as_deref() else { continue };
        let p = load(e);
        let tests = load_tests(e);
        let tcfg = cfg.term_config(&e.ranges);
        let prover = LadderProver {
            config: tcfg.prover.clone(),
        };
        let start = Instant::now();
        let rep = repair_termination_with(&p, &tests, Duration::from_secs(5), &tcfg, &prover);
        match label {
            "valid" => {
                assert!(matches!(rep.outcome, TermOutcome::Valid { .. }), "{}: {:?}", e.name, rep.outcome);
                assert!(start.elapsed() < Duration::from_secs(5), "{}: over budget", e.name);
                let fixed = &rep.patch.as_ref().expect("valid carries a patch").program;
                assert!(all_pass(fixed, &tests, tcfg.test_fuel), "{}: patch fails tests", e.name);
                valid += 1;
            }
            "fallback-unsupported" => {
                assert_eq!(rep.failure_reason(), Some(TermFailure::FallbackUnsupported), "{}", e.name);
                assert!(rep.patch.is_none(), "{}: fallback entries carry no patch", e.name);
                fallback += 1;
            }
            other => panic!("{}: unexpected repair label {other}", e.name),
        }
    }
    assert!(valid > 0 && fallback > 0);
    format!("{valid} monotone loops repaired valid, {fallback} non-monotonic report fallback-unsupported")
}

fn criterion_9() -> String {
    let start = Instant::now();
    let (mut loops, mut runs) = (0, 0u64);
    for e in corpus() {
        let p = load(&e);
        let Some(inputs) = enumerate_inputs(&p, &e.ranges, MAX_ENUMERABLE) else {
            continue;
        };
        for loop_id in p.loops() {
            let p_min = slice(&p, loop_id).expect("loop");
            let (full, min) = (Interpreter::new(&p), Interpreter::new(&p_min));
            let diverging = inputs.par_iter().find_any(|v| {
                let a = full.run(v, SLICE_FUEL, ExecMode::Mathematical).expect("input");
                let b = min.run(v, SLICE_FUEL, ExecMode::Mathematical).expect("input");
                a.halted() != b.halted()
            });
            assert!(diverging.is_none(), "{} loop {loop_id}: input {:?}", e.name, diverging);
            runs += inputs.len() as u64;
            loops += 1;
        }
    }
    let elapsed = start.elapsed();
    format!("{loops} loops, {runs} input pairs, 0 divergences ({elapsed:.2?})")
}

fn criterion_10() -> String {
    let start = Instant::now();
    let entries = corpus();
    let cfg = HarnessConfig::default();
    let a = run_corpus(&entries, &cfg);
    let b = run_corpus(&entries, &cfg);
    assert_eq!(a.body_json(), b.body_json(), "JSON bodies differ");
    assert_eq!(a.body_text(), b.body_text(), "text bodies differ");
    let elapsed = start.elapsed();
    format!("{} entries, report bodies byte-identical ({elapsed:.2?})", a.body.entries.len())
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 10] = [
        ("overflow rules match the oracle", criterion_1),
        ("exhaustive a+b counts", criterion_2),
        ("overflow repair end to end", criterion_3),
        ("equivalence oracle agreement", criterion_4),
        ("prover ground truth", criterion_5),
        ("conditional mutation soundness", criterion_6),
        ("validity faithfulness", criterion_7),
        ("termination repair end to end", criterion_8),
        ("slice preservation", criterion_9),
        ("report determinism", criterion_10),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} FAIL {name}: {msg}", i + 1);
                failed += 1;
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
