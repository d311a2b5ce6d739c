//! `specfix`: detect, repair and prove programs in the μImp language.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use specfix_core::equiv::{equivalent, grid_check, Equivalence, GridVerdict};
use specfix_core::harness::{self, load_manifest, run_corpus, HarnessConfig};
use specfix_core::io_repair::{patch_record, repair_io, unified_diff, Strategy};
use specfix_core::lang::testcase::format_valuation;
use specfix_core::lang::{parse, parse_expr, parse_tests, pretty_print, Program, StmtId, TestCase};
use specfix_core::overflow::{parse_ranges, Ranges};
use specfix_core::term_repair::{repair_termination, TermOutcome};
use specfix_core::termination::{has_termination_bug, prove_termination, Answer, LadderProver, TerminationBug};

/// Exit codes shared by all commands.
mod code {
    pub const OK: u8 = 0;
    /// Findings, an NT verdict, inequivalence, or corpus mismatches.
    pub const FOUND: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const PLAUSIBLE: u8 = 3;
    pub const NO_PATCH: u8 = 4;
    pub const UNKNOWN: u8 = 5;
}

#[derive(Parser, Debug)]
#[command(name = "specfix", version, about = "Overflow and termination bug detection and repair for μImp programs")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Config file of `key=value` lines; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Detection mode: concrete, interval, exhaustive or auto.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Overflow rule set: literal or corrected.
    #[arg(long = "rule-mode", global = true)]
    rule_mode: Option<String>,
    /// Loop semantics: wrapped or mathematical.
    #[arg(long, global = true)]
    semantics: Option<String>,
    /// Repair budget in seconds.
    #[arg(long, global = true)]
    budget: Option<String>,
    /// Step budget per run.
    #[arg(long, global = true)]
    fuel: Option<String>,
    /// Corpus entries processed concurrently.
    #[arg(long, global = true)]
    jobs: Option<String>,
    /// Sampling seed (also `SPECFIX_SEED`).
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Write the JSON report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report integer overflow sites.
    Detect {
        /// Program source file.
        program: PathBuf,
        /// Test file of `in: ... ; out: ...` lines.
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Input ranges, e.g. `a=0..100,b=-5..5`.
        #[arg(long)]
        ranges: Option<String>,
    },
    /// Repair an overflow or non-termination bug; writes `<name>.fixed.mi`.
    Repair {
        /// Program source file.
        program: PathBuf,
        /// Test file of `in: ... ; out: ...` lines.
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Input ranges, e.g. `a=0..100,b=-5..5`.
        #[arg(long)]
        ranges: Option<String>,
        /// Overflow repair strategies in order, e.g. `widen,rewrite`.
        #[arg(long, default_value = "rewrite,widen")]
        strategies: String,
        /// Bug kind to repair: auto, overflow or termination. Auto repairs a
        /// non-terminating loop if one is proven, else the first overflow.
        #[arg(long, default_value = "auto")]
        kind: String,
    },
    /// Decide termination of each loop.
    Prove {
        /// Program source file.
        program: PathBuf,
        /// Only this loop statement.
        #[arg(long = "loop")]
        loop_id: Option<StmtId>,
        /// Input ranges, e.g. `a=0..100,b=-5..5`.
        #[arg(long)]
        ranges: Option<String>,
    },
    /// Decide whether two expressions are equal polynomials.
    CheckEquiv {
        /// Left expression.
        lhs: String,
        /// Right expression.
        rhs: String,
        /// Also cross-check on the grid {0..=bound}^n.
        #[arg(long)]
        grid: Option<u32>,
    },
    /// Run a corpus manifest against its ground truth.
    Corpus {
        /// Manifest file; entry paths are relative to it.
        manifest: PathBuf,
    },
}

fn config(g: &GlobalArgs) -> Result<HarnessConfig> {
    let mut cfg = HarnessConfig::default();
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        cfg.apply_file_text(&text).map_err(|e| anyhow!(e))?;
    }
    cfg.apply_env().map_err(|e| anyhow!("SPECFIX_SEED: {e}"))?;
    let flags = [
        ("mode", &g.mode),
        ("rule-mode", &g.rule_mode),
        ("semantics", &g.semantics),
        ("budget", &g.budget),
        ("fuel", &g.fuel),
        ("jobs", &g.jobs),
        ("seed", &g.seed),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v).map_err(|e| anyhow!("--{k}: {e}"))?;
        }
    }
    Ok(cfg)
}

fn load_program(path: &Path) -> Result<Program> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_tests(path: Option<&Path>) -> Result<Vec<TestCase>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_tests(&text).map_err(|e| anyhow!("{}: {e}", p.display()))
        }
    }
}

fn load_ranges(spec: Option<&str>) -> Result<Ranges> {
    spec.map_or(Ok(Ranges::new()), |s| parse_ranges(s).map_err(|e| anyhow!("--ranges: {e}")))
}

fn write_report(g: &GlobalArgs, json: &serde_json::Value) -> Result<()> {
    if let Some(path) = &g.report {
        let text = serde_json::to_string_pretty(json)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn emit(g: &GlobalArgs, text: &str, json: &serde_json::Value) -> Result<()> {
    if g.json {
        println!("{}", serde_json::to_string_pretty(json)?);
    } else {
        print!("{text}");
    }
    write_report(g, json)
}

fn fixed_path(program: &Path) -> PathBuf {
    let stem = program.file_stem().map_or("program".into(), |s| s.to_string_lossy().into_owned());
    program.with_file_name(format!("{stem}.fixed.mi"))
}

fn cmd_detect(g: &GlobalArgs, cfg: &HarnessConfig, program: &Path, tests: Option<&Path>, ranges: Option<&str>) -> Result<u8> {
    let p = load_program(program)?;
    let tests = load_tests(tests)?;
    let ranges = load_ranges(ranges)?;
    let (mode, findings) = harness::detect(&p, &ranges, &tests, cfg).map_err(|e| anyhow!(e))?;
    let mut text = String::new();
    for f in &findings {
        text.push_str(&format!("{f}\n"));
    }
    if findings.is_empty() {
        text.push_str(&format!("no findings (mode={mode})\n"));
    }
    let json = serde_json::json!({ "mode": mode, "findings": findings });
    emit(g, &text, &json)?;
    Ok(if findings.is_empty() { code::OK } else { code::FOUND })
}

fn cmd_repair(
    g: &GlobalArgs,
    cfg: &HarnessConfig,
    program: &Path,
    tests: Option<&Path>,
    ranges: Option<&str>,
    strategies: &str,
    kind: &str,
) -> Result<u8> {
    let p = load_program(program)?;
    let tests = load_tests(tests)?;
    let ranges = load_ranges(ranges)?;
    let order: Vec<Strategy> = strategies
        .split(',')
        .map(|s| s.trim().parse().map_err(|e: String| anyhow!("--strategies: {e}")))
        .collect::<Result<_>>()?;
    let out_path = fixed_path(program);
    let termination = match kind {
        "termination" => true,
        "overflow" => false,
        "auto" => {
            let prover = LadderProver {
                config: cfg.prover_config(&ranges),
            };
            matches!(has_termination_bug(&p, &prover), TerminationBug::Yes { .. })
        }
        other => bail!("--kind: unknown bug kind `{other}`"),
    };
    let findings = if termination {
        Vec::new()
    } else {
        harness::detect(&p, &ranges, &tests, cfg).map_err(|e| anyhow!(e))?.1
    };
    if let Some(f) = findings.first() {
        let ctx = cfg.repair_context(&ranges, &tests);
        let out = repair_io(&p, f, &order, &ctx);
        let json = serde_json::json!({ "kind": "overflow", "report": out.report });
        let (text, status) = match (&out.patch, out.evidence) {
            (Some(patch), Some(evidence)) => {
                let fixed = patch.apply(&p);
                std::fs::write(&out_path, pretty_print(&fixed))
                    .with_context(|| format!("cannot write {}", out_path.display()))?;
                let rec = patch_record(f, patch, evidence);
                let name = program.file_name().map_or("program".into(), |s| s.to_string_lossy().into_owned());
                let text = format!(
                    "repaired {f}\nstrategy={} evidence={} before={} after={}\n{}wrote {}\n",
                    rec.strategy,
                    rec.evidence,
                    rec.before,
                    rec.after,
                    unified_diff(&p, &fixed, &name),
                    out_path.display()
                );
                (text, code::OK)
            }
            _ => (
                format!(
                    "no patch for {f}: {}\n",
                    out.report.failure.as_deref().unwrap_or("no-valid-patch-found")
                ),
                code::NO_PATCH,
            ),
        };
        emit(g, &text, &json)?;
        return Ok(status);
    }
    if kind == "overflow" {
        emit(g, "no overflow findings\n", &serde_json::json!({ "kind": "overflow", "findings": [] }))?;
        return Ok(code::NO_PATCH);
    }
    let rep = repair_termination(&p, &tests, cfg.budget_duration(), &cfg.term_config(&ranges));
    let json = serde_json::json!({ "kind": "termination", "report": rep });
    let (text, status) = match (&rep.outcome, &rep.patch) {
        (TermOutcome::Valid { .. } | TermOutcome::Plausible { .. }, Some(patch)) => {
            std::fs::write(&out_path, pretty_print(&patch.program))
                .with_context(|| format!("cannot write {}", out_path.display()))?;
            let (label, status) = match rep.outcome {
                TermOutcome::Valid { .. } => ("valid", code::OK),
                _ => ("plausible", code::PLAUSIBLE),
            };
            (
                format!(
                    "{label} patch: {patch}\ncandidates tried={} prover calls={}\nwrote {}\n",
                    rep.candidates.len(),
                    rep.prover_calls,
                    out_path.display()
                ),
                status,
            )
        }
        (TermOutcome::Failure { reason }, _) => (format!("no patch: {reason}\n"), code::NO_PATCH),
        _ => unreachable!("accepted outcomes carry a patch"),
    };
    emit(g, &text, &json)?;
    Ok(status)
}

fn cmd_prove(g: &GlobalArgs, cfg: &HarnessConfig, program: &Path, loop_id: Option<StmtId>, ranges: Option<&str>) -> Result<Option<u8>> {
    let p = load_program(program)?;
    let ranges = load_ranges(ranges)?;
    let loops = match loop_id {
        Some(l) if p.loops().contains(&l) => vec![l],
        Some(l) => bail!("statement {l} is not a loop"),
        None => p.loops(),
    };
    if loops.is_empty() {
        eprintln!("specfix: {} has no loops", program.display());
        return Ok(None);
    }
    let pcfg = cfg.prover_config(&ranges);
    let verdicts: Vec<_> = loops.iter().map(|&l| prove_termination(&p, l, &pcfg)).collect();
    let text: String = verdicts.iter().map(|v| format!("{v}\n")).collect();
    emit(g, &text, &serde_json::json!({ "verdicts": verdicts }))?;
    let status = if verdicts.iter().any(|v| v.answer == Answer::NT) {
        code::FOUND
    } else if verdicts.iter().all(|v| v.answer == Answer::TR) {
        code::OK
    } else {
        code::UNKNOWN
    };
    Ok(Some(status))
}

fn cmd_check_equiv(g: &GlobalArgs, lhs: &str, rhs: &str, grid: Option<u32>) -> Result<u8> {
    let e1 = parse_expr(lhs).map_err(|e| anyhow!("left expression: {e}"))?;
    let e2 = parse_expr(rhs).map_err(|e| anyhow!("right expression: {e}"))?;
    let verdict = equivalent(&e1, &e2).map_err(|e| anyhow!(e))?;
    let mut text = match &verdict {
        Equivalence::Equivalent => "equivalent\n".to_string(),
        Equivalence::Inequivalent { witness } => format!("inequivalent witness={}\n", format_valuation(witness)),
    };
    let mut json = serde_json::json!({ "equivalent": verdict.holds() });
    if let Equivalence::Inequivalent { witness } = &verdict {
        json["witness"] = serde_json::json!(witness);
    }
    if let Some(bound) = grid {
        let g = grid_check(&e1, &e2, bound).map_err(|e| anyhow!(e))?;
        let agree = matches!(g, GridVerdict::Agree);
        text.push_str(&format!("grid(0..={bound}) {}\n", if agree { "agree" } else { "disagree" }));
        json["grid_agree"] = serde_json::json!(agree);
    }
    emit(g, &text, &json)?;
    Ok(if verdict.holds() { code::OK } else { code::FOUND })
}

fn cmd_corpus(g: &GlobalArgs, cfg: &HarnessConfig, manifest: &Path) -> Result<u8> {
    let entries = load_manifest(manifest).map_err(|e| anyhow!(e))?;
    let report = run_corpus(&entries, cfg);
    if g.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    for w in &report.body.warnings {
        eprintln!("specfix: warning: {w}");
    }
    if let Some(path) = &g.report {
        std::fs::write(path, report.to_json() + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(if report.all_passed() { code::OK } else { code::FOUND })
}

fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    let cfg = config(g)?;
    match &cli.command {
        Command::Detect { program, tests, ranges } => cmd_detect(g, &cfg, program, tests.as_deref(), ranges.as_deref()),
        Command::Repair {
            program,
            tests,
            ranges,
            strategies,
            kind,
        } => cmd_repair(g, &cfg, program, tests.as_deref(), ranges.as_deref(), strategies, kind),
        Command::Prove {
            program,
            loop_id,
            ranges,
        } => Ok(cmd_prove(g, &cfg, program, *loop_id, ranges.as_deref())?.unwrap_or(code::USAGE)),
        Command::CheckEquiv { lhs, rhs, grid } => cmd_check_equiv(g, lhs, rhs, *grid),
        Command::Corpus { manifest } => cmd_corpus(g, &cfg, manifest),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { code::OK });
        }
    };
    match run(&cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("specfix: {e:#}");
            ExitCode::from(code::USAGE)
        }
    }
}
