//! Corpus manifests and run configuration.
//!
//! A manifest has one entry per line:
//!
//! ```text
//! path ; kind ; tests=<path> ; ranges=<spec> ; findings=IO@1,IU@1 ; verdict=NT ; repair=valid
//! ```
//!
//! Blank lines and `#` comments are skipped. Paths are relative to the
//! manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{Semantics, StmtId};
use crate::overflow::{format_ranges, parse_ranges, DetectionMode, OverflowKind, Ranges, RuleMode};
use crate::termination::{Answer, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    IoBug,
    TerminationBug,
    Clean,
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryKind::IoBug => "io-bug",
            EntryKind::TerminationBug => "termination-bug",
            EntryKind::Clean => "clean",
        })
    }
}

impl FromStr for EntryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "io-bug" => Ok(EntryKind::IoBug),
            "termination-bug" => Ok(EntryKind::TerminationBug),
            "clean" => Ok(EntryKind::Clean),
            other => Err(format!("unknown entry kind `{other}`")),
        }
    }
}

/// Expected prover answer for one loop; `loop_id` of `None` means the
/// program's first loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExpectedVerdict {
    pub loop_id: Option<StmtId>,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    /// Path as written in the manifest.
    pub name: String,
    #[serde(skip)]
    pub path: PathBuf,
    pub kind: EntryKind,
    #[serde(skip)]
    pub tests: Option<PathBuf>,
    #[serde(serialize_with = "ser_ranges")]
    pub ranges: Ranges,
    /// Expected overflow classes as `(kind, statement)`.
    pub findings: Option<Vec<(OverflowKind, StmtId)>>,
    pub verdicts: Option<Vec<ExpectedVerdict>>,
    /// Expected repair outcome: `patch` or `none` for overflow entries, a
    /// classification or failure reason for termination entries.
    pub repair: Option<String>,
    /// 1-based manifest line.
    pub line: usize,
}

fn ser_ranges<S: serde::Serializer>(r: &Ranges, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ranges(r))
}

impl CorpusEntry {
    /// Whether the entry states enough ground truth to be checked.
    pub fn has_ground_truth(&self) -> bool {
        match self.kind {
            EntryKind::IoBug => self.findings.is_some(),
            EntryKind::TerminationBug => self.verdicts.is_some(),
            EntryKind::Clean => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn parse_findings(s: &str) -> Result<Vec<(OverflowKind, StmtId)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, id) = p.split_once('@').ok_or_else(|| format!("expected `KIND@stmt`, found `{p}`"))?;
            let kind = match k {
                "IO" => OverflowKind::IO,
                "IU" => OverflowKind::IU,
                other => return Err(format!("unknown overflow kind `{other}`")),
            };
            let id = id.parse().map_err(|_| format!("bad statement id `{id}`"))?;
            Ok((kind, id))
        })
        .collect()
}

fn parse_answer(s: &str) -> Result<Answer, String> {
    match s {
        "TR" => Ok(Answer::TR),
        "NT" => Ok(Answer::NT),
        "UN" => Ok(Answer::UN),
        other => Err(format!("unknown verdict `{other}`")),
    }
}

fn parse_verdicts(s: &str) -> Result<Vec<ExpectedVerdict>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| match p.split_once(':') {
            Some((id, a)) => Ok(ExpectedVerdict {
                loop_id: Some(id.parse().map_err(|_| format!("bad loop id `{id}`"))?),
                answer: parse_answer(a)?,
            }),
            None => Ok(ExpectedVerdict {
                loop_id: None,
                answer: parse_answer(p)?,
            }),
        })
        .collect()
}

/// Parses manifest text; relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<CorpusEntry>, ManifestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ManifestError::Syntax { line: i + 1, message };
        let mut fields = line.split(';').map(str::trim);
        let path = fields.next().filter(|p| !p.is_empty()).ok_or_else(|| err("missing path".into()))?;
        let kind: EntryKind = fields
            .next()
            .ok_or_else(|| err("missing kind".into()))?
            .parse()
            .map_err(err)?;
        let mut entry = CorpusEntry {
            name: path.to_string(),
            path: base.join(path),
            kind,
            tests: None,
            ranges: Ranges::new(),
            findings: None,
            verdicts: None,
            repair: None,
            line: i + 1,
        };
        for f in fields.filter(|f| !f.is_empty()) {
            let (k, v) = f.split_once('=').ok_or_else(|| err(format!("expected `key=value`, found `{f}`")))?;
            let v = v.trim();
            match k.trim() {
                "tests" => entry.tests = Some(base.join(v)),
                "ranges" => entry.ranges = parse_ranges(v).map_err(err)?,
                "findings" => entry.findings = Some(parse_findings(v).map_err(err)?),
                "verdict" => entry.verdicts = Some(parse_verdicts(v).map_err(err)?),
                "repair" => entry.repair = Some(v.to_string()),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<CorpusEntry>, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Settings shared by all commands. Flags override a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct HarnessConfig {
    /// Overflow detection mode; `None` picks exhaustive when the input
    /// space is small enough and interval otherwise.
    pub mode: Option<DetectionMode>,
    pub rule_mode: RuleMode,
    pub semantics: Semantics,
    /// Per-program repair budget in seconds.
    pub budget: f64,
    /// Step budget for every run; `None` keeps each analysis's default.
    pub fuel: Option<u64>,
    pub jobs: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            mode: None,
            rule_mode: RuleMode::Corrected,
            semantics: Semantics::Mathematical,
            budget: 5.0,
            fuel: None,
            jobs: 1,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub rule_mode: String,
    pub semantics: String,
    pub budget: String,
    pub fuel: Option<u64>,
    pub seed: u64,
}

impl HarnessConfig {
    /// Sets one `key=value` setting, using the flag names without dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |what: &str| format!("bad {what} `{value}`");
        match key {
            "mode" => self.mode = if value == "auto" { None } else { Some(value.parse()?) },
            "rule-mode" => self.rule_mode = value.parse()?,
            "semantics" => self.semantics = value.parse()?,
            "budget" => {
                let b: f64 = value.parse().map_err(|_| bad("budget"))?;
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(bad("budget"));
                }
                self.budget = b;
            }
            "fuel" => self.fuel = Some(value.parse().map_err(|_| bad("fuel"))?),
            "jobs" => {
                self.jobs = value.parse().map_err(|_| bad("job count"))?;
                if self.jobs == 0 {
                    return Err(bad("job count"));
                }
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            other => return Err(format!("unknown setting `{other}`")),
        }
        Ok(())
    }

    /// Applies a config file of `key=value` lines (`#` comments allowed).
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected `key=value`", i + 1))?;
            self.set(k.trim(), v.trim()).map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// Applies `SPECFIX_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), String> {
        match std::env::var("SPECFIX_SEED") {
            Ok(v) => self.set("seed", v.trim()),
            Err(_) => Ok(()),
        }
    }

    /// The settings that affect results; the job count is left out since
    /// it never changes them.
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            mode: self.mode.map_or("auto".to_string(), |m| m.to_string()),
            rule_mode: self.rule_mode.to_string(),
            semantics: self.semantics.to_string(),
            budget: format!("{}", self.budget),
            fuel: self.fuel,
            seed: self.seed,
        }
    }
}

/// Formats expected findings in manifest syntax.
pub fn format_findings(f: &[(OverflowKind, StmtId)]) -> String {
    f.iter().map(|(k, id)| format!("{k}@{id}")).collect::<Vec<_>>().join(",")
}
