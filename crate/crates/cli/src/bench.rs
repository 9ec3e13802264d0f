//! Runs a corpus of programs and compares verdicts with their sidecars.
//!
//! Every `NAME.prog` in the directory needs a `NAME.expect` TOML file:
//!
//! ```toml
//! verdict = "reachable"        # expected verdict of the main run
//! mode = "lazy"                # analysis of the main run (default lazy)
//! unroll = "1:10"              # unrolling range for cyclic programs
//! delete_first_store = false   # lazy option of the main run
//! witnesses_per_round = 2      # lazy option of the main run
//! sc_verdict = "unreachable"   # also checked with an SC exploration
//! robust = true                # the oracle finds no witness
//! max_iterations = 2           # upper bound on oracle calls
//! max_sc_queries = 5           # upper bound on SC queries
//! source = "paper"             # where the expected verdict comes from
//! ```

use crate::check::{check, load_program, parse_unroll, CheckOptions, Mode};
use crate::report::{RunReport, VerdictKind};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub verdict: VerdictKind,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub unroll: Option<String>,
    #[serde(default)]
    pub delete_first_store: bool,
    #[serde(default)]
    pub witnesses_per_round: Option<usize>,
    #[serde(default)]
    pub sc_verdict: Option<VerdictKind>,
    #[serde(default)]
    pub robust: Option<bool>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub max_sc_queries: Option<usize>,
    #[serde(default)]
    pub source: Option<String>,
}

impl Expectation {
    pub fn mode(&self) -> anyhow::Result<Mode> {
        let m = self.mode.as_deref().unwrap_or("lazy");
        Ok(match m {
            "sc" => Mode::Sc,
            "tso-brute" => Mode::TsoBrute,
            "lazy" => Mode::Lazy,
            "robust" => Mode::Robust,
            other => bail!("unknown mode `{other}`"),
        })
    }

    /// Options of the main run.
    pub fn options(&self) -> anyhow::Result<CheckOptions> {
        let mut opts = CheckOptions::new(self.mode()?);
        opts.delete_first_store = self.delete_first_store;
        opts.witnesses_per_round = self.witnesses_per_round;
        if let Some(u) = &self.unroll {
            opts.unroll = Some(parse_unroll(u)?);
        }
        Ok(opts)
    }
}

/// One corpus entry: program metrics, the main run and the checks made.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub threads: usize,
    pub states: usize,
    pub transitions: usize,
    pub expected: VerdictKind,
    pub report: RunReport,
    /// Failed checks; empty when the row is ok.
    pub failures: Vec<String>,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The `.prog` files of a directory, sorted by file name.
pub fn corpus_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "prog"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_expectation(prog: &Path) -> anyhow::Result<Expectation> {
    let path = prog.with_extension("expect");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("missing sidecar {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("{}", path.display()))
}

/// Runs one corpus entry.
pub fn run_entry(prog: &Path) -> anyhow::Result<BenchRow> {
    let exp = load_expectation(prog)?;
    let p = load_program(prog)?;
    let opts = exp.options()?;
    let report = check(&p, &opts);
    let mut failures = Vec::new();
    if report.verdict != exp.verdict {
        failures.push(format!(
            "verdict {} instead of {}",
            report.verdict.name(),
            exp.verdict.name()
        ));
    }
    if let Some(m) = exp.max_iterations {
        if report.iterations > m {
            failures.push(format!("{} iterations, at most {m} expected", report.iterations));
        }
    }
    if let Some(m) = exp.max_sc_queries {
        if report.sc_queries > m {
            failures.push(format!("{} SC queries, at most {m} expected", report.sc_queries));
        }
    }
    if let Some(sc) = exp.sc_verdict {
        let got = check(&p, &CheckOptions { mode: Mode::Sc, ..opts.clone() }).verdict;
        if got != sc {
            failures.push(format!("SC verdict {} instead of {}", got.name(), sc.name()));
        }
    }
    if let Some(robust) = exp.robust {
        let r = check(&p, &CheckOptions { mode: Mode::Robust, ..opts.clone() });
        let is_robust = r.sigmas.is_empty() && r.verdict != VerdictKind::Error;
        if is_robust != robust {
            failures.push(format!("robust: {is_robust} instead of {robust}"));
        }
    }
    Ok(BenchRow {
        name: p.name.clone(),
        threads: p.threads.len(),
        states: p.state_count(),
        transitions: p.instruction_count(),
        expected: exp.verdict,
        report,
        failures,
    })
}

/// Runs every entry of a corpus directory in file-name order. Entries run
/// one at a time so that their timings do not interfere.
pub fn run_bench(dir: &Path) -> anyhow::Result<Vec<BenchRow>> {
    let files = corpus_files(dir)?;
    if files.is_empty() {
        bail!("no .prog files in {}", dir.display());
    }
    files.iter().map(|f| run_entry(f)).collect()
}

/// Fixed-width table of the rows.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<22} {:>2} {:>5} {:>5} {:>4} {:>5}  {:<13} {:<13} {:<4} {:>10}",
        "program", "T", "St", "Tr", "RQ", "iter", "verdict", "expected", "ok", "time ms"
    )
    .unwrap();
    for r in rows {
        let verdict = match (r.report.verdict, r.report.bound) {
            (VerdictKind::SafeUpToK, Some(k)) => format!("safe-up-to-{k}"),
            (v, _) => v.name().to_string(),
        };
        writeln!(
            out,
            "{:<22} {:>2} {:>5} {:>5} {:>4} {:>5}  {:<13} {:<13} {:<4} {:>10.1}",
            r.name,
            r.threads,
            r.states,
            r.transitions,
            r.report.sc_queries,
            r.report.iterations,
            verdict,
            r.expected.name(),
            if r.ok() { "ok" } else { "FAIL" },
            r.report.wall_time_us as f64 / 1000.0
        )
        .unwrap();
        for f in &r.failures {
            writeln!(out, "    {f}").unwrap();
        }
    }
    out
}
