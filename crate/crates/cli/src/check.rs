//! One analysis of one program.

use crate::report::{ProgressRecord, RunReport, VerdictKind};
use anyhow::{bail, Context};
use lazy_tso::lazy::{semi_decide, LazyConfig, Outcome, Verdict};
use lazy_tso::oracle::{find_witness, OracleError, OracleOptions};
use lazy_tso::program::{parse, validate, Program};
use lazy_tso::semantics::{reach, ReachError, ReachOptions, ReachResult};
use std::path::Path;
use std::time::Instant;

/// Analysis run by `check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Exhaustive exploration under sequential consistency.
    Sc,
    /// Exhaustive exploration under TSO; acyclic programs only.
    TsoBrute,
    /// SC checks on extended programs, unrolling cyclic programs.
    Lazy,
    /// Robustness check: the SC verdict if the oracle finds no witness.
    Robust,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sc => "sc",
            Mode::TsoBrute => "tso-brute",
            Mode::Lazy => "lazy",
            Mode::Robust => "robust",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub mode: Mode,
    /// Inclusive range of unrolling bounds for cyclic programs.
    pub unroll: Option<(usize, usize)>,
    pub delete_first_store: bool,
    pub witnesses_per_round: Option<usize>,
    pub por: bool,
    pub state_budget: Option<usize>,
}

impl CheckOptions {
    pub fn new(mode: Mode) -> Self {
        CheckOptions {
            mode,
            unroll: None,
            delete_first_store: false,
            witnesses_per_round: None,
            por: false,
            state_budget: None,
        }
    }

    fn reach_options(&self) -> ReachOptions {
        ReachOptions {
            state_budget: self.state_budget,
            por: self.por,
            ..ReachOptions::default()
        }
    }

    pub fn lazy_config(&self) -> LazyConfig {
        let mut cfg = LazyConfig {
            delete_first_store: self.delete_first_store,
            oracle_budget: self.state_budget,
            ..LazyConfig::default()
        };
        cfg.reach.state_budget = self.state_budget;
        cfg.reach.por = self.por;
        if let Some(w) = self.witnesses_per_round {
            cfg.witnesses_per_round = w;
        }
        if let Some((lo, hi)) = self.unroll {
            cfg.unroll_bounds = (lo..=hi).collect();
        }
        cfg
    }
}

/// Parses `LO:HI` or a single bound `K`.
pub fn parse_unroll(s: &str) -> anyhow::Result<(usize, usize)> {
    let (lo, hi) = match s.split_once(':') {
        Some((lo, hi)) => (lo.trim(), hi.trim()),
        None => (s.trim(), s.trim()),
    };
    let lo: usize = lo.parse().with_context(|| format!("bad lower bound in `{s}`"))?;
    let hi: usize = hi.parse().with_context(|| format!("bad upper bound in `{s}`"))?;
    if lo == 0 || lo > hi {
        bail!("unrolling range `{s}` must satisfy 1 <= LO <= HI");
    }
    Ok((lo, hi))
}

/// Reads, parses and validates a program. Its name is the file stem.
pub fn load_program(path: &Path) -> anyhow::Result<Program> {
    let src = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut p = parse(&src).with_context(|| format!("{}", path.display()))?;
    p.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let diags = validate(&p);
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        bail!("{}: invalid program: {}", path.display(), msgs.join("; "));
    }
    Ok(p)
}

/// Runs the selected analysis. Failures of the analysis are reported with
/// an `error` or `inconclusive` verdict rather than returned.
pub fn check(p: &Program, opts: &CheckOptions) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new(&p.name, opts.mode.name());
    match opts.mode {
        Mode::Sc => explore(p, lazy_tso::semantics::Mode::Sc, opts, &mut report),
        Mode::TsoBrute => {
            if p.is_acyclic() {
                explore(p, lazy_tso::semantics::Mode::Tso, opts, &mut report);
            } else {
                report.reason = Some("tso-brute needs an acyclic program".into());
            }
        }
        Mode::Lazy => match semi_decide(p, &opts.lazy_config()) {
            Ok(v) => fill_from_verdict(&mut report, v),
            Err(e) => report.reason = Some(e.to_string()),
        },
        Mode::Robust => robust(p, opts, &mut report),
    }
    report.wall_time_us = u64::try_from(start.elapsed().as_micros()).unwrap_or(u64::MAX);
    report
}

fn trace_ids(p: &Program, res: &ReachResult) -> Option<Vec<String>> {
    res.trace.as_ref().map(|c| {
        c.events
            .iter()
            .filter(|e| !e.is_flush())
            .map(|e| p.threads[e.thread].instructions[e.instr].id.clone())
            .collect()
    })
}

fn explore(p: &Program, mode: lazy_tso::semantics::Mode, opts: &CheckOptions, report: &mut RunReport) {
    match reach(p, mode, opts.reach_options()) {
        Ok(res) => {
            report.verdict = if res.reachable {
                VerdictKind::Reachable
            } else {
                VerdictKind::Unreachable
            };
            report.sc_queries = usize::from(mode == lazy_tso::semantics::Mode::Sc);
            report.states_explored = res.states_explored;
            report.trace = trace_ids(p, &res);
        }
        Err(ReachError::BudgetExhausted { explored }) => {
            report.verdict = VerdictKind::Inconclusive;
            report.states_explored = explored;
            report.reason = Some(format!("state budget exhausted after {explored} states"));
        }
        Err(e) => report.reason = Some(e.to_string()),
    }
}

fn fill_from_verdict(report: &mut RunReport, v: Verdict) {
    report.verdict = match v.outcome {
        Outcome::Reachable => VerdictKind::Reachable,
        Outcome::Unreachable => VerdictKind::Unreachable,
        Outcome::SafeUpTo(k) => {
            report.bound = Some(k);
            VerdictKind::SafeUpToK
        }
        Outcome::Inconclusive => VerdictKind::Inconclusive,
    };
    if v.outcome == Outcome::Reachable {
        report.bound = v.unroll_bound;
    }
    report.reason = v.reason;
    report.trace = v.trace;
    report.iterations = v.iterations;
    report.sigmas = v.sigmas;
    report.sc_queries = v.sc_queries;
    report.states_explored = v.states_explored;
    report.progress = v
        .progress
        .into_iter()
        .map(|pr| ProgressRecord {
            iteration: pr.iteration,
            unroll: pr.unroll,
            sigma: pr.sigma,
            sc_reachable: pr.sc_reachable,
            states_explored: pr.states_explored,
        })
        .collect();
}

/// Without a witness the program is robust and the SC verdict is the TSO
/// verdict. With one, the report lists the witness sequence and stays
/// inconclusive.
fn robust(p: &Program, opts: &CheckOptions, report: &mut RunReport) {
    let buffer_bound = if p.is_acyclic() {
        None
    } else {
        Some(opts.unroll.map_or(10, |(_, hi)| hi))
    };
    let oracle_opts = OracleOptions {
        buffer_bound,
        state_budget: opts.state_budget,
    };
    report.iterations = 1;
    match find_witness(p, oracle_opts) {
        Ok(None) => explore(p, lazy_tso::semantics::Mode::Sc, opts, report),
        Ok(Some(w)) => {
            let sigma = w.sigma().iter().map(|&s| p.instr(s).id.clone()).collect();
            report.sigmas.push(sigma);
            report.verdict = VerdictKind::Inconclusive;
            report.reason = Some("not robust: the oracle found a witness".into());
        }
        Err(e @ (OracleError::BoundExhausted(_) | OracleError::BudgetExhausted(_))) => {
            report.verdict = VerdictKind::Inconclusive;
            report.reason = Some(e.to_string());
        }
        Err(e) => report.reason = Some(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unroll_ranges() {
        assert_eq!(parse_unroll("1:10").unwrap(), (1, 10));
        assert_eq!(parse_unroll("7").unwrap(), (7, 7));
        assert!(parse_unroll("0:3").is_err());
        assert!(parse_unroll("5:2").is_err());
        assert!(parse_unroll("a:b").is_err());
    }

    #[test]
    fn lazy_config_takes_the_flags() {
        let opts = CheckOptions {
            unroll: Some((2, 4)),
            delete_first_store: true,
            witnesses_per_round: Some(1),
            por: true,
            state_budget: Some(99),
            ..CheckOptions::new(Mode::Lazy)
        };
        let cfg = opts.lazy_config();
        assert_eq!(cfg.unroll_bounds, vec![2, 3, 4]);
        assert!(cfg.delete_first_store && cfg.reach.por);
        assert_eq!(cfg.witnesses_per_round, 1);
        assert_eq!(cfg.reach.state_budget, Some(99));
        assert_eq!(cfg.oracle_budget, Some(99));
    }
}
