//! The report of one run, printed for humans or written as JSON.

use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Verdict of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Reachable,
    Unreachable,
    /// No unrolling up to `bound` reaches the goal.
    SafeUpToK,
    Inconclusive,
    Error,
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            VerdictKind::Reachable => "reachable",
            VerdictKind::Unreachable => "unreachable",
            VerdictKind::SafeUpToK => "safe-up-to-k",
            VerdictKind::Inconclusive => "inconclusive",
            VerdictKind::Error => "error",
        }
    }
}

/// Process exit code for a verdict.
pub fn exit_code(v: VerdictKind) -> i32 {
    match v {
        VerdictKind::Unreachable => 0,
        VerdictKind::Reachable => 1,
        VerdictKind::SafeUpToK | VerdictKind::Inconclusive => 2,
        VerdictKind::Error => 3,
    }
}

/// One SC reachability query of a lazy run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub iteration: usize,
    pub unroll: Option<usize>,
    pub sigma: Vec<String>,
    pub sc_reachable: bool,
    pub states_explored: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub program: String,
    pub mode: String,
    pub verdict: VerdictKind,
    /// Unrolling bound: the one that decided, or the largest one tried for
    /// `safe-up-to-k`.
    pub bound: Option<usize>,
    /// Instruction ids of the input program along the trace reaching the
    /// goal.
    pub trace: Option<Vec<String>>,
    /// Oracle calls.
    pub iterations: usize,
    /// Sequences the program was extended by, as input instruction ids.
    pub sigmas: Vec<Vec<String>>,
    pub sc_queries: usize,
    pub states_explored: usize,
    pub wall_time_us: u64,
    /// Explanation for `inconclusive` and `error` verdicts.
    pub reason: Option<String>,
    pub progress: Vec<ProgressRecord>,
}

impl RunReport {
    pub fn new(program: &str, mode: &str) -> Self {
        RunReport {
            program: program.to_string(),
            mode: mode.to_string(),
            verdict: VerdictKind::Error,
            bound: None,
            trace: None,
            iterations: 0,
            sigmas: Vec::new(),
            sc_queries: 0,
            states_explored: 0,
            wall_time_us: 0,
            reason: None,
            progress: Vec::new(),
        }
    }

    pub fn error(program: &str, mode: &str, reason: impl ToString) -> Self {
        RunReport {
            reason: Some(reason.to_string()),
            ..RunReport::new(program, mode)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Multi-line human-readable summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let verdict = match (self.verdict, self.bound) {
            (VerdictKind::SafeUpToK, Some(k)) => format!("safe up to {k}"),
            (v, _) => v.name().to_string(),
        };
        writeln!(out, "program:      {}", self.program).unwrap();
        writeln!(out, "mode:         {}", self.mode).unwrap();
        writeln!(out, "verdict:      {verdict}").unwrap();
        if let Some(r) = &self.reason {
            writeln!(out, "reason:       {r}").unwrap();
        }
        if let (Some(k), VerdictKind::Reachable) = (self.bound, self.verdict) {
            writeln!(out, "unrolling:    {k}").unwrap();
        }
        writeln!(out, "iterations:   {}", self.iterations).unwrap();
        writeln!(out, "sc queries:   {}", self.sc_queries).unwrap();
        writeln!(out, "states:       {}", self.states_explored).unwrap();
        writeln!(out, "time:         {:.3} ms", self.wall_time_us as f64 / 1000.0).unwrap();
        for (i, s) in self.sigmas.iter().enumerate() {
            writeln!(out, "sigma {}:      {}", i + 1, s.join(" ")).unwrap();
        }
        if let Some(t) = &self.trace {
            writeln!(out, "trace:").unwrap();
            for id in t {
                writeln!(out, "  {id}").unwrap();
            }
        }
        out
    }
}
