//! Lazy TSO reachability: SC checks on successively extended programs.
//!
//! Each iteration asks whether the goal is SC-reachable in the current
//! program `R`. If not, the robustness oracle looks for a witness; without
//! one, SC and TSO reach the same states and the goal is unreachable.
//! Otherwise `R` is replaced by `R ⊕ σ`, which makes the TSO behavior of
//! `σ` available under SC.
//!
//! In keep mode (the default) the first store of `σ` stays in the program,
//! so the same behavior can show up again. The oracle is then told to skip
//! sequences whose projection to the input program was already used; when
//! only such sequences are left, one is extended in delete mode, which
//! removes its first store.
//!
//! Neither mode bounds the number of iterations in general, so
//! [`LazyConfig::max_iterations`] caps them.

mod extend;

pub use extend::{
    extend, size_bound, ExtendError, ExtensionAux, ExtensionResult, Image, ProjectionMap,
};

use crate::oracle::{find_witnesses, Blocked, OracleError, OracleOptions};
use crate::program::{unroll, InstrRef, Program};
use crate::semantics::{reach, Mode, ReachError, ReachOptions, ReachResult};
use std::collections::HashSet;
use thiserror::Error;

/// Settings of [`lazy_reach`] and [`semi_decide`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LazyConfig {
    /// Remove the first store of each extended sequence.
    pub delete_first_store: bool,
    /// Maximum number of oracle calls before giving up.
    pub max_iterations: Option<usize>,
    /// Number of witnesses, for distinct attacks, requested per oracle call.
    pub witnesses_per_round: usize,
    /// Unrolling bounds tried by [`semi_decide`] on cyclic programs.
    pub unroll_bounds: Vec<usize>,
    /// Options of the SC reachability checks.
    pub reach: ReachOptions,
    /// State budget of each oracle call.
    pub oracle_budget: Option<usize>,
}

impl Default for LazyConfig {
    fn default() -> Self {
        LazyConfig {
            delete_first_store: false,
            max_iterations: Some(256),
            witnesses_per_round: 2,
            unroll_bounds: (1..=10).collect(),
            reach: ReachOptions {
                reset_dead_registers: true,
                ..ReachOptions::default()
            },
            oracle_budget: None,
        }
    }
}

/// Final answer of an analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Reachable,
    Unreachable,
    /// No unrolling up to the given bound reaches the goal.
    SafeUpTo(usize),
    Inconclusive,
}

/// One SC reachability query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Progress {
    /// Number of oracle calls made before this query.
    pub iteration: usize,
    /// Unrolling bound, for cyclic inputs.
    pub unroll: Option<usize>,
    /// The sequence just extended, as ids of input instructions; empty for
    /// the query on the unextended program.
    pub sigma: Vec<String>,
    pub sc_reachable: bool,
    pub states_explored: usize,
}

/// Result of [`lazy_reach`] or [`semi_decide`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Why the result is inconclusive.
    pub reason: Option<String>,
    /// Instructions of the input program executed by the SC trace reaching
    /// the goal; bookkeeping instructions of extensions are left out.
    pub trace: Option<Vec<String>>,
    /// Number of oracle calls.
    pub iterations: usize,
    /// Sequences extended, as ids of input instructions, in order.
    pub sigmas: Vec<Vec<String>>,
    pub sc_queries: usize,
    /// States explored by all SC queries.
    pub states_explored: usize,
    pub progress: Vec<Progress>,
    /// The unrolling bound that decided a cyclic input.
    pub unroll_bound: Option<usize>,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            outcome: Outcome::Inconclusive,
            reason: None,
            trace: None,
            iterations: 0,
            sigmas: Vec::new(),
            sc_queries: 0,
            states_explored: 0,
            progress: Vec::new(),
            unroll_bound: None,
        }
    }

    fn inconclusive(mut self, reason: impl ToString) -> Self {
        self.outcome = Outcome::Inconclusive;
        self.reason = Some(reason.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LazyError {
    #[error("lazy reachability needs an acyclic program; unroll it first")]
    Cyclic,
    #[error("extension failed: {0}")]
    Extend(#[from] ExtendError),
}

/// Number of fence-free paths of one thread that start with a store and
/// end with a load, summed over threads and saturated. Every extended
/// sequence projects to one of these paths, so this bounds the number of
/// distinct projections.
pub fn sequence_bound(p: &Program) -> u128 {
    let mut total: u128 = 0;
    for t in &p.threads {
        // paths[q]: fence-free paths from q that end with a load.
        let n = t.states.len();
        let mut memo: Vec<Option<u128>> = vec![None; n];
        fn paths(t: &crate::program::Thread, q: usize, memo: &mut Vec<Option<u128>>) -> u128 {
            if let Some(v) = memo[q] {
                return v;
            }
            memo[q] = Some(0);
            let mut v: u128 = 0;
            for i in t.instructions.iter().filter(|i| i.src as usize == q && !i.cmd.is_fence()) {
                let here = u128::from(i.cmd.is_load());
                v = v
                    .saturating_add(here)
                    .saturating_add(paths(t, i.dst as usize, memo));
            }
            memo[q] = Some(v);
            v
        }
        for i in t.instructions.iter().filter(|i| i.cmd.is_store()) {
            total = total.saturating_add(paths(t, i.dst as usize, &mut memo));
        }
    }
    total
}

struct Run<'a> {
    cfg: &'a LazyConfig,
    verdict: Verdict,
    unroll: Option<usize>,
    rounds: usize,
}

impl Run<'_> {
    /// SC query with a progress record; `Err` carries an inconclusive
    /// verdict.
    fn query(&mut self, r: &Program, sigma: Vec<String>) -> Result<ReachResult, String> {
        let res = reach(r, Mode::Sc, self.cfg.reach).map_err(|e| match e {
            ReachError::BudgetExhausted { explored } => {
                format!("SC check exceeded its state budget after {explored} states")
            }
            e => e.to_string(),
        })?;
        self.verdict.sc_queries += 1;
        self.verdict.states_explored += res.states_explored;
        self.verdict.progress.push(Progress {
            iteration: self.verdict.iterations,
            unroll: self.unroll,
            sigma,
            sc_reachable: res.reachable,
            states_explored: res.states_explored,
        });
        Ok(res)
    }

    fn reachable(&mut self, r: &Program, proj: &ProjectionMap, res: &ReachResult) {
        let trace = res.trace.as_ref().expect("reachable results carry a trace");
        let ids = trace
            .events
            .iter()
            .filter(|e| !e.is_flush())
            .map(|e| r.threads[e.thread].instructions[e.instr].id.as_str());
        self.verdict.outcome = Outcome::Reachable;
        self.verdict.trace = Some(proj.project(ids));
    }
}

fn project_sigma(r: &Program, proj: &ProjectionMap, sigma: &[InstrRef]) -> Vec<String> {
    proj.project_with_flushes(sigma.iter().map(|&s| r.instr(s).id.as_str()))
}

fn oracle_error(e: OracleError) -> String {
    format!("oracle: {e}")
}

/// Decides goal reachability under TSO for an acyclic program.
pub fn lazy_reach(p: &Program, cfg: &LazyConfig) -> Result<Verdict, LazyError> {
    let mut run = Run {
        cfg,
        verdict: Verdict::new(),
        unroll: None,
        rounds: 0,
    };
    lazy_loop(p, &mut run)?;
    Ok(run.verdict)
}

fn lazy_loop(p: &Program, run: &mut Run<'_>) -> Result<(), LazyError> {
    if !p.is_acyclic() {
        return Err(LazyError::Cyclic);
    }
    let cfg = run.cfg;
    let oracle_opts = OracleOptions {
        buffer_bound: None,
        state_budget: cfg.oracle_budget,
    };
    let mut r = p.clone();
    let mut proj = ProjectionMap::identity(p);
    let mut used: HashSet<Vec<String>> = HashSet::new();
    let mut checked = false;
    loop {
        if !checked {
            match run.query(&r, Vec::new()) {
                Ok(res) if res.reachable => {
                    run.reachable(&r, &proj, &res);
                    return Ok(());
                }
                Ok(_) => {}
                Err(e) => {
                    run.verdict = std::mem::replace(&mut run.verdict, Verdict::new()).inconclusive(e);
                    return Ok(());
                }
            }
        }
        if cfg.max_iterations.is_some_and(|m| run.verdict.iterations >= m) {
            let reason = format!("no answer after {} iterations", run.verdict.iterations);
            run.verdict = std::mem::replace(&mut run.verdict, Verdict::new()).inconclusive(reason);
            return Ok(());
        }
        run.verdict.iterations += 1;

        let keep = !cfg.delete_first_store;
        let is_used = |s: &[InstrRef]| used.contains(&project_sigma(&r, &proj, s));
        let blocked: Option<Blocked<'_>> = if keep { Some(&is_used) } else { None };
        let search = match find_witnesses(&r, oracle_opts, cfg.witnesses_per_round.max(1), blocked) {
            Ok(s) => s,
            Err(e) => {
                run.verdict = std::mem::replace(&mut run.verdict, Verdict::new()).inconclusive(oracle_error(e));
                return Ok(());
            }
        };
        let mut candidates: Vec<(Vec<InstrRef>, bool)> = search
            .witnesses
            .iter()
            .map(|w| (w.sigma(), cfg.delete_first_store))
            .collect();
        if candidates.is_empty() {
            if !search.skipped_blocked {
                run.verdict.outcome = Outcome::Unreachable;
                return Ok(());
            }
            // Only sequences seen before are left: extend one of them
            // without its first store.
            let fallback = match find_witnesses(&r, oracle_opts, 1, None) {
                Ok(s) => s.witnesses.into_iter().next().expect("a blocked witness exists"),
                Err(e) => {
                    run.verdict = std::mem::replace(&mut run.verdict, Verdict::new()).inconclusive(oracle_error(e));
                    return Ok(());
                }
            };
            candidates.push((fallback.sigma(), true));
        }

        // Try each candidate on its own; the first that reaches the goal
        // decides.
        let mut extensions = Vec::new();
        for (sigma, delete) in &candidates {
            let projected = project_sigma(&r, &proj, sigma);
            run.rounds += 1;
            let ext = extend(&r, sigma, *delete, run.rounds)?;
            let ext_proj = proj.then(&ext.projection);
            run.verdict.sigmas.push(projected.clone());
            let res = match run.query(&ext.program, projected.clone()) {
                Ok(res) => res,
                Err(e) => {
                    run.verdict = std::mem::replace(&mut run.verdict, Verdict::new()).inconclusive(e);
                    return Ok(());
                }
            };
            if res.reachable {
                run.reachable(&ext.program, &ext_proj, &res);
                return Ok(());
            }
            used.insert(projected);
            extensions.push((ext, ext_proj));
        }

        // Merge all candidates into the next program.
        let mut merged = extensions.into_iter();
        let (first, first_proj) = merged.next().expect("at least one candidate");
        let mut next = first.program;
        let mut next_proj = first_proj;
        let mut merged_count = 1;
        for (sigma, delete) in candidates.iter().skip(1) {
            let ids: Option<Vec<InstrRef>> = sigma
                .iter()
                .map(|&s| next.find_instr(&r.instr(s).id))
                .collect();
            let Some(ids) = ids else { continue };
            run.rounds += 1;
            let ext = extend(&next, &ids, *delete, run.rounds)?;
            next_proj = next_proj.then(&ext.projection);
            next = ext.program;
            merged_count += 1;
        }
        checked = merged_count == 1;
        r = next;
        proj = next_proj;
    }
}

/// Semi-decision procedure: runs [`lazy_reach`] on unrollings of a cyclic
/// program with increasing bounds. Acyclic programs are decided directly.
pub fn semi_decide(p: &Program, cfg: &LazyConfig) -> Result<Verdict, LazyError> {
    if p.is_acyclic() {
        return lazy_reach(p, cfg);
    }
    let mut bounds = cfg.unroll_bounds.clone();
    bounds.sort_unstable();
    bounds.dedup();
    let mut run = Run {
        cfg,
        verdict: Verdict::new(),
        unroll: None,
        rounds: 0,
    };
    let mut last = None;
    for k in bounds {
        let u = unroll(p, k);
        let before = run.verdict.sigmas.len();
        run.unroll = Some(k);
        run.verdict.outcome = Outcome::Inconclusive;
        lazy_loop(&u.program, &mut run)?;
        let to_original = |ids: &mut Vec<String>| {
            for id in ids.iter_mut() {
                *id = u.provenance[id.as_str()].clone();
            }
        };
        for s in &mut run.verdict.sigmas[before..] {
            to_original(s);
        }
        for pr in run.verdict.progress.iter_mut().filter(|pr| pr.unroll == Some(k)) {
            to_original(&mut pr.sigma);
        }
        match run.verdict.outcome {
            Outcome::Reachable => {
                if let Some(t) = run.verdict.trace.as_mut() {
                    to_original(t);
                }
                run.verdict.unroll_bound = Some(k);
                return Ok(run.verdict);
            }
            Outcome::Inconclusive => return Ok(run.verdict),
            Outcome::Unreachable | Outcome::SafeUpTo(_) => last = Some(k),
        }
    }
    match last {
        Some(k) => {
            run.verdict.outcome = Outcome::SafeUpTo(k);
            Ok(run.verdict)
        }
        None => Ok(run.verdict.inconclusive("no unrolling bound given")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse;

    const DEKKER: &str = "domain 2;
thread t1 { init q0; q0 -> q1 : store x <- 1; q1 -> q2 : load r1 <- y; q2 -> qf : assume r1 == 0; }
thread t2 { init p0; p0 -> p1 : store y <- 1; p1 -> p2 : load r2 <- x; p2 -> pf : assume r2 == 0; }
goal { t1 @ qf, t2 @ pf; }";

    #[test]
    fn dekker_is_reachable_in_both_modes() {
        let p = parse(DEKKER).unwrap();
        for delete_first_store in [false, true] {
            let cfg = LazyConfig {
                delete_first_store,
                witnesses_per_round: 1,
                ..LazyConfig::default()
            };
            let v = lazy_reach(&p, &cfg).unwrap();
            assert_eq!(v.outcome, Outcome::Reachable);
            assert!(v.iterations <= 2);
            assert_eq!(v.sigmas[0], vec!["t1.q0.q1.0", "t1.q1.q2.0"]);
            let trace = v.trace.unwrap();
            assert!(trace.iter().all(|id| p.find_instr(id).is_some()));
        }
    }

    #[test]
    fn fenced_dekker_is_unreachable_after_one_oracle_call() {
        let src = DEKKER
            .replace("q1 -> q2 : load", "q1 -> m : mfence; m -> q2 : load")
            .replace("p1 -> p2 : load", "p1 -> n : mfence; n -> p2 : load");
        let p = parse(&src).unwrap();
        let v = lazy_reach(&p, &LazyConfig::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Unreachable);
        assert_eq!(v.iterations, 1);
        assert_eq!(v.sc_queries, 1);
        assert!(v.sigmas.is_empty());
    }

    #[test]
    fn cyclic_input_is_rejected() {
        let p = parse("domain 2; thread t { init a; a -> a : store x <- 1; }").unwrap();
        assert_eq!(lazy_reach(&p, &LazyConfig::default()), Err(LazyError::Cyclic));
    }

    #[test]
    fn sequence_bound_counts_store_load_paths() {
        let p = parse(DEKKER).unwrap();
        assert_eq!(sequence_bound(&p), 2);
    }
}
