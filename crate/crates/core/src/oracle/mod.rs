//! Robustness oracle: finds computations that separate TSO from SC.
//!
//! A *witness* for an attack `(t, st, ld)` is a TSO computation
//! `τ1 · st · τ2 · ld · τ3 · fl · τ4` in which thread `t` delays the store
//! `st` past the load `ld`:
//!
//! 1. only `t` delays stores; every other store is immediately flushed,
//! 2. `fl` flushes `st` and `st` is the first delayed store of `t`; `τ2`
//!    contains no flush or fence of `t`,
//! 3. `τ3` contains no event of `t`,
//! 4. `τ4` contains only flushes of `t`, to addresses other than the one
//!    `ld` reads,
//! 5. every event of `τ3` and `fl` is reachable from `ld` in the
//!    happens-before graph.
//!
//! A program without witnesses has the same reachable states under SC and
//! TSO. The oracle returns the instructions of `t` executed in
//! `st · τ2 · ld`, or the empty sequence when no witness exists.

mod search;

use crate::hb::build_hb;
use crate::program::{InstrRef, Program, StateId};
use crate::semantics::{replay, Access, Event};
use std::fmt::Write;
use thiserror::Error;

pub use search::{find_witnesses, Blocked, WitnessSearch};

/// A delay pattern: thread, store instruction and load instruction, such
/// that a fence-free control path leads from the store to the load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Attack {
    pub thread: usize,
    pub store: usize,
    pub load: usize,
}

/// Reflexive-transitive closure of the fence-free control-flow relation
/// of one thread: `m[q][q']` if `q'` is reachable from `q` without fences.
pub(crate) fn fence_free_reach(p: &Program, thread: usize) -> Vec<Vec<bool>> {
    let t = &p.threads[thread];
    let n = t.states.len();
    let mut m = vec![vec![false; n]; n];
    for (q, row) in m.iter_mut().enumerate() {
        let mut stack = vec![q as StateId];
        row[q] = true;
        while let Some(x) = stack.pop() {
            for ins in &t.instructions {
                if ins.src == x && !ins.cmd.is_fence() && !row[ins.dst as usize] {
                    row[ins.dst as usize] = true;
                    stack.push(ins.dst);
                }
            }
        }
    }
    m
}

/// All attacks in canonical order: thread, store and load by declaration.
pub fn enumerate_attacks(p: &Program) -> Vec<Attack> {
    let mut out = Vec::new();
    for (ti, t) in p.threads.iter().enumerate() {
        let reach = fence_free_reach(p, ti);
        for (si, st) in t.instructions.iter().enumerate() {
            if !st.cmd.is_store() {
                continue;
            }
            for (li, ld) in t.instructions.iter().enumerate() {
                if ld.cmd.is_load() && reach[st.dst as usize][ld.src as usize] {
                    out.push(Attack {
                        thread: ti,
                        store: si,
                        load: li,
                    });
                }
            }
        }
    }
    out
}

/// A witness computation with the positions of its delimiting events.
#[derive(Clone, Debug)]
pub struct Witness {
    pub attack: Attack,
    pub events: Vec<Event>,
    /// Position of the delayed store.
    pub st: usize,
    /// Position of the load the store is delayed past.
    pub ld: usize,
    /// Position of the flush of the delayed store.
    pub fl: usize,
}

impl Witness {
    /// Instructions of the attacking thread in `st · τ2 · ld`.
    pub fn sigma(&self) -> Vec<InstrRef> {
        self.events[self.st..=self.ld]
            .iter()
            .filter(|e| e.thread == self.attack.thread && !e.is_flush())
            .map(|e| InstrRef {
                thread: e.thread,
                index: e.instr,
            })
            .collect()
    }

    /// Human-readable dump: one event per line, grouped into the segments
    /// `τ1 | st | τ2 | ld | τ3 | fl | τ4`.
    pub fn dump(&self, p: &Program) -> String {
        let mut out = String::new();
        let n = self.events.len();
        let segments = [
            ("tau1", 0, self.st),
            ("st", self.st, self.st + 1),
            ("tau2", self.st + 1, self.ld),
            ("ld", self.ld, self.ld + 1),
            ("tau3", self.ld + 1, self.fl),
            ("fl", self.fl, self.fl + 1),
            ("tau4", self.fl + 1, n),
        ];
        for (name, from, to) in segments {
            writeln!(out, "{name}:").unwrap();
            for e in &self.events[from..to] {
                let ins = &p.threads[e.thread].instructions[e.instr];
                let what = if e.is_flush() {
                    format!("flush of {}", ins.id)
                } else {
                    format!("{} : {}", ins.id, crate::program::print_command(p, &ins.cmd))
                };
                writeln!(out, "  {} {what}", e.label(p)).unwrap();
            }
        }
        out
    }
}

/// Checks that `w` is a valid computation satisfying the five witness
/// conditions. The check is independent of the search: it replays the
/// events and evaluates reachability on the full happens-before graph.
pub fn verify_witness(p: &Program, w: &Witness) -> Result<(), String> {
    let ev = &w.events;
    let n = ev.len();
    let ta = w.attack.thread;
    if !(w.st < w.ld && w.ld < w.fl && w.fl < n) {
        return Err("segment positions out of order".into());
    }
    let last = replay(p, ev).map_err(|e| format!("not a computation: {e}"))?;
    if !last.buffers_empty() {
        return Err("buffers not empty at the end".into());
    }
    let (st, ld, fl) = (&ev[w.st], &ev[w.ld], &ev[w.fl]);
    if st.thread != ta || st.access != Access::Store || st.instr != w.attack.store {
        return Err("st is not the attack store".into());
    }
    if ld.thread != ta || ld.access != Access::Load || ld.instr != w.attack.load {
        return Err("ld is not the attack load".into());
    }
    if fl.thread != ta || !fl.is_flush() || fl.id != st.id {
        return Err("fl does not flush st".into());
    }
    // W1: only the attacker delays stores.
    for (i, e) in ev.iter().enumerate() {
        if e.access == Access::Store && e.thread != ta {
            let next = ev.get(i + 1);
            if !next.is_some_and(|f| f.is_flush() && f.thread == e.thread && f.id == e.id) {
                return Err(format!("W1: store at {i} of another thread is delayed"));
            }
        }
    }
    // W2: earlier stores of the attacker are not delayed, and tau2 has no
    // attacker flush or fence.
    for i in 0..w.st {
        let e = &ev[i];
        if e.thread == ta && e.access == Access::Store {
            let next = ev.get(i + 1);
            if !next.is_some_and(|f| f.is_flush() && f.thread == ta && f.id == e.id) {
                return Err(format!("W2: attacker store at {i} is delayed before st"));
            }
        }
    }
    for (i, e) in ev.iter().enumerate().take(w.ld).skip(w.st + 1) {
        if e.thread == ta && (e.is_flush() || e.access == Access::Fence) {
            return Err(format!("W2: attacker flush or fence at {i} inside tau2"));
        }
    }
    // W3: tau3 has no attacker events.
    if ev[w.ld + 1..w.fl].iter().any(|e| e.thread == ta) {
        return Err("W3: attacker event inside tau3".into());
    }
    // W4: tau4 is attacker flushes to addresses other than ld's.
    for e in &ev[w.fl + 1..] {
        if e.thread != ta || !e.is_flush() || e.addr == ld.addr {
            return Err("W4: tau4 contains a foreign event or a flush to ld's address".into());
        }
    }
    // W5: ld reaches every event of tau3 and fl.
    let g = build_hb(ev).map_err(|e| e.to_string())?;
    let reach = g.reachable_from(w.ld);
    if let Some(i) = (w.ld + 1..=w.fl).find(|&i| !reach[i]) {
        return Err(format!("W5: event at {i} is not reachable from ld"));
    }
    Ok(())
}

/// Options of the witness search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleOptions {
    /// Capacity of the attacker's store buffer. Required for cyclic
    /// programs, where a delayed prefix can grow without bound.
    pub buffer_bound: Option<usize>,
    /// Maximum number of search states.
    pub state_budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("witness search on a cyclic program needs a buffer bound")]
    BoundRequired,
    #[error("no witness within buffer bound {0}; the result is inconclusive")]
    BoundExhausted(usize),
    #[error("witness search exceeded its state budget of {0}")]
    BudgetExhausted(usize),
}

/// The canonical first witness, if any.
pub fn find_witness(p: &Program, opts: OracleOptions) -> Result<Option<Witness>, OracleError> {
    Ok(find_witnesses(p, opts, 1, None)?.witnesses.into_iter().next())
}

/// The oracle: the attacker's instruction sequence of the canonical first
/// witness, or the empty sequence if the program is robust.
pub fn oracle(p: &Program, opts: OracleOptions) -> Result<Vec<InstrRef>, OracleError> {
    Ok(find_witness(p, opts)?.map(|w| w.sigma()).unwrap_or_default())
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
    fn dekker_attacks() {
        let p = parse(DEKKER).unwrap();
        let a = enumerate_attacks(&p);
        assert_eq!(
            a,
            vec![
                Attack { thread: 0, store: 0, load: 1 },
                Attack { thread: 1, store: 0, load: 1 }
            ]
        );
    }

    #[test]
    fn fence_blocks_attack() {
        let p = parse(
            "domain 2; thread t { init a; a -> b : store x <- 1; b -> c : mfence; c -> d : load r <- y }",
        )
        .unwrap();
        assert!(enumerate_attacks(&p).is_empty());
    }

    #[test]
    fn dekker_witness() {
        let p = parse(DEKKER).unwrap();
        let w = find_witness(&p, OracleOptions::default()).unwrap().unwrap();
        verify_witness(&p, &w).unwrap();
        assert_eq!(w.attack, Attack { thread: 0, store: 0, load: 1 });
        let ids: Vec<&str> = w
            .sigma()
            .iter()
            .map(|r| p.instr(*r).id.as_str())
            .collect();
        assert_eq!(ids, vec!["t1.q0.q1.0", "t1.q1.q2.0"]);
        let dump = w.dump(&p);
        for seg in ["tau1:", "st:", "tau2:", "ld:", "tau3:", "fl:", "tau4:"] {
            assert!(dump.contains(seg), "{dump}");
        }
    }

    #[test]
    fn fenced_dekker_is_robust() {
        let src = DEKKER
            .replace("q0 -> q1 : store x <- 1; q1 -> q2", "q0 -> q1 : store x <- 1; q1 -> m1 : mfence; m1 -> q2")
            .replace("p0 -> p1 : store y <- 1; p1 -> p2", "p0 -> p1 : store y <- 1; p1 -> m2 : mfence; m2 -> p2");
        let p = parse(&src).unwrap();
        assert!(oracle(&p, OracleOptions::default()).unwrap().is_empty());
    }
}
