//! Shared helpers for integration tests: a random program generator and
//! brute-force reference implementations.
#![allow(dead_code)]

use lazy_tso::oracle::{verify_witness, Attack, Witness};
use lazy_tso::program::{parse, Program};
use lazy_tso::semantics::{apply, enabled_labels, Event, Label, MachineState, Mode, ProgramIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;
use std::fmt::Write;

/// Shape parameters of generated programs.
#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub threads: usize,
    pub max_instrs: usize,
    pub domain: usize,
    pub fence_weight: u32,
    /// Probability that a thread starts with a store to one address
    /// followed by a load of the other (the store-buffering shape).
    pub sb_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            threads: 2,
            max_instrs: 8,
            domain: 2,
            fence_weight: 1,
            sb_prob: 0.0,
        }
    }
}

/// Generates the text of a random acyclic program with addresses `x`, `y`.
pub fn random_source(rng: &mut impl Rng, cfg: GenConfig) -> String {
    let d = cfg.domain;
    let total = rng.gen_range(2..=cfg.max_instrs);
    let mut counts = vec![1usize; cfg.threads];
    for _ in cfg.threads..total {
        let t = rng.gen_range(0..cfg.threads);
        counts[t] += 1;
    }
    let addrs = ["x", "y"];
    let mut src = format!("domain {d};\naddresses x, y;\n");
    let mut goal_parts = Vec::new();
    let mut goal_vals = Vec::new();
    for (t, &n) in counts.iter().enumerate() {
        let regs = [format!("r{t}a"), format!("r{t}b")];
        let mut targets: Vec<String> = Vec::new();
        writeln!(src, "thread t{t} {{\n  init s{t}_0;").unwrap();
        let mut first = 0;
        if rng.gen_bool(cfg.sb_prob) {
            let (a, b) = (addrs[t % 2], addrs[(t + 1) % 2]);
            let r = &regs[0];
            targets.push(r.clone());
            writeln!(src, "  s{t}_0 -> s{t}_1 : store {a} <- 1;").unwrap();
            writeln!(src, "  s{t}_1 -> s{t}_2 : load {r} <- {b};").unwrap();
            first = 2;
        }
        let n = n + first;
        for j in first..n {
            let from = if j == 0 || rng.gen_bool(0.8) { j } else { rng.gen_range(0..j) };
            let to = j + 1;
            let value = |rng: &mut _, targets: &Vec<String>| -> String {
                if !targets.is_empty() && gen_bool(rng, 0.4) {
                    targets.choose(rng).unwrap().clone()
                } else {
                    gen_range(rng, 0..d).to_string()
                }
            };
            let pick: u32 = rng.gen_range(0..(20 + 2 * cfg.fence_weight));
            let cmd = if pick < 7 {
                let a = addrs.choose(rng).unwrap();
                format!("store {a} <- {}", value(rng, &targets))
            } else if pick < 14 {
                let r = regs.choose(rng).unwrap().clone();
                let a = addrs.choose(rng).unwrap();
                if !targets.contains(&r) {
                    targets.push(r.clone());
                }
                format!("load {r} <- {a}")
            } else if pick < 17 && !targets.is_empty() {
                let r = targets.choose(rng).unwrap();
                let op = if rng.gen_bool(0.5) { "==" } else { "!=" };
                format!("assume {r} {op} {}", rng.gen_range(0..d))
            } else if pick < 20 {
                let r = regs.choose(rng).unwrap().clone();
                let e = value(rng, &targets);
                if !targets.contains(&r) {
                    targets.push(r.clone());
                }
                format!("{r} := {e} + 1")
            } else {
                "mfence".to_string()
            };
            writeln!(src, "  s{t}_{from} -> s{t}_{to} : {cmd};").unwrap();
        }
        writeln!(src, "}}").unwrap();
        if rng.gen_bool(0.85) {
            let q = if rng.gen_bool(0.7) { n } else { rng.gen_range(0..=n) };
            goal_parts.push(format!("t{t} @ s{t}_{q}"));
        }
        if !targets.is_empty() && rng.gen_bool(0.3) {
            let r = targets.choose(rng).unwrap();
            goal_vals.push(format!("{r} == {}", rng.gen_range(0..d)));
        }
    }
    if rng.gen_bool(0.3) {
        goal_vals.push(format!("{} == {}", addrs.choose(rng).unwrap(), rng.gen_range(0..d)));
    }
    if !goal_parts.is_empty() || !goal_vals.is_empty() {
        src.push_str("goal {");
        if !goal_parts.is_empty() {
            write!(src, " {};", goal_parts.join(", ")).unwrap();
        }
        if !goal_vals.is_empty() {
            write!(src, " where {};", goal_vals.join(", ")).unwrap();
        }
        src.push_str(" }\n");
    }
    src
}

fn gen_bool(rng: &mut impl Rng, p: f64) -> bool {
    rng.gen_bool(p)
}

fn gen_range(rng: &mut impl Rng, r: std::ops::Range<usize>) -> usize {
    rng.gen_range(r)
}

/// A random acyclic program.
pub fn random_program(rng: &mut impl Rng, cfg: GenConfig) -> Program {
    let src = random_source(rng, cfg);
    let mut p = parse(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"));
    p.name = "random".into();
    p
}

/// Calls `visit` on every TSO computation (every event sequence from the
/// initial state), depth first. The program must be acyclic.
pub fn for_each_computation(p: &Program, mut visit: impl FnMut(&[Event], &MachineState)) {
    let idx = ProgramIndex::new(p);
    let mut events = Vec::new();
    let s = MachineState::initial(p);
    fn go(
        p: &Program,
        idx: &ProgramIndex,
        s: &MachineState,
        events: &mut Vec<Event>,
        visit: &mut impl FnMut(&[Event], &MachineState),
    ) {
        visit(events, s);
        let mut labels = Vec::new();
        enabled_labels(p, idx, s, Mode::Tso, &mut labels);
        for l in labels {
            let len = events.len();
            if let Some(n) = apply(p, s, Mode::Tso, l, None, Some(events)) {
                go(p, idx, &n, events, visit);
            }
            events.truncate(len);
        }
    }
    go(p, &idx, &s, &mut events, &mut visit);
}

/// Attacks that have a witness, found by checking every decomposition of
/// every computation with empty final buffers.
pub fn brute_force_witness_attacks(p: &Program) -> BTreeSet<Attack> {
    let mut out = BTreeSet::new();
    for_each_computation(p, |ev, s| {
        if !s.buffers_empty() || ev.is_empty() {
            return;
        }
        // The last event of a witness is a flush of the attacker.
        let last = ev[ev.len() - 1];
        if !last.is_flush() {
            return;
        }
        let ta = last.thread;
        for (st, e) in ev.iter().enumerate() {
            if e.thread != ta || e.access != lazy_tso::semantics::Access::Store {
                continue;
            }
            let Some(fl) = ev.iter().position(|f| f.is_flush() && f.thread == ta && f.id == e.id) else {
                continue;
            };
            for ld in st + 1..fl {
                let l = ev[ld];
                if l.thread != ta || l.access != lazy_tso::semantics::Access::Load {
                    continue;
                }
                let attack = Attack { thread: ta, store: e.instr, load: l.instr };
                if out.contains(&attack) {
                    continue;
                }
                let w = Witness { attack, events: ev.to_vec(), st, ld, fl };
                if verify_witness(p, &w).is_ok() {
                    out.insert(attack);
                }
            }
        }
    });
    out
}

/// Reachable states under `mode`, restricted to original control states
/// and to the valuation of the first `regs` registers.
pub fn restricted_states(
    p: &Program,
    mode: Mode,
    original_states: &[usize],
    regs: usize,
) -> BTreeSet<(Vec<u32>, Vec<u8>)> {
    let d = p.domain_size();
    let opts = lazy_tso::semantics::ReachOptions::default();
    lazy_tso::semantics::reachable_states(p, mode, opts)
        .unwrap()
        .into_iter()
        .filter(|s| s.buffers_empty())
        .filter(|s| s.pc.iter().zip(original_states).all(|(q, &n)| (*q as usize) < n))
        .map(|s| (s.pc.clone(), s.val[..d + regs].to_vec()))
        .collect()
}

/// Labels helper for hand-written computations.
pub fn exec(thread: usize, instr: usize) -> Label {
    Label::Exec { thread, instr }
}
