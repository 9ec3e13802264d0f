//! Breadth-first witness search.
//!
//! The search first explores the SC state space (the `τ1` prefix, shared by
//! all attacks). For every store `st` of every thread `t` it then starts a
//! breadth-first search from each prefix state where `t` can execute `st`:
//! in the *delay* phase `t` runs under TSO without flushing while other
//! threads run under SC; executing a load as `ld` moves to the *critical*
//! phase where only other threads run. A critical state is completed by
//! flushing the buffer of `t`, which yields `fl · τ4`.
//!
//! Condition 5 (`ld` reaches `τ3` and `fl` in happens-before) is tracked
//! exactly with a small summary. Let `s_1 … s_m` be the delayed stores and
//! `n_k = s_k` for `k ≤ m`, `n_{m+1} = ld`. Program order makes the sets
//! `Reach(n_k)` nested, so every event has a *level*: the largest `k` with
//! the event in `Reach(n_k)`, or 0. Edges into a new event come from
//! earlier events only, except that a flush of `s_k` pulls in `s_k` (the
//! `eq` edge), so a flush of `s_k` at level `j > level(s_k)` merges all
//! levels in `[level(s_k), j)` into `j`. Future edges only depend on the
//! level of each thread's last non-flush event, of the last flush to each
//! address, of loads of each address since that flush, and of each
//! buffered store; together with the least level seen in `τ3` this is the
//! whole summary. Every witness found is re-checked by `verify_witness`.

use super::{fence_free_reach, verify_witness, Attack, OracleError, OracleOptions, Witness};
use crate::program::{Command, InstrRef, Program};
use crate::semantics::{apply, enabled_labels, Event, Label, MachineState, Mode, ProgramIndex};
use indexmap::IndexSet;
use std::collections::BTreeMap;

const NONE: u8 = u8::MAX;
/// Levels are stored in a byte; longer delayed sequences are not explored.
const MAX_DELAYED: usize = 250;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Levels {
    /// Level of the last non-flush event of each thread.
    po: Vec<u8>,
    /// Level of the last flush to each address.
    last_flush: Vec<u8>,
    /// Highest level of the loads of each address since its last flush.
    loads_since: Vec<u8>,
    /// Level of each delayed store still in the buffer.
    buffered: Vec<u8>,
    /// Level of `ld` (`m + 1`); 0 before `ld` is executed.
    top: u8,
    /// Least level over events of `τ3`, `NONE` while `τ3` is empty.
    crit_min: u8,
    /// Level of `fl`, set while completing a critical state.
    fl: u8,
}

impl Levels {
    fn lift(&mut self, from: u8, to: u8) {
        let f = |x: &mut u8| {
            if *x != NONE && *x >= from && *x < to {
                *x = to;
            }
        };
        self.po
            .iter_mut()
            .chain(self.last_flush.iter_mut())
            .chain(self.loads_since.iter_mut())
            .chain(self.buffered.iter_mut())
            .for_each(f);
        f(&mut self.crit_min);
        f(&mut self.fl);
    }

    /// Records a load of `addr` by `t` that reads memory.
    fn load(&mut self, t: usize, addr: usize) -> u8 {
        let l = self.po[t].max(self.last_flush[addr]);
        self.loads_since[addr] = self.loads_since[addr].max(l);
        self.po[t] = l;
        l
    }

    /// Records a store of `t` to `addr` immediately followed by its flush.
    fn store_flush(&mut self, t: usize, addr: usize) -> u8 {
        let l = self.po[t]
            .max(self.last_flush[addr])
            .max(self.loads_since[addr]);
        self.po[t] = l;
        self.last_flush[addr] = l;
        self.loads_since[addr] = 0;
        l
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Node {
    m: MachineState,
    /// The `ld` instruction in the critical phase, `u32::MAX` before.
    ld: u32,
    lv: Levels,
    /// Attacker instructions since `st`, tracked only while blocking.
    sigma: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
enum Origin {
    Seed(usize),
    Node(usize),
}

#[derive(Clone, Copy, Debug)]
struct Parent {
    from: Origin,
    label: Label,
    as_ld: bool,
}

/// SC state space with breadth-first parents and depths.
struct Prefix {
    states: IndexSet<MachineState>,
    parents: Vec<Option<(usize, Label)>>,
    depth: Vec<u32>,
}

fn sc_prefix(p: &Program, idx: &ProgramIndex, budget: Option<usize>) -> Result<Prefix, OracleError> {
    let mut pre = Prefix {
        states: IndexSet::new(),
        parents: vec![None],
        depth: vec![0],
    };
    pre.states.insert(MachineState::initial(p));
    let mut labels = Vec::new();
    let mut i = 0;
    while i < pre.states.len() {
        let s = pre.states[i].clone();
        labels.clear();
        enabled_labels(p, idx, &s, Mode::Sc, &mut labels);
        for &l in &labels {
            if let Some(n) = apply(p, &s, Mode::Sc, l, None, None) {
                if pre.states.insert(n) {
                    pre.parents.push(Some((i, l)));
                    pre.depth.push(pre.depth[i] + 1);
                    if budget.is_some_and(|b| pre.states.len() > b) {
                        return Err(OracleError::BudgetExhausted(budget.unwrap_or(0)));
                    }
                }
            }
        }
        i += 1;
    }
    Ok(pre)
}

/// Result of [`find_witnesses`].
#[derive(Clone, Debug, Default)]
pub struct WitnessSearch {
    /// Witnesses for distinct attacks, in canonical attack order.
    pub witnesses: Vec<Witness>,
    /// True if some candidate was skipped because its sequence was blocked.
    pub skipped_blocked: bool,
}

/// Predicate on attacker sequences that the search must skip.
pub type Blocked<'a> = &'a dyn Fn(&[InstrRef]) -> bool;

struct Ctx<'a> {
    p: &'a Program,
    idx: ProgramIndex,
    prefix: Prefix,
    opts: OracleOptions,
    blocked: Option<Blocked<'a>>,
    nodes_used: usize,
    bound_hit: bool,
    skipped_blocked: bool,
}

/// Finds witnesses for up to `max` distinct attacks, taking attacks in
/// canonical order and, per attack, the first witness in breadth-first
/// order. With `blocked`, candidates whose attacker sequence is blocked are
/// skipped and the search looks for other sequences instead.
pub fn find_witnesses(
    p: &Program,
    opts: OracleOptions,
    max: usize,
    blocked: Option<Blocked<'_>>,
) -> Result<WitnessSearch, OracleError> {
    if !p.is_acyclic() && opts.buffer_bound.is_none() {
        return Err(OracleError::BoundRequired);
    }
    let idx = ProgramIndex::new(p);
    let prefix = sc_prefix(p, &idx, opts.state_budget)?;
    let mut ctx = Ctx {
        p,
        nodes_used: prefix.states.len(),
        idx,
        prefix,
        opts,
        blocked,
        bound_hit: false,
        skipped_blocked: false,
    };
    let mut witnesses = Vec::new();
    'outer: for ta in 0..p.threads.len() {
        let reach = fence_free_reach(p, ta);
        for (st, ins) in p.threads[ta].instructions.iter().enumerate() {
            if witnesses.len() >= max {
                break 'outer;
            }
            if ins.cmd.is_store() {
                let cap = max - witnesses.len();
                witnesses.extend(search_store(&mut ctx, &reach, ta, st, cap)?);
            }
        }
    }
    if witnesses.is_empty() && ctx.bound_hit {
        return Err(OracleError::BoundExhausted(opts.buffer_bound.unwrap_or(MAX_DELAYED)));
    }
    Ok(WitnessSearch {
        witnesses,
        skipped_blocked: ctx.skipped_blocked,
    })
}

fn search_store(
    ctx: &mut Ctx<'_>,
    reach: &[Vec<bool>],
    ta: usize,
    st: usize,
    cap: usize,
) -> Result<Vec<Witness>, OracleError> {
    let p = ctx.p;
    let thread = &p.threads[ta];
    let d = p.domain_size();
    let n_threads = p.threads.len();
    // States from which the attacker can still reach some load.
    let useful: Vec<bool> = (0..thread.states.len())
        .map(|q| {
            thread
                .instructions
                .iter()
                .any(|i| i.cmd.is_load() && reach[q][i.src as usize])
        })
        .collect();
    let st_ins = &thread.instructions[st];
    if !useful[st_ins.dst as usize] {
        return Ok(Vec::new());
    }
    let tracking = ctx.blocked.is_some();
    let seeds: Vec<usize> = (0..ctx.prefix.states.len())
        .filter(|&i| ctx.prefix.states[i].pc[ta] == st_ins.src)
        .collect();
    let mut nodes: IndexSet<Node> = IndexSet::new();
    let mut parents: Vec<Parent> = Vec::new();
    let mut depth: Vec<u32> = Vec::new();
    // First witness node per load instruction.
    let mut found: BTreeMap<u32, usize> = BTreeMap::new();
    let limit = |found: &BTreeMap<u32, usize>| -> u32 {
        if found.len() >= cap {
            *found.keys().nth(cap - 1).unwrap_or(&u32::MAX)
        } else {
            u32::MAX
        }
    };
    let push = |nodes: &mut IndexSet<Node>,
                    parents: &mut Vec<Parent>,
                    depth: &mut Vec<u32>,
                    node: Node,
                    parent: Parent,
                    dep: u32,
                    used: &mut usize|
     -> Result<(), OracleError> {
        if nodes.insert(node) {
            parents.push(parent);
            depth.push(dep);
            *used += 1;
            if let Some(b) = ctx.opts.state_budget {
                if *used > b {
                    return Err(OracleError::BudgetExhausted(b));
                }
            }
        }
        Ok(())
    };
    let mut used = ctx.nodes_used;
    let mut next_seed = 0;
    let mut head = 0;
    let mut labels = Vec::new();
    let mut events: Vec<Event> = Vec::new();
    loop {
        // Seeds enter the queue in depth order, keeping the queue sorted.
        let horizon = if head < nodes.len() {
            depth[head] + 1
        } else if next_seed < seeds.len() {
            ctx.prefix.depth[seeds[next_seed]] + 1
        } else {
            break;
        };
        while next_seed < seeds.len() && ctx.prefix.depth[seeds[next_seed]] < horizon {
            let si = seeds[next_seed];
            next_seed += 1;
            let s = &ctx.prefix.states[si];
            let label = Label::Exec { thread: ta, instr: st };
            let Some(m) = apply(p, s, Mode::Tso, label, ctx.opts.buffer_bound, None) else {
                ctx.bound_hit |= ctx.opts.buffer_bound.is_some();
                continue;
            };
            let mut po = vec![0; n_threads];
            po[ta] = 1;
            let node = Node {
                m,
                ld: u32::MAX,
                lv: Levels {
                    po,
                    last_flush: vec![0; d],
                    loads_since: vec![0; d],
                    buffered: vec![1],
                    top: 0,
                    crit_min: NONE,
                    fl: NONE,
                },
                sigma: if tracking { vec![st as u32] } else { Vec::new() },
            };
            let parent = Parent {
                from: Origin::Seed(si),
                label,
                as_ld: false,
            };
            let dep = ctx.prefix.depth[si] + 1;
            push(&mut nodes, &mut parents, &mut depth, node, parent, dep, &mut used)?;
        }
        if head >= nodes.len() {
            continue;
        }
        let node = nodes[head].clone();
        let here = head;
        let dep = depth[head] + 1;
        head += 1;
        let critical = node.ld != u32::MAX;
        if critical {
            if found.contains_key(&node.ld) || node.ld >= limit(&found) {
                continue;
            }
            if completes(&node, ta) {
                found.insert(node.ld, here);
                continue;
            }
        }
        for t in 0..n_threads {
            labels.clear();
            if t == ta {
                if critical {
                    continue;
                }
                for &i in ctx.idx.outgoing(ta, node.m.pc[ta]) {
                    let ins = &thread.instructions[i];
                    if ins.cmd.is_fence() {
                        continue;
                    }
                    let label = Label::Exec { thread: ta, instr: i };
                    if let Command::Load { addr, .. } = &ins.cmd {
                        // Executing the load as `ld`: it must read memory.
                        let a = addr.eval(d, &|r| node.m.val[d + r.0 as usize]);
                        let buffered = node.m.buf[ta].iter().any(|e| e.addr == a);
                        if !buffered && (i as u32) < limit(&found) && !found.contains_key(&(i as u32)) {
                            let mut sigma = node.sigma.clone();
                            sigma.push(i as u32);
                            let is_blocked = ctx.blocked.is_some_and(|b| {
                                let refs: Vec<InstrRef> = sigma
                                    .iter()
                                    .map(|&index| InstrRef { thread: ta, index: index as usize })
                                    .collect();
                                b(&refs)
                            });
                            if is_blocked {
                                ctx.skipped_blocked = true;
                            } else if let Some(m) = apply(p, &node.m, Mode::Tso, label, None, None) {
                                let mut lv = node.lv.clone();
                                let top = (lv.buffered.len() + 1) as u8;
                                lv.top = top;
                                lv.po[ta] = top;
                                lv.loads_since[a as usize] = top;
                                let next = Node {
                                    m,
                                    ld: i as u32,
                                    lv,
                                    sigma: Vec::new(),
                                };
                                let parent = Parent {
                                    from: Origin::Node(here),
                                    label,
                                    as_ld: true,
                                };
                                push(&mut nodes, &mut parents, &mut depth, next, parent, dep, &mut used)?;
                            }
                        }
                    }
                    if !useful[ins.dst as usize] {
                        continue;
                    }
                    if ins.cmd.is_store() && node.m.buf[ta].len() >= MAX_DELAYED {
                        ctx.bound_hit = true;
                        continue;
                    }
                    events.clear();
                    let Some(m) = apply(p, &node.m, Mode::Tso, label, ctx.opts.buffer_bound, Some(&mut events)) else {
                        if ins.cmd.is_store() && ctx.opts.buffer_bound.is_some() {
                            ctx.bound_hit = true;
                        }
                        continue;
                    };
                    let mut lv = node.lv.clone();
                    match &ins.cmd {
                        Command::Load { .. } => {
                            let a = events[0].addr.unwrap_or(0);
                            let early = node.m.buf[ta].iter().any(|e| e.addr == a);
                            if !early {
                                lv.load(ta, a as usize);
                            }
                        }
                        Command::Store { .. } => {
                            let k = (lv.buffered.len() + 1) as u8;
                            lv.buffered.push(k);
                            lv.po[ta] = k;
                        }
                        _ => {}
                    }
                    let mut sigma = Vec::new();
                    if tracking {
                        sigma = node.sigma.clone();
                        sigma.push(i as u32);
                    }
                    let next = Node {
                        m,
                        ld: u32::MAX,
                        lv,
                        sigma,
                    };
                    let parent = Parent {
                        from: Origin::Node(here),
                        label,
                        as_ld: false,
                    };
                    push(&mut nodes, &mut parents, &mut depth, next, parent, dep, &mut used)?;
                }
            } else {
                let list = ctx.idx.outgoing(t, node.m.pc[t]);
                labels.extend(list.iter().map(|&instr| Label::Exec { thread: t, instr }));
                for &label in &labels {
                    events.clear();
                    let Some(m) = apply(p, &node.m, Mode::Sc, label, None, Some(&mut events)) else {
                        continue;
                    };
                    let Label::Exec { instr, .. } = label else { unreachable!() };
                    let mut lv = node.lv.clone();
                    let level = match &p.threads[t].instructions[instr].cmd {
                        Command::Load { .. } => lv.load(t, events[0].addr.unwrap_or(0) as usize),
                        Command::Store { .. } => lv.store_flush(t, events[0].addr.unwrap_or(0) as usize),
                        _ => lv.po[t],
                    };
                    if critical {
                        lv.crit_min = lv.crit_min.min(level);
                    }
                    let next = Node {
                        m,
                        ld: node.ld,
                        lv,
                        sigma: node.sigma.clone(),
                    };
                    let parent = Parent {
                        from: Origin::Node(here),
                        label,
                        as_ld: false,
                    };
                    push(&mut nodes, &mut parents, &mut depth, next, parent, dep, &mut used)?;
                }
            }
        }
    }
    ctx.nodes_used = used;
    let mut out = Vec::new();
    for (&ld, &n) in found.iter().take(cap) {
        let w = reconstruct(ctx, &nodes, &parents, ta, st, ld as usize, n);
        if let Err(e) = verify_witness(p, &w) {
            panic!("witness search produced an invalid witness: {e}\n{}", w.dump(p));
        }
        out.push(w);
    }
    Ok(out)
}

/// Completes a critical state with `fl · τ4` and evaluates condition 5.
fn completes(node: &Node, ta: usize) -> bool {
    let mut lv = node.lv.clone();
    for (k, e) in node.m.buf[ta].iter().enumerate() {
        let a = e.addr as usize;
        let b = lv.buffered[k];
        let l = b.max(lv.last_flush[a]).max(lv.loads_since[a]);
        if l > b {
            lv.lift(b, l);
        }
        lv.last_flush[a] = l;
        lv.loads_since[a] = 0;
        if k == 0 {
            lv.fl = l;
        }
    }
    lv.fl == lv.top && (lv.crit_min == NONE || lv.crit_min == lv.top)
}

fn reconstruct(
    ctx: &Ctx<'_>,
    nodes: &IndexSet<Node>,
    parents: &[Parent],
    ta: usize,
    st: usize,
    ld: usize,
    target: usize,
) -> Witness {
    let p = ctx.p;
    let mut tail: Vec<(Label, bool)> = Vec::new();
    let mut cur = target;
    let seed = loop {
        let par = parents[cur];
        tail.push((par.label, par.as_ld));
        match par.from {
            Origin::Node(n) => cur = n,
            Origin::Seed(s) => break s,
        }
    };
    tail.reverse();
    let mut head_labels = Vec::new();
    let mut c = seed;
    while let Some((prev, l)) = ctx.prefix.parents[c] {
        head_labels.push(l);
        c = prev;
    }
    head_labels.reverse();
    let mut events = Vec::new();
    let mut s = MachineState::initial(p);
    for l in head_labels {
        s = apply(p, &s, Mode::Sc, l, None, Some(&mut events)).expect("prefix replays");
    }
    let st_pos = events.len();
    let mut ld_pos = 0;
    for (l, as_ld) in tail {
        let mode = match l {
            Label::Exec { thread, .. } | Label::Flush { thread } if thread == ta => Mode::Tso,
            _ => Mode::Sc,
        };
        if as_ld {
            ld_pos = events.len();
        }
        s = apply(p, &s, mode, l, None, Some(&mut events)).expect("search path replays");
    }
    let fl_pos = events.len();
    while !s.buf[ta].is_empty() {
        s = apply(p, &s, Mode::Tso, Label::Flush { thread: ta }, None, Some(&mut events))
            .expect("flush replays");
    }
    debug_assert_eq!(nodes.len(), parents.len());
    Witness {
        attack: Attack {
            thread: ta,
            store: st,
            load: ld,
        },
        events,
        st: st_pos,
        ld: ld_pos,
        fl: fl_pos,
    }
}
