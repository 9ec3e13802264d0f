//! Operational semantics under SC and TSO, and explicit-state reachability.
//!
//! A machine state holds one control state per thread, a valuation of the
//! `D` memory cells and all registers, and one FIFO store buffer per thread.
//! Under TSO a store enters the buffer of its thread and reaches memory by a
//! separate flush step; loads read the newest buffered store to their
//! address if there is one. Under SC a store and its flush happen in one
//! atomic step and buffers stay empty.

use crate::program::{Command, GoalSpec, Location, Program, RegId, StateId, Value};
use indexmap::IndexSet;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use thiserror::Error;

/// Memory model used for a step or an exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Sc,
    Tso,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sc => "sc",
            Mode::Tso => "tso",
        })
    }
}

/// A buffered store. `id` and `instr` identify the store event; they are
/// bookkeeping and do not take part in state equality.
#[derive(Clone, Copy, Debug)]
pub struct BufEntry {
    pub id: u32,
    pub instr: u32,
    pub addr: Value,
    pub value: Value,
}

/// A machine state. Equality and hashing ignore event counters and event
/// ids in buffers, so that states reached by different computations with
/// the same observable content coincide.
#[derive(Clone, Debug)]
pub struct MachineState {
    pub pc: Vec<StateId>,
    /// Memory cells `0..D` followed by all registers in global order.
    pub val: Vec<Value>,
    /// Per-thread store buffers, oldest entry first.
    pub buf: Vec<Vec<BufEntry>>,
    /// Per-thread event counters.
    pub ec: Vec<u32>,
}

impl PartialEq for MachineState {
    fn eq(&self, other: &Self) -> bool {
        self.pc == other.pc
            && self.val == other.val
            && self.buf.len() == other.buf.len()
            && self.buf.iter().zip(&other.buf).all(|(a, b)| {
                a.len() == b.len()
                    && a
                        .iter()
                        .zip(b)
                        .all(|(x, y)| x.addr == y.addr && x.value == y.value)
            })
    }
}

impl Eq for MachineState {}

impl Hash for MachineState {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.pc.hash(h);
        self.val.hash(h);
        for b in &self.buf {
            b.len().hash(h);
            for e in b {
                e.addr.hash(h);
                e.value.hash(h);
            }
        }
    }
}

impl MachineState {
    /// All threads at their init states, every location zero, empty buffers.
    pub fn initial(p: &Program) -> Self {
        MachineState {
            pc: p.threads.iter().map(|t| t.init).collect(),
            val: vec![0; p.domain_size() + p.registers.len()],
            buf: vec![Vec::new(); p.threads.len()],
            ec: vec![0; p.threads.len()],
        }
    }

    pub fn buffers_empty(&self) -> bool {
        self.buf.iter().all(Vec::is_empty)
    }

    /// Value of a location.
    pub fn get(&self, p: &Program, loc: Location) -> Value {
        match loc {
            Location::Addr(a) => self.val[a as usize],
            Location::Reg(r) => self.val[p.domain_size() + r.0 as usize],
        }
    }
}

/// How an event accesses memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Access {
    Load,
    Store,
    Flush,
    Fence,
    Local,
}

/// One event of a computation. A flush event carries the id and the
/// instruction of the store event it commits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub thread: usize,
    pub id: u32,
    pub instr: usize,
    pub access: Access,
    pub addr: Option<Value>,
}

impl Event {
    pub fn is_flush(&self) -> bool {
        self.access == Access::Flush
    }

    /// Renders the event as `thread:id` with a `:flush` suffix for flushes.
    pub fn label(&self, p: &Program) -> String {
        let t = &p.threads[self.thread].name;
        if self.is_flush() {
            format!("{t}:{}:flush", self.id)
        } else {
            format!("{t}:{}", self.id)
        }
    }
}

/// A transition label: run an instruction, or flush the oldest buffered
/// store of a thread. Under SC a store label stands for store plus flush.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Exec { thread: usize, instr: usize },
    Flush { thread: usize },
}

/// A finite computation: its events and the state it reaches.
#[derive(Clone, Debug)]
pub struct Computation {
    pub events: Vec<Event>,
    pub last: MachineState,
}

/// Outgoing instructions of every control state, in canonical rule order.
#[derive(Clone, Debug)]
pub struct ProgramIndex {
    /// `out[t][q]` lists the instructions leaving `q`, loads first, then
    /// stores, fences, assignments and assumptions; declaration order
    /// within each group.
    out: Vec<Vec<Vec<usize>>>,
}

fn rule_rank(c: &Command) -> u8 {
    match c {
        Command::Load { .. } => 0,
        Command::Store { .. } => 1,
        Command::Fence => 3,
        Command::Assign { .. } => 4,
        Command::Assume(_) => 5,
    }
}

impl ProgramIndex {
    pub fn new(p: &Program) -> Self {
        let out = p
            .threads
            .iter()
            .map(|t| {
                let mut per_state = vec![Vec::new(); t.states.len()];
                for (i, ins) in t.instructions.iter().enumerate() {
                    per_state[ins.src as usize].push(i);
                }
                for list in &mut per_state {
                    list.sort_by_key(|&i| (rule_rank(&t.instructions[i].cmd), i));
                }
                per_state
            })
            .collect();
        ProgramIndex { out }
    }

    pub fn outgoing(&self, thread: usize, q: StateId) -> &[usize] {
        &self.out[thread][q as usize]
    }
}

fn eval(p: &Program, s: &MachineState, e: &crate::program::Expr) -> Value {
    let d = p.domain_size();
    e.eval(d, &|r| s.val[d + r.0 as usize])
}

/// Applies a label to a state. Returns `None` if the label is not enabled.
/// When `events` is given, the events of the step are appended to it.
/// `buffer_bound` disables TSO stores into a full buffer.
pub fn apply(
    p: &Program,
    s: &MachineState,
    mode: Mode,
    label: Label,
    buffer_bound: Option<usize>,
    events: Option<&mut Vec<Event>>,
) -> Option<MachineState> {
    let d = p.domain_size();
    match label {
        Label::Flush { thread } => {
            if mode == Mode::Sc || s.buf[thread].is_empty() {
                return None;
            }
            let mut n = s.clone();
            let e = n.buf[thread].remove(0);
            n.val[e.addr as usize] = e.value;
            if let Some(ev) = events {
                ev.push(Event {
                    thread,
                    id: e.id,
                    instr: e.instr as usize,
                    access: Access::Flush,
                    addr: Some(e.addr),
                });
            }
            Some(n)
        }
        Label::Exec { thread, instr } => {
            let ins = &p.threads[thread].instructions[instr];
            if s.pc[thread] != ins.src {
                return None;
            }
            let id = s.ec[thread];
            let out = |access, addr| Event {
                thread,
                id,
                instr,
                access,
                addr,
            };
            let (n, evs): (MachineState, [Option<Event>; 2]) = match &ins.cmd {
                Command::Load { reg, addr } => {
                    let a = eval(p, s, addr);
                    let v = s.buf[thread]
                        .iter()
                        .rev()
                        .find(|e| e.addr == a)
                        .map_or(s.val[a as usize], |e| e.value);
                    let mut n = s.clone();
                    n.val[d + reg.0 as usize] = v;
                    (n, [Some(out(Access::Load, Some(a))), None])
                }
                Command::Store { addr, value } => {
                    let a = eval(p, s, addr);
                    let v = eval(p, s, value);
                    let mut n = s.clone();
                    match mode {
                        Mode::Sc => {
                            n.val[a as usize] = v;
                            let st = out(Access::Store, Some(a));
                            let fl = out(Access::Flush, Some(a));
                            (n, [Some(st), Some(fl)])
                        }
                        Mode::Tso => {
                            if buffer_bound.is_some_and(|b| s.buf[thread].len() >= b) {
                                return None;
                            }
                            n.buf[thread].push(BufEntry {
                                id,
                                instr: instr as u32,
                                addr: a,
                                value: v,
                            });
                            (n, [Some(out(Access::Store, Some(a))), None])
                        }
                    }
                }
                Command::Fence => {
                    if !s.buf[thread].is_empty() {
                        return None;
                    }
                    (s.clone(), [Some(out(Access::Fence, None)), None])
                }
                Command::Assign { reg, expr } => {
                    let v = eval(p, s, expr);
                    let mut n = s.clone();
                    n.val[d + reg.0 as usize] = v;
                    (n, [Some(out(Access::Local, None)), None])
                }
                Command::Assume(e) => {
                    if eval(p, s, e) == 0 {
                        return None;
                    }
                    (s.clone(), [Some(out(Access::Local, None)), None])
                }
            };
            let mut n = n;
            n.pc[thread] = ins.dst;
            n.ec[thread] += 1;
            if let Some(ev) = events {
                ev.extend(evs.into_iter().flatten());
            }
            Some(n)
        }
    }
}

/// Enabled labels of a state in canonical order: threads in declaration
/// order; per thread loads, stores, flush, fences, assignments, assumptions.
pub fn enabled_labels(
    p: &Program,
    idx: &ProgramIndex,
    s: &MachineState,
    mode: Mode,
    out: &mut Vec<Label>,
) {
    for t in 0..p.threads.len() {
        let list = idx.outgoing(t, s.pc[t]);
        let split = list
            .iter()
            .position(|&i| rule_rank(&p.threads[t].instructions[i].cmd) > 1)
            .unwrap_or(list.len());
        out.extend(list[..split].iter().map(|&instr| Label::Exec { thread: t, instr }));
        if mode == Mode::Tso && !s.buf[t].is_empty() {
            out.push(Label::Flush { thread: t });
        }
        out.extend(list[split..].iter().map(|&instr| Label::Exec { thread: t, instr }));
    }
}

/// All successors of a state with their events, in canonical order.
pub fn step(p: &Program, s: &MachineState, mode: Mode) -> Vec<(Vec<Event>, MachineState)> {
    let idx = ProgramIndex::new(p);
    let mut labels = Vec::new();
    enabled_labels(p, &idx, s, mode, &mut labels);
    labels
        .into_iter()
        .filter_map(|l| {
            let mut ev = Vec::new();
            apply(p, s, mode, l, None, Some(&mut ev)).map(|n| (ev, n))
        })
        .collect()
}

/// Successors under TSO.
pub fn step_tso(p: &Program, s: &MachineState) -> Vec<(Vec<Event>, MachineState)> {
    step(p, s, Mode::Tso)
}

/// Successors under SC; a store step carries its store and flush events.
pub fn step_sc(p: &Program, s: &MachineState) -> Vec<(Vec<Event>, MachineState)> {
    step(p, s, Mode::Sc)
}

/// True if `s` satisfies the goal: control and value constraints hold and
/// all buffers are empty.
pub fn is_goal(p: &Program, goal: &GoalSpec, s: &MachineState) -> bool {
    s.buffers_empty()
        && goal.pcs.iter().all(|(t, qs)| qs.contains(&s.pc[*t]))
        && goal.values.iter().all(|(loc, v)| s.get(p, *loc) == *v)
}

/// Options of an explicit-state exploration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReachOptions {
    /// Maximum number of distinct states to visit.
    pub state_budget: Option<usize>,
    /// Store-buffer capacity under TSO. Required for cyclic programs,
    /// where buffers can grow without bound; a bound under-approximates.
    pub buffer_bound: Option<usize>,
    /// Partial-order reduction of thread-local steps.
    pub por: bool,
    /// Set registers to zero while they are dead, that is, when no path
    /// from the thread's control state reads them before writing them.
    /// Registers named by the goal stay live. The goal verdict and the
    /// returned trace are unaffected; fewer states are visited.
    pub reset_dead_registers: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("state budget exhausted after {explored} states")]
    BudgetExhausted { explored: usize },
    #[error("TSO exploration of a cyclic program needs a buffer bound")]
    UnboundedBuffer,
}

/// Result of [`reach`].
#[derive(Clone, Debug)]
pub struct ReachResult {
    pub reachable: bool,
    /// A computation of minimal length reaching the goal, if reachable.
    pub trace: Option<Computation>,
    pub states_explored: usize,
    pub transitions: usize,
}

/// Registers of each thread that are dead at each of its control states.
#[derive(Clone, Debug)]
pub struct DeadRegisters {
    dead: Vec<Vec<Vec<RegId>>>,
}

impl DeadRegisters {
    /// Backward may-liveness over each thread's control-flow graph.
    pub fn new(p: &Program) -> Self {
        let nregs = p.registers.len();
        let mut in_goal = vec![false; nregs];
        for (loc, _) in &p.goal.values {
            if let Location::Reg(r) = loc {
                in_goal[r.0 as usize] = true;
            }
        }
        let dead = p
            .threads
            .iter()
            .enumerate()
            .map(|(t, th)| {
                let mut live = vec![vec![false; nregs]; th.states.len()];
                let mut changed = true;
                while changed {
                    changed = false;
                    for ins in &th.instructions {
                        let mut row = live[ins.dst as usize].clone();
                        match &ins.cmd {
                            Command::Load { reg, .. } | Command::Assign { reg, .. } => {
                                row[reg.0 as usize] = false;
                            }
                            _ => {}
                        }
                        let mut reads = |r: RegId| row[r.0 as usize] = true;
                        match &ins.cmd {
                            Command::Load { addr, .. } => addr.for_each_reg(&mut reads),
                            Command::Assign { expr, .. } => expr.for_each_reg(&mut reads),
                            c => c.for_each_reg(&mut reads),
                        }
                        let src = &mut live[ins.src as usize];
                        for (l, r) in src.iter_mut().zip(&row) {
                            if *r && !*l {
                                *l = true;
                                changed = true;
                            }
                        }
                    }
                }
                live.iter()
                    .map(|row| {
                        p.thread_registers(t)
                            .filter(|r| !row[r.0 as usize] && !in_goal[r.0 as usize])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        DeadRegisters { dead }
    }

    /// Zeroes the registers of `thread` that are dead at its current state.
    pub fn reset(&self, p: &Program, s: &mut MachineState, thread: usize) {
        let d = p.domain_size();
        for r in &self.dead[thread][s.pc[thread] as usize] {
            s.val[d + r.0 as usize] = 0;
        }
    }
}

struct Exploration {
    states: IndexSet<MachineState>,
    parents: Vec<(u32, Label)>,
    goal: Option<usize>,
    transitions: usize,
}

/// Picks the local instructions of one thread that can be explored alone:
/// the thread must leave its current state to satisfy the goal, and all of
/// its instructions there are assignments or assumptions, which commute with
/// every step of other threads and with flushes.
fn ample(p: &Program, idx: &ProgramIndex, s: &MachineState) -> Option<usize> {
    p.goal.pcs.iter().find_map(|(t, qs)| {
        let t = *t;
        if qs.contains(&s.pc[t]) {
            return None;
        }
        let list = idx.outgoing(t, s.pc[t]);
        let local = !list.is_empty()
            && list.iter().all(|&i| {
                matches!(
                    p.threads[t].instructions[i].cmd,
                    Command::Assign { .. } | Command::Assume(_)
                )
            });
        local.then_some(t)
    })
}

fn explore(
    p: &Program,
    mode: Mode,
    opts: ReachOptions,
    stop_at_goal: bool,
) -> Result<Exploration, ReachError> {
    if mode == Mode::Tso && opts.buffer_bound.is_none() && !p.is_acyclic() {
        return Err(ReachError::UnboundedBuffer);
    }
    let idx = ProgramIndex::new(p);
    let dead = opts.reset_dead_registers.then(|| DeadRegisters::new(p));
    let mut ex = Exploration {
        states: IndexSet::new(),
        parents: Vec::new(),
        goal: None,
        transitions: 0,
    };
    let init = MachineState::initial(p);
    let init_goal = is_goal(p, &p.goal, &init);
    ex.states.insert(init);
    ex.parents.push((u32::MAX, Label::Flush { thread: 0 }));
    if init_goal {
        ex.goal = Some(0);
        if stop_at_goal {
            return Ok(ex);
        }
    }
    let mut labels = Vec::new();
    let mut succ: Vec<(Label, MachineState)> = Vec::new();
    let mut next = 0;
    while next < ex.states.len() {
        let s = ex.states[next].clone();
        labels.clear();
        succ.clear();
        let reduced = if opts.por { ample(p, &idx, &s) } else { None };
        match reduced {
            Some(t) => {
                for &instr in idx.outgoing(t, s.pc[t]) {
                    let l = Label::Exec { thread: t, instr };
                    if let Some(n) = apply(p, &s, mode, l, opts.buffer_bound, None) {
                        succ.push((l, n));
                    }
                }
                // Cycle proviso: fall back to full expansion whenever the
                // reduced set is empty or closes a cycle.
                if succ.is_empty() || succ.iter().any(|(_, n)| ex.states.contains(n)) {
                    succ.clear();
                    enabled_labels(p, &idx, &s, mode, &mut labels);
                }
            }
            None => enabled_labels(p, &idx, &s, mode, &mut labels),
        }
        for &l in &labels {
            if let Some(n) = apply(p, &s, mode, l, opts.buffer_bound, None) {
                succ.push((l, n));
            }
        }
        for (l, mut n) in succ.drain(..) {
            ex.transitions += 1;
            if let (Some(dead), Label::Exec { thread, .. }) = (&dead, l) {
                dead.reset(p, &mut n, thread);
            }
            let goal = is_goal(p, &p.goal, &n);
            let (i, fresh) = ex.states.insert_full(n);
            if fresh {
                ex.parents.push((next as u32, l));
                if goal && ex.goal.is_none() {
                    ex.goal = Some(i);
                    if stop_at_goal {
                        return Ok(ex);
                    }
                }
                if opts.state_budget.is_some_and(|b| ex.states.len() > b) {
                    return Err(ReachError::BudgetExhausted {
                        explored: ex.states.len(),
                    });
                }
            }
        }
        next += 1;
    }
    Ok(ex)
}

fn trace_to(p: &Program, ex: &Exploration, mode: Mode, target: usize) -> Computation {
    let mut labels = Vec::new();
    let mut cur = target;
    while ex.parents[cur].0 != u32::MAX {
        labels.push(ex.parents[cur].1);
        cur = ex.parents[cur].0 as usize;
    }
    labels.reverse();
    let mut events = Vec::new();
    let mut s = MachineState::initial(p);
    for l in labels {
        s = apply(p, &s, mode, l, None, Some(&mut events)).expect("trace label is enabled");
    }
    Computation { events, last: s }
}

/// Breadth-first reachability of the program goal.
///
/// Successors are generated in canonical order, so the visited-state count
/// and the returned minimal-length trace are deterministic.
pub fn reach(p: &Program, mode: Mode, opts: ReachOptions) -> Result<ReachResult, ReachError> {
    let ex = explore(p, mode, opts, true)?;
    Ok(ReachResult {
        reachable: ex.goal.is_some(),
        trace: ex.goal.map(|g| trace_to(p, &ex, mode, g)),
        states_explored: ex.states.len(),
        transitions: ex.transitions,
    })
}

/// All reachable states (no partial-order reduction).
pub fn reachable_states(
    p: &Program,
    mode: Mode,
    opts: ReachOptions,
) -> Result<Vec<MachineState>, ReachError> {
    let opts = ReachOptions { por: false, ..opts };
    Ok(explore(p, mode, opts, false)?.states.into_iter().collect())
}

/// Reachable states that satisfy `keep`, projected by `project`.
pub fn reachable_projection<T: Eq + Hash>(
    p: &Program,
    mode: Mode,
    opts: ReachOptions,
    project: impl Fn(&MachineState) -> Option<T>,
) -> Result<HashSet<T>, ReachError> {
    Ok(reachable_states(p, mode, opts)?
        .iter()
        .filter_map(project)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("event {index} is not enabled")]
    NotEnabled { index: usize },
    #[error("event {index} does not match the step it replays")]
    Mismatch { index: usize },
}

/// Replays a sequence of events under TSO from the initial state.
pub fn replay(p: &Program, events: &[Event]) -> Result<MachineState, ReplayError> {
    let mut s = MachineState::initial(p);
    for (index, e) in events.iter().enumerate() {
        let label = if e.is_flush() {
            Label::Flush { thread: e.thread }
        } else {
            Label::Exec {
                thread: e.thread,
                instr: e.instr,
            }
        };
        let mut produced = Vec::new();
        s = apply(p, &s, Mode::Tso, label, None, Some(&mut produced))
            .ok_or(ReplayError::NotEnabled { index })?;
        if produced.as_slice() != [*e] {
            return Err(ReplayError::Mismatch { index });
        }
    }
    Ok(s)
}
