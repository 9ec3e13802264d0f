//! The extension `R ⊕ σ`: a program in which the attacking thread can run
//! `σ` under SC while keeping its stores in auxiliary registers, which is
//! how TSO would keep them in the store buffer.
//!
//! For `σ = inst_1 … inst_n` of thread `t` the construction adds fresh
//! states `q̂_1 … q̂_n` (with `q̂_0 = src(inst_1)`) and registers
//! `ar_j`, `vr_j` for the `j`-th store of `σ`:
//!
//! * a store `a <- v` becomes `ar_c := a; vr_c := v`,
//! * a load `r <- e` first checks the simulated buffer from the newest
//!   entry down (`assume ar_j == e; r := vr_j`), and loads from memory only
//!   after every check failed,
//! * assignments and assumptions are copied,
//! * from `q̂_n` the stores are replayed in order and control returns to
//!   `dst(inst_n)`,
//! * from every `q̂_i` with `i < n`, each instruction of `R` leaving
//!   `dst(inst_i)` other than `inst_{i+1}` can run after replaying the
//!   buffered stores,
//! * from `q̂_1` and from `q̂_i` after a load `inst_i`, the thread can flush
//!   the first store, fence, flush the others and return to `dst(inst_i)`.
//!
//! In delete mode `inst_1` is removed, so the oracle cannot find the same
//! sequence again.

use crate::program::{BinOp, Command, Expr, InstrRef, Program, RegId, StateId};
use std::collections::HashMap;
use thiserror::Error;

/// What an instruction of an extended program stands for in an earlier
/// program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Image {
    /// The instruction itself, or the first instruction of its emulation.
    Instr(String),
    /// A store that makes a buffered store visible.
    Flush(String),
    /// Bookkeeping.
    None,
}

/// Maps instruction ids of an extended program to the instructions they
/// stand for in an earlier program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProjectionMap {
    map: HashMap<String, Image>,
}

impl ProjectionMap {
    /// The identity on the instructions of `p`.
    pub fn identity(p: &Program) -> Self {
        let map = p
            .threads
            .iter()
            .flat_map(|t| &t.instructions)
            .map(|i| (i.id.clone(), Image::Instr(i.id.clone())))
            .collect();
        ProjectionMap { map }
    }

    /// Builds a map from `(id, image)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Image)>) -> Self {
        ProjectionMap {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn image(&self, id: &str) -> &Image {
        self.map.get(id).unwrap_or(&Image::None)
    }

    /// The instruction `id` stands for, if it is not bookkeeping or a flush.
    pub fn get(&self, id: &str) -> Option<&str> {
        match self.image(id) {
            Image::Instr(m) => Some(m),
            _ => None,
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.map.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Images of `ids` in order, without bookkeeping and flushes.
    pub fn project<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        ids.into_iter()
            .filter_map(|id| self.get(id).map(str::to_string))
            .collect()
    }

    /// Images of `ids` in order, with a flush standing for the store it
    /// makes visible. Sequences extended in delete mode are pairwise
    /// distinct under this projection.
    pub fn project_with_flushes<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        ids.into_iter()
            .filter_map(|id| match self.image(id) {
                Image::Instr(m) | Image::Flush(m) => Some(m.clone()),
                Image::None => None,
            })
            .collect()
    }

    /// Composition: `next` maps a newer program to the one `self` starts
    /// from; the result maps the newer program to where `self` ends.
    pub fn then(&self, next: &ProjectionMap) -> ProjectionMap {
        let map = next
            .map
            .iter()
            .map(|(id, img)| {
                let img = match img {
                    Image::Instr(m) => self.image(m).clone(),
                    Image::Flush(m) => match self.image(m) {
                        Image::Instr(o) | Image::Flush(o) => Image::Flush(o.clone()),
                        Image::None => Image::None,
                    },
                    Image::None => Image::None,
                };
                (id.clone(), img)
            })
            .collect();
        ProjectionMap { map }
    }
}

/// Registers and states added by one extension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionAux {
    pub thread: usize,
    pub round: usize,
    /// Address registers `ar_1 … ar_max`.
    pub ar: Vec<RegId>,
    /// Value registers `vr_1 … vr_max`.
    pub vr: Vec<RegId>,
    /// `q̂_0 … q̂_n`; `q̂_0` is the source of the first store.
    pub qhat: Vec<StateId>,
    /// Intermediate states of the added chains.
    pub chain_states: Vec<StateId>,
    pub added_instructions: usize,
    /// Id of the removed first store, in delete mode.
    pub deleted: Option<String>,
}

/// The extended program with its projection to the input program.
#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub program: Program,
    pub projection: ProjectionMap,
    pub aux: ExtensionAux,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExtendError {
    #[error("the instruction sequence is empty")]
    Empty,
    #[error("instruction {0} is not in the program")]
    UnknownInstruction(usize),
    #[error("the sequence mixes instructions of several threads")]
    MixedThreads,
    #[error("instruction {0} does not start where the previous one ends")]
    NotAPath(usize),
    #[error("the sequence does not start with a store")]
    FirstNotStore,
    #[error("the sequence does not end with a load")]
    LastNotLoad,
    #[error("instruction {0} is a fence")]
    Fence(usize),
}

/// Upper bound on the number of instructions one extension adds, for a
/// sequence of `n` instructions with `max` stores in a thread of `it`
/// instructions.
pub fn size_bound(n: usize, max: usize, it: usize) -> usize {
    (max + 1) * (n + 1) * (it + 3)
}

struct Builder<'a> {
    p: &'a mut Program,
    t: usize,
    round: usize,
    chain_states: Vec<StateId>,
    projection: Vec<(String, Image)>,
    added: usize,
}

impl Builder<'_> {
    fn fresh(&mut self, name: &str) -> StateId {
        let th = &mut self.p.threads[self.t];
        assert!(th.state_index(name).is_none(), "state {name} already exists");
        th.intern_state(name)
    }

    fn chain_state(&mut self) -> StateId {
        let name = format!("__c{}_{}", self.round, self.chain_states.len());
        let q = self.fresh(&name);
        self.chain_states.push(q);
        q
    }

    fn emit(&mut self, src: StateId, dst: StateId, cmd: Command, image: Image) {
        let th = &mut self.p.threads[self.t];
        let k = th.push_instruction(src, dst, cmd);
        self.projection.push((th.instructions[k].id.clone(), image));
        self.added += 1;
    }

    /// Emits `store ar_j <- vr_j` for the given stores as a chain from `from`;
    /// the last store ends in `to`, or in a fresh state if `to` is `None`.
    /// Returns the state the chain ends in.
    fn replay(&mut self, regs: &[Buffered], from: StateId, to: Option<StateId>) -> StateId {
        let mut cur = from;
        for (k, b) in regs.iter().enumerate() {
            let next = match to {
                Some(q) if k + 1 == regs.len() => q,
                _ => self.chain_state(),
            };
            self.emit(cur, next, store_reg(b.ar, b.vr), Image::Flush(b.store.clone()));
            cur = next;
        }
        cur
    }
}

/// Registers holding the `j`-th store of the sequence.
struct Buffered {
    ar: RegId,
    vr: RegId,
    store: String,
}

fn image(id: &str) -> Image {
    Image::Instr(id.to_string())
}

fn store_reg(a: RegId, v: RegId) -> Command {
    Command::Store {
        addr: Expr::Reg(a),
        value: Expr::Reg(v),
    }
}

fn check_sigma(r: &Program, sigma: &[InstrRef]) -> Result<(), ExtendError> {
    let first = sigma.first().ok_or(ExtendError::Empty)?;
    for (i, s) in sigma.iter().enumerate() {
        if s.thread != first.thread {
            return Err(ExtendError::MixedThreads);
        }
        let th = r.threads.get(s.thread).ok_or(ExtendError::UnknownInstruction(i))?;
        let ins = th.instructions.get(s.index).ok_or(ExtendError::UnknownInstruction(i))?;
        if ins.cmd.is_fence() {
            return Err(ExtendError::Fence(i));
        }
        if i > 0 && r.instr(sigma[i - 1]).dst != ins.src {
            return Err(ExtendError::NotAPath(i));
        }
    }
    if !r.instr(*first).cmd.is_store() {
        return Err(ExtendError::FirstNotStore);
    }
    if !r.instr(sigma[sigma.len() - 1]).cmd.is_load() {
        return Err(ExtendError::LastNotLoad);
    }
    Ok(())
}

/// Builds `r ⊕ sigma`. `round` makes the names of added registers and
/// states unique across extensions.
pub fn extend(
    r: &Program,
    sigma: &[InstrRef],
    delete_first_store: bool,
    round: usize,
) -> Result<ExtensionResult, ExtendError> {
    check_sigma(r, sigma)?;
    let t = sigma[0].thread;
    let n = sigma.len();
    let insts: Vec<_> = sigma.iter().map(|&s| r.instr(s).clone()).collect();
    let original = r.threads[t].instructions.clone();
    let max = insts.iter().filter(|i| i.cmd.is_store()).count();

    let mut p = r.clone();
    let regs: Vec<Buffered> = insts
        .iter()
        .filter(|i| i.cmd.is_store())
        .enumerate()
        .map(|(j, i)| Buffered {
            ar: p.add_register(&format!("__ar{}__{round}", j + 1), t),
            vr: p.add_register(&format!("__vr{}__{round}", j + 1), t),
            store: i.id.clone(),
        })
        .collect();
    let mut b = Builder {
        p: &mut p,
        t,
        round,
        chain_states: Vec::new(),
        projection: Vec::new(),
        added: 0,
    };
    let mut qhat = vec![insts[0].src];
    for i in 1..=n {
        let q = b.fresh(&format!("__q{round}_{i}"));
        qhat.push(q);
    }

    // The path through q̂_1 … q̂_n; count[i] is the number of stores in
    // inst_1 … inst_i.
    let mut count = vec![0usize];
    for (i, ins) in insts.iter().enumerate() {
        let (from, to) = (qhat[i], qhat[i + 1]);
        let c = count[i];
        let id = ins.id.as_str();
        match &ins.cmd {
            Command::Store { addr, value } => {
                let (a, v) = (regs[c].ar, regs[c].vr);
                let mid = b.chain_state();
                b.emit(from, mid, Command::Assign { reg: a, expr: addr.clone() }, image(id));
                b.emit(mid, to, Command::Assign { reg: v, expr: value.clone() }, Image::None);
                count.push(c + 1);
            }
            Command::Load { reg, addr } => {
                let mut cur = from;
                for j in (0..c).rev() {
                    let (a, v) = (regs[j].ar, regs[j].vr);
                    let first = if cur == from { image(id) } else { Image::None };
                    let hit = b.chain_state();
                    let cond = |op| Command::Assume(Expr::bin(op, Expr::Reg(a), addr.clone()));
                    b.emit(cur, hit, cond(BinOp::Eq), first.clone());
                    b.emit(hit, to, Command::Assign { reg: *reg, expr: Expr::Reg(v) }, Image::None);
                    let miss = b.chain_state();
                    b.emit(cur, miss, cond(BinOp::Ne), first);
                    cur = miss;
                }
                let first = if cur == from { image(id) } else { Image::None };
                b.emit(cur, to, Command::Load { reg: *reg, addr: addr.clone() }, first);
                count.push(c);
            }
            Command::Assign { .. } | Command::Assume(_) => {
                b.emit(from, to, ins.cmd.clone(), image(id));
                count.push(c);
            }
            Command::Fence => unreachable!("checked by check_sigma"),
        }
    }

    // Replay all stores after the last instruction.
    b.replay(&regs, qhat[n], Some(insts[n - 1].dst));

    // Leave the sequence early through another instruction.
    for i in 1..n {
        for other in original.iter().filter(|o| o.src == insts[i - 1].dst) {
            if other.id == insts[i].id {
                continue;
            }
            let end = b.replay(&regs[..count[i]], qhat[i], None);
            b.emit(end, other.dst, other.cmd.clone(), image(&other.id));
        }
    }

    // Flush the first store, fence, and flush the rest.
    for i in 1..n {
        if i > 1 && !insts[i - 1].cmd.is_load() {
            continue;
        }
        let target = insts[i - 1].dst;
        let (first, rest) = regs[..count[i]].split_first().expect("inst_1 is a store");
        let flushed = b.chain_state();
        b.emit(qhat[i], flushed, store_reg(first.ar, first.vr), Image::Flush(first.store.clone()));
        if rest.is_empty() {
            b.emit(flushed, target, Command::Fence, Image::None);
        } else {
            let fenced = b.chain_state();
            b.emit(flushed, fenced, Command::Fence, Image::None);
            b.replay(rest, fenced, Some(target));
        }
    }

    let chain_states = std::mem::take(&mut b.chain_states);
    let added = b.added;
    let mut pairs = std::mem::take(&mut b.projection);
    let deleted = if delete_first_store {
        let th = &mut p.threads[t];
        let removed = th.instructions.remove(sigma[0].index);
        Some(removed.id)
    } else {
        None
    };
    pairs.extend(
        p.threads
            .iter()
            .flat_map(|th| &th.instructions)
            .filter(|i| r.find_instr(&i.id).is_some())
            .map(|i| (i.id.clone(), Image::Instr(i.id.clone()))),
    );
    debug_assert!(added <= size_bound(n, max, original.len()));
    Ok(ExtensionResult {
        program: p,
        projection: ProjectionMap::from_pairs(pairs),
        aux: ExtensionAux {
            thread: t,
            round,
            ar: regs.iter().map(|r| r.ar).collect(),
            vr: regs.iter().map(|r| r.vr).collect(),
            qhat,
            chain_states,
            added_instructions: added,
            deleted,
        },
    })
}
