//! Happens-before graphs of TSO computations.
//!
//! The graph has three relations over the events of a computation:
//! program order (`po`) between non-flush events of one thread, the
//! symmetric store/flush pairing (`eq`), and conflict order (`cf`). A load
//! that reads a store of its own thread still sitting in the buffer is an
//! *early read*; it receives a `cf` edge from that store and takes no part
//! in ordinary conflict edges. Ordinary `cf` edges connect consecutive
//! accesses to one address (loads that are not early reads, and flushes)
//! when at least one of the two is a flush and no flush to that address
//! lies between them.

use crate::program::Program;
use crate::semantics::{Access, Event};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HbError {
    #[error("flush event {index} has no matching earlier store")]
    UnmatchedFlush { index: usize },
    #[error("store event {index} is flushed more than once")]
    DoubleFlush { index: usize },
}

/// Kinds of happens-before edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Po,
    Eq,
    Cf,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Po => "po",
            EdgeKind::Eq => "eq",
            EdgeKind::Cf => "cf",
        }
    }
}

/// Happens-before graph over event positions of one computation.
#[derive(Clone, Debug)]
pub struct HbGraph {
    pub events: Vec<Event>,
    /// All pairs `(i, j)` with `i` before `j` in program order.
    pub po: BTreeSet<(usize, usize)>,
    /// Store/flush pairs `(store, flush)`; the relation is symmetric.
    pub eq: BTreeSet<(usize, usize)>,
    pub cf: BTreeSet<(usize, usize)>,
    /// Positions of loads that are early reads.
    pub early_reads: BTreeSet<usize>,
}

/// Key identifying an event independently of its position: thread,
/// per-thread event id, instruction id and whether it is a flush.
pub type EventKey = (usize, u32, String, bool);

impl HbGraph {
    /// Directed edges, with `eq` contributing both directions.
    pub fn directed_edges(&self) -> Vec<(EdgeKind, usize, usize)> {
        let mut out: Vec<(EdgeKind, usize, usize)> = Vec::new();
        out.extend(self.po.iter().map(|&(a, b)| (EdgeKind::Po, a, b)));
        for &(a, b) in &self.eq {
            out.push((EdgeKind::Eq, a, b));
            out.push((EdgeKind::Eq, b, a));
        }
        out.extend(self.cf.iter().map(|&(a, b)| (EdgeKind::Cf, a, b)));
        out
    }

    /// Number of edges, counting each `eq` pair once.
    pub fn edge_count(&self) -> usize {
        self.po.len() + self.eq.len() + self.cf.len()
    }

    /// Events reachable from `from` by one or more edges (`hb+`).
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let n = self.events.len();
        let mut succ = vec![Vec::new(); n];
        for (_, a, b) in self.directed_edges() {
            succ[a].push(b);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        while let Some(x) = queue.pop_front() {
            for &y in &succ[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// True if the graph has a cycle through directed `po` and `cf` edges
    /// and `eq` edges in either direction.
    pub fn has_cycle(&self) -> bool {
        (0..self.events.len()).any(|i| self.reachable_from(i)[i])
    }

    pub fn key(&self, p: &Program, i: usize) -> EventKey {
        let e = &self.events[i];
        (
            e.thread,
            e.id,
            p.threads[e.thread].instructions[e.instr].id.clone(),
            e.is_flush(),
        )
    }

    /// All edges with events identified by [`HbGraph::key`].
    pub fn keyed_edges(&self, p: &Program) -> BTreeSet<(EdgeKind, EventKey, EventKey)> {
        let mut out = BTreeSet::new();
        out.extend(self.po.iter().map(|&(a, b)| (EdgeKind::Po, self.key(p, a), self.key(p, b))));
        out.extend(self.eq.iter().map(|&(a, b)| (EdgeKind::Eq, self.key(p, a), self.key(p, b))));
        out.extend(self.cf.iter().map(|&(a, b)| (EdgeKind::Cf, self.key(p, a), self.key(p, b))));
        out
    }

    /// Debug export: one `kind src dst` line per edge, sorted; `eq` edges
    /// are listed once, from store to flush.
    pub fn export(&self, p: &Program) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (kind, set) in [(EdgeKind::Po, &self.po), (EdgeKind::Eq, &self.eq), (EdgeKind::Cf, &self.cf)] {
            for &(a, b) in set {
                lines.push(format!(
                    "{} {} {}",
                    kind.name(),
                    self.events[a].label(p),
                    self.events[b].label(p)
                ));
            }
        }
        lines.sort();
        let mut out = String::new();
        for l in lines {
            writeln!(out, "{l}").unwrap();
        }
        out
    }
}

/// Builds the happens-before graph of a computation.
pub fn build_hb(events: &[Event]) -> Result<HbGraph, HbError> {
    let mut g = HbGraph {
        events: events.to_vec(),
        po: BTreeSet::new(),
        eq: BTreeSet::new(),
        cf: BTreeSet::new(),
        early_reads: BTreeSet::new(),
    };
    // Program order.
    let mut per_thread: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        if !e.is_flush() {
            let list = per_thread.entry(e.thread).or_default();
            for &j in list.iter() {
                g.po.insert((j, i));
            }
            list.push(i);
        }
    }
    // Store/flush pairing.
    let mut store_at: HashMap<(usize, u32), usize> = HashMap::new();
    let mut flush_of: HashMap<usize, usize> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        match e.access {
            Access::Store => {
                store_at.insert((e.thread, e.id), i);
            }
            Access::Flush => {
                let Some(&s) = store_at.get(&(e.thread, e.id)) else {
                    return Err(HbError::UnmatchedFlush { index: i });
                };
                if flush_of.insert(s, i).is_some() {
                    return Err(HbError::DoubleFlush { index: i });
                }
                g.eq.insert((s, i));
            }
            _ => {}
        }
    }
    // Early reads: the newest earlier same-thread store to the address is
    // flushed after the load (or never).
    let mut newest_store: HashMap<(usize, u8), usize> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        match e.access {
            Access::Store => {
                newest_store.insert((e.thread, e.addr.unwrap_or(0)), i);
            }
            Access::Load => {
                let a = e.addr.unwrap_or(0);
                if let Some(&s) = newest_store.get(&(e.thread, a)) {
                    if flush_of.get(&s).is_none_or(|&f| f > i) {
                        g.early_reads.insert(i);
                        g.cf.insert((s, i));
                    }
                }
            }
            _ => {}
        }
    }
    // Ordinary conflict edges, per address.
    let mut last_flush: HashMap<u8, usize> = HashMap::new();
    let mut loads_since: HashMap<u8, Vec<usize>> = HashMap::new();
    for (i, e) in events.iter().enumerate() {
        match e.access {
            Access::Load if !g.early_reads.contains(&i) => {
                let a = e.addr.unwrap_or(0);
                if let Some(&f) = last_flush.get(&a) {
                    g.cf.insert((f, i));
                }
                loads_since.entry(a).or_default().push(i);
            }
            Access::Flush => {
                let a = e.addr.unwrap_or(0);
                if let Some(&f) = last_flush.get(&a) {
                    g.cf.insert((f, i));
                }
                for l in loads_since.remove(&a).unwrap_or_default() {
                    g.cf.insert((l, i));
                }
                last_flush.insert(a, i);
            }
            _ => {}
        }
    }
    Ok(g)
}

/// True if both graphs have the same events and edges once events are
/// matched by thread, per-thread id, instruction id and flush kind.
pub fn hb_equal(p: &Program, g1: &HbGraph, p2: &Program, g2: &HbGraph) -> bool {
    let events = |p: &Program, g: &HbGraph| -> BTreeSet<EventKey> {
        (0..g.events.len()).map(|i| g.key(p, i)).collect()
    };
    events(p, g1) == events(p2, g2) && g1.keyed_edges(p) == g2.keyed_edges(p2)
}
