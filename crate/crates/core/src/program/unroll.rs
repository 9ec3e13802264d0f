//! Bounded unrolling of cyclic programs into acyclic ones.

use super::{Program, StateId, Thread};
use std::collections::{HashMap, VecDeque};

/// An unrolled program together with the provenance of its instructions.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub program: Program,
    /// Maps every instruction id of the unrolled program to the id of the
    /// original instruction it copies.
    pub provenance: HashMap<String, String>,
}

/// Unrolls every thread so that it executes at most `k` instructions.
///
/// State `q` of the original thread becomes copies `q__c` for the execution
/// counts `c` at which it is reachable, and instruction `q -> q'` becomes
/// `q__c -> q'__(c+1)` for every `c < k`. Each computation of the original
/// program in which no thread executes more than `k` instructions is a
/// computation of the unrolled program, and vice versa up to renaming.
/// Goal constraints accept every copy of a goal state.
pub fn unroll(p: &Program, k: usize) -> Unrolled {
    let mut provenance = HashMap::new();
    let mut threads = Vec::new();
    let mut copies_per_thread = Vec::new();
    for t in &p.threads {
        let name_of = |q: StateId, c: usize| format!("{}__{c}", t.state_name(q));
        let mut out = Thread {
            name: t.name.clone(),
            states: vec![name_of(t.init, 0)],
            init: 0,
            instructions: Vec::new(),
        };
        let mut copies: HashMap<(StateId, usize), StateId> = HashMap::new();
        copies.insert((t.init, 0), 0);
        let mut queue = VecDeque::from([(t.init, 0usize)]);
        // Breadth-first over (state, count) yields instructions level by level.
        while let Some((q, c)) = queue.pop_front() {
            if c >= k {
                continue;
            }
            let src = copies[&(q, c)];
            for ins in t.instructions.iter().filter(|i| i.src == q) {
                let dst = match copies.get(&(ins.dst, c + 1)) {
                    Some(&d) => d,
                    None => {
                        let d = out.intern_state(&name_of(ins.dst, c + 1));
                        copies.insert((ins.dst, c + 1), d);
                        queue.push_back((ins.dst, c + 1));
                        d
                    }
                };
                let idx = out.push_instruction(src, dst, ins.cmd.clone());
                provenance.insert(out.instructions[idx].id.clone(), ins.id.clone());
            }
        }
        threads.push(out);
        copies_per_thread.push(copies);
    }
    let mut goal = p.goal.clone();
    for (t, qs) in &mut goal.pcs {
        let copies = &copies_per_thread[*t];
        let mut lifted: Vec<(usize, StateId)> = copies
            .iter()
            .filter(|((q, _), _)| qs.contains(q))
            .map(|((_, c), id)| (*c, *id))
            .collect();
        lifted.sort();
        *qs = lifted.into_iter().map(|(_, id)| id).collect();
    }
    Unrolled {
        program: Program {
            name: p.name.clone(),
            domain: p.domain,
            addresses: p.addresses.clone(),
            registers: p.registers.clone(),
            threads,
            goal,
        },
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{parse, validate};

    #[test]
    fn unrolling_a_loop_bounds_execution_count() {
        let p = parse(
            "domain 3; thread t { init q0; q0 -> q0 : store x <- 1; q0 -> qf : assume 1 }
             goal { t @ qf; }",
        )
        .unwrap();
        let u = unroll(&p, 3);
        assert!(u.program.is_acyclic());
        assert!(validate(&u.program).is_empty());
        let t = &u.program.threads[0];
        // q0 at counts 0..=3, qf at counts 1..=3.
        assert_eq!(t.states.len(), 7);
        assert_eq!(t.instructions.len(), 6);
        assert_eq!(u.program.goal.pcs[0].1.len(), 3);
        for i in &t.instructions {
            let orig = &u.provenance[&i.id];
            assert!(p.find_instr(orig).is_some());
        }
    }
}
