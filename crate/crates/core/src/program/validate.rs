//! Structural well-formedness checks.

use super::{Location, Program};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// A problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks well-formedness and returns every violation found.
///
/// An empty list means the program is well formed: control states are
/// disjoint across threads, every thread only touches its own registers,
/// literals fit the domain, instruction ids are unique, and the goal refers
/// to existing threads, states and locations.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut report = |message: String| diags.push(Diagnostic { message });
    let d = p.domain_size();

    if p.addresses.len() > d {
        report(format!(
            "{} addresses do not fit in domain {d}",
            p.addresses.len()
        ));
    }
    let mut thread_names = HashSet::new();
    let mut state_owner: HashMap<&str, &str> = HashMap::new();
    let mut ids = HashSet::new();
    for (ti, t) in p.threads.iter().enumerate() {
        if !thread_names.insert(t.name.as_str()) {
            report(format!("duplicate thread name `{}`", t.name));
        }
        let mut local = HashSet::new();
        for s in &t.states {
            if !local.insert(s.as_str()) {
                report(format!("duplicate state `{s}` in thread `{}`", t.name));
            }
            if let Some(other) = state_owner.insert(s.as_str(), t.name.as_str()) {
                if other != t.name {
                    report(format!(
                        "control state `{s}` is shared by threads `{other}` and `{}`",
                        t.name
                    ));
                }
            }
        }
        if t.init as usize >= t.states.len() {
            report(format!("thread `{}` has an invalid init state", t.name));
        }
        for ins in &t.instructions {
            if !ids.insert(ins.id.as_str()) {
                report(format!("duplicate instruction id `{}`", ins.id));
            }
            if ins.src as usize >= t.states.len() || ins.dst as usize >= t.states.len() {
                report(format!("instruction `{}` refers to an unknown state", ins.id));
            }
            ins.cmd.for_each_reg(&mut |r| match p.registers.get(r.0 as usize) {
                None => report(format!("instruction `{}` uses an unknown register", ins.id)),
                Some(reg) if reg.thread != ti => report(format!(
                    "instruction `{}` of thread `{}` uses register `{}` of thread `{}`",
                    ins.id,
                    t.name,
                    reg.name,
                    p.threads.get(reg.thread).map_or("?", |o| o.name.as_str())
                )),
                Some(_) => {}
            });
            ins.cmd.for_each_literal(&mut |v| {
                if v as usize >= d {
                    report(format!(
                        "instruction `{}` has literal {v} outside domain {d}",
                        ins.id
                    ));
                }
            });
        }
    }
    let mut reg_names = HashSet::new();
    for r in &p.registers {
        if !reg_names.insert(r.name.as_str()) {
            report(format!("duplicate register name `{}`", r.name));
        }
        if r.thread >= p.threads.len() {
            report(format!("register `{}` has no owning thread", r.name));
        }
    }
    for (t, qs) in &p.goal.pcs {
        match p.threads.get(*t) {
            None => report(format!("goal refers to unknown thread #{t}")),
            Some(th) => {
                for q in qs {
                    if *q as usize >= th.states.len() {
                        report(format!("goal refers to unknown state of `{}`", th.name));
                    }
                }
            }
        }
    }
    for (loc, v) in &p.goal.values {
        match loc {
            Location::Addr(a) if *a as usize >= d => {
                report(format!("goal address {a} outside domain {d}"))
            }
            Location::Reg(r) if r.0 as usize >= p.registers.len() => {
                report("goal refers to an unknown register".to_string())
            }
            _ => {}
        }
        if *v as usize >= d {
            report(format!("goal value {v} outside domain {d}"));
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse;

    #[test]
    fn well_formed_program_has_no_diagnostics() {
        let p = parse("domain 2; thread t { init a; a -> b : store x <- 1 } goal { t @ b; }").unwrap();
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn shared_state_names_are_reported() {
        let p = parse("domain 2; thread t { init a; a -> b : store x <- 1 } thread u { init a }")
            .unwrap();
        let d = validate(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("shared"), "{d:?}");
    }

    #[test]
    fn foreign_register_use_is_reported() {
        let mut p =
            parse("domain 2; thread t { init a; a -> b : r := 1 } thread u { init c; c -> d : s := 1 }")
                .unwrap();
        p.threads[1].instructions[0].cmd = p.threads[0].instructions[0].cmd.clone();
        assert!(validate(&p).iter().any(|d| d.message.contains("uses register")));
    }
}
