//! Pretty printer producing text that parses back to the same program.

use super::{Command, Expr, Location, Program};
use std::fmt::Write;

fn expr(p: &Program, e: &Expr, out: &mut String) {
    match e {
        Expr::Const(c) => write!(out, "{c}").unwrap(),
        Expr::Addr(a) => out.push_str(&p.location_name(Location::Addr(*a))),
        Expr::Reg(r) => out.push_str(&p.register(*r).name),
        Expr::Not(inner) => {
            out.push('!');
            operand(p, inner, u8::MAX, out);
        }
        Expr::Bin(op, a, b) => {
            let prec = op.precedence();
            operand(p, a, prec, out);
            write!(out, " {} ", op.symbol()).unwrap();
            // Operators are left-associative, so a right operand of equal
            // precedence needs parentheses.
            operand(p, b, prec + 1, out);
        }
    }
}

fn operand(p: &Program, e: &Expr, min_prec: u8, out: &mut String) {
    let needs_parens = match e {
        Expr::Bin(op, _, _) => op.precedence() < min_prec,
        _ => false,
    };
    if needs_parens {
        out.push('(');
    }
    expr(p, e, out);
    if needs_parens {
        out.push(')');
    }
}

/// Renders one command in the concrete syntax.
pub fn command(p: &Program, c: &Command) -> String {
    let mut out = String::new();
    match c {
        Command::Load { reg, addr } => {
            write!(out, "load {} <- ", p.register(*reg).name).unwrap();
            expr(p, addr, &mut out);
        }
        Command::Store { addr, value } => {
            out.push_str("store ");
            expr(p, addr, &mut out);
            out.push_str(" <- ");
            expr(p, value, &mut out);
        }
        Command::Fence => out.push_str("mfence"),
        Command::Assign { reg, expr: e } => {
            write!(out, "{} := ", p.register(*reg).name).unwrap();
            expr(p, e, &mut out);
        }
        Command::Assume(e) => {
            out.push_str("assume ");
            expr(p, e, &mut out);
        }
    }
    out
}

/// Renders the whole program in the concrete syntax.
pub fn print(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "domain {};", p.domain.size).unwrap();
    if !p.addresses.is_empty() {
        writeln!(out, "addresses {};", p.addresses.join(", ")).unwrap();
    }
    for t in &p.threads {
        writeln!(out, "thread {} {{", t.name).unwrap();
        writeln!(out, "  init {};", t.state_name(t.init)).unwrap();
        for i in &t.instructions {
            writeln!(
                out,
                "  {} -> {} : {};",
                t.state_name(i.src),
                t.state_name(i.dst),
                command(p, &i.cmd)
            )
            .unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    if !p.goal.pcs.is_empty() || !p.goal.values.is_empty() {
        writeln!(out, "goal {{").unwrap();
        if !p.goal.pcs.is_empty() {
            let pcs: Vec<String> = p
                .goal
                .pcs
                .iter()
                .map(|(t, qs)| {
                    let th = &p.threads[*t];
                    let names: Vec<&str> = qs.iter().map(|q| th.state_name(*q)).collect();
                    format!("{} @ {}", th.name, names.join(" | "))
                })
                .collect();
            writeln!(out, "  {};", pcs.join(", ")).unwrap();
        }
        if !p.goal.values.is_empty() {
            let vals: Vec<String> = p
                .goal
                .values
                .iter()
                .map(|(loc, v)| format!("{} == {v}", p.location_name(*loc)))
                .collect();
            writeln!(out, "  where {};", vals.join(", ")).unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    out
}
