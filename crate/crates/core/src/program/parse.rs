//! Parser for the textual program syntax.
//!
//! ```text
//! domain 4;
//! addresses x, y;            # optional; fixes the numbering of addresses
//! thread t1 {
//!   init q0;
//!   q0 -> q1 : store x <- 1;
//!   q1 -> q2 : load r1 <- y;
//!   q2 -> qf : assume r1 == 0;
//! }
//! goal { t1 @ qf; where x == 1; }
//! ```
//!
//! Identifiers that a thread loads into or assigns (`load r <- e`,
//! `r := e`) are registers of that thread. Every other identifier is an
//! address; addresses not listed in an `addresses` declaration are numbered
//! in order of first appearance. `r@t` names register `r` of thread `t`
//! explicitly and is only legal inside thread `t`.

use super::{
    BinOp, Command, DomainConfig, Expr, GoalSpec, Location, Program, RegId,
    Register, StateId, Thread, Value, MAX_DOMAIN,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("constant {value} out of range for domain {domain}")]
    ConstOutOfRange { value: u64, domain: usize },
    #[error("domain size {0} out of range 1..={MAX_DOMAIN}")]
    DomainOutOfRange(u64),
    #[error("{count} addresses do not fit in domain {domain}")]
    TooManyAddresses { count: usize, domain: usize },
    #[error("duplicate thread `{0}`")]
    DuplicateThread(String),
    #[error("register `{0}` is written by more than one thread")]
    DuplicateRegister(String),
    #[error("duplicate address `{0}`")]
    DuplicateAddress(String),
    #[error("duplicate init declaration in thread `{0}`")]
    DuplicateInit(String),
    #[error("thread `{0}` has no init state")]
    MissingInit(String),
    #[error("register `{reg}` of thread `{owner}` used in thread `{user}`")]
    CrossThreadRegister {
        reg: String,
        owner: String,
        user: String,
    },
    #[error("`{0}` is both an address and a register")]
    NameConflict(String),
    #[error("unknown thread `{0}`")]
    UnknownThread(String),
    #[error("unknown state `{state}` in thread `{thread}`")]
    UnknownState { thread: String, state: String },
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("missing domain declaration")]
    MissingDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn err<T>(pos: Pos, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError {
        line: pos.line,
        col: pos.col,
        kind,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
    Eof,
}

const SYMBOLS: &[&str] = &[
    "->", "<-", ":=", "==", "!=", "&&", "||", ";", "{", "}", ":", ",", "@", "(", ")", "+", "-",
    "*", "<", "!", "|",
];

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<u64>().unwrap_or(u64::MAX);
            out.push((Tok::Int(v), pos));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    i += s.len();
                    col += s.len();
                    out.push((Tok::Sym(s), pos));
                }
                None => return err(pos, ParseErrorKind::Syntax(format!("unexpected character `{c}`"))),
            }
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Clone, Debug)]
enum RawExpr {
    Int(u64, Pos),
    Name(String, Option<String>, Pos),
    Not(Box<RawExpr>),
    Bin(BinOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Clone, Debug)]
enum RawCmd {
    Load(String, Pos, RawExpr),
    Store(RawExpr, RawExpr),
    Fence,
    Assign(String, Pos, RawExpr),
    Assume(RawExpr),
}

struct RawInstr {
    src: String,
    dst: String,
    cmd: RawCmd,
}

struct RawThread {
    name: String,
    pos: Pos,
    init: Option<String>,
    instrs: Vec<RawInstr>,
}

/// A goal constraint `thread @ state, ...` with source positions.
type RawPc = (String, Pos, Vec<(String, Pos)>);

struct RawGoal {
    pcs: Vec<RawPc>,
    values: Vec<(String, Pos, u64, Pos)>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn unexpected<T>(&self, what: &str) -> Result<T, ParseError> {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        err(self.pos(), ParseErrorKind::Syntax(format!("expected {what}, found {found}")))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.next();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.pos();
                self.next();
                Ok((s, pos))
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn int(&mut self) -> Result<(u64, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                let pos = self.pos();
                self.next();
                Ok((v, pos))
            }
            _ => self.unexpected("integer"),
        }
    }

    /// Statement terminator: `;`, optional right before `}`.
    fn terminator(&mut self) -> Result<(), ParseError> {
        if self.eat_sym(";") || self.is_sym("}") {
            Ok(())
        } else {
            self.unexpected("`;`")
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<RawExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("==") => BinOp::Eq,
                Tok::Sym("!=") => BinOp::Ne,
                Tok::Sym("<") => BinOp::Lt,
                Tok::Sym("&&") => BinOp::And,
                Tok::Sym("||") => BinOp::Or,
                _ => break,
            };
            if op.precedence() < min_prec {
                break;
            }
            self.next();
            let rhs = self.expr(op.precedence() + 1)?;
            lhs = RawExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawExpr, ParseError> {
        if self.eat_sym("!") {
            return Ok(RawExpr::Not(Box::new(self.unary()?)));
        }
        if self.eat_sym("(") {
            let e = self.expr(0)?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        match self.peek().clone() {
            Tok::Int(_) => {
                let (v, pos) = self.int()?;
                Ok(RawExpr::Int(v, pos))
            }
            Tok::Ident(_) => {
                let (name, pos) = self.ident()?;
                let qual = if self.eat_sym("@") {
                    Some(self.ident()?.0)
                } else {
                    None
                };
                Ok(RawExpr::Name(name, qual, pos))
            }
            _ => self.unexpected("expression"),
        }
    }

    fn command(&mut self) -> Result<RawCmd, ParseError> {
        if self.is_kw("store") {
            self.next();
            let addr = self.expr(0)?;
            self.expect_sym("<-")?;
            let value = self.expr(0)?;
            return Ok(RawCmd::Store(addr, value));
        }
        if self.is_kw("load") {
            self.next();
            let (reg, pos) = self.ident()?;
            self.expect_sym("<-")?;
            let addr = self.expr(0)?;
            return Ok(RawCmd::Load(reg, pos, addr));
        }
        if self.is_kw("mfence") || self.is_kw("fence") {
            self.next();
            return Ok(RawCmd::Fence);
        }
        if self.is_kw("assume") {
            self.next();
            return Ok(RawCmd::Assume(self.expr(0)?));
        }
        if let Tok::Ident(_) = self.peek() {
            let (reg, pos) = self.ident()?;
            self.expect_sym(":=")?;
            return Ok(RawCmd::Assign(reg, pos, self.expr(0)?));
        }
        self.unexpected("command")
    }

    fn thread(&mut self) -> Result<RawThread, ParseError> {
        self.expect_kw("thread")?;
        let (name, pos) = self.ident()?;
        self.expect_sym("{")?;
        let mut t = RawThread {
            name,
            pos,
            init: None,
            instrs: Vec::new(),
        };
        while !self.is_sym("}") {
            if self.is_kw("init") {
                let kw_pos = self.pos();
                self.next();
                let (q, _) = self.ident()?;
                if t.init.is_some() {
                    return err(kw_pos, ParseErrorKind::DuplicateInit(t.name.clone()));
                }
                t.init = Some(q);
            } else {
                let (src, _) = self.ident()?;
                self.expect_sym("->")?;
                let (dst, _) = self.ident()?;
                self.expect_sym(":")?;
                let cmd = self.command()?;
                t.instrs.push(RawInstr { src, dst, cmd });
            }
            self.terminator()?;
        }
        self.expect_sym("}")?;
        Ok(t)
    }

    fn goal(&mut self) -> Result<RawGoal, ParseError> {
        self.expect_kw("goal")?;
        self.expect_sym("{")?;
        let mut g = RawGoal {
            pcs: Vec::new(),
            values: Vec::new(),
        };
        while !self.is_sym("}") {
            if self.is_kw("where") {
                self.next();
                loop {
                    let (name, pos) = self.ident()?;
                    self.expect_sym("==")?;
                    let (v, vpos) = self.int()?;
                    g.values.push((name, pos, v, vpos));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            } else {
                loop {
                    let (t, pos) = self.ident()?;
                    self.expect_sym("@")?;
                    let mut states = vec![self.ident()?];
                    while self.eat_sym("|") {
                        states.push(self.ident()?);
                    }
                    g.pcs.push((t, pos, states));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.terminator()?;
        }
        self.expect_sym("}")?;
        Ok(g)
    }
}

/// Parses a program. The program name is left empty.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        i: 0,
    };
    let mut domain = None;
    let mut declared: Vec<(String, Pos)> = Vec::new();
    let mut threads = Vec::new();
    let mut goal = None;
    while *p.peek() != Tok::Eof {
        if p.is_kw("domain") {
            p.next();
            let (d, pos) = p.int()?;
            if d == 0 || d > MAX_DOMAIN as u64 {
                return err(pos, ParseErrorKind::DomainOutOfRange(d));
            }
            domain = Some(d as usize);
            p.terminator()?;
        } else if p.is_kw("addresses") {
            p.next();
            loop {
                declared.push(p.ident()?);
                if !p.eat_sym(",") {
                    break;
                }
            }
            p.terminator()?;
        } else if p.is_kw("thread") {
            threads.push(p.thread()?);
        } else if p.is_kw("goal") {
            goal = Some(p.goal()?);
        } else {
            return p.unexpected("`domain`, `addresses`, `thread` or `goal`");
        }
    }
    let domain = match domain {
        Some(d) => d,
        None => return err(Pos { line: 1, col: 1 }, ParseErrorKind::MissingDomain),
    };
    Resolver::new(domain).resolve(declared, threads, goal)
}

struct Resolver {
    domain: usize,
    addresses: Vec<String>,
    registers: Vec<Register>,
    reg_index: HashMap<String, RegId>,
    thread_names: Vec<String>,
}

impl Resolver {
    fn new(domain: usize) -> Self {
        Resolver {
            domain,
            addresses: Vec::new(),
            registers: Vec::new(),
            reg_index: HashMap::new(),
            thread_names: Vec::new(),
        }
    }

    fn constant(&self, v: u64, pos: Pos) -> Result<Value, ParseError> {
        if v >= self.domain as u64 {
            return err(
                pos,
                ParseErrorKind::ConstOutOfRange {
                    value: v,
                    domain: self.domain,
                },
            );
        }
        Ok(v as Value)
    }

    fn address(&mut self, name: &str, pos: Pos) -> Result<Value, ParseError> {
        if let Some(i) = self.addresses.iter().position(|a| a == name) {
            return Ok(i as Value);
        }
        if self.addresses.len() >= self.domain {
            return err(
                pos,
                ParseErrorKind::TooManyAddresses {
                    count: self.addresses.len() + 1,
                    domain: self.domain,
                },
            );
        }
        self.addresses.push(name.to_string());
        Ok((self.addresses.len() - 1) as Value)
    }

    fn register_in(&self, name: &str, thread: usize, pos: Pos) -> Result<Option<RegId>, ParseError> {
        match self.reg_index.get(name) {
            Some(&r) if self.registers[r.0 as usize].thread == thread => Ok(Some(r)),
            Some(&r) => err(
                pos,
                ParseErrorKind::CrossThreadRegister {
                    reg: name.to_string(),
                    owner: self.thread_names[self.registers[r.0 as usize].thread].clone(),
                    user: self.thread_names[thread].clone(),
                },
            ),
            None => Ok(None),
        }
    }

    fn expr(&mut self, e: &RawExpr, thread: usize) -> Result<Expr, ParseError> {
        Ok(match e {
            RawExpr::Int(v, pos) => Expr::Const(self.constant(*v, *pos)?),
            RawExpr::Name(name, Some(owner), pos) => {
                let Some(&r) = self.reg_index.get(name) else {
                    return err(*pos, ParseErrorKind::UnknownRegister(format!("{name}@{owner}")));
                };
                let reg_owner = &self.thread_names[self.registers[r.0 as usize].thread];
                if reg_owner != owner {
                    return err(*pos, ParseErrorKind::UnknownRegister(format!("{name}@{owner}")));
                }
                match self.register_in(name, thread, *pos)? {
                    Some(r) => Expr::Reg(r),
                    None => unreachable!("register resolved above"),
                }
            }
            RawExpr::Name(name, None, pos) => match self.register_in(name, thread, *pos)? {
                Some(r) => Expr::Reg(r),
                None => Expr::Addr(self.address(name, *pos)?),
            },
            RawExpr::Not(e) => Expr::Not(Box::new(self.expr(e, thread)?)),
            RawExpr::Bin(op, a, b) => {
                let a = self.expr(a, thread)?;
                let b = self.expr(b, thread)?;
                Expr::bin(*op, a, b)
            }
        })
    }

    fn resolve(
        mut self,
        declared: Vec<(String, Pos)>,
        raw_threads: Vec<RawThread>,
        raw_goal: Option<RawGoal>,
    ) -> Result<Program, ParseError> {
        for (name, pos) in &declared {
            if self.addresses.contains(name) {
                return err(*pos, ParseErrorKind::DuplicateAddress(name.clone()));
            }
            self.address(name, *pos)?;
        }
        for t in &raw_threads {
            if self.thread_names.contains(&t.name) {
                return err(t.pos, ParseErrorKind::DuplicateThread(t.name.clone()));
            }
            self.thread_names.push(t.name.clone());
        }
        // Registers are the load and assignment targets of each thread.
        for (ti, t) in raw_threads.iter().enumerate() {
            for ins in &t.instrs {
                let (RawCmd::Load(name, pos, _) | RawCmd::Assign(name, pos, _)) = &ins.cmd else {
                    continue;
                };
                if self.addresses.contains(name) {
                    return err(*pos, ParseErrorKind::NameConflict(name.clone()));
                }
                match self.reg_index.get(name) {
                    Some(r) if self.registers[r.0 as usize].thread == ti => {}
                    Some(_) => return err(*pos, ParseErrorKind::DuplicateRegister(name.clone())),
                    None => {
                        self.reg_index
                            .insert(name.clone(), RegId(self.registers.len() as u32));
                        self.registers.push(Register {
                            name: name.clone(),
                            thread: ti,
                        });
                    }
                }
            }
        }
        let mut threads = Vec::new();
        for (ti, rt) in raw_threads.iter().enumerate() {
            let Some(init) = &rt.init else {
                return err(rt.pos, ParseErrorKind::MissingInit(rt.name.clone()));
            };
            let mut th = Thread {
                name: rt.name.clone(),
                states: vec![init.clone()],
                init: 0,
                instructions: Vec::new(),
            };
            for ins in &rt.instrs {
                let src = th.intern_state(&ins.src);
                let dst = th.intern_state(&ins.dst);
                let cmd = match &ins.cmd {
                    RawCmd::Load(r, _, e) => Command::Load {
                        reg: self.reg_index[r],
                        addr: self.expr(e, ti)?,
                    },
                    RawCmd::Store(a, v) => Command::Store {
                        addr: self.expr(a, ti)?,
                        value: self.expr(v, ti)?,
                    },
                    RawCmd::Fence => Command::Fence,
                    RawCmd::Assign(r, _, e) => Command::Assign {
                        reg: self.reg_index[r],
                        expr: self.expr(e, ti)?,
                    },
                    RawCmd::Assume(e) => Command::Assume(self.expr(e, ti)?),
                };
                th.push_instruction(src, dst, cmd);
            }
            threads.push(th);
        }
        let mut goal = GoalSpec::default();
        if let Some(g) = raw_goal {
            for (tname, pos, states) in g.pcs {
                let Some(ti) = self.thread_names.iter().position(|n| *n == tname) else {
                    return err(pos, ParseErrorKind::UnknownThread(tname));
                };
                let mut ids: Vec<StateId> = Vec::new();
                for (s, spos) in states {
                    match threads[ti].state_index(&s) {
                        Some(q) => ids.push(q),
                        None => {
                            return err(
                                spos,
                                ParseErrorKind::UnknownState {
                                    thread: tname.clone(),
                                    state: s,
                                },
                            )
                        }
                    }
                }
                goal.pcs.push((ti, ids));
            }
            for (name, pos, v, vpos) in g.values {
                let loc = if let Some(&r) = self.reg_index.get(&name) {
                    Location::Reg(r)
                } else if let Some(a) = self.addresses.iter().position(|a| *a == name) {
                    Location::Addr(a as Value)
                } else {
                    return err(pos, ParseErrorKind::UnknownName(name));
                };
                goal.values.push((loc, self.constant(v, vpos)?));
            }
        }
        Ok(Program {
            name: String::new(),
            domain: DomainConfig::new(self.domain),
            addresses: self.addresses,
            registers: self.registers,
            threads,
            goal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEKKER: &str = "domain 2;
thread t1 { init q0; q0 -> q1 : store x <- 1; q1 -> q2 : load r1 <- y; q2 -> qf : assume r1 == 0; }
thread t2 { init p0; p0 -> p1 : store y <- 1; p1 -> p2 : load r2 <- x; p2 -> pf : assume r2 == 0; }
goal { t1 @ qf, t2 @ pf; }";

    #[test]
    fn parses_dekker() {
        let p = parse(DEKKER).unwrap();
        assert_eq!(p.addresses, vec!["x", "y"]);
        assert_eq!(p.threads.len(), 2);
        assert_eq!(p.registers.len(), 2);
        assert_eq!(p.threads[0].instructions[0].id, "t1.q0.q1.0");
        assert_eq!(p.goal.pcs, vec![(0, vec![3]), (1, vec![3])]);
    }

    #[test]
    fn empty_thread_body() {
        let p = parse("domain 1; thread t { init q0 }").unwrap();
        assert_eq!(p.threads[0].states, vec!["q0"]);
        assert!(p.threads[0].instructions.is_empty());
    }

    #[test]
    fn syntax_error_reports_position() {
        let e = parse("domain 2;\nthread t { init q0;\n q0 -> : mfence; }").unwrap_err();
        assert_eq!((e.line, e.col), (3, 8));
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn constant_out_of_range() {
        let e = parse("domain 2; thread t { init q0; q0 -> q1 : store x <- 2; }").unwrap_err();
        assert_eq!(
            e.kind,
            ParseErrorKind::ConstOutOfRange {
                value: 2,
                domain: 2
            }
        );
    }

    #[test]
    fn foreign_register_is_rejected() {
        let src = "domain 2;
thread t1 { init a; a -> b : load r1 <- r2@t2; }
thread t2 { init c; c -> d : load r2 <- x; }";
        let e = parse(src).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::CrossThreadRegister { .. }), "{e}");
        let unqualified = src.replace("r2@t2", "r2");
        let e = parse(&unqualified).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::CrossThreadRegister { .. }), "{e}");
    }

    #[test]
    fn duplicates_are_rejected() {
        let e = parse("domain 2; thread t { init a } thread t { init b }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateThread("t".into()));
        let e = parse("domain 2; thread t { init a; init b }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateInit("t".into()));
        let e = parse(
            "domain 2; thread t { init a; a -> b : r := 1 } thread u { init c; c -> d : r := 0 }",
        )
        .unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateRegister("r".into()));
    }

    #[test]
    fn too_many_addresses() {
        let e = parse("domain 1; thread t { init a; a -> b : store x <- 0; b -> c : store y <- 0 }")
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::TooManyAddresses { .. }));
    }

    #[test]
    fn expression_precedence() {
        let p = parse("domain 8; thread t { init a; a -> b : r := 1 + 2 * 3 == 7 && !0 }").unwrap();
        let Command::Assign { expr, .. } = &p.threads[0].instructions[0].cmd else {
            panic!()
        };
        assert_eq!(expr.eval(8, &|_| 0), 1);
    }
}
