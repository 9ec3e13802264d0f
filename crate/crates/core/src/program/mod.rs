//! Program representation: a finite set of threads over a bounded data domain.
//!
//! Every thread is a control-flow automaton whose edges carry one command
//! each. Values and addresses share the domain `0..D`; arithmetic wraps
//! modulo `D`. Registers are owned by exactly one thread and are indexed
//! globally so that a machine valuation is a flat vector holding the `D`
//! memory cells followed by all registers.

mod parse;
mod print;
mod unroll;
mod validate;

pub use parse::{parse, ParseError, ParseErrorKind};
pub use print::{command as print_command, print};
pub use unroll::{unroll, Unrolled};
pub use validate::{validate, Diagnostic};

use std::collections::HashMap;
use std::fmt;

/// A value of the data domain. Domains are limited to 256 elements.
pub type Value = u8;

/// Largest supported domain size.
pub const MAX_DOMAIN: usize = 256;

/// Index of a control state inside its thread.
pub type StateId = u32;

/// Global register index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegId(pub u32);

/// Size of the data domain `D`; values and addresses range over `0..D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DomainConfig {
    pub size: u16,
}

impl DomainConfig {
    pub fn new(size: usize) -> Self {
        assert!((1..=MAX_DOMAIN).contains(&size), "domain size out of range");
        DomainConfig { size: size as u16 }
    }

    pub fn size(self) -> usize {
        self.size as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength used by the parser and the printer.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }
}

/// Expressions over constants, addresses and registers of one thread.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    /// A named address; evaluates to its numeric value.
    Addr(Value),
    Reg(RegId),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Evaluates the expression; `regs` looks up register values.
    pub fn eval(&self, domain: usize, regs: &impl Fn(RegId) -> Value) -> Value {
        let d = domain as u32;
        let v: u32 = match self {
            Expr::Const(c) | Expr::Addr(c) => *c as u32,
            Expr::Reg(r) => regs(*r) as u32,
            Expr::Not(e) => (e.eval(domain, regs) == 0) as u32,
            Expr::Bin(op, a, b) => {
                let x = a.eval(domain, regs) as u32;
                let y = b.eval(domain, regs) as u32;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x + d - y,
                    BinOp::Mul => x * y,
                    BinOp::Eq => (x == y) as u32,
                    BinOp::Ne => (x != y) as u32,
                    BinOp::Lt => (x < y) as u32,
                    BinOp::And => (x != 0 && y != 0) as u32,
                    BinOp::Or => (x != 0 || y != 0) as u32,
                }
            }
        };
        (v % d) as Value
    }

    /// Calls `f` on every register occurring in the expression.
    pub fn for_each_reg(&self, f: &mut impl FnMut(RegId)) {
        match self {
            Expr::Const(_) | Expr::Addr(_) => {}
            Expr::Reg(r) => f(*r),
            Expr::Not(e) => e.for_each_reg(f),
            Expr::Bin(_, a, b) => {
                a.for_each_reg(f);
                b.for_each_reg(f);
            }
        }
    }

    /// Calls `f` on every constant and address literal.
    pub fn for_each_literal(&self, f: &mut impl FnMut(Value)) {
        match self {
            Expr::Const(c) | Expr::Addr(c) => f(*c),
            Expr::Reg(_) => {}
            Expr::Not(e) => e.for_each_literal(f),
            Expr::Bin(_, a, b) => {
                a.for_each_literal(f);
                b.for_each_literal(f);
            }
        }
    }
}

/// The command carried by an instruction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Load { reg: RegId, addr: Expr },
    Store { addr: Expr, value: Expr },
    Fence,
    Assign { reg: RegId, expr: Expr },
    Assume(Expr),
}

impl Command {
    pub fn is_store(&self) -> bool {
        matches!(self, Command::Store { .. })
    }

    pub fn is_load(&self) -> bool {
        matches!(self, Command::Load { .. })
    }

    pub fn is_fence(&self) -> bool {
        matches!(self, Command::Fence)
    }

    /// Calls `f` on every register read or written by the command.
    pub fn for_each_reg(&self, f: &mut impl FnMut(RegId)) {
        match self {
            Command::Load { reg, addr } => {
                f(*reg);
                addr.for_each_reg(f);
            }
            Command::Store { addr, value } => {
                addr.for_each_reg(f);
                value.for_each_reg(f);
            }
            Command::Fence => {}
            Command::Assign { reg, expr } => {
                f(*reg);
                expr.for_each_reg(f);
            }
            Command::Assume(e) => e.for_each_reg(f),
        }
    }

    fn for_each_literal(&self, f: &mut impl FnMut(Value)) {
        match self {
            Command::Load { addr, .. } => addr.for_each_literal(f),
            Command::Store { addr, value } => {
                addr.for_each_literal(f);
                value.for_each_literal(f);
            }
            Command::Fence => {}
            Command::Assign { expr, .. } => expr.for_each_literal(f),
            Command::Assume(e) => e.for_each_literal(f),
        }
    }
}

/// A control-flow edge `src --cmd--> dst` with a program-wide unique id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub id: String,
    pub src: StateId,
    pub dst: StateId,
    pub cmd: Command,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub thread: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub name: String,
    pub states: Vec<String>,
    pub init: StateId,
    pub instructions: Vec<Instruction>,
}

impl Thread {
    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q as usize]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| i as StateId)
    }

    /// Adds a state with the given name, or returns the existing one.
    pub fn intern_state(&mut self, name: &str) -> StateId {
        match self.state_index(name) {
            Some(q) => q,
            None => {
                self.states.push(name.to_string());
                (self.states.len() - 1) as StateId
            }
        }
    }

    pub fn instruction_index(&self, id: &str) -> Option<usize> {
        self.instructions.iter().position(|i| i.id == id)
    }

    /// Returns an instruction id of the canonical form
    /// `thread.src.dst.k` that is not yet used in this thread.
    pub fn fresh_instruction_id(&self, src: StateId, dst: StateId) -> String {
        let base = format!(
            "{}.{}.{}",
            self.name,
            self.state_name(src),
            self.state_name(dst)
        );
        (0..)
            .map(|k| format!("{base}.{k}"))
            .find(|id| self.instructions.iter().all(|i| &i.id != id))
            .expect("unbounded search")
    }

    /// Appends an instruction with a freshly generated id.
    pub fn push_instruction(&mut self, src: StateId, dst: StateId, cmd: Command) -> usize {
        let id = self.fresh_instruction_id(src, dst);
        self.instructions.push(Instruction { id, src, dst, cmd });
        self.instructions.len() - 1
    }

    /// True if the control-flow graph of the thread has a cycle.
    pub fn is_cyclic(&self) -> bool {
        let n = self.states.len();
        let mut indeg = vec![0usize; n];
        for i in &self.instructions {
            indeg[i.dst as usize] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&q| indeg[q] == 0).collect();
        let mut seen = 0;
        while let Some(q) = stack.pop() {
            seen += 1;
            for i in &self.instructions {
                if i.src as usize == q {
                    indeg[i.dst as usize] -= 1;
                    if indeg[i.dst as usize] == 0 {
                        stack.push(i.dst as usize);
                    }
                }
            }
        }
        seen < n
    }
}

/// A memory location a goal can constrain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Addr(Value),
    Reg(RegId),
}

/// Goal: per-thread control constraints and a conjunction of equalities.
///
/// A thread constraint is satisfied when the thread is in any of the listed
/// states. Goal states additionally require all store buffers to be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoalSpec {
    pub pcs: Vec<(usize, Vec<StateId>)>,
    pub values: Vec<(Location, Value)>,
}

/// A complete program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub domain: DomainConfig,
    /// Address names; the name at index `v` denotes address `v`.
    pub addresses: Vec<String>,
    pub registers: Vec<Register>,
    pub threads: Vec<Thread>,
    pub goal: GoalSpec,
}

/// Identifies an instruction by thread and position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstrRef {
    pub thread: usize,
    pub index: usize,
}

impl Program {
    pub fn domain_size(&self) -> usize {
        self.domain.size()
    }

    pub fn instr(&self, r: InstrRef) -> &Instruction {
        &self.threads[r.thread].instructions[r.index]
    }

    pub fn thread_index(&self, name: &str) -> Option<usize> {
        self.threads.iter().position(|t| t.name == name)
    }

    pub fn register_index(&self, name: &str) -> Option<RegId> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .map(|i| RegId(i as u32))
    }

    pub fn address_index(&self, name: &str) -> Option<Value> {
        self.addresses
            .iter()
            .position(|a| a == name)
            .map(|i| i as Value)
    }

    pub fn register(&self, r: RegId) -> &Register {
        &self.registers[r.0 as usize]
    }

    /// Registers owned by thread `t`, in global order.
    pub fn thread_registers(&self, t: usize) -> impl Iterator<Item = RegId> + '_ {
        self.registers
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.thread == t)
            .map(|(i, _)| RegId(i as u32))
    }

    /// Adds a register owned by `thread`; the name must be unused.
    pub fn add_register(&mut self, name: &str, thread: usize) -> RegId {
        debug_assert!(self.register_index(name).is_none());
        self.registers.push(Register {
            name: name.to_string(),
            thread,
        });
        RegId((self.registers.len() - 1) as u32)
    }

    /// Finds an instruction by its id.
    pub fn find_instr(&self, id: &str) -> Option<InstrRef> {
        self.threads.iter().enumerate().find_map(|(t, th)| {
            th.instruction_index(id)
                .map(|index| InstrRef { thread: t, index })
        })
    }

    /// Map from instruction id to its position.
    pub fn instr_index_map(&self) -> HashMap<&str, InstrRef> {
        let mut m = HashMap::new();
        for (t, th) in self.threads.iter().enumerate() {
            for (index, i) in th.instructions.iter().enumerate() {
                m.insert(i.id.as_str(), InstrRef { thread: t, index });
            }
        }
        m
    }

    /// True if no thread's control-flow graph has a cycle.
    pub fn is_acyclic(&self) -> bool {
        self.threads.iter().all(|t| !t.is_cyclic())
    }

    /// Total number of instructions over all threads.
    pub fn instruction_count(&self) -> usize {
        self.threads.iter().map(|t| t.instructions.len()).sum()
    }

    /// Total number of control states over all threads.
    pub fn state_count(&self) -> usize {
        self.threads.iter().map(|t| t.states.len()).sum()
    }

    /// Human-readable name of a location.
    pub fn location_name(&self, loc: Location) -> String {
        match loc {
            Location::Addr(a) => self
                .addresses
                .get(a as usize)
                .cloned()
                .unwrap_or_else(|| a.to_string()),
            Location::Reg(r) => self.register(r).name.clone(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
