//! Mini intermediate representation.
//!
//! Programs are functions of basic blocks of register-machine instructions:
//! unlimited zero-initialized 32-bit virtual registers, flat word-addressed
//! memory, explicit terminators. The text format is line-oriented (see
//! [`parse`]/[`print`]); [`validate`] enforces the structural invariants and
//! [`interp`] executes deterministically with fault-injection hooks.

mod interp;
mod parse;
mod print;
mod validate;

pub use interp::{
    interpret, AnAssert, AssertSite, BranchEvent, ExecOptions, ExecResult, HaltStatus, Inputs,
    TracePoint, TrapKind, VmSetupError,
};
pub use parse::{parse, SyntaxError};
pub use print::print;
pub use validate::{has_errors, validate, Diagnostic, Severity, ValidateOptions};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::enccmp::Predicate;

/// A virtual register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reg(pub u32);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Highest register index referenced anywhere, if any.
    pub fn max_reg(&self) -> Option<u32> {
        self.functions.iter().filter_map(Function::max_reg).max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// Marks the function for branch protection by the pass pipeline.
    pub protect: bool,
    /// The first block is the entry block.
    pub blocks: Vec<Block>,
}

impl Function {
    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn max_reg(&self) -> Option<u32> {
        self.blocks
            .iter()
            .flat_map(|b| b.instrs.iter())
            .flat_map(|i| i.defs().into_iter().chain(i.uses()).map(|r| r.0))
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    /// All instructions including the terminator (validated to be last).
    pub instrs: Vec<Instr>,
}

impl Block {
    /// The terminator of a validated block.
    pub fn terminator(&self) -> Option<&Instr> {
        self.instrs.last().filter(|i| i.is_terminator())
    }
}

/// Binary ALU operations, all wrapping 32-bit; UDIV/UMOD trap on zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Udiv,
    Umod,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Udiv => "udiv",
            BinOp::Umod => "umod",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Const {
        dst: Reg,
        imm: u32,
    },
    Bin {
        op: BinOp,
        dst: Reg,
        a: Reg,
        b: Reg,
    },
    Load {
        dst: Reg,
        addr: Reg,
    },
    Store {
        addr: Reg,
        src: Reg,
    },
    Select {
        dst: Reg,
        pred: Predicate,
        a: Reg,
        b: Reg,
        if_true: Reg,
        if_false: Reg,
    },
    Cbr {
        pred: Predicate,
        a: Reg,
        b: Reg,
        if_true: String,
        if_false: String,
    },
    Switch {
        a: Reg,
        cases: Vec<(u32, String)>,
        default: String,
    },
    Jmp {
        target: String,
    },
    Ret {
        src: Reg,
    },
    Trap {
        code: u32,
    },
    CfiUpdate {
        id: u32,
    },
    CfiMerge {
        cond: Reg,
        corr: u32,
    },
    CfiCheck {
        expected: u32,
    },
}

impl Instr {
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Instr::Cbr { .. }
                | Instr::Switch { .. }
                | Instr::Jmp { .. }
                | Instr::Ret { .. }
                | Instr::Trap { .. }
        )
    }

    pub fn is_cfi(&self) -> bool {
        matches!(
            self,
            Instr::CfiUpdate { .. } | Instr::CfiMerge { .. } | Instr::CfiCheck { .. }
        )
    }

    /// Successor labels of a terminator, in edge order.
    pub fn successors(&self) -> Vec<&str> {
        match self {
            Instr::Cbr {
                if_true, if_false, ..
            } => vec![if_true, if_false],
            Instr::Switch { cases, default, .. } => {
                let mut v: Vec<&str> = cases.iter().map(|(_, l)| l.as_str()).collect();
                v.push(default);
                v
            }
            Instr::Jmp { target } => vec![target],
            _ => vec![],
        }
    }

    /// Register written, if any.
    pub fn defs(&self) -> Option<Reg> {
        match self {
            Instr::Const { dst, .. }
            | Instr::Bin { dst, .. }
            | Instr::Load { dst, .. }
            | Instr::Select { dst, .. } => Some(*dst),
            _ => None,
        }
    }

    /// Registers read, in operand order.
    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Instr::Const { .. }
            | Instr::Jmp { .. }
            | Instr::Trap { .. }
            | Instr::CfiUpdate { .. }
            | Instr::CfiCheck { .. } => vec![],
            Instr::Bin { a, b, .. } => vec![*a, *b],
            Instr::Load { addr, .. } => vec![*addr],
            Instr::Store { addr, src } => vec![*addr, *src],
            Instr::Select {
                a,
                b,
                if_true,
                if_false,
                ..
            } => vec![*a, *b, *if_true, *if_false],
            Instr::Cbr { a, b, .. } => vec![*a, *b],
            Instr::Switch { a, .. } => vec![*a],
            Instr::Ret { src } => vec![*src],
            Instr::CfiMerge { cond, .. } => vec![*cond],
        }
    }

    /// Mnemonic used in cost reports.
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instr::Const { .. } => "const",
            Instr::Bin { op, .. } => op.name(),
            Instr::Load { .. } => "load",
            Instr::Store { .. } => "store",
            Instr::Select { .. } => "select",
            Instr::Cbr { .. } => "cbr",
            Instr::Switch { .. } => "switch",
            Instr::Jmp { .. } => "jmp",
            Instr::Ret { .. } => "ret",
            Instr::Trap { .. } => "trap",
            Instr::CfiUpdate { .. } => "cfi_update",
            Instr::CfiMerge { .. } => "cfi_merge",
            Instr::CfiCheck { .. } => "cfi_check",
        }
    }
}

/// Modeled cycles per instruction. UDIV/UMOD are pinned to 7 (a fixed
/// midpoint of the 2..12 range hardware division typically needs) so runs
/// stay deterministic; memory operations cost 2, checks 2, the rest 1.
pub fn cost_model(instr: &Instr) -> u64 {
    match instr {
        Instr::Bin {
            op: BinOp::Udiv, ..
        }
        | Instr::Bin {
            op: BinOp::Umod, ..
        } => 7,
        Instr::Load { .. } | Instr::Store { .. } => 2,
        Instr::CfiCheck { .. } => 2,
        _ => 1,
    }
}
