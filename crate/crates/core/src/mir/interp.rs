//! Deterministic big-step interpreter with fault-injection hooks.
//!
//! Dynamic indices count *fetched* instructions: a skipped instruction
//! occupies a dynamic slot (it was reached) but executes nothing and costs
//! nothing. Faults are scheduled against these indices, which match the
//! indices of the reference trace for the fault-free prefix.
//!
//! Skipping a terminator falls through to the next block in declaration
//! order, mirroring how a real fetch unit would continue; falling off the
//! last block traps as a bad fetch.

use serde::{Deserialize, Serialize};

use crate::cfi;
use crate::enccmp::ConditionSymbol;
use crate::faultsim::{FaultPlan, FaultSpec};
use crate::mir::{cost_model, BinOp, Function, Instr, Program, Reg};

#[derive(Debug, thiserror::Error)]
pub enum VmSetupError {
    #[error("unknown function @{0}")]
    UnknownFunction(String),
    #[error("function @{0} has no blocks")]
    EmptyFunction(String),
    #[error("initial memory address {addr} outside the {words}-word memory")]
    MemoryInput { addr: u32, words: u32 },
}

/// Initial register and memory assignments; everything else is zero.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub regs: Vec<(Reg, u32)>,
    pub mem: Vec<(u32, u32)>,
}

/// Fault-free code-word assertions: before a protected branch executes,
/// the recorded operand registers must hold valid code words. A debugging
/// aid for slice completeness; meaningful on fault-free runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnAssert {
    pub a: u32,
    pub n_max: u32,
    pub sites: Vec<AssertSite>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssertSite {
    pub func: String,
    pub block: String,
    pub x: Reg,
    pub y: Reg,
}

#[derive(Debug, Clone)]
pub struct ExecOptions {
    /// Maximum fetched instructions before the run counts as hung.
    pub fuel: u64,
    /// Memory size in 32-bit words.
    pub mem_words: u32,
    /// Initial CFI signature (the instrumented entry block's expected
    /// entry signature; zero for uninstrumented programs).
    pub initial_cfi: u32,
    pub an_assert: Option<AnAssert>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            fuel: 10_000_000,
            mem_words: 1 << 16,
            initial_cfi: 0,
            an_assert: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapKind {
    CfiViolation,
    AnIntegrity,
    DivByZero,
    BadMemory,
    Fuel,
    /// Explicit `trap` instruction (duplication disagreement and similar
    /// software guards).
    Guard(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltStatus {
    Returned(u32),
    Trapped(TrapKind),
}

/// One fetched instruction: (block index, instruction index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TracePoint {
    pub block: u32,
    pub instr: u32,
}

/// The direction actually taken by a conditional branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchEvent {
    pub block: u32,
    pub instr: u32,
    pub taken_true: bool,
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub status: HaltStatus,
    /// Fetched instructions in dynamic order.
    pub trace: Vec<TracePoint>,
    /// Taken directions of all conditional branches, in dynamic order.
    pub branch_events: Vec<BranchEvent>,
    pub cycles: u64,
    pub mem_digest: u64,
}

impl ExecResult {
    pub fn return_value(&self) -> Option<u32> {
        match self.status {
            HaltStatus::Returned(v) => Some(v),
            HaltStatus::Trapped(_) => None,
        }
    }
}

struct FaultSchedule {
    reg_flips: Vec<(u64, Reg, u32)>,
    skips: Vec<u64>,
    forces: Vec<(u64, bool)>,
}

impl FaultSchedule {
    fn new(plan: &FaultPlan) -> Self {
        let mut s = FaultSchedule {
            reg_flips: Vec::new(),
            skips: Vec::new(),
            forces: Vec::new(),
        };
        for f in &plan.faults {
            match *f {
                FaultSpec::RegFlip { at, reg, mask } => s.reg_flips.push((at, reg, mask)),
                FaultSpec::InstrSkip { at } => s.skips.push(at),
                FaultSpec::BranchForce { at, taken_true } => s.forces.push((at, taken_true)),
            }
        }
        s
    }

    fn flips_at(&self, at: u64) -> impl Iterator<Item = (Reg, u32)> + '_ {
        self.reg_flips
            .iter()
            .filter(move |(t, _, _)| *t == at)
            .map(|(_, r, m)| (*r, *m))
    }

    fn skip_at(&self, at: u64) -> bool {
        self.skips.contains(&at)
    }

    fn force_at(&self, at: u64) -> Option<bool> {
        self.forces.iter().find(|(t, _)| *t == at).map(|(_, d)| *d)
    }

    fn max_reg(&self) -> Option<u32> {
        self.reg_flips.iter().map(|(_, r, _)| r.0).max()
    }
}

/// Executes `func` of `prog` to completion (or trap) under a fault plan.
pub fn interpret(
    prog: &Program,
    func: &str,
    inputs: &Inputs,
    plan: &FaultPlan,
    opts: &ExecOptions,
) -> Result<ExecResult, VmSetupError> {
    let f = prog
        .function(func)
        .ok_or_else(|| VmSetupError::UnknownFunction(func.to_string()))?;
    if f.blocks.is_empty() {
        return Err(VmSetupError::EmptyFunction(func.to_string()));
    }

    let schedule = FaultSchedule::new(plan);
    let reg_count = prog
        .max_reg()
        .into_iter()
        .chain(inputs.regs.iter().map(|(r, _)| r.0))
        .chain(schedule.max_reg())
        .max()
        .map(|m| m as usize + 1)
        .unwrap_or(1);

    let mut regs = vec![0u32; reg_count];
    for (r, v) in &inputs.regs {
        regs[r.0 as usize] = *v;
    }
    let mut mem = vec![0u32; opts.mem_words as usize];
    for (addr, v) in &inputs.mem {
        if (*addr as usize) >= mem.len() {
            return Err(VmSetupError::MemoryInput {
                addr: *addr,
                words: opts.mem_words,
            });
        }
        mem[*addr as usize] = *v;
    }

    let mut vm = Vm {
        f,
        func_name: func,
        regs,
        mem,
        cfi_state: cfi::CfiState(opts.initial_cfi),
        cycles: 0,
        trace: Vec::new(),
        branch_events: Vec::new(),
    };
    let status = vm.run(&schedule, opts);
    Ok(ExecResult {
        status,
        trace: vm.trace,
        branch_events: vm.branch_events,
        cycles: vm.cycles,
        mem_digest: digest(&vm.mem),
    })
}

struct Vm<'a> {
    f: &'a Function,
    func_name: &'a str,
    regs: Vec<u32>,
    mem: Vec<u32>,
    cfi_state: cfi::CfiState,
    cycles: u64,
    trace: Vec<TracePoint>,
    branch_events: Vec<BranchEvent>,
}

impl Vm<'_> {
    fn run(&mut self, schedule: &FaultSchedule, opts: &ExecOptions) -> HaltStatus {
        let mut block = 0usize;
        let mut index = 0usize;
        let mut dyn_idx = 0u64;

        loop {
            if dyn_idx >= opts.fuel {
                return HaltStatus::Trapped(TrapKind::Fuel);
            }
            if index >= self.f.blocks[block].instrs.len() {
                // Fell past the end of a block (terminator was skipped).
                block += 1;
                index = 0;
                if block >= self.f.blocks.len() {
                    return HaltStatus::Trapped(TrapKind::BadMemory);
                }
                continue;
            }

            for (r, mask) in schedule.flips_at(dyn_idx) {
                self.regs[r.0 as usize] ^= mask;
            }
            self.trace.push(TracePoint {
                block: block as u32,
                instr: index as u32,
            });

            if schedule.skip_at(dyn_idx) {
                dyn_idx += 1;
                index += 1;
                continue;
            }

            let instr = &self.f.blocks[block].instrs[index];
            self.cycles += cost_model(instr);
            let forced = schedule.force_at(dyn_idx);
            dyn_idx += 1;

            match self.step(instr, block, index, forced, opts) {
                Step::Next => index += 1,
                Step::Goto(b) => {
                    block = b;
                    index = 0;
                }
                Step::Halt(status) => return status,
            }
        }
    }

    fn step(
        &mut self,
        instr: &Instr,
        block: usize,
        index: usize,
        forced: Option<bool>,
        opts: &ExecOptions,
    ) -> Step {
        match instr {
            Instr::Const { dst, imm } => {
                self.regs[dst.0 as usize] = *imm;
                Step::Next
            }
            Instr::Bin { op, dst, a, b } => {
                let x = self.regs[a.0 as usize];
                let y = self.regs[b.0 as usize];
                let v = match op {
                    BinOp::Add => x.wrapping_add(y),
                    BinOp::Sub => x.wrapping_sub(y),
                    BinOp::Mul => x.wrapping_mul(y),
                    BinOp::Udiv | BinOp::Umod => {
                        if y == 0 {
                            return Step::Halt(HaltStatus::Trapped(TrapKind::DivByZero));
                        }
                        if matches!(op, BinOp::Udiv) {
                            x / y
                        } else {
                            x % y
                        }
                    }
                    BinOp::And => x & y,
                    BinOp::Or => x | y,
                    BinOp::Xor => x ^ y,
                };
                self.regs[dst.0 as usize] = v;
                Step::Next
            }
            Instr::Load { dst, addr } => {
                let a = self.regs[addr.0 as usize] as usize;
                if a >= self.mem.len() {
                    return Step::Halt(HaltStatus::Trapped(TrapKind::BadMemory));
                }
                self.regs[dst.0 as usize] = self.mem[a];
                Step::Next
            }
            Instr::Store { addr, src } => {
                let a = self.regs[addr.0 as usize] as usize;
                if a >= self.mem.len() {
                    return Step::Halt(HaltStatus::Trapped(TrapKind::BadMemory));
                }
                self.mem[a] = self.regs[src.0 as usize];
                Step::Next
            }
            Instr::Select {
                dst,
                pred,
                a,
                b,
                if_true,
                if_false,
            } => {
                let take = pred.eval(self.regs[a.0 as usize], self.regs[b.0 as usize]);
                let src = if take { *if_true } else { *if_false };
                self.regs[dst.0 as usize] = self.regs[src.0 as usize];
                Step::Next
            }
            Instr::Cbr {
                pred,
                a,
                b,
                if_true,
                if_false,
            } => {
                if let Some(assert) = &opts.an_assert {
                    if let Some(site) = assert
                        .sites
                        .iter()
                        .find(|s| s.func == self.func_name && s.block == self.f.blocks[block].label)
                    {
                        for r in [site.x, site.y] {
                            let w = self.regs[r.0 as usize];
                            if !w.is_multiple_of(assert.a) || w / assert.a > assert.n_max {
                                return Step::Halt(HaltStatus::Trapped(TrapKind::AnIntegrity));
                            }
                        }
                    }
                }
                let natural = pred.eval(self.regs[a.0 as usize], self.regs[b.0 as usize]);
                let taken = forced.unwrap_or(natural);
                self.branch_events.push(BranchEvent {
                    block: block as u32,
                    instr: index as u32,
                    taken_true: taken,
                });
                let label = if taken { if_true } else { if_false };
                Step::Goto(self.f.block_index(label).expect("validated label"))
            }
            Instr::Switch { a, cases, default } => {
                let v = self.regs[a.0 as usize];
                let label = cases
                    .iter()
                    .find(|(c, _)| *c == v)
                    .map(|(_, l)| l)
                    .unwrap_or(default);
                Step::Goto(self.f.block_index(label).expect("validated label"))
            }
            Instr::Jmp { target } => {
                Step::Goto(self.f.block_index(target).expect("validated label"))
            }
            Instr::Ret { src } => Step::Halt(HaltStatus::Returned(self.regs[src.0 as usize])),
            Instr::Trap { code } => Step::Halt(HaltStatus::Trapped(TrapKind::Guard(*code))),
            Instr::CfiUpdate { id } => {
                self.cfi_state = cfi::state_update(self.cfi_state, *id);
                Step::Next
            }
            Instr::CfiMerge { cond, corr } => {
                self.cfi_state = cfi::merge_condition(
                    self.cfi_state,
                    ConditionSymbol(self.regs[cond.0 as usize]),
                    *corr,
                );
                Step::Next
            }
            Instr::CfiCheck { expected } => {
                if cfi::check(self.cfi_state, *expected).is_err() {
                    return Step::Halt(HaltStatus::Trapped(TrapKind::CfiViolation));
                }
                Step::Next
            }
        }
    }
}

enum Step {
    Next,
    Goto(usize),
    Halt(HaltStatus),
}

/// FNV-1a over the final memory image.
fn digest(mem: &[u32]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for w in mem {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}
