//! Fault models, injected runs, and outcome classification.
//!
//! Three attacker capabilities are modeled, matching the three ways a
//! conditional branch can be subverted: flipping register bits (operand or
//! condition corruption), forcing a branch direction (branch-unit
//! corruption), and skipping an instruction.
//!
//! Every faulted run is classified against the fault-free reference run of
//! the same build:
//!
//! - a trap means the fault was *detected* (by the CFI check, the AN
//!   congruence, or collaterally by the machine);
//! - an undetected wrong branch direction is `SdcControl`, the headline
//!   failure this toolchain exists to eliminate;
//! - undetected wrong outputs are `SdcData`;
//! - identical behavior is `Masked`.

pub mod campaign;
pub mod sweeps;

pub use campaign::{
    program_monte_carlo, trace_exhaustive_campaign, trace_monte_carlo, wilson_ci, CampaignConfig,
    CampaignResult, ModelMix,
};
pub use sweeps::{single_word_fault_sweep, spread_fault_enumeration, TraceCase};

use serde::{Deserialize, Serialize};

use crate::mir::{
    interpret, ExecOptions, ExecResult, HaltStatus, Inputs, Instr, Program, Reg, TrapKind,
    VmSetupError,
};

/// A single planned fault. `at` is a dynamic instruction index (fetch
/// order) relative to the run it is injected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum FaultSpec {
    /// XOR `mask` into `reg` immediately before dynamic instruction `at`.
    RegFlip { at: u64, reg: Reg, mask: u32 },
    /// Override the edge taken by the conditional branch at `at`.
    BranchForce { at: u64, taken_true: bool },
    /// Fetch-and-discard the instruction at `at`.
    InstrSkip { at: u64 },
}

impl FaultSpec {
    pub fn at(&self) -> u64 {
        match self {
            FaultSpec::RegFlip { at, .. }
            | FaultSpec::BranchForce { at, .. }
            | FaultSpec::InstrSkip { at } => *at,
        }
    }
}

/// An ordered list of faults applied within one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub faults: Vec<FaultSpec>,
}

impl FaultPlan {
    pub fn single(fault: FaultSpec) -> Self {
        Self {
            faults: vec![fault],
        }
    }

    /// Plans must target indices inside the reference trace and use
    /// nonzero masks.
    pub fn check(&self, reference_len: u64) -> Result<(), FaultSimError> {
        for f in &self.faults {
            if f.at() >= reference_len {
                return Err(FaultSimError::BadPlan(format!(
                    "dynamic index {} outside the reference trace (length {reference_len})",
                    f.at()
                )));
            }
            if let FaultSpec::RegFlip { mask: 0, .. } = f {
                return Err(FaultSimError::BadPlan("zero flip mask".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one injected run relative to the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    /// AN congruence failure trapped (assertion mode or decode).
    #[serde(rename = "detected_an")]
    DetectedAN,
    /// CFI signature check trapped.
    #[serde(rename = "detected_cfi")]
    DetectedCFI,
    /// Any other trap: div-by-zero, bad memory, fuel exhaustion (a hung
    /// device is observable), or an explicit guard trap.
    DetectedTrapOther,
    /// Behavior identical to the reference.
    Masked,
    /// Run completed but some conditional branch went the other way:
    /// silent control-flow corruption.
    SdcControl,
    /// Run completed on the same branch path but outputs (or the executed
    /// instruction stream) differ: silent data corruption.
    SdcData,
}

/// Per-class counters; merging is commutative so parallel campaigns
/// aggregate deterministically.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub detected_an: u64,
    pub detected_cfi: u64,
    pub detected_other: u64,
    pub masked: u64,
    pub sdc_control: u64,
    pub sdc_data: u64,
}

impl ClassCounts {
    pub fn bump(&mut self, class: OutcomeClass) {
        match class {
            OutcomeClass::DetectedAN => self.detected_an += 1,
            OutcomeClass::DetectedCFI => self.detected_cfi += 1,
            OutcomeClass::DetectedTrapOther => self.detected_other += 1,
            OutcomeClass::Masked => self.masked += 1,
            OutcomeClass::SdcControl => self.sdc_control += 1,
            OutcomeClass::SdcData => self.sdc_data += 1,
        }
    }

    pub fn merge(mut self, other: ClassCounts) -> ClassCounts {
        self.detected_an += other.detected_an;
        self.detected_cfi += other.detected_cfi;
        self.detected_other += other.detected_other;
        self.masked += other.masked;
        self.sdc_control += other.sdc_control;
        self.sdc_data += other.sdc_data;
        self
    }

    pub fn total(&self) -> u64 {
        self.detected_an
            + self.detected_cfi
            + self.detected_other
            + self.masked
            + self.sdc_control
            + self.sdc_data
    }

    pub fn detected(&self) -> u64 {
        self.detected_an + self.detected_cfi + self.detected_other
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FaultSimError {
    #[error("fault plan invalid: {0}")]
    BadPlan(String),
    #[error("exhaustive enumeration needs {combos} evaluations, over the bound of {bound}")]
    Resource { combos: u128, bound: u64 },
    #[error("reference run did not complete (trapped: {0:?})")]
    ReferenceTrapped(TrapKind),
    #[error(transparent)]
    Vm(#[from] VmSetupError),
}

/// A program, its inputs, and the fault-free reference run; fault plans
/// are injected against this context.
pub struct RunContext<'a> {
    pub prog: &'a Program,
    pub func: String,
    pub inputs: Inputs,
    pub opts: ExecOptions,
    pub reference: ExecResult,
}

impl<'a> RunContext<'a> {
    pub fn new(
        prog: &'a Program,
        func: &str,
        inputs: Inputs,
        opts: ExecOptions,
    ) -> Result<Self, FaultSimError> {
        let reference = interpret(prog, func, &inputs, &FaultPlan::default(), &opts)?;
        if let HaltStatus::Trapped(kind) = reference.status {
            return Err(FaultSimError::ReferenceTrapped(kind));
        }
        Ok(Self {
            prog,
            func: func.to_string(),
            inputs,
            opts,
            reference,
        })
    }

    /// Runs the plan and classifies the outcome.
    pub fn inject(&self, plan: &FaultPlan) -> Result<(OutcomeClass, ExecResult), FaultSimError> {
        plan.check(self.reference.trace.len() as u64)?;
        let faulted = interpret(self.prog, &self.func, &self.inputs, plan, &self.opts)?;
        Ok((classify(&self.reference, &faulted), faulted))
    }

    /// Dynamic indices of reference-trace instructions matching `filter`.
    pub fn dynamic_sites(&self, filter: impl Fn(&Instr) -> bool) -> Vec<u64> {
        let f = self
            .prog
            .function(&self.func)
            .expect("context function exists");
        self.reference
            .trace
            .iter()
            .enumerate()
            .filter(|(_, tp)| filter(&f.blocks[tp.block as usize].instrs[tp.instr as usize]))
            .map(|(i, _)| i as u64)
            .collect()
    }

    /// The static instruction at a reference-trace position.
    pub fn instr_at(&self, dyn_idx: u64) -> &Instr {
        let tp = self.reference.trace[dyn_idx as usize];
        let f = self
            .prog
            .function(&self.func)
            .expect("context function exists");
        &f.blocks[tp.block as usize].instrs[tp.instr as usize]
    }
}

/// One-shot convenience wrapper around [`RunContext`].
pub fn inject_run(
    prog: &Program,
    func: &str,
    inputs: Inputs,
    opts: ExecOptions,
    plan: &FaultPlan,
) -> Result<(OutcomeClass, ExecResult), FaultSimError> {
    RunContext::new(prog, func, inputs, opts)?.inject(plan)
}

/// Classifies a faulted run against the fault-free reference. Traps win;
/// then any change of a branch direction is control SDC; then any output
/// (or pure path) difference is data SDC; identical behavior is masked.
pub fn classify(reference: &ExecResult, faulted: &ExecResult) -> OutcomeClass {
    match faulted.status {
        HaltStatus::Trapped(TrapKind::CfiViolation) => OutcomeClass::DetectedCFI,
        HaltStatus::Trapped(TrapKind::AnIntegrity) => OutcomeClass::DetectedAN,
        HaltStatus::Trapped(_) => OutcomeClass::DetectedTrapOther,
        HaltStatus::Returned(v) => {
            if faulted.branch_events != reference.branch_events {
                OutcomeClass::SdcControl
            } else if reference.return_value() != Some(v)
                || reference.mem_digest != faulted.mem_digest
                || reference.trace != faulted.trace
            {
                OutcomeClass::SdcData
            } else {
                OutcomeClass::Masked
            }
        }
    }
}
