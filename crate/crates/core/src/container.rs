//! The program container: one JSON document holding the instrumented
//! program text, the CFI metadata, and the pass report. Human-diffable;
//! produced by `compile`, consumed by `run` and `campaign`.

use serde::{Deserialize, Serialize};

use crate::ancode::AnParams;
use crate::cfi::{CfiMeta, CheckPolicy};
use crate::instrument::{BuildOutput, PassReport, PipelineConfig};
use crate::mir::{parse, print, ExecOptions, Program, SyntaxError};

pub const CONTAINER_KIND: &str = "container";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Container {
    pub kind: String,
    pub pipeline: String,
    pub params: AnParams,
    pub seed: u64,
    pub policy: CheckPolicy,
    /// Canonical text of the instrumented program.
    pub program: String,
    pub cfi_meta: CfiMeta,
    pub report: PassReport,
    /// Modeled cycles of a fault-free run of the first function on default
    /// (all-zero) inputs, when such a run completes.
    pub cycles_default_input: Option<u64>,
}

impl Container {
    pub fn from_build(out: &BuildOutput, cfg: &PipelineConfig, cycles: Option<u64>) -> Self {
        Self {
            kind: CONTAINER_KIND.to_string(),
            pipeline: out.report.pipeline.clone(),
            params: cfg.params,
            seed: cfg.seed,
            policy: cfg.policy,
            program: print(&out.program),
            cfi_meta: out.meta.clone(),
            report: out.report.clone(),
            cycles_default_input: cycles,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("container serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn parse_program(&self) -> Result<Program, SyntaxError> {
        parse(&self.program)
    }

    /// Execution options for running a function of this container: the
    /// CFI state starts at the function's expected entry signature.
    pub fn exec_options(&self, func: &str, assert_an: bool) -> ExecOptions {
        ExecOptions {
            initial_cfi: self.cfi_meta.initial_state(func).unwrap_or(0),
            an_assert: assert_an.then(|| self.report.an_assert(&self.params)),
            ..Default::default()
        }
    }
}
