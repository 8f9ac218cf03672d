//! The instrumentation pipeline.
//!
//! Three build flavors, all starting from select/switch lowering and all
//! ending in CFI instrumentation (the threat model assumes an
//! instruction-granular CFI scheme is always present):
//!
//! - `an+cfi`: AN-code the comparison slices, emit encoded compares, link
//!   the condition symbols into the CFI state (the protected build);
//! - `cfi`: CFI only: control-flow edges are checked but branch
//!   *decisions* are a plain 1-bit signal (the unprotected baseline);
//! - `dup:k`: duplicate every protected branch k times, then CFI (the
//!   classical countermeasure to compare against).

pub mod ancoder;
pub mod cfipass;
pub mod cost;
pub mod duplicate;
pub mod lower;
pub mod slice;

pub use ancoder::{an_code_pass, AnCodeConfig, AnCodeOutput, CompareSite, ModMode, OpcodeMix};
pub use cfipass::cfi_pass;
pub use cost::{count_costs, StaticCosts};
pub use duplicate::duplicate_branches;
pub use lower::lower_select_switch;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ancode::AnParams;
use crate::cfi::{CfiError, CfiMeta, CheckPolicy};
use crate::mir::{
    has_errors, validate, AnAssert, AssertSite, Diagnostic, Program, Severity, ValidateOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    /// Lower, AN-code, CFI-instrument.
    AnCfi,
    /// Lower, CFI-instrument (no encoded compares).
    CfiOnly,
    /// Lower, duplicate branches k times, CFI-instrument.
    Dup(u32),
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineKind::AnCfi => write!(f, "an+cfi"),
            PipelineKind::CfiOnly => write!(f, "cfi"),
            PipelineKind::Dup(k) => write!(f, "dup:{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub params: AnParams,
    pub seed: u64,
    pub policy: CheckPolicy,
    pub mod_mode: ModMode,
    pub branch_on_false: bool,
    pub bitop_boundaries: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kind: PipelineKind::AnCfi,
            params: AnParams::default(),
            seed: 0xB1A5_0F5E,
            policy: CheckPolicy::EveryBlock,
            mod_mode: ModMode::Umod,
            branch_on_false: false,
            bitop_boundaries: false,
        }
    }
}

/// Everything a build produces besides the program: protection metadata
/// and the pass report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassReport {
    pub pipeline: String,
    pub mod_mode: ModMode,
    pub compare_sites: Vec<CompareSite>,
    pub unprotected_windows: Vec<String>,
    pub warnings: Vec<String>,
    pub duplication: Option<u32>,
    pub static_costs: StaticCosts,
}

impl PassReport {
    /// Assertion sites for the VM's fault-free code-word checking mode.
    pub fn an_assert(&self, params: &AnParams) -> AnAssert {
        AnAssert {
            a: params.a(),
            n_max: params.n_max(),
            sites: self
                .compare_sites
                .iter()
                .map(|s| AssertSite {
                    func: s.func.clone(),
                    block: s.block.clone(),
                    x: s.operand_x,
                    y: s.operand_y,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub program: Program,
    pub meta: CfiMeta,
    pub report: PassReport,
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("validation failed:\n{}", format_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Cfi(#[from] CfiError),
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Runs the configured pipeline over a source program.
pub fn build(prog: &Program, cfg: &PipelineConfig) -> Result<BuildOutput, BuildError> {
    let diags = validate(
        prog,
        &ValidateOptions {
            allow_cfi: false,
            params: cfg.params,
        },
    );
    if has_errors(&diags) {
        return Err(BuildError::Invalid(diags));
    }
    let mut warnings: Vec<String> = diags
        .iter()
        .filter(|d| d.severity == Severity::Warning)
        .map(|d| d.message.clone())
        .collect();

    let lowered = lower_select_switch(prog);

    let (pre_cfi, protected, groups, compare_sites, windows, duplication) = match cfg.kind {
        PipelineKind::AnCfi => {
            let an_cfg = AnCodeConfig {
                params: cfg.params,
                mod_mode: cfg.mod_mode,
                branch_on_false: cfg.branch_on_false,
                bitop_boundaries: cfg.bitop_boundaries,
            };
            let out = an_code_pass(&lowered, &an_cfg).map_err(BuildError::Invalid)?;
            warnings.extend(out.warnings);
            (
                out.program,
                out.protected,
                out.groups,
                out.compare_sites,
                out.unprotected_windows,
                None,
            )
        }
        PipelineKind::CfiOnly => (
            lowered,
            Default::default(),
            Default::default(),
            vec![],
            vec![],
            None,
        ),
        PipelineKind::Dup(k) => {
            let dup = duplicate_branches(&lowered, k);
            (
                dup,
                Default::default(),
                Default::default(),
                vec![],
                vec![],
                Some(k),
            )
        }
    };

    let (program, meta) = cfi_pass(&pre_cfi, cfg.seed, cfg.policy, &protected, &groups)?;
    let static_costs = count_costs(&program);

    Ok(BuildOutput {
        program,
        meta,
        report: PassReport {
            pipeline: cfg.kind.to_string(),
            mod_mode: cfg.mod_mode,
            compare_sites,
            unprotected_windows: windows,
            warnings,
            duplication,
            static_costs,
        },
    })
}
