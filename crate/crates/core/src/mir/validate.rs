//! Structural validation and protection-related lints.

use std::collections::HashSet;
use std::fmt;

use crate::ancode::AnParams;
use crate::instrument::slice::compute_slice;
use crate::mir::{Instr, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Default)]
pub struct ValidateOptions {
    /// Instrumented programs may contain CFI opcodes; source programs
    /// must not.
    pub allow_cfi: bool,
    pub params: AnParams,
}

/// Checks the structural invariants (one terminator per block, as the last
/// instruction; all labels resolve; CFI opcodes only where allowed) plus
/// protection lints: constants beyond `n_max` feeding a protected
/// comparison, and compared registers that double as address material:
/// loop counters must be decoupled before protection.
pub fn validate(prog: &Program, opts: &ValidateOptions) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let error = |diags: &mut Vec<Diagnostic>, message: String| {
        diags.push(Diagnostic {
            severity: Severity::Error,
            message,
        });
    };
    let warn = |diags: &mut Vec<Diagnostic>, message: String| {
        diags.push(Diagnostic {
            severity: Severity::Warning,
            message,
        });
    };

    if prog.functions.is_empty() {
        error(&mut diags, "program has no functions".into());
    }
    let mut fn_names = HashSet::new();
    for f in &prog.functions {
        if !fn_names.insert(f.name.as_str()) {
            error(&mut diags, format!("duplicate function @{}", f.name));
        }
        if f.blocks.is_empty() {
            error(&mut diags, format!("@{}: function has no blocks", f.name));
            continue;
        }
        let mut labels = HashSet::new();
        for b in &f.blocks {
            if !labels.insert(b.label.as_str()) {
                error(
                    &mut diags,
                    format!("@{}: duplicate block %{}", f.name, b.label),
                );
            }
        }
        for b in &f.blocks {
            let terms: Vec<usize> = b
                .instrs
                .iter()
                .enumerate()
                .filter(|(_, i)| i.is_terminator())
                .map(|(i, _)| i)
                .collect();
            match terms.as_slice() {
                [] => error(
                    &mut diags,
                    format!("@{} %{}: block has no terminator", f.name, b.label),
                ),
                [last] if *last == b.instrs.len() - 1 => {}
                [pos] => error(
                    &mut diags,
                    format!(
                        "@{} %{}: instruction after terminator (position {})",
                        f.name,
                        b.label,
                        pos + 1
                    ),
                ),
                _ => error(
                    &mut diags,
                    format!("@{} %{}: more than one terminator", f.name, b.label),
                ),
            }
            for i in &b.instrs {
                for succ in i.successors() {
                    if f.block_index(succ).is_none() {
                        error(
                            &mut diags,
                            format!("@{} %{}: undefined label %{succ}", f.name, b.label),
                        );
                    }
                }
                if !opts.allow_cfi && i.is_cfi() {
                    error(
                        &mut diags,
                        format!(
                            "@{} %{}: CFI opcode `{}` in uninstrumented source",
                            f.name,
                            b.label,
                            i.mnemonic()
                        ),
                    );
                }
            }
        }

        if f.protect {
            lint_protected(f, opts, &mut diags, &warn);
        }
    }
    diags
}

fn lint_protected(
    f: &crate::mir::Function,
    opts: &ValidateOptions,
    diags: &mut Vec<Diagnostic>,
    warn: &impl Fn(&mut Vec<Diagnostic>, String),
) {
    for b in &f.blocks {
        for instr in &b.instrs {
            let Instr::Cbr { a, b: rb, .. } = instr else {
                continue;
            };
            let slice = compute_slice(f, [*a, *rb]);
            for &(cb, ci) in &slice.consts {
                if let Instr::Const { imm, dst } = &f.blocks[cb].instrs[ci] {
                    if *imm > opts.params.n_max() {
                        warn(
                            diags,
                            format!(
                                "@{} %{}: constant {imm} in {dst} feeds a protected \
                                 comparison but exceeds n_max {}",
                                f.name,
                                f.blocks[cb].label,
                                opts.params.n_max()
                            ),
                        );
                    }
                }
            }
            // A compared register that also produces addresses is almost
            // always an undecoupled loop counter; encoding it would break
            // the address arithmetic.
            for block in &f.blocks {
                for other in &block.instrs {
                    let addr = match other {
                        Instr::Load { addr, .. } => *addr,
                        Instr::Store { addr, .. } => *addr,
                        _ => continue,
                    };
                    if slice.regs.contains(&addr) {
                        warn(
                            diags,
                            format!(
                                "@{} %{}: register {addr} feeds a protected comparison \
                                 and is used as a memory address; decouple the counter \
                                 before protecting",
                                f.name, block.label
                            ),
                        );
                    }
                }
            }
        }
    }
}

/// True when the diagnostics contain at least one error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
