//! The AN coder pass.
//!
//! For every conditional branch in a `protect` function:
//!
//! 1. the backward slice of both compared registers is rewritten into the
//!    AN domain: constants become encoded constants, ADD/SUB stay as they
//!    are (closure), and slice boundaries (LOAD, MUL, UDIV, UMOD, function
//!    inputs) get an explicit encode step (`mul` by A) plus an entry in the
//!    unprotected-window report;
//! 2. the comparison itself is replaced by the inline encoded-compare
//!    sequence producing a condition register;
//! 3. the terminator becomes `cbr eq cond, <symbol constant>, %T, %F`, an
//!    ordinary compare-and-branch against one of the two expected symbols.
//!
//! Each emitted sequence is one instruction *group*: the CFI pass places a
//! single signature update per group, mirroring one update per original
//! instruction.
//!
//! Modulo lowering comes in two flavors: `umod` (single IR instruction)
//! and `mls` (UDIV, then a multiply+subtract pair standing for a fused
//! multiply-subtract). Cost reports count the pair as one MLS unit.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ancode::AnParams;
use crate::cfi::{BranchProtection, GroupMap, ProtectedBranches};
use crate::enccmp::{symbols_for, Predicate};
use crate::instrument::slice::{compute_slice, SliceEndpoint, SliceInfo};
use crate::mir::{BinOp, Block, Diagnostic, Function, Instr, Program, Reg, Severity};

/// How `x % A` is lowered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModMode {
    /// A single `umod` instruction.
    Umod,
    /// `udiv` plus a multiply/subtract pair (as on ISAs without modulo).
    Mls,
}

#[derive(Debug, Clone)]
pub struct AnCodeConfig {
    pub params: AnParams,
    pub mod_mode: ModMode,
    /// Branch on the false symbol instead of the true one (edge roles
    /// swap; detection properties are identical).
    pub branch_on_false: bool,
    /// Accept AND/OR/XOR/SELECT definitions in slices as encode boundaries
    /// instead of rejecting them.
    pub bitop_boundaries: bool,
}

impl Default for AnCodeConfig {
    fn default() -> Self {
        Self {
            params: AnParams::default(),
            mod_mode: ModMode::Umod,
            branch_on_false: false,
            bitop_boundaries: false,
        }
    }
}

/// Arithmetic-operation mix of one emitted compare sequence. `mls` counts
/// fused multiply+subtract pairs; the mul/sub inside a pair are not double
/// counted. Constant materializations are not arithmetic and not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpcodeMix {
    pub add: u32,
    pub sub: u32,
    pub umod: u32,
    pub udiv: u32,
    pub mls: u32,
}

/// One protected comparison after rewriting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSite {
    pub func: String,
    pub block: String,
    pub pred: Predicate,
    /// Registers compared by the original branch (now AN-coded); the VM's
    /// assertion mode checks these are valid code words at the branch.
    pub operand_x: Reg,
    pub operand_y: Reg,
    /// Register holding the encoded condition symbol.
    pub cond: Reg,
    pub true_symbol: u32,
    pub false_symbol: u32,
    pub mix: OpcodeMix,
}

#[derive(Debug, Clone)]
pub struct AnCodeOutput {
    pub program: Program,
    pub protected: ProtectedBranches,
    pub groups: GroupMap,
    pub compare_sites: Vec<CompareSite>,
    /// Human-readable descriptions of slice boundaries: spots where a
    /// plain value enters the encoded domain unprotected.
    pub unprotected_windows: Vec<String>,
    pub warnings: Vec<String>,
}

/// Applies the AN coder to every `protect` function of a lowered, validated
/// program.
pub fn an_code_pass(prog: &Program, cfg: &AnCodeConfig) -> Result<AnCodeOutput, Vec<Diagnostic>> {
    let mut fresh = prog.max_reg().map(|m| m + 1).unwrap_or(0);
    let mut out = AnCodeOutput {
        program: Program {
            functions: Vec::new(),
        },
        protected: ProtectedBranches::new(),
        groups: GroupMap::new(),
        compare_sites: Vec::new(),
        unprotected_windows: Vec::new(),
        warnings: Vec::new(),
    };
    let mut errors = Vec::new();

    for f in &prog.functions {
        if !f.protect {
            out.program.functions.push(f.clone());
            continue;
        }
        match rewrite_function(f, cfg, &mut fresh, &mut out) {
            Ok(func) => out.program.functions.push(func),
            Err(mut diags) => errors.append(&mut diags),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

struct Plan {
    consts: BTreeSet<(usize, usize)>,
    boundary_defs: BTreeSet<(usize, usize)>,
    input_regs: BTreeSet<Reg>,
    slice_regs: BTreeSet<Reg>,
    members: BTreeSet<(usize, usize)>,
    sites: Vec<usize>,
}

fn analyze(f: &Function, cfg: &AnCodeConfig) -> Result<Plan, Vec<Diagnostic>> {
    let mut plan = Plan {
        consts: BTreeSet::new(),
        boundary_defs: BTreeSet::new(),
        input_regs: BTreeSet::new(),
        slice_regs: BTreeSet::new(),
        members: BTreeSet::new(),
        sites: Vec::new(),
    };
    let mut errors = Vec::new();

    for (bi, b) in f.blocks.iter().enumerate() {
        let Some(Instr::Cbr { a, b: rb, .. }) = b.instrs.last() else {
            continue;
        };
        plan.sites.push(bi);
        let info: SliceInfo = compute_slice(f, [*a, *rb]);
        plan.consts.extend(&info.consts);
        plan.members.extend(&info.members);
        plan.slice_regs.extend(&info.regs);
        for e in &info.boundaries {
            match e {
                SliceEndpoint::Def { block, instr, .. } => {
                    plan.boundary_defs.insert((*block, *instr));
                }
                SliceEndpoint::Input { reg } => {
                    plan.input_regs.insert(*reg);
                }
            }
        }
        for &(ub, ui) in &info.unsupported {
            if cfg.bitop_boundaries {
                plan.boundary_defs.insert((ub, ui));
            } else {
                errors.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "@{} %{}: `{}` (instruction {}) feeds a protected comparison but \
                         has no AN-domain form; restructure the program or enable bit-op \
                         boundary encodes",
                        f.name,
                        f.blocks[ub].label,
                        f.blocks[ub].instrs[ui].mnemonic(),
                        ui + 1
                    ),
                });
            }
        }
    }

    for &(cb, ci) in &plan.consts {
        if let Instr::Const { imm, .. } = &f.blocks[cb].instrs[ci] {
            if *imm > cfg.params.n_max() {
                errors.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "@{} %{}: constant {imm} feeds a protected comparison but exceeds \
                         n_max {}",
                        f.name,
                        f.blocks[cb].label,
                        cfg.params.n_max()
                    ),
                });
            }
        }
    }

    if errors.is_empty() {
        Ok(plan)
    } else {
        Err(errors)
    }
}

fn rewrite_function(
    f: &Function,
    cfg: &AnCodeConfig,
    fresh: &mut u32,
    out: &mut AnCodeOutput,
) -> Result<Function, Vec<Diagnostic>> {
    let plan = analyze(f, cfg)?;
    let a = cfg.params.a();

    // Escaping uses: a register that now carries an encoded value but is
    // consumed outside the slice will observe A*n instead of n.
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, instr) in b.instrs.iter().enumerate() {
            let in_slice = plan.members.contains(&(bi, ii))
                || (plan.sites.contains(&bi) && ii + 1 == b.instrs.len());
            if in_slice {
                continue;
            }
            for used in instr.uses() {
                if plan.slice_regs.contains(&used) {
                    out.warnings.push(format!(
                        "@{} %{}: `{}` consumes {used}, which carries an AN-coded value \
                         after instrumentation",
                        f.name,
                        b.label,
                        instr.mnemonic()
                    ));
                }
            }
        }
    }

    let mut new_fn = Function {
        name: f.name.clone(),
        protect: f.protect,
        blocks: Vec::new(),
    };
    let mut alloc = || {
        let r = Reg(*fresh);
        *fresh += 1;
        r
    };

    for (bi, b) in f.blocks.iter().enumerate() {
        let mut instrs: Vec<Instr> = Vec::new();
        let mut ranges: Vec<(usize, usize)> = Vec::new();

        // Function inputs are encoded once, at the top of the entry block.
        if bi == 0 && !plan.input_regs.is_empty() {
            let start = instrs.len();
            let ra = alloc();
            instrs.push(Instr::Const { dst: ra, imm: a });
            for reg in &plan.input_regs {
                instrs.push(Instr::Bin {
                    op: BinOp::Mul,
                    dst: *reg,
                    a: *reg,
                    b: ra,
                });
                out.unprotected_windows.push(format!(
                    "@{}: function input {reg} encoded at entry (value unprotected before \
                     this point)",
                    f.name
                ));
            }
            ranges.push((start, instrs.len() - start));
        }

        for (ii, instr) in b.instrs.iter().enumerate() {
            let is_site = plan.sites.contains(&bi) && ii + 1 == b.instrs.len();
            if is_site {
                let Instr::Cbr {
                    pred,
                    a: ra,
                    b: rb,
                    if_true,
                    if_false,
                } = instr
                else {
                    unreachable!("site is a cbr terminator");
                };
                let start = instrs.len();
                let mix = emit_compare(
                    cfg,
                    &mut alloc,
                    &mut instrs,
                    *pred,
                    *ra,
                    *rb,
                    if_true,
                    if_false,
                    &mut out.protected,
                    &f.name,
                    &b.label,
                );
                ranges.push((start, instrs.len() - start));
                let cond = match &instrs[instrs.len() - 1] {
                    Instr::Cbr { a, .. } => *a,
                    _ => unreachable!("sequence ends in cbr"),
                };
                let pair = symbols_for(*pred, &cfg.params);
                out.compare_sites.push(CompareSite {
                    func: f.name.clone(),
                    block: b.label.clone(),
                    pred: *pred,
                    operand_x: *ra,
                    operand_y: *rb,
                    cond,
                    true_symbol: pair.true_symbol.value(),
                    false_symbol: pair.false_symbol.value(),
                    mix,
                });
                continue;
            }

            if plan.consts.contains(&(bi, ii)) {
                let Instr::Const { dst, imm } = instr else {
                    unreachable!("slice consts are const instructions");
                };
                instrs.push(Instr::Const {
                    dst: *dst,
                    imm: imm * a,
                });
                continue;
            }

            instrs.push(instr.clone());

            if plan.boundary_defs.contains(&(bi, ii)) {
                let reg = instr
                    .defs()
                    .expect("boundary definitions define a register");
                let start = instrs.len();
                let ra = alloc();
                instrs.push(Instr::Const { dst: ra, imm: a });
                instrs.push(Instr::Bin {
                    op: BinOp::Mul,
                    dst: reg,
                    a: reg,
                    b: ra,
                });
                ranges.push((start, 2));
                out.unprotected_windows.push(format!(
                    "@{} %{}: `{}` result {reg} encoded after definition (value \
                     unprotected before this point)",
                    f.name,
                    b.label,
                    instr.mnemonic()
                ));
            }
        }

        if !ranges.is_empty() {
            out.groups.insert((f.name.clone(), b.label.clone()), ranges);
        }
        new_fn.blocks.push(Block {
            label: b.label.clone(),
            instrs,
        });
    }
    Ok(new_fn)
}

/// Emits the encoded-compare sequence plus the rewritten terminator;
/// returns the arithmetic mix.
#[allow(clippy::too_many_arguments)]
fn emit_compare(
    cfg: &AnCodeConfig,
    alloc: &mut impl FnMut() -> Reg,
    instrs: &mut Vec<Instr>,
    pred: Predicate,
    x: Reg,
    y: Reg,
    if_true: &str,
    if_false: &str,
    protected: &mut ProtectedBranches,
    func: &str,
    block: &str,
) -> OpcodeMix {
    let p = &cfg.params;
    let pair = symbols_for(pred, p);
    let mut mix = OpcodeMix::default();

    // cond <- reduce(value % A), lowered per mod mode.
    let emit_mod = |instrs: &mut Vec<Instr>,
                    alloc: &mut dyn FnMut() -> Reg,
                    value: Reg,
                    ra: Reg,
                    mix: &mut OpcodeMix|
     -> Reg {
        match cfg.mod_mode {
            ModMode::Umod => {
                let dst = alloc();
                instrs.push(Instr::Bin {
                    op: BinOp::Umod,
                    dst,
                    a: value,
                    b: ra,
                });
                mix.umod += 1;
                dst
            }
            ModMode::Mls => {
                let q = alloc();
                let m = alloc();
                let dst = alloc();
                instrs.push(Instr::Bin {
                    op: BinOp::Udiv,
                    dst: q,
                    a: value,
                    b: ra,
                });
                instrs.push(Instr::Bin {
                    op: BinOp::Mul,
                    dst: m,
                    a: q,
                    b: ra,
                });
                instrs.push(Instr::Bin {
                    op: BinOp::Sub,
                    dst,
                    a: value,
                    b: m,
                });
                mix.udiv += 1;
                mix.mls += 1;
                dst
            }
        }
    };

    let cond = match pred.family() {
        crate::enccmp::PredicateFamily::Ordering => {
            let (lhs, rhs) = match pred {
                Predicate::Lt | Predicate::Ge => (x, y),
                _ => (y, x),
            };
            let diff = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Sub,
                dst: diff,
                a: lhs,
                b: rhs,
            });
            mix.sub += 1;
            let rc = alloc();
            instrs.push(Instr::Const {
                dst: rc,
                imm: p.c_ord(),
            });
            let shifted = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Add,
                dst: shifted,
                a: diff,
                b: rc,
            });
            mix.add += 1;
            let ra = alloc();
            instrs.push(Instr::Const {
                dst: ra,
                imm: p.a(),
            });
            emit_mod(instrs, alloc, shifted, ra, &mut mix)
        }
        crate::enccmp::PredicateFamily::Equality => {
            let rc = alloc();
            instrs.push(Instr::Const {
                dst: rc,
                imm: p.c_eq(),
            });
            let ra = alloc();
            instrs.push(Instr::Const {
                dst: ra,
                imm: p.a(),
            });

            let d1 = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Sub,
                dst: d1,
                a: x,
                b: y,
            });
            mix.sub += 1;
            let d1c = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Add,
                dst: d1c,
                a: d1,
                b: rc,
            });
            mix.add += 1;
            let rem1 = emit_mod(instrs, alloc, d1c, ra, &mut mix);

            let d2 = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Sub,
                dst: d2,
                a: y,
                b: x,
            });
            mix.sub += 1;
            let d2c = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Add,
                dst: d2c,
                a: d2,
                b: rc,
            });
            mix.add += 1;
            let rem2 = emit_mod(instrs, alloc, d2c, ra, &mut mix);

            let cond = alloc();
            instrs.push(Instr::Bin {
                op: BinOp::Add,
                dst: cond,
                a: rem1,
                b: rem2,
            });
            mix.add += 1;
            cond
        }
    };

    let sym_reg = alloc();
    let (cmp_sym, edge0, edge1, e0_sym, e1_sym) = if cfg.branch_on_false {
        (
            pair.false_symbol.value(),
            if_false.to_string(),
            if_true.to_string(),
            pair.false_symbol.value(),
            pair.true_symbol.value(),
        )
    } else {
        (
            pair.true_symbol.value(),
            if_true.to_string(),
            if_false.to_string(),
            pair.true_symbol.value(),
            pair.false_symbol.value(),
        )
    };
    instrs.push(Instr::Const {
        dst: sym_reg,
        imm: cmp_sym,
    });
    instrs.push(Instr::Cbr {
        pred: Predicate::Eq,
        a: cond,
        b: sym_reg,
        if_true: edge0,
        if_false: edge1,
    });
    // Symbols are recorded per emitted edge (edge 0 is the cbr true edge).
    protected.insert(
        (func.to_string(), block.to_string()),
        BranchProtection {
            cond,
            true_symbol: e0_sym,
            false_symbol: e1_sym,
        },
    );
    mix
}

#[cfg(test)]
mod tests {
    use crate::faultsim::FaultPlan;
    use crate::mir::{interpret, parse, validate, ExecOptions, Inputs, ValidateOptions};

    use super::*;

    fn pass(src: &str, cfg: &AnCodeConfig) -> AnCodeOutput {
        an_code_pass(&parse(src).unwrap(), cfg).unwrap()
    }

    const CONST_CMP: &str = "\
func @f protect {
  block %e:
    r1 = const 3
    r2 = const 5
    cbr lt r1, r2, %a, %b
  block %a:
    r3 = const 1
    ret r3
  block %b:
    r3 = const 0
    ret r3
}
";

    #[test]
    fn constants_are_encoded_and_branch_compares_the_symbol() {
        let out = pass(CONST_CMP, &AnCodeConfig::default());
        let f = &out.program.functions[0];
        assert_eq!(
            f.blocks[0].instrs[0],
            Instr::Const {
                dst: Reg(1),
                imm: 3 * 63877
            }
        );
        assert_eq!(
            f.blocks[0].instrs[1],
            Instr::Const {
                dst: Reg(2),
                imm: 5 * 63877
            }
        );
        // The final branch compares the condition register with 35552.
        let site = &out.compare_sites[0];
        assert_eq!(site.true_symbol, 35552);
        assert_eq!(site.false_symbol, 29982);
        let sym_const = f.blocks[0].instrs.iter().rev().nth(1).unwrap();
        assert_eq!(
            *sym_const,
            Instr::Const {
                dst: sym_const.defs().unwrap(),
                imm: 35552
            }
        );

        // Fault-free: 3 < 5, so the instrumented program returns 1.
        let mut ok = false;
        let r = interpret(
            &out.program,
            "f",
            &Inputs::default(),
            &FaultPlan::default(),
            &ExecOptions::default(),
        )
        .unwrap();
        if r.return_value() == Some(1) {
            ok = true;
        }
        assert!(
            ok,
            "instrumented compare took the wrong edge: {:?}",
            r.status
        );
        assert!(validate(
            &out.program,
            &ValidateOptions {
                allow_cfi: true,
                ..Default::default()
            }
        )
        .is_empty());
    }

    #[test]
    fn ordering_mix_default_mode() {
        let out = pass(CONST_CMP, &AnCodeConfig::default());
        let mix = out.compare_sites[0].mix;
        assert_eq!(
            mix,
            OpcodeMix {
                add: 1,
                sub: 1,
                umod: 1,
                udiv: 0,
                mls: 0
            }
        );
    }

    #[test]
    fn ordering_mix_mls_mode() {
        let cfg = AnCodeConfig {
            mod_mode: ModMode::Mls,
            ..Default::default()
        };
        let out = pass(CONST_CMP, &cfg);
        let mix = out.compare_sites[0].mix;
        assert_eq!(
            mix,
            OpcodeMix {
                add: 1,
                sub: 1,
                umod: 0,
                udiv: 1,
                mls: 1
            }
        );
    }

    const EQ_CMP: &str = "\
func @g protect {
  block %e:
    r1 = const 7
    cbr eq r0, r1, %a, %b
  block %a:
    r3 = const 1
    ret r3
  block %b:
    r3 = const 0
    ret r3
}
";

    #[test]
    fn equality_mixes() {
        let out = pass(EQ_CMP, &AnCodeConfig::default());
        assert_eq!(
            out.compare_sites[0].mix,
            OpcodeMix {
                add: 3,
                sub: 2,
                umod: 2,
                udiv: 0,
                mls: 0
            }
        );
        let cfg = AnCodeConfig {
            mod_mode: ModMode::Mls,
            ..Default::default()
        };
        let out = pass(EQ_CMP, &cfg);
        assert_eq!(
            out.compare_sites[0].mix,
            OpcodeMix {
                add: 3,
                sub: 2,
                umod: 0,
                udiv: 2,
                mls: 2
            }
        );
    }

    #[test]
    fn function_inputs_are_encoded_at_entry_and_reported() {
        let out = pass(EQ_CMP, &AnCodeConfig::default());
        let entry = &out.program.functions[0].blocks[0];
        // const A; mul r0, r0, rA as the leading group.
        assert!(matches!(entry.instrs[0], Instr::Const { imm: 63877, .. }));
        assert!(matches!(
            entry.instrs[1],
            Instr::Bin {
                op: BinOp::Mul,
                dst: Reg(0),
                ..
            }
        ));
        assert_eq!(out.unprotected_windows.len(), 1);
        assert!(out.unprotected_windows[0].contains("input r0"));
        // Fault free with r0 = 7: equal, returns 1.
        let r = interpret(
            &out.program,
            "g",
            &Inputs {
                regs: vec![(Reg(0), 7)],
                mem: vec![],
            },
            &FaultPlan::default(),
            &ExecOptions::default(),
        )
        .unwrap();
        assert_eq!(r.return_value(), Some(1));
        let r = interpret(
            &out.program,
            "g",
            &Inputs {
                regs: vec![(Reg(0), 8)],
                mem: vec![],
            },
            &FaultPlan::default(),
            &ExecOptions::default(),
        )
        .unwrap();
        assert_eq!(r.return_value(), Some(0));
    }

    #[test]
    fn load_boundary_gets_an_encode_and_a_window() {
        let src = "\
func @f protect {
  block %e:
    r1 = const 2
    r2 = load [r9]
    r3 = add r2, r1
    cbr lt r3, r0, %a, %b
  block %a:
    ret r5
  block %b:
    ret r5
}
";
        let out = pass(src, &AnCodeConfig::default());
        assert!(out
            .unprotected_windows
            .iter()
            .any(|w| w.contains("`load` result r2")));
        // load, then const A, then mul r2.
        let instrs = &out.program.functions[0].blocks[0].instrs;
        let load_at = instrs
            .iter()
            .position(|i| matches!(i, Instr::Load { .. }))
            .unwrap();
        assert!(matches!(
            instrs[load_at + 1],
            Instr::Const { imm: 63877, .. }
        ));
        assert!(matches!(
            instrs[load_at + 2],
            Instr::Bin {
                op: BinOp::Mul,
                dst: Reg(2),
                a: Reg(2),
                ..
            }
        ));
    }

    #[test]
    fn xor_in_slice_is_rejected_by_default_and_encodable_on_request() {
        let src = "\
func @f protect {
  block %e:
    r1 = xor r0, r0
    r2 = const 1
    cbr eq r1, r2, %a, %b
  block %a:
    ret r2
  block %b:
    ret r2
}
";
        let err = an_code_pass(&parse(src).unwrap(), &AnCodeConfig::default()).unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("xor")));

        let cfg = AnCodeConfig {
            bitop_boundaries: true,
            ..Default::default()
        };
        let out = an_code_pass(&parse(src).unwrap(), &cfg).unwrap();
        assert!(out.unprotected_windows.iter().any(|w| w.contains("`xor`")));
    }

    #[test]
    fn oversized_constant_is_rejected() {
        let src = "\
func @f protect {
  block %e:
    r1 = const 70000
    cbr eq r0, r1, %a, %a
  block %a:
    ret r1
}
";
        let err = an_code_pass(&parse(src).unwrap(), &AnCodeConfig::default()).unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("70000")));
    }

    #[test]
    fn escaping_encoded_values_warn() {
        let src = "\
func @f protect {
  block %e:
    r1 = const 3
    r2 = add r1, r0
    cbr lt r2, r0, %a, %b
  block %a:
    ret r2
  block %b:
    ret r0
}
";
        let out = pass(src, &AnCodeConfig::default());
        assert!(out
            .warnings
            .iter()
            .any(|w| w.contains("ret") && w.contains("r2")));
    }

    #[test]
    fn branch_on_false_swaps_edges_and_stays_sound() {
        let cfg = AnCodeConfig {
            branch_on_false: true,
            ..Default::default()
        };
        let out = pass(CONST_CMP, &cfg);
        let r = interpret(
            &out.program,
            "f",
            &Inputs::default(),
            &FaultPlan::default(),
            &ExecOptions::default(),
        )
        .unwrap();
        // 3 < 5 still returns the then-value.
        assert_eq!(r.return_value(), Some(1));
        let prot = &out.protected[&("f".to_string(), "e".to_string())];
        // Edge 0 of the emitted cbr is the original false edge now.
        assert_eq!(prot.true_symbol, 29982);
        assert_eq!(prot.false_symbol, 35552);
    }

    #[test]
    fn unprotected_functions_are_untouched() {
        let src = "\
func @f {
  block %e:
    r1 = const 3
    cbr lt r0, r1, %a, %b
  block %a:
    ret r1
  block %b:
    ret r0
}
";
        let prog = parse(src).unwrap();
        let out = an_code_pass(&prog, &AnCodeConfig::default()).unwrap();
        assert_eq!(out.program, prog);
        assert!(out.compare_sites.is_empty());
    }
}
