//! Backward slices of compared registers.
//!
//! The AN coder must know which instructions produce the values a protected
//! comparison consumes. The slice walks definitions backwards through
//! ADD/SUB (closed in the code domain) and CONST (encodable at compile
//! time). Everything else ends the slice:
//!
//! - LOAD, MUL, UDIV, UMOD and registers with no defining instruction
//!   (function inputs) are *boundaries*: an encode step is inserted after
//!   them and the spot is reported as an unprotected window;
//! - AND/OR/XOR/SELECT have no AN-domain counterpart and are rejected
//!   unless the caller opts into treating them as boundaries.
//!
//! The walk is flow-insensitive: every definition of a register anywhere in
//! the function participates. That is conservative for the supported
//! corpus, where compared registers are dedicated (loop counters feeding
//! comparisons are decoupled from address arithmetic by construction).

use std::collections::BTreeSet;

use crate::mir::{BinOp, Function, Instr, Reg};

/// Where a slice stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceEndpoint {
    /// Boundary at a defining instruction (LOAD/MUL/UDIV/UMOD): encode the
    /// destination right after it.
    Def {
        block: usize,
        instr: usize,
        reg: Reg,
    },
    /// Register never defined in the function: a function input, encoded
    /// at entry.
    Input { reg: Reg },
}

#[derive(Debug, Clone, Default)]
pub struct SliceInfo {
    /// ADD/SUB instructions inside the slice, as (block, instr) positions.
    pub members: BTreeSet<(usize, usize)>,
    /// CONST definitions to rewrite into encoded constants.
    pub consts: BTreeSet<(usize, usize)>,
    /// Boundary encode points.
    pub boundaries: Vec<SliceEndpoint>,
    /// Definitions with no AN-domain counterpart (AND/OR/XOR/SELECT).
    pub unsupported: Vec<(usize, usize)>,
    /// Every register that carries an encoded value once the slice is
    /// rewritten (used for escape analysis and lints).
    pub regs: BTreeSet<Reg>,
}

/// Computes the union of the backward slices of `roots` within `func`.
pub fn compute_slice(func: &Function, roots: [Reg; 2]) -> SliceInfo {
    let mut info = SliceInfo::default();
    let mut work: Vec<Reg> = roots.to_vec();
    let mut visited: BTreeSet<Reg> = BTreeSet::new();

    while let Some(reg) = work.pop() {
        if !visited.insert(reg) {
            continue;
        }
        info.regs.insert(reg);
        let mut any_def = false;
        for (bi, block) in func.blocks.iter().enumerate() {
            for (ii, instr) in block.instrs.iter().enumerate() {
                if instr.defs() != Some(reg) {
                    continue;
                }
                any_def = true;
                match instr {
                    Instr::Const { .. } => {
                        info.consts.insert((bi, ii));
                    }
                    Instr::Bin {
                        op: BinOp::Add | BinOp::Sub,
                        a,
                        b,
                        ..
                    } => {
                        info.members.insert((bi, ii));
                        work.push(*a);
                        work.push(*b);
                    }
                    Instr::Load { .. }
                    | Instr::Bin {
                        op: BinOp::Mul | BinOp::Udiv | BinOp::Umod,
                        ..
                    } => {
                        info.boundaries.push(SliceEndpoint::Def {
                            block: bi,
                            instr: ii,
                            reg,
                        });
                    }
                    _ => {
                        info.unsupported.push((bi, ii));
                    }
                }
            }
        }
        if !any_def {
            info.boundaries.push(SliceEndpoint::Input { reg });
        }
    }
    // Deduplicate boundary encodes per definition / input.
    info.boundaries.sort_by_key(|e| match e {
        SliceEndpoint::Def { block, instr, .. } => (0, *block, *instr, 0),
        SliceEndpoint::Input { reg } => (1, 0, 0, reg.0 as usize),
    });
    info.boundaries.dedup();
    info
}

#[cfg(test)]
mod tests {
    use crate::mir::parse;

    use super::*;

    #[test]
    fn walks_through_add_sub_const() {
        let src = "\
func @f protect {
  block %e:
    r1 = const 3
    r2 = const 4
    r3 = add r1, r2
    r4 = sub r3, r1
    cbr lt r4, r0, %a, %b
  block %a:
    ret r4
  block %b:
    ret r0
}
";
        let f = parse(src).unwrap().functions.remove(0);
        let info = compute_slice(&f, [Reg(4), Reg(0)]);
        assert_eq!(info.consts.len(), 2);
        assert_eq!(info.members.len(), 2);
        assert_eq!(info.boundaries, vec![SliceEndpoint::Input { reg: Reg(0) }]);
        assert!(info.unsupported.is_empty());
        assert!(info.regs.contains(&Reg(1)) && info.regs.contains(&Reg(4)));
    }

    #[test]
    fn load_and_mul_are_boundaries() {
        let src = "\
func @f protect {
  block %e:
    r1 = load [r9]
    r2 = mul r8, r8
    r3 = add r1, r2
    cbr eq r3, r1, %a, %a
  block %a:
    ret r3
}
";
        let f = parse(src).unwrap().functions.remove(0);
        let info = compute_slice(&f, [Reg(3), Reg(1)]);
        let defs: Vec<_> = info
            .boundaries
            .iter()
            .filter(|e| matches!(e, SliceEndpoint::Def { .. }))
            .collect();
        assert_eq!(defs.len(), 2);
        // The address register r9 is not part of the slice.
        assert!(!info.regs.contains(&Reg(9)));
    }

    #[test]
    fn bit_ops_are_unsupported() {
        let src = "\
func @f protect {
  block %e:
    r1 = xor r0, r0
    r2 = const 1
    cbr eq r1, r2, %a, %a
  block %a:
    ret r1
}
";
        let f = parse(src).unwrap().functions.remove(0);
        let info = compute_slice(&f, [Reg(1), Reg(2)]);
        assert_eq!(info.unsupported.len(), 1);
    }
}
