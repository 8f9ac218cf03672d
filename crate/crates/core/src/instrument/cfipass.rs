//! CFI instrumentation pass: materializes the plan produced by
//! [`crate::cfi::derive_meta`].
//!
//! Block layout after instrumentation:
//!
//! ```text
//! %b:
//!     <original instruction>
//!     cfi_update <group id>          # one per instruction group
//!     ...
//!     cfi_update <terminator id>     # before the terminator
//!     cfi_check  <exit signature>    # per check policy
//!     cfi_update <edge correction>   # jmp edges only (single successor)
//!     <terminator>                   # conditional successors rewritten
//! %b.eN:                             # one per conditional edge
//!     cfi_update <corr> | cfi_merge <cond>, <corr>
//!     cfi_check  <successor entry signature>
//!     jmp %successor
//! ```
//!
//! Conditional edges always route through dedicated edge blocks so each
//! edge owns its correction (and, for protected branches, its merge of the
//! condition register with the edge's expected symbol).

use crate::cfi::{
    derive_meta, CfiError, CfiMeta, CheckPolicy, EdgeSite, GroupMap, ProtectedBranches,
};
use crate::mir::{Block, Instr, Program};

pub fn cfi_pass(
    prog: &Program,
    seed: u64,
    policy: CheckPolicy,
    protected: &ProtectedBranches,
    groups: &GroupMap,
) -> Result<(Program, CfiMeta), CfiError> {
    let meta = derive_meta(prog, seed, policy, protected, groups)?;
    let mut out = Program {
        functions: Vec::new(),
    };

    for f in &prog.functions {
        let fc = &meta.functions[&f.name];
        let mut new_fn = crate::mir::Function {
            name: f.name.clone(),
            protect: f.protect,
            blocks: Vec::new(),
        };

        for b in &f.blocks {
            let ups = &fc.updates[&b.label];
            let check = fc.checks.iter().find(|c| c.block == b.label);
            let term_idx = b.instrs.len() - 1;
            let mut instrs = Vec::new();

            for (i, instr) in b.instrs.iter().enumerate() {
                if i == term_idx && instr.is_terminator() {
                    if let Some(u) = ups.iter().find(|u| u.last == i) {
                        instrs.push(Instr::CfiUpdate { id: u.id });
                    }
                    if let Some(c) = check {
                        instrs.push(Instr::CfiCheck {
                            expected: c.expected,
                        });
                    }
                    for e in fc.edges.iter().filter(|e| e.from == b.label) {
                        if e.site == EdgeSite::Inline {
                            instrs.push(Instr::CfiUpdate { id: e.correction });
                        }
                    }
                    let mut term = instr.clone();
                    for e in fc.edges.iter().filter(|e| e.from == b.label) {
                        if let EdgeSite::EdgeBlock { label } = &e.site {
                            set_successor(&mut term, e.edge_index, label);
                        }
                    }
                    instrs.push(term);
                } else {
                    instrs.push(instr.clone());
                    if let Some(u) = ups.iter().find(|u| u.last == i) {
                        instrs.push(Instr::CfiUpdate { id: u.id });
                    }
                }
            }
            new_fn.blocks.push(Block {
                label: b.label.clone(),
                instrs,
            });
        }

        for e in &fc.edges {
            let EdgeSite::EdgeBlock { label } = &e.site else {
                continue;
            };
            let mut instrs = Vec::new();
            match &e.merge {
                Some(m) => instrs.push(Instr::CfiMerge {
                    cond: m.cond,
                    corr: e.correction,
                }),
                None => instrs.push(Instr::CfiUpdate { id: e.correction }),
            }
            if let Some(c) = fc.checks.iter().find(|c| &c.block == label) {
                instrs.push(Instr::CfiCheck {
                    expected: c.expected,
                });
            }
            instrs.push(Instr::Jmp {
                target: e.to.clone(),
            });
            new_fn.blocks.push(Block {
                label: label.clone(),
                instrs,
            });
        }

        out.functions.push(new_fn);
    }
    Ok((out, meta))
}

fn set_successor(term: &mut Instr, edge_index: usize, label: &str) {
    match term {
        Instr::Cbr {
            if_true, if_false, ..
        } => {
            if edge_index == 0 {
                *if_true = label.to_string();
            } else {
                *if_false = label.to_string();
            }
        }
        Instr::Switch { cases, default, .. } => {
            if edge_index < cases.len() {
                cases[edge_index].1 = label.to_string();
            } else {
                *default = label.to_string();
            }
        }
        Instr::Jmp { .. } => unreachable!("jmp edges are inline"),
        _ => unreachable!("terminator with successors"),
    }
}
