//! Select/switch lowering.
//!
//! SELECT becomes a branch diamond over fresh blocks; SWITCH becomes a
//! chain of equality branches ending in the default edge. Both leave only
//! CBR/JMP control flow for the later passes. Copies are realized as
//! `add dst, src, zero`; ADD is closed in the AN domain, so lowered
//! selects remain sliceable.

use std::collections::HashSet;

use crate::mir::{BinOp, Block, Function, Instr, Program, Reg};

pub fn lower_select_switch(prog: &Program) -> Program {
    let mut fresh_reg = prog.max_reg().map(|m| m + 1).unwrap_or(0);
    let functions = prog
        .functions
        .iter()
        .map(|f| lower_function(f, &mut fresh_reg))
        .collect();
    Program { functions }
}

fn lower_function(f: &Function, fresh_reg: &mut u32) -> Function {
    let mut f = f.clone();
    let mut labels: HashSet<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
    let mut counter = 0usize;

    loop {
        if let Some((bi, ii)) = find_select(&f) {
            lower_one_select(&mut f, bi, ii, fresh_reg, &mut labels, &mut counter);
            continue;
        }
        if let Some(bi) = find_switch(&f) {
            lower_one_switch(&mut f, bi, fresh_reg, &mut labels, &mut counter);
            continue;
        }
        break;
    }
    f
}

fn find_select(f: &Function) -> Option<(usize, usize)> {
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, i) in b.instrs.iter().enumerate() {
            if matches!(i, Instr::Select { .. }) {
                return Some((bi, ii));
            }
        }
    }
    None
}

fn find_switch(f: &Function) -> Option<usize> {
    f.blocks
        .iter()
        .position(|b| matches!(b.instrs.last(), Some(Instr::Switch { .. })))
}

fn fresh_label(base: String, labels: &mut HashSet<String>) -> String {
    let mut candidate = base.clone();
    let mut n = 0usize;
    while labels.contains(&candidate) {
        n += 1;
        candidate = format!("{base}.{n}");
    }
    labels.insert(candidate.clone());
    candidate
}

fn lower_one_select(
    f: &mut Function,
    bi: usize,
    ii: usize,
    fresh_reg: &mut u32,
    labels: &mut HashSet<String>,
    counter: &mut usize,
) {
    let n = *counter;
    *counter += 1;
    let block = &mut f.blocks[bi];
    let tail: Vec<Instr> = block.instrs.split_off(ii + 1);
    let Some(Instr::Select {
        dst,
        pred,
        a,
        b,
        if_true,
        if_false,
    }) = block.instrs.pop()
    else {
        unreachable!("position located a select");
    };
    let base = block.label.clone();
    let l_true = fresh_label(format!("{base}.sel{n}.t"), labels);
    let l_false = fresh_label(format!("{base}.sel{n}.f"), labels);
    let l_join = fresh_label(format!("{base}.sel{n}.j"), labels);

    block.instrs.push(Instr::Cbr {
        pred,
        a,
        b,
        if_true: l_true.clone(),
        if_false: l_false.clone(),
    });

    let mut arm = |label: &str, src: Reg| {
        let zero = Reg(*fresh_reg);
        *fresh_reg += 1;
        Block {
            label: label.to_string(),
            instrs: vec![
                Instr::Const { dst: zero, imm: 0 },
                Instr::Bin {
                    op: BinOp::Add,
                    dst,
                    a: src,
                    b: zero,
                },
                Instr::Jmp {
                    target: l_join.clone(),
                },
            ],
        }
    };
    let t_block = arm(&l_true, if_true);
    let f_block = arm(&l_false, if_false);
    let join = Block {
        label: l_join,
        instrs: tail,
    };

    f.blocks.splice(bi + 1..bi + 1, [t_block, f_block, join]);
}

fn lower_one_switch(
    f: &mut Function,
    bi: usize,
    fresh_reg: &mut u32,
    labels: &mut HashSet<String>,
    counter: &mut usize,
) {
    let n = *counter;
    *counter += 1;
    let block = &mut f.blocks[bi];
    let Some(Instr::Switch { a, cases, default }) = block.instrs.pop() else {
        unreachable!("position located a switch");
    };
    if cases.is_empty() {
        block.instrs.push(Instr::Jmp { target: default });
        return;
    }
    let base = block.label.clone();

    // Chain labels for the 2nd..nth comparisons.
    let chain: Vec<String> = (1..cases.len())
        .map(|i| fresh_label(format!("{base}.sw{n}.{i}"), labels))
        .collect();

    let mut new_blocks = Vec::new();
    for (i, (value, target)) in cases.iter().enumerate() {
        let key = Reg(*fresh_reg);
        *fresh_reg += 1;
        let next = if i + 1 < cases.len() {
            chain[i].clone()
        } else {
            default.clone()
        };
        let instrs = vec![
            Instr::Const {
                dst: key,
                imm: *value,
            },
            Instr::Cbr {
                pred: crate::enccmp::Predicate::Eq,
                a,
                b: key,
                if_true: target.clone(),
                if_false: next,
            },
        ];
        if i == 0 {
            f.blocks[bi].instrs.extend(instrs);
        } else {
            new_blocks.push(Block {
                label: chain[i - 1].clone(),
                instrs,
            });
        }
    }
    f.blocks.splice(bi + 1..bi + 1, new_blocks);
}
