//! Canonical text printer. `print` followed by `parse` is the identity;
//! parsing arbitrary (whitespace-divergent) input and printing it yields
//! the canonical form, after which print/parse round trips are byte-stable.

use std::fmt::Write;

use crate::mir::{Instr, Program};

pub fn print(prog: &Program) -> String {
    let mut out = String::new();
    for f in &prog.functions {
        let attr = if f.protect { " protect" } else { "" };
        writeln!(out, "func @{}{} {{", f.name, attr).unwrap();
        for b in &f.blocks {
            writeln!(out, "  block %{}:", b.label).unwrap();
            for i in &b.instrs {
                writeln!(out, "    {}", format_instr(i)).unwrap();
            }
        }
        writeln!(out, "}}").unwrap();
    }
    out
}

fn format_instr(i: &Instr) -> String {
    match i {
        Instr::Const { dst, imm } => format!("{dst} = const {imm}"),
        Instr::Bin { op, dst, a, b } => format!("{dst} = {} {a}, {b}", op.name()),
        Instr::Load { dst, addr } => format!("{dst} = load [{addr}]"),
        Instr::Store { addr, src } => format!("store [{addr}], {src}"),
        Instr::Select {
            dst,
            pred,
            a,
            b,
            if_true,
            if_false,
        } => {
            format!("{dst} = select {pred} {a}, {b}, {if_true}, {if_false}")
        }
        Instr::Cbr {
            pred,
            a,
            b,
            if_true,
            if_false,
        } => {
            format!("cbr {pred} {a}, {b}, %{if_true}, %{if_false}")
        }
        Instr::Switch { a, cases, default } => {
            let mut s = format!("switch {a}");
            for (v, l) in cases {
                write!(s, ", {v}:%{l}").unwrap();
            }
            write!(s, ", default:%{default}").unwrap();
            s
        }
        Instr::Jmp { target } => format!("jmp %{target}"),
        Instr::Ret { src } => format!("ret {src}"),
        Instr::Trap { code } => format!("trap {code}"),
        Instr::CfiUpdate { id } => format!("cfi_update {:#X}", id),
        Instr::CfiMerge { cond, corr } => format!("cfi_merge {cond}, {:#X}", corr),
        Instr::CfiCheck { expected } => format!("cfi_check {:#X}", expected),
    }
}
