//! Static cost accounting: per-opcode instruction counts and modeled bytes
//! (4 per instruction). Modeled cycles come from a concrete VM run and are
//! attached by the caller.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mir::Program;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticCosts {
    pub opcode_counts: BTreeMap<String, u64>,
    pub total_instrs: u64,
    pub modeled_bytes: u64,
}

pub fn count_costs(prog: &Program) -> StaticCosts {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for f in &prog.functions {
        for b in &f.blocks {
            for i in &b.instrs {
                *counts.entry(i.mnemonic().to_string()).or_default() += 1;
                total += 1;
            }
        }
    }
    StaticCosts {
        opcode_counts: counts,
        total_instrs: total,
        modeled_bytes: total * 4,
    }
}

#[cfg(test)]
mod tests {
    use crate::mir::parse;

    use super::*;

    #[test]
    fn empty_program_counts_zero() {
        let c = count_costs(&Program { functions: vec![] });
        assert_eq!(c.total_instrs, 0);
        assert_eq!(c.modeled_bytes, 0);
        assert!(c.opcode_counts.is_empty());
    }

    #[test]
    fn counts_per_opcode() {
        let src = "\
func @f {
  block %e:
    r1 = const 1
    r2 = add r0, r1
    r3 = add r2, r1
    ret r3
}
";
        let c = count_costs(&parse(src).unwrap());
        assert_eq!(c.opcode_counts["const"], 1);
        assert_eq!(c.opcode_counts["add"], 2);
        assert_eq!(c.opcode_counts["ret"], 1);
        assert_eq!(c.total_instrs, 4);
        assert_eq!(c.modeled_bytes, 16);
    }
}
