//! Branch duplication baseline.
//!
//! Each protected conditional branch is followed, on each edge, by `k - 1`
//! re-checks of the same plain comparison; a re-check that disagrees with
//! the edge it sits on routes to a trap. Fault free, all re-checks agree
//! and the hot path simply executes `k` consecutive branches.
//!
//! This is the classical countermeasure the encoded scheme is measured
//! against, and its known weakness is reproduced in the fault campaigns:
//! inducing the *same* fault at every duplicated branch walks the whole
//! chain down the wrong side without a single disagreement.

use std::collections::HashSet;

use crate::mir::{Block, Function, Instr, Program};

pub fn duplicate_branches(prog: &Program, k: u32) -> Program {
    let functions = prog
        .functions
        .iter()
        .map(|f| {
            if f.protect && k > 1 {
                duplicate_function(f, k)
            } else {
                f.clone()
            }
        })
        .collect();
    Program { functions }
}

fn duplicate_function(f: &Function, k: u32) -> Function {
    let mut labels: HashSet<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
    let fresh = |base: String, labels: &mut HashSet<String>| {
        let mut cand = base.clone();
        let mut n = 0;
        while labels.contains(&cand) {
            n += 1;
            cand = format!("{base}.{n}");
        }
        labels.insert(cand.clone());
        cand
    };

    let trap_label = fresh("dup.trap".into(), &mut labels);
    let mut new_fn = Function {
        name: f.name.clone(),
        protect: f.protect,
        blocks: Vec::new(),
    };
    let mut chains: Vec<Block> = Vec::new();
    let mut any_site = false;

    for b in &f.blocks {
        let mut block = b.clone();
        if let Some(Instr::Cbr {
            pred,
            a,
            b: rb,
            if_true,
            if_false,
        }) = block.instrs.last().cloned()
        {
            any_site = true;
            let build_chain = |expect_true: bool,
                               final_target: &str,
                               labels: &mut HashSet<String>,
                               chains: &mut Vec<Block>|
             -> String {
                let side = if expect_true { "t" } else { "f" };
                let names: Vec<String> = (1..k)
                    .map(|j| fresh(format!("{}.dup.{side}{j}", b.label), labels))
                    .collect();
                for (i, name) in names.iter().enumerate() {
                    let next: &str = if i + 1 < names.len() {
                        &names[i + 1]
                    } else {
                        final_target
                    };
                    let (t, fl) = if expect_true {
                        (next.to_string(), trap_label.clone())
                    } else {
                        (trap_label.clone(), next.to_string())
                    };
                    chains.push(Block {
                        label: name.clone(),
                        instrs: vec![Instr::Cbr {
                            pred,
                            a,
                            b: rb,
                            if_true: t,
                            if_false: fl,
                        }],
                    });
                }
                names[0].clone()
            };
            let t_head = build_chain(true, &if_true, &mut labels, &mut chains);
            let f_head = build_chain(false, &if_false, &mut labels, &mut chains);
            *block.instrs.last_mut().unwrap() = Instr::Cbr {
                pred,
                a,
                b: rb,
                if_true: t_head,
                if_false: f_head,
            };
        }
        new_fn.blocks.push(block);
    }

    new_fn.blocks.append(&mut chains);
    if any_site {
        new_fn.blocks.push(Block {
            label: trap_label,
            instrs: vec![Instr::Trap { code: 1 }],
        });
    }
    new_fn
}

#[cfg(test)]
mod tests {
    use crate::faultsim::{FaultPlan, FaultSpec};
    use crate::mir::{
        interpret, parse, validate, ExecOptions, HaltStatus, Inputs, Reg, TrapKind, ValidateOptions,
    };

    use super::*;

    const IF_DEMO: &str = "\
func @f protect {
  block %entry:
    r2 = const 111
    r3 = const 222
    cbr lt r0, r1, %then, %else
  block %then:
    ret r2
  block %else:
    ret r3
}
";

    fn run(prog: &Program, regs: &[(u32, u32)], plan: FaultPlan) -> crate::mir::ExecResult {
        let inputs = Inputs {
            regs: regs.iter().map(|&(r, v)| (Reg(r), v)).collect(),
            mem: vec![],
        };
        interpret(prog, "f", &inputs, &plan, &ExecOptions::default()).unwrap()
    }

    #[test]
    fn k1_is_identity() {
        let prog = parse(IF_DEMO).unwrap();
        assert_eq!(duplicate_branches(&prog, 1), prog);
    }

    #[test]
    fn six_branches_on_the_hot_path() {
        let prog = parse(IF_DEMO).unwrap();
        let dup = duplicate_branches(&prog, 6);
        assert!(validate(&dup, &ValidateOptions::default()).is_empty());
        let r = run(&dup, &[(0, 3), (1, 5)], FaultPlan::default());
        assert_eq!(r.status, HaltStatus::Returned(111));
        assert_eq!(r.branch_events.len(), 6);
        // Fault-free agreement on the other path too.
        let r = run(&dup, &[(0, 5), (1, 3)], FaultPlan::default());
        assert_eq!(r.status, HaltStatus::Returned(222));
        assert_eq!(r.branch_events.len(), 6);
    }

    #[test]
    fn single_forced_branch_disagrees_and_traps() {
        let prog = parse(IF_DEMO).unwrap();
        let dup = duplicate_branches(&prog, 6);
        let reference = run(&dup, &[(0, 5), (1, 3)], FaultPlan::default());
        let first_cbr = reference
            .trace
            .iter()
            .position(|tp| {
                matches!(
                    dup.functions[0].blocks[tp.block as usize].instrs[tp.instr as usize],
                    Instr::Cbr { .. }
                )
            })
            .unwrap() as u64;
        let plan = FaultPlan {
            faults: vec![FaultSpec::BranchForce {
                at: first_cbr,
                taken_true: true,
            }],
        };
        let r = run(&dup, &[(0, 5), (1, 3)], plan);
        assert_eq!(r.status, HaltStatus::Trapped(TrapKind::Guard(1)));
    }

    #[test]
    fn coordinated_forcing_of_all_branches_slips_through() {
        let prog = parse(IF_DEMO).unwrap();
        let dup = duplicate_branches(&prog, 6);
        let reference = run(&dup, &[(0, 5), (1, 3)], FaultPlan::default());
        // Natural outcome is false (5 < 3 fails); force the first branch
        // true, then force every subsequently fetched cbr true as well.
        // The wrong-path chain re-checks sit at consecutive block heads.
        let mut faults = Vec::new();
        let first_cbr = reference
            .trace
            .iter()
            .position(|tp| {
                matches!(
                    dup.functions[0].blocks[tp.block as usize].instrs[tp.instr as usize],
                    Instr::Cbr { .. }
                )
            })
            .unwrap() as u64;
        for j in 0..6 {
            faults.push(FaultSpec::BranchForce {
                at: first_cbr + j,
                taken_true: true,
            });
        }
        let r = run(&dup, &[(0, 5), (1, 3)], FaultPlan { faults });
        // Undetected wrong path: returns the then-value.
        assert_eq!(r.status, HaltStatus::Returned(111));
    }

    #[test]
    fn unprotected_functions_are_untouched() {
        let src = IF_DEMO.replace(" protect", "");
        let prog = parse(&src).unwrap();
        assert_eq!(duplicate_branches(&prog, 6), prog);
    }
}
