//! Signature-based control-flow integrity.
//!
//! A running 32-bit signature `S` is threaded through execution: every
//! original instruction group contributes `S' = rotl(S, 1) ^ id`, and each
//! control-flow edge carries a compile-time correction so that, fault free,
//! `S` equals a per-block expected value at every point. Checks compare `S`
//! against the expected value and trap on mismatch.
//!
//! The rotate makes the update position-sensitive (a pure XOR fold would
//! let a skipped pair of identical ids cancel) and bijective per step, so
//! any dropped or reordered update survives to the next check.
//!
//! Protected conditional branches link the branch *decision* into this
//! redundancy: each outgoing edge merges the 32-bit condition symbol into
//! `S` with `S' = S ^ cond ^ corr`, where the edge's correction expects the
//! symbol that justifies taking that edge. Taking the wrong edge leaves `S`
//! off by `true_symbol ^ false_symbol`; a corrupted symbol leaves `S` off
//! by exactly the corruption mask. Either way the next check fires.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::enccmp::ConditionSymbol;
use crate::mir::{Instr, Program, Reg};
use crate::rng::SplitMix64;

/// The running signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfiState(pub u32);

/// Per-instruction-group signature update.
pub fn state_update(s: CfiState, instr_id: u32) -> CfiState {
    CfiState(s.0.rotate_left(1) ^ instr_id)
}

/// Merges a condition symbol (plus the edge correction) into the state.
/// Any single changed bit in `cond` changes the result by exactly that bit.
pub fn merge_condition(s: CfiState, cond: ConditionSymbol, corr: u32) -> CfiState {
    CfiState(s.0 ^ cond.0 ^ corr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("CFI violation: signature {actual:#010x}, expected {expected:#010x}")]
pub struct CfiViolation {
    pub actual: u32,
    pub expected: u32,
}

/// Compares the signature against its compile-time expected value.
pub fn check(s: CfiState, expected: u32) -> Result<(), CfiViolation> {
    if s.0 == expected {
        Ok(())
    } else {
        Err(CfiViolation {
            actual: s.0,
            expected,
        })
    }
}

/// Where checks are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckPolicy {
    /// A check at the end of every block (and in every edge block):
    /// earliest detection.
    EveryBlock,
    /// Checks only before `ret`: sparse, for studying detection latency.
    FunctionExit,
}

/// Protection info for one conditional branch: the register holding the
/// encoded condition and the symbol expected on each edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchProtection {
    pub cond: Reg,
    pub true_symbol: u32,
    pub false_symbol: u32,
}

/// Protected branches keyed by (function, block label); the branch is the
/// block's terminator.
pub type ProtectedBranches = HashMap<(String, String), BranchProtection>;

/// Instruction grouping: synthetic ranges `(start, len)` per (function,
/// block label). Instructions inside a range were emitted by an earlier
/// pass on behalf of one original instruction and share a single update.
pub type GroupMap = HashMap<(String, String), Vec<(usize, usize)>>;

/// One signature update planned for a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupUpdate {
    /// Index (pre-instrumentation) of the group's last instruction. The
    /// update follows it, except when it is the terminator, in which case
    /// the update precedes the terminator.
    pub last: usize,
    pub id: u32,
}

/// How an edge correction is realized in the instrumented program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSite {
    /// Correction placed in the predecessor, just before its `jmp`.
    Inline,
    /// Correction placed in a dedicated edge block with this label.
    EdgeBlock { label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCorrection {
    pub from: String,
    pub to: String,
    /// Index among the terminator's successors (CBR: 0 = true edge).
    pub edge_index: usize,
    pub site: EdgeSite,
    pub correction: u32,
    /// Present on protected conditional edges: merge the condition
    /// register with the correction instead of a plain update.
    pub merge: Option<MergeInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeInfo {
    pub cond: Reg,
    pub expected_symbol: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSite {
    /// Original block label, or an edge-block label.
    pub block: String,
    pub expected: u32,
}

/// CFI metadata for one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionCfi {
    /// Expected signature when entering the function (the entry block's
    /// expected entry signature); the VM starts from this value.
    pub initial_state: u32,
    /// Expected signature at each original block's entry.
    pub entry: BTreeMap<String, u32>,
    /// Expected signature after each original block's updates.
    pub exit: BTreeMap<String, u32>,
    pub updates: BTreeMap<String, Vec<GroupUpdate>>,
    pub edges: Vec<EdgeCorrection>,
    pub checks: Vec<CheckSite>,
}

/// CFI metadata for a program; serialized into the program container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfiMeta {
    pub seed: u64,
    pub policy: CheckPolicy,
    pub functions: BTreeMap<String, FunctionCfi>,
}

impl CfiMeta {
    pub fn initial_state(&self, func: &str) -> Option<u32> {
        self.functions.get(func).map(|f| f.initial_state)
    }

    /// Re-checks the defining equations: every edge's correction maps the
    /// predecessor's exit signature onto the successor's entry signature,
    /// through an update step for plain edges or a merge with the expected
    /// symbol for protected edges.
    pub fn verify(&self) -> Result<(), String> {
        for (fname, f) in &self.functions {
            for e in &f.edges {
                let exit = *f
                    .exit
                    .get(&e.from)
                    .ok_or_else(|| format!("@{fname}: no exit signature for %{}", e.from))?;
                let entry = *f
                    .entry
                    .get(&e.to)
                    .ok_or_else(|| format!("@{fname}: no entry signature for %{}", e.to))?;
                let landed = match &e.merge {
                    None => state_update(CfiState(exit), e.correction).0,
                    Some(m) => {
                        merge_condition(
                            CfiState(exit),
                            ConditionSymbol(m.expected_symbol),
                            e.correction,
                        )
                        .0
                    }
                };
                if landed != entry {
                    return Err(format!(
                        "@{fname}: edge %{} -> %{} lands on {landed:#010x}, expected \
                         {entry:#010x}",
                        e.from, e.to
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CfiError {
    #[error("@{func}: block %{label} is unreachable from the entry block")]
    Unreachable { func: String, label: String },
    #[error("@{func}: %{from} targets undeclared block %{to}")]
    UndeclaredTarget {
        func: String,
        from: String,
        to: String,
    },
    #[error("@{func} %{block}: marked as protected but terminator is not a cbr")]
    NotABranch { func: String, block: String },
}

/// Plans the CFI instrumentation of a validated program: pseudo-random
/// nonzero ids per instruction group, pseudo-random expected entry
/// signatures per block, exit signatures by folding, per-edge corrections
/// (merging the expected condition symbol on protected branch edges), and
/// check placements per policy. Deterministic in `seed`.
///
/// Conditional edges are realized in dedicated edge blocks named
/// `{from}.e{edge_index}`; jmp edges carry their correction inline in the
/// predecessor. The instrumentation pass materializes this plan.
pub fn derive_meta(
    prog: &Program,
    seed: u64,
    policy: CheckPolicy,
    protected: &ProtectedBranches,
    groups: &GroupMap,
) -> Result<CfiMeta, CfiError> {
    let mut functions = BTreeMap::new();
    for f in &prog.functions {
        // Streams are independent per function so adding a function does
        // not reshuffle another's ids.
        let mut rng = SplitMix64::derive(seed, fnv(&f.name));
        check_structure(f)?;

        let mut entry = BTreeMap::new();
        for b in &f.blocks {
            entry.insert(b.label.clone(), rng.next_u32_nonzero());
        }

        let mut exit = BTreeMap::new();
        let mut updates = BTreeMap::new();
        for b in &f.blocks {
            let key = (f.name.clone(), b.label.clone());
            let ranges = groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            let mut ups = Vec::new();
            let mut s = CfiState(entry[&b.label]);
            let mut i = 0;
            while i < b.instrs.len() {
                let last = match ranges.iter().find(|(start, _)| *start == i) {
                    Some(&(start, len)) => start + len - 1,
                    None => i,
                };
                let id = rng.next_u32_nonzero();
                s = state_update(s, id);
                ups.push(GroupUpdate { last, id });
                i = last + 1;
            }
            exit.insert(b.label.clone(), s.0);
            updates.insert(b.label.clone(), ups);
        }

        let mut edges = Vec::new();
        let mut used_labels: HashSet<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
        for b in &f.blocks {
            let term = b.instrs.last().expect("validated block");
            let succs = term.successors();
            if succs.is_empty() {
                continue;
            }
            let inline = matches!(term, Instr::Jmp { .. });
            let protection = protected.get(&(f.name.clone(), b.label.clone()));
            if protection.is_some() && !matches!(term, Instr::Cbr { .. }) {
                return Err(CfiError::NotABranch {
                    func: f.name.clone(),
                    block: b.label.clone(),
                });
            }
            for (edge_index, succ) in succs.iter().enumerate() {
                let from_exit = exit[&b.label];
                let to_entry = entry[*succ];
                let (correction, merge) = match protection {
                    Some(p) => {
                        let expected_symbol = if edge_index == 0 {
                            p.true_symbol
                        } else {
                            p.false_symbol
                        };
                        // entry(v) = exit(u) ^ symbol ^ corr
                        (
                            from_exit ^ expected_symbol ^ to_entry,
                            Some(MergeInfo {
                                cond: p.cond,
                                expected_symbol,
                            }),
                        )
                    }
                    // entry(v) = rotl(exit(u), 1) ^ corr
                    None => (from_exit.rotate_left(1) ^ to_entry, None),
                };
                let site = if inline {
                    EdgeSite::Inline
                } else {
                    let base = format!("{}.e{}", b.label, edge_index);
                    let mut label = base.clone();
                    let mut n = 0;
                    while used_labels.contains(&label) {
                        n += 1;
                        label = format!("{base}.{n}");
                    }
                    used_labels.insert(label.clone());
                    EdgeSite::EdgeBlock { label }
                };
                edges.push(EdgeCorrection {
                    from: b.label.clone(),
                    to: succ.to_string(),
                    edge_index,
                    site,
                    correction,
                    merge,
                });
            }
        }

        let mut checks = Vec::new();
        match policy {
            CheckPolicy::EveryBlock => {
                for b in &f.blocks {
                    checks.push(CheckSite {
                        block: b.label.clone(),
                        expected: exit[&b.label],
                    });
                }
                for e in &edges {
                    if let EdgeSite::EdgeBlock { label } = &e.site {
                        checks.push(CheckSite {
                            block: label.clone(),
                            expected: entry[&e.to],
                        });
                    }
                }
            }
            CheckPolicy::FunctionExit => {
                for b in &f.blocks {
                    if matches!(b.instrs.last(), Some(Instr::Ret { .. })) {
                        checks.push(CheckSite {
                            block: b.label.clone(),
                            expected: exit[&b.label],
                        });
                    }
                }
            }
        }

        functions.insert(
            f.name.clone(),
            FunctionCfi {
                initial_state: entry[&f.blocks[0].label],
                entry,
                exit,
                updates,
                edges,
                checks,
            },
        );
    }
    Ok(CfiMeta {
        seed,
        policy,
        functions,
    })
}

fn check_structure(f: &crate::mir::Function) -> Result<(), CfiError> {
    let mut reachable = HashSet::new();
    let mut work = vec![f.blocks[0].label.as_str()];
    while let Some(label) = work.pop() {
        if !reachable.insert(label) {
            continue;
        }
        let idx = f
            .block_index(label)
            .ok_or_else(|| CfiError::UndeclaredTarget {
                func: f.name.clone(),
                from: "?".into(),
                to: label.to_string(),
            })?;
        for succ in f.blocks[idx].instrs.iter().flat_map(|i| i.successors()) {
            if f.block_index(succ).is_none() {
                return Err(CfiError::UndeclaredTarget {
                    func: f.name.clone(),
                    from: f.blocks[idx].label.clone(),
                    to: succ.to_string(),
                });
            }
            work.push(succ);
        }
    }
    for b in &f.blocks {
        if !reachable.contains(b.label.as_str()) {
            return Err(CfiError::Unreachable {
                func: f.name.clone(),
                label: b.label.clone(),
            });
        }
    }
    Ok(())
}

fn fnv(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use crate::mir::parse;

    use super::*;

    #[test]
    fn state_update_examples() {
        assert_eq!(state_update(CfiState(0), 0).0, 0);
        assert_eq!(state_update(CfiState(0x8000_0000), 0).0, 1);
        assert_eq!(state_update(CfiState(5), 7).0, 13);
    }

    #[test]
    fn merge_examples() {
        assert_eq!(
            merge_condition(CfiState(0), ConditionSymbol(35552), 0).0,
            35552
        );
        // With a correction built for the true symbol, supplying the false
        // symbol shifts the state by exactly true ^ false = 0xFFFE.
        let x = 0xDEAD_BEEF;
        let corr = 35552 ^ 0x1234_5678;
        let with_true = merge_condition(CfiState(x), ConditionSymbol(35552), corr);
        let with_false = merge_condition(CfiState(x), ConditionSymbol(29982), corr);
        assert_eq!(with_true.0 ^ with_false.0, 0xFFFE);
        // merge(S, c, c ^ k) == S ^ k.
        assert_eq!(
            merge_condition(CfiState(x), ConditionSymbol(35552), 35552 ^ 7).0,
            x ^ 7
        );
    }

    #[test]
    fn check_examples() {
        assert!(check(CfiState(42), 42).is_ok());
        let err = check(CfiState(42), 43).unwrap_err();
        assert_eq!(err.actual, 42);
        assert_eq!(err.expected, 43);
    }

    #[test]
    fn state_update_is_bijective_per_step() {
        // rotate-then-xor is invertible, so distinct states stay distinct
        // through any update chain and a dropped update cannot be repaired
        // by a later one.
        let invert = |s: CfiState, id: u32| CfiState((s.0 ^ id).rotate_right(1));
        let mut rng = crate::rng::SplitMix64::new(31337);
        for _ in 0..10_000 {
            let s = CfiState(rng.next_u32());
            let id = rng.next_u32();
            assert_eq!(invert(state_update(s, id), id).0, s.0);
        }
    }

    const DIAMOND: &str = "\
func @f {
  block %entry:
    r2 = const 1
    cbr lt r0, r1, %then, %else
  block %then:
    jmp %join
  block %else:
    jmp %join
  block %join:
    ret r2
}
";

    #[test]
    fn meta_invariants_hold() {
        let prog = parse(DIAMOND).unwrap();
        let meta = derive_meta(
            &prog,
            1,
            CheckPolicy::EveryBlock,
            &ProtectedBranches::new(),
            &GroupMap::new(),
        )
        .unwrap();
        meta.verify().unwrap();
        let f = &meta.functions["f"];
        // 4 blocks, 4 block-end checks, plus one per conditional edge block.
        assert_eq!(f.edges.len(), 4);
        let edge_blocks = f
            .edges
            .iter()
            .filter(|e| matches!(e.site, EdgeSite::EdgeBlock { .. }))
            .count();
        assert_eq!(edge_blocks, 2);
        assert_eq!(f.checks.len(), 4 + 2);
        // Every id is nonzero.
        for ups in f.updates.values() {
            for u in ups {
                assert_ne!(u.id, 0);
            }
        }
    }

    #[test]
    fn seeds_change_signatures_but_not_consistency() {
        let prog = parse(DIAMOND).unwrap();
        let a = derive_meta(
            &prog,
            1,
            CheckPolicy::EveryBlock,
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        let b = derive_meta(
            &prog,
            2,
            CheckPolicy::EveryBlock,
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert_ne!(
            a.functions["f"].initial_state,
            b.functions["f"].initial_state
        );
        a.verify().unwrap();
        b.verify().unwrap();
        // Same seed reproduces bit-for-bit.
        let a2 = derive_meta(
            &prog,
            1,
            CheckPolicy::EveryBlock,
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(a, a2);
    }

    #[test]
    fn unreachable_blocks_are_rejected() {
        let src = "\
func @f {
  block %entry:
    ret r0
  block %island:
    ret r1
}
";
        let prog = parse(src).unwrap();
        let err = derive_meta(
            &prog,
            1,
            CheckPolicy::EveryBlock,
            &Default::default(),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CfiError::Unreachable { .. }));
    }

    #[test]
    fn protected_edges_merge_the_expected_symbol() {
        let src = "\
func @f protect {
  block %entry:
    r9 = const 35552
    cbr eq r5, r9, %t, %e
  block %t:
    ret r0
  block %e:
    ret r1
}
";
        let prog = parse(src).unwrap();
        let mut protected = ProtectedBranches::new();
        protected.insert(
            ("f".into(), "entry".into()),
            BranchProtection {
                cond: Reg(5),
                true_symbol: 35552,
                false_symbol: 29982,
            },
        );
        let meta = derive_meta(
            &prog,
            9,
            CheckPolicy::EveryBlock,
            &protected,
            &GroupMap::new(),
        )
        .unwrap();
        meta.verify().unwrap();
        let f = &meta.functions["f"];
        let true_edge = f.edges.iter().find(|e| e.edge_index == 0).unwrap();
        let false_edge = f.edges.iter().find(|e| e.edge_index == 1).unwrap();
        assert_eq!(true_edge.merge.unwrap().expected_symbol, 35552);
        assert_eq!(false_edge.merge.unwrap().expected_symbol, 29982);
        // Corrections for the two edges differ by symbol xor plus entry
        // signatures; supplying the wrong symbol can never land correctly.
        let exit = f.exit["entry"];
        let wrong = merge_condition(CfiState(exit), ConditionSymbol(29982), true_edge.correction);
        assert_ne!(wrong.0, f.entry["t"]);
        assert_eq!(wrong.0 ^ f.entry["t"], 0xFFFE);
    }
}
