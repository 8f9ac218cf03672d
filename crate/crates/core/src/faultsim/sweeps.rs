//! Exhaustive fault enumeration over standalone comparison traces.
//!
//! The injection model: every intermediate word of a comparison offers one
//! injection opportunity, after the word is produced and before it is
//! consumed; the final condition word is included. A fault distributes bit
//! flips over the (word, bit) position space (4 words x 32 bits = 128
//! positions for ordering comparisons, 7 x 32 = 224 for equality) and the
//! downstream steps recompute from the corrupted values.
//!
//! Classification is purely symbolic: the corrupted final word is either
//! the correct symbol (masked), the opposite valid symbol (silent control
//! corruption), or anything else (detected by the AN/symbol redundancy).

use rayon::prelude::*;

use crate::ancode::{AnParams, AnWord};
use crate::enccmp::{classify_symbol, encoded_compare, replay_with_masks, Predicate, SymbolClass};
use crate::faultsim::{ClassCounts, FaultSimError, OutcomeClass};

/// One comparison instance under fault injection.
#[derive(Debug, Clone, Copy)]
pub struct TraceCase {
    pub pred: Predicate,
    pub x: AnWord,
    pub y: AnWord,
    pub params: AnParams,
}

impl TraceCase {
    pub fn new(pred: Predicate, x_n: u32, y_n: u32, params: AnParams) -> Self {
        let x = params.encode(x_n).expect("functional value in range");
        let y = params.encode(y_n).expect("functional value in range");
        Self { pred, x, y, params }
    }

    /// Number of (word, bit) injection positions.
    pub fn positions(&self) -> usize {
        self.pred.family().trace_width() * 32
    }

    pub(crate) fn natural(&self) -> SymbolClass {
        classify_symbol(
            encoded_compare(self.pred, self.x, self.y, &self.params),
            self.pred,
            &self.params,
        )
    }

    /// Applies flips at the given positions and classifies the outcome.
    pub fn classify_spread(&self, positions: &[usize]) -> OutcomeClass {
        self.classify_positions(self.natural(), positions)
    }

    fn classify_positions(&self, natural: SymbolClass, positions: &[usize]) -> OutcomeClass {
        let mut masks = [0u32; 7];
        for &p in positions {
            masks[p / 32] |= 1 << (p % 32);
        }
        let final_sym = replay_with_masks(
            self.pred,
            self.x.raw(),
            self.y.raw(),
            &self.params,
            &masks[..self.pred.family().trace_width()],
        );
        match classify_symbol(final_sym, self.pred, &self.params) {
            SymbolClass::Invalid => OutcomeClass::DetectedAN,
            c if c == natural => OutcomeClass::Masked,
            _ => OutcomeClass::SdcControl,
        }
    }
}

pub(crate) fn n_choose_k(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut result = 1u128;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

/// Total evaluations for all placements of 1..=k flips over p positions.
pub fn placement_count(positions: usize, max_bits: u32) -> u128 {
    (1..=max_bits as u128)
        .map(|j| n_choose_k(positions as u128, j))
        .sum()
}

/// Enumerates *all* ways to distribute 1..=`max_bits` bit flips over the
/// trace's position space and classifies every outcome. Placements over
/// `bound` evaluations are refused.
pub fn spread_fault_enumeration(
    case: &TraceCase,
    max_bits: u32,
    bound: u64,
) -> Result<ClassCounts, FaultSimError> {
    let p = case.positions();
    let combos = placement_count(p, max_bits);
    if combos > bound as u128 {
        return Err(FaultSimError::Resource { combos, bound });
    }
    let natural = case.natural();

    let mut totals = ClassCounts::default();
    for j in 1..=max_bits as usize {
        // Parallel over the first position; the rest enumerate depth-first.
        let counts = (0..p)
            .into_par_iter()
            .map(|first| {
                let mut local = ClassCounts::default();
                let mut buf = Vec::with_capacity(j);
                buf.push(first);
                enumerate_rest(case, natural, &mut buf, first + 1, j - 1, &mut local);
                local
            })
            .reduce(ClassCounts::default, ClassCounts::merge);
        totals = totals.merge(counts);
    }
    Ok(totals)
}

fn enumerate_rest(
    case: &TraceCase,
    natural: SymbolClass,
    buf: &mut Vec<usize>,
    start: usize,
    remaining: usize,
    counts: &mut ClassCounts,
) {
    if remaining == 0 {
        counts.bump(case.classify_positions(natural, buf));
        return;
    }
    let p = case.positions();
    for next in start..=(p - remaining) {
        buf.push(next);
        enumerate_rest(case, natural, buf, next + 1, remaining - 1, counts);
        buf.pop();
    }
}

/// Exhaustive sweep of all XOR masks of 1..=`max_bits` bits applied to one
/// intermediate word at a time (every word takes a turn).
pub fn single_word_fault_sweep(case: &TraceCase, max_bits: u32) -> ClassCounts {
    let width = case.pred.family().trace_width();
    let natural = case.natural();
    (0..width)
        .into_par_iter()
        .map(|word| {
            let mut local = ClassCounts::default();
            let mut buf = Vec::with_capacity(max_bits as usize);
            for j in 1..=max_bits as usize {
                enumerate_word_masks(case, natural, word, &mut buf, 0, j, &mut local);
            }
            local
        })
        .reduce(ClassCounts::default, ClassCounts::merge)
}

fn enumerate_word_masks(
    case: &TraceCase,
    natural: SymbolClass,
    word: usize,
    bits: &mut Vec<usize>,
    start: usize,
    remaining: usize,
    counts: &mut ClassCounts,
) {
    if remaining == 0 {
        let positions: Vec<usize> = bits.iter().map(|b| word * 32 + b).collect();
        counts.bump(case.classify_positions(natural, &positions));
        return;
    }
    for next in start..=(32 - remaining) {
        bits.push(next);
        enumerate_word_masks(case, natural, word, bits, next + 1, remaining - 1, counts);
        bits.pop();
    }
}
