//! Redundancy-preserving encoded comparisons.
//!
//! Comparing two AN-coded words with an ordinary compare instruction
//! collapses all redundancy into a 1-bit flag. Instead, these routines
//! compute the comparison *arithmetically* so that the outcome is one of
//! two 32-bit condition symbols far apart in Hamming distance.
//!
//! Ordering predicates subtract the operands and exploit the fact that a
//! negative difference, reinterpreted as unsigned, picks up the residue
//! `2^32 mod A`: adding a constant `C` and reducing mod `A` maps every
//! positive difference to `C` and every negative one to `(2^32 mod A) + C`.
//! Equality runs the reduction in both directions and adds the remainders.
//!
//! With the default parameters both families share the same symbol pair
//! {29982, 35552}, 15 bits apart. 29982 is the *false* symbol of the
//! ordering family but the *true* symbol of the equality family: symbols
//! are only meaningful relative to the predicate fixed at a branch site,
//! and must never be compared across sites with different predicates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ancode::{AnParams, AnWord};

/// The six comparison predicates (unsigned).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Predicate {
    pub const ALL: [Predicate; 6] = [
        Predicate::Eq,
        Predicate::Ne,
        Predicate::Lt,
        Predicate::Le,
        Predicate::Gt,
        Predicate::Ge,
    ];

    /// Plain (unencoded) evaluation on 32-bit unsigned values.
    pub fn eval(self, a: u32, b: u32) -> bool {
        match self {
            Predicate::Eq => a == b,
            Predicate::Ne => a != b,
            Predicate::Lt => a < b,
            Predicate::Le => a <= b,
            Predicate::Gt => a > b,
            Predicate::Ge => a >= b,
        }
    }

    pub fn family(self) -> PredicateFamily {
        match self {
            Predicate::Eq | Predicate::Ne => PredicateFamily::Equality,
            _ => PredicateFamily::Ordering,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Predicate::Eq => "eq",
            Predicate::Ne => "ne",
            Predicate::Lt => "lt",
            Predicate::Le => "le",
            Predicate::Gt => "gt",
            Predicate::Ge => "ge",
        };
        f.write_str(s)
    }
}

impl FromStr for Predicate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eq" => Ok(Predicate::Eq),
            "ne" => Ok(Predicate::Ne),
            "lt" => Ok(Predicate::Lt),
            "le" => Ok(Predicate::Le),
            "gt" => Ok(Predicate::Gt),
            "ge" => Ok(Predicate::Ge),
            other => Err(format!("unknown predicate `{other}`")),
        }
    }
}

/// The two predicate families; they differ in algorithm, step count, and
/// additive constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateFamily {
    Ordering,
    Equality,
}

impl PredicateFamily {
    /// Number of intermediate words in a comparison trace.
    pub fn trace_width(self) -> usize {
        match self {
            PredicateFamily::Ordering => 4,
            PredicateFamily::Equality => 7,
        }
    }

    /// Step names, in execution order; the last step is the condition.
    pub fn step_names(self) -> &'static [&'static str] {
        match self {
            PredicateFamily::Ordering => &["operand_x", "operand_y", "diff", "cond"],
            PredicateFamily::Equality => &[
                "operand_x",
                "operand_y",
                "diff1",
                "rem1",
                "diff2",
                "rem2",
                "cond",
            ],
        }
    }
}

/// A redundant 32-bit truth value. Exactly two values are valid per
/// predicate (see [`symbols_for`]); everything else signals corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionSymbol(pub u32);

impl ConditionSymbol {
    pub fn value(self) -> u32 {
        self.0
    }
}

/// The valid symbol pair of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolPair {
    pub true_symbol: ConditionSymbol,
    pub false_symbol: ConditionSymbol,
}

impl SymbolPair {
    /// Hamming distance between the two symbols.
    pub fn distance(&self) -> u32 {
        (self.true_symbol.0 ^ self.false_symbol.0).count_ones()
    }
}

/// Classification of an observed symbol against a predicate's valid pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolClass {
    True,
    False,
    Invalid,
}

/// Ordering-family symbol values for raw parameters: (negative-difference
/// value, positive-difference value) = ((2^32 % A + C) % A, C).
pub(crate) fn ordering_symbols(a: u32, c_ord: u32, r: u32) -> (u32, u32) {
    let neg = ((r as u64 + c_ord as u64) % a as u64) as u32;
    (neg, c_ord)
}

/// Equality-family symbol values for raw parameters: (equal value,
/// not-equal value) = (2C, (2^32 % A + C) % A + C). Sums wrap exactly as
/// the 32-bit instruction sequence computes them.
pub(crate) fn equality_symbols(a: u32, c_eq: u32, r: u32) -> (u32, u32) {
    let cross = ((r as u64 + c_eq as u64) % a as u64) as u32;
    (c_eq.wrapping_add(c_eq), cross.wrapping_add(c_eq))
}

/// The (true, false) symbol pair of a predicate.
pub fn symbols_for(pred: Predicate, p: &AnParams) -> SymbolPair {
    let (t, f) = match pred {
        Predicate::Lt | Predicate::Gt => ordering_symbols(p.a(), p.c_ord(), p.residue()),
        Predicate::Le | Predicate::Ge => {
            let (neg, pos) = ordering_symbols(p.a(), p.c_ord(), p.residue());
            (pos, neg)
        }
        Predicate::Eq => equality_symbols(p.a(), p.c_eq(), p.residue()),
        Predicate::Ne => {
            let (eq_t, eq_f) = equality_symbols(p.a(), p.c_eq(), p.residue());
            (eq_f, eq_t)
        }
    };
    SymbolPair {
        true_symbol: ConditionSymbol(t),
        false_symbol: ConditionSymbol(f),
    }
}

/// Subtraction operand order per predicate: LT/GE subtract `x - y`,
/// GT/LE subtract `y - x` (the swap realizes the dual predicate).
fn ordering_operands(pred: Predicate, x: u32, y: u32) -> (u32, u32) {
    match pred {
        Predicate::Lt | Predicate::Ge => (x, y),
        Predicate::Gt | Predicate::Le => (y, x),
        _ => unreachable!("ordering_operands on equality predicate"),
    }
}

/// One named intermediate word of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub name: &'static str,
    pub value: u32,
}

/// The intermediate words of one encoded comparison, in execution order.
/// The final step is the condition symbol; the fault simulator injects into
/// each word after it is produced and before it is consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareTrace {
    pred: Predicate,
    steps: Vec<TraceStep>,
}

impl CompareTrace {
    pub fn pred(&self) -> Predicate {
        self.pred
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn step(&self, name: &str) -> Option<u32> {
        self.steps.iter().find(|s| s.name == name).map(|s| s.value)
    }

    /// The final condition symbol.
    pub fn cond(&self) -> ConditionSymbol {
        ConditionSymbol(self.steps.last().expect("trace is never empty").value)
    }
}

/// Evaluates the comparison with an XOR mask applied to every intermediate
/// word after it is produced. `masks` has one entry per trace step (see
/// [`PredicateFamily::trace_width`]); all-zero masks give the fault-free
/// result. Returns the final (possibly corrupted) condition word.
pub fn replay_with_masks(
    pred: Predicate,
    x: u32,
    y: u32,
    p: &AnParams,
    masks: &[u32],
) -> ConditionSymbol {
    debug_assert_eq!(masks.len(), pred.family().trace_width());
    let a = p.a();
    match pred.family() {
        PredicateFamily::Ordering => {
            let ox = x ^ masks[0];
            let oy = y ^ masks[1];
            let (lhs, rhs) = ordering_operands(pred, ox, oy);
            let diff = lhs.wrapping_sub(rhs).wrapping_add(p.c_ord()) ^ masks[2];
            ConditionSymbol((diff % a) ^ masks[3])
        }
        PredicateFamily::Equality => {
            let ox = x ^ masks[0];
            let oy = y ^ masks[1];
            let d1 = ox.wrapping_sub(oy).wrapping_add(p.c_eq()) ^ masks[2];
            let r1 = (d1 % a) ^ masks[3];
            let d2 = oy.wrapping_sub(ox).wrapping_add(p.c_eq()) ^ masks[4];
            let r2 = (d2 % a) ^ masks[5];
            ConditionSymbol(r1.wrapping_add(r2) ^ masks[6])
        }
    }
}

/// Encoded comparison of two code words. Invalid inputs are not an error:
/// they propagate into a symbol outside the valid pair, which is the
/// detection mechanism.
pub fn encoded_compare(pred: Predicate, x: AnWord, y: AnWord, p: &AnParams) -> ConditionSymbol {
    let zero = [0u32; 7];
    replay_with_masks(
        pred,
        x.raw(),
        y.raw(),
        p,
        &zero[..pred.family().trace_width()],
    )
}

/// The comparison with every named intermediate recorded.
pub fn compare_trace(pred: Predicate, x: AnWord, y: AnWord, p: &AnParams) -> CompareTrace {
    let a = p.a();
    let names = pred.family().step_names();
    let steps = match pred.family() {
        PredicateFamily::Ordering => {
            let (lhs, rhs) = ordering_operands(pred, x.raw(), y.raw());
            let diff = lhs.wrapping_sub(rhs).wrapping_add(p.c_ord());
            let cond = diff % a;
            vec![x.raw(), y.raw(), diff, cond]
        }
        PredicateFamily::Equality => {
            let d1 = x.raw().wrapping_sub(y.raw()).wrapping_add(p.c_eq());
            let r1 = d1 % a;
            let d2 = y.raw().wrapping_sub(x.raw()).wrapping_add(p.c_eq());
            let r2 = d2 % a;
            let cond = r1.wrapping_add(r2);
            vec![x.raw(), y.raw(), d1, r1, d2, r2, cond]
        }
    };
    CompareTrace {
        pred,
        steps: names
            .iter()
            .zip(steps)
            .map(|(&name, value)| TraceStep { name, value })
            .collect(),
    }
}

/// Maps an observed symbol onto True/False/Invalid for a predicate.
pub fn classify_symbol(s: ConditionSymbol, pred: Predicate, p: &AnParams) -> SymbolClass {
    let pair = symbols_for(pred, p);
    if s == pair.true_symbol {
        SymbolClass::True
    } else if s == pair.false_symbol {
        SymbolClass::False
    } else {
        SymbolClass::Invalid
    }
}

/// Exhaustive search for the additive constant that maximizes the Hamming
/// distance between a family's two symbols. Returns `(best_c, distance)`;
/// ties resolve to the smallest constant. A tool for exploring other
/// parameter sets; the defaults are pinned.
pub fn search_symbol_constant(a: u32, family: PredicateFamily) -> (u32, u32) {
    let r = ((1u64 << 32) % a as u64) as u32;
    let mut best = (1, 0);
    for c in 1..a {
        let (t, f) = match family {
            PredicateFamily::Ordering => ordering_symbols(a, c, r),
            PredicateFamily::Equality => equality_symbols(a, c, r),
        };
        let d = (t ^ f).count_ones();
        if d > best.1 {
            best = (c, d);
        }
    }
    best
}
