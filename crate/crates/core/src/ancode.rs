//! AN arithmetic error-detecting codes.
//!
//! A functional value `n` is carried as the 32-bit code word `n_c = A * n`;
//! every multiple of `A` (within range) is a valid code word and everything
//! else is evidence of corruption. Addition and subtraction stay closed in
//! the code domain, so instrumented arithmetic needs no extra bookkeeping.
//! The quality of a given `A` is its minimum pairwise Hamming distance,
//! which [`min_code_distance`] computes by brute force.
//!
//! Word width is fixed at 32 bits with wrapping semantics; the negative-
//! difference trick used by the encoded comparisons depends on exactly this
//! two's-complement wrap. Functional values are unsigned 16-bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enccmp;

/// Default encoding constant (a "super A" for 16-bit functional values).
pub const DEFAULT_A: u32 = 63877;
/// Default additive constant for equality/inequality comparisons.
pub const DEFAULT_C_EQ: u32 = 14991;
/// Default additive constant for ordering comparisons.
pub const DEFAULT_C_ORD: u32 = 29982;
/// Default largest legal functional value.
pub const DEFAULT_N_MAX: u32 = 65535;

/// Pairwise enumeration limit for [`min_code_distance`]: at most 2^16
/// code words.
pub const DISTANCE_ENUM_BOUND: u32 = 1 << 16;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AnCodeError {
    #[error("functional value {value} exceeds n_max {n_max}")]
    Range { value: u32, n_max: u32 },
    #[error("word {raw:#010x} is not a valid code word (congruence or range violated)")]
    Integrity { raw: u32 },
    #[error("invalid AN parameters: {0}")]
    Params(String),
    #[error("n_max {n_max} exceeds the pairwise enumeration bound ({bound} code words)")]
    Resource { n_max: u32, bound: u32 },
}

/// AN-code parameter set. Immutable after construction; every operation on
/// it is a pure function, so values can be shared freely across threads.
/// Deserialization revalidates (and recomputes the residue), so containers
/// cannot smuggle in inconsistent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AnParamsSpec")]
pub struct AnParams {
    a: u32,
    c_eq: u32,
    c_ord: u32,
    /// 2^32 mod A, precomputed. This is the residue that separates negative
    /// (wrapped) differences from positive ones in the encoded comparisons.
    r: u32,
    n_max: u32,
}

impl Default for AnParams {
    fn default() -> Self {
        Self::new(DEFAULT_A, DEFAULT_C_EQ, DEFAULT_C_ORD, DEFAULT_N_MAX)
            .expect("default parameters are valid")
    }
}

impl AnParams {
    /// Validates and builds a parameter set.
    ///
    /// Beyond the structural requirements (`0 < C < A`, `A * n_max` fits in
    /// 32 bits, 16-bit functional range), the constructor rejects parameter
    /// sets whose condition symbols would be degenerate: both predicate
    /// families must keep their two symbols at Hamming distance >= 6 and
    /// away from all-zero/all-one words.
    pub fn new(a: u32, c_eq: u32, c_ord: u32, n_max: u32) -> Result<Self, AnCodeError> {
        if a < 2 {
            return Err(AnCodeError::Params(format!("A must be >= 2, got {a}")));
        }
        if c_eq == 0 || c_eq >= a {
            return Err(AnCodeError::Params(format!(
                "C_eq must satisfy 0 < C < A, got {c_eq} with A = {a}"
            )));
        }
        if c_ord == 0 || c_ord >= a {
            return Err(AnCodeError::Params(format!(
                "C_ord must satisfy 0 < C < A, got {c_ord} with A = {a}"
            )));
        }
        if n_max == 0 || n_max > 0xFFFF {
            return Err(AnCodeError::Params(format!(
                "n_max must be in 1..=65535, got {n_max}"
            )));
        }
        if (a as u64) * (n_max as u64) > u32::MAX as u64 {
            return Err(AnCodeError::Params(format!(
                "A * n_max = {} does not fit in 32 bits",
                (a as u64) * (n_max as u64)
            )));
        }
        let r = ((1u64 << 32) % a as u64) as u32;

        for (family, (t, f)) in [
            ("ordering", enccmp::ordering_symbols(a, c_ord, r)),
            ("equality", enccmp::equality_symbols(a, c_eq, r)),
        ] {
            for s in [t, f] {
                if s == 0 || s == u32::MAX {
                    return Err(AnCodeError::Params(format!(
                        "{family} condition symbol {s:#010x} is all-zero or all-one"
                    )));
                }
            }
            let d = (t ^ f).count_ones();
            if d < 6 {
                return Err(AnCodeError::Params(format!(
                    "{family} condition symbols {t} / {f} have Hamming distance {d} (< 6)"
                )));
            }
        }

        Ok(Self {
            a,
            c_eq,
            c_ord,
            r,
            n_max,
        })
    }

    pub fn a(&self) -> u32 {
        self.a
    }
    pub fn c_eq(&self) -> u32 {
        self.c_eq
    }
    pub fn c_ord(&self) -> u32 {
        self.c_ord
    }
    /// 2^32 mod A.
    pub fn residue(&self) -> u32 {
        self.r
    }
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Encodes a functional value as `A * n`.
    pub fn encode(&self, n: u32) -> Result<AnWord, AnCodeError> {
        if n > self.n_max {
            return Err(AnCodeError::Range {
                value: n,
                n_max: self.n_max,
            });
        }
        Ok(AnWord(self.a * n))
    }

    /// Recovers the functional value, or reports a detected fault when the
    /// congruence or the range check fails.
    pub fn decode(&self, w: AnWord) -> Result<u32, AnCodeError> {
        if !self.is_valid(w) {
            return Err(AnCodeError::Integrity { raw: w.0 });
        }
        Ok(w.0 / self.a)
    }

    /// True iff `raw mod A == 0` and the functional value is in range.
    pub fn is_valid(&self, w: AnWord) -> bool {
        w.0.is_multiple_of(self.a) && w.0 / self.a <= self.n_max
    }

    /// Minimum pairwise Hamming distance of this parameter set's code.
    pub fn min_code_distance(&self) -> Result<u32, AnCodeError> {
        min_code_distance(self.a, self.n_max)
    }
}

#[derive(Deserialize)]
struct AnParamsSpec {
    a: u32,
    c_eq: u32,
    c_ord: u32,
    n_max: u32,
}

impl TryFrom<AnParamsSpec> for AnParams {
    type Error = AnCodeError;
    fn try_from(s: AnParamsSpec) -> Result<Self, Self::Error> {
        AnParams::new(s.a, s.c_eq, s.c_ord, s.n_max)
    }
}

/// A 32-bit word in the AN domain. The wrapper does not guarantee validity:
/// faulted or overflowed words are representable on purpose, and
/// [`AnParams::is_valid`] is the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnWord(pub u32);

impl AnWord {
    pub fn raw(self) -> u32 {
        self.0
    }
}

/// Code-domain addition: `A*x + A*y = A*(x+y)` as long as the functional
/// sum stays in range. Overflow past `n_max` yields an invalid word, which
/// `is_valid` reports; that is the intended detection path, not an error.
pub fn an_add(x: AnWord, y: AnWord) -> AnWord {
    AnWord(x.0.wrapping_add(y.0))
}

/// Code-domain subtraction as a raw 32-bit word. For `x >= y` this is the
/// code word of the difference; for `x < y` the two's-complement wrap makes
/// the result `2^32 + A*(x - y)`, which is deliberately *not* congruent to
/// zero mod A; the encoded comparisons build on exactly this residue.
pub fn an_sub(x: AnWord, y: AnWord) -> u32 {
    x.0.wrapping_sub(y.0)
}

/// Minimum Hamming distance over all pairs of code words `A*i`, `A*j` with
/// `0 <= i < j <= n_max`, computed on 32-bit (wrapping) words.
///
/// This is a full pairwise scan (~2.1e9 pairs at n_max = 65535); the pair
/// space is partitioned across workers and the min-reduction makes the
/// result independent of the partitioning.
pub fn min_code_distance(a: u32, n_max: u32) -> Result<u32, AnCodeError> {
    if a == 0 {
        return Err(AnCodeError::Params("A must be nonzero".into()));
    }
    if n_max == 0 {
        return Err(AnCodeError::Params(
            "need at least two code words (n_max >= 1)".into(),
        ));
    }
    if n_max >= DISTANCE_ENUM_BOUND {
        return Err(AnCodeError::Resource {
            n_max,
            bound: DISTANCE_ENUM_BOUND,
        });
    }
    let words: Vec<u32> = (0..=n_max).map(|i| a.wrapping_mul(i)).collect();
    let min = (0..words.len() - 1)
        .into_par_iter()
        .map(|i| {
            let wi = words[i];
            let mut m = u32::MAX;
            for &wj in &words[i + 1..] {
                let d = (wi ^ wj).count_ones();
                if d < m {
                    m = d;
                }
            }
            m
        })
        .min()
        .expect("at least one pair");
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> AnParams {
        AnParams::default()
    }

    #[test]
    fn default_params() {
        let p = p();
        assert_eq!(p.a(), 63877);
        assert_eq!(p.c_eq(), 14991);
        assert_eq!(p.c_ord(), 29982);
        assert_eq!(p.n_max(), 65535);
        // 2^32 mod 63877, checked against independent 64-bit arithmetic.
        assert_eq!(p.residue(), ((1u64 << 32) % 63877) as u32);
        assert_eq!(p.residue(), 5570);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(AnParams::new(63877, 0, 29982, 65535).is_err());
        assert!(AnParams::new(63877, 63877, 29982, 65535).is_err());
        assert!(AnParams::new(63877, 14991, 70000, 65535).is_err());
        assert!(AnParams::new(63877, 14991, 29982, 0).is_err());
        // A * n_max overflows 32 bits.
        assert!(AnParams::new(1 << 17, 5, 7, 65535).is_err());
        // Power-of-two A: residue 0, symbols collapse to distance 0.
        assert!(AnParams::new(1 << 10, 5, 7, 63).is_err());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(p().encode(0).unwrap().raw(), 0);
        assert_eq!(p().encode(1).unwrap().raw(), 63877);
        // Checked against an independent 64-bit multiply.
        assert_eq!((5u64 * 63877) as u32, 319385);
        assert_eq!(p().encode(5).unwrap().raw(), 319385);
        assert!(matches!(
            p().encode(65536),
            Err(AnCodeError::Range { value: 65536, .. })
        ));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(p().decode(AnWord(319385)).unwrap(), 5);
        assert_eq!(p().decode(AnWord(0)).unwrap(), 0);
        assert!(matches!(
            p().decode(AnWord(319386)),
            Err(AnCodeError::Integrity { raw: 319386 })
        ));
    }

    #[test]
    fn validity_examples() {
        assert!(p().is_valid(AnWord(63877)));
        assert!(!p().is_valid(AnWord(63878)));
        // Largest in-range code word.
        assert!(p().is_valid(AnWord(63877u32.wrapping_mul(65535))));
        // One functional step beyond n_max: still a multiple of A but out
        // of range, so it must be rejected.
        assert!(!p().is_valid(AnWord(63877u32.wrapping_mul(65536))));
    }

    #[test]
    fn add_examples() {
        let p = p();
        let e = |n| p.encode(n).unwrap();
        assert_eq!(an_add(e(2), e(3)), e(5));
        assert_eq!(an_add(e(0), e(7)), e(7));
        let over = an_add(e(65535), e(1));
        // One functional step past n_max, reduced to 32 bits by the cast.
        assert_eq!(over.raw(), (63877u64 * 65536) as u32);
        assert!(!p.is_valid(over));
    }

    #[test]
    fn sub_examples() {
        let p = p();
        let e = |n| p.encode(n).unwrap();
        assert_eq!(an_sub(e(5), e(3)), e(2).raw());
        assert_eq!(an_sub(e(9), e(9)), 0);
        // Negative difference wraps: 2^32 - 2*A, by 64-bit arithmetic.
        assert_eq!(an_sub(e(3), e(5)), ((1u64 << 32) - 2 * 63877) as u32);
        assert_eq!(an_sub(e(3), e(5)), 4294839542);
    }

    #[test]
    fn min_distance_consecutive_integers() {
        assert_eq!(min_code_distance(1, 3).unwrap(), 1);
    }

    #[test]
    fn min_distance_matches_naive_oracle() {
        // Independent brute force over the 120 pairs of A = 3, n_max = 15.
        let naive = |a: u32, n_max: u32| {
            let mut best = u32::MAX;
            for i in 0..=n_max {
                for j in (i + 1)..=n_max {
                    best = best.min((a.wrapping_mul(i) ^ a.wrapping_mul(j)).count_ones());
                }
            }
            best
        };
        assert_eq!(min_code_distance(3, 15).unwrap(), naive(3, 15));
        assert_eq!(min_code_distance(63877, 255).unwrap(), naive(63877, 255));
    }

    #[test]
    fn min_distance_bounds() {
        assert!(matches!(
            min_code_distance(63877, 1 << 16),
            Err(AnCodeError::Resource { .. })
        ));
        assert!(min_code_distance(63877, 0).is_err());
    }

    #[test]
    fn masked_words_stay_invalid_up_to_five_bits() {
        // Detection floor on sampled code words: every XOR mask of 1..=5
        // bits breaks validity (congruence or range). Together with the
        // exhaustive distance-6 scan this is the full statement.
        fn masks_up_to_5(mut visit: impl FnMut(u32)) {
            fn rec(mask: u32, start: u32, left: u32, visit: &mut impl FnMut(u32)) {
                if mask != 0 {
                    visit(mask);
                }
                if left == 0 {
                    return;
                }
                for b in start..32 {
                    rec(mask | (1 << b), b + 1, left - 1, visit);
                }
            }
            rec(0, 0, 5, &mut visit);
        }
        let p = p();
        for n in [0u32, 1, 255, 65535, 40000] {
            let w = p.encode(n).unwrap().raw();
            masks_up_to_5(|m| {
                if p.is_valid(AnWord(w ^ m)) {
                    panic!("mask {m:#x} on {w:#x} produced a valid word");
                }
            });
        }
    }

    proptest! {
        #[test]
        fn round_trip(n in 0u32..=65535) {
            let p = p();
            let w = p.encode(n).unwrap();
            prop_assert!(p.is_valid(w));
            prop_assert_eq!(p.decode(w).unwrap(), n);
        }

        #[test]
        fn closure_under_add_sub(a in 0u32..=65535, b in 0u32..=65535) {
            let p = p();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if (a as u64) + (b as u64) <= 65535 {
                prop_assert_eq!(
                    an_add(p.encode(a).unwrap(), p.encode(b).unwrap()),
                    p.encode(a + b).unwrap()
                );
            }
            prop_assert_eq!(
                an_sub(p.encode(hi).unwrap(), p.encode(lo).unwrap()),
                p.encode(hi - lo).unwrap().raw()
            );
        }

        #[test]
        fn negative_difference_residue(a in 0u32..=65535, b in 0u32..=65535) {
            // For a < b the wrapped difference is congruent to 2^32 mod A,
            // never to zero.
            prop_assume!(a < b);
            let p = p();
            let d = an_sub(p.encode(a).unwrap(), p.encode(b).unwrap());
            prop_assert_eq!(d % p.a(), p.residue());
            prop_assert_ne!(d % p.a(), 0);
        }
    }
}
