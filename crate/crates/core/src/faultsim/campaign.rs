//! Seeded fault campaigns and their statistics.
//!
//! Monte-Carlo sampling is counter-based: sample `i` of a campaign draws
//! from an RNG derived from `(seed, i)`, so results are identical no
//! matter how the samples are partitioned across workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ancode::AnParams;
use crate::enccmp::Predicate;
use crate::faultsim::sweeps::{spread_fault_enumeration, TraceCase};
use crate::faultsim::{ClassCounts, FaultPlan, FaultSimError, FaultSpec, RunContext};
use crate::mir::{Instr, Reg};
use crate::rng::SplitMix64;

/// Echo of the campaign parameters, serialized into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// `trace:<pred>` or `program:<function>`.
    pub target: String,
    /// `exhaustive` or `mc`.
    pub mode: String,
    /// Bit budget: exhaustive mode enumerates 1..=bits, Monte Carlo draws
    /// exactly `bits` distinct positions per sample.
    pub bits: u32,
    /// Monte-Carlo samples (0 for exhaustive mode).
    pub samples: u64,
    /// Input pairs evaluated (trace campaigns).
    pub pairs: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub counts: ClassCounts,
    pub total: u64,
    /// Silent control-corruption rate: `sdc_control / total`.
    pub sdc_rate: f64,
    /// Wilson 95% interval for the control-corruption probability.
    pub wilson_ci: [f64; 2],
    pub seed: u64,
}

impl CampaignResult {
    fn assemble(config: CampaignConfig, counts: ClassCounts) -> Self {
        let total = counts.total();
        let seed = config.seed;
        Self {
            sdc_rate: if total == 0 {
                0.0
            } else {
                counts.sdc_control as f64 / total as f64
            },
            wilson_ci: wilson_ci(counts.sdc_control, total),
            config,
            counts,
            total,
            seed,
        }
    }
}

/// Wilson score interval (95%, z = 1.96) for `successes / total`.
pub fn wilson_ci(successes: u64, total: u64) -> [f64; 2] {
    if total == 0 {
        return [0.0, 1.0];
    }
    let z = 1.96_f64;
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Exhaustively enumerates all placements of 1..=`bits` flips over the
/// comparison trace, for `pairs` seeded random input pairs, and aggregates
/// the outcome classes.
pub fn trace_exhaustive_campaign(
    pred: Predicate,
    params: AnParams,
    bits: u32,
    pairs: u64,
    seed: u64,
    bound: u64,
) -> Result<CampaignResult, FaultSimError> {
    let mut counts = ClassCounts::default();
    for i in 0..pairs {
        let mut rng = SplitMix64::derive(seed, i);
        let x = rng.next_range(params.n_max() as u64 + 1) as u32;
        let y = rng.next_range(params.n_max() as u64 + 1) as u32;
        let case = TraceCase::new(pred, x, y, params);
        counts = counts.merge(spread_fault_enumeration(&case, bits, bound)?);
    }
    Ok(CampaignResult::assemble(
        CampaignConfig {
            target: format!("trace:{pred}"),
            mode: "exhaustive".into(),
            bits,
            samples: 0,
            pairs,
            seed,
        },
        counts,
    ))
}

/// Monte-Carlo campaign over the comparison trace: every sample draws a
/// fresh input pair and exactly `bits` distinct flip positions.
pub fn trace_monte_carlo(
    pred: Predicate,
    params: AnParams,
    bits: u32,
    samples: u64,
    seed: u64,
) -> CampaignResult {
    let positions = pred.family().trace_width() * 32;
    let counts = (0..samples)
        .into_par_iter()
        .fold(ClassCounts::default, |mut acc, i| {
            let mut rng = SplitMix64::derive(seed, i);
            let x = rng.next_range(params.n_max() as u64 + 1) as u32;
            let y = rng.next_range(params.n_max() as u64 + 1) as u32;
            let case = TraceCase::new(pred, x, y, params);
            let picks = rng.distinct(positions as u64, bits as usize);
            let picks: Vec<usize> = picks.into_iter().map(|p| p as usize).collect();
            acc.bump(case.classify_spread(&picks));
            acc
        })
        .reduce(ClassCounts::default, ClassCounts::merge);
    CampaignResult::assemble(
        CampaignConfig {
            target: format!("trace:{pred}"),
            mode: "mc".into(),
            bits,
            samples,
            pairs: samples,
            seed,
        },
        counts,
    )
}

/// Which fault models a program campaign samples from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelMix {
    pub reg_flip: bool,
    pub branch_force: bool,
    pub instr_skip: bool,
}

impl Default for ModelMix {
    fn default() -> Self {
        Self {
            reg_flip: true,
            branch_force: true,
            instr_skip: true,
        }
    }
}

/// Monte-Carlo campaign over whole-program executions: each sample draws
/// one fault (model, location, payload) and classifies the run against the
/// reference.
pub fn program_monte_carlo(
    ctx: &RunContext<'_>,
    models: ModelMix,
    bits: u32,
    samples: u64,
    seed: u64,
) -> Result<CampaignResult, FaultSimError> {
    let enabled: Vec<u8> = [
        (models.reg_flip, 0u8),
        (models.branch_force, 1),
        (models.instr_skip, 2),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, id)| *id)
    .collect();
    if enabled.is_empty() {
        return Err(FaultSimError::BadPlan("no fault models enabled".into()));
    }
    let trace_len = ctx.reference.trace.len() as u64;
    let cbr_sites = ctx.dynamic_sites(|i| matches!(i, Instr::Cbr { .. }));
    let max_reg = ctx.prog.max_reg().unwrap_or(0) as u64;

    let counts = (0..samples)
        .into_par_iter()
        .fold(ClassCounts::default, |mut acc, i| {
            let mut rng = SplitMix64::derive(seed, i);
            let model = enabled[rng.next_range(enabled.len() as u64) as usize];
            let fault = match model {
                0 => {
                    let at = rng.next_range(trace_len);
                    let reg = Reg(rng.next_range(max_reg + 1) as u32);
                    let nbits = 1 + rng.next_range(bits.max(1) as u64) as usize;
                    let mut mask = 0u32;
                    for b in rng.distinct(32, nbits) {
                        mask |= 1 << b;
                    }
                    FaultSpec::RegFlip { at, reg, mask }
                }
                1 if !cbr_sites.is_empty() => {
                    let at = cbr_sites[rng.next_range(cbr_sites.len() as u64) as usize];
                    FaultSpec::BranchForce {
                        at,
                        taken_true: rng.next_u64() & 1 == 1,
                    }
                }
                _ => FaultSpec::InstrSkip {
                    at: rng.next_range(trace_len),
                },
            };
            let (class, _) = ctx
                .inject(&FaultPlan::single(fault))
                .expect("sampled plans are in range");
            acc.bump(class);
            acc
        })
        .reduce(ClassCounts::default, ClassCounts::merge);

    Ok(CampaignResult::assemble(
        CampaignConfig {
            target: format!("program:{}", ctx.func),
            mode: "mc".into(),
            bits,
            samples,
            pairs: 0,
            seed,
        },
        counts,
    ))
}
