//! Matching co-run samples to isolated samples by committed-instruction
//! progress, so that each co-run observation is paired with the isolated
//! behaviour of the same code region.

use super::fit::TrainingPair;
use crate::stack::{adjust_stack, build_raw_stack, CounterSample, StackError, StackPolicy};

/// Index of the isolated quantum whose cumulative interval
/// `(cum[k-1], cum[k]]` contains `smt_cumulative`. A count equal to a
/// boundary maps to the earlier quantum; a count past the end maps nowhere.
pub fn map_to_st_quantum(st_cumulative: &[f64], smt_cumulative: f64) -> Option<usize> {
    let idx = st_cumulative.partition_point(|&c| c < smt_cumulative);
    (idx < st_cumulative.len()).then_some(idx)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileAlignment {
    /// `(smt_index, st_index)` positions into the two profiles.
    pub mapping: Vec<(usize, usize)>,
    /// Co-run quanta that ran past the end of the isolated profile.
    pub dropped: usize,
}

fn cumulative(profile: &[CounterSample]) -> Vec<f64> {
    profile
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.inst_retired;
            Some(*acc)
        })
        .collect()
}

/// Aligns one application's co-run profile with its isolated profile. Both
/// hold per-quantum committed-instruction deltas in quantum order.
pub fn align_profiles(st_profile: &[CounterSample], smt_profile: &[CounterSample]) -> ProfileAlignment {
    let st_cum = cumulative(st_profile);
    let mut out = ProfileAlignment::default();
    for (smt_idx, smt_cum) in cumulative(smt_profile).into_iter().enumerate() {
        match map_to_st_quantum(&st_cum, smt_cum) {
            Some(st_idx) => out.mapping.push((smt_idx, st_idx)),
            None => out.dropped += 1,
        }
    }
    out
}

/// Training pairs from one co-run of applications `i` and `j`.
///
/// `smt_i[q]` and `smt_j[q]` must come from the same quantum. Each co-run
/// quantum yields one pair per application; quanta where either
/// application ran past its isolated profile are dropped and counted.
pub fn build_training_pairs(
    st_i: &[CounterSample],
    st_j: &[CounterSample],
    smt_i: &[CounterSample],
    smt_j: &[CounterSample],
    policy: &StackPolicy,
    dispatch_width: u32,
) -> Result<(Vec<TrainingPair>, usize), StackError> {
    let stack = |s: &CounterSample| build_raw_stack(s, dispatch_width).map(|r| adjust_stack(&r, policy));
    let quanta = smt_i.len().min(smt_j.len());
    let map_i = align_profiles(st_i, &smt_i[..quanta]);
    let map_j = align_profiles(st_j, &smt_j[..quanta]);
    let lookup = |a: &ProfileAlignment| {
        let mut v = vec![None; quanta];
        for &(q, k) in &a.mapping {
            v[q] = Some(k);
        }
        v
    };
    let (li, lj) = (lookup(&map_i), lookup(&map_j));

    let mut pairs = Vec::with_capacity(2 * quanta);
    let mut dropped = 0;
    for q in 0..quanta {
        let (Some(a), Some(b)) = (li[q], lj[q]) else {
            dropped += 1;
            continue;
        };
        let (sti, stj) = (stack(&st_i[a])?, stack(&st_j[b])?);
        let (smi, smj) = (stack(&smt_i[q])?, stack(&smt_j[q])?);
        pairs.push(TrainingPair {
            app_i: smt_i[q].app_id,
            app_j: smt_j[q].app_id,
            smt_quantum: smt_i[q].quantum_index,
            st_quantum_i: st_i[a].quantum_index,
            st_quantum_j: st_j[b].quantum_index,
            st_stack_i: sti,
            st_stack_j: stj,
            smt_stack_i: smi,
        });
        pairs.push(TrainingPair {
            app_i: smt_j[q].app_id,
            app_j: smt_i[q].app_id,
            smt_quantum: smt_j[q].quantum_index,
            st_quantum_i: st_j[b].quantum_index,
            st_quantum_j: st_i[a].quantum_index,
            st_stack_i: stj,
            st_stack_j: sti,
            smt_stack_i: smj,
        });
    }
    Ok((pairs, dropped))
}
