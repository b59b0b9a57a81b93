use super::GroundTruthModel;
use crate::matching::{brute_force_matching, min_weight_perfect_matching, PairGraph, BRUTE_FORCE_MAX};
use crate::policy::{PolicyError, QuantumContext, Schedule, Scheduler, TrueState};
use crate::stack::AppId;

/// Pairing with the smallest total true slowdown, by exhaustive search when
/// the workload is small enough and the blossom algorithm otherwise.
pub fn oracle_pairs(truth: &[TrueState], gt: &GroundTruthModel) -> Result<Vec<(AppId, AppId)>, PolicyError> {
    let mut truth = truth.to_vec();
    truth.sort_by_key(|t| t.app);
    let graph = PairGraph::from_fn(truth.len(), |i, j| {
        gt.true_slowdown(&truth[i].st_stack, &truth[j].st_stack)
            + gt.true_slowdown(&truth[j].st_stack, &truth[i].st_stack)
    })?;
    let m = if truth.len() <= BRUTE_FORCE_MAX {
        brute_force_matching(&graph)?
    } else {
        min_weight_perfect_matching(&graph)?
    };
    Ok(m.pairs.iter().map(|&(i, j)| (truth[i].app, truth[j].app)).collect())
}

/// Reads the hidden ground truth. Only meaningful inside the simulator, as
/// an upper bound on what any policy can achieve quantum by quantum.
#[derive(Debug, Clone)]
pub struct Oracle {
    gt: GroundTruthModel,
}

impl Oracle {
    /// The seed is accepted for symmetry with the other policies; the
    /// oracle never draws random numbers.
    pub fn new(gt: GroundTruthModel, _seed: u64) -> Self {
        Self { gt }
    }
}

impl Scheduler for Oracle {
    fn name(&self) -> String {
        "ORACLE".into()
    }

    fn decide(&mut self, ctx: &QuantumContext<'_>) -> Result<Schedule, PolicyError> {
        if ctx.truth.len() != ctx.apps.len() {
            return Err(PolicyError::MissingTruth);
        }
        let pairs = oracle_pairs(ctx.truth, &self.gt)?;
        Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current))
    }
}
