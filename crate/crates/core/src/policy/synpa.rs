use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_pairs, split_by_samples, PolicyError, QuantumContext, Schedule, Scheduler, SynpaVariant};
use crate::matching::{min_weight_perfect_matching, EdgeWeight, PairGraph};
use crate::model::{invert_to_st, ModelError, RegressionModel, DEFAULT_SLOWDOWN_CAP};
use crate::stack::{adjust_stack, build_raw_stack, AppId, IscStack, DEFAULT_DISPATCH_WIDTH};

/// Intermediate results of one SYNPA decision, kept for inspection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynpaDecision {
    /// Estimated isolated stacks of the re-paired applications.
    pub estimates: Vec<(AppId, IscStack)>,
    /// Applications whose estimate fell back to the measured stack.
    pub fallbacks: Vec<AppId>,
    /// Predicted total weight of the chosen pairing.
    pub predicted_weight: f64,
}

/// Measures, inverts, predicts and matches.
#[derive(Debug, Clone)]
pub struct Synpa {
    variant: SynpaVariant,
    model: RegressionModel,
    dispatch_width: u32,
    edge_weight: EdgeWeight,
    slowdown_cap: f64,
    seed: u64,
    last: SynpaDecision,
}

impl Synpa {
    /// `seed` drives the random pairing used before any counters exist.
    pub fn new(variant: SynpaVariant, model: RegressionModel, seed: u64) -> Result<Self, PolicyError> {
        if model.kind() != variant.kind() {
            return Err(ModelError::KindMismatch {
                expected: variant.kind(),
                found: model.kind(),
            }
            .into());
        }
        Ok(Self {
            variant,
            model,
            dispatch_width: DEFAULT_DISPATCH_WIDTH,
            edge_weight: EdgeWeight::Sum,
            slowdown_cap: DEFAULT_SLOWDOWN_CAP,
            seed,
            last: SynpaDecision::default(),
        })
    }

    pub fn with_dispatch_width(mut self, width: u32) -> Self {
        self.dispatch_width = width;
        self
    }

    pub fn with_edge_weight(mut self, edge_weight: EdgeWeight) -> Self {
        self.edge_weight = edge_weight;
        self
    }

    pub fn with_slowdown_cap(mut self, cap: f64) -> Self {
        self.slowdown_cap = cap;
        self
    }

    pub fn variant(&self) -> SynpaVariant {
        self.variant
    }

    pub fn model(&self) -> &RegressionModel {
        &self.model
    }

    pub fn last_decision(&self) -> &SynpaDecision {
        &self.last
    }

    fn measured_stack(&self, ctx: &QuantumContext<'_>, app: AppId) -> Option<IscStack> {
        let sample = ctx.observation(app)?;
        let raw = build_raw_stack(sample, self.dispatch_width).ok()?;
        Some(adjust_stack(&raw, &self.variant.stack_policy()))
    }
}

impl Scheduler for Synpa {
    fn name(&self) -> String {
        self.variant.name().into()
    }

    fn decide(&mut self, ctx: &QuantumContext<'_>) -> Result<Schedule, PolicyError> {
        ctx.check()?;
        self.last = SynpaDecision::default();
        let Some(current) = ctx.current.filter(|_| !ctx.observations.is_empty()) else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let pairs = random_pairs(ctx.apps, &mut rng);
            return Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current));
        };

        let (mut pairs, free) = split_by_samples(ctx, |a| self.measured_stack(ctx, a).is_some());

        // recover isolated stacks pair by pair, as measured under `current`
        let mut estimates: Vec<(AppId, IscStack)> = Vec::with_capacity(free.len());
        for &app in &free {
            let partner = current.partner(app).filter(|p| free.contains(p));
            let Some(p) = partner else {
                // not co-running last quantum; its measurement is the best guess
                let st = self.measured_stack(ctx, app).expect("free apps have samples");
                estimates.push((app, st));
                continue;
            };
            if app > p {
                continue;
            }
            let (mi, mj) = (
                self.measured_stack(ctx, app).expect("free apps have samples"),
                self.measured_stack(ctx, p).expect("free apps have samples"),
            );
            let est = invert_to_st(&self.model, &mi, &mj)?;
            if est.fallback {
                self.last.fallbacks.extend([app, p]);
            }
            estimates.push((app, est.st_i));
            estimates.push((p, est.st_j));
        }
        estimates.sort_by_key(|e| e.0);

        if !estimates.is_empty() {
            let mut err = None;
            let graph = PairGraph::from_fn(estimates.len(), |i, j| {
                match self
                    .model
                    .predict_pair_capped(&estimates[i].1, &estimates[j].1, self.slowdown_cap)
                {
                    Ok(p) => self.edge_weight.combine(p.slowdown_i, p.slowdown_j),
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e.into());
            }
            let matching = min_weight_perfect_matching(&graph)?;
            self.last.predicted_weight = matching.total_weight;
            pairs.extend(matching.pairs.iter().map(|&(i, j)| (estimates[i].0, estimates[j].0)));
        }
        self.last.estimates = estimates;
        Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current))
    }

    fn inverse_fallbacks(&self) -> u64 {
        self.last.fallbacks.len() as u64
    }
}
