use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PolicyError, QuantumContext, Schedule, Scheduler};
use crate::stack::AppId;

/// Uniformly random perfect matching: shuffle, then pair neighbours.
pub fn random_pairs(apps: &[AppId], rng: &mut impl Rng) -> Vec<(AppId, AppId)> {
    let mut order = apps.to_vec();
    order.shuffle(rng);
    order.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Re-draws a random pairing every quantum. Stands in for an
/// interference-oblivious OS scheduler.
#[derive(Debug, Clone)]
pub struct RandomBaseline {
    rng: ChaCha8Rng,
}

impl RandomBaseline {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomBaseline {
    fn name(&self) -> String {
        "RANDOM_BASELINE".into()
    }

    fn decide(&mut self, ctx: &QuantumContext<'_>) -> Result<Schedule, PolicyError> {
        ctx.check()?;
        let pairs = random_pairs(ctx.apps, &mut self.rng);
        Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ctx<'a>(apps: &'a [AppId], q: u64, current: Option<&'a Schedule>) -> QuantumContext<'a> {
        QuantumContext {
            quantum_index: q,
            apps,
            observations: &[],
            current,
            truth: &[],
        }
    }

    fn run(seed: u64, apps: &[AppId], quanta: u64) -> Vec<Schedule> {
        let mut p = RandomBaseline::new(seed);
        let mut out: Vec<Schedule> = Vec::new();
        for q in 0..quanta {
            let s = p.decide(&ctx(apps, q, out.last())).unwrap();
            out.push(s);
        }
        out
    }

    #[test]
    fn reproducible_under_seed() {
        let apps: Vec<AppId> = (0..8).map(AppId).collect();
        assert_eq!(run(7, &apps, 50), run(7, &apps, 50));
        assert_ne!(run(7, &apps, 50), run(8, &apps, 50));
    }

    #[test]
    fn two_apps_single_pair() {
        let apps = [AppId(3), AppId(9)];
        for s in run(1, &apps, 5) {
            assert_eq!(s.pairs(), vec![(AppId(3), AppId(9))]);
        }
    }

    #[test]
    fn odd_count_rejected() {
        let apps = [AppId(0), AppId(1), AppId(2)];
        let err = RandomBaseline::new(0).decide(&ctx(&apps, 0, None)).unwrap_err();
        assert_eq!(err, PolicyError::OddAppCount(3));
    }

    #[test]
    fn pairings_are_uniform() {
        let apps: Vec<AppId> = (0..4).map(AppId).collect();
        let quanta = 10_000;
        let mut counts: BTreeMap<Vec<(AppId, AppId)>, u32> = BTreeMap::new();
        for s in run(2024, &apps, quanta) {
            assert!(s.is_perfect_for(&apps));
            *counts.entry(s.pairs()).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let expected = quanta as f64 / 3.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 2 degrees of freedom, 99.9th percentile
        assert!(chi2 < 13.82, "chi2 = {chi2}");
        for &c in counts.values() {
            assert!((c as f64 / quanta as f64 - 1.0 / 3.0).abs() <= 0.02);
        }
    }
}
