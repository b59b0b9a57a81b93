use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_pairs, split_by_samples, PolicyError, QuantumContext, Schedule, Scheduler};
use crate::stack::{AppId, CounterSample};

/// Top-down breakdown used by the Hy-Sched heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HySchedCategories {
    pub retiring: f64,
    pub bad_speculation: f64,
    pub frontend: f64,
    pub backend: f64,
}

impl HySchedCategories {
    /// `None` for samples without cycles.
    pub fn from_sample(s: &CounterSample, dispatch_width: u32) -> Option<Self> {
        if !(s.cpu_cycles > 0.0) || dispatch_width == 0 {
            return None;
        }
        let slots = f64::from(dispatch_width) * s.cpu_cycles;
        Some(Self {
            retiring: s.inst_retired.max(0.0) / slots,
            bad_speculation: (s.inst_spec - s.inst_retired).max(0.0) / slots,
            frontend: s.stall_frontend.max(0.0) / s.cpu_cycles,
            backend: s.stall_backend.max(0.0) / s.cpu_cycles,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HySchedCategory {
    Retiring,
    BadSpeculation,
    Frontend,
    Backend,
}

/// Largest category; exact ties go to the earlier one in declaration order.
pub fn dominant_category(c: &HySchedCategories) -> HySchedCategory {
    let entries = [
        (HySchedCategory::Retiring, c.retiring),
        (HySchedCategory::BadSpeculation, c.bad_speculation),
        (HySchedCategory::Frontend, c.frontend),
        (HySchedCategory::Backend, c.backend),
    ];
    let mut best = entries[0];
    for e in &entries[1..] {
        if e.1 > best.1 {
            best = *e;
        }
    }
    best.0
}

/// Pairs applications of different dominant categories while possible.
///
/// Each step takes the lowest-id application of the most populated category
/// and pairs it with the lowest-id application of the next most populated
/// one (ties by category order). Whatever remains belongs to a single
/// category and is paired by IPC balancing: highest IPC with lowest, and so
/// on inwards.
pub fn hysched_pairs(apps: &[(AppId, HySchedCategory, f64)]) -> Vec<(AppId, AppId)> {
    let mut groups: BTreeMap<HySchedCategory, Vec<(AppId, f64)>> = BTreeMap::new();
    for &(id, cat, ipc) in apps {
        groups.entry(cat).or_default().push((id, ipc));
    }
    for g in groups.values_mut() {
        g.sort_by_key(|a| a.0);
        g.reverse();
    }
    let mut pairs = Vec::with_capacity(apps.len() / 2);
    loop {
        let mut order: Vec<(usize, HySchedCategory)> = groups
            .iter()
            .filter(|(_, g)| !g.is_empty())
            .map(|(&c, g)| (g.len(), c))
            .collect();
        if order.len() < 2 {
            break;
        }
        order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let a = groups.get_mut(&order[0].1).and_then(Vec::pop).expect("non-empty group");
        let b = groups.get_mut(&order[1].1).and_then(Vec::pop).expect("non-empty group");
        pairs.push((a.0, b.0));
    }
    let mut rest: Vec<(AppId, f64)> = groups.into_values().flatten().collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = rest.len();
    for k in 0..n / 2 {
        pairs.push((rest[k].0, rest[n - 1 - k].0));
    }
    pairs
}

#[derive(Debug, Clone)]
pub struct HySched {
    dispatch_width: u32,
    seed: u64,
}

impl HySched {
    /// `seed` drives the random pairing of the first quantum.
    pub fn new(dispatch_width: u32, seed: u64) -> Self {
        Self { dispatch_width, seed }
    }
}

impl Scheduler for HySched {
    fn name(&self) -> String {
        "HY_SCHED".into()
    }

    fn decide(&mut self, ctx: &QuantumContext<'_>) -> Result<Schedule, PolicyError> {
        ctx.check()?;
        if ctx.current.is_none() || ctx.observations.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let pairs = random_pairs(ctx.apps, &mut rng);
            return Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current));
        }
        let info = |app: AppId| {
            ctx.observation(app).and_then(|s| {
                HySchedCategories::from_sample(s, self.dispatch_width).map(|c| (dominant_category(&c), s.ipc()))
            })
        };
        let (mut pairs, free) = split_by_samples(ctx, |a| info(a).is_some());
        let entries: Vec<_> = free
            .iter()
            .map(|&a| {
                let (cat, ipc) = info(a).unwrap_or((HySchedCategory::Retiring, 0.0));
                (a, cat, ipc)
            })
            .collect();
        pairs.extend(hysched_pairs(&entries));
        Ok(Schedule::from_pairs(ctx.quantum_index, &pairs, ctx.current))
    }
}
