//! Building regression models from isolated and co-run profiles, either
//! generated by the simulator or read from traces.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{Trace, TraceRow};
use crate::model::{build_training_pairs, fit, FitOptions, ModelError, TrainingPair};
use crate::policy::SynpaVariant;
use crate::sim::{measure, AppGroundTruth, GroundTruthModel, ModelSet, SimConfig};
use crate::stack::{AppId, CounterSample, StackError, StackPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training needs at least two applications outside the holdout set, got {0}")]
    TooFewApps(usize),
    #[error("subset fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("no isolated profile for application {0}")]
    MissingProfile(AppId),
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error("{variant}: {source}")]
    Fit { variant: &'static str, source: ModelError },
    #[error("co-run trace: {0}")]
    BadCoRun(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Length of each isolated profile, in quanta.
    pub isolated_quanta: u64,
    /// Length of each co-run, in quanta.
    pub corun_quanta: u64,
    /// Fraction of the aligned co-run quanta used for fitting.
    pub subset_fraction: f64,
    pub fit: FitOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            isolated_quanta: 120,
            corun_quanta: 60,
            subset_fraction: 0.25,
            fit: FitOptions::default(),
        }
    }
}

/// Two applications sharing a core from their start.
#[derive(Debug, Clone, PartialEq)]
pub struct CoRun {
    pub a: AppId,
    pub b: AppId,
    pub samples_a: Vec<CounterSample>,
    pub samples_b: Vec<CounterSample>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Profiles {
    pub isolated: BTreeMap<AppId, Vec<CounterSample>>,
    pub coruns: Vec<CoRun>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counters of `app` running alone for `quanta` quanta.
pub fn isolated_profile(
    app: &AppGroundTruth,
    gt: &GroundTruthModel,
    config: &SimConfig,
    quanta: u64,
    rng: &mut dyn rand::RngCore,
) -> Vec<CounterSample> {
    let mut progress = 0.0;
    (0..quanta)
        .map(|q| {
            let ph = app.phase_at(progress);
            let committed = ph.st_ipc * config.quantum_cycles;
            progress += committed;
            measure(app.id, q, &ph.st_stack, committed, gt, config, rng)
        })
        .collect()
}

/// Counters of `a` and `b` sharing a core for `quanta` quanta.
pub fn corun_profile(
    a: &AppGroundTruth,
    b: &AppGroundTruth,
    gt: &GroundTruthModel,
    config: &SimConfig,
    quanta: u64,
    rng: &mut dyn rand::RngCore,
) -> CoRun {
    let (mut pa, mut pb) = (0.0, 0.0);
    let mut run = CoRun {
        a: a.id,
        b: b.id,
        samples_a: Vec::with_capacity(quanta as usize),
        samples_b: Vec::with_capacity(quanta as usize),
    };
    for q in 0..quanta {
        let (fa, fb) = (*a.phase_at(pa), *b.phase_at(pb));
        for (id, own, other, progress, out) in [
            (a.id, &fa, &fb, &mut pa, &mut run.samples_a),
            (b.id, &fb, &fa, &mut pb, &mut run.samples_b),
        ] {
            let smt = gt.corun_stack(&own.st_stack, &other.st_stack, Some(&mut *rng));
            let committed = own.st_ipc * config.quantum_cycles * (smt.dispatch / own.st_stack.dispatch);
            *progress += committed;
            out.push(measure(id, q, &smt, committed, gt, config, rng));
        }
    }
    run
}

/// Isolated profiles of every application and co-runs of every unordered
/// pair. Each profile draws from its own random stream, so the result does
/// not depend on how the work is scheduled across threads.
pub fn simulate_profiles(
    apps: &[AppGroundTruth],
    gt: &GroundTruthModel,
    config: &SimConfig,
    train: &TrainConfig,
    seed: u64,
) -> Profiles {
    let isolated: BTreeMap<AppId, Vec<CounterSample>> = apps
        .par_iter()
        .enumerate()
        .map(|(k, app)| {
            let mut rng = stream_rng(seed, k as u64);
            (
                app.id,
                isolated_profile(app, gt, config, train.isolated_quanta, &mut rng),
            )
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..apps.len())
        .flat_map(|i| (i + 1..apps.len()).map(move |j| (i, j)))
        .collect();
    let offset = apps.len() as u64;
    let coruns = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let mut rng = stream_rng(seed, offset + k as u64);
            corun_profile(&apps[i], &apps[j], gt, config, train.corun_quanta, &mut rng)
        })
        .collect();
    Profiles { isolated, coruns }
}

impl Profiles {
    /// Builds profiles from an isolated trace and a co-run trace. In the
    /// co-run trace, the two applications that share a core id form a pair;
    /// each application must stay on one core throughout.
    pub fn from_traces(isolated: Trace, corun: &[TraceRow]) -> Result<Self, TrainError> {
        let mut core_of: BTreeMap<AppId, u32> = BTreeMap::new();
        let mut by_app: BTreeMap<AppId, Vec<CounterSample>> = BTreeMap::new();
        for r in corun {
            let app = r.sample.app_id;
            if let Some(&c) = core_of.get(&app) {
                if c != r.core_id {
                    return Err(TrainError::BadCoRun(format!(
                        "application {app} moves between cores {c} and {}",
                        r.core_id
                    )));
                }
            }
            core_of.insert(app, r.core_id);
            by_app.entry(app).or_default().push(r.sample);
        }
        let mut cores: BTreeMap<u32, Vec<AppId>> = BTreeMap::new();
        for (&app, &core) in &core_of {
            cores.entry(core).or_default().push(app);
        }
        let mut coruns = Vec::with_capacity(cores.len());
        for (core, apps) in cores {
            let [a, b] = apps[..] else {
                return Err(TrainError::BadCoRun(format!(
                    "core {core} holds {} applications, expected 2",
                    apps.len()
                )));
            };
            for app in [a, b] {
                if !isolated.contains_key(&app) {
                    return Err(TrainError::MissingProfile(app));
                }
            }
            let mut take = |app: AppId| {
                let mut v = by_app.remove(&app).unwrap_or_default();
                v.sort_by_key(|s| s.quantum_index);
                v
            };
            coruns.push(CoRun {
                a,
                b,
                samples_a: take(a),
                samples_b: take(b),
            });
        }
        Ok(Self { isolated, coruns })
    }
}

/// Aligned training pairs for one stack policy, restricted to co-runs whose
/// applications are both outside `holdout`.
pub fn collect_pairs(
    profiles: &Profiles,
    holdout: &BTreeSet<AppId>,
    policy: &StackPolicy,
    dispatch_width: u32,
) -> Result<(Vec<TrainingPair>, usize), TrainError> {
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for run in &profiles.coruns {
        if holdout.contains(&run.a) || holdout.contains(&run.b) {
            continue;
        }
        let st_a = profiles.isolated.get(&run.a).ok_or(TrainError::MissingProfile(run.a))?;
        let st_b = profiles.isolated.get(&run.b).ok_or(TrainError::MissingProfile(run.b))?;
        let (p, d) = build_training_pairs(st_a, st_b, &run.samples_a, &run.samples_b, policy, dispatch_width)?;
        pairs.extend(p);
        dropped += d;
    }
    Ok((pairs, dropped))
}

/// Seeded random subset holding `fraction` of `pairs` (at least one),
/// in original order.
pub fn random_subset(pairs: &[TrainingPair], fraction: f64, seed: u64) -> Vec<TrainingPair> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let k = ((pairs.len() as f64 * fraction).round() as usize).clamp(1, pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, pairs.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pairs[i]).collect()
}

/// Diagnostics of one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub variant: SynpaVariant,
    pub pairs_available: usize,
    pub pairs_used: usize,
    pub dropped_quanta: usize,
}

/// Fits one model per variant from `profiles`.
pub fn train_models(
    profiles: &Profiles,
    holdout: &BTreeSet<AppId>,
    variants: &[SynpaVariant],
    dispatch_width: u32,
    train: &TrainConfig,
    seed: u64,
) -> Result<(ModelSet, Vec<TrainReport>), TrainError> {
    if !(train.subset_fraction > 0.0 && train.subset_fraction <= 1.0) {
        return Err(TrainError::BadFraction(train.subset_fraction));
    }
    let apps: BTreeSet<AppId> = profiles
        .coruns
        .iter()
        .filter(|r| !holdout.contains(&r.a) && !holdout.contains(&r.b))
        .flat_map(|r| [r.a, r.b])
        .collect();
    if apps.len() < 2 {
        return Err(TrainError::TooFewApps(apps.len()));
    }
    let mut models = ModelSet::new();
    let mut reports = Vec::new();
    for &variant in variants {
        let policy = variant.stack_policy();
        let (all, dropped) = collect_pairs(profiles, holdout, &policy, dispatch_width)?;
        let subset = random_subset(&all, train.subset_fraction, seed);
        let mut model = fit(variant.kind(), &subset, &train.fit).map_err(|source| TrainError::Fit {
            variant: variant.name(),
            source,
        })?;
        model.training_meta.insert("variant".into(), variant.name().into());
        model.training_meta.insert("seed".into(), seed.to_string());
        model
            .training_meta
            .insert("subset_fraction".into(), train.subset_fraction.to_string());
        model
            .training_meta
            .insert("training_apps".into(), apps.len().to_string());
        reports.push(TrainReport {
            variant,
            pairs_available: all.len(),
            pairs_used: subset.len(),
            dropped_quanta: dropped,
        });
        models.insert(variant, model);
    }
    Ok((models, reports))
}
