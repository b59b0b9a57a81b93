//! Run configuration: JSON file, command-line overrides and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::{load_model, FitOptions, RegressionModel};
use crate::policy::{PolicyKind, SynpaVariant};
use crate::sim::{DiscardRule, GroundTruthModel, PoolConfig, SimConfig, DEFAULT_QUANTUM_CYCLES};
use crate::stack::{AppId, StackKind, DEFAULT_DISPATCH_WIDTH};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthPreset {
    Contention,
    Thunderx2,
    Identity,
    Conserving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthConfig {
    pub preset: GroundTruthPreset,
    /// Stack kind of the `thunderx2` and `identity` presets.
    pub kind: StackKind,
    /// Model file used instead of the preset.
    pub model_path: Option<PathBuf>,
    pub noise_sigma: f64,
    pub counter_jitter: f64,
    pub stall_overlap: f64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            preset: GroundTruthPreset::Contention,
            kind: StackKind::Isc4,
            model_path: None,
            noise_sigma: 0.02,
            counter_jitter: 0.0,
            stall_overlap: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub variants: Vec<SynpaVariant>,
    /// Applications never used for fitting.
    pub holdout: Vec<AppId>,
    pub isolated_quanta: u64,
    pub corun_quanta: u64,
    pub subset_fraction: f64,
    pub prune: bool,
    pub prune_threshold: f64,
    /// Isolated and co-run traces replacing simulator-generated profiles.
    pub isolated_trace: Option<PathBuf>,
    pub corun_trace: Option<PathBuf>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            variants: SynpaVariant::ALL.to_vec(),
            holdout: Vec::new(),
            isolated_quanta: t.isolated_quanta,
            corun_quanta: t.corun_quanta,
            subset_fraction: t.subset_fraction,
            prune: t.fit.prune,
            prune_threshold: t.fit.prune_threshold,
            isolated_trace: None,
            corun_trace: None,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            isolated_quanta: self.isolated_quanta,
            corun_quanta: self.corun_quanta,
            subset_fraction: self.subset_fraction,
            fit: FitOptions {
                prune: self.prune,
                prune_threshold: self.prune_threshold,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub quantum_cycles: f64,
    pub dispatch_width: u32,
    pub max_quanta: u64,
    pub policies: Vec<PolicyKind>,
    pub baseline: PolicyKind,
    pub repetitions: u32,
    pub out_dir: PathBuf,
    pub discard: DiscardRule,
    pub ground_truth: GroundTruthConfig,
    /// Synthetic application pool, drawn with `seed`.
    pub pool: PoolConfig,
    /// Application list replacing the synthetic pool.
    pub apps_path: Option<PathBuf>,
    pub workloads: crate::io::WorkloadCounts,
    /// Workload file replacing generated workloads.
    pub workloads_path: Option<PathBuf>,
    /// Pre-trained models; variants without an entry are trained first.
    pub models: BTreeMap<SynpaVariant, PathBuf>,
    pub train: TrainSettings,
    /// Also write the counter trace of every first repetition.
    pub write_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            quantum_cycles: DEFAULT_QUANTUM_CYCLES,
            dispatch_width: DEFAULT_DISPATCH_WIDTH,
            max_quanta: SimConfig::default().max_quanta,
            policies: PolicyKind::ALL.to_vec(),
            baseline: PolicyKind::RandomBaseline,
            repetitions: 10,
            out_dir: PathBuf::from("results"),
            discard: DiscardRule::Relative(0.05),
            ground_truth: GroundTruthConfig::default(),
            pool: PoolConfig::default(),
            apps_path: None,
            workloads: crate::io::WorkloadCounts::default(),
            workloads_path: None,
            models: BTreeMap::new(),
            train: TrainSettings::default(),
            write_traces: false,
        }
    }
}

/// Command-line values that replace config-file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub policies: Option<Vec<PolicyKind>>,
    pub repetitions: Option<u32>,
}

pub fn parse_policies(list: &str) -> Result<Vec<PolicyKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<PolicyKind>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(p) = &o.policies {
            self.policies = p.clone();
        }
        if let Some(r) = o.repetitions {
            self.repetitions = r;
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            quantum_cycles: self.quantum_cycles,
            dispatch_width: self.dispatch_width,
            max_quanta: self.max_quanta,
        }
    }

    pub fn pool_config(&self) -> PoolConfig {
        PoolConfig {
            quantum_cycles: self.quantum_cycles,
            dispatch_width: self.dispatch_width,
            ..self.pool
        }
    }

    /// Checks everything that does not need a file.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.sim_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        let unique: BTreeSet<PolicyKind> = self.policies.iter().copied().collect();
        if unique.len() != self.policies.len() {
            return bad("a policy is listed twice".into());
        }
        if !unique.contains(&self.baseline) {
            return bad(format!("baseline {} must be one of the policies", self.baseline));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if let DiscardRule::Relative(w) = self.discard {
            if !(w >= 0.0) || !w.is_finite() {
                return bad(format!("discard width must be finite and non-negative, got {w}"));
            }
        }
        let gt = &self.ground_truth;
        for (name, v) in [
            ("noise_sigma", gt.noise_sigma),
            ("counter_jitter", gt.counter_jitter),
            ("stall_overlap", gt.stall_overlap),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("ground_truth.{name} must be finite and non-negative, got {v}"));
            }
        }
        if gt.stall_overlap > 1.0 {
            return bad("ground_truth.stall_overlap must not exceed 1".into());
        }
        let p = &self.pool;
        if !(p.hw_share.0 >= 0.0 && p.hw_share.0 <= p.hw_share.1 && p.hw_share.1 <= 1.0) {
            return bad("pool.hw_share must be an ordered range within [0, 1]".into());
        }
        if !(p.bad_speculation.0 >= 0.0 && p.bad_speculation.0 <= p.bad_speculation.1 && p.bad_speculation.1 < 1.0) {
            return bad("pool.bad_speculation must be an ordered range within [0, 1)".into());
        }
        if !(p.phase_jitter >= 0.0 && p.phase_jitter < 1.0) {
            return bad("pool.phase_jitter must lie in [0, 1)".into());
        }
        if p.max_phases == 0 || p.isolated_quanta == 0 {
            return bad("pool.max_phases and pool.isolated_quanta must be at least 1".into());
        }
        let t = &self.train;
        if !(t.subset_fraction > 0.0 && t.subset_fraction <= 1.0) {
            return bad(format!(
                "train.subset_fraction must lie in (0, 1], got {}",
                t.subset_fraction
            ));
        }
        if t.isolated_quanta == 0 || t.corun_quanta == 0 {
            return bad("train.isolated_quanta and train.corun_quanta must be at least 1".into());
        }
        if t.isolated_trace.is_some() != t.corun_trace.is_some() {
            return bad("train.isolated_trace and train.corun_trace must be given together".into());
        }
        if !(t.prune_threshold >= 0.0) || !t.prune_threshold.is_finite() {
            return bad("train.prune_threshold must be finite and non-negative".into());
        }
        Ok(())
    }

    /// Variants that the configured policies need.
    pub fn needed_variants(&self) -> Vec<SynpaVariant> {
        self.policies
            .iter()
            .filter_map(|p| match p {
                PolicyKind::Synpa(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    pub fn ground_truth_model(&self) -> Result<GroundTruthModel, CliError> {
        let gt = &self.ground_truth;
        let model = match &gt.model_path {
            Some(path) => load_model(path).map_err(|e| CliError::Data(e.to_string()))?,
            None => match gt.preset {
                GroundTruthPreset::Contention => GroundTruthModel::contention(),
                GroundTruthPreset::Thunderx2 => RegressionModel::thunderx2(gt.kind),
                GroundTruthPreset::Identity => RegressionModel::identity(gt.kind),
                GroundTruthPreset::Conserving => GroundTruthModel::conserving([0.02, 0.06, 0.08, 0.04], 0.6, 0.2)
                    .expect("preset coefficients conserve"),
            },
        };
        let out = GroundTruthModel::new(model)
            .with_noise(gt.noise_sigma)
            .with_counter_jitter(gt.counter_jitter)
            .with_stall_overlap(gt.stall_overlap);
        out.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(out)
    }
}
