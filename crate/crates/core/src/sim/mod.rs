//! Quantum-driven simulation of a multi-core processor with two hardware
//! threads per core.
//!
//! A hidden ground-truth model decides how co-running applications slow each
//! other down. The simulator turns the resulting co-run stacks into counter
//! samples, which are all a policy gets to see.

mod metrics;
mod oracle;
mod pool;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{slowdown, RegressionModel, DEFAULT_SLOWDOWN_CAP};
use crate::policy::{
    HySched, PolicyError, PolicyKind, QuantumContext, RandomBaseline, Schedule, Scheduler, Synpa, SynpaVariant,
    TrueState,
};
use crate::stack::{
    build_raw_stack, classify_app, AppClass, AppId, Category, CategoryValues, CounterSample, IscStack, StackKind,
    DEFAULT_DISPATCH_WIDTH,
};

pub use metrics::{
    ccdf, ccdf_thresholds, compute_metrics, discard_mask, summarize_repetitions, DiscardRule, MetricsError,
    PolicyMetrics, RepetitionSummary,
};
pub use oracle::{oracle_pairs, Oracle};
pub use pool::{synthetic_pool, PoolConfig};

pub const DEFAULT_QUANTUM_CYCLES: f64 = 2.0e8;
/// Isolated run length, in quanta, that defines each application's target.
pub const DEFAULT_ISOLATED_QUANTA: u64 = 600;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("workload needs an even, non-zero number of applications, got {0}")]
    OddWorkload(usize),
    #[error("application {0} appears more than once in the workload")]
    DuplicateApp(AppId),
    #[error("application {app}: {reason}")]
    InvalidApp { app: AppId, reason: String },
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("policy returned a schedule that does not cover every application once in quantum {0}")]
    InvalidSchedule(u64),
    #[error("workload did not finish within {0} quanta")]
    QuantumCap(u64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// A stretch of execution with stable isolated behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppPhase {
    /// Isolated four-category stack.
    pub st_stack: IscStack,
    /// Isolated committed instructions per cycle.
    pub st_ipc: f64,
    /// Committed instructions until the next phase.
    pub duration: f64,
}

/// Hidden isolated behaviour of one application. Phases repeat cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppGroundTruth {
    pub id: AppId,
    pub name: String,
    pub phases: Vec<AppPhase>,
    /// Committed instructions an instance must reach to complete.
    pub target_instructions: f64,
}

impl AppGroundTruth {
    /// Sets the target to what the application commits when running alone
    /// for `isolated_quanta` quanta.
    pub fn with_isolated_target(
        id: AppId,
        name: impl Into<String>,
        phases: Vec<AppPhase>,
        isolated_quanta: u64,
        quantum_cycles: f64,
    ) -> Self {
        let mut app = Self {
            id,
            name: name.into(),
            phases,
            target_instructions: 0.0,
        };
        let mut progress = 0.0;
        for _ in 0..isolated_quanta {
            progress += app.phase_at(progress).st_ipc * quantum_cycles;
        }
        app.target_instructions = progress;
        app
    }

    /// Phase in effect after `progress` committed instructions.
    pub fn phase_at(&self, progress: f64) -> &AppPhase {
        let cycle: f64 = self.phases.iter().map(|p| p.duration).sum();
        let mut r = if cycle > 0.0 { progress.rem_euclid(cycle) } else { 0.0 };
        for p in &self.phases {
            if r < p.duration {
                return p;
            }
            r -= p.duration;
        }
        self.phases.last().expect("validated apps have phases")
    }

    /// Time-weighted average isolated stack over one pass of the phases.
    pub fn mean_stack(&self) -> IscStack {
        let mut acc = CategoryValues::default();
        let mut total = 0.0;
        for p in &self.phases {
            let t = p.duration / p.st_ipc;
            for c in Category::ALL {
                acc.set(c, acc.get(c) + t * p.st_stack.get(c));
            }
            total += t;
        }
        if total > 0.0 {
            for c in Category::ALL {
                acc.set(c, acc.get(c) / total);
            }
        }
        IscStack::normalized(StackKind::Isc4, &acc).unwrap_or(self.phases[0].st_stack)
    }

    /// Class of the averaged isolated stack, seen with three categories.
    pub fn class(&self) -> AppClass {
        classify_app(&self.mean_stack().to_isc3())
    }

    pub fn validate(&self, dispatch_width: u32) -> Result<(), SimError> {
        let bad = |reason: String| SimError::InvalidApp { app: self.id, reason };
        if self.phases.is_empty() {
            return Err(bad("no phases".into()));
        }
        for (k, p) in self.phases.iter().enumerate() {
            if p.st_stack.kind != StackKind::Isc4 || !p.st_stack.is_valid(1e-9) {
                return Err(bad(format!("phase {k} stack is not a valid four-category stack")));
            }
            if !(p.st_stack.dispatch > 0.0) {
                return Err(bad(format!("phase {k} never dispatches")));
            }
            if !(p.st_ipc > 0.0) || !p.st_ipc.is_finite() {
                return Err(bad(format!("phase {k} IPC must be positive")));
            }
            if p.st_ipc > f64::from(dispatch_width) * p.st_stack.dispatch * (1.0 + 1e-9) {
                return Err(bad(format!("phase {k} commits more than it dispatches")));
            }
            if !(p.duration > 0.0) || !p.duration.is_finite() {
                return Err(bad(format!("phase {k} duration must be positive")));
            }
        }
        if !(self.target_instructions > 0.0) || !self.target_instructions.is_finite() {
            return Err(bad("target must be positive".into()));
        }
        Ok(())
    }
}

/// How co-running applications really interfere: the bilinear form with
/// its own coefficients, then noise, then normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub model: RegressionModel,
    /// Standard deviation of the additive Gaussian noise per category.
    pub noise_sigma: CategoryValues,
    /// Relative standard deviation of multiplicative jitter on the stall
    /// and instruction counters. Affects measurements only.
    pub counter_jitter: f64,
    /// Fraction of the smaller stall count that is also reported by the
    /// other stall counter, pushing measured stacks above 100%.
    pub stall_overlap: f64,
}

impl GroundTruthModel {
    pub fn new(model: RegressionModel) -> Self {
        Self {
            model,
            noise_sigma: CategoryValues::default(),
            counter_jitter: 0.0,
            stall_overlap: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = CategoryValues([sigma; 4]);
        self
    }

    pub fn with_counter_jitter(mut self, jitter: f64) -> Self {
        self.counter_jitter = jitter;
        self
    }

    pub fn with_stall_overlap(mut self, overlap: f64) -> Self {
        self.stall_overlap = overlap;
        self
    }

    /// A model whose co-run predictions always sum to 1, so that
    /// normalization never alters them: per category `alpha_c + beta x +
    /// gamma y`, with `sum(alpha) + beta + gamma = 1`.
    pub fn conserving(alpha: [f64; 4], beta: f64, gamma: f64) -> Result<RegressionModel, SimError> {
        let total: f64 = alpha.iter().sum::<f64>() + beta + gamma;
        if (total - 1.0).abs() > 1e-12 || alpha.iter().any(|&a| a < 0.0) || beta < 0.0 || gamma < 0.0 {
            return Err(SimError::InvalidGroundTruth(
                "conserving model needs non-negative terms with alpha sum + beta + gamma = 1".into(),
            ));
        }
        let cats = Category::ALL
            .iter()
            .map(|&c| crate::model::CategoryModel::new(c, alpha[c.index()], beta, gamma, 0.0))
            .collect();
        RegressionModel::new(StackKind::Isc4, cats).map_err(|e| SimError::InvalidGroundTruth(e.to_string()))
    }

    /// A four-category contention model whose predictions sum to roughly
    /// one. A partner with a high dispatch rate lowers the own dispatch
    /// rate, backend stalls grow with the partner's backend stalls, and
    /// horizontal waste responds to neither.
    pub fn contention() -> RegressionModel {
        let rows = [
            (Category::Dispatch, 0.02, 0.7, -0.15, 0.2),
            (Category::Frontend, 0.02, 1.0, 0.15, 0.0),
            (Category::Backend, 0.0, 1.0, 0.5, 0.0),
            (Category::HorizontalWaste, 0.08, 0.5, 0.0, 0.0),
        ];
        let cats = rows
            .iter()
            .map(|&(c, a, b, g, r)| crate::model::CategoryModel::new(c, a, b, g, r))
            .collect();
        let mut model = RegressionModel::new(StackKind::Isc4, cats).expect("contention coefficients are well formed");
        model
            .training_meta
            .insert("source".into(), "synthetic contention ground truth".into());
        model
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: &str| Err(SimError::InvalidGroundTruth(s.into()));
        if self.noise_sigma.0.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        if !(self.counter_jitter >= 0.0) || !self.counter_jitter.is_finite() {
            return bad("counter jitter must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.stall_overlap) {
            return bad("stall overlap must lie in [0, 1]");
        }
        Ok(())
    }

    fn view(&self, s: &IscStack) -> IscStack {
        match self.model.kind() {
            StackKind::Isc3 => s.to_isc3(),
            StackKind::Isc4 => *s,
        }
    }

    /// Co-run stack of `own` next to `other`, noisy when `rng` is given.
    pub fn corun_stack(&self, own: &IscStack, other: &IscStack, rng: Option<&mut dyn rand::RngCore>) -> IscStack {
        let kind = self.model.kind();
        let (o, p) = (self.view(own), self.view(other));
        let mut v = self.model.predict_values(&o.values(), &p.values());
        if let Some(rng) = rng {
            for &c in kind.categories() {
                let z: f64 = rng.sample(StandardNormal);
                v.set(c, (v.get(c) + self.noise_sigma.get(c) * z).max(0.0));
            }
        }
        IscStack::normalized(kind, &v).unwrap_or(o)
    }

    /// Noise-free slowdown of `own` when sharing a core with `other`.
    pub fn true_slowdown(&self, own: &IscStack, other: &IscStack) -> f64 {
        let smt = self.corun_stack(own, other, None);
        slowdown(own.dispatch, smt.dispatch, DEFAULT_SLOWDOWN_CAP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub quantum_cycles: f64,
    pub dispatch_width: u32,
    /// Runs exceeding this many quanta fail.
    pub max_quanta: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            quantum_cycles: DEFAULT_QUANTUM_CYCLES,
            dispatch_width: DEFAULT_DISPATCH_WIDTH,
            max_quanta: 100_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.quantum_cycles > 0.0) || !self.quantum_cycles.is_finite() {
            return Err(SimError::InvalidConfig("quantum_cycles must be positive".into()));
        }
        if self.dispatch_width == 0 {
            return Err(SimError::InvalidConfig("dispatch_width must be at least 1".into()));
        }
        if self.max_quanta == 0 {
            return Err(SimError::InvalidConfig("max_quanta must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counters reported for an application that ran with stack `stack` and
/// committed `committed` instructions during one quantum.
pub(crate) fn measure(
    app: AppId,
    quantum_index: u64,
    stack: &IscStack,
    committed: f64,
    gt: &GroundTruthModel,
    config: &SimConfig,
    rng: &mut dyn rand::RngCore,
) -> CounterSample {
    let q = config.quantum_cycles;
    let overlap = gt.stall_overlap * stack.frontend.min(stack.backend) * q;
    let mut counts = [
        stack.frontend * q + overlap,
        stack.backend * q + overlap,
        committed,
        stack.dispatch * f64::from(config.dispatch_width) * q,
    ];
    for c in counts.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *c *= (1.0 + gt.counter_jitter * z).max(0.0);
    }
    CounterSample {
        app_id: app,
        quantum_index,
        cpu_cycles: q,
        stall_frontend: counts[0],
        stall_backend: counts[1],
        inst_retired: counts[2],
        inst_spec: counts[3],
    }
}

/// What one application did during one quantum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumOutcome {
    /// Counters as a policy sees them.
    pub sample: CounterSample,
    /// Committed instructions, free of measurement jitter.
    pub committed: f64,
    /// True co-run stack.
    pub smt_stack: IscStack,
}

/// Runs every pair of `schedule` for one quantum. `truth` gives the
/// isolated behaviour of each scheduled application; the result follows
/// the order of the schedule's cores, `a` before `b`.
pub fn simulate_quantum(
    schedule: &Schedule,
    truth: &[TrueState],
    gt: &GroundTruthModel,
    config: &SimConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<Vec<QuantumOutcome>, SimError> {
    let find = |app: AppId| {
        truth
            .iter()
            .find(|t| t.app == app)
            .ok_or(SimError::InvalidSchedule(schedule.quantum_index))
    };
    let q = config.quantum_cycles;
    let mut out = Vec::with_capacity(2 * schedule.assignments.len());
    for asg in &schedule.assignments {
        let (ta, tb) = (find(asg.a)?, find(asg.b)?);
        for (own, other) in [(ta, tb), (tb, ta)] {
            let smt = gt.corun_stack(&own.st_stack, &other.st_stack, Some(&mut *rng));
            let committed = own.st_ipc * q * (smt.dispatch / own.st_stack.dispatch);
            out.push(QuantumOutcome {
                sample: measure(own.app, schedule.quantum_index, &smt, committed, gt, config, rng),
                committed,
                smt_stack: smt,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: String,
    pub seed: u64,
    /// Completion time, in quanta, of each application's first instance.
    pub completion_quanta: BTreeMap<AppId, f64>,
    /// Instances started per application, relaunches included.
    pub instances: BTreeMap<AppId, u32>,
    /// Per quantum, the samples of every application in id order.
    pub samples: Vec<Vec<CounterSample>>,
    pub schedules: Vec<Schedule>,
    /// Completion of the slowest original instance.
    pub turnaround_quanta: f64,
    /// Geometric mean over applications of committed instructions per
    /// cycle across the whole run.
    pub ipc_geomean: f64,
    /// Per quantum, the mean over applications of the measured fraction of
    /// cycles not covered by dispatch and stalls.
    pub horizontal_waste: Vec<f64>,
    /// Inverse-model fallbacks reported by the policy, if any.
    pub inverse_fallbacks: u64,
}

fn check_workload(apps: &[AppGroundTruth], config: &SimConfig) -> Result<(), SimError> {
    if apps.is_empty() || apps.len() % 2 == 1 {
        return Err(SimError::OddWorkload(apps.len()));
    }
    let mut ids: Vec<AppId> = apps.iter().map(|a| a.id).collect();
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(SimError::DuplicateApp(w[0]));
        }
    }
    for a in apps {
        a.validate(config.dispatch_width)?;
    }
    Ok(())
}

/// Runs a workload until every application has completed its first
/// instance. Applications that finish early are relaunched so the number of
/// running threads stays constant.
pub fn run_workload(
    apps: &[AppGroundTruth],
    scheduler: &mut dyn Scheduler,
    gt: &GroundTruthModel,
    config: &SimConfig,
    seed: u64,
) -> Result<RunResult, SimError> {
    config.validate()?;
    gt.validate()?;
    check_workload(apps, config)?;
    let mut apps: Vec<&AppGroundTruth> = apps.iter().collect();
    apps.sort_by_key(|a| a.id);
    let ids: Vec<AppId> = apps.iter().map(|a| a.id).collect();
    let n = apps.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut progress = vec![0.0; n];
    let mut completion: Vec<Option<f64>> = vec![None; n];
    let mut instances = vec![1u32; n];
    let mut retired = vec![0.0; n];
    let mut cycles = vec![0.0; n];
    let mut samples: Vec<Vec<CounterSample>> = Vec::new();
    let mut schedules: Vec<Schedule> = Vec::new();
    let mut hw_series = Vec::new();
    let mut fallbacks = 0u64;

    for quantum in 0..config.max_quanta {
        let truth: Vec<TrueState> = apps
            .iter()
            .zip(&progress)
            .map(|(a, &p)| {
                let ph = a.phase_at(p);
                TrueState {
                    app: a.id,
                    st_stack: ph.st_stack,
                    st_ipc: ph.st_ipc,
                }
            })
            .collect();
        let empty = Vec::new();
        let ctx = QuantumContext {
            quantum_index: quantum,
            apps: &ids,
            observations: samples.last().unwrap_or(&empty),
            current: schedules.last(),
            truth: &truth,
        };
        let schedule = scheduler.decide(&ctx)?;
        if !schedule.is_perfect_for(&ids) || schedule.quantum_index != quantum {
            return Err(SimError::InvalidSchedule(quantum));
        }
        fallbacks += scheduler.inverse_fallbacks();

        let outcomes = simulate_quantum(&schedule, &truth, gt, config, &mut rng)?;
        let mut by_app: Vec<Option<QuantumOutcome>> = vec![None; n];
        for o in outcomes {
            let k = ids
                .binary_search(&o.sample.app_id)
                .expect("scheduled apps belong to the workload");
            by_app[k] = Some(o);
        }
        let mut hw = 0.0;
        let mut quantum_samples = Vec::with_capacity(n);
        for k in 0..n {
            let o = by_app[k].expect("perfect schedule covers every app");
            retired[k] += o.committed;
            cycles[k] += o.sample.cpu_cycles;
            let target = apps[k].target_instructions;
            let before = progress[k];
            if before + o.committed >= target * (1.0 - 1e-12) {
                if completion[k].is_none() {
                    let frac = if o.committed > 0.0 {
                        ((target - before) / o.committed).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    completion[k] = Some(quantum as f64 + frac);
                }
                progress[k] = 0.0;
                instances[k] += 1;
            } else {
                progress[k] = before + o.committed;
            }
            if let Ok(raw) = build_raw_stack(&o.sample, config.dispatch_width) {
                hw += (1.0 - raw.sum()).max(0.0);
            }
            quantum_samples.push(o.sample);
        }
        hw_series.push(hw / n as f64);
        samples.push(quantum_samples);
        schedules.push(schedule);

        if completion.iter().all(Option::is_some) {
            let completion_quanta: BTreeMap<AppId, f64> =
                ids.iter().zip(&completion).map(|(&id, c)| (id, c.unwrap())).collect();
            let turnaround = completion_quanta.values().copied().fold(0.0, f64::max);
            let log_ipc: f64 = retired.iter().zip(&cycles).map(|(r, c)| (r / c).ln()).sum::<f64>() / n as f64;
            return Ok(RunResult {
                policy: scheduler.name(),
                seed,
                completion_quanta,
                instances: ids.iter().copied().zip(instances).collect(),
                samples,
                schedules,
                turnaround_quanta: turnaround,
                ipc_geomean: log_ipc.exp(),
                horizontal_waste: hw_series,
                inverse_fallbacks: fallbacks,
            });
        }
    }
    Err(SimError::QuantumCap(config.max_quanta))
}

/// Regression models for the SYNPA members, keyed by variant.
pub type ModelSet = BTreeMap<SynpaVariant, RegressionModel>;

/// Instantiates a policy for one run. SYNPA members need their model in
/// `models`; the oracle needs the ground truth.
pub fn build_scheduler(
    kind: PolicyKind,
    models: &ModelSet,
    gt: &GroundTruthModel,
    config: &SimConfig,
    seed: u64,
) -> Result<Box<dyn Scheduler + Send>, SimError> {
    Ok(match kind {
        PolicyKind::Synpa(v) => {
            let model = models
                .get(&v)
                .cloned()
                .ok_or_else(|| SimError::InvalidConfig(format!("no regression model available for {}", v.name())))?;
            Box::new(Synpa::new(v, model, seed)?.with_dispatch_width(config.dispatch_width))
        }
        PolicyKind::HySched => Box::new(HySched::new(config.dispatch_width, seed)),
        PolicyKind::RandomBaseline => Box::new(RandomBaseline::new(seed)),
        PolicyKind::Oracle => Box::new(Oracle::new(gt.clone(), seed)),
    })
}

#[cfg(test)]
mod tests;
