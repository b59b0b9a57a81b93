//! Thread-to-core allocation policies. Each policy turns the counters
//! observed during one quantum into the pairing used for the next.

mod baseline;
mod hysched;
mod synpa;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::MatchingError;
use crate::model::ModelError;
use crate::stack::{AppId, CounterSample, Gt100Method, IscStack, Lt100Method, StackKind, StackPolicy};

pub use baseline::{random_pairs, RandomBaseline};
pub use hysched::{dominant_category, hysched_pairs, HySched, HySchedCategories, HySchedCategory};
pub use synpa::{Synpa, SynpaDecision};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("policies need an even number of running applications, got {0}")]
    OddAppCount(usize),
    #[error("application {0} appears more than once")]
    DuplicateApp(AppId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("policy needs ground truth, which is not available")]
    MissingTruth,
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
}

/// One core running two applications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub core: u32,
    pub a: AppId,
    pub b: AppId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub quantum_index: u64,
    /// Sorted by core.
    pub assignments: Vec<Assignment>,
}

impl Schedule {
    /// Places `pairs` on cores. A pair that already shared a core in
    /// `previous` keeps that core; the rest take the free cores in ascending
    /// order, following the sorted pair order.
    pub fn from_pairs(quantum_index: u64, pairs: &[(AppId, AppId)], previous: Option<&Schedule>) -> Self {
        let mut pairs: Vec<(AppId, AppId)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort_unstable();
        let ncores = pairs.len() as u32;
        let mut used = BTreeSet::new();
        let mut placed: Vec<Option<u32>> = vec![None; pairs.len()];
        if let Some(prev) = previous {
            for (k, &(a, b)) in pairs.iter().enumerate() {
                if let Some(asg) = prev.assignments.iter().find(|s| s.pair() == (a, b)) {
                    if asg.core < ncores && used.insert(asg.core) {
                        placed[k] = Some(asg.core);
                    }
                }
            }
        }
        let mut free = (0..ncores).filter(|c| !used.contains(c));
        let mut assignments: Vec<Assignment> = pairs
            .iter()
            .zip(placed)
            .map(|(&(a, b), core)| Assignment {
                core: core.unwrap_or_else(|| free.next().expect("one core per pair")),
                a,
                b,
            })
            .collect();
        assignments.sort_by_key(|s| s.core);
        Self {
            quantum_index,
            assignments,
        }
    }

    /// Sorted `(low, high)` pairs.
    pub fn pairs(&self) -> Vec<(AppId, AppId)> {
        let mut v: Vec<_> = self.assignments.iter().map(Assignment::pair).collect();
        v.sort_unstable();
        v
    }

    pub fn partner(&self, app: AppId) -> Option<AppId> {
        self.assignments.iter().find_map(|s| {
            if s.a == app {
                Some(s.b)
            } else if s.b == app {
                Some(s.a)
            } else {
                None
            }
        })
    }

    pub fn core_of(&self, app: AppId) -> Option<u32> {
        self.assignments
            .iter()
            .find(|s| s.a == app || s.b == app)
            .map(|s| s.core)
    }

    /// Every application of `apps` appears exactly once and nothing else
    /// is scheduled.
    pub fn is_perfect_for(&self, apps: &[AppId]) -> bool {
        let mut seen = BTreeSet::new();
        for s in &self.assignments {
            if s.a == s.b || !seen.insert(s.a) || !seen.insert(s.b) {
                return false;
            }
        }
        let expected: BTreeSet<AppId> = apps.iter().copied().collect();
        seen == expected && expected.len() == apps.len()
    }
}

impl Assignment {
    pub fn pair(&self) -> (AppId, AppId) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

/// Isolated behaviour of an application in its current phase. Only the
/// oracle policy looks at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub app: AppId,
    pub st_stack: IscStack,
    pub st_ipc: f64,
}

/// Everything a policy may look at when deciding the next quantum.
#[derive(Debug, Clone, Copy)]
pub struct QuantumContext<'a> {
    /// Index of the quantum being scheduled.
    pub quantum_index: u64,
    /// Running applications, sorted.
    pub apps: &'a [AppId],
    /// Samples from the quantum that just ended; empty before the first.
    pub observations: &'a [CounterSample],
    /// Schedule of the quantum that just ended.
    pub current: Option<&'a Schedule>,
    /// Ground truth, in `apps` order. Empty when running on traces.
    pub truth: &'a [TrueState],
}

impl QuantumContext<'_> {
    pub fn observation(&self, app: AppId) -> Option<&CounterSample> {
        self.observations.iter().find(|s| s.app_id == app)
    }

    fn check(&self) -> Result<(), PolicyError> {
        if self.apps.len() % 2 == 1 {
            return Err(PolicyError::OddAppCount(self.apps.len()));
        }
        for w in self.apps.windows(2) {
            if w[0] == w[1] {
                return Err(PolicyError::DuplicateApp(w[0]));
            }
        }
        Ok(())
    }
}

pub trait Scheduler {
    fn name(&self) -> String;

    fn decide(&mut self, ctx: &QuantumContext<'_>) -> Result<Schedule, PolicyError>;

    /// Applications whose isolated stacks could not be recovered in the
    /// latest decision.
    fn inverse_fallbacks(&self) -> u64 {
        0
    }
}

/// The SYNPA members, named by stack kind and GT100 method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SynpaVariant {
    #[serde(rename = "SYNPA3_N")]
    Synpa3N,
    #[serde(rename = "SYNPA4_N")]
    Synpa4N,
    #[serde(rename = "SYNPA4_R_FE")]
    Synpa4RFe,
    #[serde(rename = "SYNPA4_R_FEBE")]
    Synpa4RFebe,
}

impl SynpaVariant {
    pub const ALL: [SynpaVariant; 4] = [
        SynpaVariant::Synpa3N,
        SynpaVariant::Synpa4N,
        SynpaVariant::Synpa4RFe,
        SynpaVariant::Synpa4RFebe,
    ];

    pub fn stack_policy(self) -> StackPolicy {
        match self {
            SynpaVariant::Synpa3N => StackPolicy::new(Lt100Method::AssignBackend, Gt100Method::Normalize),
            SynpaVariant::Synpa4N => StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::Normalize),
            SynpaVariant::Synpa4RFe => StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::ReduceFrontend),
            SynpaVariant::Synpa4RFebe => {
                StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::ReduceFrontendBackend)
            }
        }
    }

    pub fn kind(self) -> StackKind {
        self.stack_policy().output_kind()
    }

    pub fn name(self) -> &'static str {
        match self {
            SynpaVariant::Synpa3N => "SYNPA3_N",
            SynpaVariant::Synpa4N => "SYNPA4_N",
            SynpaVariant::Synpa4RFe => "SYNPA4_R_FE",
            SynpaVariant::Synpa4RFebe => "SYNPA4_R_FEBE",
        }
    }
}

/// Every policy the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Synpa(SynpaVariant),
    HySched,
    RandomBaseline,
    /// Exhaustive pairing on the true, noise-free slowdowns.
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Synpa(SynpaVariant::Synpa3N),
        PolicyKind::Synpa(SynpaVariant::Synpa4N),
        PolicyKind::Synpa(SynpaVariant::Synpa4RFe),
        PolicyKind::Synpa(SynpaVariant::Synpa4RFebe),
        PolicyKind::HySched,
        PolicyKind::RandomBaseline,
        PolicyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Synpa(v) => v.name(),
            PolicyKind::HySched => "HY_SCHED",
            PolicyKind::RandomBaseline => "RANDOM_BASELINE",
            PolicyKind::Oracle => "ORACLE",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == wanted)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

impl Serialize for PolicyKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for PolicyKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pairs kept from `current` because one of their applications has no
/// usable sample, and the applications free to be re-paired.
pub(crate) fn split_by_samples(
    ctx: &QuantumContext<'_>,
    usable: impl Fn(AppId) -> bool,
) -> (Vec<(AppId, AppId)>, Vec<AppId>) {
    let Some(current) = ctx.current else {
        return (Vec::new(), ctx.apps.to_vec());
    };
    let mut kept = Vec::new();
    let mut free = Vec::new();
    for &app in ctx.apps {
        match current.partner(app) {
            Some(p) if ctx.apps.contains(&p) => {
                if usable(app) && usable(p) {
                    free.push(app);
                } else if app < p {
                    kept.push((app, p));
                }
            }
            _ => free.push(app),
        }
    }
    (kept, free)
}
