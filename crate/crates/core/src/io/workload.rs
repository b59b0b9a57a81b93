//! Workload composition and the workload JSON file.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stack::{AppClass, AppId};

pub const WORKLOAD_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WorkloadKind {
    BackendIntensive,
    FrontendIntensive,
    Mixed,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 3] = [
        WorkloadKind::BackendIntensive,
        WorkloadKind::FrontendIntensive,
        WorkloadKind::Mixed,
    ];

    /// Prefix of generated workload names.
    pub fn prefix(self) -> &'static str {
        match self {
            WorkloadKind::BackendIntensive => "be",
            WorkloadKind::FrontendIntensive => "fe",
            WorkloadKind::Mixed => "mix",
        }
    }

    /// Whether `classes` (one per member) obey this kind's composition.
    pub fn admits(self, classes: &[AppClass]) -> bool {
        let count = |c| classes.iter().filter(|&&x| x == c).count();
        let (bb, fb, other) = (
            count(AppClass::BackendBound),
            count(AppClass::FrontendBound),
            count(AppClass::Other),
        );
        classes.len() == WORKLOAD_SIZE
            && match self {
                WorkloadKind::BackendIntensive => (5..=6).contains(&bb) && bb + other == WORKLOAD_SIZE,
                WorkloadKind::FrontendIntensive => (5..=6).contains(&fb) && fb + other == WORKLOAD_SIZE,
                WorkloadKind::Mixed => bb == 4 && fb == 4,
            }
    }
}

impl std::fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WorkloadKind::BackendIntensive => "backend-intensive",
            WorkloadKind::FrontendIntensive => "frontend-intensive",
            WorkloadKind::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub kind: WorkloadKind,
    pub app_ids: Vec<AppId>,
}

/// How many workloads of each kind to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadCounts {
    pub backend_intensive: usize,
    pub frontend_intensive: usize,
    pub mixed: usize,
}

impl Default for WorkloadCounts {
    fn default() -> Self {
        Self {
            backend_intensive: 15,
            frontend_intensive: 5,
            mixed: 15,
        }
    }
}

impl WorkloadCounts {
    pub fn get(&self, kind: WorkloadKind) -> usize {
        match kind {
            WorkloadKind::BackendIntensive => self.backend_intensive,
            WorkloadKind::FrontendIntensive => self.frontend_intensive,
            WorkloadKind::Mixed => self.mixed,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("cannot build {kind} workloads: need {needed} {class:?} applications, the pool has {available}")]
    Infeasible {
        kind: WorkloadKind,
        class: AppClass,
        needed: usize,
        available: usize,
    },
    #[error("application {0} appears twice in the pool")]
    DuplicateApp(AppId),
    #[error("workload {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error("cannot access workload file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed workload file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Chooses how many dominant-class members a backend- or
/// frontend-intensive workload gets, or names the class that runs short.
fn dominant_count(
    kind: WorkloadKind,
    dominant: AppClass,
    have_dominant: usize,
    have_other: usize,
    rng: &mut impl Rng,
) -> Result<usize, WorkloadError> {
    let feasible: Vec<usize> = (5..=6)
        .filter(|&k| have_dominant >= k && have_other >= WORKLOAD_SIZE - k)
        .collect();
    if feasible.is_empty() {
        return Err(if have_dominant < 5 {
            WorkloadError::Infeasible {
                kind,
                class: dominant,
                needed: 5,
                available: have_dominant,
            }
        } else {
            WorkloadError::Infeasible {
                kind,
                class: AppClass::Other,
                needed: WORKLOAD_SIZE - have_dominant.min(6),
                available: have_other,
            }
        });
    }
    Ok(feasible[rng.random_range(0..feasible.len())])
}

fn check_pool(pool: &[(AppId, AppClass)]) -> Result<(), WorkloadError> {
    let mut ids: Vec<AppId> = pool.iter().map(|p| p.0).collect();
    ids.sort();
    match ids.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(WorkloadError::DuplicateApp(w[0])),
        None => Ok(()),
    }
}

/// Draws workloads from `pool` by the composition rules. Kinds are
/// generated in the order backend-intensive, frontend-intensive, mixed and
/// named `be1`, `fe1`, `mix1`, ...; members are listed by ascending id.
pub fn generate_workloads(
    pool: &[(AppId, AppClass)],
    counts: &WorkloadCounts,
    seed: u64,
) -> Result<Vec<WorkloadSpec>, WorkloadError> {
    check_pool(pool)?;
    let of = |c: AppClass| -> Vec<AppId> { pool.iter().filter(|p| p.1 == c).map(|p| p.0).collect() };
    let (bb, fb, other) = (
        of(AppClass::BackendBound),
        of(AppClass::FrontendBound),
        of(AppClass::Other),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for kind in WorkloadKind::ALL {
        let n = counts.get(kind);
        if n == 0 {
            continue;
        }
        let quota = |rng: &mut ChaCha8Rng| -> Result<Vec<(&Vec<AppId>, usize)>, WorkloadError> {
            Ok(match kind {
                WorkloadKind::BackendIntensive => {
                    let k = dominant_count(kind, AppClass::BackendBound, bb.len(), other.len(), rng)?;
                    vec![(&bb, k), (&other, WORKLOAD_SIZE - k)]
                }
                WorkloadKind::FrontendIntensive => {
                    let k = dominant_count(kind, AppClass::FrontendBound, fb.len(), other.len(), rng)?;
                    vec![(&fb, k), (&other, WORKLOAD_SIZE - k)]
                }
                WorkloadKind::Mixed => {
                    for (class, have) in [(AppClass::BackendBound, bb.len()), (AppClass::FrontendBound, fb.len())] {
                        if have < 4 {
                            return Err(WorkloadError::Infeasible {
                                kind,
                                class,
                                needed: 4,
                                available: have,
                            });
                        }
                    }
                    vec![(&bb, 4), (&fb, 4)]
                }
            })
        };
        for k in 1..=n {
            let mut app_ids = Vec::with_capacity(WORKLOAD_SIZE);
            for (group, take) in quota(&mut rng)? {
                app_ids.extend(group.choose_multiple(&mut rng, take).copied());
            }
            app_ids.sort();
            out.push(WorkloadSpec {
                name: format!("{}{k}", kind.prefix()),
                kind,
                app_ids,
            });
        }
    }
    Ok(out)
}

/// Checks every workload against the pool's classes.
pub fn validate_workloads(workloads: &[WorkloadSpec], pool: &[(AppId, AppClass)]) -> Result<(), WorkloadError> {
    check_pool(pool)?;
    let mut names = std::collections::BTreeSet::new();
    for w in workloads {
        let invalid = |reason: String| WorkloadError::Invalid {
            name: w.name.clone(),
            reason,
        };
        if !names.insert(w.name.as_str()) {
            return Err(invalid("duplicate workload name".into()));
        }
        let mut classes = Vec::with_capacity(w.app_ids.len());
        for id in &w.app_ids {
            let class = pool
                .iter()
                .find(|p| p.0 == *id)
                .map(|p| p.1)
                .ok_or_else(|| invalid(format!("application {id} is not in the pool")))?;
            classes.push(class);
        }
        let mut ids = w.app_ids.clone();
        ids.sort();
        ids.dedup();
        if ids.len() != w.app_ids.len() {
            return Err(invalid("an application is listed twice".into()));
        }
        if !w.kind.admits(&classes) {
            return Err(invalid(format!("members do not follow the {} composition", w.kind)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadFile {
    workloads: Vec<WorkloadSpec>,
}

pub fn workloads_to_json(workloads: &[WorkloadSpec]) -> String {
    let file = WorkloadFile {
        workloads: workloads.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("workload specs serialize");
    text.push('\n');
    text
}

pub fn workloads_from_json(text: &str) -> Result<Vec<WorkloadSpec>, WorkloadError> {
    Ok(serde_json::from_str::<WorkloadFile>(text)?.workloads)
}

pub fn save_workloads(workloads: &[WorkloadSpec], path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let path = path.as_ref();
    std::fs::write(path, workloads_to_json(workloads)).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_workloads(path: impl AsRef<Path>) -> Result<Vec<WorkloadSpec>, WorkloadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    workloads_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pool(bb: usize, fb: usize, other: usize) -> Vec<(AppId, AppClass)> {
        let mut out = Vec::new();
        for (class, n) in [
            (AppClass::BackendBound, bb),
            (AppClass::FrontendBound, fb),
            (AppClass::Other, other),
        ] {
            for _ in 0..n {
                out.push((AppId(out.len() as u32), class));
            }
        }
        out
    }

    fn classes(w: &WorkloadSpec, pool: &[(AppId, AppClass)]) -> Vec<AppClass> {
        w.app_ids
            .iter()
            .map(|id| pool.iter().find(|p| p.0 == *id).unwrap().1)
            .collect()
    }

    #[test]
    fn backend_intensive_from_small_pool() {
        let p = pool(6, 0, 4);
        let counts = WorkloadCounts {
            backend_intensive: 20,
            frontend_intensive: 0,
            mixed: 0,
        };
        let ws = generate_workloads(&p, &counts, 3).unwrap();
        assert_eq!(ws.len(), 20);
        let mut seen = std::collections::BTreeSet::new();
        for w in &ws {
            let c = classes(w, &p);
            let bb = c.iter().filter(|&&x| x == AppClass::BackendBound).count();
            assert!(bb == 5 || bb == 6);
            assert!(WorkloadKind::BackendIntensive.admits(&c));
            seen.insert(bb);
        }
        assert_eq!(seen.len(), 2, "both five and six should occur over 20 draws");
    }

    #[test]
    fn mixed_needs_four_frontend_bound() {
        let p = pool(10, 3, 10);
        let counts = WorkloadCounts {
            backend_intensive: 0,
            frontend_intensive: 0,
            mixed: 1,
        };
        let err = generate_workloads(&p, &counts, 0).unwrap_err();
        assert!(matches!(
            err,
            WorkloadError::Infeasible {
                class: AppClass::FrontendBound,
                needed: 4,
                available: 3,
                ..
            }
        ));
        assert!(err.to_string().contains("FrontendBound"));
    }

    #[test]
    fn short_on_other_names_other() {
        let p = pool(6, 0, 1);
        let counts = WorkloadCounts {
            backend_intensive: 1,
            frontend_intensive: 0,
            mixed: 0,
        };
        let err = generate_workloads(&p, &counts, 0).unwrap_err();
        assert!(matches!(
            err,
            WorkloadError::Infeasible {
                class: AppClass::Other,
                ..
            }
        ));
    }

    #[test]
    fn seeded_and_named() {
        let p = pool(10, 8, 6);
        let a = generate_workloads(&p, &WorkloadCounts::default(), 42).unwrap();
        let b = generate_workloads(&p, &WorkloadCounts::default(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 35);
        assert_eq!(a[0].name, "be1");
        assert_eq!(a[15].name, "fe1");
        assert_eq!(a[20].name, "mix1");
        assert_eq!(a[34].name, "mix15");
        assert_ne!(a, generate_workloads(&p, &WorkloadCounts::default(), 43).unwrap());
        validate_workloads(&a, &p).unwrap();
    }

    #[test]
    fn json_round_trip() {
        let p = pool(10, 8, 6);
        let ws = generate_workloads(&p, &WorkloadCounts::default(), 1).unwrap();
        let text = workloads_to_json(&ws);
        assert_eq!(workloads_from_json(&text).unwrap(), ws);
        assert!(text.contains("\"BackendIntensive\""));
        assert!(workloads_from_json("{\"workloads\": [], \"extra\": 1}").is_err());
    }

    #[test]
    fn validation_catches_bad_specs() {
        let p = pool(10, 8, 6);
        let mut ws = generate_workloads(&p, &WorkloadCounts::default(), 1).unwrap();
        ws[0].app_ids[0] = AppId(999);
        assert!(validate_workloads(&ws, &p).is_err());
        let mut ws = generate_workloads(&p, &WorkloadCounts::default(), 1).unwrap();
        ws[20].kind = WorkloadKind::BackendIntensive;
        assert!(validate_workloads(&ws, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn composition_rules_hold(bb in 0usize..12, fb in 0usize..12, other in 0usize..12, seed in any::<u64>()) {
            let p = pool(bb, fb, other);
            for kind in WorkloadKind::ALL {
                let counts = WorkloadCounts {
                    backend_intensive: usize::from(kind == WorkloadKind::BackendIntensive) * 3,
                    frontend_intensive: usize::from(kind == WorkloadKind::FrontendIntensive) * 3,
                    mixed: usize::from(kind == WorkloadKind::Mixed) * 3,
                };
                let feasible = match kind {
                    WorkloadKind::BackendIntensive => (bb >= 5 && other >= 3) || (bb >= 6 && other >= 2),
                    WorkloadKind::FrontendIntensive => (fb >= 5 && other >= 3) || (fb >= 6 && other >= 2),
                    WorkloadKind::Mixed => bb >= 4 && fb >= 4,
                };
                match generate_workloads(&p, &counts, seed) {
                    Ok(ws) => {
                        prop_assert!(feasible);
                        prop_assert_eq!(ws.len(), 3);
                        for w in &ws {
                            prop_assert!(kind.admits(&classes(w, &p)));
                        }
                        validate_workloads(&ws, &p).unwrap();
                    }
                    Err(WorkloadError::Infeasible { .. }) => prop_assert!(!feasible),
                    Err(e) => prop_assert!(false, "unexpected error {e}"),
                }
            }
        }
    }
}
