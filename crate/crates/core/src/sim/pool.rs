//! Synthetic application pools with controllable class mix and horizontal
//! waste.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AppGroundTruth, AppPhase, DEFAULT_ISOLATED_QUANTA, DEFAULT_QUANTUM_CYCLES};
use crate::stack::{classify_app, AppClass, AppId, IscStack, DEFAULT_DISPATCH_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub backend_bound: usize,
    pub frontend_bound: usize,
    pub other: usize,
    /// Range of the share of the three-category backend that is really
    /// horizontal waste.
    pub hw_share: (f64, f64),
    /// Range of the fraction of dispatched instructions that never commit.
    pub bad_speculation: (f64, f64),
    pub max_phases: usize,
    /// Relative perturbation applied to each phase's categories.
    pub phase_jitter: f64,
    pub isolated_quanta: u64,
    /// Taken from the simulator settings rather than from pool files.
    #[serde(skip)]
    pub quantum_cycles: f64,
    #[serde(skip)]
    pub dispatch_width: u32,
    /// Id of the first application; the rest follow consecutively.
    pub first_id: u32,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            backend_bound: 10,
            frontend_bound: 8,
            other: 6,
            hw_share: (0.3, 0.6),
            bad_speculation: (0.0, 0.2),
            max_phases: 3,
            phase_jitter: 0.1,
            isolated_quanta: DEFAULT_ISOLATED_QUANTA,
            quantum_cycles: DEFAULT_QUANTUM_CYCLES,
            dispatch_width: DEFAULT_DISPATCH_WIDTH,
            first_id: 0,
        }
    }
}

/// Draws `(dispatch, frontend, three-category backend)` for `class`.
fn base_stack(class: AppClass, rng: &mut impl Rng) -> (f64, f64, f64) {
    loop {
        let (d, fe, be) = match class {
            AppClass::BackendBound => {
                let d = rng.random_range(0.08..0.25);
                let fe = rng.random_range(0.02..0.2);
                (d, fe, 1.0 - d - fe)
            }
            AppClass::FrontendBound => {
                let d = rng.random_range(0.1..0.4);
                let fe = rng.random_range(0.37..0.55);
                (d, fe, 1.0 - d - fe)
            }
            AppClass::Other => {
                let fe = rng.random_range(0.05..0.33);
                let be = rng.random_range(0.2..0.63);
                (1.0 - fe - be, fe, be)
            }
        };
        let ok = match class {
            AppClass::BackendBound => be > 0.67,
            AppClass::FrontendBound => be >= 0.05,
            AppClass::Other => d >= 0.1,
        };
        if ok {
            return (d, fe, be);
        }
    }
}

fn split(d: f64, fe: f64, be3: f64, share: f64) -> IscStack {
    let hw = be3 * share;
    IscStack::isc4(d, fe, be3 - hw, hw)
}

fn make_app(id: AppId, name: String, class: AppClass, cfg: &PoolConfig, rng: &mut impl Rng) -> AppGroundTruth {
    let (d, fe, be3) = base_stack(class, rng);
    let share = rng.random_range(cfg.hw_share.0..=cfg.hw_share.1);
    let base = split(d, fe, be3, share);
    let nphases = rng.random_range(1..=cfg.max_phases.max(1));
    let w = f64::from(cfg.dispatch_width);
    let mut phases = Vec::with_capacity(nphases);
    for k in 0..nphases {
        let mut stack = base;
        if k > 0 {
            // perturb, keeping the class of the phase
            for _ in 0..100 {
                let mut v = base.values();
                for x in v.0.iter_mut() {
                    *x *= 1.0 + rng.random_range(-cfg.phase_jitter..=cfg.phase_jitter);
                }
                let s = IscStack::normalized(crate::stack::StackKind::Isc4, &v).unwrap_or(base);
                if classify_app(&s.to_isc3()) == class {
                    stack = s;
                    break;
                }
            }
        }
        let bad = rng.random_range(cfg.bad_speculation.0..=cfg.bad_speculation.1);
        let st_ipc = stack.dispatch * w * (1.0 - bad);
        let quanta = rng.random_range(0.1..0.35) * cfg.isolated_quanta.max(1) as f64;
        phases.push(AppPhase {
            st_stack: stack,
            st_ipc,
            duration: quanta * st_ipc * cfg.quantum_cycles,
        });
    }
    AppGroundTruth::with_isolated_target(id, name, phases, cfg.isolated_quanta, cfg.quantum_cycles)
}

/// Generates backend-bound, then frontend-bound, then other applications,
/// named `bbNN`, `fbNN` and `otNN`.
pub fn synthetic_pool(cfg: &PoolConfig, seed: u64) -> Vec<AppGroundTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = [
        (AppClass::BackendBound, cfg.backend_bound, "bb"),
        (AppClass::FrontendBound, cfg.frontend_bound, "fb"),
        (AppClass::Other, cfg.other, "ot"),
    ];
    let mut apps = Vec::new();
    let mut next = cfg.first_id;
    for (class, count, prefix) in groups {
        for k in 0..count {
            apps.push(make_app(AppId(next), format!("{prefix}{k:02}"), class, cfg, &mut rng));
            next += 1;
        }
    }
    apps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_and_validity() {
        let cfg = PoolConfig::default();
        let pool = synthetic_pool(&cfg, 11);
        assert_eq!(pool.len(), 24);
        for (k, app) in pool.iter().enumerate() {
            app.validate(cfg.dispatch_width).unwrap();
            let expected = if k < 10 {
                AppClass::BackendBound
            } else if k < 18 {
                AppClass::FrontendBound
            } else {
                AppClass::Other
            };
            for p in &app.phases {
                assert_eq!(classify_app(&p.st_stack.to_isc3()), expected, "{}", app.name);
            }
            assert_eq!(app.class(), expected, "{}", app.name);
        }
    }

    #[test]
    fn seeded() {
        let cfg = PoolConfig::default();
        assert_eq!(synthetic_pool(&cfg, 3), synthetic_pool(&cfg, 3));
        assert_ne!(synthetic_pool(&cfg, 3), synthetic_pool(&cfg, 4));
    }

    #[test]
    fn horizontal_waste_follows_share() {
        let cfg = PoolConfig {
            hw_share: (0.5, 0.5),
            max_phases: 1,
            ..PoolConfig::default()
        };
        for app in synthetic_pool(&cfg, 5) {
            let s = app.phases[0].st_stack;
            assert!((s.horizontal_waste - s.backend).abs() < 1e-12);
        }
    }
}
