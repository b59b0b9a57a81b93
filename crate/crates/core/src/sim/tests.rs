use super::*;
use crate::policy::{Schedule, SynpaVariant};
use crate::stack::{adjust_stack, Gt100Method, Lt100Method, StackPolicy};

fn single_phase(id: u32, stack: IscStack, st_ipc: f64, isolated_quanta: u64, q: f64) -> AppGroundTruth {
    AppGroundTruth::with_isolated_target(
        AppId(id),
        format!("app{id}"),
        vec![AppPhase {
            st_stack: stack,
            st_ipc,
            duration: 1e18,
        }],
        isolated_quanta,
        q,
    )
}

fn small_config() -> SimConfig {
    SimConfig {
        quantum_cycles: 1e6,
        dispatch_width: 4,
        max_quanta: 10_000,
    }
}

fn truth(app: u32, stack: IscStack, ipc: f64) -> TrueState {
    TrueState {
        app: AppId(app),
        st_stack: stack,
        st_ipc: ipc,
    }
}

#[test]
fn identity_counters() {
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4));
    let s0 = IscStack::isc4(0.5, 0.2, 0.2, 0.1);
    let s1 = IscStack::isc4(0.3, 0.3, 0.3, 0.1);
    let schedule = Schedule::from_pairs(0, &[(AppId(0), AppId(1))], None);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = simulate_quantum(
        &schedule,
        &[truth(0, s0, 1.5), truth(1, s1, 1.0)],
        &gt,
        &small_config(),
        &mut rng,
    )
    .unwrap();
    let a = out.iter().find(|o| o.sample.app_id == AppId(0)).unwrap();
    assert!((a.sample.inst_spec - 2e6).abs() < 1e-6);
    assert!((a.committed - 1.5e6).abs() < 1e-6);
    assert_eq!(a.sample.cpu_cycles, 1e6);
}

#[test]
fn counters_round_trip_to_stacks() {
    let gt = GroundTruthModel::new(RegressionModel::thunderx2(StackKind::Isc4));
    let pool = synthetic_pool(&PoolConfig::default(), 1);
    let policy = StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::Normalize);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for pair in pool.chunks_exact(2) {
        let (p0, p1) = (&pair[0].phases[0], &pair[1].phases[0]);
        let schedule = Schedule::from_pairs(0, &[(pair[0].id, pair[1].id)], None);
        let t = [
            truth(pair[0].id.0, p0.st_stack, p0.st_ipc),
            truth(pair[1].id.0, p1.st_stack, p1.st_ipc),
        ];
        for o in simulate_quantum(&schedule, &t, &gt, &small_config(), &mut rng).unwrap() {
            let raw = build_raw_stack(&o.sample, 4).unwrap();
            let s = adjust_stack(&raw, &policy);
            for c in Category::ALL {
                assert!((s.get(c) - o.smt_stack.get(c)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn noise_is_seeded() {
    let gt = GroundTruthModel::new(RegressionModel::thunderx2(StackKind::Isc4))
        .with_noise(0.02)
        .with_counter_jitter(0.01);
    let t = [
        truth(0, IscStack::isc4(0.3, 0.2, 0.3, 0.2), 1.0),
        truth(1, IscStack::isc4(0.2, 0.1, 0.5, 0.2), 0.6),
    ];
    let schedule = Schedule::from_pairs(0, &[(AppId(0), AppId(1))], None);
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate_quantum(&schedule, &t, &gt, &small_config(), &mut rng).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
    let quiet = GroundTruthModel::new(RegressionModel::thunderx2(StackKind::Isc4));
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let a = simulate_quantum(&schedule, &t, &quiet, &small_config(), &mut r1).unwrap();
    let b = simulate_quantum(&schedule, &t, &quiet, &small_config(), &mut r2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stall_overlap_pushes_stacks_over_one() {
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4)).with_stall_overlap(0.5);
    let t = [
        truth(0, IscStack::isc4(0.4, 0.3, 0.3, 0.0), 1.0),
        truth(1, IscStack::isc4(0.4, 0.3, 0.3, 0.0), 1.0),
    ];
    let schedule = Schedule::from_pairs(0, &[(AppId(0), AppId(1))], None);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = simulate_quantum(&schedule, &t, &gt, &small_config(), &mut rng).unwrap();
    let raw = build_raw_stack(&out[0].sample, 4).unwrap();
    assert!((raw.sum() - 1.3).abs() < 1e-12);
}

#[test]
fn identity_pair_runs_at_isolated_speed() {
    let cfg = small_config();
    let apps = [
        single_phase(0, IscStack::isc4(0.5, 0.2, 0.2, 0.1), 1.8, 50, cfg.quantum_cycles),
        single_phase(1, IscStack::isc4(0.3, 0.3, 0.3, 0.1), 1.0, 50, cfg.quantum_cycles),
    ];
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4));
    let mut p = RandomBaseline::new(1);
    let r = run_workload(&apps, &mut p, &gt, &cfg, 1).unwrap();
    assert!((r.turnaround_quanta - 50.0).abs() < 1e-9);
    for c in r.completion_quanta.values() {
        assert!((c - 50.0).abs() < 1e-9);
    }
    assert_eq!(r.samples.len(), 50);
    assert!((r.ipc_geomean - (1.8f64 * 1.0).sqrt()).abs() < 1e-9);
}

#[test]
fn ipc_scaling_scales_completion() {
    let cfg = small_config();
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4));
    let stack = IscStack::isc4(0.5, 0.2, 0.2, 0.1);
    let base = [
        single_phase(0, stack, 1.0, 40, cfg.quantum_cycles),
        single_phase(1, stack, 1.0, 40, cfg.quantum_cycles),
    ];
    let t0 = run_workload(&base, &mut RandomBaseline::new(0), &gt, &cfg, 0)
        .unwrap()
        .turnaround_quanta;
    for k in [0.5, 1.25, 1.6] {
        let scaled: Vec<AppGroundTruth> = base
            .iter()
            .map(|a| {
                let mut a = a.clone();
                a.phases[0].st_ipc *= k;
                a
            })
            .collect();
        let t = run_workload(&scaled, &mut RandomBaseline::new(0), &gt, &cfg, 0)
            .unwrap()
            .turnaround_quanta;
        assert!((t - t0 / k).abs() < 1e-9, "k={k}: {t} vs {}", t0 / k);
    }
}

#[test]
fn committed_work_is_conserved() {
    let cfg = SimConfig {
        quantum_cycles: 1e6,
        ..SimConfig::default()
    };
    let pool = synthetic_pool(
        &PoolConfig {
            isolated_quanta: 40,
            quantum_cycles: 1e6,
            ..PoolConfig::default()
        },
        9,
    );
    let gt = GroundTruthModel::new(RegressionModel::thunderx2(StackKind::Isc4)).with_noise(0.02);
    let apps = &pool[..8];
    let r = run_workload(apps, &mut RandomBaseline::new(2), &gt, &cfg, 2).unwrap();
    for app in apps {
        let mut total = 0.0;
        let mut done = false;
        for q in &r.samples {
            let s = q.iter().find(|s| s.app_id == app.id).unwrap();
            let before = total;
            total += s.inst_retired;
            if total >= app.target_instructions * (1.0 - 1e-12) {
                assert!(before < app.target_instructions);
                assert!(total < app.target_instructions + s.inst_retired + 1e-6);
                done = true;
                break;
            }
        }
        assert!(done, "{} never completed", app.name);
        assert!(r.completion_quanta[&app.id] <= r.turnaround_quanta);
    }
    assert!(r.instances.values().any(|&n| n > 1), "fast apps are relaunched");
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimConfig {
        quantum_cycles: 1e6,
        ..SimConfig::default()
    };
    let pool = synthetic_pool(
        &PoolConfig {
            isolated_quanta: 30,
            quantum_cycles: 1e6,
            ..PoolConfig::default()
        },
        4,
    );
    let gt = GroundTruthModel::new(RegressionModel::thunderx2(StackKind::Isc4))
        .with_noise(0.02)
        .with_counter_jitter(0.01);
    let mut models = ModelSet::new();
    models.insert(SynpaVariant::Synpa4N, RegressionModel::thunderx2(StackKind::Isc4));
    for kind in [
        PolicyKind::Synpa(SynpaVariant::Synpa4N),
        PolicyKind::HySched,
        PolicyKind::Oracle,
    ] {
        let run = || {
            let mut s = build_scheduler(kind, &models, &gt, &cfg, 8).unwrap();
            run_workload(&pool[4..12], s.as_mut(), &gt, &cfg, 8).unwrap()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn quantum_cap_is_reported() {
    let cfg = SimConfig {
        quantum_cycles: 1e6,
        max_quanta: 10,
        ..SimConfig::default()
    };
    let stack = IscStack::isc4(0.5, 0.2, 0.2, 0.1);
    let apps = [
        single_phase(0, stack, 1.0, 40, 1e6),
        single_phase(1, stack, 1.0, 40, 1e6),
    ];
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4));
    let err = run_workload(&apps, &mut RandomBaseline::new(0), &gt, &cfg, 0).unwrap_err();
    assert_eq!(err, SimError::QuantumCap(10));
}

#[test]
fn invalid_workloads() {
    let cfg = small_config();
    let stack = IscStack::isc4(0.5, 0.2, 0.2, 0.1);
    let gt = GroundTruthModel::new(RegressionModel::identity(StackKind::Isc4));
    let one = [single_phase(0, stack, 1.0, 4, 1e6)];
    assert_eq!(
        run_workload(&one, &mut RandomBaseline::new(0), &gt, &cfg, 0).unwrap_err(),
        SimError::OddWorkload(1)
    );
    let dup = [single_phase(0, stack, 1.0, 4, 1e6), single_phase(0, stack, 1.0, 4, 1e6)];
    assert_eq!(
        run_workload(&dup, &mut RandomBaseline::new(0), &gt, &cfg, 0).unwrap_err(),
        SimError::DuplicateApp(AppId(0))
    );
    let fast = [single_phase(0, stack, 2.5, 4, 1e6), single_phase(1, stack, 1.0, 4, 1e6)];
    assert!(matches!(
        run_workload(&fast, &mut RandomBaseline::new(0), &gt, &cfg, 0),
        Err(SimError::InvalidApp { .. })
    ));
}

#[test]
fn phases_cycle_by_instructions() {
    let a = AppGroundTruth {
        id: AppId(0),
        name: "x".into(),
        phases: vec![
            AppPhase {
                st_stack: IscStack::isc4(0.5, 0.2, 0.2, 0.1),
                st_ipc: 1.0,
                duration: 100.0,
            },
            AppPhase {
                st_stack: IscStack::isc4(0.2, 0.2, 0.5, 0.1),
                st_ipc: 0.5,
                duration: 50.0,
            },
        ],
        target_instructions: 1000.0,
    };
    assert_eq!(a.phase_at(0.0).st_ipc, 1.0);
    assert_eq!(a.phase_at(99.0).st_ipc, 1.0);
    assert_eq!(a.phase_at(100.0).st_ipc, 0.5);
    assert_eq!(a.phase_at(150.0).st_ipc, 1.0);
    // 100 instructions at IPC 1 and 50 at IPC 0.5 take equal time
    let m = a.mean_stack();
    assert!((m.dispatch - 0.35).abs() < 1e-12);
    assert!((m.backend - 0.35).abs() < 1e-12);
}

#[test]
fn conserving_ground_truth() {
    let m = GroundTruthModel::conserving([0.05, 0.05, 0.05, 0.05], 0.6, 0.2).unwrap();
    let gt = GroundTruthModel::new(m);
    let a = IscStack::isc4(0.3, 0.2, 0.3, 0.2);
    let b = IscStack::isc4(0.1, 0.4, 0.2, 0.3);
    let s = gt.corun_stack(&a, &b, None);
    let raw = gt.model.evaluate_values(&a.values(), &b.values());
    for c in Category::ALL {
        assert!((s.get(c) - raw.get(c)).abs() < 1e-12);
    }
    assert!(GroundTruthModel::conserving([0.1; 4], 0.6, 0.2).is_err());
}

#[test]
fn contention_ground_truth() {
    let gt = GroundTruthModel::new(GroundTruthModel::contention());
    let d = gt.model.category(Category::Dispatch).unwrap();
    for i in 0..=37 {
        for j in 0..=37 {
            let (x, y) = (0.08 + 0.01 * i as f64, 0.08 + 0.01 * j as f64);
            assert!(d.evaluate(x, y) > 0.0, "dispatch vanishes at ({x}, {y})");
        }
    }
    let me = IscStack::isc4(0.2, 0.2, 0.3, 0.3);
    let busy = IscStack::isc4(0.4, 0.3, 0.2, 0.1);
    let idle = IscStack::isc4(0.1, 0.1, 0.7, 0.1);
    assert!(gt.true_slowdown(&me, &busy) > gt.true_slowdown(&me, &idle));
    assert!(gt.true_slowdown(&me, &idle) > 1.0);
}
