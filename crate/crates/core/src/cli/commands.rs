use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CliError, RunConfig};
use crate::io::{
    ccdf_rows, generate_workloads, group_trace, load_ccdf, load_results, load_trace, load_workloads, read_trace_rows,
    run_trace_rows, save_ccdf, save_results, save_trace, save_workloads, validate_workloads, CcdfRow, ResultRow,
    WorkloadKind, WorkloadSpec,
};
use crate::model::{load_model, model_to_json};
use crate::policy::SynpaVariant;
use crate::sim::{
    build_scheduler, compute_metrics, run_workload, synthetic_pool, AppGroundTruth, GroundTruthModel, ModelSet,
    RunResult, SimConfig, SimError,
};
use crate::stack::AppId;
use crate::train::{simulate_profiles, train_models, Profiles, TrainError, TrainReport};

/// What a command printed and which files it wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub files: Vec<PathBuf>,
}

const STREAM_POOL: u64 = 1;
const STREAM_WORKLOADS: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_RUNS: u64 = 1 << 40;

/// Independent seed for one use of the master seed.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed shared by every policy for one repetition of one workload, so that
/// policies face the same noise.
fn run_seed(seed: u64, workload: usize, repetition: u32) -> u64 {
    sub_seed(seed, STREAM_RUNS + ((workload as u64) << 20) + u64::from(repetition))
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::QuantumCap(_) | SimError::Policy(_) | SimError::InvalidSchedule(_) => {
            CliError::Numerical(e.to_string())
        }
        SimError::InvalidConfig(_) | SimError::InvalidGroundTruth(_) => CliError::Config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Fit { .. } => CliError::Numerical(e.to_string()),
        TrainError::TooFewApps(_) | TrainError::BadFraction(_) => CliError::Config(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn load_apps(config: &RunConfig) -> Result<Vec<AppGroundTruth>, CliError> {
    let apps: Vec<AppGroundTruth> = match &config.apps_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("malformed {}: {e}", path.display())))?
        }
        None => synthetic_pool(&config.pool_config(), sub_seed(config.seed, STREAM_POOL)),
    };
    let mut ids = BTreeSet::new();
    for app in &apps {
        app.validate(config.dispatch_width).map_err(sim_error)?;
        if !ids.insert(app.id) {
            return Err(CliError::Data(format!("application {} is defined twice", app.id)));
        }
    }
    Ok(apps)
}

fn load_workload_specs(config: &RunConfig, apps: &[AppGroundTruth]) -> Result<Vec<WorkloadSpec>, CliError> {
    let classes: Vec<(AppId, crate::stack::AppClass)> = apps.iter().map(|a| (a.id, a.class())).collect();
    match &config.workloads_path {
        Some(path) => {
            let specs = load_workloads(path).map_err(data)?;
            validate_workloads(&specs, &classes).map_err(data)?;
            if specs.is_empty() {
                return Err(CliError::Data(format!("{} lists no workloads", path.display())));
            }
            Ok(specs)
        }
        None => {
            let specs = generate_workloads(&classes, &config.workloads, sub_seed(config.seed, STREAM_WORKLOADS))
                .map_err(|e| CliError::Config(e.to_string()))?;
            if specs.is_empty() {
                return Err(CliError::Config("workload counts are all zero".into()));
            }
            Ok(specs)
        }
    }
}

fn profiles(
    config: &RunConfig,
    apps: &[AppGroundTruth],
    gt: &GroundTruthModel,
    sim: &SimConfig,
) -> Result<Profiles, CliError> {
    let t = &config.train;
    match (&t.isolated_trace, &t.corun_trace) {
        (Some(iso), Some(corun)) => {
            let isolated = load_trace(iso).map_err(|e| CliError::Data(format!("{}: {e}", iso.display())))?;
            let file = std::fs::File::open(corun).map_err(|e| CliError::Data(format!("{}: {e}", corun.display())))?;
            let rows = read_trace_rows(std::io::BufReader::new(file))
                .map_err(|e| CliError::Data(format!("{}: {e}", corun.display())))?;
            group_trace(&rows).map_err(|e| CliError::Data(format!("{}: {e}", corun.display())))?;
            let rows: Vec<_> = rows.into_iter().map(|r| r.1).collect();
            Profiles::from_traces(isolated, &rows).map_err(train_error)
        }
        _ => Ok(simulate_profiles(
            apps,
            gt,
            sim,
            &t.train_config(),
            sub_seed(config.seed, STREAM_TRAIN),
        )),
    }
}

fn fit_models(
    config: &RunConfig,
    apps: &[AppGroundTruth],
    gt: &GroundTruthModel,
    variants: &[SynpaVariant],
) -> Result<(ModelSet, Vec<TrainReport>), CliError> {
    if variants.is_empty() {
        return Ok((ModelSet::new(), Vec::new()));
    }
    let holdout: BTreeSet<AppId> = config.train.holdout.iter().copied().collect();
    if config.train.isolated_trace.is_none() {
        if let Some(id) = holdout.iter().find(|id| !apps.iter().any(|a| a.id == **id)) {
            return Err(CliError::Config(format!("holdout application {id} is not in the pool")));
        }
    }
    let sim = config.sim_config();
    let profiles = profiles(config, apps, gt, &sim)?;
    train_models(
        &profiles,
        &holdout,
        variants,
        config.dispatch_width,
        &config.train.train_config(),
        sub_seed(config.seed, STREAM_TRAIN),
    )
    .map_err(train_error)
}

fn mse_table(models: &ModelSet, reports: &[TrainReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let m = &models[&r.variant];
        let _ = writeln!(
            out,
            "{} ({} training pairs of {}, {} quanta dropped)",
            r.variant.name(),
            r.pairs_used,
            r.pairs_available,
            r.dropped_quanta
        );
        let _ = writeln!(
            out,
            "  {:<16} {:>9} {:>9} {:>9} {:>9} {:>12}",
            "category", "alpha", "beta", "gamma", "rho", "mse"
        );
        for c in m.categories() {
            let _ = writeln!(
                out,
                "  {:<16} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>12.4e}",
                c.category.to_string(),
                c.alpha,
                c.beta,
                c.gamma,
                c.rho,
                c.mse
            );
        }
    }
    out
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(&path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn save_models(dir: &Path, models: &ModelSet, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if models.is_empty() {
        return Ok(());
    }
    let dir = dir.join("models");
    create_dir(&dir)?;
    for (v, m) in models {
        write_file(dir.join(format!("{}.json", v.name())), &model_to_json(m), files)?;
    }
    Ok(())
}

/// Fits a model for every configured variant and saves them under
/// `<out_dir>/models/`.
pub fn cmd_train(config: &RunConfig) -> Result<CommandOutput, CliError> {
    config.validate()?;
    let gt = config.ground_truth_model()?;
    let apps = load_apps(config)?;
    if config.train.variants.is_empty() {
        return Err(CliError::Config("train.variants is empty".into()));
    }
    let (models, reports) = fit_models(config, &apps, &gt, &config.train.variants)?;
    let mut out = CommandOutput {
        text: mse_table(&models, &reports),
        ..CommandOutput::default()
    };
    create_dir(&config.out_dir)?;
    save_models(&config.out_dir, &models, &mut out.files)?;
    Ok(out)
}

fn obtain_models(
    config: &RunConfig,
    apps: &[AppGroundTruth],
    gt: &GroundTruthModel,
) -> Result<(ModelSet, String), CliError> {
    let needed = config.needed_variants();
    let mut models = ModelSet::new();
    let mut missing = Vec::new();
    for v in needed {
        match config.models.get(&v) {
            Some(path) => {
                let m = load_model(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                if m.kind() != v.kind() {
                    return Err(CliError::Config(format!(
                        "{} needs a {:?} model, {} holds {:?}",
                        v.name(),
                        v.kind(),
                        path.display(),
                        m.kind()
                    )));
                }
                models.insert(v, m);
            }
            None => missing.push(v),
        }
    }
    let (trained, reports) = fit_models(config, apps, gt, &missing)?;
    let text = mse_table(&trained, &reports);
    models.extend(trained);
    Ok((models, text))
}

struct Task {
    workload: usize,
    policy: usize,
    repetition: u32,
}

/// Runs every (workload, policy, repetition) and writes `results.csv`,
/// horizontal-waste CCDFs under `ccdf/`, the workloads, the applications
/// and the models that were used.
pub fn cmd_simulate(config: &RunConfig) -> Result<CommandOutput, CliError> {
    config.validate()?;
    let gt = config.ground_truth_model()?;
    let apps = load_apps(config)?;
    let workloads = load_workload_specs(config, &apps)?;
    let (models, train_text) = obtain_models(config, &apps, &gt)?;
    let sim = config.sim_config();
    let by_id: BTreeMap<AppId, &AppGroundTruth> = apps.iter().map(|a| (a.id, a)).collect();
    let members: Vec<Vec<AppGroundTruth>> = workloads
        .iter()
        .map(|w| w.app_ids.iter().map(|id| by_id[id].clone()).collect())
        .collect();

    let mut tasks = Vec::new();
    for workload in 0..workloads.len() {
        for policy in 0..config.policies.len() {
            for repetition in 0..config.repetitions {
                tasks.push(Task {
                    workload,
                    policy,
                    repetition,
                });
            }
        }
    }
    let runs: Vec<Result<RunResult, CliError>> = tasks
        .par_iter()
        .map(|t| {
            let seed = run_seed(config.seed, t.workload, t.repetition);
            let mut scheduler =
                build_scheduler(config.policies[t.policy], &models, &gt, &sim, seed).map_err(sim_error)?;
            let mut run = run_workload(&members[t.workload], scheduler.as_mut(), &gt, &sim, seed).map_err(sim_error)?;
            if !(config.write_traces && t.repetition == 0) {
                run.samples = Vec::new();
                run.schedules = Vec::new();
            }
            Ok(run)
        })
        .collect();
    let runs: Vec<RunResult> = runs.into_iter().collect::<Result<_, _>>()?;

    let reps = config.repetitions as usize;
    let per_policy = |w: usize, p: usize| {
        let start = (w * config.policies.len() + p) * reps;
        &runs[start..start + reps]
    };
    let base_idx = config
        .policies
        .iter()
        .position(|p| *p == config.baseline)
        .expect("validated: baseline is a policy");

    let mut rows = Vec::new();
    let mut ccdfs: Vec<(PathBuf, Vec<CcdfRow>)> = Vec::new();
    let mut speedups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (w, spec) in workloads.iter().enumerate() {
        let baseline = per_policy(w, base_idx);
        for (p, kind) in config.policies.iter().enumerate() {
            let policy_runs = per_policy(w, p);
            let m = compute_metrics(policy_runs, baseline, config.discard)
                .map_err(|e| CliError::Numerical(format!("{} on {}: {e}", kind, spec.name)))?;
            for (r, run) in policy_runs.iter().enumerate() {
                rows.push(ResultRow {
                    workload: spec.name.clone(),
                    policy: kind.name().into(),
                    repetition: r as u32,
                    turnaround_quanta: run.turnaround_quanta,
                    tt_speedup_vs_baseline: m.baseline_turnaround / run.turnaround_quanta,
                    ipc_geomean: run.ipc_geomean,
                    discarded_flag: m.turnaround.discarded[r],
                });
            }
            ccdfs.push((
                PathBuf::from(format!("{}_{}.csv", spec.name, kind.name())),
                ccdf_rows(&m.hw_ccdf),
            ));
            speedups.entry(p).or_default().push(m.tt_speedup);
        }
    }

    // every run succeeded; only now touch the output directory
    let dir = &config.out_dir;
    let mut out = CommandOutput::default();
    create_dir(dir)?;
    let results_path = dir.join("results.csv");
    save_results(&rows, &results_path).map_err(data)?;
    out.files.push(results_path);
    let ccdf_dir = dir.join("ccdf");
    create_dir(&ccdf_dir)?;
    for (name, c) in &ccdfs {
        let path = ccdf_dir.join(name);
        save_ccdf(c, &path).map_err(data)?;
        out.files.push(path);
    }
    let wl_path = dir.join("workloads.json");
    save_workloads(&workloads, &wl_path).map_err(data)?;
    out.files.push(wl_path);
    let mut apps_json = serde_json::to_string_pretty(&apps).expect("applications serialize");
    apps_json.push('\n');
    write_file(dir.join("apps.json"), &apps_json, &mut out.files)?;
    save_models(dir, &models, &mut out.files)?;
    if config.write_traces {
        let trace_dir = dir.join("traces");
        create_dir(&trace_dir)?;
        for (w, spec) in workloads.iter().enumerate() {
            for (p, kind) in config.policies.iter().enumerate() {
                let path = trace_dir.join(format!("{}_{}.csv", spec.name, kind.name()));
                save_trace(&run_trace_rows(&per_policy(w, p)[0]), &path).map_err(data)?;
                out.files.push(path);
            }
        }
    }

    out.text = train_text;
    let _ = writeln!(
        out.text,
        "{} workloads, {} repetitions, baseline {}",
        workloads.len(),
        config.repetitions,
        config.baseline
    );
    for (p, kind) in config.policies.iter().enumerate() {
        let s = &speedups[&p];
        let _ = writeln!(
            out.text,
            "  {:<16} mean TT speedup {:.4}",
            kind.name(),
            s.iter().sum::<f64>() / s.len() as f64
        );
    }
    let _ = writeln!(out.text, "wrote {}", dir.join("results.csv").display());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
struct Comparison {
    /// (workload, kind, policy, tt speedup, ipc speedup)
    per_workload: Vec<(String, Option<WorkloadKind>, String, f64, f64)>,
    policies: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn compare(dir: &Path, baseline: &str) -> Result<Comparison, CliError> {
    let path = dir.join("results.csv");
    if !path.exists() {
        return Err(CliError::Data(format!("no results.csv in {}", dir.display())));
    }
    let rows = load_results(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} holds no results", path.display())));
    }
    let kinds: BTreeMap<String, WorkloadKind> = match load_workloads(dir.join("workloads.json")) {
        Ok(specs) => specs.into_iter().map(|s| (s.name, s.kind)).collect(),
        Err(_) => BTreeMap::new(),
    };
    let mut workloads: Vec<String> = Vec::new();
    let mut policies: Vec<String> = Vec::new();
    // kept (tt, ipc) per workload and policy, in file order
    let mut kept: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &rows {
        if !workloads.contains(&r.workload) {
            workloads.push(r.workload.clone());
        }
        if !policies.contains(&r.policy) {
            policies.push(r.policy.clone());
        }
        let e = kept.entry((r.workload.clone(), r.policy.clone())).or_default();
        if !r.discarded_flag {
            e.0.push(r.turnaround_quanta);
            e.1.push(r.ipc_geomean);
        }
    }
    let mut per_workload = Vec::new();
    for w in &workloads {
        let base = kept
            .get(&(w.clone(), baseline.to_string()))
            .ok_or_else(|| CliError::Data(format!("workload {w} has no rows for baseline {baseline}")))?;
        if base.0.is_empty() {
            return Err(CliError::Data(format!(
                "every {baseline} repetition of {w} is discarded"
            )));
        }
        for p in &policies {
            let Some(k) = kept.get(&(w.clone(), p.clone())) else {
                continue;
            };
            if k.0.is_empty() {
                return Err(CliError::Data(format!("every {p} repetition of {w} is discarded")));
            }
            per_workload.push((
                w.clone(),
                kinds.get(w).copied(),
                p.clone(),
                mean(&base.0) / mean(&k.0),
                mean(&k.1) / mean(&base.1),
            ));
        }
    }
    Ok(Comparison { per_workload, policies })
}

/// (group, policy, mean tt speedup, mean ipc speedup) for each workload
/// kind present, then for all workloads.
fn by_kind(c: &Comparison) -> Vec<(String, String, f64, f64)> {
    let mut groups: Vec<(String, Option<WorkloadKind>)> = WorkloadKind::ALL
        .iter()
        .filter(|k| c.per_workload.iter().any(|r| r.1 == Some(**k)))
        .map(|k| (k.to_string(), Some(*k)))
        .collect();
    groups.push(("all".into(), None));
    let mut out = Vec::new();
    for (label, kind) in groups {
        for p in &c.policies {
            let sel: Vec<_> = c
                .per_workload
                .iter()
                .filter(|r| &r.2 == p && (kind.is_none() || r.1 == kind))
                .collect();
            if sel.is_empty() {
                continue;
            }
            let tt: Vec<f64> = sel.iter().map(|r| r.3).collect();
            let ipc: Vec<f64> = sel.iter().map(|r| r.4).collect();
            out.push((label.clone(), p.clone(), mean(&tt), mean(&ipc)));
        }
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    fields.join(",") + "\n"
}

/// Per-workload and per-kind speedups over the baseline, read from
/// `<out_dir>/results.csv`; writes `comparison.csv`.
pub fn cmd_compare(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let dir = &config.out_dir;
    let c = compare(dir, config.baseline.name())?;
    let kinds = by_kind(&c);
    let mut csv = csv_line(&["level", "group", "policy", "tt_speedup", "ipc_speedup"].map(String::from));
    for r in &c.per_workload {
        csv += &csv_line(&[
            "workload".into(),
            r.0.clone(),
            r.2.clone(),
            r.3.to_string(),
            r.4.to_string(),
        ]);
    }
    for r in &kinds {
        let level = if r.0 == "all" { "all" } else { "kind" };
        csv += &csv_line(&[level.into(), r.0.clone(), r.1.clone(), r.2.to_string(), r.3.to_string()]);
    }
    let mut text = format!("speedups over {}\n", config.baseline);
    let _ = writeln!(text, "{:<20} {:<16} {:>10} {:>10}", "workload", "policy", "TT", "IPC");
    for r in &c.per_workload {
        let _ = writeln!(text, "{:<20} {:<16} {:>10.4} {:>10.4}", r.0, r.2, r.3, r.4);
    }
    let _ = writeln!(text, "\n{:<20} {:<16} {:>10} {:>10}", "kind", "policy", "TT", "IPC");
    for r in &kinds {
        let _ = writeln!(text, "{:<20} {:<16} {:>10.4} {:>10.4}", r.0, r.1, r.2, r.3);
    }
    let mut out = CommandOutput {
        text,
        ..CommandOutput::default()
    };
    write_file(dir.join("comparison.csv"), &csv, &mut out.files)?;
    Ok(out)
}

/// Plot-ready summaries under `<out_dir>/report/`: speedups by workload
/// kind and the horizontal-waste CCDF averaged over each kind's workloads.
pub fn cmd_report(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let dir = &config.out_dir;
    let c = compare(dir, config.baseline.name())?;
    let kinds = by_kind(&c);
    let mut speed_csv = csv_line(&["kind", "policy", "tt_speedup", "ipc_speedup"].map(String::from));
    for r in &kinds {
        speed_csv += &csv_line(&[r.0.clone(), r.1.clone(), r.2.to_string(), r.3.to_string()]);
    }

    // (kind label, policy) -> summed probabilities per threshold
    let mut sums: BTreeMap<(String, String), (Vec<CcdfRow>, usize)> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for r in &c.per_workload {
        let path = dir.join("ccdf").join(format!("{}_{}.csv", r.0, r.2));
        let rows = load_ccdf(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let labels = [
            r.1.map_or_else(|| "unknown".to_string(), |k| k.to_string()),
            "all".to_string(),
        ];
        for label in labels {
            let key = (label, r.2.clone());
            if !sums.contains_key(&key) {
                order.push(key.clone());
            }
            let e = sums.entry(key).or_insert_with(|| (Vec::new(), 0));
            if e.0.is_empty() {
                e.0 = rows
                    .iter()
                    .map(|x| CcdfRow {
                        threshold: x.threshold,
                        probability: 0.0,
                    })
                    .collect();
            }
            if e.0.len() != rows.len() || e.0.iter().zip(&rows).any(|(a, b)| a.threshold != b.threshold) {
                return Err(CliError::Data(format!("{} uses different thresholds", path.display())));
            }
            for (a, b) in e.0.iter_mut().zip(&rows) {
                a.probability += b.probability;
            }
            e.1 += 1;
        }
    }
    order.sort_by_key(|(label, _)| label == "all");
    let mut ccdf_csv = csv_line(&["kind", "policy", "threshold", "probability"].map(String::from));
    let mut text = format!(
        "{:<20} {:<16} {:>8} {:>8} {:>8} {:>8}\n",
        "kind", "policy", "P>0.1", "P>0.2", "P>0.3", "P>0.4"
    );
    for key in &order {
        let (rows, n) = &sums[key];
        let avg: Vec<(f64, f64)> = rows.iter().map(|r| (r.threshold, r.probability / *n as f64)).collect();
        for (t, p) in &avg {
            ccdf_csv += &csv_line(&[key.0.clone(), key.1.clone(), t.to_string(), p.to_string()]);
        }
        let at = |t: f64| avg.iter().find(|r| (r.0 - t).abs() < 1e-9).map_or(f64::NAN, |r| r.1);
        let _ = writeln!(
            text,
            "{:<20} {:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            key.0,
            key.1,
            at(0.1),
            at(0.2),
            at(0.3),
            at(0.4)
        );
    }
    let report_dir = dir.join("report");
    create_dir(&report_dir)?;
    let mut out = CommandOutput {
        text,
        ..CommandOutput::default()
    };
    write_file(report_dir.join("speedups_by_kind.csv"), &speed_csv, &mut out.files)?;
    write_file(report_dir.join("hw_ccdf_by_kind.csv"), &ccdf_csv, &mut out.files)?;
    Ok(out)
}
