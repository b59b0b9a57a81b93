use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CategoryModel, ModelError, RegressionModel};
use crate::stack::{AppId, Category, IscStack, StackKind};

/// Terms of the design row `[1, x, y, x*y]`.
const TERMS: usize = 4;

/// One observation of application `i` co-running with `j`, together with
/// both applications' isolated stacks at the same point of progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub app_i: AppId,
    pub app_j: AppId,
    pub smt_quantum: u64,
    pub st_quantum_i: u64,
    pub st_quantum_j: u64,
    pub st_stack_i: IscStack,
    pub st_stack_j: IscStack,
    pub smt_stack_i: IscStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Drop terms whose removal raises the training MSE by less than
    /// `prune_threshold` (measured against the full four-term fit).
    pub prune: bool,
    pub prune_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            prune: false,
            prune_threshold: 1e-4,
        }
    }
}

fn row(x: f64, y: f64) -> [f64; TERMS] {
    [1.0, x, y, x * y]
}

/// Least squares over the active terms; inactive coefficients are zero.
fn solve(
    samples: &[(f64, f64, f64)],
    active: &[bool; TERMS],
    category: Category,
) -> Result<([f64; TERMS], f64), ModelError> {
    let cols: Vec<usize> = (0..TERMS).filter(|&t| active[t]).collect();
    let n = samples.len();
    let design = DMatrix::from_fn(n, cols.len(), |r, c| {
        let (x, y, _) = samples[r];
        row(x, y)[cols[c]]
    });
    let target = DVector::from_iterator(n, samples.iter().map(|s| s.2));

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv <= 1e-10 * max_sv {
        return Err(ModelError::RankDeficient(category));
    }
    let sol = svd
        .solve(&target, 0.0)
        .map_err(|_| ModelError::RankDeficient(category))?;

    let mut coef = [0.0; TERMS];
    for (c, &t) in cols.iter().enumerate() {
        coef[t] = sol[c];
    }
    Ok((coef, mse(samples, &coef)))
}

fn mse(samples: &[(f64, f64, f64)], coef: &[f64; TERMS]) -> f64 {
    let sse: f64 = samples
        .iter()
        .map(|&(x, y, m)| {
            let r = row(x, y);
            let pred: f64 = r.iter().zip(coef).map(|(a, b)| a * b).sum();
            (pred - m).powi(2)
        })
        .sum();
    sse / samples.len() as f64
}

/// Fits one category from `(own_st, corunner_st, observed_smt)` triples.
pub fn fit_category(
    category: Category,
    samples: &[(f64, f64, f64)],
    options: &FitOptions,
) -> Result<CategoryModel, ModelError> {
    if samples.len() < TERMS {
        return Err(ModelError::TooFewSamples {
            category,
            found: samples.len(),
            needed: TERMS,
        });
    }
    let mut active = [true; TERMS];
    let (mut coef, full_mse) = solve(samples, &active, category)?;
    let mut current_mse = full_mse;

    if options.prune {
        loop {
            let mut best: Option<(usize, [f64; TERMS], f64)> = None;
            for t in (0..TERMS).filter(|&t| active[t]) {
                if active.iter().filter(|&&a| a).count() == 1 {
                    break;
                }
                let mut trial = active;
                trial[t] = false;
                let Ok((c, e)) = solve(samples, &trial, category) else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| e < b.2) {
                    best = Some((t, c, e));
                }
            }
            match best {
                Some((t, c, e)) if e - full_mse < options.prune_threshold => {
                    active[t] = false;
                    coef = c;
                    current_mse = e;
                }
                _ => break,
            }
        }
    }

    Ok(CategoryModel {
        category,
        alpha: coef[0],
        beta: coef[1],
        gamma: coef[2],
        rho: coef[3],
        mse: current_mse,
    })
}

/// Fits one bilinear model per category of `kind`.
pub fn fit(kind: StackKind, pairs: &[TrainingPair], options: &FitOptions) -> Result<RegressionModel, ModelError> {
    for p in pairs {
        for s in [&p.st_stack_i, &p.st_stack_j, &p.smt_stack_i] {
            if s.kind != kind {
                return Err(ModelError::KindMismatch {
                    expected: kind,
                    found: s.kind,
                });
            }
        }
    }
    let mut cats = Vec::new();
    for &c in kind.categories() {
        let samples: Vec<_> = pairs
            .iter()
            .map(|p| (p.st_stack_i.get(c), p.st_stack_j.get(c), p.smt_stack_i.get(c)))
            .collect();
        cats.push(fit_category(c, &samples, options)?);
    }
    let mut model = RegressionModel::new(kind, cats)?;
    model
        .training_meta
        .insert("training_pairs".into(), pairs.len().to_string());
    model.training_meta.insert("pruned".into(), options.prune.to_string());
    if options.prune {
        model
            .training_meta
            .insert("prune_threshold".into(), options.prune_threshold.to_string());
    }
    Ok(model)
}
