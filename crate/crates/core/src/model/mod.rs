//! Per-category bilinear interference model.
//!
//! For each stack category `C`, the value observed for application `i` while
//! co-running with `j` is modelled from both applications' isolated values:
//!
//! ```text
//! smt_i = alpha + beta * st_i + gamma * st_j + rho * st_i * st_j
//! ```

mod align;
mod file;
mod fit;
mod inverse;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stack::{Category, CategoryValues, IscStack, StackKind};

pub use align::{align_profiles, build_training_pairs, map_to_st_quantum, ProfileAlignment};
pub use file::{load_model, model_from_json, model_to_json, save_model, ModelFileError, MODEL_SCHEMA_VERSION};
pub use fit::{fit, fit_category, FitOptions, TrainingPair};
pub use inverse::{invert_category, invert_to_st, invert_values, InverseEstimate, InverseSolution};

/// Slowdown reported when the predicted co-run dispatch rate is zero.
pub const DEFAULT_SLOWDOWN_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub category: Category,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Mean squared error on the training set.
    pub mse: f64,
}

impl CategoryModel {
    pub fn new(category: Category, alpha: f64, beta: f64, gamma: f64, rho: f64) -> Self {
        Self {
            category,
            alpha,
            beta,
            gamma,
            rho,
            mse: 0.0,
        }
    }

    pub fn identity(category: Category) -> Self {
        Self::new(category, 0.0, 1.0, 0.0, 0.0)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.rho]
    }

    /// The bilinear value without clamping.
    pub fn evaluate(&self, own: f64, other: f64) -> f64 {
        self.alpha + self.beta * own + self.gamma * other + self.rho * own * other
    }

    /// Predicted co-run value, clamped to `[0, 1]`.
    pub fn predict(&self, own: f64, other: f64) -> f64 {
        self.evaluate(own, other).clamp(0.0, 1.0)
    }

    fn check(&self) -> Result<(), ModelError> {
        let finite = self.coefficients().iter().all(|c| c.is_finite());
        if !finite || !(self.mse >= 0.0) {
            return Err(ModelError::BadCoefficients(self.category));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{kind} model needs exactly one entry for category `{category}`")]
    CategoryMismatch { kind: StackKind, category: Category },
    #[error("coefficients for `{0}` must be finite and the MSE non-negative")]
    BadCoefficients(Category),
    #[error("stack of kind {found} given to a {expected} model")]
    KindMismatch { expected: StackKind, found: StackKind },
    #[error("not enough training samples for `{category}`: {found} (need at least {needed})")]
    TooFewSamples {
        category: Category,
        found: usize,
        needed: usize,
    },
    #[error("design matrix for `{0}` is rank deficient")]
    RankDeficient(Category),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    kind: StackKind,
    categories: Vec<CategoryModel>,
    pub training_meta: BTreeMap<String, String>,
}

impl RegressionModel {
    /// Builds a model; `categories` must hold one entry per category of
    /// `kind`, in any order.
    pub fn new(kind: StackKind, categories: Vec<CategoryModel>) -> Result<Self, ModelError> {
        let mut ordered = Vec::with_capacity(kind.categories().len());
        for &c in kind.categories() {
            let mut matching = categories.iter().filter(|m| m.category == c);
            let (Some(m), None) = (matching.next(), matching.next()) else {
                return Err(ModelError::CategoryMismatch { kind, category: c });
            };
            m.check()?;
            ordered.push(*m);
        }
        if categories.len() != ordered.len() {
            let extra = categories
                .iter()
                .find(|m| !kind.categories().contains(&m.category))
                .map(|m| m.category)
                .unwrap_or(Category::HorizontalWaste);
            return Err(ModelError::CategoryMismatch { kind, category: extra });
        }
        Ok(Self {
            kind,
            categories: ordered,
            training_meta: BTreeMap::new(),
        })
    }

    pub fn identity(kind: StackKind) -> Self {
        let cats = kind.categories().iter().map(|&c| CategoryModel::identity(c)).collect();
        Self::new(kind, cats).expect("identity model is well formed")
    }

    /// Coefficients fitted on the Cavium ThunderX2 for the normalized
    /// three-category and four-category stacks.
    pub fn thunderx2(kind: StackKind) -> Self {
        use Category::*;
        let row = |c, a, b, g, r, mse| CategoryModel {
            category: c,
            alpha: a,
            beta: b,
            gamma: g,
            rho: r,
            mse,
        };
        let cats = match kind {
            StackKind::Isc3 => vec![
                row(Dispatch, 0.0072, 0.9060, 0.0044, 0.0314, 0.0021),
                row(Frontend, 0.2376, 1.4111, 0.0, 0.0, 0.00703),
                row(Backend, 0.2069, 0.3431, 1.4391, 0.0, 0.1583),
            ],
            StackKind::Isc4 => vec![
                row(Dispatch, 0.0070, 0.9090, 0.0021, 0.0312, 0.0021),
                row(Frontend, 0.2358, 1.4147, 0.0, 0.0, 0.00703),
                row(Backend, 0.0, 0.2401, 1.0654, 0.0, 0.0277),
                row(HorizontalWaste, 0.2899, 0.3306, 1.6111, 0.0, 0.0874),
            ],
        };
        let mut model = Self::new(kind, cats).expect("reference coefficients are well formed");
        model
            .training_meta
            .insert("source".into(), "ThunderX2 reference coefficients".into());
        model
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn categories(&self) -> &[CategoryModel] {
        &self.categories
    }

    pub fn category(&self, c: Category) -> Option<&CategoryModel> {
        self.categories.iter().find(|m| m.category == c)
    }

    /// Unclamped bilinear values for `own` co-running with `other`.
    pub fn evaluate_values(&self, own: &CategoryValues, other: &CategoryValues) -> CategoryValues {
        let mut out = CategoryValues::default();
        for m in &self.categories {
            out.set(m.category, m.evaluate(own.get(m.category), other.get(m.category)));
        }
        out
    }

    /// Clamped per-category predictions for `own` co-running with `other`.
    pub fn predict_values(&self, own: &CategoryValues, other: &CategoryValues) -> CategoryValues {
        let mut out = CategoryValues::default();
        for m in &self.categories {
            out.set(m.category, m.predict(own.get(m.category), other.get(m.category)));
        }
        out
    }

    pub fn predict_pair(&self, st_i: &IscStack, st_j: &IscStack) -> Result<PairPrediction, ModelError> {
        self.predict_pair_capped(st_i, st_j, DEFAULT_SLOWDOWN_CAP)
    }

    pub fn predict_pair_capped(
        &self,
        st_i: &IscStack,
        st_j: &IscStack,
        slowdown_cap: f64,
    ) -> Result<PairPrediction, ModelError> {
        for s in [st_i, st_j] {
            if s.kind != self.kind {
                return Err(ModelError::KindMismatch {
                    expected: self.kind,
                    found: s.kind,
                });
            }
        }
        let (vi, vj) = (st_i.values(), st_j.values());
        let smt_i = self.predict_values(&vi, &vj);
        let smt_j = self.predict_values(&vj, &vi);
        Ok(PairPrediction {
            slowdown_i: slowdown(st_i.dispatch, smt_i.get(Category::Dispatch), slowdown_cap),
            slowdown_j: slowdown(st_j.dispatch, smt_j.get(Category::Dispatch), slowdown_cap),
            smt_i,
            smt_j,
        })
    }
}

/// Predicted co-run behaviour of an application pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    /// Clamped per-category prediction for `i` given `j`. Not normalized.
    pub smt_i: CategoryValues,
    pub smt_j: CategoryValues,
    pub slowdown_i: f64,
    pub slowdown_j: f64,
}

/// Isolated over co-run dispatch rate; committed throughput follows the
/// dispatch category.
pub fn slowdown(st_dispatch: f64, smt_dispatch: f64, cap: f64) -> f64 {
    if smt_dispatch <= 0.0 {
        return cap;
    }
    (st_dispatch / smt_dispatch).min(cap)
}
