//! Counter samples and ISC (instructions and stalls cycles) stacks.
//!
//! A stack is built at the dispatch stage from five PMU events: the dispatch
//! category counts full-dispatch-equivalent cycles, the two stall categories
//! count frontend and backend stall cycles. The raw categories rarely add up
//! to the measured cycles, so every raw stack goes through one of the
//! expansion (LT100) or reduction (GT100) methods before it is used.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dispatch width of the ThunderX2 core.
pub const DEFAULT_DISPATCH_WIDTH: u32 = 4;

/// Raw stacks whose sum is within this distance of 1 are left untouched.
pub const UNIT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub u32);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One quantum's raw event counts for one application.
///
/// Counts are kept as `f64` so that synthesized samples carry exact stack
/// fractions; traces written by `perf` hold integers, which convert losslessly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterSample {
    pub app_id: AppId,
    pub quantum_index: u64,
    pub cpu_cycles: f64,
    pub stall_frontend: f64,
    pub stall_backend: f64,
    pub inst_retired: f64,
    pub inst_spec: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StackError {
    #[error("sample for app {app} quantum {quantum} has no cycles")]
    ZeroCycles { app: AppId, quantum: u64 },
    #[error("sample for app {app} quantum {quantum} has a negative or non-finite `{field}` count")]
    BadCount {
        app: AppId,
        quantum: u64,
        field: &'static str,
    },
    #[error("dispatch width must be at least 1")]
    ZeroWidth,
}

impl CounterSample {
    pub fn validate(&self) -> Result<(), StackError> {
        let fields = [
            ("cpu_cycles", self.cpu_cycles),
            ("stall_frontend", self.stall_frontend),
            ("stall_backend", self.stall_backend),
            ("inst_retired", self.inst_retired),
            ("inst_spec", self.inst_spec),
        ];
        for (field, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(StackError::BadCount {
                    app: self.app_id,
                    quantum: self.quantum_index,
                    field,
                });
            }
        }
        if self.cpu_cycles <= 0.0 {
            return Err(StackError::ZeroCycles {
                app: self.app_id,
                quantum: self.quantum_index,
            });
        }
        Ok(())
    }

    /// Committed instructions per cycle.
    pub fn ipc(&self) -> f64 {
        if self.cpu_cycles > 0.0 {
            self.inst_retired / self.cpu_cycles
        } else {
            0.0
        }
    }
}

/// Unadjusted category fractions; may sum to less or more than 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStack {
    pub dispatch: f64,
    pub frontend: f64,
    pub backend: f64,
}

impl RawStack {
    pub fn new(dispatch: f64, frontend: f64, backend: f64) -> Self {
        Self {
            dispatch,
            frontend,
            backend,
        }
    }

    pub fn sum(&self) -> f64 {
        self.dispatch + self.frontend + self.backend
    }
}

pub fn build_raw_stack(sample: &CounterSample, dispatch_width: u32) -> Result<RawStack, StackError> {
    if dispatch_width == 0 {
        return Err(StackError::ZeroWidth);
    }
    sample.validate()?;
    let cycles = sample.cpu_cycles;
    Ok(RawStack {
        dispatch: sample.inst_spec / (f64::from(dispatch_width) * cycles),
        frontend: sample.stall_frontend / cycles,
        backend: sample.stall_backend / cycles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StackKind {
    #[serde(rename = "ISC3")]
    Isc3,
    #[serde(rename = "ISC4")]
    Isc4,
}

impl StackKind {
    pub fn categories(self) -> &'static [Category] {
        match self {
            StackKind::Isc3 => &Category::ALL[..3],
            StackKind::Isc4 => &Category::ALL,
        }
    }
}

impl fmt::Display for StackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StackKind::Isc3 => "ISC3",
            StackKind::Isc4 => "ISC4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Dispatch,
    Frontend,
    Backend,
    HorizontalWaste,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Dispatch,
        Category::Frontend,
        Category::Backend,
        Category::HorizontalWaste,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Dispatch => "dispatch",
            Category::Frontend => "frontend",
            Category::Backend => "backend",
            Category::HorizontalWaste => "horizontal_waste",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-category values that are not required to form a valid stack, e.g.
/// model predictions or recovered isolated-execution estimates before
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryValues(pub [f64; 4]);

impl CategoryValues {
    pub fn get(&self, c: Category) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Category, v: f64) {
        self.0[c.index()] = v;
    }

    pub fn sum(&self, kind: StackKind) -> f64 {
        kind.categories().iter().map(|&c| self.get(c)).sum()
    }
}

/// An adjusted stack whose categories sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IscStack {
    pub kind: StackKind,
    pub dispatch: f64,
    pub frontend: f64,
    pub backend: f64,
    /// Always 0 for [`StackKind::Isc3`].
    pub horizontal_waste: f64,
}

impl IscStack {
    pub fn isc3(dispatch: f64, frontend: f64, backend: f64) -> Self {
        Self {
            kind: StackKind::Isc3,
            dispatch,
            frontend,
            backend,
            horizontal_waste: 0.0,
        }
    }

    pub fn isc4(dispatch: f64, frontend: f64, backend: f64, horizontal_waste: f64) -> Self {
        Self {
            kind: StackKind::Isc4,
            dispatch,
            frontend,
            backend,
            horizontal_waste,
        }
    }

    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Dispatch => self.dispatch,
            Category::Frontend => self.frontend,
            Category::Backend => self.backend,
            Category::HorizontalWaste => self.horizontal_waste,
        }
    }

    pub fn values(&self) -> CategoryValues {
        CategoryValues([self.dispatch, self.frontend, self.backend, self.horizontal_waste])
    }

    pub fn sum(&self) -> f64 {
        self.dispatch + self.frontend + self.backend + self.horizontal_waste
    }

    /// Builds a stack of `kind` from arbitrary non-negative values: negatives
    /// are clamped to 0 and the result is scaled to sum 1. An all-zero input
    /// yields `None`.
    pub fn normalized(kind: StackKind, values: &CategoryValues) -> Option<Self> {
        let mut v = [0.0; 4];
        for &c in kind.categories() {
            let x = values.get(c);
            v[c.index()] = if x.is_finite() { x.max(0.0) } else { 0.0 };
        }
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Self {
            kind,
            dispatch: v[0] / total,
            frontend: v[1] / total,
            backend: v[2] / total,
            horizontal_waste: v[3] / total,
        })
    }

    /// The measured part of the stack; horizontal waste is never measured
    /// directly, so it is dropped.
    pub fn to_raw(&self) -> RawStack {
        RawStack::new(self.dispatch, self.frontend, self.backend)
    }

    /// Folds horizontal waste into backend, giving the three-category view.
    pub fn to_isc3(&self) -> Self {
        Self::isc3(self.dispatch, self.frontend, self.backend + self.horizontal_waste)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let fields = [self.dispatch, self.frontend, self.backend, self.horizontal_waste];
        fields.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0 + tol)
            && (self.sum() - 1.0).abs() <= tol
            && (self.kind == StackKind::Isc4 || self.horizontal_waste == 0.0)
    }
}

/// How a raw stack below 100% of cycles is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lt100Method {
    /// Unaccounted cycles are assigned to backend (three categories).
    #[serde(rename = "A_BE")]
    AssignBackend,
    /// Unaccounted cycles become the horizontal-waste category.
    #[serde(rename = "ISC4")]
    HorizontalWaste,
}

/// How a raw stack above 100% of cycles is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gt100Method {
    #[serde(rename = "NORMALIZE")]
    Normalize,
    #[serde(rename = "REDUCE_FE")]
    ReduceFrontend,
    #[serde(rename = "REDUCE_FEBE")]
    ReduceFrontendBackend,
}

/// How `REDUCE_FEBE` splits the excess between the two stall categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcessSplit {
    /// Proportional to the frontend and backend magnitudes.
    #[default]
    Weighted,
    /// Half of the excess from each category.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackPolicy {
    pub lt100: Lt100Method,
    pub gt100: Gt100Method,
    #[serde(default)]
    pub split: ExcessSplit,
}

impl StackPolicy {
    pub const fn new(lt100: Lt100Method, gt100: Gt100Method) -> Self {
        Self {
            lt100,
            gt100,
            split: ExcessSplit::Weighted,
        }
    }

    pub fn output_kind(&self) -> StackKind {
        match self.lt100 {
            Lt100Method::AssignBackend => StackKind::Isc3,
            Lt100Method::HorizontalWaste => StackKind::Isc4,
        }
    }
}

/// Expands or reduces a raw stack so that it accounts for exactly 100% of
/// the cycles.
pub fn adjust_stack(raw: &RawStack, policy: &StackPolicy) -> IscStack {
    let d = raw.dispatch.max(0.0);
    let fe = raw.frontend.max(0.0);
    let be = raw.backend.max(0.0);
    let sum = d + fe + be;
    let kind = policy.output_kind();

    if (sum - 1.0).abs() <= UNIT_SUM_TOLERANCE {
        return IscStack {
            kind,
            dispatch: d,
            frontend: fe,
            backend: be,
            horizontal_waste: 0.0,
        };
    }

    if sum < 1.0 {
        let missing = 1.0 - sum;
        return match policy.lt100 {
            Lt100Method::AssignBackend => IscStack::isc3(d, fe, be + missing),
            Lt100Method::HorizontalWaste => IscStack::isc4(d, fe, be, missing),
        };
    }

    let excess = sum - 1.0;
    let (fe, be) = match policy.gt100 {
        Gt100Method::Normalize => {
            return IscStack {
                kind,
                dispatch: d / sum,
                frontend: fe / sum,
                backend: be / sum,
                horizontal_waste: 0.0,
            }
        }
        Gt100Method::ReduceFrontend => {
            let fe_new = fe - excess;
            if fe_new >= 0.0 {
                (fe_new, be)
            } else {
                // residual excess comes out of backend
                (0.0, be + fe_new)
            }
        }
        Gt100Method::ReduceFrontendBackend => {
            let stalls = fe + be;
            if stalls <= 0.0 {
                (0.0, 0.0)
            } else {
                let (cut_fe, cut_be) = match policy.split {
                    ExcessSplit::Weighted => (excess * fe / stalls, excess * be / stalls),
                    ExcessSplit::Equal => {
                        let half = excess / 2.0;
                        if fe < half {
                            (fe, excess - fe)
                        } else if be < half {
                            (excess - be, be)
                        } else {
                            (half, half)
                        }
                    }
                };
                (fe - cut_fe, be - cut_be)
            }
        }
    };
    finish(kind, d, fe, be)
}

/// Clamps negatives and rescales when the reduction could not absorb the
/// whole excess.
fn finish(kind: StackKind, d: f64, fe: f64, be: f64) -> IscStack {
    let (d, fe, be) = (d.max(0.0), fe.max(0.0), be.max(0.0));
    let total = d + fe + be;
    if (total - 1.0).abs() <= UNIT_SUM_TOLERANCE {
        IscStack {
            kind,
            dispatch: d,
            frontend: fe,
            backend: be,
            horizontal_waste: 0.0,
        }
    } else {
        IscStack {
            kind,
            dispatch: d / total,
            frontend: fe / total,
            backend: be / total,
            horizontal_waste: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AppClass {
    FrontendBound,
    BackendBound,
    Other,
}

pub const FRONTEND_BOUND_THRESHOLD: f64 = 0.35;
pub const BACKEND_BOUND_THRESHOLD: f64 = 0.65;

/// Groups an application by its isolated-execution stack.
pub fn classify_app(stack: &IscStack) -> AppClass {
    if stack.frontend > FRONTEND_BOUND_THRESHOLD {
        AppClass::FrontendBound
    } else if stack.backend > BACKEND_BOUND_THRESHOLD {
        AppClass::BackendBound
    } else {
        AppClass::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample(cycles: f64, spec: f64, fe: f64, be: f64) -> CounterSample {
        CounterSample {
            app_id: AppId(0),
            quantum_index: 0,
            cpu_cycles: cycles,
            stall_frontend: fe,
            stall_backend: be,
            inst_retired: 0.0,
            inst_spec: spec,
        }
    }

    const A_BE_N: StackPolicy = StackPolicy::new(Lt100Method::AssignBackend, Gt100Method::Normalize);
    const ISC4_N: StackPolicy = StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::Normalize);
    const ISC4_FE: StackPolicy = StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::ReduceFrontend);
    const ISC4_FEBE: StackPolicy = StackPolicy::new(Lt100Method::HorizontalWaste, Gt100Method::ReduceFrontendBackend);

    fn all_policies() -> Vec<StackPolicy> {
        let mut out = Vec::new();
        for lt in [Lt100Method::AssignBackend, Lt100Method::HorizontalWaste] {
            for gt in [
                Gt100Method::Normalize,
                Gt100Method::ReduceFrontend,
                Gt100Method::ReduceFrontendBackend,
            ] {
                for split in [ExcessSplit::Weighted, ExcessSplit::Equal] {
                    out.push(StackPolicy {
                        lt100: lt,
                        gt100: gt,
                        split,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn raw_stack_examples() {
        let r = build_raw_stack(&sample(1000.0, 2000.0, 300.0, 400.0), 4).unwrap();
        assert_abs_diff_eq!(r.dispatch, 0.5);
        assert_abs_diff_eq!(r.frontend, 0.3);
        assert_abs_diff_eq!(r.backend, 0.4);
        assert_abs_diff_eq!(r.sum(), 1.2, epsilon = 1e-12);

        let r = build_raw_stack(&sample(1000.0, 1200.0, 200.0, 300.0), 4).unwrap();
        assert_abs_diff_eq!(r.dispatch, 0.3);
        assert_abs_diff_eq!(r.frontend, 0.2);
        assert_abs_diff_eq!(r.backend, 0.3);
        assert_abs_diff_eq!(r.sum(), 0.8, epsilon = 1e-12);

        let r = build_raw_stack(&sample(1000.0, 0.0, 0.0, 0.0), 4).unwrap();
        assert_eq!(r, RawStack::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_cycles_rejected() {
        let err = build_raw_stack(&sample(0.0, 10.0, 1.0, 1.0), 4).unwrap_err();
        assert!(matches!(err, StackError::ZeroCycles { .. }));
        assert_eq!(
            build_raw_stack(&sample(10.0, 1.0, 1.0, 1.0), 0).unwrap_err(),
            StackError::ZeroWidth
        );
        assert!(matches!(
            build_raw_stack(&sample(10.0, 1.0, -1.0, 1.0), 4).unwrap_err(),
            StackError::BadCount {
                field: "stall_frontend",
                ..
            }
        ));
    }

    #[test]
    fn lt100_examples() {
        let raw = RawStack::new(0.3, 0.2, 0.3);
        let s = adjust_stack(&raw, &A_BE_N);
        assert_eq!(s.kind, StackKind::Isc3);
        assert_abs_diff_eq!(s.dispatch, 0.3);
        assert_abs_diff_eq!(s.frontend, 0.2);
        assert_abs_diff_eq!(s.backend, 0.5, epsilon = 1e-12);
        assert_eq!(s.horizontal_waste, 0.0);

        let s = adjust_stack(&raw, &ISC4_N);
        assert_eq!(s.kind, StackKind::Isc4);
        assert_eq!((s.dispatch, s.frontend, s.backend), (0.3, 0.2, 0.3));
        assert_abs_diff_eq!(s.horizontal_waste, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn gt100_examples() {
        let raw = RawStack::new(0.5, 0.3, 0.4);
        let s = adjust_stack(&raw, &ISC4_N);
        assert_abs_diff_eq!(s.dispatch, 0.5 / 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dispatch, 0.41667, epsilon = 1e-5);
        assert_abs_diff_eq!(s.frontend, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.backend, 0.33333, epsilon = 1e-5);
        assert_eq!(s.horizontal_waste, 0.0);

        let s = adjust_stack(&raw, &ISC4_FE);
        assert_eq!(s.dispatch, 0.5);
        assert_abs_diff_eq!(s.frontend, 0.1, epsilon = 1e-12);
        assert_eq!(s.backend, 0.4);

        let s = adjust_stack(&raw, &ISC4_FEBE);
        assert_eq!(s.dispatch, 0.5);
        assert_abs_diff_eq!(s.frontend, 0.21429, epsilon = 1e-5);
        assert_abs_diff_eq!(s.backend, 0.28571, epsilon = 1e-5);
        // independent check: remaining stall share equals 1 - dispatch and
        // keeps the frontend:backend ratio of the measurement
        assert_abs_diff_eq!(s.frontend + s.backend, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.frontend / s.backend, 0.3 / 0.4, epsilon = 1e-12);
    }

    #[test]
    fn equal_split_variant() {
        let policy = StackPolicy {
            split: ExcessSplit::Equal,
            ..ISC4_FEBE
        };
        let s = adjust_stack(&RawStack::new(0.5, 0.3, 0.4), &policy);
        assert_abs_diff_eq!(s.frontend, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.backend, 0.3, epsilon = 1e-12);
        // frontend too small for half the excess
        let s = adjust_stack(&RawStack::new(0.6, 0.05, 0.55), &policy);
        assert_abs_diff_eq!(s.frontend, 0.0);
        assert_abs_diff_eq!(s.backend, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn reduce_fe_spills_into_backend() {
        let s = adjust_stack(&RawStack::new(0.7, 0.1, 0.5), &ISC4_FE);
        assert_eq!(s.dispatch, 0.7);
        assert_eq!(s.frontend, 0.0);
        assert_abs_diff_eq!(s.backend, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn dispatch_alone_over_one_is_renormalized() {
        for p in all_policies() {
            let s = adjust_stack(&RawStack::new(1.5, 0.2, 0.1), &p);
            assert!(s.is_valid(1e-9), "{p:?} -> {s:?}");
        }
        let s = adjust_stack(&RawStack::new(1.5, 0.2, 0.1), &ISC4_FE);
        assert_eq!(s.dispatch, 1.0);
    }

    #[test]
    fn empty_raw_stack() {
        let zero = RawStack::new(0.0, 0.0, 0.0);
        assert_eq!(adjust_stack(&zero, &A_BE_N).backend, 1.0);
        assert_eq!(adjust_stack(&zero, &ISC4_N).horizontal_waste, 1.0);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_app(&IscStack::isc3(0.2, 0.4, 0.4)), AppClass::FrontendBound);
        assert_eq!(classify_app(&IscStack::isc3(0.2, 0.1, 0.7)), AppClass::BackendBound);
        assert_eq!(classify_app(&IscStack::isc3(0.5, 0.2, 0.3)), AppClass::Other);
        assert_eq!(classify_app(&IscStack::isc3(0.0, 0.35, 0.65)), AppClass::Other);
    }

    fn raw_strategy() -> impl Strategy<Value = RawStack> {
        (0.0..1.2f64, 0.0..0.8f64, 0.0..1.0f64).prop_map(|(d, f, b)| RawStack::new(d, f, b))
    }

    proptest! {
        #[test]
        fn adjusted_stacks_sum_to_one(raw in raw_strategy()) {
            for p in all_policies() {
                let s = adjust_stack(&raw, &p);
                prop_assert!(s.is_valid(1e-9), "{:?} {:?} -> {:?}", raw, p, s);
            }
        }

        #[test]
        fn adjust_is_idempotent(raw in raw_strategy()) {
            for p in all_policies() {
                let once = adjust_stack(&raw, &p);
                let twice = adjust_stack(&once.to_raw(), &p);
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn normalize_keeps_ratios(raw in raw_strategy()) {
            prop_assume!(raw.sum() > 1.0 + UNIT_SUM_TOLERANCE);
            let s = adjust_stack(&raw, &ISC4_N);
            let pairs = [
                (raw.dispatch, raw.frontend, s.dispatch, s.frontend),
                (raw.dispatch, raw.backend, s.dispatch, s.backend),
                (raw.frontend, raw.backend, s.frontend, s.backend),
            ];
            for (rc, rd, oc, od) in pairs {
                if rc > 1e-6 && rd > 1e-6 {
                    prop_assert!((oc / od - rc / rd).abs() <= 1e-9 * (rc / rd).max(1.0));
                }
            }
        }

        #[test]
        fn reduce_fe_leaves_dispatch_and_backend(raw in raw_strategy()) {
            prop_assume!(raw.sum() > 1.0 + UNIT_SUM_TOLERANCE && raw.frontend >= raw.sum() - 1.0);
            let s = adjust_stack(&raw, &ISC4_FE);
            prop_assert_eq!(s.dispatch.to_bits(), raw.dispatch.to_bits());
            prop_assert_eq!(s.backend.to_bits(), raw.backend.to_bits());
        }

        #[test]
        fn lt100_variants_agree(d in 0.0..1.0f64, f in 0.0..1.0f64, b in 0.0..1.0f64) {
            // scale into the simplex interior so the sum stays below one
            let t = 0.999 / (d + f + b + 1e-3);
            let raw = RawStack::new(d * t * 0.9, f * t * 0.9, b * t * 0.9);
            let a = adjust_stack(&raw, &A_BE_N);
            let h = adjust_stack(&raw, &ISC4_N);
            prop_assert_eq!(a.dispatch, h.dispatch);
            prop_assert_eq!(a.frontend, h.frontend);
            prop_assert!((a.backend - (h.backend + h.horizontal_waste)).abs() <= 1e-12);
        }

        #[test]
        fn frontend_threshold_is_strict(be in 0.0..0.65f64) {
            let d = 1.0 - FRONTEND_BOUND_THRESHOLD - be;
            prop_assume!(d >= 0.0);
            let s = IscStack::isc3(d, FRONTEND_BOUND_THRESHOLD, be);
            prop_assert_ne!(classify_app(&s), AppClass::FrontendBound);
            let s = IscStack::isc3(0.0, 1.0 - BACKEND_BOUND_THRESHOLD, BACKEND_BOUND_THRESHOLD);
            prop_assert_eq!(classify_app(&s), AppClass::Other);
        }
    }
}
