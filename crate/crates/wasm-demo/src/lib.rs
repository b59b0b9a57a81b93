//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function takes plain numbers or a JSON string and returns
//! a JSON string; errors become JavaScript exceptions.

use serde::{Deserialize, Serialize};
use synpa::matching::{min_weight_perfect_matching, PairGraph};
use synpa::model::RegressionModel;
use synpa::policy::{PolicyKind, SynpaVariant};
use synpa::stack::{adjust_stack, classify_app, Category, IscStack, RawStack};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
struct StackView {
    kind: &'static str,
    dispatch: f64,
    frontend: f64,
    backend: f64,
    horizontal_waste: f64,
    class: String,
}

impl From<&IscStack> for StackView {
    fn from(s: &IscStack) -> Self {
        Self {
            kind: match s.kind {
                synpa::stack::StackKind::Isc3 => "ISC3",
                synpa::stack::StackKind::Isc4 => "ISC4",
            },
            dispatch: s.dispatch,
            frontend: s.frontend,
            backend: s.backend,
            horizontal_waste: s.horizontal_waste,
            class: format!("{:?}", classify_app(s)),
        }
    }
}

fn variant(name: &str) -> Result<SynpaVariant, String> {
    match name.parse::<PolicyKind>() {
        Ok(PolicyKind::Synpa(v)) => Ok(v),
        _ => Err(format!("unknown SYNPA variant {name:?}")),
    }
}

fn raw(dispatch: f64, frontend: f64, backend: f64) -> Result<RawStack, String> {
    for (name, v) in [("dispatch", dispatch), ("frontend", frontend), ("backend", backend)] {
        if !v.is_finite() || v < 0.0 {
            return Err(format!("{name} must be a non-negative number"));
        }
    }
    Ok(RawStack::new(dispatch, frontend, backend))
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Builds the stack `variant` uses from raw counter fractions.
pub fn adjust(variant_name: &str, dispatch: f64, frontend: f64, backend: f64) -> Result<String, String> {
    let v = variant(variant_name)?;
    let stack = adjust_stack(&raw(dispatch, frontend, backend)?, &v.stack_policy());
    to_json(&StackView::from(&stack))
}

#[derive(Debug, Serialize)]
struct PairView {
    st_i: StackView,
    st_j: StackView,
    smt_i: Vec<(String, f64)>,
    smt_j: Vec<(String, f64)>,
    slowdown_i: f64,
    slowdown_j: f64,
}

/// Predicts two applications co-running, each given as raw
/// `[dispatch, frontend, backend]` fractions, with the reference model of
/// `variant`.
pub fn predict(variant_name: &str, app_i: [f64; 3], app_j: [f64; 3]) -> Result<String, String> {
    let v = variant(variant_name)?;
    let policy = v.stack_policy();
    let model = RegressionModel::thunderx2(v.kind());
    let si = adjust_stack(&raw(app_i[0], app_i[1], app_i[2])?, &policy);
    let sj = adjust_stack(&raw(app_j[0], app_j[1], app_j[2])?, &policy);
    let p = model.predict_pair(&si, &sj).map_err(|e| e.to_string())?;
    let cats = |values: &synpa::stack::CategoryValues| -> Vec<(String, f64)> {
        v.kind()
            .categories()
            .iter()
            .map(|&c: &Category| (c.name().to_string(), values.get(c)))
            .collect()
    };
    to_json(&PairView {
        st_i: StackView::from(&si),
        st_j: StackView::from(&sj),
        smt_i: cats(&p.smt_i),
        smt_j: cats(&p.smt_j),
        slowdown_i: p.slowdown_i,
        slowdown_j: p.slowdown_j,
    })
}

#[derive(Debug, Deserialize)]
struct AppInput {
    name: String,
    dispatch: f64,
    frontend: f64,
    backend: f64,
}

#[derive(Debug, Serialize)]
struct CorePair {
    core: usize,
    apps: [String; 2],
    predicted_slowdown: f64,
}

#[derive(Debug, Serialize)]
struct ScheduleView {
    pairs: Vec<CorePair>,
    total_slowdown: f64,
}

/// Pairs an even number of applications so that the predicted total
/// slowdown is minimal. `apps` is a JSON list of
/// `{"name", "dispatch", "frontend", "backend"}` objects.
pub fn schedule(variant_name: &str, apps: &str) -> Result<String, String> {
    let v = variant(variant_name)?;
    let apps: Vec<AppInput> = serde_json::from_str(apps).map_err(|e| format!("invalid application list: {e}"))?;
    if apps.len() < 2 || apps.len() % 2 == 1 {
        return Err(format!("need an even number of applications, got {}", apps.len()));
    }
    let model = RegressionModel::thunderx2(v.kind());
    let policy = v.stack_policy();
    let stacks = apps
        .iter()
        .map(|a| raw(a.dispatch, a.frontend, a.backend).map(|r| adjust_stack(&r, &policy)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut error = None;
    let graph = PairGraph::from_fn(apps.len(), |i, j| match model.predict_pair(&stacks[i], &stacks[j]) {
        Ok(p) => p.slowdown_i + p.slowdown_j,
        Err(e) => {
            error = Some(e.to_string());
            f64::NAN
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    let matching = min_weight_perfect_matching(&graph.map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let pairs = matching
        .pairs
        .iter()
        .enumerate()
        .map(|(core, &(i, j))| CorePair {
            core,
            apps: [apps[i].name.clone(), apps[j].name.clone()],
            predicted_slowdown: model
                .predict_pair(&stacks[i], &stacks[j])
                .map_or(f64::NAN, |p| p.slowdown_i + p.slowdown_j),
        })
        .collect();
    to_json(&ScheduleView {
        pairs,
        total_slowdown: matching.total_weight,
    })
}

#[wasm_bindgen(js_name = adjustStack)]
pub fn adjust_stack_js(variant: &str, dispatch: f64, frontend: f64, backend: f64) -> Result<String, JsError> {
    adjust(variant, dispatch, frontend, backend).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = predictPair)]
pub fn predict_pair_js(variant: &str, app_i: &[f64], app_j: &[f64]) -> Result<String, JsError> {
    let three = |v: &[f64]| -> Result<[f64; 3], JsError> {
        v.try_into()
            .map_err(|_| JsError::new("each application needs dispatch, frontend and backend"))
    };
    predict(variant, three(app_i)?, three(app_j)?).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = schedulePairs)]
pub fn schedule_js(variant: &str, apps: &str) -> Result<String, JsError> {
    schedule(variant, apps).map_err(|e| JsError::new(&e))
}
