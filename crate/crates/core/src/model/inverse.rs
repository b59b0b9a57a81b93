//! Recovering isolated-execution stacks from a pair's co-run measurements.
//!
//! Per category, the two measured values `m_i`, `m_j` give the system
//!
//! ```text
//! m_i = a + b x + g y + r x y
//! m_j = a + b y + g x + r x y
//! ```
//!
//! Subtracting the equations gives `x - y = (m_i - m_j) / (b - g)`, which
//! turns the first equation into a quadratic in `x`. When `b == g` the
//! system only has solutions for `m_i == m_j`, and the symmetric one
//! (`x == y`) is returned. Damped Newton covers what is left.

use super::{CategoryModel, ModelError, RegressionModel};
use crate::stack::{CategoryValues, IscStack, StackKind};

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 100;
const BOX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSolution {
    /// Estimated isolated value of the first application.
    pub x: f64,
    /// Estimated isolated value of its co-runner.
    pub y: f64,
}

/// Solves one category. Returns `None` when no real solution could be found.
pub fn invert_category(model: &CategoryModel, m_i: f64, m_j: f64) -> Option<InverseSolution> {
    let CategoryModel {
        alpha: a,
        beta: b,
        gamma: g,
        rho: r,
        ..
    } = *model;
    let scale = b.abs().max(g.abs()).max(r.abs()).max(1e-300);

    if g == 0.0 && r == 0.0 {
        if b == 0.0 {
            return None;
        }
        return Some(InverseSolution {
            x: (m_i - a) / b,
            y: (m_j - a) / b,
        });
    }

    if (b - g).abs() > 1e-12 * scale {
        let d = (m_i - m_j) / (b - g);
        let qa = r;
        let qb = b + g - r * d;
        let qc = a - g * d - m_i;
        let roots = quadratic_roots(qa, qb, qc, scale);
        let best = roots
            .into_iter()
            .map(|x| InverseSolution { x, y: x - d })
            .filter(|s| s.x.is_finite() && s.y.is_finite())
            .min_by(|p, q| {
                let key = |s: &InverseSolution| (box_distance(s), (s.x - m_i).powi(2) + (s.y - m_j).powi(2));
                key(p).partial_cmp(&key(q)).unwrap_or(std::cmp::Ordering::Equal)
            });
        if best.is_some() {
            return best;
        }
    }

    if (m_i - m_j).abs() <= NEWTON_TOL {
        let m = 0.5 * (m_i + m_j);
        let best = quadratic_roots(r, b + g, a - m, scale)
            .into_iter()
            .filter(|x| x.is_finite())
            .map(|x| InverseSolution { x, y: x })
            .min_by(|p, q| {
                let key = |s: &InverseSolution| (box_distance(s), (s.x - m).abs());
                key(p).partial_cmp(&key(q)).unwrap_or(std::cmp::Ordering::Equal)
            });
        if best.is_some() {
            return best;
        }
    }

    newton(model, m_i, m_j)
}

fn box_distance(s: &InverseSolution) -> f64 {
    let out = |v: f64| {
        if v < -BOX_TOL {
            -v
        } else if v > 1.0 + BOX_TOL {
            v - 1.0
        } else {
            0.0
        }
    };
    out(s.x) + out(s.y)
}

fn quadratic_roots(a: f64, b: f64, c: f64, scale: f64) -> Vec<f64> {
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc > -1e-14 * b * b {
            disc = 0.0;
        } else {
            return Vec::new();
        }
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn newton(model: &CategoryModel, m_i: f64, m_j: f64) -> Option<InverseSolution> {
    let residual = |x: f64, y: f64| (model.evaluate(x, y) - m_i, model.evaluate(y, x) - m_j);
    let norm = |(u, v): (f64, f64)| u.hypot(v);
    let (mut x, mut y) = (m_i.clamp(0.0, 1.0), m_j.clamp(0.0, 1.0));
    let mut res = residual(x, y);
    for _ in 0..NEWTON_MAX_ITER {
        if norm(res) <= NEWTON_TOL {
            return Some(InverseSolution { x, y });
        }
        let (b, g, r) = (model.beta, model.gamma, model.rho);
        let j11 = b + r * y;
        let j12 = g + r * x;
        let j21 = g + r * y;
        let j22 = b + r * x;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-15 {
            return None;
        }
        let dx = (res.0 * j22 - res.1 * j12) / det;
        let dy = (j11 * res.1 - j21 * res.0) / det;
        let mut step = 1.0;
        loop {
            let (nx, ny) = (x - step * dx, y - step * dy);
            let nres = residual(nx, ny);
            if norm(nres) < norm(res) {
                x = nx;
                y = ny;
                res = nres;
                break;
            }
            step *= 0.5;
            if step < 1e-6 {
                return None;
            }
        }
    }
    (norm(res) <= NEWTON_TOL).then_some(InverseSolution { x, y })
}

/// Isolated-execution estimates for a co-running pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseEstimate {
    /// Per-category solutions before clamping and normalization.
    pub raw_i: CategoryValues,
    pub raw_j: CategoryValues,
    /// Clamped and normalized estimates.
    pub st_i: IscStack,
    pub st_j: IscStack,
    /// Set when some category had no solution; the estimates are then the
    /// normalized measurements.
    pub fallback: bool,
}

/// Inverts the model on raw per-category values (which need not sum to 1).
pub fn invert_values(model: &RegressionModel, smt_i: &CategoryValues, smt_j: &CategoryValues) -> InverseEstimate {
    let kind = model.kind();
    let mut raw_i = CategoryValues::default();
    let mut raw_j = CategoryValues::default();
    let mut failed = false;
    for m in model.categories() {
        match invert_category(m, smt_i.get(m.category), smt_j.get(m.category)) {
            Some(sol) => {
                raw_i.set(m.category, sol.x);
                raw_j.set(m.category, sol.y);
            }
            None => failed = true,
        }
    }
    let clamp = |v: &CategoryValues| {
        let mut out = *v;
        for x in out.0.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
        out
    };
    let estimate = |raw: &CategoryValues, measured: &CategoryValues| {
        IscStack::normalized(kind, &clamp(raw)).or_else(|| IscStack::normalized(kind, measured))
    };
    if !failed {
        if let (Some(st_i), Some(st_j)) = (estimate(&raw_i, smt_i), estimate(&raw_j, smt_j)) {
            return InverseEstimate {
                raw_i,
                raw_j,
                st_i,
                st_j,
                fallback: false,
            };
        }
    }
    InverseEstimate {
        raw_i: *smt_i,
        raw_j: *smt_j,
        st_i: measured_stack(kind, smt_i),
        st_j: measured_stack(kind, smt_j),
        fallback: true,
    }
}

fn measured_stack(kind: StackKind, v: &CategoryValues) -> IscStack {
    IscStack::normalized(kind, v).unwrap_or(match kind {
        StackKind::Isc3 => IscStack::isc3(0.0, 0.0, 1.0),
        StackKind::Isc4 => IscStack::isc4(0.0, 0.0, 0.0, 1.0),
    })
}

/// Estimates both applications' isolated stacks from the stacks measured
/// while they shared a core.
pub fn invert_to_st(
    model: &RegressionModel,
    smt_i: &IscStack,
    smt_j: &IscStack,
) -> Result<InverseEstimate, ModelError> {
    for s in [smt_i, smt_j] {
        if s.kind != model.kind() {
            return Err(ModelError::KindMismatch {
                expected: model.kind(),
                found: s.kind,
            });
        }
    }
    Ok(invert_values(model, &smt_i.values(), &smt_j.values()))
}
