//! Entropic optimal transport with log-domain Sinkhorn iterations.
//!
//! Potentials `f`, `g` define the plan `π_ij = exp((f_i + g_j - C_ij) / ε)`.
//! Small `ε` is reached through a short geometric ε-schedule that warm-starts
//! each stage from the previous potentials. The returned plan is projected
//! onto the transport polytope (row/column down-scaling plus a rank-one
//! correction) so it is exactly feasible and its cost never undercuts the
//! exact optimum.

use ndarray::Array2;

use super::{check_shapes, CostMatrix, OtResult, TransportPlan, Weights};
use crate::error::{Result, TetotError};

/// Solver settings; `epsilon = None` means `0.01 · mean(C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Bound on the L1 marginal violation before rounding.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { epsilon: None, max_iter: 10_000, tol: 1e-9 }
    }
}

impl SinkhornParams {
    pub fn resolve_epsilon(&self, cost: &CostMatrix) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            let mean = cost.mean();
            if mean > 0.0 {
                0.01 * mean
            } else {
                1e-3
            }
        })
    }

    pub fn solve(&self, cost: &CostMatrix, a: &Weights, b: &Weights) -> Result<OtResult> {
        solve_sinkhorn(cost, a, b, self.resolve_epsilon(cost), self.max_iter, self.tol)
    }
}

const STAGE_FACTOR: f64 = 0.25;
const STAGE_ITERS: usize = 200;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln_weight(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

struct LogSinkhorn<'a> {
    cost: &'a Array2<f64>,
    cost_t: Array2<f64>,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    a: &'a [f64],
    f: Vec<f64>,
    g: Vec<f64>,
    lse_rows: Vec<f64>,
}

impl LogSinkhorn<'_> {
    /// `LSE_j((g_j - C_ij)/ε)` for every row, then the L1 row-marginal error
    /// of the current plan.
    fn row_pass(&mut self, eps: f64) -> f64 {
        let mut err = 0.0;
        for (i, row) in self.cost.rows().into_iter().enumerate() {
            let lse = log_sum_exp(row.iter().zip(&self.g).map(|(c, g)| (g - c) / eps));
            self.lse_rows[i] = lse;
            let mass = if self.f[i] == f64::NEG_INFINITY {
                0.0
            } else {
                (self.f[i] / eps + lse).exp()
            };
            err += (mass - self.a[i]).abs();
        }
        err
    }

    fn update_f(&mut self, eps: f64) {
        for (i, f) in self.f.iter_mut().enumerate() {
            *f = eps * (self.log_a[i] - self.lse_rows[i]);
        }
    }

    fn update_g(&mut self, eps: f64) {
        for (j, col) in self.cost_t.rows().into_iter().enumerate() {
            let lse = log_sum_exp(col.iter().zip(&self.f).map(|(c, f)| (f - c) / eps));
            self.g[j] = eps * (self.log_b[j] - lse);
        }
    }

    /// Runs up to `budget` iterations at `eps`; returns (iterations, converged).
    fn run(&mut self, eps: f64, budget: usize, tol: f64) -> (usize, bool) {
        for it in 0..budget {
            self.update_g(eps);
            let err = self.row_pass(eps);
            if err <= tol {
                return (it + 1, true);
            }
            self.update_f(eps);
        }
        (budget, false)
    }

    fn plan(&self, eps: f64) -> Array2<f64> {
        Array2::from_shape_fn(self.cost.dim(), |(i, j)| {
            let z = (self.f[i] + self.g[j] - self.cost[(i, j)]) / eps;
            if z == f64::NEG_INFINITY {
                0.0
            } else {
                z.exp()
            }
        })
    }
}

/// Projects a nonnegative matrix onto the couplings of `a` and `b`.
fn round_to_feasible(mut p: Array2<f64>, a: &[f64], b: &[f64]) -> Array2<f64> {
    for (mut row, &ai) in p.rows_mut().into_iter().zip(a) {
        let s = row.sum();
        if s > ai {
            row.mapv_inplace(|v| v * (ai / s));
        }
    }
    for (mut col, &bj) in p.columns_mut().into_iter().zip(b) {
        let s = col.sum();
        if s > bj {
            col.mapv_inplace(|v| v * (bj / s));
        }
    }
    let err_r: Vec<f64> = p.rows().into_iter().zip(a).map(|(r, &ai)| (ai - r.sum()).max(0.0)).collect();
    let err_c: Vec<f64> = p.columns().into_iter().zip(b).map(|(c, &bj)| (bj - c.sum()).max(0.0)).collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for ((i, j), v) in p.indexed_iter_mut() {
            *v += err_r[i] * err_c[j] / total;
        }
    }
    p
}

/// Entropic OT at regularization `epsilon`.
///
/// Hitting `max_iter` is reported through `converged = false`, not an error.
pub fn solve_sinkhorn(
    cost: &CostMatrix,
    a: &Weights,
    b: &Weights,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<OtResult> {
    check_shapes(cost, a, b)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(TetotError::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(TetotError::Input(format!("tol must be positive, got {tol}")));
    }
    let c = cost.entries();
    let (m, n) = c.dim();
    let mut state = LogSinkhorn {
        cost: c,
        cost_t: c.t().as_standard_layout().into_owned(),
        log_a: a.values().iter().copied().map(ln_weight).collect(),
        log_b: b.values().iter().copied().map(ln_weight).collect(),
        a: a.values(),
        f: vec![0.0; m],
        g: vec![0.0; n],
        lse_rows: vec![0.0; m],
    };
    for (f, &la) in state.f.iter_mut().zip(&state.log_a) {
        if la == f64::NEG_INFINITY {
            *f = la;
        }
    }

    let max_cost = c.iter().copied().fold(0.0f64, f64::max);
    let mut stage_eps = max_cost.max(epsilon);
    let mut used = 0usize;
    while stage_eps > epsilon && used < max_iter {
        let budget = STAGE_ITERS.min(max_iter - used);
        used += state.run(stage_eps, budget, tol.max(1e-6)).0;
        stage_eps = (stage_eps * STAGE_FACTOR).max(epsilon);
    }
    let (iters, converged) = state.run(epsilon, max_iter.saturating_sub(used).max(1), tol);
    used += iters;
    if !converged {
        log::warn!("sinkhorn did not reach tol {tol:e} within {max_iter} iterations (eps = {epsilon:e})");
    }

    let coupling = round_to_feasible(state.plan(epsilon), a.values(), b.values());
    let plan = TransportPlan::new(coupling);
    Ok(OtResult {
        cost: plan.cost(cost),
        plan,
        duals: None,
        iterations: used,
        solver_tag: "sinkhorn_log",
        converged,
    })
}
