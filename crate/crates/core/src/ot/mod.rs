//! Discrete optimal transport between weighted point clouds.
//!
//! [`solve_exact`] returns an optimal coupling together with dual potentials
//! that certify optimality. [`solve_sinkhorn`] is the entropic alternative.
//! [`brute_force_oracle`] enumerates permutations and exists to check the
//! exact solver on small square problems.

mod network_simplex;
mod oracle;
mod sinkhorn;

use ndarray::Array2;

use crate::error::{Result, TetotError};

pub use oracle::brute_force_oracle;
pub use sinkhorn::{solve_sinkhorn, SinkhornParams};

use network_simplex::NetworkSimplex;

/// Pairwise ground costs, `m × n`, finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (m, n) = entries.dim();
        if m == 0 || n == 0 {
            return Err(TetotError::Input(format!("cost matrix must be non-empty, got {m}x{n}")));
        }
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TetotError::Input(format!(
                "cost entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self(entries.as_standard_layout().into_owned()))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(TetotError::Input("ragged cost rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let arr = Array2::from_shape_vec((rows.len(), n), flat)
            .map_err(|e| TetotError::Input(e.to_string()))?;
        Self::new(arr)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.t().as_standard_layout().into_owned())
    }

    pub fn mean(&self) -> f64 {
        self.0.sum() / self.0.len() as f64
    }

    fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("standard layout")
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// Validates and renormalizes `values`; the sum must be within
    /// [`Self::SUM_TOLERANCE`] of one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TetotError::Input("weights must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TetotError::Input(format!("weights must be finite and >= 0, found {v}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() >= Self::SUM_TOLERANCE {
            return Err(TetotError::Input(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self(values.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need n >= 1");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|&v| v == u)
    }
}

/// A coupling between two weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    coupling: Array2<f64>,
    /// Basic cells `(i, j)` of the final simplex basis; empty for Sinkhorn.
    basis: Vec<(usize, usize)>,
}

impl TransportPlan {
    pub fn new(coupling: Array2<f64>) -> Self {
        Self { coupling, basis: Vec::new() }
    }

    /// Product coupling `a bᵀ`.
    pub fn product(a: &Weights, b: &Weights) -> Self {
        let coupling = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a.0[i] * b.0[j]);
        Self::new(coupling)
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.coupling
    }

    pub fn coupling_mut(&mut self) -> &mut Array2<f64> {
        &mut self.coupling
    }

    pub fn basis(&self) -> &[(usize, usize)] {
        &self.basis
    }

    /// `⟨π, C⟩`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.coupling
            .iter()
            .zip(cost.entries().iter())
            .map(|(p, c)| p * c)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct OtResult {
    pub cost: f64,
    pub plan: TransportPlan,
    /// Potentials `(u, v)` with `u_i + v_j <= C_ij`, when the solver produces them.
    pub duals: Option<(Vec<f64>, Vec<f64>)>,
    pub iterations: usize,
    pub solver_tag: &'static str,
    /// False when an iterative solver hit its iteration cap.
    pub converged: bool,
}

impl OtResult {
    /// `aᵀu + bᵀv`, if duals are present.
    pub fn dual_objective(&self, a: &Weights, b: &Weights) -> Option<f64> {
        self.duals.as_ref().map(|(u, v)| {
            let du: f64 = u.iter().zip(a.values()).map(|(x, w)| x * w).sum();
            let dv: f64 = v.iter().zip(b.values()).map(|(x, w)| x * w).sum();
            du + dv
        })
    }
}

fn check_shapes(cost: &CostMatrix, a: &Weights, b: &Weights) -> Result<()> {
    let (m, n) = cost.dim();
    if a.len() != m || b.len() != n {
        return Err(TetotError::Input(format!(
            "weights of length {} and {} do not match a {m}x{n} cost matrix",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb): (f64, f64) = (a.values().iter().sum(), b.values().iter().sum());
    if (sa - sb).abs() > 1e-9 {
        return Err(TetotError::Input(format!("infeasible marginals: masses {sa} and {sb}")));
    }
    Ok(())
}

/// Exact optimal transport by the network simplex method.
///
/// With uniform marginals the supplies are scaled to the integers `n` and
/// `m`, so every flow is computed exactly in floating point; the reported
/// plan is the flow divided by `m·n`.
pub fn solve_exact(cost: &CostMatrix, a: &Weights, b: &Weights) -> Result<OtResult> {
    solve_exact_impl(cost, a, b, false)
}

pub(crate) fn solve_exact_impl(
    cost: &CostMatrix,
    a: &Weights,
    b: &Weights,
    check_tree: bool,
) -> Result<OtResult> {
    check_shapes(cost, a, b)?;
    let (m, n) = cost.dim();
    let integral = a.is_uniform() && b.is_uniform();
    let (supply, demand, scale) = if integral {
        (vec![n as f64; m], vec![m as f64; n], (m * n) as f64)
    } else {
        (a.values().to_vec(), b.values().to_vec(), 1.0)
    };
    let sol = NetworkSimplex::new(cost.as_slice(), &supply, &demand)
        .run(check_tree)
        .map_err(TetotError::Solver)?;
    if sol.artificial_flow > 1e-9 * scale {
        return Err(TetotError::Solver(format!(
            "infeasible: {} units left on artificial arcs",
            sol.artificial_flow / scale
        )));
    }
    let coupling = Array2::from_shape_vec((m, n), sol.flow)
        .expect("flow has m*n entries")
        .mapv_into(|f| f / scale);
    let plan = TransportPlan {
        coupling,
        basis: sol.basis.iter().map(|&e| (e / n, e % n)).collect(),
    };
    Ok(OtResult {
        cost: plan.cost(cost),
        plan,
        duals: Some((sol.u, sol.v)),
        iterations: sol.pivots,
        solver_tag: "network_simplex",
        converged: true,
    })
}

/// Nonnegativity and both marginal constraints, each within `tol`.
pub fn verify_plan(plan: &TransportPlan, a: &Weights, b: &Weights, tol: f64) -> bool {
    let c = plan.coupling();
    if c.dim() != (a.len(), b.len()) {
        return false;
    }
    if c.iter().any(|&p| p.is_nan() || p < -tol) {
        return false;
    }
    let rows_ok = c
        .rows()
        .into_iter()
        .zip(a.values())
        .all(|(r, &w)| (r.sum() - w).abs() <= tol);
    let cols_ok = c
        .columns()
        .into_iter()
        .zip(b.values())
        .all(|(col, &w)| (col.sum() - w).abs() <= tol);
    rows_ok && cols_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn diagonal_and_anti_diagonal_zero_cost() {
        let w = Weights::uniform(2);
        let r = solve_exact(&cm(&[&[0., 1.], &[1., 0.]]), &w, &w).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.plan.coupling(), &array![[0.5, 0.0], [0.0, 0.5]]);
        let r = solve_exact(&cm(&[&[1., 0.], &[0., 1.]]), &w, &w).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.plan.coupling(), &array![[0.0, 0.5], [0.5, 0.0]]);
    }

    #[test]
    fn matches_oracle_on_random_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Array2::from_shape_fn((5, 5), |_| rng.random::<f64>());
        let c = CostMatrix::new(c).unwrap();
        let w = Weights::uniform(5);
        let exact = solve_exact_impl(&c, &w, &w, true).unwrap().cost;
        let oracle = brute_force_oracle(&c).unwrap();
        assert!((exact - oracle).abs() <= 1e-12, "{exact} vs {oracle}");
    }

    #[test]
    fn rejects_mismatched_weights() {
        let c = cm(&[&[0., 1.], &[1., 0.]]);
        let err = solve_exact(&c, &Weights::uniform(3), &Weights::uniform(2)).unwrap_err();
        assert!(matches!(err, TetotError::Input(_)));
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![1.5, -0.5]).is_err());
        assert!(Weights::new(vec![]).is_err());
        let w = Weights::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(w.values(), &[0.25, 0.75]);
    }

    #[test]
    fn cost_matrix_validation() {
        assert!(CostMatrix::new(array![[1.0, -0.1]]).is_err());
        assert!(CostMatrix::new(array![[f64::NAN]]).is_err());
        assert!(CostMatrix::new(Array2::zeros((0, 3))).is_err());
    }

    #[test]
    fn verify_plan_cases() {
        let a = Weights::new(vec![0.3, 0.7]).unwrap();
        let b = Weights::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert!(verify_plan(&TransportPlan::product(&a, &b), &a, &b, 1e-12));
        let c = CostMatrix::new(array![[1.0, 2.0, 0.5], [0.1, 3.0, 2.0]]).unwrap();
        let r = solve_exact(&c, &a, &b).unwrap();
        assert!(verify_plan(&r.plan, &a, &b, 1e-9));
        let mut bad = r.plan.clone();
        bad.coupling_mut()[(0, 0)] = -1e-3;
        assert!(!verify_plan(&bad, &a, &b, 1e-9));
    }

    #[test]
    fn single_source_rectangular() {
        let c = CostMatrix::new(array![[3.0, 1.0, 2.0]]).unwrap();
        let r = solve_exact(&c, &Weights::uniform(1), &Weights::uniform(3)).unwrap();
        assert!((r.cost - 2.0).abs() < 1e-15);
    }

    fn instance() -> impl Strategy<Value = (CostMatrix, Weights, Weights)> {
        (1usize..9, 1usize..9).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0.0f64..10.0, m * n),
                proptest::collection::vec(0.01f64..1.0, m),
                proptest::collection::vec(0.01f64..1.0, n),
            )
                .prop_map(move |(c, a, b)| {
                    let norm = |v: Vec<f64>| {
                        let s: f64 = v.iter().sum();
                        Weights::new(v.into_iter().map(|x| x / s).collect()).unwrap()
                    };
                    (
                        CostMatrix::new(Array2::from_shape_vec((m, n), c).unwrap()).unwrap(),
                        norm(a),
                        norm(b),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn feasibility_and_duality((c, a, b) in instance()) {
            let r = solve_exact_impl(&c, &a, &b, true).unwrap();
            prop_assert!(verify_plan(&r.plan, &a, &b, 1e-9));
            let (u, v) = r.duals.clone().unwrap();
            for ((i, j), &cij) in c.entries().indexed_iter() {
                prop_assert!(u[i] + v[j] <= cij + 1e-7);
            }
            for &(i, j) in r.plan.basis() {
                prop_assert!((u[i] + v[j] - c.entries()[(i, j)]).abs() <= 1e-7);
            }
            let dual = r.dual_objective(&a, &b).unwrap();
            prop_assert!((dual - r.cost).abs() <= 1e-7 * r.cost.abs().max(1.0));
            prop_assert!((r.cost - r.plan.cost(&c)).abs() <= 1e-9 * r.cost.max(1.0));
        }

        #[test]
        fn transpose_symmetry((c, a, b) in instance()) {
            let x = solve_exact(&c, &a, &b).unwrap().cost;
            let y = solve_exact(&c.transpose(), &b, &a).unwrap().cost;
            prop_assert!((x - y).abs() <= 1e-9);
        }

        #[test]
        fn scale_and_shift_equivariance((c, a, b) in instance(), alpha in 0.01f64..100.0, beta in 0.0f64..50.0) {
            let base = solve_exact(&c, &a, &b).unwrap().cost;
            let scaled = CostMatrix::new(c.entries() * alpha).unwrap();
            let s = solve_exact(&scaled, &a, &b).unwrap().cost;
            prop_assert!((s - alpha * base).abs() <= 1e-9 * (alpha * base).max(1.0));
            let shifted = CostMatrix::new(c.entries() + beta).unwrap();
            let t = solve_exact(&shifted, &a, &b).unwrap().cost;
            prop_assert!((t - (base + beta)).abs() <= 1e-9 * (base + beta).max(1.0));
        }

        #[test]
        fn oracle_equivalence_small_square(n in 1usize..7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = CostMatrix::new(Array2::from_shape_fn((n, n), |_| rng.random::<f64>())).unwrap();
            let w = Weights::uniform(n);
            let exact = solve_exact(&c, &w, &w).unwrap().cost;
            prop_assert!((exact - brute_force_oracle(&c).unwrap()).abs() <= 1e-9);
        }
    }
}
