use super::CostMatrix;
use crate::error::{Result, TetotError};

pub const ORACLE_MAX_N: usize = 8;

/// Exact OT cost for square `C` with uniform marginals, by enumerating all
/// `n!` permutation couplings: `(1/n) · min_σ Σ_i C[i, σ(i)]`.
///
/// Uniform equal marginals make the transport polytope the Birkhoff polytope,
/// whose vertices are permutation matrices, so the minimum over permutations
/// is the LP optimum.
pub fn brute_force_oracle(cost: &CostMatrix) -> Result<f64> {
    let (m, n) = cost.dim();
    if m != n {
        return Err(TetotError::Input(format!("oracle needs a square matrix, got {m}x{n}")));
    }
    if n > ORACLE_MAX_N {
        return Err(TetotError::Size(n));
    }
    let c = cost.entries();
    let score = |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum() };

    // Heap's algorithm, iterative form.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    let mut best = score(&perm);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            best = best.min(score(&perm));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}
