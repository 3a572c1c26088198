//! Symmetric eigendecomposition by cyclic Jacobi rotations, and the PSD
//! square root built on it.

use ndarray::{Array1, Array2};

use crate::error::{Result, TetotError};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
pub(crate) const SYMMETRY_TOL: f64 = 1e-9;
const NEGATIVE_EIGEN_TOL: f64 = 1e-8;

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal(a: &Array2<f64>) -> f64 {
    a.indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Largest absolute asymmetry, relative to the largest entry (floored at 1).
pub(crate) fn asymmetry(a: &Array2<f64>) -> f64 {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    (a + &a.t()) * 0.5
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖A‖_F`.
pub fn jacobi_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix expected");
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    let threshold = OFF_DIAGONAL_TOL * frobenius(m);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diag().to_owned(), v)
}

/// Symmetric PSD square root `S` with `S·S = M`.
///
/// Eigenvalues slightly below zero (down to `-1e-8`, relative to the
/// spectral scale when that exceeds 1) are clamped; anything more negative is
/// a [`TetotError::NotPsd`].
pub fn sym_psd_sqrt(m: &Array2<f64>) -> Result<Array2<f64>> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(TetotError::Input(format!("square matrix expected, got {r}x{c}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(TetotError::Input("matrix has non-finite entries".into()));
    }
    if asymmetry(m) > SYMMETRY_TOL {
        return Err(TetotError::Input("matrix is not symmetric".into()));
    }
    let (values, vectors) = jacobi_eigen(&symmetrize(m));
    let scale = values.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    if let Some(&bad) = values.iter().find(|&&l| l < -NEGATIVE_EIGEN_TOL * scale) {
        return Err(TetotError::NotPsd(bad));
    }
    let roots = values.mapv(|l| l.max(0.0).sqrt());
    let scaled = &vectors * &roots;
    Ok(symmetrize(&scaled.dot(&vectors.t())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn rel_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        frobenius(&(a - b)) / frobenius(b).max(1e-300)
    }

    #[test]
    fn identity_and_diagonal() {
        let i = Array2::<f64>::eye(3);
        assert_eq!(sym_psd_sqrt(&i).unwrap(), i);
        let d = sym_psd_sqrt(&array![[4.0, 0.0], [0.0, 9.0]]).unwrap();
        assert_eq!(d, array![[2.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn two_by_two_squares_back() {
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        let s = sym_psd_sqrt(&m).unwrap();
        assert!(frobenius(&(s.dot(&s) - &m)) < 1e-7);
        // Eigenvalues 1 and 3: S = [[(1+√3)/2, (√3-1)/2], ...].
        let r3 = 3f64.sqrt();
        assert!((s[(0, 0)] - (1.0 + r3) / 2.0).abs() < 1e-12);
        assert!((s[(0, 1)] - (r3 - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(matches!(sym_psd_sqrt(&array![[1.0, 2.0], [2.0, 1.0]]), Err(TetotError::NotPsd(_))));
        assert!(matches!(sym_psd_sqrt(&array![[1.0, 0.5], [0.0, 1.0]]), Err(TetotError::Input(_))));
    }

    #[test]
    fn clamps_tiny_negative_eigenvalues() {
        let m = array![[1.0, 0.0], [0.0, -1e-10]];
        let s = sym_psd_sqrt(&m).unwrap();
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn rank_deficient_and_zero() {
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(sym_psd_sqrt(&z).unwrap(), z);
        let v = array![[1.0], [2.0], [-1.0]];
        let m = v.dot(&v.t());
        let s = sym_psd_sqrt(&m).unwrap();
        assert!(rel_frobenius(&s.dot(&s), &m) < 1e-7);
    }

    fn psd(dim: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-3.0f64..3.0, dim * dim).prop_map(move |v| {
            let b = Array2::from_shape_vec((dim, dim), v).unwrap();
            b.dot(&b.t())
        })
    }

    proptest! {
        #[test]
        fn sqrt_squares_back(m in (1usize..9).prop_flat_map(psd)) {
            let s = sym_psd_sqrt(&m).unwrap();
            prop_assert!(asymmetry(&s) == 0.0);
            let back = s.dot(&s);
            if frobenius(&m) > 1e-12 {
                prop_assert!(rel_frobenius(&back, &m) < 1e-7);
            }
            let (vals, _) = jacobi_eigen(&s);
            let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!(vals.iter().all(|&l| l >= -1e-8 * scale));
        }

        #[test]
        fn eigen_reconstructs(m in (1usize..9).prop_flat_map(psd)) {
            let (vals, vecs) = jacobi_eigen(&m);
            let back = (&vecs * &vals).dot(&vecs.t());
            prop_assert!(frobenius(&(back - &m)) <= 1e-10 * frobenius(&m).max(1.0));
            let orth = vecs.t().dot(&vecs);
            prop_assert!(frobenius(&(orth - Array2::<f64>::eye(m.nrows()))) < 1e-10);
        }
    }
}
