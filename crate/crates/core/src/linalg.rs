//! Small dense complex helpers shared by the operator modules.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, Inverse, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    let (r, c) = a.dim();
    if r != c {
        return f64::INFINITY;
    }
    let mut d = 0.0_f64;
    for i in 0..r {
        for j in i..c {
            d = d.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    d
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// Kronecker product `a ⊗ b` with `a` as the outer (slow) index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first,
/// so callers must check the Hermitian defect themselves.
pub fn eigh(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    // row-major complex input comes back with conjugated eigenvectors
    let mut h = CMat::zeros(a.dim().f());
    h.assign(&hermitian_part(a));
    let (vals, vecs) = h.eigh(UPLO::Upper)?;
    Ok((vals, vecs.as_standard_layout().into_owned()))
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    a.inv().map_err(Error::from)
}

/// Spectral norm (largest singular value) via the eigenvalues of `a* a`.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    let g = dagger(a).dot(a);
    let (vals, _) = eigh(&g)?;
    Ok(vals.iter().fold(0.0_f64, |m, v| m.max(*v)).max(0.0).sqrt())
}

/// Solves `a x = b` for a small square system by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve_small(a: &CMat, b: &CMat, pivot_tol: f64) -> Option<CMat> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let (piv, mag) =
            (col..n)
                .map(|r| (r, m[[r, col]].norm()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if mag < pivot_tol {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
            }
            for c in 0..x.ncols() {
                x.swap([piv, c], [col, c]);
            }
        }
        let p = m[[col, col]];
        for r in col + 1..n {
            let f = m[[r, col]] / p;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let v = m[[col, c]];
                m[[r, c]] -= f * v;
            }
            for c in 0..x.ncols() {
                let v = x[[col, c]];
                x[[r, c]] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let p = m[[col, col]];
        for c in 0..x.ncols() {
            let mut acc = x[[col, c]];
            for k in col + 1..n {
                acc -= m[[col, k]] * x[[k, c]];
            }
            x[[col, c]] = acc / p;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&identity(3), &identity(2));
        assert_eq!(max_abs_diff(&k, &identity(6)), 0.0);
    }

    #[test]
    fn eigh_reconstructs_complex_hermitian() {
        let a = ndarray::array![
            [C64::new(1.0, 0.0), C64::new(0.3, 0.5), C64::new(0.0, 0.0)],
            [C64::new(0.3, -0.5), C64::new(2.0, 0.0), C64::new(0.0, 0.7)],
            [C64::new(0.0, 0.0), C64::new(0.0, -0.7), C64::new(-1.0, 0.0)]
        ];
        let (vals, q) = eigh(&a).unwrap();
        let mut ql = q.clone();
        for (mut c, &l) in ql.columns_mut().into_iter().zip(vals.iter()) {
            c.mapv_inplace(|z| z * l);
        }
        assert!(max_abs_diff(&ql.dot(&dagger(&q)), &a) < 1e-13);
    }

    #[test]
    fn solve_small_matches_product() {
        let a = ndarray::array![
            [C64::new(1.0, 1.0), C64::new(2.0, 0.0)],
            [C64::new(0.0, -1.0), C64::new(3.0, 0.5)]
        ];
        let x = ndarray::array![[C64::new(0.5, 0.0)], [C64::new(-1.0, 2.0)]];
        let b = a.dot(&x);
        let got = solve_small(&a, &b, 1e-14).unwrap();
        assert!(max_abs_diff(&got, &x) < 1e-14);
    }

    #[test]
    fn solve_small_rejects_singular() {
        let a = CMat::zeros((2, 2));
        assert!(solve_small(&a, &CMat::zeros((2, 1)), 1e-12).is_none());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut a = CMat::zeros((3, 3));
        a[[0, 0]] = C64::new(0.0, -4.0);
        a[[1, 1]] = C64::new(2.0, 0.0);
        assert!((spectral_norm(&a).unwrap() - 4.0).abs() < 1e-12);
    }
}
