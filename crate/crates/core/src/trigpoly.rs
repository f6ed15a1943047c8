//! Matrix-valued trigonometric polynomials on the circle, stored by their
//! exact Fourier coefficients.
//!
//! A `TrigPoly` of size `d` and degree `D` is
//! `p(θ) = Σ_{j=-D..=D} c_j e^{ijθ}` with `c_j ∈ C^{d×d}`. Every operation the
//! algebra modules need (products, affine pullbacks, adjoints, translations
//! along a flow) is a re-indexing or phase change of the coefficients, so no
//! quadrature ever enters.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{dagger, frobenius, max_abs, CMat, C64, I};

#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    size: usize,
    degree: usize,
    coeffs: Vec<CMat>,
}

impl TrigPoly {
    pub fn zero(size: usize, degree: usize) -> Self {
        TrigPoly {
            size,
            degree,
            coeffs: vec![CMat::zeros((size, size)); 2 * degree + 1],
        }
    }

    pub fn constant(value: CMat) -> Self {
        assert_eq!(value.nrows(), value.ncols(), "constant must be square");
        TrigPoly {
            size: value.nrows(),
            degree: 0,
            coeffs: vec![value],
        }
    }

    pub fn scalar_constant(value: C64) -> Self {
        TrigPoly::constant(Array2::from_elem((1, 1), value))
    }

    /// Builds a scalar polynomial from `(frequency, coefficient)` pairs.
    /// Repeated frequencies accumulate.
    pub fn scalar(terms: &[(i64, C64)]) -> Self {
        let degree = terms
            .iter()
            .map(|(j, _)| j.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut p = TrigPoly::zero(1, degree);
        for &(j, c) in terms {
            p.coeffs[(j + degree as i64) as usize][[0, 0]] += c;
        }
        p
    }

    /// Builds a matrix polynomial from `(frequency, row, col, coefficient)`.
    pub fn from_entries(size: usize, terms: &[(i64, usize, usize, C64)]) -> Result<Self> {
        let degree = terms
            .iter()
            .map(|t| t.0.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut p = TrigPoly::zero(size, degree);
        for &(j, r, c, v) in terms {
            if r >= size || c >= size {
                return Err(Error::InvalidSymbol(format!(
                    "matrix entry ({r}, {c}) outside {size}x{size}"
                )));
            }
            p.coeffs[(j + degree as i64) as usize][[r, c]] += v;
        }
        Ok(p)
    }

    /// `Σ_j c_j e^{ijθ}` with the given coefficient matrices, `c_j` stored at
    /// index `j + degree`.
    pub fn from_coeffs(degree: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.len() != 2 * degree + 1 {
            return Err(Error::InvalidSymbol(format!(
                "expected {} coefficients, got {}",
                2 * degree + 1,
                coeffs.len()
            )));
        }
        let size = coeffs[0].nrows();
        if coeffs.iter().any(|c| c.dim() != (size, size)) {
            return Err(Error::InvalidSymbol("coefficient shapes differ".into()));
        }
        Ok(TrigPoly {
            size,
            degree,
            coeffs,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Storage degree (an upper bound on the true degree).
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Largest `|j|` whose coefficient exceeds `tol` in modulus.
    pub fn effective_degree(&self, tol: f64) -> usize {
        (0..=self.degree)
            .rev()
            .find(|&j| {
                max_abs(&self.coeffs[self.degree + j]) > tol
                    || max_abs(&self.coeffs[self.degree - j]) > tol
            })
            .unwrap_or(0)
    }

    pub fn coeff(&self, j: i64) -> Option<&CMat> {
        if j.unsigned_abs() as usize > self.degree {
            None
        } else {
            Some(&self.coeffs[(j + self.degree as i64) as usize])
        }
    }

    /// Coefficient at frequency `j`, zero outside the stored range.
    pub fn coeff_or_zero(&self, j: i64) -> CMat {
        self.coeff(j)
            .cloned()
            .unwrap_or_else(|| CMat::zeros((self.size, self.size)))
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, &CMat)> {
        let d = self.degree as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, c)| (k as i64 - d, c))
    }

    pub fn eval(&self, theta: f64) -> CMat {
        let mut out = CMat::zeros((self.size, self.size));
        for (j, c) in self.coeffs() {
            let phase = C64::from_polar(1.0, j as f64 * theta);
            out.scaled_add(phase, c);
        }
        out
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        let mut p = TrigPoly::zero(self.size, degree);
        for (j, c) in self.coeffs() {
            if j.unsigned_abs() as usize <= degree {
                p.coeffs[(j + degree as i64) as usize].assign(c);
            }
        }
        p
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        assert_eq!(self.size, other.size, "size mismatch in TrigPoly::add");
        let mut out = self.with_degree(self.degree.max(other.degree));
        let d = out.degree as i64;
        for (j, c) in other.coeffs() {
            out.coeffs[(j + d) as usize] += c;
        }
        out
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> TrigPoly {
        TrigPoly {
            size: self.size,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c.mapv(|z| z * s)).collect(),
        }
    }

    /// Pointwise matrix product `p(θ) q(θ)`; degrees add.
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        assert_eq!(self.size, other.size, "size mismatch in TrigPoly::mul");
        let degree = self.degree + other.degree;
        let mut out = TrigPoly::zero(self.size, degree);
        for (j, a) in self.coeffs() {
            for (k, b) in other.coeffs() {
                let idx = (j + k + degree as i64) as usize;
                out.coeffs[idx] += &a.dot(b);
            }
        }
        out
    }

    /// Left multiplication by a constant matrix.
    pub fn left_mul(&self, m: &CMat) -> TrigPoly {
        TrigPoly {
            size: self.size,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| m.dot(c)).collect(),
        }
    }

    pub fn right_mul(&self, m: &CMat) -> TrigPoly {
        TrigPoly {
            size: self.size,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c.dot(m)).collect(),
        }
    }

    /// Pullback by the affine circle map `θ ↦ sign·θ + offset`:
    /// `(p∘g)(θ) = Σ c_j e^{ij·offset} e^{i(sign·j)θ}`.
    pub fn compose_affine(&self, sign: i64, offset: f64) -> TrigPoly {
        debug_assert!(sign == 1 || sign == -1);
        let d = self.degree as i64;
        let mut out = TrigPoly::zero(self.size, self.degree);
        for (j, c) in self.coeffs() {
            let phase = C64::from_polar(1.0, j as f64 * offset);
            out.coeffs[(sign * j + d) as usize] = c.mapv(|z| z * phase);
        }
        out
    }

    /// Translation `θ ↦ θ + shift`.
    pub fn shift(&self, shift: f64) -> TrigPoly {
        self.compose_affine(1, shift)
    }

    /// Pointwise conjugate transpose `p(θ)*`.
    pub fn adjoint(&self) -> TrigPoly {
        let d = self.degree as i64;
        let mut out = TrigPoly::zero(self.size, self.degree);
        for (j, c) in self.coeffs() {
            out.coeffs[(-j + d) as usize] = dagger(c);
        }
        out
    }

    pub fn derivative(&self) -> TrigPoly {
        TrigPoly {
            size: self.size,
            degree: self.degree,
            coeffs: self
                .coeffs()
                .map(|(j, c)| c.mapv(|z| z * I * j as f64))
                .collect(),
        }
    }

    /// `p ⊗ I_d` for a scalar polynomial.
    pub fn kron_identity(&self, d: usize) -> TrigPoly {
        assert_eq!(self.size, 1, "kron_identity needs a scalar polynomial");
        TrigPoly {
            size: d,
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| CMat::eye(d).mapv(|z| z * c[[0, 0]]))
                .collect(),
        }
    }

    /// Largest coefficient deviation (Frobenius per frequency).
    pub fn max_coeff_diff(&self, other: &TrigPoly) -> f64 {
        assert_eq!(self.size, other.size);
        let degree = self.degree.max(other.degree) as i64;
        (-degree..=degree)
            .map(|j| frobenius(&(self.coeff_or_zero(j) - other.coeff_or_zero(j))))
            .fold(0.0, f64::max)
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(frobenius).fold(0.0, f64::max)
    }

    /// Pointwise Hermitian: `c_{-j} = c_j*` for all `j`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_coeff_diff(&self.adjoint()) <= tol
    }

    /// Bound on the Lipschitz constant in θ of the Frobenius-norm valued map.
    pub fn lipschitz_bound(&self) -> f64 {
        self.coeffs()
            .map(|(j, c)| j.unsigned_abs() as f64 * frobenius(c))
            .sum()
    }

    /// Sup over a uniform grid of `q` points of the Frobenius norm.
    pub fn grid_sup(&self, q: usize) -> f64 {
        (0..q)
            .map(|g| frobenius(&self.eval(2.0 * PI * g as f64 / q as f64)))
            .fold(0.0, f64::max)
    }
}

/// Precomputed phases `e^{ijθ_g}` on a uniform θ grid, used when the same
/// grid evaluates many polynomials.
#[derive(Clone, Debug)]
pub struct ThetaGrid {
    thetas: Vec<f64>,
    max_freq: usize,
    phases: Vec<C64>,
}

impl ThetaGrid {
    pub fn new(points: usize, max_freq: usize) -> Self {
        let thetas: Vec<f64> = (0..points)
            .map(|g| 2.0 * PI * g as f64 / points as f64)
            .collect();
        let width = 2 * max_freq + 1;
        let mut phases = Vec::with_capacity(points * width);
        for &t in &thetas {
            for j in -(max_freq as i64)..=max_freq as i64 {
                phases.push(C64::from_polar(1.0, j as f64 * t));
            }
        }
        ThetaGrid {
            thetas,
            max_freq,
            phases,
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn phase(&self, g: usize, j: i64) -> C64 {
        let width = 2 * self.max_freq + 1;
        self.phases[g * width + (j + self.max_freq as i64) as usize]
    }

    /// Values at every grid point.
    pub fn eval(&self, p: &TrigPoly) -> Vec<CMat> {
        assert!(p.degree() <= self.max_freq, "grid built for a lower degree");
        (0..self.len())
            .map(|g| {
                let mut out = CMat::zeros((p.size(), p.size()));
                for (j, c) in p.coeffs() {
                    out.scaled_add(self.phase(g, j), c);
                }
                out
            })
            .collect()
    }

    /// `sup_g ‖p(θ_g)‖_F`.
    pub fn sup_norm(&self, p: &TrigPoly) -> f64 {
        self.eval(p).iter().map(frobenius).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_scalar(max_deg: i64) -> impl Strategy<Value = TrigPoly> {
        prop::collection::vec((-max_deg..=max_deg, -1.0..1.0f64, -1.0..1.0f64), 1..6).prop_map(
            |terms| {
                TrigPoly::scalar(
                    &terms
                        .into_iter()
                        .map(|(j, a, b)| (j, c(a, b)))
                        .collect::<Vec<_>>(),
                )
            },
        )
    }

    #[test]
    fn eval_cos() {
        let p = TrigPoly::scalar(&[(1, c(0.5, 0.0)), (-1, c(0.5, 0.0))]);
        for &t in &[0.0, 0.3, 2.0] {
            assert!((p.eval(t)[[0, 0]] - c(f64::cos(t), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn reflection_pullback_of_sin_flips_sign() {
        let sin = TrigPoly::scalar(&[(1, c(0.0, -0.5)), (-1, c(0.0, 0.5))]);
        let r = sin.compose_affine(-1, 0.0);
        assert!(r.max_coeff_diff(&sin.scale(c(-1.0, 0.0))) < 1e-16);
    }

    #[test]
    fn derivative_of_exponential() {
        let p = TrigPoly::scalar(&[(3, c(1.0, 0.0))]);
        assert_eq!(p.derivative().coeff(3).unwrap()[[0, 0]], c(0.0, 3.0));
    }

    #[test]
    fn effective_degree_ignores_padding() {
        let p = TrigPoly::scalar(&[(2, c(1.0, 0.0))]).with_degree(7);
        assert_eq!(p.degree(), 7);
        assert_eq!(p.effective_degree(0.0), 2);
    }

    #[test]
    fn from_entries_rejects_out_of_range() {
        assert!(TrigPoly::from_entries(2, &[(0, 2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn grid_matches_direct_eval() {
        let p = TrigPoly::scalar(&[(3, c(0.2, 1.0)), (-2, c(-0.7, 0.1))]);
        let grid = ThetaGrid::new(16, 5);
        for (g, v) in grid.eval(&p).iter().enumerate() {
            assert!((v[[0, 0]] - p.eval(grid.thetas()[g])[[0, 0]]).norm() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn product_matches_pointwise(p in arb_scalar(4), q in arb_scalar(4), t in 0.0..6.3f64) {
            let lhs = p.mul(&q).eval(t)[[0, 0]];
            let rhs = p.eval(t)[[0, 0]] * q.eval(t)[[0, 0]];
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn affine_pullback_matches_pointwise(p in arb_scalar(4), t in 0.0..6.3f64,
                                             flip in any::<bool>(), b in 0.0..6.3f64) {
            let s = if flip { -1 } else { 1 };
            let lhs = p.compose_affine(s, b).eval(t)[[0, 0]];
            let rhs = p.eval(s as f64 * t + b)[[0, 0]];
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn adjoint_is_pointwise_conjugate(p in arb_scalar(4), t in 0.0..6.3f64) {
            let lhs = p.adjoint().eval(t)[[0, 0]];
            prop_assert!((lhs - p.eval(t)[[0, 0]].conj()).norm() < 1e-13);
        }
    }
}
