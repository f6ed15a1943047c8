//! Heisenberg-picture evolution `A(t) = e^{itP} A e^{-itP}`, transport of
//! matrix symbols along the bicharacteristic flow, and the orbifold sandwich
//! identity.

use ndarray::{Array1, Axis};

use crate::error::{Error, Result};
use crate::group_actions::{AffineIsometryAction, UnitaryRep};
use crate::linalg::{commutator, dagger, eigh, inverse, max_abs, max_abs_diff, CMat, C64, I};
use crate::modes::OperatorMatrix;
use crate::quantization::{
    invariant_projection, subprincipal, CompleteSymbolOrder1, HomogeneousSymbol, Sign,
};
use crate::symplectic_flows::{CotangentPoint, MIN_COVECTOR_NORM};
use crate::trigpoly::TrigPoly;

pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Eigenvalue window around 1 selecting the range of `Π`.
pub const RANGE_TOL: f64 = 1e-8;
pub const COMMUTATION_TOL: f64 = 1e-10;

/// `P = Q Λ Q*` for a Hermitian operator matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: CMat,
    source: OperatorMatrix,
}

impl SpectralDecomposition {
    pub fn new(p: &OperatorMatrix) -> Result<Self> {
        p.check_hermitian()?;
        let (eigenvalues, eigenvectors) = eigh(&p.data)?;
        let dec = SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            source: p.clone(),
        };
        let scale = max_abs(&p.data).max(1.0);
        let residual = dec.reconstruction_residual();
        if residual > RECONSTRUCTION_TOL * scale {
            return Err(Error::Linalg(format!(
                "eigendecomposition residual {residual:e}"
            )));
        }
        let q = &dec.eigenvectors;
        let unitarity = max_abs_diff(&dagger(q).dot(q), &CMat::eye(q.nrows()));
        if unitarity > RECONSTRUCTION_TOL {
            return Err(Error::Linalg(format!(
                "eigenvectors deviate from unitary by {unitarity:e}"
            )));
        }
        Ok(dec)
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn source(&self) -> &OperatorMatrix {
        &self.source
    }

    /// `max |Q Λ Q* − P|`.
    pub fn reconstruction_residual(&self) -> f64 {
        let q = &self.eigenvectors;
        let mut ql = q.clone();
        for (mut col, &l) in ql.axis_iter_mut(Axis(1)).zip(self.eigenvalues.iter()) {
            col.mapv_inplace(|z| z * l);
        }
        max_abs_diff(&ql.dot(&dagger(q)), &self.source.data)
    }

    /// `e^{itP}`.
    pub fn propagator(&self, t: f64) -> CMat {
        let q = &self.eigenvectors;
        let mut qe = q.clone();
        for (mut col, &l) in qe.axis_iter_mut(Axis(1)).zip(self.eigenvalues.iter()) {
            let phase = C64::from_polar(1.0, t * l);
            col.mapv_inplace(|z| z * phase);
        }
        qe.dot(&dagger(q))
    }

    /// `A(t)` for each requested time, sharing one change of basis.
    pub fn evolve_many(&self, a: &OperatorMatrix, times: &[f64]) -> Result<Vec<OperatorMatrix>> {
        if a.trunc != self.source.trunc {
            return Err(Error::DimensionMismatch(
                "observable and generator truncations differ".into(),
            ));
        }
        let q = &self.eigenvectors;
        let qh = dagger(q);
        let in_basis = qh.dot(&a.data).dot(q);
        let n = in_basis.nrows();
        times
            .iter()
            .map(|&t| {
                let mut b = in_basis.clone();
                for i in 0..n {
                    for j in 0..n {
                        b[[i, j]] *=
                            C64::from_polar(1.0, t * (self.eigenvalues[i] - self.eigenvalues[j]));
                    }
                }
                Ok(OperatorMatrix {
                    trunc: a.trunc,
                    data: q.dot(&b).dot(&qh),
                    hermitized: false,
                })
            })
            .collect()
    }

    pub fn evolve(&self, a: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
        Ok(self
            .evolve_many(a, &[t])?
            .pop()
            .expect("one time requested"))
    }
}

/// `e^{itP} A e^{-itP}`.
pub fn heisenberg(p: &OperatorMatrix, a: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    SpectralDecomposition::new(p)?.evolve(a, t)
}

/// Fiber transport along a bicharacteristic: `W(t)` with `W(0) = I`.
#[derive(Clone, Debug)]
pub struct TransportFrame {
    pub w: CMat,
    pub base: CotangentPoint,
    /// `f_t(ν)`.
    pub end: CotangentPoint,
    pub t: f64,
    pub dt: f64,
}

struct FlowData {
    h: TrigPoly,
    dh: TrigPoly,
    sub: TrigPoly,
    sign: f64,
}

impl FlowData {
    fn new(p: &CompleteSymbolOrder1, xi: f64) -> Self {
        let s = if xi > 0.0 { Sign::Plus } else { Sign::Minus };
        let h = p.principal().component(s).clone();
        FlowData {
            dh: h.derivative(),
            sub: subprincipal(p).component(s).clone(),
            h,
            sign: s.value(),
        }
    }

    /// Right-hand side for `(θ, log|ξ|, W)`.
    fn rhs(&self, theta: f64, w: &CMat) -> (f64, f64, CMat) {
        let h = self.h.eval(theta)[[0, 0]].re;
        let dh = self.dh.eval(theta)[[0, 0]].re;
        let dw = w.dot(&self.sub.eval(theta)).mapv(|z| z * I);
        (self.sign * h, -self.sign * self.sign * dh, dw)
    }
}

/// Integrates `dθ/ds = ∂_ξ p₁`, `dξ/ds = −∂_θ p₁` together with
/// `dW/ds = i W sub(f_s ν)` by classical RK4 with `ceil(|t|/dt)` steps.
///
/// Right multiplication makes `a ↦ W a(f_t ·) W⁻¹` a one-parameter group
/// whose generator is `H_{p₁} + i[sub, ·]`.
pub fn transport_frame(
    p: &CompleteSymbolOrder1,
    nu: &CotangentPoint,
    t: f64,
    dt: f64,
) -> Result<TransportFrame> {
    if nu.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "transport is defined on T*S¹".into(),
        ));
    }
    let norm = nu.xi[0].abs();
    if norm < MIN_COVECTOR_NORM {
        return Err(Error::ConicSingularity { norm });
    }
    if !(dt.is_finite() && dt > 0.0) || !t.is_finite() {
        return Err(Error::InvalidFlow(format!(
            "invalid transport step dt = {dt}, t = {t}"
        )));
    }
    let data = FlowData::new(p, nu.xi[0]);
    let d = p.bundle();
    let mut theta = nu.x[0];
    let mut log_xi = norm.ln();
    let mut w = CMat::eye(d);
    let steps = if t == 0.0 {
        0
    } else {
        (t.abs() / dt).ceil().max(1.0) as usize
    };
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let axpy = |w: &CMat, k: &CMat, s: f64| w + &k.mapv(|z| z * s);
    for _ in 0..steps {
        let (a1, b1, k1) = data.rhs(theta, &w);
        let (a2, b2, k2) = data.rhs(theta + 0.5 * h * a1, &axpy(&w, &k1, 0.5 * h));
        let (a3, b3, k3) = data.rhs(theta + 0.5 * h * a2, &axpy(&w, &k2, 0.5 * h));
        let (a4, b4, k4) = data.rhs(theta + h * a3, &axpy(&w, &k3, h));
        theta += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        log_xi += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        w = &w
            + &(&k1 + &k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + &k4).mapv(|z| z * (h / 6.0));
    }
    let end = CotangentPoint::new(vec![theta], vec![data.sign * log_xi.exp()]);
    Ok(TransportFrame {
        w,
        base: nu.clone(),
        end,
        t,
        dt,
    })
}

/// `W a(f_t ν) W⁻¹` for a precomputed frame.
pub fn ad_transport_with(frame: &TransportFrame, a: &HomogeneousSymbol) -> Result<CMat> {
    if a.size() != frame.w.nrows() {
        return Err(Error::DimensionMismatch(
            "symbol size differs from the frame".into(),
        ));
    }
    let value = a.eval(frame.end.x[0], frame.end.xi[0]);
    Ok(frame.w.dot(&value).dot(&inverse(&frame.w)?))
}

/// `Ad(α_t)* a` at `ν`.
pub fn ad_transport_symbol(
    a: &HomogeneousSymbol,
    p: &CompleteSymbolOrder1,
    nu: &CotangentPoint,
    t: f64,
    dt: f64,
) -> Result<CMat> {
    ad_transport_with(&transport_frame(p, nu, t, dt)?, a)
}

/// `[∇_{H_{p₁}}, a](ν) = H_{p₁} a + i[sub, a]`, the generator of the
/// transport group applied to `a`.
pub fn transport_generator(
    a: &HomogeneousSymbol,
    p: &CompleteSymbolOrder1,
    nu: &CotangentPoint,
) -> Result<CMat> {
    if nu.dim() != 1 || a.size() != p.bundle() {
        return Err(Error::DimensionMismatch(
            "generator needs a circle point and matching sizes".into(),
        ));
    }
    let xi = nu.xi[0];
    if xi.abs() < MIN_COVECTOR_NORM {
        return Err(Error::ConicSingularity { norm: xi.abs() });
    }
    let theta = nu.x[0];
    let s = if xi > 0.0 { Sign::Plus } else { Sign::Minus };
    let k = a.degree();
    let h = p.principal().component(s).eval(theta)[[0, 0]].re;
    let dh = p.principal().component(s).derivative().eval(theta)[[0, 0]].re;
    let comp = a.component(s);
    let scale = xi.abs().powi(k) * s.value();
    // H a = ∂_ξp₁ ∂_θa − ∂_θp₁ ∂_ξa = sgn ξ |ξ|^k (h a' − k h' a)
    let hamilton = (&comp.derivative().eval(theta).mapv(|z| z * h)
        - &comp.eval(theta).mapv(|z| z * (k as f64 * dh)))
        .mapv(|z| z * scale);
    let sub = subprincipal(p).component(s).eval(theta);
    let value = a.eval(theta, xi);
    Ok(hamilton + commutator(&sub, &value).mapv(|z| z * I))
}

/// Both sides of `e^{itP}Ae^{−itP} = Π e^{itP̃} Ã e^{−itP̃} Π`.
#[derive(Clone, Debug)]
pub struct OrbifoldEvolution {
    /// Evolution computed inside `range(Π)` and re-embedded.
    pub lhs: OperatorMatrix,
    /// `Π · heisenberg(P̃, Ã, t) · Π`.
    pub rhs: OperatorMatrix,
    pub invariant_rank: usize,
}

impl OrbifoldEvolution {
    pub fn discrepancy(&self) -> f64 {
        max_abs_diff(&self.lhs.data, &self.rhs.data)
    }
}

/// Evaluates both sides of the sandwich identity. `P̃` must commute with `Π`.
pub fn orbifold_heisenberg(
    action: &AffineIsometryAction,
    p: &OperatorMatrix,
    a: &OperatorMatrix,
    t: f64,
    rep: Option<&UnitaryRep>,
) -> Result<OrbifoldEvolution> {
    Ok(orbifold_heisenberg_many(action, p, a, &[t], rep)?
        .pop()
        .expect("one time requested"))
}

pub fn orbifold_heisenberg_many(
    action: &AffineIsometryAction,
    p: &OperatorMatrix,
    a: &OperatorMatrix,
    times: &[f64],
    rep: Option<&UnitaryRep>,
) -> Result<Vec<OrbifoldEvolution>> {
    p.check_hermitian()?;
    if a.trunc != p.trunc {
        return Err(Error::DimensionMismatch(
            "observable and generator truncations differ".into(),
        ));
    }
    let pi = invariant_projection(action, p.trunc, rep)?;
    let defect = p.commutator_norm(&pi)?;
    if defect > COMMUTATION_TOL * max_abs(&p.data).max(1.0) {
        return Err(Error::NotInvariant(format!("[P, Π] = {defect:e}")));
    }
    let (vals, vecs) = eigh(&pi.data)?;
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&i| (vals[i] - 1.0).abs() <= RANGE_TOL)
        .collect();
    let basis = vecs.select(Axis(1), &keep);
    let basis_h = dagger(&basis);
    let rank = keep.len();

    let reduced_trunc = p.trunc;
    let compress = |m: &CMat| basis_h.dot(m).dot(&basis);
    let p_red = compress(&p.data);
    let a_red = compress(&a.data);
    let (lam, q) = eigh(&p_red)?;
    let qh = dagger(&q);
    let a_eig = qh.dot(&a_red).dot(&q);

    let full = SpectralDecomposition::new(p)?;
    let rhs_all = full.evolve_many(a, times)?;

    let mut out = Vec::with_capacity(times.len());
    for (&t, rhs_full) in times.iter().zip(rhs_all) {
        let mut b = a_eig.clone();
        for i in 0..rank {
            for j in 0..rank {
                b[[i, j]] *= C64::from_polar(1.0, t * (lam[i] - lam[j]));
            }
        }
        let inside = q.dot(&b).dot(&qh);
        let lhs = basis.dot(&inside).dot(&basis_h);
        let rhs = pi.data.dot(&rhs_full.data).dot(&pi.data);
        out.push(OrbifoldEvolution {
            lhs: OperatorMatrix {
                trunc: reduced_trunc,
                data: lhs,
                hermitized: false,
            },
            rhs: OperatorMatrix {
                trunc: reduced_trunc,
                data: rhs,
                hermitized: false,
            },
            invariant_rank: rank,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Truncation;
    use crate::quantization::{build_first_order, op_quantize, sqrt_laplacian, symbol_from_matrix};
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn shift_operator(t: Truncation) -> OperatorMatrix {
        op_quantize(
            &HomogeneousSymbol::even(0, TrigPoly::scalar(&[(1, c(1.0, 0.0))])),
            t,
        )
        .unwrap()
    }

    fn pauli_model() -> CompleteSymbolOrder1 {
        let v = TrigPoly::from_entries(
            2,
            &[
                (0, 0, 0, c(0.5, 0.0)),
                (0, 1, 1, c(-0.5, 0.0)),
                (1, 0, 1, c(0.3, 0.0)),
                (-1, 1, 0, c(0.3, 0.0)),
                (0, 0, 1, c(0.2, 0.0)),
                (0, 1, 0, c(0.2, 0.0)),
            ],
        )
        .unwrap();
        CompleteSymbolOrder1::with_potential(v).unwrap()
    }

    fn matrix_observable() -> HomogeneousSymbol {
        HomogeneousSymbol::even(
            0,
            TrigPoly::from_entries(
                2,
                &[
                    (1, 0, 0, c(1.0, 0.0)),
                    (0, 0, 1, c(0.0, 1.0)),
                    (0, 1, 0, c(0.0, -1.0)),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_time_is_identity() {
        let t = Truncation::circle(8);
        let a = shift_operator(t);
        let out = heisenberg(&sqrt_laplacian(t), &a, 0.0).unwrap();
        assert!(out.max_abs_diff(&a).unwrap() <= 1e-14);
    }

    #[test]
    fn shift_operator_picks_up_phases() {
        let t = Truncation::circle(10);
        let time = 0.7;
        let out = heisenberg(&sqrt_laplacian(t), &shift_operator(t), time).unwrap();
        for m in -10i64..10 {
            let want = C64::from_polar(1.0, time * ((m + 1).abs() - m.abs()) as f64);
            let got = out.data[[t.index1(m + 1, 0).unwrap(), t.index1(m, 0).unwrap()]];
            assert!((got - want).norm() <= 1e-12);
        }
    }

    #[test]
    fn non_hermitian_generator_rejected() {
        let t = Truncation::circle(4);
        assert!(matches!(
            heisenberg(&shift_operator(t), &shift_operator(t), 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn evolution_preserves_spectrum_and_is_unitary() {
        let t = Truncation::circle_bundle(10, 2);
        let p = build_first_order(&pauli_model(), t).unwrap();
        let dec = SpectralDecomposition::new(&p).unwrap();
        let u = dec.propagator(1.3);
        assert!(max_abs_diff(&u.dot(&dagger(&u)), &CMat::eye(u.nrows())) <= 1e-10);
        let mut a = op_quantize(&matrix_observable(), t).unwrap();
        a.data = crate::linalg::hermitian_part(&a.data);
        let at = dec.evolve(&a, 1.3).unwrap();
        let (s0, _) = eigh(&a.data).unwrap();
        let (s1, _) = eigh(&at.data).unwrap();
        for (x, y) in s0.iter().zip(s1.iter()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn group_property() {
        let t = Truncation::circle_bundle(8, 2);
        let p = build_first_order(&pauli_model(), t).unwrap();
        let a = op_quantize(&matrix_observable(), t).unwrap();
        let two = heisenberg(&p, &heisenberg(&p, &a, 0.4).unwrap(), 0.9).unwrap();
        let one = heisenberg(&p, &a, 1.3).unwrap();
        assert!(two.max_abs_diff(&one).unwrap() <= 1e-10);
    }

    #[test]
    fn commuting_observables_stay_commuting() {
        let t = Truncation::circle(12);
        let action = AffineIsometryAction::reflection();
        let p = sqrt_laplacian(t);
        let a = op_quantize(
            &HomogeneousSymbol::even(0, TrigPoly::scalar(&[(2, c(0.5, 0.0)), (-2, c(0.5, 0.0))])),
            t,
        )
        .unwrap();
        let u = action.mode_action(1, t).unwrap();
        assert!(u.commutator_norm(&a).unwrap() <= 1e-14);
        let at = heisenberg(&p, &a, 0.8).unwrap();
        assert!(u.commutator_norm(&at).unwrap() <= 1e-10);
    }

    #[test]
    fn scalar_egorov_is_sharp_for_the_diagonal_model() {
        let n = 32usize;
        let t = Truncation::circle(n);
        let sym = HomogeneousSymbol::new(
            0,
            TrigPoly::scalar(&[(0, c(0.2, 0.0)), (3, c(0.5, -0.1)), (-2, c(0.0, 0.4))]),
            TrigPoly::scalar(&[(1, c(0.7, 0.0)), (-3, c(0.1, 0.1))]),
        )
        .unwrap();
        let a = op_quantize(&sym, t).unwrap();
        let dd = sym.x_degree() as i64;
        for time in [0.5, 1.0, 2.0] {
            let at = heisenberg(&sqrt_laplacian(t), &a, time).unwrap();
            let expect = sym.pullback_geodesic(1.0, time);
            for m in (dd + 1)..=(n as i64 - dd) {
                for mm in [m, -m] {
                    let got = symbol_from_matrix(&at, mm).unwrap();
                    assert!(
                        got.max_coeff_diff(&expect.mode_component(mm)) <= 1e-12,
                        "m={mm}"
                    );
                }
            }
        }
    }

    #[test]
    fn trivial_transport() {
        let p = CompleteSymbolOrder1::with_potential(TrigPoly::zero(2, 0)).unwrap();
        let f = transport_frame(&p, &CotangentPoint::new(vec![0.3], vec![1.0]), 1.0, 1e-3).unwrap();
        assert!(max_abs_diff(&f.w, &CMat::eye(2)) <= 1e-15);
        assert!((f.end.x[0] - 1.3).abs() <= 1e-12);
    }

    #[test]
    fn constant_subprincipal_gives_scalar_phase() {
        let cst = 0.7;
        let p = CompleteSymbolOrder1::with_potential(TrigPoly::constant(
            CMat::eye(2).mapv(|z| z * cst),
        ))
        .unwrap();
        let f =
            transport_frame(&p, &CotangentPoint::new(vec![2.0], vec![-3.0]), 1.5, 1e-3).unwrap();
        let want = CMat::eye(2).mapv(|z| z * C64::from_polar(1.0, cst * 1.5));
        assert!(max_abs_diff(&f.w, &want) <= 1e-10);
    }

    #[test]
    fn hermitian_potential_gives_unitary_frame() {
        let f = transport_frame(
            &pauli_model(),
            &CotangentPoint::new(vec![0.1], vec![2.0]),
            1.0,
            1e-3,
        )
        .unwrap();
        assert!(max_abs_diff(&dagger(&f.w).dot(&f.w), &CMat::eye(2)) <= 1e-9);
    }

    #[test]
    fn transport_at_zero_time_and_scalar_observables() {
        let p = pauli_model();
        let nu = CotangentPoint::new(vec![0.4], vec![1.0]);
        let a = matrix_observable();
        let at0 = ad_transport_symbol(&a, &p, &nu, 0.0, 1e-3).unwrap();
        assert!(max_abs_diff(&at0, &a.eval(0.4, 1.0)) <= 1e-15);
        let scalar =
            HomogeneousSymbol::even(0, TrigPoly::scalar(&[(1, c(1.0, 0.0))]).kron_identity(2));
        let got = ad_transport_symbol(&scalar, &p, &nu, 1.0, 1e-3).unwrap();
        assert!(max_abs_diff(&got, &scalar.eval(1.4, 1.0)) <= 1e-12);
    }

    #[test]
    fn transport_is_a_one_parameter_group() {
        let v = TrigPoly::from_entries(
            2,
            &[
                (1, 0, 1, c(0.4, 0.0)),
                (-1, 1, 0, c(0.4, 0.0)),
                (1, 0, 0, c(0.3, 0.0)),
                (-1, 0, 0, c(0.3, 0.0)),
            ],
        )
        .unwrap();
        let h = TrigPoly::scalar(&[(0, c(1.0, 0.0)), (1, c(0.1, 0.0)), (-1, c(0.1, 0.0))]);
        let p = CompleteSymbolOrder1::new(
            HomogeneousSymbol::even(1, h),
            HomogeneousSymbol::even(0, v),
            None,
        )
        .unwrap();
        let nu = CotangentPoint::new(vec![0.9], vec![1.0]);
        let a = matrix_observable();
        let (s, t) = (0.6, 0.8);
        let direct = ad_transport_symbol(&a, &p, &nu, s + t, 1e-3).unwrap();
        // a_{s+t}(ν) = W_ν(s) a_t(f_s ν) W_ν(s)⁻¹
        let first = transport_frame(&p, &nu, s, 1e-3).unwrap();
        let inner = ad_transport_symbol(&a, &p, &first.end, t, 1e-3).unwrap();
        let composed = first.w.dot(&inner).dot(&inverse(&first.w).unwrap());
        assert!(max_abs_diff(&direct, &composed) <= 1e-10);
    }

    #[test]
    fn derivative_identity_converges_at_first_order() {
        let v = TrigPoly::from_entries(
            2,
            &[
                (1, 0, 1, c(0.4, 0.2)),
                (-1, 1, 0, c(0.4, -0.2)),
                (0, 0, 0, c(0.5, 0.0)),
            ],
        )
        .unwrap();
        let h = TrigPoly::scalar(&[(0, c(1.0, 0.0)), (1, c(0.15, 0.0)), (-1, c(0.15, 0.0))]);
        let p = CompleteSymbolOrder1::new(
            HomogeneousSymbol::even(1, h),
            HomogeneousSymbol::even(0, v),
            None,
        )
        .unwrap();
        let a = matrix_observable();
        for (theta, xi) in [(0.3, 1.0), (2.0, -2.5), (5.0, 0.7)] {
            let nu = CotangentPoint::new(vec![theta], vec![xi]);
            let gen = transport_generator(&a, &p, &nu).unwrap();
            let base = a.eval(theta, xi);
            let err = |step: f64| {
                let moved = ad_transport_symbol(&a, &p, &nu, step, step / 10.0).unwrap();
                max_abs_diff(&(&moved - &base).mapv(|z| z / step), &gen)
            };
            let (e3, e4) = (err(1e-3), err(1e-4));
            assert!(e3 < 1e-2 && e4 < e3);
            let ratio = e3 / e4;
            assert!((7.0..13.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn sandwich_identity_for_reflection() {
        let t = Truncation::circle(24);
        let action = AffineIsometryAction::reflection();
        let p = sqrt_laplacian(t);
        let a = op_quantize(
            &HomogeneousSymbol::even(0, TrigPoly::scalar(&[(1, c(0.5, 0.0)), (-1, c(0.5, 0.0))])),
            t,
        )
        .unwrap();
        let ev = orbifold_heisenberg(&action, &p, &a, 1.1, None).unwrap();
        assert_eq!(ev.invariant_rank, 25);
        assert!(ev.discrepancy() <= 1e-10);
        let ev0 = orbifold_heisenberg(&action, &p, &a, 0.0, None).unwrap();
        let pi = invariant_projection(&action, t, None).unwrap();
        let sandwiched = pi.matmul(&a).unwrap().matmul(&pi).unwrap();
        assert!(ev0.lhs.max_abs_diff(&sandwiched).unwrap() <= 1e-12);
        assert!(ev0.rhs.max_abs_diff(&sandwiched).unwrap() <= 1e-12);
    }

    #[test]
    fn sandwich_identity_for_trivial_group() {
        let t = Truncation::circle(10);
        let p = build_first_order(
            &CompleteSymbolOrder1::with_potential(TrigPoly::scalar(&[
                (0, c(0.3, 0.0)),
                (2, c(0.1, 0.0)),
                (-2, c(0.1, 0.0)),
            ]))
            .unwrap(),
            t,
        )
        .unwrap();
        let a = shift_operator(t);
        let ev = orbifold_heisenberg(&AffineIsometryAction::trivial(1), &p, &a, 0.9, None).unwrap();
        let direct = heisenberg(&p, &a, 0.9).unwrap();
        assert!(ev.lhs.max_abs_diff(&direct).unwrap() <= 1e-10);
        assert!(ev.rhs.max_abs_diff(&direct).unwrap() <= 1e-10);
    }

    #[test]
    fn non_invariant_generator_rejected() {
        let t = Truncation::circle(10);
        let v = TrigPoly::scalar(&[(1, c(0.0, 0.5)), (-1, c(0.0, -0.5))]);
        let p = build_first_order(&CompleteSymbolOrder1::with_potential(v).unwrap(), t).unwrap();
        let r = orbifold_heisenberg(
            &AffineIsometryAction::reflection(),
            &p,
            &shift_operator(t),
            1.0,
            None,
        );
        assert!(matches!(r, Err(Error::NotInvariant(_))));
    }

    #[test]
    fn derivative_on_grid_points_matches_generator_sign() {
        // orientation check on a whole θ grid at one small step
        let p = pauli_model();
        let a = matrix_observable();
        for k in 0..16 {
            let nu = CotangentPoint::new(vec![k as f64 * TAU / 16.0], vec![1.5]);
            let step = 1e-4;
            let moved = ad_transport_symbol(&a, &p, &nu, step, 1e-5).unwrap();
            let fd = (&moved - &a.eval(nu.x[0], 1.5)).mapv(|z| z / step);
            assert!(max_abs_diff(&fd, &transport_generator(&a, &p, &nu).unwrap()) <= 1e-3);
        }
    }
}
