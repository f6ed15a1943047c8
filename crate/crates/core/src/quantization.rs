//! Fourier-truncated quantization of homogeneous symbols on the circle.
//!
//! A degree-`k` symbol `a(θ, ξ) = |ξ|^k a_{sgn ξ}(θ)` is quantized on the mode
//! window `{-N..=N}` by `B_{m',m} = â_{sgn m}(m' − m) |m|^k`, the left
//! (Kohn–Nirenberg) quantization restricted to exponentials. At `m = 0` the
//! two cone components are averaged and the weight `|0|^k` is `1` for
//! `k = 0` and `0` otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_actions::{AffineIsometryAction, UnitaryRep};
use crate::linalg::{hermitian_part, kron, CMat, C64, I};
use crate::modes::{OperatorMatrix, Truncation};
use crate::trigpoly::TrigPoly;

const SYMBOL_HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of_mode(m: i64) -> Sign {
        if m >= 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `|m|^k` with the zero-mode convention.
pub fn mode_weight(m: i64, degree: i32) -> f64 {
    if m == 0 {
        if degree == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (m.unsigned_abs() as f64).powi(degree)
    }
}

/// Positively homogeneous symbol on `T*S¹ ∖ 0`, matrix valued.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousSymbol {
    degree: i32,
    plus: TrigPoly,
    minus: TrigPoly,
}

impl HomogeneousSymbol {
    pub fn new(degree: i32, plus: TrigPoly, minus: TrigPoly) -> Result<Self> {
        if plus.size() != minus.size() {
            return Err(Error::InvalidSymbol(format!(
                "cone components have sizes {} and {}",
                plus.size(),
                minus.size()
            )));
        }
        let d = plus.degree().max(minus.degree());
        Ok(HomogeneousSymbol {
            degree,
            plus: plus.with_degree(d),
            minus: minus.with_degree(d),
        })
    }

    /// Same component on both halves of the cone.
    pub fn even(degree: i32, p: TrigPoly) -> Self {
        HomogeneousSymbol {
            degree,
            plus: p.clone(),
            minus: p,
        }
    }

    pub fn zero(degree: i32, size: usize) -> Self {
        HomogeneousSymbol::even(degree, TrigPoly::zero(size, 0))
    }

    /// `|ξ|` on the circle.
    pub fn abs_xi() -> Self {
        HomogeneousSymbol::even(1, TrigPoly::scalar_constant(C64::new(1.0, 0.0)))
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.plus.size()
    }

    /// Storage x-degree `D`.
    pub fn x_degree(&self) -> usize {
        self.plus.degree()
    }

    pub fn component(&self, sign: Sign) -> &TrigPoly {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    /// Component used at mode `m`, averaging the two halves at `m = 0`.
    pub fn mode_component(&self, m: i64) -> TrigPoly {
        match m.signum() {
            1 => self.plus.clone(),
            -1 => self.minus.clone(),
            _ => self.plus.add(&self.minus).scale(C64::new(0.5, 0.0)),
        }
    }

    /// `a(θ, ξ)`; the zero covector follows the quantization convention.
    pub fn eval(&self, theta: f64, xi: f64) -> CMat {
        if xi == 0.0 {
            let w = if self.degree == 0 { 1.0 } else { 0.0 };
            return self.mode_component(0).eval(theta).mapv(|z| z * w);
        }
        let s = if xi > 0.0 { Sign::Plus } else { Sign::Minus };
        let w = xi.abs().powi(self.degree);
        self.component(s).eval(theta).mapv(|z| z * w)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.plus.is_hermitian(tol) && self.minus.is_hermitian(tol)
    }

    pub fn adjoint(&self) -> Self {
        HomogeneousSymbol {
            degree: self.degree,
            plus: self.plus.adjoint(),
            minus: self.minus.adjoint(),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.size() != other.size() {
            return Err(Error::InvalidSymbol("symbol sizes differ".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::InvalidSymbol(
                "cannot add symbols of different degree".into(),
            ));
        }
        HomogeneousSymbol::new(
            self.degree,
            self.plus.add(&other.plus),
            self.minus.add(&other.minus),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        HomogeneousSymbol {
            degree: self.degree,
            plus: self.plus.scale(s),
            minus: self.minus.scale(s),
        }
    }

    /// Pointwise product; degrees add.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        HomogeneousSymbol::new(
            self.degree + other.degree,
            self.plus.mul(&other.plus),
            self.minus.mul(&other.minus),
        )
    }

    pub fn map_components<F: Fn(&TrigPoly) -> TrigPoly>(&self, f: F) -> Self {
        HomogeneousSymbol {
            degree: self.degree,
            plus: f(&self.plus),
            minus: f(&self.minus),
        }
    }

    /// `a ⊗ I_d` for a scalar symbol.
    pub fn kron_identity(&self, d: usize) -> Self {
        self.map_components(|p| p.kron_identity(d))
    }

    /// `∂_θ a`.
    pub fn derivative_theta(&self) -> Self {
        self.map_components(TrigPoly::derivative)
    }

    /// Pullback by the cotangent lift of a circle isometry `(θ, ξ) ↦ (σθ + b, σξ)`.
    pub fn pullback_affine(&self, sign: i64, offset: f64) -> Self {
        let (p, m) = if sign == 1 {
            (&self.plus, &self.minus)
        } else {
            (&self.minus, &self.plus)
        };
        HomogeneousSymbol {
            degree: self.degree,
            plus: p.compose_affine(sign, offset),
            minus: m.compose_affine(sign, offset),
        }
    }

    /// `a ∘ lift(g)`.
    pub fn pullback_lift(&self, action: &AffineIsometryAction, g: usize) -> Result<Self> {
        if action.dim() != 1 {
            return Err(Error::DimensionMismatch(
                "symbols live on the circle".into(),
            ));
        }
        action.group().check(g)?;
        let (sign, offset) = action.circle_map(g);
        Ok(self.pullback_affine(sign, offset))
    }

    /// `a(θ + s·v·t, ξ)`: pullback by the geodesic flow of `H = v|ξ|`.
    pub fn pullback_geodesic(&self, speed: f64, t: f64) -> Self {
        HomogeneousSymbol {
            degree: self.degree,
            plus: self.plus.shift(speed * t),
            minus: self.minus.shift(-speed * t),
        }
    }

    /// Largest coefficient deviation over both components.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.plus
            .max_coeff_diff(&other.plus)
            .max(self.minus.max_coeff_diff(&other.minus))
    }
}

/// Complete symbol `p₁ + p₀ (+ p₋₁)` of a first-order operator: `p₁` real and
/// scalar, `p₀` and `p₋₁` Hermitian `d × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteSymbolOrder1 {
    principal: HomogeneousSymbol,
    order_zero: HomogeneousSymbol,
    order_minus_one: Option<HomogeneousSymbol>,
}

impl CompleteSymbolOrder1 {
    pub fn new(
        principal: HomogeneousSymbol,
        order_zero: HomogeneousSymbol,
        order_minus_one: Option<HomogeneousSymbol>,
    ) -> Result<Self> {
        if principal.degree() != 1 || principal.size() != 1 {
            return Err(Error::InvalidSymbol(
                "principal symbol must be scalar of degree 1".into(),
            ));
        }
        if !principal.is_hermitian(SYMBOL_HERMITIAN_TOL) {
            return Err(Error::InvalidSymbol("principal symbol must be real".into()));
        }
        if order_zero.degree() != 0 {
            return Err(Error::InvalidSymbol("p0 must have degree 0".into()));
        }
        if !order_zero.is_hermitian(SYMBOL_HERMITIAN_TOL) {
            return Err(Error::NotHermitian {
                defect: order_zero.max_coeff_diff(&order_zero.adjoint()),
            });
        }
        if let Some(p) = &order_minus_one {
            if p.degree() != -1 || p.size() != order_zero.size() {
                return Err(Error::InvalidSymbol(
                    "p-1 must have degree -1 and the size of p0".into(),
                ));
            }
            if !p.is_hermitian(SYMBOL_HERMITIAN_TOL) {
                return Err(Error::NotHermitian {
                    defect: p.max_coeff_diff(&p.adjoint()),
                });
            }
        }
        Ok(CompleteSymbolOrder1 {
            principal,
            order_zero,
            order_minus_one,
        })
    }

    /// `|ξ| ⊗ I_d + V(θ)`.
    pub fn with_potential(potential: TrigPoly) -> Result<Self> {
        CompleteSymbolOrder1::new(
            HomogeneousSymbol::abs_xi(),
            HomogeneousSymbol::even(0, potential),
            None,
        )
    }

    pub fn principal(&self) -> &HomogeneousSymbol {
        &self.principal
    }

    pub fn order_zero(&self) -> &HomogeneousSymbol {
        &self.order_zero
    }

    pub fn order_minus_one(&self) -> Option<&HomogeneousSymbol> {
        self.order_minus_one.as_ref()
    }

    pub fn bundle(&self) -> usize {
        self.order_zero.size()
    }

    /// True when `p₁ = c|ξ|` with constant `c > 0` on both halves.
    pub fn metric_speed(&self) -> Option<f64> {
        let p = self.principal.component(Sign::Plus);
        let m = self.principal.component(Sign::Minus);
        let c = p.coeff_or_zero(0)[[0, 0]].re;
        let flat =
            |q: &TrigPoly| q.max_coeff_diff(&TrigPoly::scalar_constant(C64::new(c, 0.0))) == 0.0;
        (c > 0.0 && flat(p) && flat(m)).then_some(c)
    }

    /// Pullback of all components by a circle isometry.
    pub fn pullback_lift(&self, action: &AffineIsometryAction, g: usize) -> Result<Self> {
        Ok(CompleteSymbolOrder1 {
            principal: self.principal.pullback_lift(action, g)?,
            order_zero: self.order_zero.pullback_lift(action, g)?,
            order_minus_one: self
                .order_minus_one
                .as_ref()
                .map(|p| p.pullback_lift(action, g))
                .transpose()?,
        })
    }

    /// Largest coefficient change under pullback by any group element.
    pub fn invariance_defect(&self, action: &AffineIsometryAction) -> Result<f64> {
        let mut d = 0.0_f64;
        for g in action.group().elements() {
            let q = self.pullback_lift(action, g)?;
            d = d.max(q.principal.max_coeff_diff(&self.principal));
            d = d.max(q.order_zero.max_coeff_diff(&self.order_zero));
            if let (Some(a), Some(b)) = (&q.order_minus_one, &self.order_minus_one) {
                d = d.max(a.max_coeff_diff(b));
            }
        }
        Ok(d)
    }
}

fn check_circle(trunc: &Truncation) -> Result<()> {
    if trunc.dim != 1 {
        return Err(Error::DimensionMismatch(
            "symbol quantization is defined on the circle".into(),
        ));
    }
    Ok(())
}

/// `op(a)` on the window.
pub fn op_quantize(a: &HomogeneousSymbol, trunc: Truncation) -> Result<OperatorMatrix> {
    check_circle(&trunc)?;
    let d = trunc.bundle;
    if a.size() != d {
        return Err(Error::DimensionMismatch(format!(
            "symbol size {} on a rank-{d} window",
            a.size()
        )));
    }
    let n = trunc.cutoff as i64;
    let zero = a.mode_component(0);
    let mut out = OperatorMatrix::zeros(trunc);
    for m in -n..=n {
        let w = mode_weight(m, a.degree());
        if w == 0.0 {
            continue;
        }
        let comp = match m.signum() {
            1 => &a.plus,
            -1 => &a.minus,
            _ => &zero,
        };
        for (j, c) in comp.coeffs() {
            let mp = m + j;
            if mp.abs() > n {
                continue;
            }
            let r0 = ((mp + n) as usize) * d;
            let c0 = ((m + n) as usize) * d;
            for i in 0..d {
                for k in 0..d {
                    out.data[[r0 + i, c0 + k]] = c[[i, k]] * w;
                }
            }
        }
    }
    Ok(out)
}

/// `b(θ; m) = Σ_{m'} B_{m',m} e^{i(m'−m)θ}` over the window.
pub fn symbol_from_matrix(b: &OperatorMatrix, m: i64) -> Result<TrigPoly> {
    let trunc = b.trunc;
    check_circle(&trunc)?;
    let n = trunc.cutoff as i64;
    if m.abs() > n {
        return Err(Error::DimensionMismatch(format!(
            "mode {m} outside the window"
        )));
    }
    let d = trunc.bundle;
    let degree = (n + m.abs()) as usize;
    let mut coeffs = vec![CMat::zeros((d, d)); 2 * degree + 1];
    let c0 = ((m + n) as usize) * d;
    for mp in -n..=n {
        let r0 = ((mp + n) as usize) * d;
        let slot = &mut coeffs[(mp - m + degree as i64) as usize];
        for i in 0..d {
            for k in 0..d {
                slot[[i, k]] = b.data[[r0 + i, c0 + k]];
            }
        }
    }
    TrigPoly::from_coeffs(degree, coeffs)
}

/// `Π = |K|⁻¹ Σ_k U_k ⊗ ρ(k)`; `ρ` defaults to the trivial representation.
pub fn invariant_projection(
    action: &AffineIsometryAction,
    trunc: Truncation,
    rep: Option<&UnitaryRep>,
) -> Result<OperatorMatrix> {
    let scalar = Truncation { bundle: 1, ..trunc };
    if let Some(r) = rep {
        if r.dim() != trunc.bundle {
            return Err(Error::DimensionMismatch(
                "representation rank differs from the bundle".into(),
            ));
        }
    }
    let order = action.order() as f64;
    let mut acc = CMat::zeros((trunc.matrix_dim(), trunc.matrix_dim()));
    for k in action.group().elements() {
        let u = action.mode_action(k, scalar)?;
        let rho = match rep {
            Some(r) => r.matrix(k).clone(),
            None => CMat::eye(trunc.bundle),
        };
        acc = acc + kron(&u.data, &rho);
    }
    OperatorMatrix::new(trunc, acc.mapv(|z| z / order))
}

/// `diag(|m|) ⊗ I_d` (Euclidean `|m|` on the 2-torus).
pub fn sqrt_laplacian(trunc: Truncation) -> OperatorMatrix {
    let mut out = OperatorMatrix::zeros(trunc);
    let d = trunc.bundle;
    for (k, mode) in trunc.modes().enumerate() {
        let norm = (mode.iter().map(|m| (m * m) as f64).sum::<f64>()).sqrt();
        for i in 0..d {
            out.data[[k * d + i, k * d + i]] = C64::new(norm, 0.0);
        }
    }
    out.hermitized = false;
    out
}

/// Hermitian part of `op(p₁) ⊗ I + op(p₀) [+ op(p₋₁)]`.
pub fn build_first_order(p: &CompleteSymbolOrder1, trunc: Truncation) -> Result<OperatorMatrix> {
    if p.bundle() != trunc.bundle {
        return Err(Error::DimensionMismatch(
            "complete symbol size differs from the window bundle".into(),
        ));
    }
    let mut raw = op_quantize(&p.principal.kron_identity(trunc.bundle), trunc)?;
    raw = raw.add(&op_quantize(&p.order_zero, trunc)?)?;
    if let Some(q) = &p.order_minus_one {
        raw = raw.add(&op_quantize(q, trunc)?)?;
    }
    Ok(OperatorMatrix {
        trunc,
        data: hermitian_part(&raw.data),
        hermitized: true,
    })
}

/// `sub(P) = p₀ − (1/2i) ∂_θ∂_ξ p₁`. For `p₁ = h_±(θ)|ξ|` the correction is
/// `(i/2)·sgn ξ·h_±'(θ)`, a scalar.
pub fn subprincipal(p: &CompleteSymbolOrder1) -> HomogeneousSymbol {
    let d = p.bundle();
    let corr = |s: Sign| {
        p.principal
            .component(s)
            .derivative()
            .scale(I * 0.5 * s.value())
            .kron_identity(d)
    };
    let plus = p.order_zero.component(Sign::Plus).add(&corr(Sign::Plus));
    let minus = p.order_zero.component(Sign::Minus).add(&corr(Sign::Minus));
    HomogeneousSymbol::new(0, plus, minus).expect("components share a size")
}

/// `Π A Π`.
pub fn sandwich(pi: &OperatorMatrix, a: &OperatorMatrix) -> Result<OperatorMatrix> {
    pi.matmul(a)?.matmul(pi)
}
