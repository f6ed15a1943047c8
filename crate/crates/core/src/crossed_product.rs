//! Finite crossed products `C(S¹) ⋊ K` and their symbol algebra.
//!
//! Haar measure on `K` is the normalized counting measure, so the
//! convolution unit is `|K|·δ_e`. Every operation acts on exact Fourier
//! coefficients: the pullback by `h⁻¹` is a phased re-indexing.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group_actions::{AffineIsometryAction, TorusPoint, ISOTROPY_TOL};
use crate::linalg::{solve_small, spectral_norm, CMat, C64};
use crate::modes::{OperatorMatrix, Truncation};
use crate::quantization::{mode_weight, op_quantize, HomogeneousSymbol, Sign};
use crate::symplectic_flows::{HamiltonianKind, HamiltonianSpec};
use crate::trigpoly::TrigPoly;

/// Smallest grid accepted by [`reduced_norm`].
pub const MIN_NORM_GRID: usize = 64;
const PIVOT_TOL: f64 = 1e-10;

fn circle_action(action: &AffineIsometryAction) -> Result<()> {
    if action.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "crossed products are built over the circle".into(),
        ));
    }
    Ok(())
}

fn same_action(a: &Arc<AffineIsometryAction>, b: &Arc<AffineIsometryAction>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::InvalidGroup(format!(
            "actions `{}` and `{}` differ",
            a.name(),
            b.name()
        )))
    }
}

/// One coefficient of a crossed function or symbol. `sign: None` sets both
/// cone components (ignored for functions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossedTerm {
    pub element: usize,
    pub sign: Option<Sign>,
    pub freq: i64,
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

/// `f(x, k)`, one matrix trigonometric polynomial per group element.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossedFunction {
    action: Arc<AffineIsometryAction>,
    comps: Vec<TrigPoly>,
}

impl CrossedFunction {
    pub fn new(action: Arc<AffineIsometryAction>, comps: Vec<TrigPoly>) -> Result<Self> {
        circle_action(&action)?;
        if comps.len() != action.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} components for a group of order {}",
                comps.len(),
                action.order()
            )));
        }
        let size = comps[0].size();
        if comps.iter().any(|c| c.size() != size) {
            return Err(Error::DimensionMismatch("component sizes differ".into()));
        }
        let degree = comps.iter().map(TrigPoly::degree).max().unwrap_or(0);
        let comps = comps.into_iter().map(|c| c.with_degree(degree)).collect();
        Ok(CrossedFunction { action, comps })
    }

    pub fn zero(action: Arc<AffineIsometryAction>, size: usize) -> Result<Self> {
        let order = action.order();
        CrossedFunction::new(action, vec![TrigPoly::zero(size, 0); order])
    }

    /// `|K|·δ_e ⊗ I`.
    pub fn unit(action: Arc<AffineIsometryAction>, size: usize) -> Result<Self> {
        let mut f = CrossedFunction::zero(action, size)?;
        let order = f.order() as f64;
        f.comps[0] = TrigPoly::constant(CMat::eye(size).mapv(|z| z * order));
        Ok(f)
    }

    pub fn from_terms(
        action: Arc<AffineIsometryAction>,
        size: usize,
        terms: &[CrossedTerm],
    ) -> Result<Self> {
        let order = action.order();
        let mut comps = Vec::with_capacity(order);
        for k in 0..order {
            let own: Vec<(i64, usize, usize, C64)> = terms
                .iter()
                .filter(|t| t.element == k)
                .map(|t| (t.freq, t.row, t.col, t.value))
                .collect();
            comps.push(TrigPoly::from_entries(size, &own)?);
        }
        if let Some(t) = terms.iter().find(|t| t.element >= order) {
            return Err(Error::UnknownElement {
                element: t.element,
                order,
            });
        }
        CrossedFunction::new(action, comps)
    }

    pub fn action(&self) -> &Arc<AffineIsometryAction> {
        &self.action
    }

    pub fn order(&self) -> usize {
        self.comps.len()
    }

    pub fn size(&self) -> usize {
        self.comps[0].size()
    }

    pub fn degree(&self) -> usize {
        self.comps[0].degree()
    }

    pub fn component(&self, k: usize) -> Result<&TrigPoly> {
        self.action.group().check(k)?;
        Ok(&self.comps[k])
    }

    pub fn components(&self) -> &[TrigPoly] {
        &self.comps
    }

    pub fn eval(&self, x: f64, k: usize) -> Result<CMat> {
        Ok(self.component(k)?.eval(x))
    }

    /// `p ∘ g` for the element `g`.
    fn pull(&self, p: &TrigPoly, g: usize) -> TrigPoly {
        let (sign, offset) = self.action.circle_map(g);
        p.compose_affine(sign, offset)
    }

    /// `(f∗g)(x, k) = |K|⁻¹ Σ_h f(x, h) g(h⁻¹x, h⁻¹k)`, summed in element order.
    pub fn convolve(&self, other: &CrossedFunction) -> Result<CrossedFunction> {
        same_action(&self.action, &other.action)?;
        if self.size() != other.size() {
            return Err(Error::DimensionMismatch("component sizes differ".into()));
        }
        let group = self.action.group();
        let inv_order = C64::new(1.0 / self.order() as f64, 0.0);
        let mut comps = Vec::with_capacity(self.order());
        for k in group.elements() {
            let mut acc = TrigPoly::zero(self.size(), self.degree() + other.degree());
            for h in group.elements() {
                let hinv = group.inv(h);
                let g = self.pull(&other.comps[group.mul(hinv, k)], hinv);
                acc = acc.add(&self.comps[h].mul(&g));
            }
            comps.push(acc.scale(inv_order));
        }
        CrossedFunction::new(self.action.clone(), comps)
    }

    /// `f*(x, k) = f(k⁻¹x, k⁻¹)*`.
    pub fn involution(&self) -> CrossedFunction {
        let group = self.action.group();
        let comps = group
            .elements()
            .map(|k| {
                let kinv = group.inv(k);
                self.pull(&self.comps[kinv], kinv).adjoint()
            })
            .collect();
        CrossedFunction {
            action: self.action.clone(),
            comps,
        }
    }

    pub fn add(&self, other: &CrossedFunction) -> Result<CrossedFunction> {
        same_action(&self.action, &other.action)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.add(b))
            .collect();
        CrossedFunction::new(self.action.clone(), comps)
    }

    pub fn scale(&self, s: C64) -> CrossedFunction {
        CrossedFunction {
            action: self.action.clone(),
            comps: self.comps.iter().map(|c| c.scale(s)).collect(),
        }
    }

    pub fn max_coeff_diff(&self, other: &CrossedFunction) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Arrow `(x, k)` of the transformation groupoid `M ⋊ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidElement {
    pub x: TorusPoint,
    pub k: usize,
}

impl GroupoidElement {
    pub fn new(x: TorusPoint, k: usize) -> Self {
        GroupoidElement { x, k }
    }
}

/// `s(x, k) = k⁻¹x`.
pub fn source(action: &AffineIsometryAction, gamma: &GroupoidElement) -> Result<TorusPoint> {
    action.act(
        action
            .group()
            .inv(action.group().check(gamma.k).map(|_| gamma.k)?),
        &gamma.x,
    )
}

/// `r(x, k) = x`.
pub fn target(action: &AffineIsometryAction, gamma: &GroupoidElement) -> Result<TorusPoint> {
    action.group().check(gamma.k)?;
    Ok(gamma.x.clone())
}

pub fn composable(
    action: &AffineIsometryAction,
    a: &GroupoidElement,
    b: &GroupoidElement,
) -> Result<bool> {
    Ok(source(action, a)?.distance(&target(action, b)?) <= ISOTROPY_TOL)
}

/// `(x, k)(k⁻¹x, h) = (x, kh)`; `None` when `s(a) ≠ r(b)`.
pub fn compose(
    action: &AffineIsometryAction,
    a: &GroupoidElement,
    b: &GroupoidElement,
) -> Result<Option<GroupoidElement>> {
    if !composable(action, a, b)? {
        return Ok(None);
    }
    Ok(Some(GroupoidElement {
        x: a.x.clone(),
        k: action.group().mul(a.k, b.k),
    }))
}

pub fn groupoid_inverse(
    action: &AffineIsometryAction,
    gamma: &GroupoidElement,
) -> Result<GroupoidElement> {
    Ok(GroupoidElement {
        x: source(action, gamma)?,
        k: action.group().inv(gamma.k),
    })
}

/// `R(f) = |K|⁻¹ Σ_k M_{f(·,k)} U_k` on the window.
pub fn represent(f: &CrossedFunction, trunc: Truncation) -> Result<OperatorMatrix> {
    crossed_quantize(&CrossedSymbol::from_function(f), trunc).map(|op| op.matrix)
}

/// `R_x(f)` on `L²(K) ⊗ C^d`: block `(k, k₁)` is `|K|⁻¹ f(k⁻¹x, k⁻¹k₁)`.
pub fn fiber_represent(f: &CrossedFunction, x: f64) -> CMat {
    let group = f.action.group();
    let (order, d) = (f.order(), f.size());
    let inv_order = 1.0 / order as f64;
    let mut out = CMat::zeros((order * d, order * d));
    for k in group.elements() {
        let kinv = group.inv(k);
        let y = f.action.maps()[kinv].apply(&[x])[0];
        let values: Vec<CMat> = f.comps.iter().map(|c| c.eval(y)).collect();
        for k1 in group.elements() {
            let block = &values[group.mul(kinv, k1)];
            for i in 0..d {
                for j in 0..d {
                    out[[k * d + i, k1 * d + j]] = block[[i, j]] * inv_order;
                }
            }
        }
    }
    out
}

/// Grid estimate of `sup_x ‖R_x(f)‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedNorm {
    /// Maximum over the `points`-point grid (a lower bound for the sup).
    pub value: f64,
    /// `|value − max over the half grid|`.
    pub refinement_delta: f64,
    /// Lipschitz constant of `x ↦ ‖R_x(f)‖`.
    pub lipschitz_bound: f64,
    pub points: usize,
}

impl ReducedNorm {
    /// Bound on `sup − value` from the grid spacing.
    pub fn sup_gap_bound(&self) -> f64 {
        self.lipschitz_bound * std::f64::consts::PI / self.points as f64
    }
}

pub fn reduced_norm(f: &CrossedFunction, points: usize) -> Result<ReducedNorm> {
    if points < MIN_NORM_GRID {
        return Err(Error::Config(format!(
            "reduced norm grid needs at least {MIN_NORM_GRID} points"
        )));
    }
    let mut norms = Vec::with_capacity(points);
    for j in 0..points {
        let x = std::f64::consts::TAU * j as f64 / points as f64;
        norms.push(spectral_norm(&fiber_represent(f, x))?);
    }
    let value = norms.iter().copied().fold(0.0, f64::max);
    let coarse = norms.iter().step_by(2).copied().fold(0.0, f64::max);
    let order = f.order() as f64;
    let lip_sq: f64 = f.comps.iter().map(|c| c.lipschitz_bound().powi(2)).sum();
    Ok(ReducedNorm {
        value,
        refinement_delta: value - coarse,
        lipschitz_bound: (lip_sq / order).sqrt(),
        points,
    })
}

/// `a(ν, k)`, one homogeneous symbol per group element, common degree.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossedSymbol {
    action: Arc<AffineIsometryAction>,
    comps: Vec<HomogeneousSymbol>,
}

impl CrossedSymbol {
    pub fn new(action: Arc<AffineIsometryAction>, comps: Vec<HomogeneousSymbol>) -> Result<Self> {
        circle_action(&action)?;
        if comps.len() != action.order() {
            return Err(Error::DimensionMismatch(
                "one symbol per group element".into(),
            ));
        }
        let (degree, size) = (comps[0].degree(), comps[0].size());
        if comps
            .iter()
            .any(|c| c.degree() != degree || c.size() != size)
        {
            return Err(Error::InvalidSymbol(
                "crossed symbol components need a common degree and size".into(),
            ));
        }
        Ok(CrossedSymbol { action, comps })
    }

    /// `π_G* f`: the degree-0 symbol constant along the fibers.
    pub fn from_function(f: &CrossedFunction) -> Self {
        CrossedSymbol {
            action: f.action.clone(),
            comps: f
                .comps
                .iter()
                .map(|c| HomogeneousSymbol::even(0, c.clone()))
                .collect(),
        }
    }

    pub fn from_terms(
        action: Arc<AffineIsometryAction>,
        degree: i32,
        size: usize,
        terms: &[CrossedTerm],
    ) -> Result<Self> {
        let order = action.order();
        if let Some(t) = terms.iter().find(|t| t.element >= order) {
            return Err(Error::UnknownElement {
                element: t.element,
                order,
            });
        }
        let mut comps = Vec::with_capacity(order);
        for k in 0..order {
            let pick = |s: Sign| -> Result<TrigPoly> {
                let own: Vec<(i64, usize, usize, C64)> = terms
                    .iter()
                    .filter(|t| t.element == k && t.sign.is_none_or(|ts| ts == s))
                    .map(|t| (t.freq, t.row, t.col, t.value))
                    .collect();
                TrigPoly::from_entries(size, &own)
            };
            comps.push(HomogeneousSymbol::new(
                degree,
                pick(Sign::Plus)?,
                pick(Sign::Minus)?,
            )?);
        }
        CrossedSymbol::new(action, comps)
    }

    pub fn zero(action: Arc<AffineIsometryAction>, degree: i32, size: usize) -> Result<Self> {
        let order = action.order();
        CrossedSymbol::new(action, vec![HomogeneousSymbol::zero(degree, size); order])
    }

    pub fn action(&self) -> &Arc<AffineIsometryAction> {
        &self.action
    }

    pub fn degree(&self) -> i32 {
        self.comps[0].degree()
    }

    pub fn size(&self) -> usize {
        self.comps[0].size()
    }

    pub fn x_degree(&self) -> usize {
        self.comps
            .iter()
            .map(HomogeneousSymbol::x_degree)
            .max()
            .unwrap_or(0)
    }

    pub fn component(&self, k: usize) -> Result<&HomogeneousSymbol> {
        self.action.group().check(k)?;
        Ok(&self.comps[k])
    }

    pub fn components(&self) -> &[HomogeneousSymbol] {
        &self.comps
    }

    /// Fiberwise convolution with the cotangent-lifted action:
    /// `(a∗b)(ν, k) = |K|⁻¹ Σ_h a(ν, h) b(h⁻¹ν, h⁻¹k)`.
    pub fn convolve(&self, other: &CrossedSymbol) -> Result<CrossedSymbol> {
        same_action(&self.action, &other.action)?;
        let group = self.action.group();
        let inv_order = C64::new(1.0 / group.order() as f64, 0.0);
        let mut comps = Vec::with_capacity(group.order());
        for k in group.elements() {
            let mut acc: Option<HomogeneousSymbol> = None;
            for h in group.elements() {
                let hinv = group.inv(h);
                let b = other.comps[group.mul(hinv, k)].pullback_lift(&self.action, hinv)?;
                let term = self.comps[h].mul(&b)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
            comps.push(acc.expect("group is nonempty").scale(inv_order));
        }
        CrossedSymbol::new(self.action.clone(), comps)
    }

    /// `a*(ν, k) = a(k⁻¹ν, k⁻¹)*`.
    pub fn involution(&self) -> Result<CrossedSymbol> {
        let group = self.action.group();
        let comps = group
            .elements()
            .map(|k| {
                let kinv = group.inv(k);
                self.comps[kinv]
                    .pullback_lift(&self.action, kinv)
                    .map(|c| c.adjoint())
            })
            .collect::<Result<Vec<_>>>()?;
        CrossedSymbol::new(self.action.clone(), comps)
    }

    pub fn max_coeff_diff(&self, other: &CrossedSymbol) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `F_t* a = a ∘ F_t` with `F_t(ν, k) = (f_t ν, k)`, in closed form for the
/// metric-norm Hamiltonian `g^{-1/2}|ξ|` on the circle.
pub fn nc_flow_pullback(a: &CrossedSymbol, h: &HamiltonianSpec, t: f64) -> Result<CrossedSymbol> {
    let speed = match h.kind() {
        HamiltonianKind::MetricNorm { inverse_metric } if inverse_metric.len() == 1 => {
            inverse_metric[0].sqrt()
        }
        HamiltonianKind::MetricNorm { .. } => {
            return Err(Error::PullbackUnavailable(
                "metric norm on the 2-torus".into(),
            ));
        }
        HamiltonianKind::ClosedForm(_) => {
            return Err(Error::PullbackUnavailable(
                "Hamiltonian is not a metric norm".into(),
            ));
        }
    };
    if !t.is_finite() {
        return Err(Error::InvalidFlow("flow time must be finite".into()));
    }
    let comps = a
        .comps
        .iter()
        .map(|c| c.pullback_geodesic(speed, t))
        .collect();
    CrossedSymbol::new(a.action.clone(), comps)
}

/// Output of [`crossed_quantize`], carrying the data needed to peel its
/// `U_k` components.
#[derive(Clone, Debug)]
pub struct CrossedOperator {
    pub matrix: OperatorMatrix,
    pub degree: i32,
    pub action: Arc<AffineIsometryAction>,
}

impl CrossedOperator {
    /// Same class data around another matrix (e.g. an evolved operator).
    pub fn with_matrix(&self, matrix: OperatorMatrix) -> Result<CrossedOperator> {
        if matrix.trunc != self.matrix.trunc {
            return Err(Error::DimensionMismatch("truncations differ".into()));
        }
        Ok(CrossedOperator {
            matrix,
            degree: self.degree,
            action: self.action.clone(),
        })
    }
}

/// `|K|⁻¹ Σ_k op(a(·,·,k)) U_k`.
pub fn crossed_quantize(a: &CrossedSymbol, trunc: Truncation) -> Result<CrossedOperator> {
    if trunc.bundle != a.size() {
        return Err(Error::DimensionMismatch(
            "symbol size differs from the window bundle".into(),
        ));
    }
    let mut acc = OperatorMatrix::zeros(trunc);
    for k in a.action.group().elements() {
        let u = a.action.mode_action(k, trunc)?;
        acc = acc.add(&op_quantize(&a.comps[k], trunc)?.matmul(&u)?)?;
    }
    let matrix = acc.scale(C64::new(1.0 / a.action.order() as f64, 0.0));
    Ok(CrossedOperator {
        matrix,
        degree: a.degree(),
        action: a.action.clone(),
    })
}

/// Elements sharing `A_k = σ`, in element order.
fn class_of(action: &AffineIsometryAction, sigma: i64) -> Vec<usize> {
    action
        .group()
        .elements()
        .filter(|&k| action.circle_map(k).0 == sigma)
        .collect()
}

struct Peeled {
    /// `x[k_index][j]` = `â_{k,s}(j)` for `|j| ≤ width`.
    coeffs: Vec<Vec<CMat>>,
    width: i64,
    residual: f64,
}

/// Recovers the `U_k` components of one orientation class at mode `m`.
///
/// Column `σ m'` of `|K|⁻¹ Σ_k op(a_k) U_k` carries, at rows `m' + j`, the sum
/// `|K|⁻¹ Σ_{A_k = σ} e^{-i m' b_k} |m'|^deg â_{k, sgn m'}(j)`. Reading
/// `L = #class` consecutive columns `m' = m + sℓ` gives an `L × L` system per
/// `(j, i, i')`. The next column `m + sL` is predicted from the solution and
/// its mismatch reported as the residual.
fn peel_class(op: &CrossedOperator, m: i64, sigma: i64) -> Result<Option<(Vec<usize>, Peeled)>> {
    let class = class_of(&op.action, sigma);
    if class.is_empty() {
        return Ok(None);
    }
    let trunc = op.matrix.trunc;
    let n = trunc.cutoff as i64;
    let d = trunc.bundle;
    let s = if m >= 0 { 1 } else { -1 };
    let l = class.len() as i64;
    if m == 0 || (m + s * l).abs() > n {
        return Err(Error::NotRecoverable(format!(
            "mode {m} leaves no room for {} probe columns",
            l + 1
        )));
    }
    let width = m.abs() - 1;
    let inv_order = 1.0 / op.action.order() as f64;
    let system_entry = |mp: i64, k: usize| {
        let b = op.action.circle_map(k).1;
        C64::from_polar(inv_order * mode_weight(mp, op.degree), -(mp as f64) * b)
    };
    let mut v = CMat::zeros((l as usize, l as usize));
    for ell in 0..l {
        for (ci, &k) in class.iter().enumerate() {
            v[[ell as usize, ci]] = system_entry(m + s * ell, k);
        }
    }
    let js: Vec<i64> = (-width..=width).collect();
    let rhs_cols = js.len() * d * d;
    let read = |mp: i64, j: i64, i: usize, ii: usize| -> C64 {
        let row = mp + j;
        if row.abs() > n {
            return C64::new(0.0, 0.0);
        }
        let r = trunc.index1(row, i).expect("row inside window");
        let c = trunc.index1(sigma * mp, ii).expect("column inside window");
        op.matrix.data[[r, c]]
    };
    let mut rhs = CMat::zeros((l as usize, rhs_cols));
    for ell in 0..l {
        let mp = m + s * ell;
        for (ji, &j) in js.iter().enumerate() {
            for i in 0..d {
                for ii in 0..d {
                    rhs[[ell as usize, (ji * d + i) * d + ii]] = read(mp, j, i, ii);
                }
            }
        }
    }
    let x = solve_small(
        &v,
        &rhs,
        PIVOT_TOL * v.iter().fold(0.0_f64, |a, z| a.max(z.norm())),
    )
    .ok_or_else(|| Error::NotRecoverable(format!("singular U_k system at mode {m}")))?;

    let probe = m + s * l;
    let mut residual = 0.0_f64;
    for (ji, &j) in js.iter().enumerate() {
        if (probe + j).abs() > n {
            continue;
        }
        for i in 0..d {
            for ii in 0..d {
                let col = (ji * d + i) * d + ii;
                let predicted: C64 = class
                    .iter()
                    .enumerate()
                    .map(|(ci, &k)| system_entry(probe, k) * x[[ci, col]])
                    .sum();
                residual = residual.max((predicted - read(probe, j, i, ii)).norm());
            }
        }
    }
    let coeffs = (0..class.len())
        .map(|ci| {
            (0..js.len())
                .map(|ji| {
                    let mut c = CMat::zeros((d, d));
                    for i in 0..d {
                        for ii in 0..d {
                            c[[i, ii]] = x[[ci, (ji * d + i) * d + ii]];
                        }
                    }
                    c
                })
                .collect()
        })
        .collect();
    Ok(Some((
        class,
        Peeled {
            coeffs,
            width,
            residual,
        },
    )))
}

/// Symbol of the `k`-component at mode `m`: `a_{k, sgn m}(θ) |m|^deg`,
/// truncated to frequencies `|j| < |m|`. Requires the x-degree of the
/// components to stay below `|m|` and `|m| + #class ≤ N`.
pub fn crossed_symbol_of(op: &CrossedOperator, m: i64, k: usize) -> Result<TrigPoly> {
    op.action.group().check(k)?;
    let sigma = op.action.circle_map(k).0;
    let (class, peeled) = peel_class(op, m, sigma)?.expect("class of k is nonempty");
    let ci = class
        .iter()
        .position(|&c| c == k)
        .expect("k belongs to its class");
    let w = mode_weight(m, op.degree);
    let coeffs = peeled.coeffs[ci]
        .iter()
        .map(|c| c.mapv(|z| z * w))
        .collect();
    TrigPoly::from_coeffs(peeled.width as usize, coeffs)
}

/// Largest mismatch between the extra probe columns and their prediction
/// from the peeled components; near zero when the operator lies in the
/// span `Σ_k op(a_k) U_k`.
pub fn decomposition_residual(op: &CrossedOperator, m: i64) -> Result<f64> {
    let mut r = 0.0_f64;
    for sigma in [1, -1] {
        if let Some((_, p)) = peel_class(op, m, sigma)? {
            r = r.max(p.residual);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::SpectralDecomposition;
    use crate::linalg::{dagger, max_abs_diff};
    use crate::quantization::sqrt_laplacian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn groups() -> Vec<Arc<AffineIsometryAction>> {
        vec![
            Arc::new(AffineIsometryAction::reflection()),
            Arc::new(AffineIsometryAction::rotation(2).unwrap()),
            Arc::new(AffineIsometryAction::rotation(4).unwrap()),
            Arc::new(AffineIsometryAction::dihedral(2).unwrap()),
            Arc::new(AffineIsometryAction::dihedral(4).unwrap()),
        ]
    }

    fn random_poly(rng: &mut ChaCha8Rng, size: usize, degree: usize) -> TrigPoly {
        let coeffs = (0..2 * degree + 1)
            .map(|_| {
                CMat::from_shape_fn((size, size), |_| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        TrigPoly::from_coeffs(degree, coeffs).unwrap()
    }

    fn random_function(
        rng: &mut ChaCha8Rng,
        action: &Arc<AffineIsometryAction>,
        size: usize,
        degree: usize,
    ) -> CrossedFunction {
        let comps = (0..action.order())
            .map(|_| random_poly(rng, size, degree))
            .collect();
        CrossedFunction::new(action.clone(), comps).unwrap()
    }

    fn random_symbol(
        rng: &mut ChaCha8Rng,
        action: &Arc<AffineIsometryAction>,
        size: usize,
        degree: usize,
    ) -> CrossedSymbol {
        let comps = (0..action.order())
            .map(|_| {
                HomogeneousSymbol::new(
                    0,
                    random_poly(rng, size, degree),
                    random_poly(rng, size, degree),
                )
                .unwrap()
            })
            .collect();
        CrossedSymbol::new(action.clone(), comps).unwrap()
    }

    #[test]
    fn two_element_convolution_example() {
        let z2 = Arc::new(AffineIsometryAction::reflection());
        let f = CrossedFunction::new(
            z2.clone(),
            vec![TrigPoly::scalar_constant(c(1.0, 0.0)), TrigPoly::zero(1, 0)],
        )
        .unwrap();
        let cos = TrigPoly::scalar(&[(1, c(0.5, 0.0)), (-1, c(0.5, 0.0))]);
        let g = CrossedFunction::new(z2, vec![TrigPoly::zero(1, 0), cos.clone()]).unwrap();
        let fg = f.convolve(&g).unwrap();
        assert!(fg.components()[1].max_coeff_diff(&cos.scale(c(0.5, 0.0))) <= 1e-15);
        assert!(fg.components()[0].max_coeff() <= 1e-15);
    }

    #[test]
    fn algebra_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for action in groups() {
            for size in [1, 2] {
                let f = random_function(&mut rng, &action, size, 3);
                let g = random_function(&mut rng, &action, size, 2);
                let h = random_function(&mut rng, &action, size, 4);
                let u = CrossedFunction::unit(action.clone(), size).unwrap();
                assert!(u.convolve(&f).unwrap().max_coeff_diff(&f) <= 1e-13);
                assert!(f.convolve(&u).unwrap().max_coeff_diff(&f) <= 1e-13);
                let left = f.convolve(&g).unwrap().convolve(&h).unwrap();
                let right = f.convolve(&g.convolve(&h).unwrap()).unwrap();
                assert!(left.max_coeff_diff(&right) <= 1e-13);
                assert!(f.involution().involution().max_coeff_diff(&f) <= 1e-13);
                let lhs = f.convolve(&g).unwrap().involution();
                let rhs = g.involution().convolve(&f.involution()).unwrap();
                assert!(lhs.max_coeff_diff(&rhs) <= 1e-13);
            }
        }
    }

    #[test]
    fn real_constant_symmetric_function_is_self_adjoint() {
        let d2 = Arc::new(AffineIsometryAction::dihedral(2).unwrap());
        let group = d2.group().clone();
        let vals = [2.0, 0.5, -1.0, 0.5];
        let mut comps: Vec<TrigPoly> = vals
            .iter()
            .map(|v| TrigPoly::scalar_constant(c(*v, 0.0)))
            .collect();
        for k in group.elements() {
            comps[group.inv(k)] = comps[k].clone();
        }
        let f = CrossedFunction::new(d2, comps).unwrap();
        assert!(f.involution().max_coeff_diff(&f) <= 1e-15);
    }

    #[test]
    fn mismatched_groups_rejected() {
        let a =
            CrossedFunction::unit(Arc::new(AffineIsometryAction::rotation(2).unwrap()), 1).unwrap();
        let b = CrossedFunction::unit(Arc::new(AffineIsometryAction::reflection()), 1).unwrap();
        assert!(matches!(a.convolve(&b), Err(Error::InvalidGroup(_))));
    }

    #[test]
    fn groupoid_examples() {
        let z2 = AffineIsometryAction::reflection();
        let g = GroupoidElement::new(TorusPoint::circle(1.0), 1);
        assert!((source(&z2, &g).unwrap().coords()[0] - (TAU - 1.0)).abs() <= 1e-15);
        let e = GroupoidElement::new(TorusPoint::circle(1.0), 0);
        assert_eq!(source(&z2, &e).unwrap(), target(&z2, &e).unwrap());
    }

    #[test]
    fn groupoid_identities_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for action in groups() {
            let group = action.group();
            for _ in 0..20 {
                let x = TorusPoint::circle(rng.random_range(0.0..TAU));
                for k1 in group.elements() {
                    let a = GroupoidElement::new(x.clone(), k1);
                    let y = source(&action, &a).unwrap();
                    for k2 in group.elements() {
                        let b = GroupoidElement::new(y.clone(), k2);
                        let ab = compose(&action, &a, &b)
                            .unwrap()
                            .expect("composable by construction");
                        assert!(
                            target(&action, &ab)
                                .unwrap()
                                .distance(&target(&action, &a).unwrap())
                                <= 1e-12
                        );
                        assert!(
                            source(&action, &ab)
                                .unwrap()
                                .distance(&source(&action, &b).unwrap())
                                <= 1e-12
                        );
                    }
                    let inv = groupoid_inverse(&action, &a).unwrap();
                    let id = compose(&action, &a, &inv).unwrap().unwrap();
                    assert_eq!(id.k, group.identity());
                }
            }
        }
        let z2 = AffineIsometryAction::reflection();
        let a = GroupoidElement::new(TorusPoint::circle(1.0), 0);
        let b = GroupoidElement::new(TorusPoint::circle(2.0), 1);
        assert!(compose(&z2, &a, &b).unwrap().is_none());
    }

    #[test]
    fn represent_unit_and_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 24usize;
        for action in groups() {
            for size in [1, 2] {
                let t = Truncation::circle_bundle(n, size);
                let unit = CrossedFunction::unit(action.clone(), size).unwrap();
                assert!(
                    represent(&unit, t)
                        .unwrap()
                        .max_abs_diff(&OperatorMatrix::identity(t))
                        .unwrap()
                        <= 1e-14
                );
                let dd = 3;
                let f = random_function(&mut rng, &action, size, dd);
                let g = random_function(&mut rng, &action, size, dd);
                let rf = represent(&f, t).unwrap();
                let rg = represent(&g, t).unwrap();
                let rfg = represent(&f.convolve(&g).unwrap(), t).unwrap();
                assert!(
                    rfg.block_diff(&rf.matmul(&rg).unwrap(), n - 2 * dd)
                        .unwrap()
                        <= 1e-12
                );
                let rstar = represent(&f.involution(), t).unwrap();
                assert!(rstar.block_diff(&rf.adjoint(), n - 2 * dd).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn fiber_representation_is_a_star_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for action in groups() {
            let f = random_function(&mut rng, &action, 2, 3);
            let g = random_function(&mut rng, &action, 2, 2);
            for _ in 0..10 {
                let x = rng.random_range(0.0..TAU);
                let unit = CrossedFunction::unit(action.clone(), 2).unwrap();
                assert!(
                    max_abs_diff(&fiber_represent(&unit, x), &CMat::eye(2 * action.order()))
                        <= 1e-15
                );
                let lhs = fiber_represent(&f.convolve(&g).unwrap(), x);
                let rhs = fiber_represent(&f, x).dot(&fiber_represent(&g, x));
                assert!(max_abs_diff(&lhs, &rhs) <= 1e-13);
                let star = fiber_represent(&f.involution(), x);
                assert!(max_abs_diff(&star, &dagger(&fiber_represent(&f, x))) <= 1e-13);
            }
        }
    }

    #[test]
    fn reduced_norm_examples() {
        let z4 = Arc::new(AffineIsometryAction::rotation(4).unwrap());
        let unit = CrossedFunction::unit(z4.clone(), 1).unwrap();
        assert!((reduced_norm(&unit, 64).unwrap().value - 1.0).abs() <= 1e-12);
        assert!(reduced_norm(&unit, 32).is_err());

        // supported at e: R_x is diagonal with entries |K|⁻¹ f(k⁻¹x, e)
        let p = TrigPoly::scalar(&[(0, c(1.0, 0.0)), (1, c(0.5, 0.0)), (-1, c(0.5, 0.0))]);
        let mut comps = vec![TrigPoly::zero(1, 0); 4];
        comps[0] = p.scale(c(4.0, 0.0));
        let f = CrossedFunction::new(z4, comps).unwrap();
        let r = reduced_norm(&f, 128).unwrap();
        assert!((r.value - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn reduced_norm_refinement_within_lipschitz_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for action in groups() {
            let f = random_function(&mut rng, &action, 2, 4);
            let coarse = reduced_norm(&f, 64).unwrap();
            let fine = reduced_norm(&f, 128).unwrap();
            assert!((fine.value - coarse.value).abs() <= coarse.sup_gap_bound() + 1e-12);
            assert!(fine.value + 1e-12 >= coarse.value);
            assert!(fine.refinement_delta >= 0.0);
        }
    }

    #[test]
    fn crossed_quantize_examples() {
        let z2 = Arc::new(AffineIsometryAction::reflection());
        let t = Truncation::circle(12);
        let a = HomogeneousSymbol::new(
            1,
            TrigPoly::scalar(&[(1, c(1.0, 0.5))]),
            TrigPoly::scalar(&[(-2, c(0.3, 0.0))]),
        )
        .unwrap();
        let sym =
            CrossedSymbol::new(z2.clone(), vec![a.clone(), HomogeneousSymbol::zero(1, 1)]).unwrap();
        let q = crossed_quantize(&sym, t).unwrap();
        let want = op_quantize(&a, t).unwrap().scale(c(0.5, 0.0));
        assert!(q.matrix.max_abs_diff(&want).unwrap() <= 1e-15);
        let zero = crossed_quantize(&CrossedSymbol::zero(z2, 1, 1).unwrap(), t).unwrap();
        assert_eq!(zero.matrix, OperatorMatrix::zeros(t));
    }

    #[test]
    fn pulled_back_function_quantizes_to_its_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        for action in groups() {
            let f = random_function(&mut rng, &action, 2, 3);
            let t = Truncation::circle_bundle(n, 2);
            let q = crossed_quantize(&CrossedSymbol::from_function(&f), t).unwrap();
            assert!(
                q.matrix
                    .block_diff(&represent(&f, t).unwrap(), n - 3)
                    .unwrap()
                    <= 1e-12
            );
        }
    }

    #[test]
    fn peeling_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 32i64;
        for action in groups() {
            for degree in [0, 1] {
                let dd = 3usize;
                let comps = (0..action.order())
                    .map(|_| {
                        HomogeneousSymbol::new(
                            degree,
                            random_poly(&mut rng, 2, dd),
                            random_poly(&mut rng, 2, dd),
                        )
                        .unwrap()
                    })
                    .collect();
                let sym = CrossedSymbol::new(action.clone(), comps).unwrap();
                let q = crossed_quantize(&sym, Truncation::circle_bundle(n as usize, 2)).unwrap();
                let l = action.order() as i64;
                for m in (dd as i64 + 1)..=(n - l - dd as i64) {
                    for mm in [m, -m] {
                        for k in action.group().elements() {
                            let got = crossed_symbol_of(&q, mm, k).unwrap();
                            let want = sym.components()[k]
                                .mode_component(mm)
                                .scale(c(mode_weight(mm, degree), 0.0));
                            assert!(
                                got.max_coeff_diff(&want)
                                    <= 1e-12 * mode_weight(mm, degree).max(1.0),
                                "{} m={mm} k={k}",
                                action.name()
                            );
                        }
                        assert!(
                            decomposition_residual(&q, mm).unwrap()
                                <= 1e-12 * (mm.abs() as f64).max(1.0)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn identity_component_of_a_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z4 = Arc::new(AffineIsometryAction::rotation(4).unwrap());
        let f = random_function(&mut rng, &z4, 1, 2);
        let t = Truncation::circle(24);
        let op = CrossedOperator {
            matrix: represent(&f, t).unwrap(),
            degree: 0,
            action: z4.clone(),
        };
        for k in z4.group().elements() {
            let got = crossed_symbol_of(&op, 7, k).unwrap();
            assert!(got.max_coeff_diff(f.component(k).unwrap()) <= 1e-12);
        }
        let zero = CrossedOperator {
            matrix: OperatorMatrix::zeros(t),
            degree: 0,
            action: z4,
        };
        assert_eq!(crossed_symbol_of(&zero, 5, 2).unwrap().max_coeff(), 0.0);
    }

    #[test]
    fn non_recoverable_modes_reported() {
        let z4 = Arc::new(AffineIsometryAction::rotation(4).unwrap());
        let t = Truncation::circle(8);
        let op = CrossedOperator {
            matrix: OperatorMatrix::identity(t),
            degree: 0,
            action: z4,
        };
        assert!(matches!(
            crossed_symbol_of(&op, 6, 0),
            Err(Error::NotRecoverable(_))
        ));
        assert!(matches!(
            crossed_symbol_of(&op, 0, 0),
            Err(Error::NotRecoverable(_))
        ));
    }

    #[test]
    fn non_class_operator_has_a_residual() {
        // a generic dense matrix is not of the form Σ op(a_k) U_k
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let t = Truncation::circle(16);
        let data = CMat::from_shape_fn((33, 33), |_| c(rng.random_range(-1.0..1.0), 0.0));
        let op = CrossedOperator {
            matrix: OperatorMatrix::new(t, data).unwrap(),
            degree: 0,
            action: Arc::new(AffineIsometryAction::reflection()),
        };
        assert!(decomposition_residual(&op, 5).unwrap() > 1e-3);
    }

    #[test]
    fn symbol_product_matches_operator_product_at_degree_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 32i64;
        for action in groups() {
            let a = random_symbol(&mut rng, &action, 2, 2);
            let b = random_symbol(&mut rng, &action, 2, 2);
            let t = Truncation::circle_bundle(n as usize, 2);
            let prod = crossed_quantize(&a, t)
                .unwrap()
                .matrix
                .matmul(&crossed_quantize(&b, t).unwrap().matrix)
                .unwrap();
            let op = CrossedOperator {
                matrix: prod,
                degree: 0,
                action: action.clone(),
            };
            let ab = a.convolve(&b).unwrap();
            let star = crossed_quantize(&a.involution().unwrap(), t).unwrap();
            let adj = crossed_quantize(&a, t).unwrap().matrix.adjoint();
            let l = action.order() as i64;
            for m in [5i64, -5, 9, -12] {
                assert!(m.abs() + l + 4 <= n);
                for k in action.group().elements() {
                    let got = crossed_symbol_of(&op, m, k).unwrap();
                    assert!(got.max_coeff_diff(&ab.components()[k].mode_component(m)) <= 1e-12);
                    let adj_op = CrossedOperator {
                        matrix: adj.clone(),
                        degree: 0,
                        action: action.clone(),
                    };
                    let star_sym = crossed_symbol_of(&star, m, k).unwrap();
                    assert!(
                        crossed_symbol_of(&adj_op, m, k)
                            .unwrap()
                            .max_coeff_diff(&star_sym)
                            <= 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn flow_pullback_is_a_star_automorphism_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let h = HamiltonianSpec::flat_norm(1).unwrap();
        for action in groups() {
            let a = random_symbol(&mut rng, &action, 2, 3);
            let b = random_symbol(&mut rng, &action, 2, 2);
            assert_eq!(nc_flow_pullback(&a, &h, 0.0).unwrap(), a);
            for t in [0.5, 1.0, 2.0] {
                let ft = |s: &CrossedSymbol| nc_flow_pullback(s, &h, t).unwrap();
                let lhs = ft(&a.convolve(&b).unwrap());
                let rhs = ft(&a).convolve(&ft(&b)).unwrap();
                assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);
                assert!(
                    ft(&a.involution().unwrap()).max_coeff_diff(&ft(&a).involution().unwrap())
                        <= 1e-12
                );
                let composed = nc_flow_pullback(&ft(&a), &h, 0.7).unwrap();
                assert!(
                    composed.max_coeff_diff(&nc_flow_pullback(&a, &h, t + 0.7).unwrap()) <= 1e-12
                );
            }
        }
    }

    #[test]
    fn flow_pullback_acts_on_each_slice_alike() {
        let z2 = Arc::new(AffineIsometryAction::reflection());
        let s = HomogeneousSymbol::even(0, TrigPoly::scalar(&[(2, c(1.0, 0.0))]));
        let a = CrossedSymbol::new(z2, vec![s.clone(), s.clone()]).unwrap();
        let out = nc_flow_pullback(&a, &HamiltonianSpec::flat_norm(1).unwrap(), 0.3).unwrap();
        assert_eq!(out.components()[0], out.components()[1]);
        assert_eq!(out.components()[0], s.pullback_geodesic(1.0, 0.3));
    }

    #[test]
    fn flow_pullback_needs_a_metric_norm() {
        use crate::symplectic_flows::KineticPotential;
        let z2 = Arc::new(AffineIsometryAction::reflection());
        let a = CrossedSymbol::zero(z2, 0, 1).unwrap();
        let h =
            HamiltonianSpec::closed_form(Arc::new(KineticPotential::standard(1, vec![]).unwrap()));
        assert!(matches!(
            nc_flow_pullback(&a, &h, 1.0),
            Err(Error::PullbackUnavailable(_))
        ));
    }

    #[test]
    fn evolved_crossed_operator_stays_in_class() {
        let n = 40usize;
        let t = Truncation::circle(n);
        let z4 = Arc::new(AffineIsometryAction::rotation(4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let a = random_symbol(&mut rng, &z4, 1, 3);
        let q = crossed_quantize(&a, t).unwrap();
        let dec = SpectralDecomposition::new(&sqrt_laplacian(t)).unwrap();
        let evolved = q.with_matrix(dec.evolve(&q.matrix, 1.0).unwrap()).unwrap();
        let expect = nc_flow_pullback(&a, &HamiltonianSpec::flat_norm(1).unwrap(), 1.0).unwrap();
        for m in [4i64, -4, 10, -17, 30] {
            assert!(decomposition_residual(&evolved, m).unwrap() <= 1e-12);
            for k in z4.group().elements() {
                let got = crossed_symbol_of(&evolved, m, k).unwrap();
                assert!(got.max_coeff_diff(&expect.components()[k].mode_component(m)) <= 1e-12);
            }
        }
    }
}
