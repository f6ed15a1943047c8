//! Hamiltonian flows on `T*T^n`, momentum maps of circle actions,
//! conormal-bundle membership and reduced flows of invariant Hamiltonians.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group_actions::{reduce_angle, torus_distance, AffineIsometryAction, CircleAction};
use crate::trigpoly::TrigPoly;

/// Smallest covector norm accepted for homogeneous Hamiltonians.
pub const MIN_COVECTOR_NORM: f64 = 1e-12;
pub const CONORMAL_TOL: f64 = 1e-9;
pub const EQUIVARIANCE_TOL: f64 = 1e-8;
pub const INVARIANCE_SPOT_TOL: f64 = 1e-10;
const SPOT_CHECK_SAMPLES: usize = 100;

/// Phase-space point: torus base point (reduced mod 2π) and covector.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        assert_eq!(
            x.len(),
            xi.len(),
            "base point and covector dimensions differ"
        );
        CotangentPoint {
            x: x.into_iter().map(reduce_angle).collect(),
            xi,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Torus distance of base points plus Euclidean distance of covectors.
    pub fn distance(&self, other: &CotangentPoint) -> f64 {
        let dx = torus_distance(&self.x, &other.x);
        let dxi: f64 = self
            .xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (dx * dx + dxi).sqrt()
    }
}

/// A Hamiltonian given by closed-form value and gradient.
pub trait ClosedForm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], xi: &[f64]) -> f64;
    /// `(∂H/∂x, ∂H/∂ξ)`.
    fn gradient(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// Degree of positive homogeneity in `ξ`, if any.
    fn homogeneity(&self) -> Option<i32> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CosineTerm {
    pub wave: Vec<i64>,
    pub amplitude: f64,
    pub phase: f64,
}

/// `H = ½ ξᵀ M ξ + Σ a_k cos(⟨k, x⟩ + φ_k)`; separable.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticPotential {
    dim: usize,
    kinetic: Vec<f64>,
    potential: Vec<CosineTerm>,
}

impl KineticPotential {
    pub fn new(dim: usize, kinetic: Vec<f64>, potential: Vec<CosineTerm>) -> Result<Self> {
        if kinetic.len() != dim * dim {
            return Err(Error::DimensionMismatch(
                "kinetic matrix must be n x n".into(),
            ));
        }
        for i in 0..dim {
            for j in 0..dim {
                if kinetic[i * dim + j] != kinetic[j * dim + i] {
                    return Err(Error::InvalidFlow(
                        "kinetic matrix must be symmetric".into(),
                    ));
                }
            }
        }
        if potential.iter().any(|t| t.wave.len() != dim) {
            return Err(Error::DimensionMismatch(
                "potential wave vector dimension".into(),
            ));
        }
        if kinetic
            .iter()
            .chain(potential.iter().flat_map(|t| [&t.amplitude, &t.phase]))
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidFlow(
                "non-finite Hamiltonian coefficient".into(),
            ));
        }
        Ok(KineticPotential {
            dim,
            kinetic,
            potential,
        })
    }

    /// `½|ξ|²` plus the given potential.
    pub fn standard(dim: usize, potential: Vec<CosineTerm>) -> Result<Self> {
        let mut kinetic = vec![0.0; dim * dim];
        for i in 0..dim {
            kinetic[i * dim + i] = 1.0;
        }
        KineticPotential::new(dim, kinetic, potential)
    }

    /// Adds `λ J²` for the momentum map `J = ⟨ξ, w⟩`, giving another
    /// invariant extension that agrees with `H` on `J⁻¹(0)`.
    pub fn with_momentum_penalty(&self, circle: &CircleAction, lambda: f64) -> Result<Self> {
        if circle.dim() != self.dim {
            return Err(Error::DimensionMismatch("circle action dimension".into()));
        }
        let w = circle.generator();
        let mut kinetic = self.kinetic.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                kinetic[i * self.dim + j] += 2.0 * lambda * w[i] * w[j];
            }
        }
        KineticPotential::new(self.dim, kinetic, self.potential.clone())
    }
}

impl ClosedForm for KineticPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let n = self.dim;
        let mut kin = 0.0;
        for i in 0..n {
            for j in 0..n {
                kin += xi[i] * self.kinetic[i * n + j] * xi[j];
            }
        }
        let pot: f64 = self
            .potential
            .iter()
            .map(|t| t.amplitude * (dot_i(&t.wave, x) + t.phase).cos())
            .sum();
        0.5 * kin + pot
    }

    fn gradient(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let mut dx = vec![0.0; n];
        for t in &self.potential {
            let s = -t.amplitude * (dot_i(&t.wave, x) + t.phase).sin();
            for (d, k) in dx.iter_mut().zip(&t.wave) {
                // a zero wave component contributes an exact zero
                if *k != 0 {
                    *d += s * *k as f64;
                }
            }
        }
        let dxi = (0..n)
            .map(|i| (0..n).map(|j| self.kinetic[i * n + j] * xi[j]).sum())
            .collect();
        (dx, dxi)
    }
}

fn dot_i(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum()
}

/// `H(θ, ξ) = |ξ| h_{sgn ξ}(θ)` on `T*S¹` for real trigonometric `h_±`:
/// the bicharacteristic Hamiltonian of a degree-1 circle symbol.
#[derive(Clone, Debug)]
pub struct ConformalNorm {
    plus: TrigPoly,
    minus: TrigPoly,
    dplus: TrigPoly,
    dminus: TrigPoly,
}

impl ConformalNorm {
    pub fn new(plus: TrigPoly, minus: TrigPoly) -> Result<Self> {
        for p in [&plus, &minus] {
            if p.size() != 1 || !p.is_hermitian(1e-14) {
                return Err(Error::InvalidSymbol(
                    "conformal factor must be real and scalar".into(),
                ));
            }
        }
        Ok(ConformalNorm {
            dplus: plus.derivative(),
            dminus: minus.derivative(),
            plus,
            minus,
        })
    }

    fn parts(&self, xi: f64) -> (&TrigPoly, &TrigPoly, f64) {
        if xi >= 0.0 {
            (&self.plus, &self.dplus, 1.0)
        } else {
            (&self.minus, &self.dminus, -1.0)
        }
    }
}

impl ClosedForm for ConformalNorm {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        let (h, _, _) = self.parts(xi[0]);
        xi[0].abs() * h.eval(x[0])[[0, 0]].re
    }

    fn gradient(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, dh, s) = self.parts(xi[0]);
        (
            vec![xi[0].abs() * dh.eval(x[0])[[0, 0]].re],
            vec![s * h.eval(x[0])[[0, 0]].re],
        )
    }

    fn homogeneity(&self) -> Option<i32> {
        Some(1)
    }
}

#[derive(Clone, Debug)]
pub enum HamiltonianKind {
    /// `H = |ξ|_g = sqrt(Σ g^{ii} ξ_i²)` for a constant diagonal metric.
    MetricNorm {
        inverse_metric: Vec<f64>,
    },
    ClosedForm(Arc<dyn ClosedForm>),
}

/// Symmetry a Hamiltonian declares.
#[derive(Clone, Debug)]
pub enum Symmetry {
    Group(Arc<AffineIsometryAction>),
    Circle(CircleAction),
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    dim: usize,
    invariances: Vec<Symmetry>,
}

impl HamiltonianSpec {
    pub fn metric_norm(inverse_metric: Vec<f64>) -> Result<Self> {
        let dim = inverse_metric.len();
        if !(dim == 1 || dim == 2) {
            return Err(Error::DimensionMismatch(
                "metric dimension must be 1 or 2".into(),
            ));
        }
        if inverse_metric.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidFlow("inverse metric must be positive".into()));
        }
        Ok(HamiltonianSpec {
            kind: HamiltonianKind::MetricNorm { inverse_metric },
            dim,
            invariances: Vec::new(),
        })
    }

    /// Flat `H = |ξ|` on `T*T^n`.
    pub fn flat_norm(dim: usize) -> Result<Self> {
        HamiltonianSpec::metric_norm(vec![1.0; dim])
    }

    pub fn closed_form(h: Arc<dyn ClosedForm>) -> Self {
        HamiltonianSpec {
            dim: h.dim(),
            kind: HamiltonianKind::ClosedForm(h),
            invariances: Vec::new(),
        }
    }

    /// Declares a symmetry after spot-checking it on random phase-space
    /// points (fixed seed): `|H(g·ν) − H(ν)| ≤ 1e-10`.
    pub fn declare_invariance(mut self, symmetry: Symmetry) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = self.dim;
        let sym_dim = match &symmetry {
            Symmetry::Group(a) => a.dim(),
            Symmetry::Circle(c) => c.dim(),
        };
        if sym_dim != n {
            return Err(Error::DimensionMismatch(
                "symmetry acts on a different torus".into(),
            ));
        }
        for _ in 0..SPOT_CHECK_SAMPLES {
            let x: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let xi: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let nu = CotangentPoint::new(x, xi);
            let h0 = self.value(&nu)?;
            let images: Vec<CotangentPoint> = match &symmetry {
                Symmetry::Group(a) => a
                    .group()
                    .elements()
                    .map(|g| a.cotangent_lift(g, &nu))
                    .collect::<Result<_>>()?,
                Symmetry::Circle(c) => {
                    vec![c.cotangent_lift(rng.random_range(0.0..std::f64::consts::TAU), &nu)]
                }
            };
            for img in images {
                let dh = (self.value(&img)? - h0).abs();
                if dh > INVARIANCE_SPOT_TOL {
                    return Err(Error::NotInvariant(format!(
                        "Hamiltonian changes by {dh:e} under the declared symmetry"
                    )));
                }
            }
        }
        self.invariances.push(symmetry);
        Ok(self)
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn invariances(&self) -> &[Symmetry] {
        &self.invariances
    }

    pub fn declares_circle(&self, circle: &CircleAction) -> bool {
        self.invariances
            .iter()
            .any(|s| matches!(s, Symmetry::Circle(c) if c == circle))
    }

    pub fn declares_group(&self, action: &AffineIsometryAction) -> bool {
        self.invariances
            .iter()
            .any(|s| matches!(s, Symmetry::Group(a) if **a == *action))
    }

    pub fn degree(&self) -> Option<i32> {
        match &self.kind {
            HamiltonianKind::MetricNorm { .. } => Some(1),
            HamiltonianKind::ClosedForm(h) => h.homogeneity(),
        }
    }

    fn check_point(&self, nu: &CotangentPoint) -> Result<()> {
        if nu.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "{}-dimensional point for a {}-dimensional Hamiltonian",
                nu.dim(),
                self.dim
            )));
        }
        if self.degree().is_some() {
            let norm = nu.xi_norm();
            if norm < MIN_COVECTOR_NORM {
                return Err(Error::ConicSingularity { norm });
            }
        }
        Ok(())
    }

    pub fn value(&self, nu: &CotangentPoint) -> Result<f64> {
        self.check_point(nu)?;
        Ok(match &self.kind {
            HamiltonianKind::MetricNorm { inverse_metric } => metric_norm(inverse_metric, &nu.xi),
            HamiltonianKind::ClosedForm(h) => h.value(&nu.x, &nu.xi),
        })
    }

    fn gradient_raw(&self, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            HamiltonianKind::MetricNorm { inverse_metric } => {
                let norm = metric_norm(inverse_metric, xi);
                (
                    vec![0.0; xi.len()],
                    inverse_metric
                        .iter()
                        .zip(xi)
                        .map(|(g, v)| g * v / norm)
                        .collect(),
                )
            }
            HamiltonianKind::ClosedForm(h) => h.gradient(x, xi),
        }
    }
}

fn metric_norm(inverse_metric: &[f64], xi: &[f64]) -> f64 {
    inverse_metric
        .iter()
        .zip(xi)
        .map(|(g, v)| g * v * v)
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Closed form, metric-norm Hamiltonians only.
    Exact,
    /// Störmer–Verlet; symplectic for separable Hamiltonians.
    Leapfrog,
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub dt: f64,
    pub solver_tol: f64,
    pub max_iterations: usize,
}

impl FlowConfig {
    pub fn exact() -> Self {
        FlowConfig {
            integrator: Integrator::Exact,
            dt: 1e-3,
            solver_tol: 1e-14,
            max_iterations: 100,
        }
    }

    pub fn leapfrog(dt: f64) -> Self {
        FlowConfig {
            integrator: Integrator::Leapfrog,
            dt,
            ..FlowConfig::exact()
        }
    }

    pub fn implicit_midpoint(dt: f64) -> Self {
        FlowConfig {
            integrator: Integrator::ImplicitMidpoint,
            dt,
            ..FlowConfig::exact()
        }
    }

    fn validate(&self, h: &HamiltonianSpec) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidFlow(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.integrator == Integrator::Exact
            && !matches!(h.kind, HamiltonianKind::MetricNorm { .. })
        {
            return Err(Error::InvalidFlow(
                "exact integrator requires a metric-norm Hamiltonian".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled flow: `points[i]` at `times[i]`.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<CotangentPoint>,
}

impl Trajectory {
    /// CSV dump with columns `t, x1..xn, xi1..xin, H, J` (J empty without a
    /// circle action).
    pub fn write_csv<W: Write>(
        &self,
        h: &HamiltonianSpec,
        circle: Option<&CircleAction>,
        mut out: W,
    ) -> Result<()> {
        let n = h.dim();
        writeln!(out, "# orbiquant trajectory v1")?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("xi{i}")));
        header.push("H".into());
        header.push("J".into());
        writeln!(out, "{}", header.join(","))?;
        for (t, p) in self.times.iter().zip(&self.points) {
            let mut row = vec![format!("{t:e}")];
            row.extend(p.x.iter().map(|v| format!("{v:e}")));
            row.extend(p.xi.iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", h.value(p)?));
            row.push(match circle {
                Some(c) => format!("{:e}", momentum_map(c, p)?),
                None => String::new(),
            });
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the flow, calling `observe(step, t, x, ξ)` after every step
/// (and once at step 0). Base coordinates are left unreduced internally.
fn integrate<F>(
    h: &HamiltonianSpec,
    nu: &CotangentPoint,
    t: f64,
    cfg: &FlowConfig,
    mut observe: F,
) -> Result<CotangentPoint>
where
    F: FnMut(usize, f64, &[f64], &[f64]),
{
    cfg.validate(h)?;
    h.check_point(nu)?;
    if !t.is_finite() {
        return Err(Error::InvalidFlow("flow time must be finite".into()));
    }
    let mut x = nu.x.clone();
    let mut xi = nu.xi.clone();
    observe(0, 0.0, &x, &xi);
    if t == 0.0 {
        return Ok(nu.clone());
    }
    if cfg.integrator == Integrator::Exact {
        let (_, v) = h.gradient_raw(&x, &xi);
        for (xc, vc) in x.iter_mut().zip(&v) {
            *xc += t * vc;
        }
        observe(1, t, &x, &xi);
        return Ok(CotangentPoint::new(x, xi));
    }
    let steps = (t.abs() / cfg.dt).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let n = x.len();
    for step in 1..=steps {
        match cfg.integrator {
            Integrator::Leapfrog => {
                let (gx, _) = h.gradient_raw(&x, &xi);
                for i in 0..n {
                    xi[i] -= 0.5 * dt * gx[i];
                }
                let (_, gxi) = h.gradient_raw(&x, &xi);
                for i in 0..n {
                    x[i] += dt * gxi[i];
                }
                let (gx, _) = h.gradient_raw(&x, &xi);
                for i in 0..n {
                    xi[i] -= 0.5 * dt * gx[i];
                }
            }
            Integrator::ImplicitMidpoint => {
                let (nx, nxi) = midpoint_step(h, &x, &xi, dt, cfg)?;
                x = nx;
                xi = nxi;
            }
            Integrator::Exact => unreachable!(),
        }
        if h.degree().is_some() {
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < MIN_COVECTOR_NORM {
                return Err(Error::ConicSingularity { norm });
            }
        }
        observe(step, dt * step as f64, &x, &xi);
    }
    Ok(CotangentPoint::new(x, xi))
}

fn midpoint_step(
    h: &HamiltonianSpec,
    x: &[f64],
    xi: &[f64],
    dt: f64,
    cfg: &FlowConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let (gx, gxi) = h.gradient_raw(x, xi);
    let mut nx: Vec<f64> = (0..n).map(|i| x[i] + dt * gxi[i]).collect();
    let mut nxi: Vec<f64> = (0..n).map(|i| xi[i] - dt * gx[i]).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let mx: Vec<f64> = (0..n).map(|i| 0.5 * (x[i] + nx[i])).collect();
        let mxi: Vec<f64> = (0..n).map(|i| 0.5 * (xi[i] + nxi[i])).collect();
        let (gx, gxi) = h.gradient_raw(&mx, &mxi);
        let cx: Vec<f64> = (0..n).map(|i| x[i] + dt * gxi[i]).collect();
        let cxi: Vec<f64> = (0..n).map(|i| xi[i] - dt * gx[i]).collect();
        let scale = cx.iter().chain(&cxi).fold(1.0_f64, |m, v| m.max(v.abs()));
        residual = cx
            .iter()
            .zip(&nx)
            .chain(cxi.iter().zip(&nxi))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        nx = cx;
        nxi = cxi;
        if residual <= cfg.solver_tol {
            return Ok((nx, nxi));
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// `f_t(ν)` for the Hamiltonian flow of `h`.
pub fn hamiltonian_flow(
    h: &HamiltonianSpec,
    nu: &CotangentPoint,
    t: f64,
    cfg: &FlowConfig,
) -> Result<CotangentPoint> {
    integrate(h, nu, t, cfg, |_, _, _, _| {})
}

/// Flow sampled every `every` steps (plus the endpoint).
pub fn trajectory(
    h: &HamiltonianSpec,
    nu: &CotangentPoint,
    t: f64,
    cfg: &FlowConfig,
    every: usize,
) -> Result<Trajectory> {
    let every = every.max(1);
    let mut traj = Trajectory::default();
    let end = integrate(h, nu, t, cfg, |step, s, x, xi| {
        if step % every == 0 {
            traj.times.push(s);
            traj.points
                .push(CotangentPoint::new(x.to_vec(), xi.to_vec()));
        }
    })?;
    if traj.times.last() != Some(&t) {
        traj.times.push(t);
        traj.points.push(end);
    }
    Ok(traj)
}

/// `⟨J(x, ξ), 1⟩ = ⟨ξ, v_M(x)⟩ = ⟨ξ, w⟩`.
pub fn momentum_map(circle: &CircleAction, nu: &CotangentPoint) -> Result<f64> {
    if circle.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(
            "circle action and point dimensions differ".into(),
        ));
    }
    Ok(circle
        .generator()
        .iter()
        .zip(&nu.xi)
        .map(|(w, v)| w * v)
        .sum())
}

pub fn is_conormal(circle: &CircleAction, nu: &CotangentPoint, tol: f64) -> Result<bool> {
    Ok(momentum_map(circle, nu)?.abs() <= tol)
}

/// Flow of an invariant extension started on `J⁻¹(0)`. The result stays on
/// the conormal bundle to within `10·tol`.
pub fn reduced_flow(
    h: &HamiltonianSpec,
    circle: &CircleAction,
    nu: &CotangentPoint,
    t: f64,
    cfg: &FlowConfig,
    tol: f64,
) -> Result<CotangentPoint> {
    let j0 = momentum_map(circle, nu)?;
    if j0.abs() > tol {
        return Err(Error::NotConormal { momentum: j0, tol });
    }
    if !h.declares_circle(circle) {
        return Err(Error::NotInvariant(
            "Hamiltonian does not declare the circle symmetry".into(),
        ));
    }
    let end = hamiltonian_flow(h, nu, t, cfg)?;
    let j1 = momentum_map(circle, &end)?;
    if j1.abs() > 10.0 * tol {
        return Err(Error::NotConormal {
            momentum: j1,
            tol: 10.0 * tol,
        });
    }
    Ok(end)
}

type ObservableFn = dyn Fn(&CotangentPoint) -> f64 + Send + Sync;

/// Closed-form observable invariant under a circle action.
#[derive(Clone)]
pub struct InvariantObservable {
    name: String,
    f: Arc<ObservableFn>,
}

impl fmt::Debug for InvariantObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvariantObservable")
            .field("name", &self.name)
            .finish()
    }
}

impl InvariantObservable {
    /// Spot-checks invariance under the circle action on random points.
    pub fn new<F>(name: impl Into<String>, circle: &CircleAction, f: F) -> Result<Self>
    where
        F: Fn(&CotangentPoint) -> f64 + Send + Sync + 'static,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0b5);
        let n = circle.dim();
        for _ in 0..SPOT_CHECK_SAMPLES {
            let nu = CotangentPoint::new(
                (0..n)
                    .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                    .collect(),
                (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
            );
            let moved = circle.cotangent_lift(rng.random_range(0.0..std::f64::consts::TAU), &nu);
            let d = (f(&moved) - f(&nu)).abs();
            if d > INVARIANCE_SPOT_TOL {
                return Err(Error::NotInvariant(format!(
                    "observable changes by {d:e} along orbits"
                )));
            }
        }
        Ok(InvariantObservable {
            name: name.into(),
            f: Arc::new(f),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, nu: &CotangentPoint) -> f64 {
        (self.f)(nu)
    }
}

pub fn evaluate_invariant_observable(obs: &InvariantObservable, traj: &Trajectory) -> Vec<f64> {
    traj.points.iter().map(|p| obs.eval(p)).collect()
}

/// `dist(g·f_t(ν), f_t(g·ν))`.
pub fn equivariance_residual(
    h: &HamiltonianSpec,
    action: &AffineIsometryAction,
    g: usize,
    nu: &CotangentPoint,
    t: f64,
    cfg: &FlowConfig,
) -> Result<f64> {
    let a = action.cotangent_lift(g, &hamiltonian_flow(h, nu, t, cfg)?)?;
    let b = hamiltonian_flow(h, &action.cotangent_lift(g, nu)?, t, cfg)?;
    Ok(a.distance(&b))
}
