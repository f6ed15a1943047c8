use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{
    check_bundle, check_positive, check_range, poly_from_terms, ExperimentConfig, SymbolConfig,
    TermConfig,
};
use super::egorov::{max_frobenius_diff, FrameSet, ModeGrid};
use super::table::ErrorTable;
use super::Gate;
use crate::error::{Error, Result};
use crate::heisenberg::{ad_transport_symbol, transport_generator, SpectralDecomposition};
use crate::linalg::frobenius;
use crate::modes::Truncation;
use crate::quantization::{
    build_first_order, op_quantize, CompleteSymbolOrder1, HomogeneousSymbol,
};
use crate::symplectic_flows::CotangentPoint;

/// Forward-difference check of the transport generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdConfig {
    /// Two step sizes `h₁ > h₂`.
    pub steps: [f64; 2],
    pub points: usize,
    /// Accepted range of `log(e₁/e₂) / log(h₁/h₂)`.
    pub order_range: [f64; 2],
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            steps: [1e-3, 1e-4],
            points: 8,
            order_range: [0.8, 1.2],
        }
    }
}

/// `P = op(h|ξ| ⊗ I + V + p₋₁)` acting on a rank-`bundle` window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixModel {
    pub bundle: usize,
    pub symbol: SymbolConfig,
    pub principal: Vec<TermConfig>,
    /// Hermitian order-zero part `V(θ)`.
    pub potential: Vec<TermConfig>,
    /// Hermitian order `−1` part, quantized with weight `|m|⁻¹`.
    pub minus_one: Vec<TermConfig>,
    pub ratio_n: usize,
    pub ratio_t: f64,
    pub ratio_modes: Vec<i64>,
    pub ratio_range: [f64; 2],
    pub fd: FdConfig,
}

impl Default for MatrixModel {
    fn default() -> Self {
        MatrixModel {
            bundle: 2,
            symbol: SymbolConfig::random(0, 2, true),
            principal: vec![TermConfig::new(0, 0, 0, 1.0, 0.0)],
            potential: vec![
                TermConfig::new(0, 0, 0, 0.8, 0.0),
                TermConfig::new(0, 1, 1, -0.8, 0.0),
                TermConfig::new(0, 0, 1, 0.3, 0.0),
                TermConfig::new(0, 1, 0, 0.3, 0.0),
            ],
            minus_one: vec![
                TermConfig::new(0, 0, 1, 0.0, -0.5),
                TermConfig::new(0, 1, 0, 0.0, 0.5),
            ],
            ratio_n: 256,
            ratio_t: 1.0,
            ratio_modes: vec![8, 16, 32, 64],
            ratio_range: [0.3, 0.8],
            fd: FdConfig::default(),
        }
    }
}

pub(crate) struct Prepared {
    model: MatrixModel,
    a: HomogeneousSymbol,
    p: CompleteSymbolOrder1,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model: MatrixModel = cfg.model()?;
    check_bundle(model.bundle)?;
    if model.bundle < 2 {
        return Err(Error::Config("matrix-egorov needs bundle >= 2".into()));
    }
    let d = model.bundle;
    let a = model.symbol.build(d, &mut cfg.rng())?;
    let h = HomogeneousSymbol::even(1, poly_from_terms(&model.principal, 1, None)?);
    let v = HomogeneousSymbol::even(0, poly_from_terms(&model.potential, d, None)?);
    let q = if model.minus_one.is_empty() {
        None
    } else {
        Some(HomogeneousSymbol::even(
            -1,
            poly_from_terms(&model.minus_one, d, None)?,
        ))
    };
    let p = CompleteSymbolOrder1::new(h, v, q)?;
    check_range("ratio_range", model.ratio_range)?;
    check_range("fd.order_range", model.fd.order_range)?;
    for s in model.fd.steps {
        check_positive("fd.steps", s)?;
    }
    if model.fd.steps[0] <= model.fd.steps[1] {
        return Err(Error::Config("fd.steps must be decreasing".into()));
    }
    if model.fd.points == 0 || model.fd.points > 1024 {
        return Err(Error::Config("fd.points must lie in 1..=1024".into()));
    }
    if !model.ratio_modes.is_empty() {
        if !cfg.grid.n.contains(&model.ratio_n) || !cfg.grid.t.contains(&model.ratio_t) {
            return Err(Error::Config(
                "ratio_n and ratio_t must appear in the grid".into(),
            ));
        }
        if model
            .ratio_modes
            .iter()
            .any(|&m| m <= a.x_degree() as i64 || 4 * m > model.ratio_n as i64)
        {
            return Err(Error::Config(
                "ratio modes m need D < m and 2m <= ratio_n / 2".into(),
            ));
        }
    }
    Ok(Prepared { model, a, p })
}

/// Rows `symbol` per mode (band `D < |m| ≤ N/2`) and `fd-derivative` per
/// sample point with the step in the `t` column.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<(ErrorTable, Vec<Gate>)> {
    let Prepared { model, a, p } = prepare(cfg)?;
    let d = a.x_degree() as i64;
    let d_bundle = model.bundle;
    let thetas = ModeGrid::new(cfg.grid.theta_points, 0);
    let frames = cfg
        .grid
        .t
        .iter()
        .map(|&t| FrameSet::new(&p, thetas.thetas(), t, cfg.grid.dt))
        .collect::<Result<Vec<_>>>()?;
    let mut table = ErrorTable::new();
    for &n in &cfg.grid.n {
        let trunc = Truncation::circle_bundle(n, d_bundle);
        let dec = SpectralDecomposition::new(&build_first_order(&p, trunc)?)?;
        let evolved = dec.evolve_many(&op_quantize(&a, trunc)?, &cfg.grid.t)?;
        let grid = ModeGrid::new(cfg.grid.theta_points, n);
        let ni = n as i64;
        for (ti, (&t, at)) in cfg.grid.t.iter().zip(&evolved).enumerate() {
            for m in (-ni..=ni).filter(|&m| m != 0) {
                let err =
                    max_frobenius_diff(&grid.reconstruct(at, m), &frames[ti].transported(&a, m));
                table.push("symbol", n, t, m, err, m.abs() > d && 2 * m.abs() <= ni)?;
            }
        }
    }

    let mut rng = cfg.rng();
    let points: Vec<CotangentPoint> = (0..model.fd.points)
        .map(|_| {
            let xi = rng.random_range(1.0..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            CotangentPoint::new(vec![rng.random_range(0.0..std::f64::consts::TAU)], vec![xi])
        })
        .collect();
    let mut fd_max = [0.0_f64; 2];
    for (si, &h) in model.fd.steps.iter().enumerate() {
        for (i, nu) in points.iter().enumerate() {
            let gen = transport_generator(&a, &p, nu)?;
            let moved = ad_transport_symbol(&a, &p, nu, h, (h / 4.0).min(cfg.grid.dt))?;
            let base = a.eval(nu.x[0], nu.xi[0]);
            let err = frobenius(&((moved - base).mapv(|z| z / h) - &gen));
            fd_max[si] = fd_max[si].max(err);
            table.push("fd-derivative", 0, h, i as i64, err, true)?;
        }
    }

    let mut gates = Vec::new();
    if !model.ratio_modes.is_empty() {
        let summary = table.summary();
        for &m in &model.ratio_modes {
            let ratio = summary
                .ratios
                .iter()
                .find(|r| {
                    r.quantity == "symbol"
                        && r.n == model.ratio_n
                        && r.t == model.ratio_t
                        && r.m == m
                })
                .and_then(|r| r.ratio);
            let [lo, hi] = model.ratio_range;
            gates.push(Gate::within(
                format!("symbol ratio err({})/err({m})", 2 * m),
                ratio,
                lo,
                hi,
            ));
        }
    }
    let [h1, h2] = model.fd.steps;
    let order =
        (fd_max[0] > 0.0 && fd_max[1] > 0.0).then(|| (fd_max[0] / fd_max[1]).ln() / (h1 / h2).ln());
    let [lo, hi] = model.fd.order_range;
    gates.push(Gate::within("fd-derivative order", order, lo, hi));
    Ok((table, gates))
}
