use serde::{Deserialize, Serialize};

use super::config::{check_positive, poly_from_terms, ExperimentConfig, SymbolConfig, TermConfig};
use super::egorov::{max_frobenius_diff, FrameSet, ModeGrid};
use super::table::ErrorTable;
use super::Gate;
use crate::error::{Error, Result};
use crate::heisenberg::SpectralDecomposition;
use crate::linalg::C64;
use crate::modes::Truncation;
use crate::quantization::{
    build_first_order, mode_weight, op_quantize, CompleteSymbolOrder1, HomogeneousSymbol,
};

/// Scalar symbol `a` evolved under `P = op(h(θ)|ξ|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalModel {
    pub symbol: SymbolConfig,
    /// Terms of the real speed profile `h(θ)`; the default `h ≡ 1` gives `√Δ`.
    pub principal: Vec<TermConfig>,
    pub tolerance: f64,
}

impl Default for ClassicalModel {
    fn default() -> Self {
        ClassicalModel {
            symbol: SymbolConfig::random(0, 4, false),
            principal: vec![TermConfig::new(0, 0, 0, 1.0, 0.0)],
            tolerance: 1e-12,
        }
    }
}

pub(crate) struct Prepared {
    a: HomogeneousSymbol,
    p: CompleteSymbolOrder1,
    tolerance: f64,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model: ClassicalModel = cfg.model()?;
    check_positive("tolerance", model.tolerance)?;
    let a = model.symbol.build(1, &mut cfg.rng())?;
    let h = poly_from_terms(&model.principal, 1, None)?;
    let p = CompleteSymbolOrder1::new(
        HomogeneousSymbol::even(1, h),
        HomogeneousSymbol::zero(0, 1),
        None,
    )?;
    if let Some(n) = cfg.grid.n.iter().find(|&&n| n <= 2 * a.x_degree()) {
        return Err(Error::Config(format!(
            "N = {n} leaves no interior band for x-degree {}",
            a.x_degree()
        )));
    }
    Ok(Prepared {
        a,
        p,
        tolerance: model.tolerance,
    })
}

/// Rows `symbol` for every mode; the band is `D < |m| ≤ N − D`.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<(ErrorTable, Vec<Gate>)> {
    let Prepared { a, p, tolerance } = prepare(cfg)?;
    let d = a.x_degree() as i64;
    let closed = p.metric_speed();
    let mut table = ErrorTable::new();
    let mut frames = Vec::new();
    if closed.is_none() {
        let grid = ModeGrid::new(cfg.grid.theta_points, 0);
        for &t in &cfg.grid.t {
            frames.push(FrameSet::new(&p, grid.thetas(), t, cfg.grid.dt)?);
        }
    }
    for &n in &cfg.grid.n {
        let trunc = Truncation::circle(n);
        let dec = SpectralDecomposition::new(&build_first_order(&p, trunc)?)?;
        let evolved = dec.evolve_many(&op_quantize(&a, trunc)?, &cfg.grid.t)?;
        let grid = ModeGrid::new(cfg.grid.theta_points, n);
        for (ti, (&t, at)) in cfg.grid.t.iter().zip(&evolved).enumerate() {
            let flowed = closed.map(|c| a.pullback_geodesic(c, t));
            let ni = n as i64;
            for m in -ni..=ni {
                let got = grid.reconstruct(at, m);
                let want = match &flowed {
                    Some(f) => grid.values(
                        &f.mode_component(m)
                            .scale(C64::new(mode_weight(m, a.degree()), 0.0)),
                    ),
                    None if m == 0 => continue,
                    None => frames[ti].transported(&a, m),
                };
                let band = m.abs() > d && m.abs() <= ni - d;
                table.push("symbol", n, t, m, max_frobenius_diff(&got, &want), band)?;
            }
        }
    }
    let gates = vec![Gate::at_most(
        "symbol band error",
        table.band_max("symbol"),
        tolerance,
    )];
    Ok((table, gates))
}
