use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{
    check_bundle, check_positive, lookup_action, poly_from_terms, ExperimentConfig, SymbolConfig,
    TermConfig,
};
use super::table::ErrorTable;
use super::Gate;
use crate::crossed_product::{
    crossed_quantize, crossed_symbol_of, decomposition_residual, nc_flow_pullback, CrossedSymbol,
};
use crate::error::{Error, Result};
use crate::group_actions::AffineIsometryAction;
use crate::heisenberg::{orbifold_heisenberg_many, SpectralDecomposition};
use crate::linalg::C64;
use crate::modes::Truncation;
use crate::quantization::{
    build_first_order, mode_weight, op_quantize, CompleteSymbolOrder1, HomogeneousSymbol,
};
use crate::symplectic_flows::HamiltonianSpec;
use crate::trigpoly::TrigPoly;

/// Invariant-subspace evolution against the compressed full evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandwichConfig {
    pub enabled: bool,
    pub action: String,
    pub n: usize,
    /// Invariant `V(θ)` added to `|ξ|`.
    pub potential: Vec<TermConfig>,
    pub symbol: SymbolConfig,
    pub tolerance: f64,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            enabled: true,
            action: "Z2-reflection".into(),
            n: 128,
            potential: vec![
                TermConfig::new(1, 0, 0, 0.25, 0.0),
                TermConfig::new(-1, 0, 0, 0.25, 0.0),
            ],
            symbol: SymbolConfig::random(0, 3, false),
            tolerance: 1e-10,
        }
    }
}

/// Crossed symbol evolved under `P̃ = c·√Δ` for each group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NcModel {
    pub groups: Vec<String>,
    pub bundle: usize,
    pub speed: f64,
    pub symbol: SymbolConfig,
    pub tolerance: f64,
    pub class_tolerance: f64,
    pub sandwich: SandwichConfig,
}

impl Default for NcModel {
    fn default() -> Self {
        NcModel {
            groups: vec!["Z2-reflection".into(), "Z4".into()],
            bundle: 1,
            speed: 1.0,
            symbol: SymbolConfig::random(0, 3, false),
            tolerance: 1e-12,
            class_tolerance: 1e-12,
            sandwich: SandwichConfig::default(),
        }
    }
}

struct Sandwich {
    action: AffineIsometryAction,
    p: CompleteSymbolOrder1,
    a: HomogeneousSymbol,
    n: usize,
    tolerance: f64,
}

pub(crate) struct Prepared {
    model: NcModel,
    symbols: Vec<(String, CrossedSymbol)>,
    sandwich: Option<Sandwich>,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model: NcModel = cfg.model()?;
    check_bundle(model.bundle)?;
    check_positive("speed", model.speed)?;
    check_positive("tolerance", model.tolerance)?;
    check_positive("class_tolerance", model.class_tolerance)?;
    let mut rng = cfg.rng();
    let mut symbols = Vec::with_capacity(model.groups.len());
    for name in &model.groups {
        let action = lookup_action(name)?;
        let a = model
            .symbol
            .build_crossed(&action, model.bundle, &mut rng)?;
        let room = 2 * a.x_degree() + action.order();
        if let Some(n) = cfg.grid.n.iter().find(|&&n| n <= room) {
            return Err(Error::Config(format!(
                "N = {n} leaves no interior band for `{name}`"
            )));
        }
        symbols.push((name.clone(), a));
    }
    let sandwich = if model.sandwich.enabled {
        let s = &model.sandwich;
        check_positive("sandwich.tolerance", s.tolerance)?;
        if s.n == 0 || s.n > super::config::MAX_CUTOFF {
            return Err(Error::Config("sandwich.n out of range".into()));
        }
        let action = Arc::unwrap_or_clone(lookup_action(&s.action)?);
        let v = poly_from_terms(&s.potential, 1, None)?;
        let p = CompleteSymbolOrder1::with_potential(v)?;
        if p.invariance_defect(&action)? > 1e-12 {
            return Err(Error::NotInvariant(format!(
                "sandwich potential is not `{}`-invariant",
                s.action
            )));
        }
        let a = s.symbol.build(1, &mut rng)?;
        Some(Sandwich {
            action,
            p,
            a,
            n: s.n,
            tolerance: s.tolerance,
        })
    } else {
        None
    };
    Ok(Prepared {
        model,
        symbols,
        sandwich,
    })
}

/// `Σ_j ‖c_j‖_F`, a bound on the sup norm over the circle.
fn coeff_l1(p: &TrigPoly) -> f64 {
    p.coeffs()
        .map(|(_, c)| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .sum()
}

/// Rows `<group>/k<k>` (component error as a coefficient ℓ¹ bound),
/// `<group>/class` (decomposition residual) and `sandwich`.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<(ErrorTable, Vec<Gate>)> {
    let Prepared {
        model,
        symbols,
        sandwich,
    } = prepare(cfg)?;
    let h = HamiltonianSpec::metric_norm(vec![model.speed * model.speed])?;
    let principal = HomogeneousSymbol::abs_xi().scale(C64::new(model.speed, 0.0));
    let p = CompleteSymbolOrder1::new(principal, HomogeneousSymbol::zero(0, model.bundle), None)?;
    let mut table = ErrorTable::new();
    let mut gates = Vec::new();
    for (name, a) in &symbols {
        let order = a.action().order() as i64;
        let d = a.x_degree() as i64;
        for &n in &cfg.grid.n {
            let trunc = Truncation::circle_bundle(n, model.bundle);
            let q = crossed_quantize(a, trunc)?;
            let dec = SpectralDecomposition::new(&build_first_order(&p, trunc)?)?;
            let evolved = dec.evolve_many(&q.matrix, &cfg.grid.t)?;
            let ni = n as i64;
            for (&t, at) in cfg.grid.t.iter().zip(evolved) {
                let op = q.with_matrix(at)?;
                let want = nc_flow_pullback(a, &h, t)?;
                for m in (-ni..=ni).filter(|&m| m != 0 && m.abs() + order <= ni) {
                    let band = m.abs() > d && m.abs() <= ni - d - order;
                    for k in a.action().group().elements() {
                        let got = crossed_symbol_of(&op, m, k)?;
                        let w = C64::new(mode_weight(m, a.degree()), 0.0);
                        let expect = want.components()[k].mode_component(m).scale(w);
                        table.push(
                            format!("{name}/k{k}"),
                            n,
                            t,
                            m,
                            coeff_l1(&got.sub(&expect)),
                            band,
                        )?;
                    }
                    table.push(
                        format!("{name}/class"),
                        n,
                        t,
                        m,
                        decomposition_residual(&op, m)?,
                        band,
                    )?;
                }
            }
        }
        gates.push(Gate::at_most(
            format!("{name} component band error"),
            table.band_max_prefixed(&format!("{name}/k")),
            model.tolerance,
        ));
        gates.push(Gate::at_most(
            format!("{name} class residual"),
            table.band_max(&format!("{name}/class")),
            model.class_tolerance,
        ));
    }
    if let Some(s) = sandwich {
        let trunc = Truncation::circle(s.n);
        let big_p = build_first_order(&s.p, trunc)?;
        let a = op_quantize(&s.a, trunc)?;
        for (&t, ev) in cfg.grid.t.iter().zip(orbifold_heisenberg_many(
            &s.action,
            &big_p,
            &a,
            &cfg.grid.t,
            None,
        )?) {
            table.push("sandwich", s.n, t, 0, ev.discrepancy(), true)?;
        }
        gates.push(Gate::at_most(
            "sandwich discrepancy",
            table.band_max("sandwich"),
            s.tolerance,
        ));
    }
    Ok((table, gates))
}
