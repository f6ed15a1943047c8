use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{
    check_bundle, check_positive, lookup_action, ExperimentConfig, MAX_CUTOFF, MAX_FREQ,
};
use super::table::ErrorTable;
use super::Gate;
use crate::crossed_product::{
    compose, crossed_quantize, crossed_symbol_of, fiber_represent, groupoid_inverse,
    nc_flow_pullback, reduced_norm, represent, source, target, CrossedFunction, CrossedOperator,
    CrossedSymbol, GroupoidElement,
};
use crate::error::{Error, Result};
use crate::group_actions::{AffineIsometryAction, TorusPoint};
use crate::linalg::{dagger, max_abs_diff, CMat, C64};
use crate::modes::{OperatorMatrix, Truncation};
use crate::quantization::HomogeneousSymbol;
use crate::symplectic_flows::HamiltonianSpec;
use crate::trigpoly::TrigPoly;

/// Randomized crossed-product identities for each group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraModel {
    pub groups: Vec<String>,
    pub x_degree: usize,
    pub bundle: usize,
    pub n: usize,
    pub samples: usize,
    pub fiber_points: usize,
    pub norm_points: usize,
    pub tolerance: f64,
}

impl Default for AlgebraModel {
    fn default() -> Self {
        AlgebraModel {
            groups: vec!["Z2-reflection".into(), "Z4".into(), "D2".into()],
            x_degree: 4,
            bundle: 2,
            n: 128,
            samples: 2,
            fiber_points: 16,
            norm_points: 64,
            tolerance: 1e-12,
        }
    }
}

pub(crate) struct Prepared {
    model: AlgebraModel,
    actions: Vec<(String, Arc<AffineIsometryAction>)>,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model: AlgebraModel = cfg.model()?;
    check_bundle(model.bundle)?;
    check_positive("tolerance", model.tolerance)?;
    if model.x_degree as i64 > MAX_FREQ || model.n > MAX_CUTOFF {
        return Err(Error::Config("x_degree or n out of range".into()));
    }
    if model.samples > 64 || model.fiber_points > 4096 || model.norm_points > 1 << 14 {
        return Err(Error::Config(
            "samples, fiber_points or norm_points out of range".into(),
        ));
    }
    let actions = model
        .groups
        .iter()
        .map(|g| lookup_action(g).map(|a| (g.clone(), a)))
        .collect::<Result<Vec<_>>>()?;
    let need = 4 * model.x_degree + 8;
    if !actions.is_empty() && model.n < need {
        return Err(Error::Config(format!(
            "n must be at least {need} for x_degree {}",
            model.x_degree
        )));
    }
    Ok(Prepared { model, actions })
}

fn random_poly(rng: &mut ChaCha8Rng, size: usize, degree: usize) -> TrigPoly {
    let coeffs = (0..2 * degree + 1)
        .map(|_| {
            CMat::from_shape_fn((size, size), |_| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        })
        .collect();
    TrigPoly::from_coeffs(degree, coeffs).expect("coefficient count matches degree")
}

fn random_function(
    rng: &mut ChaCha8Rng,
    action: &Arc<AffineIsometryAction>,
    size: usize,
    degree: usize,
) -> Result<CrossedFunction> {
    let comps = (0..action.order())
        .map(|_| random_poly(rng, size, degree))
        .collect();
    CrossedFunction::new(action.clone(), comps)
}

fn random_symbol(
    rng: &mut ChaCha8Rng,
    action: &Arc<AffineIsometryAction>,
    size: usize,
    degree: usize,
) -> Result<CrossedSymbol> {
    let comps = (0..action.order())
        .map(|_| {
            HomogeneousSymbol::new(
                0,
                random_poly(rng, size, degree),
                random_poly(rng, size, degree),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    CrossedSymbol::new(action.clone(), comps)
}

/// Interior modes probed by the peeling checks.
fn probe_modes(n: i64, d: i64, order: i64) -> Vec<i64> {
    let hi = n - d - order;
    [d + 1, (d + 1 + hi) / 2, hi]
        .into_iter()
        .flat_map(|m| [m, -m])
        .collect()
}

struct Checks<'a> {
    table: &'a mut ErrorTable,
    name: &'a str,
    n: usize,
}

impl Checks<'_> {
    fn push(&mut self, check: &str, n: bool, t: f64, sample: usize, value: f64) -> Result<()> {
        let nn = if n { self.n } else { 0 };
        self.table.push(
            format!("{}/{check}", self.name),
            nn,
            t,
            sample as i64,
            value,
            true,
        )
    }
}

/// Rows `<group>/<identity>` with the residual of each identity; `m` is the
/// sample index and `t` the flow time where one applies.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<(ErrorTable, Vec<Gate>)> {
    let Prepared { model, actions } = prepare(cfg)?;
    let mut rng = cfg.rng();
    let mut table = ErrorTable::new();
    let mut gates = Vec::new();
    let size = model.bundle;
    let dd = model.x_degree;
    let trunc = Truncation::circle_bundle(model.n, size);
    let flat = HamiltonianSpec::flat_norm(1)?;
    for (name, action) in &actions {
        let group = action.group();
        let order = action.order() as i64;
        let mut c = Checks {
            table: &mut table,
            name,
            n: model.n,
        };
        let unit = CrossedFunction::unit(action.clone(), size)?;
        let r_unit = represent(&unit, trunc)?;
        c.push(
            "represent-unit",
            true,
            0.0,
            0,
            r_unit.max_abs_diff(&OperatorMatrix::identity(trunc))?,
        )?;
        for sample in 0..model.samples {
            let f = random_function(&mut rng, action, size, dd)?;
            let g = random_function(&mut rng, action, size, dd)?;
            let h = random_function(&mut rng, action, size, dd)?;
            let fg = f.convolve(&g)?;
            c.push(
                "unit-left",
                false,
                0.0,
                sample,
                unit.convolve(&f)?.max_coeff_diff(&f),
            )?;
            c.push(
                "unit-right",
                false,
                0.0,
                sample,
                f.convolve(&unit)?.max_coeff_diff(&f),
            )?;
            c.push(
                "associativity",
                false,
                0.0,
                sample,
                fg.convolve(&h)?
                    .max_coeff_diff(&f.convolve(&g.convolve(&h)?)?),
            )?;
            c.push(
                "involution-twice",
                false,
                0.0,
                sample,
                f.involution().involution().max_coeff_diff(&f),
            )?;
            let anti = fg
                .involution()
                .max_coeff_diff(&g.involution().convolve(&f.involution())?);
            c.push("involution-product", false, 0.0, sample, anti)?;

            let rf = represent(&f, trunc)?;
            let rg = represent(&g, trunc)?;
            let radius = model.n - 2 * dd;
            c.push(
                "represent-product",
                true,
                0.0,
                sample,
                represent(&fg, trunc)?.block_diff(&rf.matmul(&rg)?, radius)?,
            )?;
            c.push(
                "represent-adjoint",
                true,
                0.0,
                sample,
                represent(&f.involution(), trunc)?.block_diff(&rf.adjoint(), radius)?,
            )?;

            let mut fiber = [0.0_f64; 3];
            let eye = CMat::eye(size * action.order());
            for _ in 0..model.fiber_points {
                let x = rng.random_range(0.0..std::f64::consts::TAU);
                let rx = fiber_represent(&f, x);
                fiber[0] = fiber[0].max(max_abs_diff(
                    &fiber_represent(&fg, x),
                    &rx.dot(&fiber_represent(&g, x)),
                ));
                fiber[1] = fiber[1].max(max_abs_diff(
                    &fiber_represent(&f.involution(), x),
                    &dagger(&rx),
                ));
                fiber[2] = fiber[2].max(max_abs_diff(&fiber_represent(&unit, x), &eye));
            }
            c.push("fiber-product", false, 0.0, sample, fiber[0])?;
            c.push("fiber-adjoint", false, 0.0, sample, fiber[1])?;
            c.push("fiber-unit", false, 0.0, sample, fiber[2])?;

            let mut groupoid = 0.0_f64;
            for _ in 0..model.fiber_points {
                let x = TorusPoint::circle(rng.random_range(0.0..std::f64::consts::TAU));
                for k1 in group.elements() {
                    let a = GroupoidElement::new(x.clone(), k1);
                    let y = source(action, &a)?;
                    for k2 in group.elements() {
                        let b = GroupoidElement::new(y.clone(), k2);
                        let ab = compose(action, &a, &b)?.ok_or_else(|| {
                            Error::InvalidGroup("composable arrows refused".into())
                        })?;
                        groupoid =
                            groupoid.max(target(action, &ab)?.distance(&target(action, &a)?));
                        groupoid =
                            groupoid.max(source(action, &ab)?.distance(&source(action, &b)?));
                    }
                    let inv = groupoid_inverse(action, &a)?;
                    let id = compose(action, &a, &inv)?
                        .ok_or_else(|| Error::InvalidGroup("inverse not composable".into()))?;
                    groupoid = groupoid.max(target(action, &id)?.distance(&x));
                    if id.k != group.identity() {
                        groupoid = f64::INFINITY;
                    }
                }
            }
            c.push("groupoid", false, 0.0, sample, groupoid)?;

            let rep = CrossedOperator {
                matrix: rf,
                degree: 0,
                action: action.clone(),
            };
            let mut sigma = 0.0_f64;
            for m in probe_modes(model.n as i64, dd as i64, order) {
                for k in group.elements() {
                    sigma =
                        sigma.max(crossed_symbol_of(&rep, m, k)?.max_coeff_diff(f.component(k)?));
                }
            }
            c.push("symbol-of-representation", true, 0.0, sample, sigma)?;

            let coarse = reduced_norm(&f, model.norm_points.max(64))?;
            let fine = reduced_norm(&f, 2 * model.norm_points.max(64))?;
            let excess = ((fine.value - coarse.value).abs() - coarse.sup_gap_bound()).max(0.0);
            c.push("norm-refinement", false, 0.0, sample, excess)?;

            let a = random_symbol(&mut rng, action, size, dd)?;
            let b = random_symbol(&mut rng, action, size, dd)?;
            let ab = a.convolve(&b)?;
            let qa = crossed_quantize(&a, trunc)?;
            let prod = qa.with_matrix(qa.matrix.matmul(&crossed_quantize(&b, trunc)?.matrix)?)?;
            let mut hom = 0.0_f64;
            for m in probe_modes(model.n as i64, 2 * dd as i64, order) {
                for k in group.elements() {
                    hom = hom.max(
                        crossed_symbol_of(&prod, m, k)?
                            .max_coeff_diff(&ab.components()[k].mode_component(m)),
                    );
                }
            }
            c.push("symbol-product", true, 0.0, sample, hom)?;

            for &t in &cfg.grid.t {
                let ft = |s: &CrossedSymbol| nc_flow_pullback(s, &flat, t);
                c.push(
                    "flow-product",
                    false,
                    t,
                    sample,
                    ft(&ab)?.max_coeff_diff(&ft(&a)?.convolve(&ft(&b)?)?),
                )?;
                c.push(
                    "flow-involution",
                    false,
                    t,
                    sample,
                    ft(&a.involution()?)?.max_coeff_diff(&ft(&a)?.involution()?),
                )?;
                let twice = nc_flow_pullback(&ft(&a)?, &flat, t)?;
                c.push(
                    "flow-composition",
                    false,
                    t,
                    sample,
                    twice.max_coeff_diff(&nc_flow_pullback(&a, &flat, 2.0 * t)?),
                )?;
            }
        }
        gates.push(Gate::at_most(
            format!("{name} residuals"),
            table.band_max_prefixed(&format!("{name}/")),
            model.tolerance,
        ));
    }
    Ok((table, gates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::GridConfig;

    fn cfg(model: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml(&format!(
            "experiment = \"algebra-suite\"\nseed = 8\n[model]\n{model}"
        ))
        .unwrap();
        c.grid = GridConfig {
            t: vec![0.5, 1.0],
            ..GridConfig::default()
        };
        c
    }

    #[test]
    fn small_suite_passes() {
        let (table, gates) =
            run(&cfg("n = 40\nx_degree = 3\nsamples = 1\nfiber_points = 4")).unwrap();
        assert_eq!(gates.len(), 3);
        assert!(gates.iter().all(|g| g.passed), "{gates:?}");
        assert!(table
            .rows
            .iter()
            .any(|r| r.quantity == "D2/flow-composition"));
    }

    #[test]
    fn empty_group_list_gives_an_empty_table() {
        let (table, gates) = run(&cfg("groups = []")).unwrap();
        assert!(table.is_empty());
        assert!(gates.is_empty());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(prepare(&cfg("groups = [\"T2-swap\"]")).is_err());
        assert!(prepare(&cfg("n = 10")).is_err());
        assert!(prepare(&cfg("bundle = 0")).is_err());
    }
}
