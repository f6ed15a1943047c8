use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{check_positive, ExperimentConfig};
use super::table::ErrorTable;
use super::Gate;
use crate::error::{Error, Result};
use crate::group_actions::CircleAction;
use crate::symplectic_flows::{
    hamiltonian_flow, momentum_map, trajectory, CosineTerm, CotangentPoint, FlowConfig,
    HamiltonianSpec, InvariantObservable, KineticPotential, Symmetry,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineConfig {
    pub wave: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// `H = ½ξᵀMξ + Σ a cos(⟨k, x⟩ + φ)` on `T*T²` with a circle symmetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionModel {
    pub weight: Vec<i64>,
    /// Row-major `M`; identity when absent.
    pub kinetic: Option<Vec<f64>>,
    pub potential: Vec<CosineConfig>,
    /// `λ` in the second extension `H + λJ²`.
    pub penalty: f64,
    pub points: usize,
    pub steps: usize,
    pub j_tolerance: f64,
    pub conormal_tolerance: f64,
    pub observable_tolerance: f64,
    pub equivariance_tolerance: f64,
}

impl Default for ReductionModel {
    fn default() -> Self {
        ReductionModel {
            weight: vec![1, 1],
            kinetic: None,
            potential: vec![CosineConfig {
                wave: vec![1, -1],
                amplitude: 0.5,
                phase: 0.3,
            }],
            penalty: 0.7,
            points: 8,
            steps: 10_000,
            j_tolerance: 1e-12,
            conormal_tolerance: 1e-8,
            observable_tolerance: 1e-6,
            equivariance_tolerance: 1e-8,
        }
    }
}

pub(crate) struct Prepared {
    model: ReductionModel,
    circle: CircleAction,
    h: HamiltonianSpec,
    h_penalized: HamiltonianSpec,
    observable: InvariantObservable,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let model: ReductionModel = cfg.model()?;
    if model.weight.len() != 2 {
        return Err(Error::Config(
            "reduction runs on the 2-torus: weight needs two entries".into(),
        ));
    }
    let circle = CircleAction::new(model.weight.clone())?;
    for (name, v) in [
        ("j_tolerance", model.j_tolerance),
        ("conormal_tolerance", model.conormal_tolerance),
        ("observable_tolerance", model.observable_tolerance),
        ("equivariance_tolerance", model.equivariance_tolerance),
    ] {
        check_positive(name, v)?;
    }
    if !model.penalty.is_finite() {
        return Err(Error::Config("penalty must be finite".into()));
    }
    if model.points == 0 || model.points > 1024 || model.steps == 0 || model.steps > 10_000_000 {
        return Err(Error::Config(
            "points must lie in 1..=1024 and steps in 1..=10^7".into(),
        ));
    }
    let potential = model
        .potential
        .iter()
        .map(|c| CosineTerm {
            wave: c.wave.clone(),
            amplitude: c.amplitude,
            phase: c.phase,
        })
        .collect();
    let kp = match &model.kinetic {
        Some(m) => KineticPotential::new(2, m.clone(), potential)?,
        None => KineticPotential::standard(2, potential)?,
    };
    let penalized = kp.with_momentum_penalty(&circle, model.penalty)?;
    let h = HamiltonianSpec::closed_form(Arc::new(kp))
        .declare_invariance(Symmetry::Circle(circle.clone()))?;
    let h_penalized = HamiltonianSpec::closed_form(Arc::new(penalized))
        .declare_invariance(Symmetry::Circle(circle.clone()))?;
    let [w1, w2] = [model.weight[0] as f64, model.weight[1] as f64];
    // ⟨k, w⟩ = 0 for k = (w₂, −w₁)
    let observable =
        InvariantObservable::new("orbit-invariant", &circle, move |nu: &CotangentPoint| {
            let kx = w2 * nu.x[0] - w1 * nu.x[1];
            let kxi = w2 * nu.xi[0] - w1 * nu.xi[1];
            kx.cos() + 0.5 * kxi * kxi / (w1 * w1 + w2 * w2)
        })?;
    Ok(Prepared {
        model,
        circle,
        h,
        h_penalized,
        observable,
    })
}

/// Rows `j-drift` and `conormal` over `steps` leapfrog steps, `observable`
/// and `equivariance` at each grid time; `m` is the sample index.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<(ErrorTable, Vec<Gate>)> {
    let Prepared {
        model,
        circle,
        h,
        h_penalized,
        observable,
    } = prepare(cfg)?;
    let mut rng = cfg.rng();
    let leap = FlowConfig::leapfrog(cfg.grid.dt);
    let horizon = model.steps as f64 * cfg.grid.dt;
    let w = circle.generator();
    let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
    let mut table = ErrorTable::new();
    for i in 0..model.points {
        let x: Vec<f64> = (0..2)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let general = CotangentPoint::new(
            x.clone(),
            (0..2).map(|_| rng.random_range(-2.0..2.0)).collect(),
        );
        let s: f64 = rng.random_range(-2.0..2.0);
        let conormal = CotangentPoint::new(x, vec![s * w[1] / norm, -s * w[0] / norm]);
        let shift = rng.random_range(0.0..std::f64::consts::TAU);

        let j0 = momentum_map(&circle, &general)?;
        let traj = trajectory(&h, &general, horizon, &leap, 1)?;
        let mut drift = 0.0_f64;
        for p in &traj.points {
            drift = drift.max((momentum_map(&circle, p)? - j0).abs());
        }
        table.push("j-drift", 0, horizon, i as i64, drift, true)?;

        let traj = trajectory(&h, &conormal, horizon, &leap, 1)?;
        let mut off = 0.0_f64;
        for p in &traj.points {
            off = off.max(momentum_map(&circle, p)?.abs());
        }
        table.push("conormal", 0, horizon, i as i64, off, true)?;

        for &t in &cfg.grid.t {
            let a = hamiltonian_flow(&h, &conormal, t, &leap)?;
            let b = hamiltonian_flow(&h_penalized, &conormal, t, &leap)?;
            table.push(
                "observable",
                0,
                t,
                i as i64,
                (observable.eval(&a) - observable.eval(&b)).abs(),
                true,
            )?;

            let moved = hamiltonian_flow(&h, &circle.cotangent_lift(shift, &general), t, &leap)?;
            let lifted = circle.cotangent_lift(shift, &hamiltonian_flow(&h, &general, t, &leap)?);
            table.push(
                "equivariance",
                0,
                t,
                i as i64,
                moved.distance(&lifted),
                true,
            )?;
        }
    }
    let gates = vec![
        Gate::at_most(
            "momentum drift",
            table.band_max("j-drift"),
            model.j_tolerance,
        ),
        Gate::at_most(
            "conormal invariance",
            table.band_max("conormal"),
            model.conormal_tolerance,
        ),
        Gate::at_most(
            "invariant observable agreement",
            table.band_max("observable"),
            model.observable_tolerance,
        ),
        Gate::at_most(
            "circle equivariance",
            table.band_max("equivariance"),
            model.equivariance_tolerance,
        ),
    ];
    Ok((table, gates))
}
