use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::crossed_product::{CrossedSymbol, CrossedTerm};
use crate::error::{Error, Result};
use crate::group_actions::AffineIsometryAction;
use crate::linalg::{CMat, C64};
use crate::quantization::{HomogeneousSymbol, Sign};
use crate::trigpoly::TrigPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ClassicalEgorov,
    MatrixEgorov,
    NcEgorov,
    Reduction,
    AlgebraSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ClassicalEgorov,
        ExperimentKind::MatrixEgorov,
        ExperimentKind::NcEgorov,
        ExperimentKind::Reduction,
        ExperimentKind::AlgebraSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ClassicalEgorov => "classical-egorov",
            ExperimentKind::MatrixEgorov => "matrix-egorov",
            ExperimentKind::NcEgorov => "nc-egorov",
            ExperimentKind::Reduction => "reduction",
            ExperimentKind::AlgebraSuite => "algebra-suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::ClassicalEgorov => {
                "scalar symbol evolved under a first-order P versus transport along the flow"
            }
            ExperimentKind::MatrixEgorov => {
                "matrix symbol with potential versus parallel transport, dyadic decay"
            }
            ExperimentKind::NcEgorov => {
                "crossed-product operator components versus the flow automorphism"
            }
            ExperimentKind::Reduction => {
                "momentum conservation, conormal invariance and invariant observables"
            }
            ExperimentKind::AlgebraSuite => {
                "crossed-product algebra, representations and groupoid identities"
            }
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn detail_file(self) -> &'static str {
        match self {
            OutputFormat::Csv => "detail.csv",
            OutputFormat::Json => "detail.json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub theta_points: usize,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: vec![64, 128, 256],
            t: vec![0.5, 1.0, 2.0],
            theta_points: 256,
            dt: 1e-3,
        }
    }
}

/// Largest circle cutoff accepted from a config.
pub const MAX_CUTOFF: usize = 1024;

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid.n must be strictly increasing".into()));
        }
        if self.n.iter().any(|&n| n == 0 || n > MAX_CUTOFF) {
            return Err(Error::Config(format!(
                "grid.n entries must lie in 1..={MAX_CUTOFF}"
            )));
        }
        if self.t.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("grid.t values must be finite".into()));
        }
        if self.theta_points == 0 || self.theta_points > 1 << 16 {
            return Err(Error::Config(
                "grid.theta_points must lie in 1..=65536".into(),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("grid.dt must be positive".into()));
        }
        Ok(())
    }
}

/// Top-level config file. `model` is read by the experiment's own schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub model: toml::Table,
}

impl ExperimentConfig {
    /// Built-in defaults for `kind`.
    pub fn builtin(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            seed: 0,
            output: OutputConfig::default(),
            grid: GridConfig::default(),
            model: toml::Table::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.grid.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Model block parsed with the experiment-specific schema.
    pub fn model<T: DeserializeOwned>(&self) -> Result<T> {
        Ok(toml::Value::Table(self.model.clone()).try_into()?)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// One coefficient `value · e^{i freq θ}` in entry `(row, col)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    #[serde(default)]
    pub element: usize,
    #[serde(default)]
    pub sign: Option<Sign>,
    pub freq: i64,
    #[serde(default)]
    pub row: usize,
    #[serde(default)]
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Largest frequency accepted in a config term.
pub const MAX_FREQ: i64 = 64;
/// Largest bundle rank accepted from a config.
pub const MAX_BUNDLE: usize = 8;

impl TermConfig {
    pub fn new(freq: i64, row: usize, col: usize, re: f64, im: f64) -> Self {
        TermConfig {
            element: 0,
            sign: None,
            freq,
            row,
            col,
            re,
            im,
        }
    }

    fn check(&self, size: usize) -> Result<()> {
        if self.freq.abs() > MAX_FREQ {
            return Err(Error::Config(format!(
                "term frequency {} exceeds {MAX_FREQ}",
                self.freq
            )));
        }
        if self.row >= size || self.col >= size {
            return Err(Error::Config(format!(
                "term entry ({}, {}) outside a {size}x{size} symbol",
                self.row, self.col
            )));
        }
        if !(self.re.is_finite() && self.im.is_finite()) {
            return Err(Error::Config("term coefficient must be finite".into()));
        }
        Ok(())
    }

    fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// `Σ value e^{i freq θ}` over the terms matching `sign` (all terms when `None`).
pub fn poly_from_terms(terms: &[TermConfig], size: usize, sign: Option<Sign>) -> Result<TrigPoly> {
    let mut entries = Vec::with_capacity(terms.len());
    for t in terms {
        t.check(size)?;
        if t.element != 0 {
            return Err(Error::Config(
                "`element` is only meaningful for crossed symbols".into(),
            ));
        }
        if sign.is_none() && t.sign.is_some() {
            return Err(Error::Config("`sign` is not meaningful here".into()));
        }
        if sign.is_none() || t.sign.is_none() || t.sign == sign {
            entries.push((t.freq, t.row, t.col, t.value()));
        }
    }
    TrigPoly::from_entries(size, &entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomConfig {
    pub x_degree: usize,
    /// Hermitian values on both halves of the cone.
    pub hermitian: bool,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            x_degree: 4,
            hermitian: false,
        }
    }
}

/// Either explicit `terms` or a seeded `random` draw (not both).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolConfig {
    pub degree: i32,
    pub terms: Vec<TermConfig>,
    pub random: Option<RandomConfig>,
}

fn random_poly(rng: &mut ChaCha8Rng, size: usize, degree: usize, hermitian: bool) -> TrigPoly {
    let coeffs = (0..2 * degree + 1)
        .map(|_| {
            CMat::from_shape_fn((size, size), |_| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        })
        .collect();
    let p = TrigPoly::from_coeffs(degree, coeffs).expect("coefficient count matches degree");
    if hermitian {
        p.add(&p.adjoint()).scale(C64::new(0.5, 0.0))
    } else {
        p
    }
}

impl SymbolConfig {
    pub fn random(degree: i32, x_degree: usize, hermitian: bool) -> Self {
        SymbolConfig {
            degree,
            terms: Vec::new(),
            random: Some(RandomConfig {
                x_degree,
                hermitian,
            }),
        }
    }

    fn check(&self) -> Result<()> {
        if !(-4..=4).contains(&self.degree) {
            return Err(Error::Config("symbol degree must lie in -4..=4".into()));
        }
        if let Some(r) = &self.random {
            if !self.terms.is_empty() {
                return Err(Error::Config(
                    "give either `terms` or `random`, not both".into(),
                ));
            }
            if r.x_degree as i64 > MAX_FREQ {
                return Err(Error::Config(format!("random x_degree exceeds {MAX_FREQ}")));
            }
        }
        Ok(())
    }

    pub fn build(&self, size: usize, rng: &mut ChaCha8Rng) -> Result<HomogeneousSymbol> {
        self.check()?;
        if let Some(r) = &self.random {
            let plus = random_poly(rng, size, r.x_degree, r.hermitian);
            let minus = random_poly(rng, size, r.x_degree, r.hermitian);
            return HomogeneousSymbol::new(self.degree, plus, minus);
        }
        for t in &self.terms {
            if t.element != 0 {
                return Err(Error::Config(
                    "`element` is only meaningful for crossed symbols".into(),
                ));
            }
        }
        let strip = |t: &TermConfig| TermConfig {
            sign: None,
            ..t.clone()
        };
        let pick = |s: Sign| -> Result<TrigPoly> {
            let own: Vec<TermConfig> = self
                .terms
                .iter()
                .filter(|t| t.sign.is_none_or(|ts| ts == s))
                .map(strip)
                .collect();
            poly_from_terms(&own, size, None)
        };
        HomogeneousSymbol::new(self.degree, pick(Sign::Plus)?, pick(Sign::Minus)?)
    }

    pub fn build_crossed(
        &self,
        action: &Arc<AffineIsometryAction>,
        size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<CrossedSymbol> {
        self.check()?;
        if let Some(r) = &self.random {
            let comps = (0..action.order())
                .map(|_| {
                    let plus = random_poly(rng, size, r.x_degree, r.hermitian);
                    let minus = random_poly(rng, size, r.x_degree, r.hermitian);
                    HomogeneousSymbol::new(self.degree, plus, minus)
                })
                .collect::<Result<Vec<_>>>()?;
            return CrossedSymbol::new(action.clone(), comps);
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            t.check(size)?;
            terms.push(CrossedTerm {
                element: t.element,
                sign: t.sign,
                freq: t.freq,
                row: t.row,
                col: t.col,
                value: t.value(),
            });
        }
        CrossedSymbol::from_terms(action.clone(), self.degree, size, &terms)
    }
}

pub fn lookup_action(name: &str) -> Result<Arc<AffineIsometryAction>> {
    let action = AffineIsometryAction::by_name(name)?;
    if action.dim() != 1 {
        return Err(Error::Config(format!(
            "action `{name}` does not act on the circle"
        )));
    }
    Ok(Arc::new(action))
}

pub fn check_bundle(size: usize) -> Result<()> {
    if size == 0 || size > MAX_BUNDLE {
        return Err(Error::Config(format!(
            "bundle rank must lie in 1..={MAX_BUNDLE}"
        )));
    }
    Ok(())
}

pub fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("{name} must be positive and finite")));
    }
    Ok(())
}

pub fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!(
            "{name} must be an ordered finite pair"
        )));
    }
    Ok(())
}
