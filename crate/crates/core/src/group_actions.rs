//! Finite groups and circle actions on flat tori, their cotangent lifts,
//! isotropy, and the exact action on Fourier modes.
//!
//! Every finite action here is by integer-orthogonal affine maps
//! `x ↦ A x + b` on `T^n = R^n / 2πZ^n`, `n ∈ {1, 2}`. Integer `A` means
//! the induced action on Fourier modes is a phased signed permutation, so
//! truncated windows are invariant and all algebraic identities hold to
//! rounding.

use std::f64::consts::{PI, TAU};
use std::iter::Sum;
use std::ops::Div;

use crate::error::{Error, Result};
use crate::linalg::{dagger, kron, max_abs_diff, CMat, C64};
use crate::modes::{OperatorMatrix, Truncation};
use crate::symplectic_flows::CotangentPoint;

/// Default isotropy tolerance (radians, torus metric).
pub const ISOTROPY_TOL: f64 = 1e-9;

/// Tolerance used when matching composed maps against group elements.
const MATCH_TOL: f64 = 1e-9;

pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Representative of `a - b` in `(-π, π]`.
pub fn wrap_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Point on the flat torus, coordinates in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        TorusPoint(coords.into_iter().map(reduce_angle).collect())
    }

    pub fn circle(theta: f64) -> Self {
        TorusPoint::new(vec![theta])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Flat torus distance (wrap-around in every coordinate).
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        torus_distance(&self.0, &other.0)
    }
}

pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap_diff(*x, *y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Finite group given by its multiplication table; element 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    table: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// Validates the table exhaustively: closure, identity at 0,
    /// Latin-square property, associativity.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        for (a, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroup(format!(
                    "row {a} has length {}",
                    row.len()
                )));
            }
            if row.iter().any(|&c| c >= n) {
                return Err(Error::InvalidGroup(format!(
                    "row {a} has an out-of-range entry"
                )));
            }
        }
        for (a, row) in table.iter().enumerate() {
            if table[0][a] != a || row[0] != a {
                return Err(Error::InvalidGroup("element 0 is not the identity".into()));
            }
        }
        let mut inverse = vec![usize::MAX; n];
        for a in 0..n {
            let mut seen_row = vec![false; n];
            let mut seen_col = vec![false; n];
            for b in 0..n {
                if std::mem::replace(&mut seen_row[table[a][b]], true)
                    || std::mem::replace(&mut seen_col[table[b][a]], true)
                {
                    return Err(Error::InvalidGroup("table is not a Latin square".into()));
                }
                if table[a][b] == 0 {
                    inverse[a] = b;
                }
            }
        }
        for a in 0..n {
            if table[inverse[a]][a] != 0 {
                return Err(Error::InvalidGroup(format!(
                    "left and right inverse of {a} differ"
                )));
            }
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidGroup(format!(
                            "associativity fails at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup { table, inverse })
    }

    pub fn trivial() -> Self {
        FiniteGroup {
            table: vec![vec![0]],
            inverse: vec![0],
        }
    }

    pub fn cyclic(q: usize) -> Self {
        let table = (0..q)
            .map(|a| (0..q).map(|b| (a + b) % q).collect())
            .collect();
        FiniteGroup::from_table(table).expect("cyclic table is valid")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order()
    }

    pub fn check(&self, g: usize) -> Result<()> {
        if g < self.order() {
            Ok(())
        } else {
            Err(Error::UnknownElement {
                element: g,
                order: self.order(),
            })
        }
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn is_subgroup(&self, elems: &[usize]) -> bool {
        if !elems.contains(&0) || elems.iter().any(|&g| g >= self.order()) {
            return false;
        }
        elems.iter().all(|&a| {
            elems.contains(&self.inverse[a])
                && elems.iter().all(|&b| elems.contains(&self.table[a][b]))
        })
    }

    /// Normalized counting (Haar) measure: `|K|⁻¹ Σ_k f(k)`.
    pub fn haar_average<T>(&self, values: &[T]) -> Result<T>
    where
        T: Copy + Sum<T> + Div<f64, Output = T>,
    {
        if values.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a group of order {}",
                values.len(),
                self.order()
            )));
        }
        Ok(values.iter().copied().sum::<T>() / self.order() as f64)
    }
}

/// `x ↦ A x + b` with integer orthogonal `A` (row-major) and `b` in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub linear: Vec<i64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        let mut linear = vec![0; dim * dim];
        for i in 0..dim {
            linear[i * dim + i] = 1;
        }
        AffineMap {
            linear,
            offset: vec![0.0; dim],
        }
    }

    /// Offsets given as fractions of a full turn.
    pub fn from_turns(linear: Vec<i64>, turns: &[f64]) -> Self {
        AffineMap {
            linear,
            offset: turns.iter().map(|t| reduce_angle(t * TAU)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.linear[i * self.dim() + j]
    }

    /// `A v` without the offset.
    pub fn apply_linear_f(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j) as f64 * v[j]).sum())
            .collect()
    }

    pub fn apply_linear_i(&self, v: &[i64]) -> Vec<i64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j) * v[j]).sum())
            .collect()
    }

    /// `A x + b`, not reduced.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_linear_f(x)
            .iter()
            .zip(&self.offset)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let n = self.dim();
        let mut linear = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                linear[i * n + j] = (0..n).map(|k| self.entry(i, k) * other.entry(k, j)).sum();
            }
        }
        let offset = self
            .apply_linear_f(&other.offset)
            .iter()
            .zip(&self.offset)
            .map(|(a, b)| reduce_angle(a + b))
            .collect();
        AffineMap { linear, offset }
    }

    pub fn is_integer_orthogonal(&self) -> bool {
        let n = self.dim();
        if self.linear.len() != n * n {
            return false;
        }
        (0..n).all(|i| {
            (0..n).all(|j| {
                let dot: i64 = (0..n).map(|k| self.entry(k, i) * self.entry(k, j)).sum();
                dot == i64::from(i == j)
            })
        })
    }

    /// Equality with offsets compared modulo 2π.
    pub fn approx_eq(&self, other: &AffineMap, tol: f64) -> bool {
        self.linear == other.linear && torus_distance(&self.offset, &other.offset) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&AffineMap::identity(self.dim()), tol)
    }
}

/// A finite group acting on `T^n` by integer-orthogonal affine isometries.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineIsometryAction {
    name: String,
    dim: usize,
    group: FiniteGroup,
    maps: Vec<AffineMap>,
}

impl AffineIsometryAction {
    /// Builds the action from its element maps. `maps[0]` must be the
    /// identity; the multiplication table is recovered by composing maps,
    /// which checks closure, the homomorphism property and effectiveness
    /// (distinct elements act differently) in one pass.
    pub fn from_maps(name: impl Into<String>, dim: usize, maps: Vec<AffineMap>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidAction(format!(
                "dimension {dim} not in {{1, 2}}"
            )));
        }
        if maps.is_empty() {
            return Err(Error::InvalidAction("no elements".into()));
        }
        for (g, m) in maps.iter().enumerate() {
            if m.dim() != dim || m.linear.len() != dim * dim {
                return Err(Error::InvalidAction(format!(
                    "element {g} has wrong dimension"
                )));
            }
            if !m.is_integer_orthogonal() {
                return Err(Error::InvalidAction(format!(
                    "element {g} is not integer-orthogonal"
                )));
            }
            if m.offset.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidAction(format!(
                    "element {g} has a non-finite offset"
                )));
            }
        }
        if !maps[0].is_identity(MATCH_TOL) {
            return Err(Error::InvalidAction(
                "element 0 must act as the identity".into(),
            ));
        }
        for a in 0..maps.len() {
            for b in a + 1..maps.len() {
                if maps[a].approx_eq(&maps[b], MATCH_TOL) {
                    return Err(Error::InvalidAction(format!(
                        "elements {a} and {b} act identically (action not effective)"
                    )));
                }
            }
        }
        let find = |m: &AffineMap| maps.iter().position(|c| c.approx_eq(m, MATCH_TOL));
        let mut table = Vec::with_capacity(maps.len());
        for a in &maps {
            let mut row = Vec::with_capacity(maps.len());
            for b in &maps {
                let c = a.compose(b);
                row.push(find(&c).ok_or_else(|| {
                    Error::InvalidAction("element maps are not closed under composition".into())
                })?);
            }
            table.push(row);
        }
        let group = FiniteGroup::from_table(table)?;
        Ok(AffineIsometryAction {
            name: name.into(),
            dim,
            group,
            maps,
        })
    }

    pub fn trivial(dim: usize) -> Self {
        AffineIsometryAction::from_maps("trivial", dim, vec![AffineMap::identity(dim)])
            .expect("trivial action is valid")
    }

    /// `Z_q` acting on the circle by rotation through `2π/q`.
    pub fn rotation(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidAction(
                "rotation order must be positive".into(),
            ));
        }
        let maps = (0..q)
            .map(|j| AffineMap::from_turns(vec![1], &[j as f64 / q as f64]))
            .collect();
        AffineIsometryAction::from_maps(format!("Z{q}"), 1, maps)
    }

    /// `Z_2` acting on the circle by `θ ↦ -θ`.
    pub fn reflection() -> Self {
        AffineIsometryAction::from_maps(
            "Z2-reflection",
            1,
            vec![
                AffineMap::identity(1),
                AffineMap::from_turns(vec![-1], &[0.0]),
            ],
        )
        .expect("reflection is valid")
    }

    /// Dihedral group of order `2q` on the circle: rotations by `2πj/q`
    /// (elements `0..q`) then reflections `θ ↦ -θ + 2πj/q` (elements `q..2q`).
    pub fn dihedral(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidAction(
                "dihedral order must be positive".into(),
            ));
        }
        let rotations = (0..q).map(|j| AffineMap::from_turns(vec![1], &[j as f64 / q as f64]));
        let reflections = (0..q).map(|j| AffineMap::from_turns(vec![-1], &[j as f64 / q as f64]));
        AffineIsometryAction::from_maps(format!("D{q}"), 1, rotations.chain(reflections).collect())
    }

    /// `Z_4` on the 2-torus by the quarter turn `(x, y) ↦ (-y, x)`.
    pub fn torus_quarter_turn() -> Self {
        let r = AffineMap {
            linear: vec![0, -1, 1, 0],
            offset: vec![0.0, 0.0],
        };
        let r2 = r.compose(&r);
        let r3 = r2.compose(&r);
        AffineIsometryAction::from_maps(
            "T2-quarter-turn",
            2,
            vec![AffineMap::identity(2), r, r2, r3],
        )
        .expect("quarter turn is valid")
    }

    /// `Z_2` on the 2-torus by coordinate swap.
    pub fn torus_swap() -> Self {
        let s = AffineMap {
            linear: vec![0, 1, 1, 0],
            offset: vec![0.0, 0.0],
        };
        AffineIsometryAction::from_maps("T2-swap", 2, vec![AffineMap::identity(2), s])
            .expect("swap is valid")
    }

    /// `Z_2` on the 2-torus by `x ↦ -x`.
    pub fn torus_half_turn() -> Self {
        let s = AffineMap {
            linear: vec![-1, 0, 0, -1],
            offset: vec![0.0, 0.0],
        };
        AffineIsometryAction::from_maps("T2-half-turn", 2, vec![AffineMap::identity(2), s])
            .expect("half turn is valid")
    }

    /// Free `Z_2` on the 2-torus: translation by `(π, 0)`.
    pub fn torus_shift() -> Self {
        let s = AffineMap::from_turns(vec![1, 0, 0, 1], &[0.5, 0.0]);
        AffineIsometryAction::from_maps("T2-shift", 2, vec![AffineMap::identity(2), s])
            .expect("shift is valid")
    }

    /// Looks up a built-in action by name (see [`BUILTIN_ACTIONS`]).
    pub fn by_name(name: &str) -> Result<Self> {
        let unknown = || Error::Config(format!("unknown built-in action `{name}`"));
        match name {
            "trivial" | "S1-trivial" => Ok(Self::trivial(1)),
            "T2-trivial" => Ok(Self::trivial(2)),
            "reflection" | "Z2-reflection" => Ok(Self::reflection()),
            "T2-quarter-turn" => Ok(Self::torus_quarter_turn()),
            "T2-swap" => Ok(Self::torus_swap()),
            "T2-half-turn" => Ok(Self::torus_half_turn()),
            "T2-shift" => Ok(Self::torus_shift()),
            _ => {
                let kind = name.chars().next().ok_or_else(unknown)?;
                let q: usize = name[kind.len_utf8()..].parse().map_err(|_| unknown())?;
                if q == 0 || q > 64 {
                    return Err(unknown());
                }
                match kind {
                    'Z' => Self::rotation(q),
                    'D' => Self::dihedral(q),
                    _ => Err(unknown()),
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    pub fn map(&self, g: usize) -> Result<&AffineMap> {
        self.group.check(g)?;
        Ok(&self.maps[g])
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    /// Circle actions only: `(sign of A_g, b_g)`.
    pub fn circle_map(&self, g: usize) -> (i64, f64) {
        debug_assert_eq!(self.dim, 1);
        (self.maps[g].linear[0], self.maps[g].offset[0])
    }

    pub fn act(&self, g: usize, x: &TorusPoint) -> Result<TorusPoint> {
        let m = self.map(g)?;
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point of dimension {} for a {}-dimensional action",
                x.dim(),
                self.dim
            )));
        }
        Ok(TorusPoint::new(m.apply(x.coords())))
    }

    /// `(x, ξ) ↦ (A x + b, A ξ)`; for orthogonal `A` the inverse transpose
    /// is `A` itself.
    pub fn cotangent_lift(&self, g: usize, nu: &CotangentPoint) -> Result<CotangentPoint> {
        let m = self.map(g)?;
        if nu.dim() != self.dim {
            return Err(Error::DimensionMismatch("cotangent point dimension".into()));
        }
        Ok(CotangentPoint::new(
            m.apply(&nu.x),
            m.apply_linear_f(&nu.xi),
        ))
    }

    /// Elements fixing `x` to within `tol` in the torus metric.
    pub fn isotropy(&self, x: &TorusPoint, tol: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for g in self.group.elements() {
            if self.act(g, x)?.distance(x) <= tol {
                out.push(g);
            }
        }
        Ok(out)
    }

    pub fn is_regular(&self, x: &TorusPoint) -> Result<bool> {
        Ok(self.isotropy(x, ISOTROPY_TOL)?.len() == 1)
    }

    /// `(U_g u)(x) = u(g⁻¹x)` on the truncated window, tensored with `I_d`.
    /// On exponentials `U_g e_m = e^{-i⟨A_g m, b_g⟩} e_{A_g m}`.
    pub fn mode_action(&self, g: usize, trunc: Truncation) -> Result<OperatorMatrix> {
        let m = self.map(g)?;
        if trunc.dim != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "{}-dimensional window for a {}-dimensional action",
                trunc.dim, self.dim
            )));
        }
        let modes = trunc.mode_count();
        let mut u = CMat::zeros((modes, modes));
        for col in 0..modes {
            let mode = trunc.mode_at(col);
            let image = m.apply_linear_i(&mode);
            let pairing: f64 = image
                .iter()
                .zip(&m.offset)
                .map(|(k, b)| *k as f64 * b)
                .sum();
            let row = trunc
                .mode_index(&image)
                .expect("signed permutations preserve the window");
            u[[row, col]] = C64::from_polar(1.0, -pairing);
        }
        let data = if trunc.bundle == 1 {
            u
        } else {
            kron(&u, &CMat::eye(trunc.bundle))
        };
        OperatorMatrix::new(trunc, data)
    }
}

/// Names accepted by [`AffineIsometryAction::by_name`].
pub const BUILTIN_ACTIONS: &[(&str, &str)] = &[
    ("trivial", "trivial group on the circle"),
    ("Z<q>", "cyclic rotation by 2π/q on the circle, e.g. Z4"),
    ("Z2-reflection", "θ ↦ -θ on the circle"),
    ("D<q>", "dihedral group of order 2q on the circle, e.g. D2"),
    ("T2-trivial", "trivial group on the 2-torus"),
    ("T2-quarter-turn", "Z4 by (x, y) ↦ (-y, x) on the 2-torus"),
    ("T2-swap", "Z2 by (x, y) ↦ (y, x) on the 2-torus"),
    ("T2-half-turn", "Z2 by x ↦ -x on the 2-torus"),
    ("T2-shift", "free Z2 by translation (π, 0) on the 2-torus"),
];

/// Unitary representation `ρ: K → U(d)` used to twist the invariant
/// projection on bundle-valued functions.
#[derive(Clone, Debug)]
pub struct UnitaryRep {
    matrices: Vec<CMat>,
}

impl UnitaryRep {
    pub fn trivial(order: usize, d: usize) -> Self {
        UnitaryRep {
            matrices: vec![CMat::eye(d); order],
        }
    }

    pub fn new(group: &FiniteGroup, matrices: Vec<CMat>) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(Error::DimensionMismatch(
                "one matrix per group element".into(),
            ));
        }
        let d = matrices[0].nrows();
        for (g, m) in matrices.iter().enumerate() {
            if m.dim() != (d, d) || max_abs_diff(&dagger(m).dot(m), &CMat::eye(d)) > 1e-12 {
                return Err(Error::InvalidAction(format!(
                    "rho({g}) is not a {d}x{d} unitary"
                )));
            }
        }
        for a in group.elements() {
            for b in group.elements() {
                let lhs = matrices[a].dot(&matrices[b]);
                if max_abs_diff(&lhs, &matrices[group.mul(a, b)]) > 1e-12 {
                    return Err(Error::InvalidAction("rho is not a homomorphism".into()));
                }
            }
        }
        Ok(UnitaryRep { matrices })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrix(&self, g: usize) -> &CMat {
        &self.matrices[g]
    }
}

/// Circle action `x ↦ x + s·w` with integer weight `w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircleAction {
    weight: Vec<i64>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl CircleAction {
    /// Requires a nonzero weight with coprime entries (effective action).
    pub fn new(weight: Vec<i64>) -> Result<Self> {
        if weight.is_empty() || weight.len() > 2 {
            return Err(Error::InvalidAction(
                "circle weight must have 1 or 2 entries".into(),
            ));
        }
        if weight.iter().all(|&w| w == 0) {
            return Err(Error::InvalidAction("circle weight must be nonzero".into()));
        }
        if weight.iter().fold(0, |g, &w| gcd(g, w)) != 1 {
            return Err(Error::InvalidAction(format!(
                "circle weight {weight:?} is not primitive (action not effective)"
            )));
        }
        Ok(CircleAction { weight })
    }

    pub fn weight(&self) -> &[i64] {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Infinitesimal generator `v_M(x) = w`.
    pub fn generator(&self) -> Vec<f64> {
        self.weight.iter().map(|&w| w as f64).collect()
    }

    pub fn act(&self, s: f64, x: &TorusPoint) -> TorusPoint {
        TorusPoint::new(
            x.coords()
                .iter()
                .zip(&self.weight)
                .map(|(xi, w)| xi + s * *w as f64)
                .collect(),
        )
    }

    /// Translations fix covectors.
    pub fn cotangent_lift(&self, s: f64, nu: &CotangentPoint) -> CotangentPoint {
        CotangentPoint::new(
            nu.x.iter()
                .zip(&self.weight)
                .map(|(xi, w)| xi + s * *w as f64)
                .collect(),
            nu.xi.clone(),
        )
    }
}
