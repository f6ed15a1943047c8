//! Truncated Fourier mode windows and the dense operator matrices built on
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dagger, hermitian_defect, max_abs, CMat, C64};

/// Symmetric mode window `{-N..=N}^n` tensored with a `d`-dimensional fiber.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub dim: usize,
    pub cutoff: usize,
    pub bundle: usize,
}

/// Largest window accepted on the 2-torus.
pub const MAX_TORUS_CUTOFF: usize = 32;
/// Largest window accepted on the circle.
pub const MAX_CIRCLE_CUTOFF: usize = 4096;
/// Largest fiber rank.
pub const MAX_BUNDLE_RANK: usize = 64;

impl Truncation {
    pub fn new(dim: usize, cutoff: usize, bundle: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::DimensionMismatch(format!(
                "torus dimension {dim} not in {{1, 2}}"
            )));
        }
        if cutoff == 0 || bundle == 0 {
            return Err(Error::DimensionMismatch(
                "cutoff and bundle rank must be positive".into(),
            ));
        }
        if bundle > MAX_BUNDLE_RANK {
            return Err(Error::DimensionMismatch(format!(
                "bundle rank {bundle} exceeds {MAX_BUNDLE_RANK}"
            )));
        }
        if dim == 1 && cutoff > MAX_CIRCLE_CUTOFF {
            return Err(Error::DimensionMismatch(format!(
                "circle windows are limited to N <= {MAX_CIRCLE_CUTOFF}"
            )));
        }
        if dim == 2 && cutoff > MAX_TORUS_CUTOFF {
            return Err(Error::DimensionMismatch(format!(
                "2-torus windows are limited to N <= {MAX_TORUS_CUTOFF}"
            )));
        }
        Ok(Truncation {
            dim,
            cutoff,
            bundle,
        })
    }

    pub fn circle(cutoff: usize) -> Self {
        Truncation {
            dim: 1,
            cutoff,
            bundle: 1,
        }
    }

    pub fn circle_bundle(cutoff: usize, bundle: usize) -> Self {
        Truncation {
            dim: 1,
            cutoff,
            bundle,
        }
    }

    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn mode_count(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    /// Matrix dimension `(2N+1)^n · d`.
    pub fn matrix_dim(&self) -> usize {
        self.mode_count() * self.bundle
    }

    pub fn contains(&self, mode: &[i64]) -> bool {
        mode.len() == self.dim
            && mode
                .iter()
                .all(|m| m.unsigned_abs() as usize <= self.cutoff)
    }

    /// Position of a mode in the row-major window ordering.
    pub fn mode_index(&self, mode: &[i64]) -> Option<usize> {
        if !self.contains(mode) {
            return None;
        }
        let n = self.cutoff as i64;
        let side = self.side();
        Some(
            mode.iter()
                .fold(0usize, |acc, &m| acc * side + (m + n) as usize),
        )
    }

    pub fn mode_at(&self, index: usize) -> Vec<i64> {
        let side = self.side();
        let n = self.cutoff as i64;
        let mut rest = index;
        let mut out = vec![0; self.dim];
        for slot in out.iter_mut().rev() {
            *slot = (rest % side) as i64 - n;
            rest /= side;
        }
        out
    }

    /// Row/column of `(mode, fiber index)`.
    pub fn index(&self, mode: &[i64], fiber: usize) -> Option<usize> {
        self.mode_index(mode).map(|k| k * self.bundle + fiber)
    }

    /// Circle shortcut for [`Truncation::index`].
    pub fn index1(&self, m: i64, fiber: usize) -> Option<usize> {
        if self.dim != 1 || m.unsigned_abs() as usize > self.cutoff {
            return None;
        }
        Some((m + self.cutoff as i64) as usize * self.bundle + fiber)
    }

    pub fn modes(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.mode_count()).map(move |k| self.mode_at(k))
    }
}

/// Dense complex matrix over `(mode, fiber)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub trunc: Truncation,
    pub data: CMat,
    /// Set when the matrix was replaced by its Hermitian part `(B + B*)/2`.
    pub hermitized: bool,
}

/// Default Hermitian tolerance, relative to `max(1, max |B_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

impl OperatorMatrix {
    pub fn new(trunc: Truncation, data: CMat) -> Result<Self> {
        let n = trunc.matrix_dim();
        if data.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {:?}, truncation needs {n}x{n}",
                data.dim()
            )));
        }
        Ok(OperatorMatrix {
            trunc,
            data,
            hermitized: false,
        })
    }

    pub fn zeros(trunc: Truncation) -> Self {
        let n = trunc.matrix_dim();
        OperatorMatrix {
            trunc,
            data: CMat::zeros((n, n)),
            hermitized: false,
        }
    }

    pub fn identity(trunc: Truncation) -> Self {
        let n = trunc.matrix_dim();
        OperatorMatrix {
            trunc,
            data: CMat::eye(n),
            hermitized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix {
            trunc: self.trunc,
            data: dagger(&self.data),
            hermitized: self.hermitized,
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.data)
    }

    /// Hermitian to [`HERMITIAN_TOL`] relative to the largest entry.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL * max_abs(&self.data).max(1.0)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                defect: self.hermitian_defect(),
            })
        }
    }

    fn check_same(&self, other: &OperatorMatrix) -> Result<()> {
        if self.trunc != other.trunc {
            return Err(Error::DimensionMismatch(format!(
                "truncations differ: {:?} vs {:?}",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same(other)?;
        Ok(OperatorMatrix {
            trunc: self.trunc,
            data: self.data.dot(&other.data),
            hermitized: false,
        })
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same(other)?;
        Ok(OperatorMatrix {
            trunc: self.trunc,
            data: &self.data + &other.data,
            hermitized: false,
        })
    }

    pub fn scale(&self, s: C64) -> OperatorMatrix {
        OperatorMatrix {
            trunc: self.trunc,
            data: self.data.mapv(|z| z * s),
            hermitized: false,
        }
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        self.check_same(other)?;
        Ok(crate::linalg::max_abs_diff(&self.data, &other.data))
    }

    /// `max |[A, B]_ij|`.
    pub fn commutator_norm(&self, other: &OperatorMatrix) -> Result<f64> {
        self.check_same(other)?;
        Ok(max_abs(&crate::linalg::commutator(&self.data, &other.data)))
    }

    /// Maximum entry deviation restricted to rows and columns whose circle
    /// mode satisfies `|m| <= radius`.
    pub fn block_diff(&self, other: &OperatorMatrix, radius: usize) -> Result<f64> {
        self.check_same(other)?;
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&i| {
                let mode = self.trunc.mode_at(i / self.trunc.bundle);
                mode.iter().all(|m| m.unsigned_abs() as usize <= radius)
            })
            .collect();
        let mut d = 0.0_f64;
        for &i in &keep {
            for &j in &keep {
                d = d.max((self.data[[i, j]] - other.data[[i, j]]).norm());
            }
        }
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixExport::from(self)).expect("matrix export is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: MatrixExport = serde_json::from_str(text)?;
        export.into_operator()
    }
}

/// Offline-inspection JSON layout: shape plus a flat `[re, im, re, im, …]`
/// row-major array.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixExport {
    pub dimension: [usize; 2],
    pub truncation: Truncation,
    pub hermitized: bool,
    pub data: Vec<f64>,
}

impl From<&OperatorMatrix> for MatrixExport {
    fn from(m: &OperatorMatrix) -> Self {
        let mut data = Vec::with_capacity(2 * m.data.len());
        for z in m.data.iter() {
            data.push(z.re);
            data.push(z.im);
        }
        MatrixExport {
            dimension: [m.dim(), m.dim()],
            truncation: m.trunc,
            hermitized: m.hermitized,
            data,
        }
    }
}

impl MatrixExport {
    pub fn into_operator(self) -> Result<OperatorMatrix> {
        let trunc = Truncation::new(
            self.truncation.dim,
            self.truncation.cutoff,
            self.truncation.bundle,
        )?;
        let [r, c] = self.dimension;
        if r != c || r != trunc.matrix_dim() {
            return Err(Error::DimensionMismatch(format!(
                "dimension {r}x{c} does not match truncation ({})",
                trunc.matrix_dim()
            )));
        }
        let expected = r.checked_mul(c).and_then(|n| n.checked_mul(2));
        if expected != Some(self.data.len()) {
            return Err(Error::DimensionMismatch(format!(
                "flat array has {} reals, expected 2*{r}*{c}",
                self.data.len()
            )));
        }
        let values: Vec<C64> = self
            .data
            .chunks_exact(2)
            .map(|p| C64::new(p[0], p[1]))
            .collect();
        let data = CMat::from_shape_vec((r, c), values)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let mut m = OperatorMatrix::new(trunc, data)?;
        m.hermitized = self.hermitized;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_indexing_roundtrip_on_torus() {
        let t = Truncation::new(2, 3, 2).unwrap();
        assert_eq!(t.matrix_dim(), 49 * 2);
        for k in 0..t.mode_count() {
            assert_eq!(t.mode_index(&t.mode_at(k)), Some(k));
        }
        assert_eq!(t.mode_index(&[4, 0]), None);
    }

    #[test]
    fn torus_window_limit() {
        assert!(Truncation::new(2, 33, 1).is_err());
        assert!(Truncation::new(1, usize::MAX, 1).is_err());
        assert!(Truncation::new(1, 4, usize::MAX).is_err());
        assert!(Truncation::new(3, 2, 1).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = Truncation::circle(2);
        let mut m = OperatorMatrix::identity(t);
        m.data[[0, 3]] = C64::new(0.25, -1.5);
        let back = OperatorMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_wrong_length() {
        let text = r#"{"dimension":[3,3],"truncation":{"dim":1,"cutoff":1,"bundle":1},"hermitized":false,"data":[1.0]}"#;
        assert!(OperatorMatrix::from_json(text).is_err());
    }
}
