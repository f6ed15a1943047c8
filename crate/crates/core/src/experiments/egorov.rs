use crate::error::Result;
use crate::heisenberg::transport_frame;
use crate::linalg::{frobenius, inverse, CMat, C64};
use crate::modes::OperatorMatrix;
use crate::quantization::{CompleteSymbolOrder1, HomogeneousSymbol};
use crate::symplectic_flows::CotangentPoint;
use crate::trigpoly::TrigPoly;

/// `θ_g = 2πg/Q` with the phases `e^{ijθ_g}` for `|j| ≤ 2N`.
pub(crate) struct ModeGrid {
    thetas: Vec<f64>,
    n: i64,
    phases: Vec<C64>,
}

impl ModeGrid {
    pub(crate) fn new(points: usize, n: usize) -> Self {
        let n = n as i64;
        let thetas: Vec<f64> = (0..points)
            .map(|g| std::f64::consts::TAU * g as f64 / points as f64)
            .collect();
        let mut phases = Vec::with_capacity(points * (4 * n as usize + 1));
        for &t in &thetas {
            for j in -2 * n..=2 * n {
                phases.push(C64::from_polar(1.0, j as f64 * t));
            }
        }
        ModeGrid { thetas, n, phases }
    }

    pub(crate) fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// `b(θ_g; m) = Σ_{m'} B_{m',m} e^{i(m'−m)θ_g}`.
    pub(crate) fn reconstruct(&self, b: &OperatorMatrix, m: i64) -> Vec<CMat> {
        let d = b.trunc.bundle;
        let n = self.n;
        let width = (4 * n + 1) as usize;
        let c0 = ((m + n) as usize) * d;
        (0..self.thetas.len())
            .map(|g| {
                let row = &self.phases[g * width..(g + 1) * width];
                let mut out = CMat::zeros((d, d));
                for mp in -n..=n {
                    let ph = row[(mp - m + 2 * n) as usize];
                    let r0 = ((mp + n) as usize) * d;
                    for i in 0..d {
                        for k in 0..d {
                            out[[i, k]] += b.data[[r0 + i, c0 + k]] * ph;
                        }
                    }
                }
                out
            })
            .collect()
    }

    pub(crate) fn values(&self, p: &TrigPoly) -> Vec<CMat> {
        self.thetas.iter().map(|&t| p.eval(t)).collect()
    }
}

pub(crate) fn max_frobenius_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| frobenius(&(x - y)))
        .fold(0.0, f64::max)
}

struct Frame {
    w: CMat,
    w_inv: CMat,
    theta: f64,
    /// `|ξ(t)|` for `|ξ(0)| = 1`.
    stretch: f64,
}

/// Transport frames on the grid for both cone halves at `|ξ| = 1`. The
/// base flow and the fiber equation do not depend on `|ξ|`, so the frame at
/// mode `m` is the same with `ξ(t)` scaled by `|m|`.
pub(crate) struct FrameSet {
    plus: Vec<Frame>,
    minus: Vec<Frame>,
}

impl FrameSet {
    pub(crate) fn new(p: &CompleteSymbolOrder1, thetas: &[f64], t: f64, dt: f64) -> Result<Self> {
        let build = |xi: f64| -> Result<Vec<Frame>> {
            thetas
                .iter()
                .map(|&th| {
                    let f = transport_frame(p, &CotangentPoint::new(vec![th], vec![xi]), t, dt)?;
                    Ok(Frame {
                        w_inv: inverse(&f.w)?,
                        w: f.w,
                        theta: f.end.x[0],
                        stretch: f.end.xi[0].abs(),
                    })
                })
                .collect()
        };
        Ok(FrameSet {
            plus: build(1.0)?,
            minus: build(-1.0)?,
        })
    }

    /// `W a(f_t(θ_g, m)) W⁻¹` for `m ≠ 0`.
    pub(crate) fn transported(&self, a: &HomogeneousSymbol, m: i64) -> Vec<CMat> {
        let (frames, s) = if m > 0 {
            (&self.plus, 1.0)
        } else {
            (&self.minus, -1.0)
        };
        let scale = m.unsigned_abs() as f64;
        frames
            .iter()
            .map(|f| {
                f.w.dot(&a.eval(f.theta, s * scale * f.stretch))
                    .dot(&f.w_inv)
            })
            .collect()
    }
}
