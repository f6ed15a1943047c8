//! Classical and quantum dynamics on flat-torus orbifold quotients `T^n / K`.
//!
//! The crate builds truncated Fourier models of first-order operators on the
//! circle, evolves observables in the Heisenberg picture and compares the
//! result with classical transport of symbols along the bicharacteristic
//! flow. The finite crossed product `C(M) ⋊ K` and its symbol algebra are
//! computed at the level of exact trigonometric-polynomial coefficients.

pub mod crossed_product;
pub mod error;
pub mod experiments;
pub mod group_actions;
pub mod heisenberg;
pub mod linalg;
pub mod modes;
pub mod quantization;
pub mod symplectic_flows;
pub mod trigpoly;

pub use error::{Error, Result};
pub use group_actions::{AffineIsometryAction, AffineMap, CircleAction, FiniteGroup, TorusPoint};
pub use modes::{OperatorMatrix, Truncation};
pub use symplectic_flows::{CotangentPoint, FlowConfig, HamiltonianSpec};
pub use trigpoly::TrigPoly;
