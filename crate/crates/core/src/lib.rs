//! Sparse discovery of isotropic, incompressible hyperelastic models from
//! uniaxial tension, uniaxial compression, and simple shear data.
//!
//! The strain energy is drawn from a fixed catalog of twelve polyconvex terms
//! built on `[I1 - 3]`, `[I2 - 3]` and their squares, each passed through a
//! linear, exponential, or logarithmic activation. Two discovery routes share
//! the catalog:
//!
//! - exhaustive best-subset regression ([`select::best_subset_discover`]),
//!   fitting every term subset with a box-constrained Levenberg–Marquardt
//!   solver and ranking the per-size winners with an information criterion;
//! - a projected Adam trainer on the full catalog with an elastic-net penalty
//!   ([`select::nn_discover`]), followed by energy-based pruning.
//!
//! ```
//! use hyperfit_core::{energy::ClassicModel, stress::nominal_stress_shear};
//!
//! let model = ClassicModel::NeoHookean { mu: 1.0 }.to_spec().unwrap();
//! let p12 = nominal_stress_shear(&model, 0.3).unwrap();
//! assert!((p12 - 0.3).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod energy;
mod error;
pub mod fit;
pub mod kinematics;
pub mod select;
pub mod stress;

pub use data::{Dataset, Series, SyntheticSpec};
pub use energy::{Activation, ClassicModel, Invariant, ModelSpec, TermKind, TermParams};
pub use error::{Error, Result};
pub use fit::{AdamConfig, FitConfig, FitResult, ModeMetrics};
pub use kinematics::{DeformationState, LoadingMode};
pub use select::{DiscoveryResult, SelectionCriterion};
pub use stress::StressPrediction;
