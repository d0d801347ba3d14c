//! Kernel density estimation for stationary linear random fields on
//! `Z^d`: coefficient conditions, coupled field simulation, and Monte
//! Carlo checks of the central limit theorem.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod coefficients;
pub mod error;
pub mod field;
pub mod innovations;
pub mod kde;
pub mod lab;
pub mod lattice;
pub mod report;
pub mod special;

pub use coefficients::{CoefficientModel, ConditionReport, Family, Verdict};
pub use error::{Error, Result};
pub use field::{ConvMethod, CoupledFields, LatticeField, TruncationPlan, TruncationPolicy};
pub use innovations::{InnovationModel, SeedSpec};
pub use kde::{BandwidthSchedule, KernelModel};
pub use lab::ExperimentConfig;
