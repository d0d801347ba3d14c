//! Fixtures shared by the benchmarks.

use fieldkde_core::innovations::{innovation_stream, InnovationModel, SeedSpec};
use fieldkde_core::CoefficientModel;

/// Gaussian innovations on a cube of `side^dim` sites.
pub fn innovations(dim: usize, side: usize) -> Vec<f64> {
    innovation_stream(&InnovationModel::Gaussian, SeedSpec::new(7, 0, 0), side.pow(dim as u32))
        .expect("positive count")
}

/// Power-decay coefficients `(1 + |i|_∞)^{-q}` on `[0, radius)^dim`.
pub fn power_coefficients(dim: usize, q: f64, radius: usize) -> Vec<f64> {
    CoefficientModel::power_decay(dim, q, 1.0)
        .expect("valid model")
        .coefficient_cube(radius)
}
