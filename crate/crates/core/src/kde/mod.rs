//! Kernels, bandwidths, the Parzen–Rosenblatt estimator and its exact
//! expectation under Gaussian innovations.

mod bandwidth;
mod kernel;
mod oracle;
pub mod quad;

pub use bandwidth::BandwidthSchedule;
pub use kernel::KernelModel;
pub use oracle::{density_oracle, DensityOracle};

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::special::NeumaierSum;

/// Absolute tolerance of the centering integrals.
pub const QUAD_TOL: f64 = 1e-10;

/// `f_n(x) = (n^d b)^{-1} Σ_i K((x - X_i)/b)`.
pub fn kde_estimate(field: &LatticeField, x: f64, b: f64, kernel: KernelModel) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::arg("b", format!("bandwidth must be positive, got {b}")));
    }
    if field.values.is_empty() {
        return Err(Error::EmptyInput("field"));
    }
    Ok(kernel_sum(&field.values, x, b, kernel) / (field.values.len() as f64 * b))
}

/// `Σ_i K((x - v_i)/b)` in index order.
pub fn kernel_sum(values: &[f64], x: f64, b: f64, kernel: KernelModel) -> f64 {
    let inv = 1.0 / b;
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(kernel.eval((x - v) * inv));
    }
    acc.value()
}

fn smoothed(density: impl Fn(f64) -> f64, kernel: KernelModel, b: f64, x: f64, power: i32) -> f64 {
    quad::integrate_pieces(
        |u| kernel.eval(u).powi(power) * density(x - b * u),
        kernel.integration_breaks(),
        QUAD_TOL,
    )
}

/// `E f_n(x) = ∫K(u) p(x - bu) du`.
pub fn expected_fn(oracle: &DensityOracle, kernel: KernelModel, b: f64, x: f64) -> Result<f64> {
    oracle.require_exact()?;
    check_b(b)?;
    Ok(smoothed(|y| oracle.p(y), kernel, b, x, 1))
}

/// Same with the truncated marginal `p_m`.
pub fn expected_fn_truncated(oracle: &DensityOracle, kernel: KernelModel, b: f64, x: f64) -> Result<f64> {
    oracle.require_exact()?;
    check_b(b)?;
    Ok(smoothed(|y| oracle.p_m(y), kernel, b, x, 1))
}

/// `b⁻¹ Var K((x - X_0)/b) = ∫K²(u) p(x - bu) du - b (E f_n(x))²`,
/// the exact variance of the normalized statistic for an i.i.d. field.
pub fn single_site_variance(oracle: &DensityOracle, kernel: KernelModel, b: f64, x: f64) -> Result<f64> {
    oracle.require_exact()?;
    check_b(b)?;
    let second = smoothed(|y| oracle.p(y), kernel, b, x, 2);
    let mean = smoothed(|y| oracle.p(y), kernel, b, x, 1);
    Ok(second - b * mean * mean)
}

/// `σ_x² = p(x) ∫K²`.
pub fn asymptotic_variance(px: f64, kernel: KernelModel) -> Result<f64> {
    if !(px >= 0.0) {
        return Err(Error::arg("px", format!("density value must be nonnegative, got {px}")));
    }
    Ok(px * kernel.roughness())
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::arg("b", format!("bandwidth must be positive, got {b}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;
    use crate::field::{FieldComponent, FieldProvenance};
    use crate::innovations::{InnovationModel, SeedSpec};
    use crate::special::normal_pdf;
    use approx::assert_abs_diff_eq;

    fn field(values: Vec<f64>) -> LatticeField {
        let n = values.len();
        LatticeField::new(
            1,
            n,
            values,
            FieldProvenance {
                coefficient_model_id: "test".into(),
                truncation_radius: 1,
                m: 1,
                component: FieldComponent::Full,
                innovation_model_id: "gaussian".into(),
                seed: SeedSpec::default(),
            },
        )
        .unwrap()
    }

    #[test]
    fn hand_examples() {
        assert_eq!(kde_estimate(&field(vec![0.0]), 0.0, 1.0, KernelModel::Epanechnikov).unwrap(), 0.75);
        let v = kde_estimate(&field(vec![-1.0, 1.0]), 0.0, 1.0, KernelModel::Gaussian).unwrap();
        assert_abs_diff_eq!(v, 0.241_970_724_519_143_37, epsilon = 1e-15);
        assert!(kde_estimate(&field(vec![0.0]), 0.0, 0.0, KernelModel::Gaussian).is_err());
    }

    #[test]
    fn estimate_integrates_to_one() {
        let f = field(vec![-0.3, 0.1, 0.7, 2.0]);
        for k in [KernelModel::Epanechnikov, KernelModel::Triangular, KernelModel::Gaussian] {
            let mut breaks: Vec<f64> = vec![-8.0];
            for &v in &f.values {
                breaks.extend([v - 0.5, v, v + 0.5]);
            }
            breaks.push(9.0);
            breaks.sort_by(f64::total_cmp);
            let mass = quad::integrate_pieces(|x| kde_estimate(&f, x, 0.5, k).unwrap(), &breaks, 1e-12);
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn gaussian_convolution_identity() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let o = density_oracle(&model, &InnovationModel::Gaussian, 2, &[0]).unwrap();
        for (b, x) in [(0.3, 0.0), (0.05, 1.2), (1.0, -0.5)] {
            let e = expected_fn(&o, KernelModel::Gaussian, b, x).unwrap();
            assert_abs_diff_eq!(e, normal_pdf(x, 4.0 / 3.0 + b * b), epsilon = 1e-10);
        }
    }

    #[test]
    fn lipschitz_bias_and_symmetry() {
        let o = density_oracle(&CoefficientModel::identity(1).unwrap(), &InnovationModel::Gaussian, 1, &[0]).unwrap();
        // c_0 for the standard normal density is φ(1)
        let c0 = normal_pdf(1.0, 1.0);
        let k = KernelModel::Epanechnikov;
        for b in [0.4, 0.2, 0.1, 0.05] {
            let e = expected_fn(&o, k, b, 0.3).unwrap();
            assert!((e - o.p(0.3)).abs() <= c0 * b * k.abs_first_moment());
        }
        let at0 = expected_fn(&o, k, 0.3, 0.0).unwrap();
        for x in [-1.0, -0.5, 0.5, 1.0] {
            assert!(expected_fn(&o, k, 0.3, x).unwrap() < at0);
        }
    }

    #[test]
    fn variance_targets() {
        assert_eq!(asymptotic_variance(0.0, KernelModel::Gaussian).unwrap(), 0.0);
        let s = asymptotic_variance(normal_pdf(0.0, 1.0), KernelModel::Epanechnikov).unwrap();
        assert_abs_diff_eq!(s, 0.23937, epsilon = 1e-5);
        assert_eq!(asymptotic_variance(2.0 * 0.3, KernelModel::Triangular).unwrap(), 2.0 * asymptotic_variance(0.3, KernelModel::Triangular).unwrap());
        let o = density_oracle(&CoefficientModel::identity(1).unwrap(), &InnovationModel::Gaussian, 1, &[0]).unwrap();
        let v = single_site_variance(&o, KernelModel::Epanechnikov, 1e-4, 0.0).unwrap();
        assert_abs_diff_eq!(v, s - 1e-4 * normal_pdf(0.0, 1.0).powi(2), epsilon = 1e-8);
    }

    #[test]
    fn refuses_diagnostic_oracle() {
        let o = density_oracle(&CoefficientModel::identity(1).unwrap(), &InnovationModel::Uniform, 1, &[0]).unwrap();
        assert!(expected_fn(&o, KernelModel::Epanechnikov, 0.1, 0.0).is_err());
    }
}
