use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CoupledFields;
use crate::kde::KernelModel;
use crate::special::NeumaierSum;

/// Density-scale centering values `E f_n(x)` for the full and the
/// truncated field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteringValues {
    pub full: f64,
    pub truncated: f64,
}

/// Kernel sums of one replicate at one `x`: `Σ K((x-X_i)/b)`,
/// `Σ K((x-X_{i,m})/b)` and the site-wise difference `Σ (· - ·)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelSums {
    pub sites: usize,
    pub full: f64,
    pub truncated: f64,
    pub difference: f64,
    /// `Σ (K((x-X_i)/b) - K((x-X_{i,m})/b))²`.
    pub difference_sq: f64,
}

pub fn kernel_sums(fields: &CoupledFields, x: f64, b: f64, kernel: KernelModel) -> KernelSums {
    let inv = 1.0 / b;
    let mut full = NeumaierSum::new();
    let mut trunc = NeumaierSum::new();
    let mut diff = NeumaierSum::new();
    let mut diff_sq = NeumaierSum::new();
    for (&xf, &xt) in fields.full.values.iter().zip(&fields.truncated.values) {
        let kf = kernel.eval((x - xf) * inv);
        let kt = if xf == xt { kf } else { kernel.eval((x - xt) * inv) };
        full.add(kf);
        trunc.add(kt);
        diff.add(kf - kt);
        diff_sq.add((kf - kt) * (kf - kt));
    }
    KernelSums {
        sites: fields.full.values.len(),
        full: full.value(),
        truncated: trunc.value(),
        difference: diff.value(),
        difference_sq: diff_sq.value(),
    }
}

/// `T_n`, `S_n(ζ̄)/n^{d/2}` and `S_n(Z̄ - ζ̄)/n^{d/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub t_n: f64,
    pub t_zeta: f64,
    pub t_remainder: f64,
}

impl Decomposition {
    pub fn from_sums(sums: &KernelSums, b: f64, centering: &CenteringValues) -> Self {
        let s = (sums.sites as f64 * b).sqrt();
        Decomposition {
            t_n: sums.full / s - s * centering.full,
            t_zeta: sums.truncated / s - s * centering.truncated,
            t_remainder: sums.difference / s - s * (centering.full - centering.truncated),
        }
    }

    /// `|T_n - (T_zeta + T_remainder)|`.
    pub fn defect(&self) -> f64 {
        (self.t_n - (self.t_zeta + self.t_remainder)).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.t_n.is_finite() && self.t_zeta.is_finite() && self.t_remainder.is_finite()
    }
}

/// `T_n = (n^d b)^{1/2} (f_n(x) - E f_n(x))` split as
/// `S_n(ζ̄)/n^{d/2} + S_n(Z̄ - ζ̄)/n^{d/2}`.
pub fn normalized_statistic(
    fields: &CoupledFields,
    x: f64,
    kernel: KernelModel,
    b: f64,
    centering: &CenteringValues,
) -> Result<Decomposition> {
    if !(b > 0.0) {
        return Err(Error::arg("b", "bandwidth must be positive"));
    }
    Ok(Decomposition::from_sums(&kernel_sums(fields, x, b, kernel), b, centering))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;
    use crate::field::{generate_coupled_fields, ConvMethod, TruncationPlan, DEFAULT_MAX_LATTICE_BYTES};
    use crate::innovations::{InnovationModel, SeedSpec};

    fn fields(model: &CoefficientModel, m: usize, radius: usize) -> CoupledFields {
        let plan = TruncationPlan::fixed(model, radius).unwrap();
        generate_coupled_fields(
            model,
            &InnovationModel::Gaussian,
            64,
            m,
            &plan,
            SeedSpec::new(1, 2, 3),
            ConvMethod::Auto,
            DEFAULT_MAX_LATTICE_BYTES,
        )
        .unwrap()
    }

    #[test]
    fn identity_remainder_is_zero() {
        let f = fields(&CoefficientModel::identity(1).unwrap(), 1, 1);
        let c = CenteringValues { full: 0.3, truncated: 0.3 };
        let d = normalized_statistic(&f, 0.0, KernelModel::Epanechnikov, 0.4, &c).unwrap();
        assert_eq!(d.t_remainder, 0.0);
        assert_eq!(d.t_n, d.t_zeta);
    }

    #[test]
    fn decomposition_identity() {
        let f = fields(&CoefficientModel::geometric(1, 0.5).unwrap(), 2, 20);
        let c = CenteringValues { full: 0.33, truncated: 0.35 };
        for x in [-0.5, 0.0, 0.7] {
            let d = normalized_statistic(&f, x, KernelModel::Gaussian, 0.3, &c).unwrap();
            assert!(d.defect() <= 1e-12 * (1.0 + d.t_n.abs()));
            assert!(d.t_remainder != 0.0);
        }
    }
}
