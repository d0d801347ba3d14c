use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::innovations::{InnovationModel, SeedSpec};
use crate::lattice::for_each_in_box;
use crate::special::{normal_pdf, sup_normal_density_gap};

/// Precision of the variance and covariance sums behind the oracle.
const ORACLE_TOL: f64 = 1e-12;
/// Monte Carlo draws behind a diagnostic-only oracle.
const DIAGNOSTIC_SAMPLES: usize = 20_000;
/// Cap on the coefficient box used to simulate `X_0` for diagnostics.
const DIAGNOSTIC_MAX_TERMS: usize = 4096;

/// Marginal, truncated and bivariate densities of the field.
///
/// Exact (normal) for Gaussian innovations; otherwise a Monte Carlo
/// stand-in with error bars that is only fit for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOracle {
    pub exact: bool,
    pub innovation_model_id: String,
    pub m: usize,
    pub lag: Vec<i64>,
    /// `v = Σ_{k⪰0} a_k²`.
    pub variance: f64,
    pub variance_error: f64,
    /// `v_m = Σ_{k∈[0,m)^d} a_k²`.
    pub truncated_variance: f64,
    /// `Cov(X_0, X_lag) = Σ_k a_k a_{k+lag}`.
    pub lag_covariance: f64,
    /// Same for the truncated field.
    pub truncated_lag_covariance: f64,
    pub sup_p: f64,
    pub sup_p_m: f64,
    /// `sup p_lag = 1 / (2π √det Σ_lag)`; absent for diagnostic oracles.
    pub sup_p_lag: Option<f64>,
    pub sup_p_lag_m: Option<f64>,
    /// `sup_x |p_m(x) - p(x)|`.
    pub sup_gap: f64,
    #[serde(skip)]
    samples: Option<DiagnosticSamples>,
}

#[derive(Clone, Debug, PartialEq)]
struct DiagnosticSamples {
    full: Vec<f64>,
    truncated: Vec<f64>,
    h_full: f64,
    h_trunc: f64,
}

impl DensityOracle {
    /// `p(x)`.
    pub fn p(&self, x: f64) -> f64 {
        self.p_with_error(x).0
    }

    /// `p_m(x)`.
    pub fn p_m(&self, x: f64) -> f64 {
        self.p_m_with_error(x).0
    }

    pub fn p_with_error(&self, x: f64) -> (f64, f64) {
        match &self.samples {
            None => (normal_pdf(x, self.variance), 0.0),
            Some(s) => smoothed_density(&s.full, s.h_full, x),
        }
    }

    pub fn p_m_with_error(&self, x: f64) -> (f64, f64) {
        match &self.samples {
            None => (normal_pdf(x, self.truncated_variance), 0.0),
            Some(s) => smoothed_density(&s.truncated, s.h_trunc, x),
        }
    }

    pub fn require_exact(&self) -> Result<()> {
        if self.exact {
            Ok(())
        } else {
            Err(Error::OracleUnavailable(format!(
                "{} innovations have no exact density oracle; use pooled centering",
                self.innovation_model_id
            )))
        }
    }
}

fn smoothed_density(samples: &[f64], h: f64, x: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let c = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let p = samples
        .iter()
        .map(|&s| {
            let u = (x - s) / h;
            c * (-0.5 * u * u).exp()
        })
        .sum::<f64>()
        / n;
    // Gaussian kernel roughness 1/(2√π)
    let se = (p * 0.5 / std::f64::consts::PI.sqrt() / (n * h)).sqrt();
    (p, se)
}

/// Covariance of the `[0,m)^d`-truncated field at `lag`.
fn truncated_lag_covariance(model: &CoefficientModel, lag: &[i64], m: usize) -> f64 {
    let d = model.dimension();
    let mut acc = 0.0;
    let mut j = vec![0usize; d];
    for_each_in_box(&vec![m; d], |k| {
        for t in 0..d {
            let v = k[t] as i64 + lag[t];
            if v < 0 || v >= m as i64 {
                return;
            }
            j[t] = v as usize;
        }
        acc += model.coefficient(k) * model.coefficient(&j);
    });
    acc
}

fn bivariate_sup(v: f64, c: f64) -> Option<f64> {
    let det = v * v - c * c;
    (det > 0.0).then(|| 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()))
}

/// Density oracle for `X_0`, `X_{0,m}` and the pair `(X_0, X_lag)`.
pub fn density_oracle(
    model: &CoefficientModel,
    innovations: &InnovationModel,
    m: usize,
    lag: &[i64],
) -> Result<DensityOracle> {
    innovations.validate()?;
    if m < 1 {
        return Err(Error::arg("m", "must be at least 1"));
    }
    if lag.len() != model.dimension() {
        return Err(Error::ShapeMismatch("lag dimension differs from the model".into()));
    }
    let (variance, variance_error) = model.autocovariance(&vec![0; model.dimension()], ORACLE_TOL);
    let truncated_variance = model.sum_squares_box(m);
    if !(truncated_variance > 0.0) {
        return Err(Error::InvalidModel(
            "truncated field is degenerate (v_m = 0); no density exists".into(),
        ));
    }
    let lag_covariance = model.autocovariance(lag, ORACLE_TOL).0;
    let truncated_lag_covariance = truncated_lag_covariance(model, lag, m);
    let zero_lag = lag.iter().all(|&l| l == 0);

    if innovations.is_gaussian() {
        return Ok(DensityOracle {
            exact: true,
            innovation_model_id: innovations.id(),
            m,
            lag: lag.to_vec(),
            variance,
            variance_error,
            truncated_variance,
            lag_covariance,
            truncated_lag_covariance,
            sup_p: normal_pdf(0.0, variance),
            sup_p_m: normal_pdf(0.0, truncated_variance),
            sup_p_lag: if zero_lag { None } else { bivariate_sup(variance, lag_covariance) },
            sup_p_lag_m: if zero_lag {
                None
            } else {
                bivariate_sup(truncated_variance, truncated_lag_covariance)
            },
            sup_gap: sup_normal_density_gap(truncated_variance, variance),
            samples: None,
        });
    }

    let d = model.dimension();
    let reach = model
        .tail_radius(1e-4)
        .min((DIAGNOSTIC_MAX_TERMS as f64).powf(1.0 / d as f64) as usize)
        .max(m.min((DIAGNOSTIC_MAX_TERMS as f64).powf(1.0 / d as f64) as usize))
        .max(1);
    let coeffs = model.coefficient_cube(reach);
    let inside: Vec<bool> = {
        let mut v = Vec::with_capacity(coeffs.len());
        for_each_in_box(&vec![reach; d], |k| v.push(k.iter().all(|&c| c < m)));
        v
    };
    let mut rng = SeedSpec::new(0x6f72_6163_6c65, u64::MAX, m as u64).rng();
    let mut eps = vec![0.0; coeffs.len()];
    let mut full = Vec::with_capacity(DIAGNOSTIC_SAMPLES);
    let mut truncated = Vec::with_capacity(DIAGNOSTIC_SAMPLES);
    for _ in 0..DIAGNOSTIC_SAMPLES {
        innovations.fill(&mut rng, &mut eps);
        let mut x = 0.0;
        let mut xm = 0.0;
        for ((a, e), &ins) in coeffs.iter().zip(&eps).zip(&inside) {
            x += a * e;
            if ins {
                xm += a * e;
            }
        }
        full.push(x);
        truncated.push(xm);
    }
    let scale = DIAGNOSTIC_SAMPLES as f64;
    let h_full = 1.06 * variance.sqrt() * scale.powf(-0.2);
    let h_trunc = 1.06 * truncated_variance.sqrt() * scale.powf(-0.2);
    let samples = DiagnosticSamples {
        full,
        truncated,
        h_full,
        h_trunc,
    };
    let grid_sup = |data: &[f64], h: f64, sd: f64| -> f64 {
        (-40..=40)
            .map(|i| smoothed_density(data, h, i as f64 * 0.1 * sd).0)
            .fold(0.0, f64::max)
    };
    let sup_p = grid_sup(&samples.full, h_full, variance.sqrt());
    let sup_p_m = grid_sup(&samples.truncated, h_trunc, truncated_variance.sqrt());
    let sup_gap = (-40..=40)
        .map(|i| {
            let x = i as f64 * 0.1 * variance.sqrt();
            (smoothed_density(&samples.full, h_full, x).0
                - smoothed_density(&samples.truncated, h_trunc, x).0)
                .abs()
        })
        .fold(0.0, f64::max);
    Ok(DensityOracle {
        exact: false,
        innovation_model_id: innovations.id(),
        m,
        lag: lag.to_vec(),
        variance,
        variance_error,
        truncated_variance,
        lag_covariance,
        truncated_lag_covariance,
        sup_p,
        sup_p_m,
        sup_p_lag: None,
        sup_p_lag_m: None,
        sup_gap,
        samples: Some(samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_model() {
        let model = CoefficientModel::identity(2).unwrap();
        for m in [1, 3] {
            let o = density_oracle(&model, &InnovationModel::Gaussian, m, &[1, 0]).unwrap();
            assert_eq!(o.variance, 1.0);
            assert_eq!(o.truncated_variance, 1.0);
            assert_abs_diff_eq!(o.sup_p, 0.398_942_280_401_432_7, epsilon = 1e-15);
            assert_eq!(o.sup_gap, 0.0);
        }
    }

    #[test]
    fn geometric_half() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let o = density_oracle(&model, &InnovationModel::Gaussian, 1, &[1]).unwrap();
        assert_abs_diff_eq!(o.variance, 4.0 / 3.0, epsilon = 1e-14);
        assert_eq!(o.truncated_variance, 1.0);
        // det Σ_1 = 16/9 - 4/9
        assert_abs_diff_eq!(o.sup_p_lag.unwrap(), 1.0 / (2.0 * std::f64::consts::PI * (4.0f64 / 3.0).sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!(o.sup_p_lag.unwrap(), 0.13783, epsilon = 1e-5);
        // grid + refinement oracle for the sup gap
        let mut best = 0.0f64;
        let mut x = 0.0;
        while x < 6.0 {
            best = best.max((normal_pdf(x, 1.0) - normal_pdf(x, 4.0 / 3.0)).abs());
            x += 1e-5;
        }
        assert_abs_diff_eq!(o.sup_gap, best, epsilon = 1e-10);
        let o2 = density_oracle(&model, &InnovationModel::Gaussian, 2, &[0]).unwrap();
        assert_abs_diff_eq!(o2.p_m(0.0), 0.356_824_823_230_554_3, epsilon = 1e-12);
        assert_abs_diff_eq!(o2.p(0.0), 0.345_494_149_471_335_7, epsilon = 1e-12);
    }

    #[test]
    fn truncated_variance_increases_to_full() {
        let model = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
        let mut prev = 0.0;
        for m in 1..8 {
            let o = density_oracle(&model, &InnovationModel::Gaussian, m, &[0, 0]).unwrap();
            assert!(o.truncated_variance > prev && o.truncated_variance <= o.variance);
            prev = o.truncated_variance;
        }
    }

    #[test]
    fn diagnostic_oracle_for_uniform() {
        let model = CoefficientModel::identity(1).unwrap();
        let o = density_oracle(&model, &InnovationModel::Uniform, 1, &[0]).unwrap();
        assert!(!o.exact);
        assert!(o.require_exact().is_err());
        let (p, se) = o.p_with_error(0.0);
        assert!((p - 0.288_675).abs() < 0.02 + 4.0 * se, "{p} ± {se}");
    }
}
