use serde::{Deserialize, Serialize};

use super::LatticeField;
use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::lattice::{for_each_in_box, Cube};
use crate::special::NeumaierSum;

/// Autocovariance oracle precision.
const ORACLE_TOL: f64 = 1e-10;
/// Reach of the Bartlett sum for standard errors, per axis.
const BARTLETT_REACH: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagDiagnostic {
    pub lag: Vec<usize>,
    pub pairs: usize,
    pub sample: f64,
    pub oracle: f64,
    pub oracle_error: f64,
    /// Bartlett standard error under Gaussian innovations.
    #[serde(with = "crate::report::real")]
    pub std_error: f64,
    #[serde(with = "crate::report::real")]
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiagnostics {
    pub sites: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub lags: Vec<LagDiagnostic>,
}

/// Sample mean, variance, shape moments and autocovariances at `lags`,
/// with oracle values `Σ_k a_k a_{k+lag}` (unit-variance innovations).
pub fn field_moment_diagnostics(
    field: &LatticeField,
    model: &CoefficientModel,
    lags: &[Vec<usize>],
) -> Result<FieldDiagnostics> {
    let d = field.dimension;
    let n = field.side;
    if model.dimension() != d {
        return Err(Error::ShapeMismatch("model and field dimensions differ".into()));
    }
    for lag in lags {
        if lag.len() != d || lag.iter().any(|&l| l > n / 4) {
            return Err(Error::arg("lags", format!("lag {lag:?} must lie in [0, {}]^{d}", n / 4)));
        }
    }
    let sites = field.values.len();
    let nf = sites as f64;
    let mean = field.values.iter().copied().collect::<NeumaierSum>().value() / nf;
    let mut m2 = NeumaierSum::new();
    let mut m3 = NeumaierSum::new();
    let mut m4 = NeumaierSum::new();
    for &v in &field.values {
        let c = v - mean;
        m2.add(c * c);
        m3.add(c * c * c);
        m4.add(c * c * c * c);
    }
    let variance = m2.value() / nf;
    let skewness = m3.value() / nf / variance.powf(1.5);
    let kurtosis = m4.value() / nf / (variance * variance);

    let reach = BARTLETT_REACH.min(n);
    let cube = field.cube();
    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        let ext: Vec<usize> = lag.iter().map(|&l| n - l).collect();
        let mut acc = NeumaierSum::new();
        let mut j = vec![0usize; d];
        for_each_in_box(&ext, |i| {
            for t in 0..d {
                j[t] = i[t] + lag[t];
            }
            acc.add((field.values[cube.index(i)] - mean) * (field.values[cube.index(&j)] - mean));
        });
        let pairs: usize = ext.iter().product();
        let sample = acc.value() / pairs as f64;
        let signed: Vec<i64> = lag.iter().map(|&l| l as i64).collect();
        let (oracle, oracle_error) = model.autocovariance(&signed, ORACLE_TOL);

        // Bartlett: N·Var(ĉ_h) ≈ Σ_j c_j² + c_{j+h} c_{j-h}
        let mut bart = NeumaierSum::new();
        let window = Cube { dim: d, side: 2 * reach + 1 };
        for off in window.iter() {
            let jv: Vec<i64> = off.iter().map(|&o| o as i64 - reach as i64).collect();
            let plus: Vec<i64> = jv.iter().zip(&signed).map(|(a, b)| a + b).collect();
            let minus: Vec<i64> = jv.iter().zip(&signed).map(|(a, b)| a - b).collect();
            let c = model.autocovariance(&jv, ORACLE_TOL).0;
            bart.add(c * c + model.autocovariance(&plus, ORACLE_TOL).0 * model.autocovariance(&minus, ORACLE_TOL).0);
        }
        let std_error = (bart.value().max(0.0) / pairs as f64).sqrt();
        let z = if std_error > 0.0 { (sample - oracle) / std_error } else { 0.0 };
        out.push(LagDiagnostic {
            lag: lag.clone(),
            pairs,
            sample,
            oracle,
            oracle_error,
            std_error,
            z,
        });
    }
    Ok(FieldDiagnostics {
        sites,
        mean,
        variance,
        skewness,
        kurtosis,
        lags: out,
    })
}
