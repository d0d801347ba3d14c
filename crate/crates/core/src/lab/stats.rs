use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{std_normal_cdf, NeumaierSum};

/// Sample moments; variance uses the `R - 1` divisor, shape statistics
/// the plain central moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `E[X²]` about zero.
    pub second_moment: f64,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().copied().collect::<NeumaierSum>().value() / n;
    let mut s2 = NeumaierSum::new();
    let mut s3 = NeumaierSum::new();
    let mut s4 = NeumaierSum::new();
    let mut raw2 = NeumaierSum::new();
    for &x in samples {
        let c = x - mean;
        s2.add(c * c);
        s3.add(c * c * c);
        s4.add(c * c * c * c);
        raw2.add(x * x);
    }
    let m2 = s2.value() / n;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (s3.value() / n / m2.powf(1.5), s4.value() / n / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(Moments {
        count: samples.len(),
        mean,
        variance: if samples.len() > 1 { s2.value() / (n - 1.0) } else { 0.0 },
        skewness,
        excess_kurtosis,
        second_moment: raw2.value() / n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub critical_05: f64,
    pub critical_01: f64,
}

impl KsResult {
    pub fn passes_01(&self) -> bool {
        self.distance < self.critical_01
    }
}

/// One-sample Kolmogorov–Smirnov distance to `N(0, sigma2)` with the
/// asymptotic critical values `1.358/√R` and `1.628/√R`.
pub fn ks_normality_test(samples: &[f64], sigma2: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::arg("sigma2", "must be positive"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let sd = sigma2.sqrt();
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = std_normal_cdf(x / sd);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    Ok(KsResult {
        distance: d,
        critical_05: 1.358 / r.sqrt(),
        critical_01: 1.628 / r.sqrt(),
    })
}

/// Pearson correlation; zero when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch("correlation inputs differ in length".into()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("correlation"));
    }
    let n = a.len() as f64;
    let ma = a.iter().copied().collect::<NeumaierSum>().value() / n;
    let mb = b.iter().copied().collect::<NeumaierSum>().value() / n;
    let mut sab = NeumaierSum::new();
    let mut saa = NeumaierSum::new();
    let mut sbb = NeumaierSum::new();
    for (&x, &y) in a.iter().zip(b) {
        sab.add((x - ma) * (y - mb));
        saa.add((x - ma) * (x - ma));
        sbb.add((y - mb) * (y - mb));
    }
    let den = (saa.value() * sbb.value()).sqrt();
    Ok(if den > 0.0 { sab.value() / den } else { 0.0 })
}

/// Verdict helper: non-increasing along the sequence and ending strictly
/// below its start, or identically zero.
pub fn trend_down(seq: &[f64]) -> bool {
    if seq.iter().all(|&v| v == 0.0) {
        return true;
    }
    seq.windows(2).all(|w| w[1] <= w[0]) && seq.last() < seq.first()
}

pub fn strictly_decreasing(seq: &[f64]) -> bool {
    seq.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::{innovation_stream, InnovationModel, SeedSpec};

    #[test]
    fn moments_of_known_data() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.skewness, 0.0);
        assert!(moments(&[]).is_err());
    }

    #[test]
    fn ks_degenerate_and_power() {
        let ks = ks_normality_test(&[0.0; 200], 1.0).unwrap();
        assert!(ks.distance >= 0.5);
        let wide: Vec<f64> = innovation_stream(&InnovationModel::Gaussian, SeedSpec::new(5, 0, 0), 1000)
            .unwrap()
            .iter()
            .map(|x| 2.0 * x)
            .collect();
        assert!(!ks_normality_test(&wide, 1.0).unwrap().passes_01());
    }

    #[test]
    fn ks_level_under_the_null() {
        let mut accepted = 0;
        for rep in 0..200 {
            let s = innovation_stream(&InnovationModel::Gaussian, SeedSpec::new(77, 1, rep), 1000).unwrap();
            let ks = ks_normality_test(&s, 1.0).unwrap();
            if ks.distance < ks.critical_05 {
                accepted += 1;
            }
        }
        assert!(accepted >= 180, "accepted {accepted} of 200");
    }

    #[test]
    fn trends() {
        assert!(trend_down(&[3.0, 2.0, 2.0, 1.0]));
        assert!(!trend_down(&[3.0, 3.0]));
        assert!(trend_down(&[0.0, 0.0]));
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 2.0, 2.0]));
    }
}
