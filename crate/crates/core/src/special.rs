//! Special functions used by the coefficient functionals and the density
//! oracles.

use std::f64::consts::PI;

// B_2, B_4, ..., B_20 divided by (2j)!.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (a + k)^{-s}` for `s > 1`, `a > 0`,
/// by Euler–Maclaurin summation. Returns the value and a bound on the
/// truncation error of the asymptotic series (rounding not included).
pub fn hurwitz_zeta(s: f64, a: f64) -> (f64, f64) {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta requires s > 1, a > 0");
    // Shift the argument until the asymptotic series converges fast.
    let w_min = 24.0f64.max(s);
    let shift = if a < w_min { (w_min - a).ceil() as usize } else { 0 };
    let mut head = 0.0;
    for k in (0..shift).rev() {
        head += (a + k as f64).powf(-s);
    }
    let w = a + shift as f64;
    let w_s = w.powf(-s);
    let mut tail = w * w_s / (s - 1.0) + 0.5 * w_s;
    // Pochhammer (s)_{2j-1} * w^{-s-2j+1}
    let mut term = s * w_s / w;
    let mut last = 0.0;
    for (j, coef) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if j > 0 {
            let jj = (2 * j + 1) as f64;
            term *= (s + jj - 2.0) * (s + jj - 1.0) / (w * w);
        }
        last = coef * term;
        tail += last;
    }
    (head + tail, last.abs())
}

pub fn normal_pdf(x: f64, variance: f64) -> f64 {
    (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `sup_x |φ_a(x) - φ_b(x)|` for centred normal densities with variances
/// `a` and `b`. The extremum sits at `x = 0` or where `φ_a / a = φ_b / b`.
pub fn sup_normal_density_gap(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let at_zero = (normal_pdf(0.0, a) - normal_pdf(0.0, b)).abs();
    let x2 = 3.0 * a * b * (a / b).ln() / (a - b);
    let x = x2.max(0.0).sqrt();
    at_zero.max((normal_pdf(x, a) - normal_pdf(x, b)).abs())
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn direct_zeta(s: f64, a: f64, terms: usize) -> f64 {
        (0..terms).rev().map(|k| (a + k as f64).powf(-s)).sum()
    }

    #[test]
    fn zeta_known_values() {
        let (z2, err) = hurwitz_zeta(2.0, 1.0);
        assert_relative_eq!(z2, PI * PI / 6.0, max_relative = 1e-15);
        assert!(err < 1e-15);
        let (z4, _) = hurwitz_zeta(4.0, 1.0);
        assert_relative_eq!(z4, PI.powi(4) / 90.0, max_relative = 1e-15);
    }

    #[test]
    fn zeta_matches_direct_sum_for_fast_decay() {
        for &(s, a) in &[(8.0, 1.0), (8.0, 17.0), (7.0, 3.5), (12.0, 100.0)] {
            let (z, _) = hurwitz_zeta(s, a);
            assert_relative_eq!(z, direct_zeta(s, a, 200_000), max_relative = 1e-13);
        }
    }

    #[test]
    fn normal_gap_matches_grid_search() {
        let (a, b) = (1.0, 4.0 / 3.0);
        let mut best = 0.0f64;
        for i in 0..=400_000 {
            let x = -5.0 + 1e-5 * 2.5 * i as f64;
            best = best.max((normal_pdf(x, a) - normal_pdf(x, b)).abs());
        }
        assert_relative_eq!(sup_normal_density_gap(a, b), best, max_relative = 1e-9);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }
}
