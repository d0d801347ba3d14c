use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    coupled, exact_centering, oracle_for, replicate_map, verdict_of, with_threads, ExperimentConfig, SeedRecord,
};
use crate::coefficients::{coefficient_functionals, CoefficientModel, Verdict, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::innovations::{InnovationModel, SeedSpec};
use crate::lattice::{prefix_sums, Cube};
use crate::special::NeumaierSum;

/// Cap on the max/min ratio of normalized rectangle moments.
pub const DEFAULT_RECTANGLE_RATIO_CAP: f64 = 3.0;

/// The moment-inequality check keeps the box `[0,R)^d` with
/// `B_R ≤` this times `(Σ a²)^{1/2}`; the exact constant refers to the
/// kept coefficients, so truncation biases nothing.
const WU_COEFF_TOL: f64 = 1e-4;
const WU_MAX_TERMS: usize = 1 << 16;
const WU_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleRow {
    pub n: usize,
    pub m: usize,
    pub rectangle: Vec<usize>,
    /// `(E S_j²)^{1/2}` for `S_j = Σ_{1⪯i⪯j} ζ̄_i`.
    pub l2_norm: f64,
    /// `l2_norm / √(j_1⋯j_d)`.
    pub normalized: f64,
    /// `‖ζ̄‖₂` pooled over sites.
    pub site_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub n: usize,
    pub m: usize,
    pub b_n: f64,
    /// `‖S_n(Z̄ - ζ̄)‖₂`.
    pub sum_l2: f64,
    /// `‖Z̄ - ζ̄‖₂`.
    pub site_l2: f64,
    pub delta_n: f64,
    /// `n^{d/2}(‖Z̄ - ζ̄‖₂ + b^{1/2} Δ_n)`.
    pub bound_shape: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleReport {
    pub config: ExperimentConfig,
    pub x: f64,
    pub seeds: SeedRecord,
    pub rows: Vec<RectangleRow>,
    pub remainder: Vec<RemainderRow>,
    pub max_min_ratio: Option<f64>,
    pub ratio_cap: f64,
    /// Largest `sum_l2 / bound_shape`.
    pub remainder_constant: Option<f64>,
    pub skipped_rectangles: Vec<Vec<usize>>,
    pub verdict: Verdict,
}

/// Second moments of rectangle partial sums of `ζ̄` started at the
/// lattice corner, normalized by the rectangle volume.
pub fn rectangle_moment_check(cfg: &ExperimentConfig, rectangles: &[Vec<usize>]) -> Result<RectangleReport> {
    cfg.validate()?;
    let d = cfg.dimension();
    if rectangles.is_empty() {
        return Err(Error::EmptyInput("rectangles"));
    }
    for r in rectangles {
        if r.len() != d || r.contains(&0) {
            return Err(Error::arg("rectangles", format!("{r:?} is not a positive {d}-index")));
        }
    }
    let x = cfg.resolved_eval_points()[0];
    let mut rows = Vec::new();
    let mut remainder = Vec::new();
    let mut skipped = Vec::new();
    with_threads(cfg.threads, || {
        for &n in &cfg.n_grid {
            let m = cfg.m_for(n)?;
            let b = cfg.bandwidth_for(n);
            let plan = cfg.plan_for(n, m)?;
            let cube = Cube::new(d, n)?;
            let fitting: Vec<&Vec<usize>> = rectangles.iter().filter(|r| r.iter().all(|&j| j <= n)).collect();
            let corners: Vec<usize> = fitting
                .iter()
                .map(|r| cube.index(&r.iter().map(|j| j - 1).collect::<Vec<_>>()))
                .collect();
            let oracle = oracle_for(cfg, m)?;
            let exact = exact_centering(cfg, &oracle, b, x)?;
            let inv_sqrt_b = 1.0 / b.sqrt();
            // per replicate: uncentred rectangle sums, Σζ, Σζ², Σ(Z-ζ), Σ(Z-ζ)², Σ(Z-ζ) site count
            let raw = replicate_map(cfg.replicates, |rep| {
                let fields = coupled(cfg, n, m, &plan, rep)?;
                let mut zeta: Vec<f64> = fields
                    .truncated
                    .values
                    .iter()
                    .map(|&v| cfg.kernel.eval((x - v) / b) * inv_sqrt_b)
                    .collect();
                let mut sum_z = NeumaierSum::new();
                let mut sq_z = NeumaierSum::new();
                let mut diff = NeumaierSum::new();
                let mut diff_sq = NeumaierSum::new();
                for (&xf, &z) in fields.full.values.iter().zip(&zeta) {
                    let zf = cfg.kernel.eval((x - xf) / b) * inv_sqrt_b;
                    sum_z.add(z);
                    sq_z.add(z * z);
                    diff.add(zf - z);
                    diff_sq.add((zf - z) * (zf - z));
                }
                prefix_sums(cube, &mut zeta);
                let rect: Vec<f64> = corners.iter().map(|&c| zeta[c]).collect();
                Ok((rect, sum_z.value(), sq_z.value(), diff.value(), diff_sq.value()))
            })?;
            let sites = cube.len() as f64;
            let reps = cfg.replicates as f64;
            let (e_zeta, e_diff) = match exact {
                Some(c) => (b.sqrt() * c.truncated, b.sqrt() * (c.full - c.truncated)),
                None => (
                    raw.iter().map(|r| r.1).collect::<NeumaierSum>().value() / (sites * reps),
                    raw.iter().map(|r| r.3).collect::<NeumaierSum>().value() / (sites * reps),
                ),
            };
            // ‖ζ̄‖₂² = E ζ² - (E ζ)² with the same centre
            let mean_sq = raw.iter().map(|r| r.2).collect::<NeumaierSum>().value() / (sites * reps);
            let mean_z = raw.iter().map(|r| r.1).collect::<NeumaierSum>().value() / (sites * reps);
            let site_l2 = (mean_sq - 2.0 * e_zeta * mean_z + e_zeta * e_zeta).max(0.0).sqrt();
            for (k, r) in fitting.iter().enumerate() {
                let vol: usize = r.iter().product();
                let ms = raw
                    .iter()
                    .map(|row| (row.0[k] - vol as f64 * e_zeta).powi(2))
                    .collect::<NeumaierSum>()
                    .value()
                    / reps;
                rows.push(RectangleRow {
                    n,
                    m,
                    rectangle: (*r).clone(),
                    l2_norm: ms.sqrt(),
                    normalized: (ms / vol as f64).sqrt(),
                    site_l2,
                });
            }
            for r in rectangles {
                if !fitting.contains(&r) && !skipped.contains(r) {
                    skipped.push(r.clone());
                }
            }
            let mean_diff = raw.iter().map(|r| r.3).collect::<NeumaierSum>().value() / (sites * reps);
            let mean_diff_sq = raw.iter().map(|r| r.4).collect::<NeumaierSum>().value() / (sites * reps);
            let rem_site =
                (mean_diff_sq - 2.0 * e_diff * mean_diff + e_diff * e_diff).max(0.0).sqrt();
            let sum_l2 = (raw
                .iter()
                .map(|row| (row.3 - sites * e_diff).powi(2))
                .collect::<NeumaierSum>()
                .value()
                / reps)
                .sqrt();
            let delta_n = coefficient_functionals(&cfg.coefficients, n, m, DEFAULT_TAIL_TOL)?.delta_n;
            let shape = sites.sqrt() * (rem_site + b.sqrt() * delta_n);
            remainder.push(RemainderRow {
                n,
                m,
                b_n: b,
                sum_l2,
                site_l2: rem_site,
                delta_n,
                bound_shape: shape,
                ratio: (shape > 0.0).then(|| sum_l2 / shape),
            });
        }
        Ok(())
    })?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.normalized), hi.max(r.normalized)));
    let max_min_ratio = (!rows.is_empty()).then(|| hi / lo);
    let remainder_constant = remainder.iter().filter_map(|r| r.ratio).reduce(f64::max);
    let verdict = match max_min_ratio {
        None => Verdict::Inconclusive,
        Some(r) => verdict_of(r < DEFAULT_RECTANGLE_RATIO_CAP),
    };
    Ok(RectangleReport {
        config: cfg.clone(),
        x,
        seeds: SeedRecord::new(cfg.seed),
        rows,
        remainder,
        max_min_ratio,
        ratio_cap: DEFAULT_RECTANGLE_RATIO_CAP,
        remainder_constant,
        skipped_rectangles: skipped,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WuReport {
    pub coefficient_model_id: String,
    pub innovation_model_id: String,
    pub p: f64,
    pub sample: usize,
    pub seed: u64,
    pub terms: usize,
    /// `Σ a_i²` over the terms kept.
    pub sum_squares: f64,
    /// Mass of `Σ a_i²` dropped with the small coefficients.
    pub dropped_sum_squares: f64,
    /// `Ê|Σ a_i ε_i|^{2p} / (Σ a_i²)^p`.
    pub c_hat: f64,
    pub std_error: f64,
    /// Exact value of the ratio for this model and innovation law.
    pub exact_constant: f64,
    #[serde(with = "crate::report::real")]
    pub z: f64,
    pub verdict: Verdict,
}

/// Monte Carlo of the implied constant in `E|Σ a_i ε_i|^{2p} ≤ C (Σ a_i²)^p`
/// for `p ∈ {1, 2}`.
pub fn wu_inequality_check(
    model: &CoefficientModel,
    innovations: &InnovationModel,
    p: f64,
    sample: usize,
    seed: u64,
) -> Result<WuReport> {
    innovations.validate()?;
    if p != 1.0 && p != 2.0 {
        return Err(Error::arg("p", format!("must be 1 or 2, got {p}")));
    }
    if sample < 2 {
        return Err(Error::arg("sample", "needs at least two draws"));
    }
    let order = (2.0 * p).max(2.0);
    if !innovations.has_moment(order) {
        return Err(Error::MomentCondition(format!(
            "E|ε|^{order} is infinite for {}",
            innovations.id()
        )));
    }
    let total = model.sum_squares();
    let radius = model.tail_radius(WU_COEFF_TOL * total.sqrt()).max(1);
    let cube = Cube::new(model.dimension(), radius)?;
    match cube.checked_len() {
        Some(len) if len <= WU_MAX_TERMS => {}
        _ => {
            return Err(Error::ResourceCap {
                what: "coefficient box".into(),
                needed_bytes: (radius as u128).pow(model.dimension() as u32) * 8,
                cap_bytes: WU_MAX_TERMS as u128 * 8,
            })
        }
    }
    let coeffs: Vec<f64> = model.coefficient_cube(radius).into_iter().filter(|&a| a != 0.0).collect();
    let s2 = coeffs.iter().map(|a| a * a).collect::<NeumaierSum>().value();
    let s4 = coeffs.iter().map(|a| a.powi(4)).collect::<NeumaierSum>().value();
    let exact_constant = if p == 1.0 {
        1.0
    } else {
        3.0 + (innovations.kurtosis() - 3.0) * s4 / (s2 * s2)
    };
    let chunks = sample.div_ceil(WU_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = SeedSpec::new(seed, p as u64, c as u64).rng();
            let count = WU_CHUNK.min(sample - c * WU_CHUNK);
            let mut eps = vec![0.0; coeffs.len()];
            let mut s = NeumaierSum::new();
            let mut sq = NeumaierSum::new();
            for _ in 0..count {
                innovations.fill(&mut rng, &mut eps);
                let x: f64 = coeffs.iter().zip(&eps).map(|(a, e)| a * e).sum();
                let v = (x * x).powi(p as i32) / s2.powi(p as i32);
                s.add(v);
                sq.add(v * v);
            }
            (s.value(), sq.value())
        })
        .collect();
    let n = sample as f64;
    let mean = partial.iter().map(|t| t.0).collect::<NeumaierSum>().value() / n;
    let second = partial.iter().map(|t| t.1).collect::<NeumaierSum>().value() / n;
    let std_error = ((second - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt();
    let z = (mean - exact_constant) / std_error;
    Ok(WuReport {
        coefficient_model_id: model.id(),
        innovation_model_id: innovations.id(),
        p,
        sample,
        seed,
        terms: coeffs.len(),
        sum_squares: s2,
        dropped_sum_squares: (total - s2).max(0.0),
        c_hat: mean,
        std_error,
        exact_constant,
        z,
        verdict: verdict_of(z.abs() <= 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::BandwidthSchedule;
    use crate::lab::MSchedule;

    #[test]
    fn iid_rectangles_match_site_norm() {
        let mut cfg = ExperimentConfig::new(
            CoefficientModel::identity(1).unwrap(),
            BandwidthSchedule::new(1.0, 0.2).unwrap(),
            vec![256],
        );
        cfg.m_schedule = MSchedule::Fixed { m: 1 };
        cfg.eval_points = Some(vec![0.0]);
        cfg.replicates = 2000;
        let rects: Vec<Vec<usize>> = (2..=8).map(|r| vec![1usize << r]).collect();
        let rep = rectangle_moment_check(&cfg, &rects).unwrap();
        for row in &rep.rows {
            // standard error of a second moment from 2000 draws is about 3%
            assert!((row.normalized / row.site_l2 - 1.0).abs() < 0.06, "{row:?}");
        }
        assert_eq!(rep.remainder[0].sum_l2, 0.0);
        assert!(rep.remainder[0].ratio.is_none() || rep.remainder[0].ratio == Some(0.0));
    }

    #[test]
    fn scaling_coefficients_keeps_verdict() {
        let base = CoefficientModel::geometric(1, 0.5).unwrap();
        let doubled = CoefficientModel::finite_support(1, 40, (0..40).map(|k| 2.0 * 0.5f64.powi(k)).collect()).unwrap();
        let mut verdicts = Vec::new();
        for model in [base, doubled] {
            let mut cfg = ExperimentConfig::new(model, BandwidthSchedule::new(1.0, 0.3).unwrap(), vec![256]);
            cfg.m_schedule = MSchedule::Fixed { m: 4 };
            cfg.eval_points = Some(vec![0.0]);
            cfg.replicates = 200;
            let rects: Vec<Vec<usize>> = (2..=8).map(|r| vec![1usize << r]).collect();
            verdicts.push(rectangle_moment_check(&cfg, &rects).unwrap().verdict);
        }
        assert_eq!(verdicts[0], verdicts[1]);
    }

    #[test]
    fn wu_rejects_missing_moment() {
        let model = CoefficientModel::identity(1).unwrap();
        let err = wu_inequality_check(&model, &InnovationModel::StudentT { nu: 3.5 }, 2.0, 100, 1);
        assert!(matches!(err, Err(Error::MomentCondition(_))));
    }

    #[test]
    fn wu_uniform_kurtosis() {
        let model = CoefficientModel::identity(1).unwrap();
        let rep = wu_inequality_check(&model, &InnovationModel::Uniform, 2.0, 200_000, 7).unwrap();
        assert!((rep.exact_constant - 1.8).abs() < 1e-15);
        assert!((rep.c_hat - 1.8).abs() < 4.0 * rep.std_error, "{rep:?}");
    }

    #[test]
    fn wu_is_thread_independent() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let a = crate::lab::with_threads(Some(1), || wu_inequality_check(&model, &InnovationModel::Gaussian, 1.0, 10_000, 3)).unwrap();
        let b = crate::lab::with_threads(Some(3), || wu_inequality_check(&model, &InnovationModel::Gaussian, 1.0, 10_000, 3)).unwrap();
        assert_eq!(a, b);
    }
}
