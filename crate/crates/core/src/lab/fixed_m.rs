use serde::{Deserialize, Serialize};

use super::{coupled, kernel_sums, moments, oracle_for, replicate_map, verdict_of, with_threads, ExperimentConfig, SeedRecord};
use crate::coefficients::Verdict;
use crate::error::{Error, Result};
use crate::kde::quad::{adaptive_simpson, integrate_pieces};
use crate::kde::{DensityOracle, KernelModel};
use crate::special::normal_pdf;

/// Relative band around the limit for the fixed-`m` verdict.
pub const DEFAULT_GAP_BAND: f64 = 0.15;

const GAP_QUAD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GapMode {
    Fixed { m: usize },
    Growing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub m: usize,
    pub b_n: f64,
    /// Monte Carlo `E(ζ_n - Z_n)²`, pooled over sites and replicates.
    pub gap: f64,
    /// Standard error across replicate means.
    pub gap_std_error: Option<f64>,
    /// Exact value at this bandwidth.
    pub finite_b_oracle: Option<f64>,
    /// `B_m / b + b`.
    pub proxy: f64,
    pub gap_over_proxy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub config: ExperimentConfig,
    pub mode: GapMode,
    pub x: f64,
    pub seeds: SeedRecord,
    pub rows: Vec<GapRow>,
    /// `(p_m(x) + p(x)) ∫K²`, fixed mode only.
    pub limit_oracle: Option<f64>,
    pub band: f64,
    /// Largest `gap / proxy` over the grid.
    pub fitted_constant: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// `E(ζ - Z)²` at bandwidth `b` for Gaussian innovations, where
/// `Z = b^{-1/2} K((x - X)/b)`, `ζ` the same on `X_m`, and `X - X_m`
/// is normal with variance `w = v - v_m` independent of `X_m`.
pub fn exact_gap(oracle: &DensityOracle, kernel: KernelModel, b: f64, x: f64) -> Result<f64> {
    oracle.require_exact()?;
    let breaks = kernel.integration_breaks();
    let second = |var: f64| {
        integrate_pieces(|u| kernel.eval(u).powi(2) * normal_pdf(x - b * u, var), breaks, GAP_QUAD_TOL)
    };
    let ez2 = second(oracle.variance);
    let ezeta2 = second(oracle.truncated_variance);
    let w = (oracle.variance - oracle.truncated_variance).max(0.0);
    let cross = if w == 0.0 {
        ezeta2
    } else {
        // g(u) = E K(u - W/b), W ~ N(0, w), integrated over z = W/√w
        let s = w.sqrt() / b;
        let lo_k = breaks[0];
        let hi_k = breaks[breaks.len() - 1];
        let g = |u: f64| {
            let lo = ((u - hi_k) / s).max(-10.0);
            let hi = ((u - lo_k) / s).min(10.0);
            if lo >= hi {
                return 0.0;
            }
            let mut pts = vec![lo];
            for &t in breaks.iter().rev() {
                let z = (u - t) / s;
                if z > lo && z < hi {
                    pts.push(z);
                }
            }
            pts.push(hi);
            pts.windows(2)
                .map(|p| adaptive_simpson(|z| kernel.eval(u - s * z) * normal_pdf(z, 1.0), p[0], p[1], GAP_QUAD_TOL))
                .sum::<f64>()
        };
        integrate_pieces(
            |u| kernel.eval(u) * normal_pdf(x - b * u, oracle.truncated_variance) * g(u),
            breaks,
            GAP_QUAD_TOL,
        )
    };
    Ok(ez2 + ezeta2 - 2.0 * cross)
}

fn gap_rows(cfg: &ExperimentConfig, x: f64, m_of: impl Fn(usize) -> Result<usize>) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let m = m_of(n)?;
        let b = cfg.bandwidth_for(n);
        let plan = cfg.plan_for(n, m)?;
        let per_rep = replicate_map(cfg.replicates, |rep| {
            let fields = coupled(cfg, n, m, &plan, rep)?;
            let sums = kernel_sums(&fields, x, b, cfg.kernel);
            Ok(sums.difference_sq / (sums.sites as f64 * b))
        })?;
        let mo = moments(&per_rep)?;
        let se = (per_rep.len() > 1).then(|| (mo.variance / per_rep.len() as f64).sqrt());
        let oracle = oracle_for(cfg, m)?;
        let finite_b_oracle = if oracle.exact { Some(exact_gap(&oracle, cfg.kernel, b, x)?) } else { None };
        let proxy = cfg.coefficients.outer_norm(m) / b + b;
        rows.push(GapRow {
            n,
            m,
            b_n: b,
            gap: mo.mean,
            gap_std_error: se,
            finite_b_oracle,
            proxy,
            gap_over_proxy: mo.mean / proxy,
        });
    }
    Ok(rows)
}

fn fitted(rows: &[GapRow]) -> f64 {
    rows.iter().map(|r| r.gap_over_proxy).fold(0.0, f64::max)
}

/// `E(ζ_n - Z_n)²` along the n-grid with `m` held fixed. The cross term
/// vanishes as `b → 0`, so the gap settles at `(p_m(x) + p(x))∫K²`
/// instead of shrinking.
pub fn fixed_m_gap(cfg: &ExperimentConfig, m: usize) -> Result<GapReport> {
    cfg.validate()?;
    if m < 1 {
        return Err(Error::arg("m", "must be at least 1"));
    }
    if !cfg.innovations.is_gaussian() {
        return Err(Error::OracleUnavailable(
            "the fixed-m gap needs exact densities (Gaussian innovations)".into(),
        ));
    }
    let x = cfg.resolved_eval_points()[0];
    let rows = with_threads(cfg.threads, || gap_rows(cfg, x, |_| Ok(m)))?;
    let oracle = oracle_for(cfg, m)?;
    let limit = (oracle.p_m(x) + oracle.p(x)) * cfg.kernel.roughness();
    let mut notes = Vec::new();
    let last = rows.last().expect("validated grid");
    let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let verdict = if oracle.variance == oracle.truncated_variance {
        notes.push("X_m = X: the gap is identically zero".into());
        verdict_of(rows.iter().all(|r| r.gap == 0.0))
    } else {
        let within = ((last.gap - limit) / limit).abs() <= DEFAULT_GAP_BAND;
        let holds_up = last.gap >= 0.5 * max_gap;
        if !within {
            notes.push(format!("largest-n gap {:.5} outside ±{DEFAULT_GAP_BAND} of {limit:.5}", last.gap));
        }
        if !holds_up {
            notes.push("gap fell below half its maximum".into());
        }
        verdict_of(within && holds_up)
    };
    Ok(GapReport {
        config: cfg.clone(),
        mode: GapMode::Fixed { m },
        x,
        seeds: SeedRecord::new(cfg.seed),
        fitted_constant: fitted(&rows),
        rows,
        limit_oracle: Some(limit),
        band: DEFAULT_GAP_BAND,
        verdict,
        notes,
    })
}

/// Companion run with `m = m_n` from the configured schedule; the gap
/// should shrink like `B_{m_n}/b_n + b_n`.
pub fn growing_m_gap(cfg: &ExperimentConfig) -> Result<GapReport> {
    cfg.validate()?;
    let x = cfg.resolved_eval_points()[0];
    let rows = with_threads(cfg.threads, || gap_rows(cfg, x, |n| cfg.m_for(n)))?;
    let mut notes = Vec::new();
    let verdict = if rows.len() < 2 {
        notes.push("need at least two grid points".into());
        Verdict::Inconclusive
    } else {
        let (first, last) = (rows[0].gap, rows[rows.len() - 1].gap);
        verdict_of(last < 0.5 * first || (first == 0.0 && last == 0.0))
    };
    Ok(GapReport {
        config: cfg.clone(),
        mode: GapMode::Growing,
        x,
        seeds: SeedRecord::new(cfg.seed),
        fitted_constant: fitted(&rows),
        rows,
        limit_oracle: None,
        band: DEFAULT_GAP_BAND,
        verdict,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientModel;
    use crate::innovations::InnovationModel;
    use crate::kde::{density_oracle, BandwidthSchedule};
    use crate::lab::MSchedule;

    #[test]
    fn limit_value_for_geometric_half() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let o = density_oracle(&model, &InnovationModel::Gaussian, 2, &[0]).unwrap();
        let limit = (o.p_m(0.0) + o.p(0.0)) * 0.6;
        assert!((limit - 0.42139).abs() < 5e-5, "{limit}");
    }

    #[test]
    fn exact_gap_matches_brute_force_double_integral() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let o = density_oracle(&model, &InnovationModel::Gaussian, 2, &[0]).unwrap();
        let (b, x) = (0.3, 0.2);
        let k = KernelModel::Epanechnikov;
        let w = o.variance - o.truncated_variance;
        // E(ζ - Z)² = b⁻¹ ∫∫ (K((x-y)/b) - K((x-y-t)/b))² p_m(y) q_w(t) dy dt on a grid
        let h = 1e-3;
        let mut acc = 0.0;
        for i in 0..=8000 {
            let y = -4.0 + i as f64 * h;
            let py = normal_pdf(y, o.truncated_variance);
            let kz = k.eval((x - y) / b);
            let mut inner = 0.0;
            for j in 0..=3000 {
                let t = -1.5 + j as f64 * h;
                let d = kz - k.eval((x - y - t) / b);
                inner += d * d * normal_pdf(t, w);
            }
            acc += py * inner * h;
        }
        let brute = acc * h / b;
        let exact = exact_gap(&o, k, b, x).unwrap();
        assert!((exact - brute).abs() < 2e-4 * brute.max(1.0), "{exact} vs {brute}");
    }

    #[test]
    fn exact_gap_tends_to_limit() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let o = density_oracle(&model, &InnovationModel::Gaussian, 2, &[0]).unwrap();
        let g = exact_gap(&o, KernelModel::Epanechnikov, 1e-4, 0.0).unwrap();
        assert!((g - 0.42139).abs() < 1e-3, "{g}");
    }

    #[test]
    fn identity_model_has_zero_gap() {
        let mut cfg = ExperimentConfig::new(
            CoefficientModel::identity(1).unwrap(),
            BandwidthSchedule::new(1.0, 0.3).unwrap(),
            vec![256, 512],
        );
        cfg.m_schedule = MSchedule::Fixed { m: 3 };
        cfg.eval_points = Some(vec![0.0]);
        cfg.replicates = 4;
        let rep = fixed_m_gap(&cfg, 3).unwrap();
        assert!(rep.rows.iter().all(|r| r.gap == 0.0));
        assert_eq!(rep.verdict, Verdict::Pass);
    }
}
