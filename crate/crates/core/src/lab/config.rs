use serde::{Deserialize, Serialize};

use crate::coefficients::{check_corollary1, m_schedule, CoefficientModel, ConditionReport, Verdict};
use crate::error::{Error, Result};
use crate::field::{ConvMethod, TruncationPlan, TruncationPolicy, DEFAULT_MAX_LATTICE_BYTES};
use crate::innovations::InnovationModel;
use crate::kde::{BandwidthSchedule, KernelModel};

/// How `m_n` grows along the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MSchedule {
    /// `m_n = floor(n^δ)`.
    Power { delta: f64 },
    Fixed { m: usize },
    /// `m_n = floor(n^δ*)` with `δ*` the midpoint of the feasible δ window.
    #[default]
    Corollary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Exact expectation when available, pooled replicate mean otherwise.
    #[default]
    Auto,
    Oracle,
    Pooled,
}

fn default_replicates() -> usize {
    500
}

fn default_band() -> f64 {
    0.10
}

fn default_seed() -> u64 {
    42
}

/// Everything a Monte Carlo run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub coefficients: CoefficientModel,
    #[serde(default)]
    pub innovations: InnovationModel,
    #[serde(default)]
    pub kernel: KernelModel,
    pub bandwidth: BandwidthSchedule,
    pub n_grid: Vec<usize>,
    /// Evaluation points; defaults to `{0, 0.5, 1}·√v`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_points: Option<Vec<f64>>,
    #[serde(default)]
    pub m_schedule: MSchedule,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads. Numeric output does not depend on it, so it is
    /// read but never written back.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub centering: Centering,
    /// Relative band around `σ_x²` for the variance verdict.
    #[serde(default = "default_band")]
    pub variance_band: f64,
    #[serde(default)]
    pub conv_method: ConvMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lattice_bytes: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(coefficients: CoefficientModel, bandwidth: BandwidthSchedule, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            coefficients,
            innovations: InnovationModel::Gaussian,
            kernel: KernelModel::Epanechnikov,
            bandwidth,
            n_grid,
            eval_points: None,
            m_schedule: MSchedule::Corollary,
            truncation: TruncationPolicy::default(),
            replicates: default_replicates(),
            seed: default_seed(),
            threads: None,
            centering: Centering::Auto,
            variance_band: default_band(),
            conv_method: ConvMethod::Auto,
            max_lattice_bytes: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        self.innovations.validate()?;
        self.bandwidth.check_dimension(d)?;
        if self.n_grid.is_empty() {
            return Err(Error::arg("n_grid", "must not be empty"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) || self.n_grid[0] < 1 {
            return Err(Error::arg("n_grid", "must be strictly increasing and positive"));
        }
        if self.replicates < 1 {
            return Err(Error::arg("replicates", "must be at least 1"));
        }
        if let Some(xs) = &self.eval_points {
            if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg("eval_points", "must be a nonempty list of finite reals"));
            }
        }
        if !(self.variance_band > 0.0) {
            return Err(Error::arg("variance_band", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::arg("threads", "must be at least 1"));
        }
        match self.m_schedule {
            MSchedule::Power { delta } if !(delta > 0.0 && delta < 1.0) => {
                return Err(Error::arg("m_schedule.delta", "must lie in (0, 1)"));
            }
            MSchedule::Fixed { m: 0 } => return Err(Error::arg("m_schedule.m", "must be at least 1")),
            MSchedule::Corollary => {
                let rep = self.corollary1()?;
                if rep.verdict != Verdict::Pass {
                    return Err(Error::arg(
                        "m_schedule",
                        "the feasible δ window is empty for these parameters; give delta or m explicitly",
                    ));
                }
            }
            _ => {}
        }
        if self.centering == Centering::Oracle && !self.innovations.is_gaussian() {
            return Err(Error::OracleUnavailable(
                "oracle centering needs Gaussian innovations".into(),
            ));
        }
        Ok(())
    }

    pub fn corollary1(&self) -> Result<ConditionReport> {
        check_corollary1(self.dimension(), self.coefficients.beta(), self.bandwidth.gamma)
    }

    /// δ used by the schedule, if it is a power rule.
    pub fn delta(&self) -> Result<Option<f64>> {
        Ok(match self.m_schedule {
            MSchedule::Power { delta } => Some(delta),
            MSchedule::Fixed { .. } => None,
            MSchedule::Corollary => self.corollary1()?.delta_interval.map(|w| w.midpoint),
        })
    }

    pub fn m_for(&self, n: usize) -> Result<usize> {
        Ok(match self.m_schedule {
            MSchedule::Fixed { m } => m,
            _ => m_schedule(n, self.delta()?.expect("power schedule")),
        })
    }

    pub fn bandwidth_for(&self, n: usize) -> f64 {
        self.bandwidth.bandwidth(n)
    }

    pub fn plan_for(&self, n: usize, m: usize) -> Result<TruncationPlan> {
        TruncationPlan::resolve(self.truncation, &self.coefficients, self.bandwidth_for(n), m)
    }

    pub fn max_bytes(&self) -> u128 {
        self.max_lattice_bytes
            .map(u128::from)
            .unwrap_or(DEFAULT_MAX_LATTICE_BYTES)
    }

    pub fn uses_oracle(&self) -> bool {
        match self.centering {
            Centering::Oracle => true,
            Centering::Pooled => false,
            Centering::Auto => self.innovations.is_gaussian(),
        }
    }

    /// Evaluation points in absolute units.
    pub fn resolved_eval_points(&self) -> Vec<f64> {
        match &self.eval_points {
            Some(xs) => xs.clone(),
            None => {
                let sd = self.coefficients.sum_squares().sqrt();
                vec![0.0, 0.5 * sd, sd]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corollary_schedule() {
        let model = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
        let cfg = ExperimentConfig::new(model, BandwidthSchedule::new(1.0, 1.0).unwrap(), vec![32, 64]);
        cfg.validate().unwrap();
        assert_eq!(cfg.delta().unwrap(), Some(5.0 / 12.0));
        assert_eq!(cfg.m_for(64).unwrap(), 5);
        assert_eq!(cfg.m_for(32).unwrap(), 4);
    }

    #[test]
    fn rejects_bad_configs() {
        let model = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
        let mut cfg = ExperimentConfig::new(model, BandwidthSchedule::new(1.0, 1.3).unwrap(), vec![32]);
        assert!(cfg.validate().is_err());
        cfg.m_schedule = MSchedule::Power { delta: 0.4 };
        cfg.validate().unwrap();
        cfg.n_grid = vec![64, 32];
        assert!(cfg.validate().is_err());
        let text = r#"{"coefficients":{"dimension":1,"family":"geometric","ratio":0.5},
            "bandwidth":{"gamma":0.2},"n_grid":[16],"bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }
}
