//! Monte Carlo checks of the central limit theorem for the kernel
//! density estimator and of the inequalities behind it.

mod blocks;
mod clt;
mod config;
mod covariance;
mod fixed_m;
mod moments;
mod statistic;
mod stats;

pub use blocks::{
    block_decomposition_check, lindeberg_estimate, BlockPlan, BlockReport, BlockRow, BlockSpec,
    LindebergReport, LindebergRow,
};
pub use clt::{run_clt_experiment, CltReport, GridPointSummary, ReplicateRow};
pub use config::{Centering, ExperimentConfig, MSchedule};
pub use covariance::{zeta_covariance_profile, CovarianceReport, CovarianceRow};
pub use fixed_m::{fixed_m_gap, growing_m_gap, GapMode, GapReport, GapRow, DEFAULT_GAP_BAND};
pub use moments::{
    rectangle_moment_check, wu_inequality_check, RectangleReport, RectangleRow, RemainderRow,
    WuReport, DEFAULT_RECTANGLE_RATIO_CAP,
};
pub use statistic::{kernel_sums, normalized_statistic, CenteringValues, Decomposition, KernelSums};
pub use stats::{correlation, ks_normality_test, moments, strictly_decreasing, trend_down, KsResult, Moments};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::Verdict;
use crate::error::{Error, Result};
use crate::field::{generate_coupled_fields, CoupledFields, TruncationPlan};
use crate::innovations::SeedSpec;
use crate::kde::{density_oracle, expected_fn, expected_fn_truncated, DensityOracle};

/// Least replicate count for distributional verdicts.
pub const MIN_REPLICATES_FOR_VERDICT: usize = 100;

/// How per-replicate seeds were derived; embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub stream_rule: String,
    pub replicate_rule: String,
}

impl SeedRecord {
    pub(crate) fn new(master: u64) -> Self {
        SeedRecord {
            master,
            stream_rule: "stream = n".into(),
            replicate_rule: "replicate = 0..R".into(),
        }
    }
}

pub(crate) fn seed_for(master: u64, n: usize, replicate: usize) -> SeedSpec {
    SeedSpec::new(master, n as u64, replicate as u64)
}

/// Run `f` on a pool of `threads` workers, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::arg("threads", e.to_string()))?
            .install(f),
    }
}

/// Runs `per_replicate` for `0..R` in parallel; results come back in
/// replicate order.
pub(crate) fn replicate_map<T: Send>(
    replicates: usize,
    per_replicate: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..replicates).into_par_iter().map(per_replicate).collect()
}

pub(crate) fn coupled(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    plan: &TruncationPlan,
    replicate: usize,
) -> Result<CoupledFields> {
    generate_coupled_fields(
        &cfg.coefficients,
        &cfg.innovations,
        n,
        m,
        plan,
        seed_for(cfg.seed, n, replicate),
        cfg.conv_method,
        cfg.max_bytes(),
    )
}

/// Oracle for `(n, m)` if the config centres on exact expectations.
pub(crate) fn oracle_for(cfg: &ExperimentConfig, m: usize) -> Result<DensityOracle> {
    density_oracle(&cfg.coefficients, &cfg.innovations, m, &vec![0; cfg.dimension()])
}

/// Exact `(E f_n(x), E f_n^{(m)}(x))` or `None` under pooled centering.
pub(crate) fn exact_centering(
    cfg: &ExperimentConfig,
    oracle: &DensityOracle,
    b: f64,
    x: f64,
) -> Result<Option<CenteringValues>> {
    if !cfg.uses_oracle() {
        return Ok(None);
    }
    Ok(Some(CenteringValues {
        full: expected_fn(oracle, cfg.kernel, b, x)?,
        truncated: expected_fn_truncated(oracle, cfg.kernel, b, x)?,
    }))
}

pub(crate) fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut any_inconclusive = false;
    for v in verdicts {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => any_inconclusive = true,
            _ => {}
        }
    }
    if any_inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

pub(crate) fn verdict_of(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}
