use serde::{Deserialize, Serialize};

use super::{
    combine, correlation, coupled, exact_centering, moments, oracle_for, replicate_map,
    strictly_decreasing, trend_down, verdict_of, with_threads, ExperimentConfig, SeedRecord,
};
use crate::coefficients::Verdict;
use crate::error::{Error, Result};
use crate::field::TruncationPlan;
use crate::kde::asymptotic_variance;
use crate::lattice::Cube;
use crate::special::NeumaierSum;

/// Big blocks of side `l` separated by gaps of width `m`, starting at the
/// lattice corner. A block fits whenever its `l` sites do; this counts
/// `floor((n + m)/(l + m))` blocks per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub dimension: usize,
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub blocks_per_axis: usize,
}

impl BlockPlan {
    pub fn new(dimension: usize, n: usize, l: usize, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::arg("m", "must be at least 1"));
        }
        if l <= m {
            return Err(Error::arg("l", format!("block side {l} must exceed the gap {m}")));
        }
        if l > n {
            return Err(Error::arg("l", format!("block side {l} exceeds the lattice side {n}")));
        }
        Ok(BlockPlan {
            dimension,
            n,
            l,
            m,
            blocks_per_axis: (n + m) / (l + m),
        })
    }

    pub fn total_blocks(&self) -> usize {
        self.blocks_per_axis.pow(self.dimension as u32)
    }

    /// Block index along one axis for coordinate `c`, if inside a block.
    fn axis_block(&self, c: usize) -> Option<usize> {
        let k = c / (self.l + self.m);
        (k < self.blocks_per_axis && c - k * (self.l + self.m) < self.l).then_some(k)
    }
}

/// Block side rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BlockSpec {
    /// `l_n = m_n · ceil(ln n)`.
    #[default]
    LogProportional,
    Fixed { l: usize },
    /// One block covering the whole lattice.
    FullLattice,
}

impl BlockSpec {
    pub fn plan(&self, dimension: usize, n: usize, m: usize) -> Result<BlockPlan> {
        let l = match *self {
            BlockSpec::LogProportional => m * (n as f64).ln().ceil().max(1.0) as usize,
            BlockSpec::Fixed { l } => l,
            BlockSpec::FullLattice => n,
        };
        BlockPlan::new(dimension, n, l, m)
    }
}

struct BlockSim {
    plan: BlockPlan,
    b: f64,
    /// Centred block sums, one vector per replicate.
    eta: Vec<Vec<f64>>,
    /// `(S_n(Y) - S_n(η)) / n^{d/2}` per replicate.
    delta: Vec<f64>,
    centering: &'static str,
}

fn simulate(cfg: &ExperimentConfig, spec: BlockSpec, x: f64) -> Result<Vec<BlockSim>> {
    let d = cfg.dimension();
    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let m = cfg.m_for(n)?;
        let plan = spec.plan(d, n, m)?;
        let b = cfg.bandwidth_for(n);
        // Only X_m enters: generate with the truncated coefficients alone.
        let trunc_plan = TruncationPlan::fixed(&cfg.coefficients, m)?;
        let oracle = oracle_for(cfg, m)?;
        let exact = exact_centering(cfg, &oracle, b, x)?;
        let cube = Cube::new(d, n)?;
        let axis: Vec<Option<usize>> = (0..n).map(|c| plan.axis_block(c)).collect();
        let kb = plan.blocks_per_axis;
        let inv_sqrt_b = 1.0 / b.sqrt();

        // raw block sums of ζ, then the complement sum and its size
        let raw: Vec<(Vec<f64>, f64, usize)> = replicate_map(cfg.replicates, |rep| {
            let fields = coupled(cfg, n, m, &trunc_plan, rep)?;
            let mut blocks = vec![NeumaierSum::new(); plan.total_blocks()];
            let mut comp = NeumaierSum::new();
            let mut comp_count = 0usize;
            let mut idx = vec![0usize; d];
            for (flat, &v) in fields.truncated.values.iter().enumerate() {
                cube.unravel(flat, &mut idx);
                let z = cfg.kernel.eval((x - v) / b) * inv_sqrt_b;
                let mut bidx = 0usize;
                let mut inside = true;
                for &c in &idx {
                    match axis[c] {
                        Some(k) => bidx = bidx * kb + k,
                        None => {
                            inside = false;
                            break;
                        }
                    }
                }
                if inside {
                    blocks[bidx].add(z);
                } else {
                    comp.add(z);
                    comp_count += 1;
                }
            }
            Ok((blocks.iter().map(|s| s.value()).collect(), comp.value(), comp_count))
        })?;

        let (e_zeta, centering) = match exact {
            Some(c) => (b.sqrt() * c.truncated, "oracle"),
            None => {
                let mut acc = NeumaierSum::new();
                for (blocks, comp, _) in &raw {
                    for &v in blocks {
                        acc.add(v);
                    }
                    acc.add(*comp);
                }
                (acc.value() / (cfg.replicates * cube.len()) as f64, "pooled")
            }
        };
        let block_sites = plan.l.pow(d as u32) as f64;
        let scale = (n as f64).powf(d as f64 / 2.0);
        let eta = raw
            .iter()
            .map(|(blocks, _, _)| blocks.iter().map(|v| v - block_sites * e_zeta).collect())
            .collect();
        let delta = raw
            .iter()
            .map(|(_, comp, count)| {
                if *count == 0 {
                    0.0
                } else {
                    (comp - *count as f64 * e_zeta) / scale
                }
            })
            .collect();
        out.push(BlockSim {
            plan,
            b,
            eta,
            delta,
            centering,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub blocks_per_axis: usize,
    pub total_blocks: usize,
    pub b_n: f64,
    pub centering: String,
    pub delta_mean: f64,
    pub delta_variance: f64,
    /// `m / (l + m)`.
    pub rate_proxy: f64,
    /// Pooled correlation of axis-adjacent block sums.
    pub adjacent_correlation: Option<f64>,
    pub adjacent_pairs: usize,
    /// `4 / √(blocks · R)`.
    pub correlation_bound: f64,
    pub correlation_verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub config: ExperimentConfig,
    pub block_spec: BlockSpec,
    pub x: f64,
    pub seeds: SeedRecord,
    pub rows: Vec<BlockRow>,
    pub variance_trend_verdict: Verdict,
    pub verdict: Verdict,
}

/// Big-block sums `η_k` of `ζ̄` over the truncated field, and the part
/// `(S_n(Y) - S_n(η))/n^{d/2}` left in the gaps, along the n-grid.
pub fn block_decomposition_check(cfg: &ExperimentConfig, spec: BlockSpec) -> Result<BlockReport> {
    cfg.validate()?;
    let x = cfg.resolved_eval_points()[0];
    let sims = with_threads(cfg.threads, || simulate(cfg, spec, x))?;
    let r = cfg.replicates;
    let mut rows = Vec::new();
    for sim in &sims {
        let p = sim.plan;
        let md = moments(&sim.delta)?;
        let kb = p.blocks_per_axis;
        let cube = Cube::new(p.dimension, kb)?;
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut idx = vec![0usize; p.dimension];
        for eta in &sim.eta {
            for flat in 0..eta.len() {
                cube.unravel(flat, &mut idx);
                let mut stride = 1;
                for t in (0..p.dimension).rev() {
                    if idx[t] + 1 < kb {
                        left.push(eta[flat]);
                        right.push(eta[flat + stride]);
                    }
                    stride *= kb;
                }
            }
        }
        let bound = 4.0 / ((p.total_blocks() * r) as f64).sqrt();
        let corr = if left.is_empty() { None } else { Some(correlation(&left, &right)?) };
        let correlation_verdict = match corr {
            Some(c) => verdict_of(c.abs() <= bound),
            None => Verdict::Inconclusive,
        };
        rows.push(BlockRow {
            n: p.n,
            m: p.m,
            l: p.l,
            blocks_per_axis: kb,
            total_blocks: p.total_blocks(),
            b_n: sim.b,
            centering: sim.centering.into(),
            delta_mean: md.mean,
            delta_variance: md.variance,
            rate_proxy: p.m as f64 / (p.l + p.m) as f64,
            adjacent_correlation: corr,
            adjacent_pairs: left.len(),
            correlation_bound: bound,
            correlation_verdict,
        });
    }
    let vars: Vec<f64> = rows.iter().map(|r| r.delta_variance).collect();
    let variance_trend_verdict = if rows.len() < 2 {
        Verdict::Inconclusive
    } else {
        verdict_of(strictly_decreasing(&vars) || vars.iter().all(|&v| v == 0.0))
    };
    let verdict = combine(
        std::iter::once(variance_trend_verdict).chain(
            rows.iter()
                .map(|r| r.correlation_verdict)
                .filter(|v| *v != Verdict::Inconclusive),
        ),
    );
    Ok(BlockReport {
        config: cfg.clone(),
        block_spec: spec,
        x,
        seeds: SeedRecord::new(cfg.seed),
        rows,
        variance_trend_verdict,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfPoint {
    pub eps: f64,
    /// `n^{d/2} ε`.
    pub threshold: f64,
    pub value: f64,
    /// The threshold exceeds the almost-sure bound on `|ξ_n|`.
    pub forced_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindebergRow {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub samples: usize,
    /// `E[ξ_n²] / l^d`.
    pub lf1: f64,
    pub sigma2: f64,
    pub lf1_ratio: f64,
    /// `l^d · sup K / √b`.
    pub almost_sure_bound: f64,
    pub lf2: Vec<LfPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindebergReport {
    pub config: ExperimentConfig,
    pub block_spec: BlockSpec,
    pub x: f64,
    pub seeds: SeedRecord,
    pub rows: Vec<LindebergRow>,
    /// Trend verdict of the LF2 estimate per ε.
    pub lf2_verdicts: Vec<(f64, Verdict)>,
    pub verdict: Verdict,
}

/// Monte Carlo estimates of `E[ξ_n²]/l^d` and
/// `E[ξ_n² 1{|ξ_n| > n^{d/2} ε}]/l^d` for one big-block sum `ξ_n`.
pub fn lindeberg_estimate(cfg: &ExperimentConfig, spec: BlockSpec, eps: &[f64]) -> Result<LindebergReport> {
    cfg.validate()?;
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::arg("eps", "needs positive values"));
    }
    let x = cfg.resolved_eval_points()[0];
    let sims = with_threads(cfg.threads, || simulate(cfg, spec, x))?;
    let d = cfg.dimension();
    let mut rows = Vec::new();
    for sim in &sims {
        let p = sim.plan;
        let ld = (p.l as f64).powi(d as i32);
        let xi: Vec<f64> = sim.eta.iter().flatten().copied().collect();
        let count = xi.len() as f64;
        let lf1 = xi.iter().map(|v| v * v).collect::<NeumaierSum>().value() / count / ld;
        let oracle = oracle_for(cfg, p.m)?;
        let sigma2 = asymptotic_variance(oracle.p(x), cfg.kernel)?;
        let bound = ld * cfg.kernel.sup() / sim.b.sqrt();
        let scale = (p.n as f64).powf(d as f64 / 2.0);
        let lf2 = eps
            .iter()
            .map(|&e| {
                let threshold = scale * e;
                let value = xi
                    .iter()
                    .filter(|v| v.abs() > threshold)
                    .map(|v| v * v)
                    .collect::<NeumaierSum>()
                    .value()
                    / count
                    / ld;
                LfPoint {
                    eps: e,
                    threshold,
                    value,
                    forced_zero: threshold >= bound,
                }
            })
            .collect();
        rows.push(LindebergRow {
            n: p.n,
            m: p.m,
            l: p.l,
            samples: xi.len(),
            lf1,
            sigma2,
            lf1_ratio: lf1 / sigma2,
            almost_sure_bound: bound,
            lf2,
        });
    }
    let lf2_verdicts: Vec<(f64, Verdict)> = eps
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let seq: Vec<f64> = rows.iter().map(|r| r.lf2[k].value).collect();
            let v = if seq.len() < 2 { Verdict::Inconclusive } else { verdict_of(trend_down(&seq)) };
            (e, v)
        })
        .collect();
    let verdict = combine(lf2_verdicts.iter().map(|(_, v)| *v));
    Ok(LindebergReport {
        config: cfg.clone(),
        block_spec: spec,
        x,
        seeds: SeedRecord::new(cfg.seed),
        rows,
        lf2_verdicts,
        verdict,
    })
}
