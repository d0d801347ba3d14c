use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{CoefficientModel, Family};
use crate::error::{Error, Result};
use crate::kde::BandwidthSchedule;
use crate::lattice::for_each_in_box;

/// Absolute (relative to `max(1, sum)`) tolerance on dyadic increments of
/// the q-weighted coefficient sum.
pub const QSUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Judged from finite-grid trends only.
    PassTrend,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::PassTrend)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::PassTrend => "pass_trend",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaInterval {
    pub lower: f64,
    pub upper: f64,
    pub midpoint: f64,
}

/// One grid point of the m_n growth sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCRow {
    pub n: usize,
    pub m_n: usize,
    pub b_n: f64,
    pub c1_sqrt_b_delta: f64,
    pub c2_b_m_over_b: f64,
    pub c3_m_d_b: f64,
    pub c4_m_d_log_d_over_n_d_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub check: String,
    pub verdict: Verdict,
    pub sub_verdicts: BTreeMap<String, Verdict>,
    #[serde(with = "crate::report::real_map")]
    pub diagnostics: BTreeMap<String, f64>,
    pub delta_interval: Option<DeltaInterval>,
    #[serde(with = "crate::report::real_map")]
    pub thresholds: BTreeMap<String, f64>,
    pub grid: Vec<ConditionCRow>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(check: &str, verdict: Verdict) -> Self {
        ConditionReport {
            check: check.to_string(),
            verdict,
            sub_verdicts: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            delta_interval: None,
            thresholds: BTreeMap::new(),
            grid: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Exact rational value of the shortest decimal that round-trips to `x`,
/// so `1.2` compares as `6/5` rather than as its binary neighbour.
fn decimal_rational(x: f64) -> BigRational {
    debug_assert!(x.is_finite());
    let text = format!("{}", x.abs());
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, denom);
    if x < 0.0 {
        -r
    } else {
        r
    }
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::arg(name, format!("must be positive, got {v}")))
    }
}

/// Exact feasible δ window: `(γ/β, min(γ/d, 1 - γ/d))` as rationals;
/// `β = ∞` sends the lower end to zero.
fn corollary1_window(d: usize, beta: f64, gamma: f64) -> (BigRational, BigRational) {
    let g = decimal_rational(gamma);
    let dd = int(d);
    let lower = if beta.is_infinite() {
        BigRational::zero()
    } else {
        &g / decimal_rational(beta)
    };
    let a = &g / &dd;
    let b = BigRational::one() - &a;
    let upper = if a < b { a } else { b };
    (lower, upper)
}

/// Feasibility: pass iff `β > d` and `γ < dβ/(d + β)`; on pass the
/// feasible open δ-interval and its midpoint.
pub fn check_corollary1(d: usize, beta: f64, gamma: f64) -> Result<ConditionReport> {
    if d == 0 {
        return Err(Error::arg("d", "must be at least 1"));
    }
    positive("beta", beta)?;
    positive("gamma", gamma)?;
    if !gamma.is_finite() {
        return Err(Error::arg("gamma", "must be finite"));
    }
    let dd = int(d);
    let g = decimal_rational(gamma);
    let (beta_ok, gamma_ok, gamma_max) = if beta.is_infinite() {
        (true, g < dd, d as f64)
    } else {
        let b = decimal_rational(beta);
        let bound = &dd * &b / (&dd + &b);
        (b > dd, g < bound, to_f64(&bound))
    };
    let (lower, upper) = corollary1_window(d, beta, gamma);
    let nonempty = lower < upper;
    debug_assert_eq!(nonempty, beta_ok && gamma_ok);
    let verdict = if beta_ok && gamma_ok { Verdict::Pass } else { Verdict::Fail };
    let mut rep = ConditionReport::new("corollary1", verdict);
    rep.sub_verdicts
        .insert("beta_gt_d".into(), if beta_ok { Verdict::Pass } else { Verdict::Fail });
    rep.sub_verdicts.insert(
        "gamma_lt_d_beta_over_d_plus_beta".into(),
        if gamma_ok { Verdict::Pass } else { Verdict::Fail },
    );
    rep.diagnostics.insert("d".into(), d as f64);
    rep.diagnostics.insert("beta".into(), beta);
    rep.diagnostics.insert("gamma".into(), gamma);
    rep.thresholds.insert("gamma_max".into(), gamma_max);
    rep.thresholds.insert("beta_min".into(), d as f64);
    rep.diagnostics.insert("window_lower".into(), to_f64(&lower));
    rep.diagnostics.insert("window_upper".into(), to_f64(&upper));
    if nonempty {
        let mid = (&lower + &upper) / int(2);
        rep.delta_interval = Some(DeltaInterval {
            lower: to_f64(&lower),
            upper: to_f64(&upper),
            midpoint: to_f64(&mid),
        });
    } else {
        rep.notes.push(format!(
            "no feasible delta: lower end {} is not below upper end {}",
            to_f64(&lower),
            to_f64(&upper)
        ));
    }
    Ok(rep)
}

/// Hallin et al. condition under `b_n = n^{-γ}`, reported next to the
/// weaker power-decay regime `q > 3d/2`, `γ < d(q - d/2)/(q + d/2)`.
pub fn check_hallin(d: usize, q: f64, gamma: f64) -> Result<ConditionReport> {
    if d == 0 {
        return Err(Error::arg("d", "must be at least 1"));
    }
    positive("q", q)?;
    positive("gamma", gamma)?;
    let dd = int(d);
    let qq = decimal_rational(q);
    let g = decimal_rational(gamma);
    let two = int(2);
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));

    let q_min_hallin = {
        let a = &dd + int(3);
        let b = &two * &dd + &half;
        if a > b {
            a
        } else {
            b
        }
    };
    let q_ok = qq > q_min_hallin;
    let denom = &two * &qq - BigRational::one() - int(4) * &dd;
    let numer = &two * &qq - BigRational::one() + int(6) * &dd;
    let mut rep = ConditionReport::new("hallin", Verdict::Fail);
    rep.thresholds.insert("hallin_q_min".into(), to_f64(&q_min_hallin));
    let hallin_gamma_ok = if denom.is_positive() {
        let gamma_max = &dd * &denom / &numer;
        rep.thresholds.insert("hallin_gamma_max".into(), to_f64(&gamma_max));
        g < gamma_max
    } else {
        rep.notes.push(format!(
            "2q - 1 - 4d = {} is not positive: the Hallin bandwidth exponent is undefined",
            to_f64(&denom)
        ));
        false
    };
    let hallin = if q_ok && hallin_gamma_ok { Verdict::Pass } else { Verdict::Fail };

    let paper_q_min = int(3) * &dd / &two;
    let paper_q_ok = qq > paper_q_min;
    let d_half = &dd / &two;
    let paper_gamma_max = &dd * (&qq - &d_half) / (&qq + &d_half);
    let paper_gamma_ok = g < paper_gamma_max;
    let paper = if paper_q_ok && paper_gamma_ok { Verdict::Pass } else { Verdict::Fail };

    rep.verdict = hallin;
    rep.sub_verdicts.insert("hallin".into(), hallin);
    rep.sub_verdicts.insert("hallin_q".into(), if q_ok { Verdict::Pass } else { Verdict::Fail });
    rep.sub_verdicts.insert("power_decay_regime".into(), paper);
    rep.thresholds.insert("power_decay_q_min".into(), to_f64(&paper_q_min));
    rep.thresholds.insert("power_decay_gamma_max".into(), to_f64(&paper_gamma_max));
    rep.diagnostics.insert("d".into(), d as f64);
    rep.diagnostics.insert("q".into(), q);
    rep.diagnostics.insert("gamma".into(), gamma);
    rep.diagnostics.insert("beta".into(), q - d as f64 / 2.0);
    Ok(rep)
}

/// `Σ_{|i|_∞ = r} |a_i|` for `r ≥ 0`.
fn shell_abs_sum(model: &CoefficientModel, r: usize) -> f64 {
    let d = model.dimension() as i32;
    match model.family() {
        Family::PowerDecay { q, scale } => {
            let count = (r as f64 + 1.0).powi(d) - (r as f64).powi(d);
            count * scale.abs() * (1.0 + r as f64).powf(-q)
        }
        Family::Geometric { ratio } => {
            // g_r^d - g_{r-1}^d = (g_r - g_{r-1}) Σ_j g_r^j g_{r-1}^{d-1-j},
            // with g_r = Σ_{j ≤ r} ρ^j and g_r - g_{r-1} = ρ^r.
            let g = |s: i64| -> f64 {
                if s < 0 {
                    0.0
                } else {
                    (1.0 - ratio.powi(s as i32 + 1)) / (1.0 - ratio)
                }
            };
            let hi = g(r as i64);
            let lo = g(r as i64 - 1);
            let mut acc = 0.0;
            for j in 0..d {
                acc += hi.powi(j) * lo.powi(d - 1 - j);
            }
            ratio.powi(r as i32) * acc
        }
        _ => {
            let ext = model.support_extents().expect("finite family");
            let mut acc = 0.0;
            for_each_in_box(&ext, |k| {
                if k.iter().copied().max().unwrap_or(0) == r {
                    acc += model.coefficient(k).abs();
                }
            });
            acc
        }
    }
}

/// Dyadic partial sums `P(R) = Σ_{|i|_∞ < R} |i|_∞^q |a_i|` for
/// `R = 1, 2, 4, …` up to `radius` (included as the last point).
fn qsum_partials(model: &CoefficientModel, q: f64, radius: usize) -> Vec<(usize, f64)> {
    let mut radii = vec![];
    let mut r = 1usize;
    while r < radius {
        radii.push(r);
        r *= 2;
    }
    radii.push(radius);
    let support = model
        .support_extents()
        .map(|e| e.iter().copied().max().unwrap_or(1));
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut shell = 0usize;
    for &target in &radii {
        while shell < target {
            if support.is_none_or(|s| shell < s) && shell > 0 {
                acc += (shell as f64).powf(q) * shell_abs_sum(model, shell);
            }
            shell += 1;
        }
        out.push((target, acc));
    }
    out
}

fn qsum_verdict(partials: &[(usize, f64)], exact: bool) -> (Verdict, f64) {
    let last = partials.last().map_or(0.0, |p| p.1);
    if exact {
        return (Verdict::Pass, 0.0);
    }
    let incs: Vec<f64> = partials.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let final_inc = incs.last().copied().unwrap_or(f64::INFINITY);
    if final_inc <= QSUM_TOLERANCE * last.abs().max(1.0) {
        return (Verdict::Pass, final_inc);
    }
    let growing = incs.len() >= 2 && incs[incs.len() - 1] >= incs[incs.len() - 2];
    (if growing { Verdict::Fail } else { Verdict::Inconclusive }, final_inc)
}

/// El Machkouri's summability `Σ |i|_∞^q |a_i| < ∞`, judged from dyadic
/// partial sums up to `radius`. Also evaluates the sum at `q = 5d/2` and
/// reports the implied decay exponent `β = q` for the feasibility check when `q > d`.
pub fn check_machkouri_qsum(
    model: &CoefficientModel,
    q: f64,
    radius: usize,
) -> Result<ConditionReport> {
    positive("q", q)?;
    if radius < 2 {
        return Err(Error::arg("radius", "must be at least 2"));
    }
    let d = model.dimension();
    let exact = model
        .support_extents()
        .is_some_and(|e| e.iter().all(|&s| s <= radius));

    let partials = qsum_partials(model, q, radius);
    let (verdict, inc) = qsum_verdict(&partials, exact);
    let mut rep = ConditionReport::new("machkouri_qsum", verdict);
    rep.diagnostics.insert("q".into(), q);
    rep.diagnostics.insert("radius".into(), radius as f64);
    rep.diagnostics.insert("partial_sum".into(), partials.last().unwrap().1);
    rep.diagnostics.insert("final_dyadic_increment".into(), inc);
    for (r, s) in &partials {
        rep.diagnostics.insert(format!("partial_sum_r{r:06}"), *s);
    }
    rep.thresholds.insert("increment_tolerance".into(), QSUM_TOLERANCE);

    let q_em = 2.5 * d as f64;
    let em_partials = qsum_partials(model, q_em, radius);
    let (em, _) = qsum_verdict(&em_partials, exact);
    rep.sub_verdicts.insert("el_machkouri_q_5d_over_2".into(), em);
    rep.diagnostics
        .insert("el_machkouri_partial_sum".into(), em_partials.last().unwrap().1);
    rep.thresholds.insert("el_machkouri_q".into(), q_em);

    let regime = if q > d as f64 { verdict } else { Verdict::Fail };
    rep.sub_verdicts.insert("q_gt_d_regime".into(), regime);
    if q > d as f64 {
        rep.thresholds
            .insert("corollary1_gamma_max".into(), d as f64 * q / (q + d as f64));
    } else {
        rep.notes.push(format!("q = {q} does not exceed d = {d}"));
    }
    if exact {
        rep.notes.push("finite support: sum is exact".into());
    }
    Ok(rep)
}

/// Trend rule for the m_n growth sequences: non-increasing over the last
/// half of the grid and final value at most `final_fraction` times the
/// initial value (or exactly zero).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRule {
    pub final_fraction: f64,
}

impl Default for TrendRule {
    fn default() -> Self {
        TrendRule { final_fraction: 0.1 }
    }
}

impl TrendRule {
    pub fn judge(&self, seq: &[f64]) -> Verdict {
        if seq.iter().any(|v| !v.is_finite()) {
            return Verdict::Inconclusive;
        }
        let last = *seq.last().expect("nonempty");
        if last == 0.0 && seq[seq.len() / 2..].iter().all(|&v| v == 0.0) {
            return Verdict::PassTrend;
        }
        let tail = &seq[(seq.len() - 1) / 2..];
        let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
        if decreasing && last <= self.final_fraction * seq[0] {
            Verdict::PassTrend
        } else {
            Verdict::Fail
        }
    }
}

/// `m_n = floor(n^δ)`, at least 1; the relative nudge keeps exact powers
/// such as `64^{1/2}` from rounding down.
pub fn m_schedule(n: usize, delta: f64) -> usize {
    (((n as f64).powf(delta)) * (1.0 + 1e-12)).floor().max(1.0) as usize
}

pub fn check_condition_c(
    model: &CoefficientModel,
    bandwidth: &BandwidthSchedule,
    delta: f64,
    n_grid: &[usize],
) -> Result<ConditionReport> {
    check_condition_c_with(model, bandwidth, delta, n_grid, TrendRule::default())
}

/// Evaluates the four m_n growth sequences along `n_grid` with
/// `m_n = floor(n^δ)`.
///
/// The verdict is `Pass` when the model's decay exponent puts `(β, γ, δ)`
/// strictly inside the feasible δ window, `PassTrend` when every
/// sequence passes the trend rule, and `Fail` otherwise.
pub fn check_condition_c_with(
    model: &CoefficientModel,
    bandwidth: &BandwidthSchedule,
    delta: f64,
    n_grid: &[usize],
    rule: TrendRule,
) -> Result<ConditionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if n_grid.len() < 3 {
        return Err(Error::arg("n_grid", "needs at least 3 points"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] < 2 {
        return Err(Error::arg("n_grid", "must be strictly increasing and start at 2 or more"));
    }
    let d = model.dimension();
    bandwidth.check_dimension(d)?;

    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let m = m_schedule(n, delta);
        let b = bandwidth.bandwidth(n);
        let f = super::coefficient_functionals(model, n, m, super::DEFAULT_TAIL_TOL)?;
        let nf = n as f64;
        let md = (m as f64).powi(d as i32);
        rows.push(ConditionCRow {
            n,
            m_n: m,
            b_n: b,
            c1_sqrt_b_delta: b.sqrt() * f.delta_n,
            c2_b_m_over_b: f.b_m / b,
            c3_m_d_b: md * b,
            c4_m_d_log_d_over_n_d_b: md * nf.ln().powi(d as i32) / (nf.powi(d as i32) * b),
        });
    }

    let seqs: [(&str, Vec<f64>); 4] = [
        ("c1_sqrt_b_delta", rows.iter().map(|r| r.c1_sqrt_b_delta).collect()),
        ("c2_b_m_over_b", rows.iter().map(|r| r.c2_b_m_over_b).collect()),
        ("c3_m_d_b", rows.iter().map(|r| r.c3_m_d_b).collect()),
        ("c4_m_d_log_d_over_n_d_b", rows.iter().map(|r| r.c4_m_d_log_d_over_n_d_b).collect()),
    ];
    let mut rep = ConditionReport::new("condition_c", Verdict::Fail);
    let mut all_trends = true;
    for (name, seq) in &seqs {
        let v = rule.judge(seq);
        all_trends &= v.is_pass();
        rep.sub_verdicts.insert(format!("trend_{name}"), v);
    }

    let beta = model.beta();
    let cor = check_corollary1(d, beta, bandwidth.gamma)?;
    let (lower, upper) = corollary1_window(d, beta, bandwidth.gamma);
    let dr = decimal_rational(delta);
    let in_window = cor.verdict == Verdict::Pass && dr > lower && dr < upper;
    rep.sub_verdicts.insert(
        "corollary1_window".into(),
        if in_window { Verdict::Pass } else { Verdict::Fail },
    );
    rep.verdict = if in_window {
        Verdict::Pass
    } else if all_trends {
        Verdict::PassTrend
    } else {
        Verdict::Fail
    };
    rep.delta_interval = cor.delta_interval.clone();
    rep.diagnostics.insert("delta".into(), delta);
    rep.diagnostics.insert("gamma".into(), bandwidth.gamma);
    rep.diagnostics.insert("c2".into(), bandwidth.c2);
    rep.diagnostics.insert("beta".into(), beta);
    rep.thresholds.insert("final_fraction".into(), rule.final_fraction);
    if model.declared_beta().is_none() {
        rep.notes.push(format!("beta taken from the {} family", model.family_name()));
    }
    if !in_window && cor.verdict == Verdict::Pass {
        rep.notes.push("delta lies outside the feasible δ window".into());
    }
    rep.grid = rows;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(
            decimal_rational(1.2),
            BigRational::new(BigInt::from(6), BigInt::from(5))
        );
        assert_eq!(decimal_rational(3.0), int(3));
        assert_eq!(
            decimal_rational(-0.25),
            BigRational::new(BigInt::from(-1), BigInt::from(4))
        );
    }

    #[test]
    fn corollary1_table() {
        let r = check_corollary1(2, 3.0, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let w = r.delta_interval.unwrap();
        assert_eq!((w.lower, w.upper), (1.0 / 3.0, 0.5));
        assert_eq!(w.midpoint, 5.0 / 12.0);
        assert_eq!(check_corollary1(1, 0.8, 0.3).unwrap().verdict, Verdict::Fail);
        assert_eq!(check_corollary1(2, 3.0, 1.3).unwrap().verdict, Verdict::Fail);
        // boundary γ = dβ/(d+β) = 6/5 fails
        assert_eq!(check_corollary1(2, 3.0, 1.2).unwrap().verdict, Verdict::Fail);
        assert_eq!(check_corollary1(2, 2.0, 0.5).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn hallin_table() {
        let r = check_hallin(1, 5.0, 0.3).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_hallin(1, 5.0, 0.4).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.sub_verdicts["power_decay_regime"], Verdict::Pass);
        let r = check_hallin(1, 3.0, 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.sub_verdicts["power_decay_regime"], Verdict::Pass);
        let r = check_hallin(2, 4.0, 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn qsum_examples() {
        let g = CoefficientModel::geometric(1, 0.5).unwrap();
        let r = check_machkouri_qsum(&g, 2.5, 128).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let direct: f64 = (1..400).map(|k| (k as f64).powf(2.5) * 0.5f64.powi(k)).sum();
        assert!((r.diagnostics["partial_sum"] - direct).abs() < 1e-10);
        let p = CoefficientModel::power_decay(1, 1.2, 1.0).unwrap();
        let r = check_machkouri_qsum(&p, 2.5, 128).unwrap();
        assert!(!r.verdict.is_pass());
        let f = CoefficientModel::finite_support(2, 3, vec![1.0; 9]).unwrap();
        let r = check_machkouri_qsum(&f, 5.0, 4).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        // shells: r=1 has 3 sites, r=2 has 5 sites
        assert_eq!(r.diagnostics["partial_sum"], 3.0 + 5.0 * 32.0);
    }

    #[test]
    fn geometric_shell_sums_match_brute_force() {
        let g = CoefficientModel::geometric(3, 0.7).unwrap();
        for r in 0..6 {
            let mut brute = 0.0;
            for_each_in_box(&[r + 1; 3], |k| {
                if k.iter().copied().max().unwrap() == r {
                    brute += g.coefficient(k);
                }
            });
            assert!((shell_abs_sum(&g, r) - brute).abs() < 1e-13 * brute.max(1.0));
        }
    }

    #[test]
    fn condition_c_examples() {
        let p = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
        let bw = BandwidthSchedule::new(1.0, 1.0).unwrap();
        let r = check_condition_c(&p, &bw, 5.0 / 12.0, &[16, 32, 64, 128]).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.grid.len(), 4);

        let id = CoefficientModel::identity(1).unwrap();
        for gamma in [0.2, 0.5] {
            let bw = BandwidthSchedule::new(1.0, gamma).unwrap();
            let r = check_condition_c(&id, &bw, gamma / 2.0, &[64, 256, 1024, 4096]).unwrap();
            assert!(r.verdict.is_pass());
            assert!(r.grid.iter().all(|row| row.c2_b_m_over_b == 0.0));
        }

        let bw = BandwidthSchedule::new(1.0, 1.3).unwrap();
        for delta in [0.3, 0.4, 0.5] {
            let r = check_condition_c(&p, &bw, delta, &[16, 32, 64, 128]).unwrap();
            assert_eq!(r.verdict, Verdict::Fail);
        }
        assert!(check_condition_c(&p, &bw, 1.0, &[16, 32, 64]).is_err());
    }
}
