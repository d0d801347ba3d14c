//! Coefficient families on the positive orthant of `Z^d`, their tail
//! functionals, and the checkers for the coefficient/bandwidth conditions.

mod conditions;
mod functionals;

pub use conditions::{
    m_schedule,
    check_condition_c, check_condition_c_with, check_corollary1, check_hallin,
    check_machkouri_qsum, ConditionCRow, ConditionReport, DeltaInterval, TrendRule, Verdict,
    QSUM_TOLERANCE,
};
pub use functionals::{coefficient_functionals, CoefficientFunctionals, DEFAULT_TAIL_TOL};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::for_each_in_box;
use crate::special::hurwitz_zeta;

/// Rule `k ↦ a_k` for `k ⪰ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `a_k = scale · (1 + |k|_∞)^{-q}`.
    PowerDecay {
        q: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `a_k = ratio^{k_1 + … + k_d}`.
    Geometric { ratio: f64 },
    /// Row-major values on the cube `[0, side)^d`, zero outside.
    FiniteSupport { side: usize, values: Vec<f64> },
    /// Row-major values on the box `[0, extents_1) × … × [0, extents_d)`.
    Tabulated { extents: Vec<usize>, values: Vec<f64> },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelDocument {
    dimension: usize,
    #[serde(flatten)]
    family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
}

/// A validated causal coefficient array with optional decay metadata
/// (`A_[n] ≤ c1 · n^{-β}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct CoefficientModel {
    dimension: usize,
    family: Family,
    beta: Option<f64>,
    c1: Option<f64>,
}

impl TryFrom<ModelDocument> for CoefficientModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let model = CoefficientModel {
            dimension: doc.dimension,
            family: doc.family,
            beta: None,
            c1: None,
        };
        model.validate()?;
        model.with_decay(doc.beta, doc.c1)
    }
}

impl From<CoefficientModel> for ModelDocument {
    fn from(m: CoefficientModel) -> Self {
        ModelDocument {
            dimension: m.dimension,
            family: m.family,
            beta: m.beta,
            c1: m.c1,
        }
    }
}

impl CoefficientModel {
    pub fn new(dimension: usize, family: Family) -> Result<Self> {
        let model = CoefficientModel {
            dimension,
            family,
            beta: None,
            c1: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn power_decay(dimension: usize, q: f64, scale: f64) -> Result<Self> {
        Self::new(dimension, Family::PowerDecay { q, scale })
    }

    pub fn geometric(dimension: usize, ratio: f64) -> Result<Self> {
        Self::new(dimension, Family::Geometric { ratio })
    }

    pub fn finite_support(dimension: usize, side: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(dimension, Family::FiniteSupport { side, values })
    }

    pub fn tabulated(extents: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(extents.len(), Family::Tabulated { extents, values })
    }

    /// `a_0 = 1` and zero elsewhere: the i.i.d. field.
    pub fn identity(dimension: usize) -> Result<Self> {
        Self::finite_support(dimension, 1, vec![1.0])
    }

    /// Attach declared decay metadata.
    pub fn with_decay(mut self, beta: Option<f64>, c1: Option<f64>) -> Result<Self> {
        if let Some(b) = beta {
            if !(b > 0.0) {
                return Err(Error::InvalidModel(format!("beta must be positive, got {b}")));
            }
        }
        if let Some(c) = c1 {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidModel(format!("c1 must be positive, got {c}")));
            }
        }
        self.beta = beta;
        self.c1 = c1;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        match &self.family {
            Family::PowerDecay { q, scale } => {
                if !q.is_finite() || *q <= d as f64 / 2.0 {
                    return Err(Error::InvalidModel(format!(
                        "power decay with q = {q} is not square summable in d = {d} (need q > d/2)"
                    )));
                }
                if !scale.is_finite() {
                    return Err(Error::InvalidModel("scale must be finite".into()));
                }
            }
            Family::Geometric { ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "geometric ratio must lie in (0, 1), got {ratio}"
                    )));
                }
            }
            Family::FiniteSupport { side, values } => {
                if *side == 0 {
                    return Err(Error::InvalidModel("finite support side must be >= 1".into()));
                }
                let expected = side.checked_pow(d as u32).ok_or_else(|| {
                    Error::InvalidModel(format!("support {side}^{d} overflows"))
                })?;
                if values.len() != expected {
                    return Err(Error::InvalidModel(format!(
                        "finite support {side}^{d} needs {expected} values, got {}",
                        values.len()
                    )));
                }
                check_finite(values)?;
            }
            Family::Tabulated { extents, values } => {
                if extents.len() != d || extents.contains(&0) {
                    return Err(Error::InvalidModel(format!(
                        "tabulated extents {extents:?} must have {d} positive entries"
                    )));
                }
                let expected: usize = extents.iter().product();
                if values.len() != expected {
                    return Err(Error::InvalidModel(format!(
                        "tabulated extents {extents:?} need {expected} values, got {}",
                        values.len()
                    )));
                }
                check_finite(values)?;
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::PowerDecay { .. } => "power_decay",
            Family::Geometric { .. } => "geometric",
            Family::FiniteSupport { .. } => "finite_support",
            Family::Tabulated { .. } => "tabulated",
        }
    }

    /// Short stable identifier derived from the canonical JSON document.
    pub fn id(&self) -> String {
        let doc = serde_json::to_vec(&ModelDocument::from(self.clone()))
            .expect("coefficient model serializes");
        let digest = Sha256::digest(&doc);
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.family_name())
    }

    /// Decay exponent with `A_[n] ≤ c1 n^{-β}`: the declared value, or the
    /// family's own (`q - d/2` for power decay, `+∞` for geometric and
    /// finite families).
    pub fn beta(&self) -> f64 {
        if let Some(b) = self.beta {
            return b;
        }
        match self.family {
            Family::PowerDecay { q, .. } => q - self.dimension as f64 / 2.0,
            _ => f64::INFINITY,
        }
    }

    pub fn declared_beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn declared_c1(&self) -> Option<f64> {
        self.c1
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(
            self.family,
            Family::FiniteSupport { .. } | Family::Tabulated { .. }
        )
    }

    /// Per-axis extents of the support box for finite families.
    pub fn support_extents(&self) -> Option<Vec<usize>> {
        match &self.family {
            Family::FiniteSupport { side, .. } => Some(vec![*side; self.dimension]),
            Family::Tabulated { extents, .. } => Some(extents.clone()),
            _ => None,
        }
    }

    /// `a_k` for `k ⪰ 0`.
    pub fn coefficient(&self, k: &[usize]) -> f64 {
        debug_assert_eq!(k.len(), self.dimension);
        match &self.family {
            Family::PowerDecay { q, scale } => {
                let r = k.iter().copied().max().unwrap_or(0);
                scale * (1.0 + r as f64).powf(-q)
            }
            Family::Geometric { ratio } => {
                let total: usize = k.iter().sum();
                ratio.powf(total as f64)
            }
            Family::FiniteSupport { side, values } => {
                if k.iter().any(|&c| c >= *side) {
                    return 0.0;
                }
                values[k.iter().fold(0, |acc, &c| acc * side + c)]
            }
            Family::Tabulated { extents, values } => {
                if k.iter().zip(extents).any(|(&c, &e)| c >= e) {
                    return 0.0;
                }
                values[k.iter().zip(extents).fold(0, |acc, (&c, &e)| acc * e + c)]
            }
        }
    }

    /// `a_k` for a signed index; zero outside the positive orthant.
    pub fn coefficient_signed(&self, k: &[i64]) -> f64 {
        if k.iter().any(|&c| c < 0) {
            return 0.0;
        }
        let k: Vec<usize> = k.iter().map(|&c| c as usize).collect();
        self.coefficient(&k)
    }

    /// Coefficients on the cube `[0, side)^d`, row-major.
    pub fn coefficient_cube(&self, side: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(side.pow(self.dimension as u32));
        for_each_in_box(&vec![side; self.dimension], |k| out.push(self.coefficient(k)));
        out
    }

    /// `Σ_{i ⪰ k} a_i²` with an absolute error bound.
    pub(crate) fn tail_sq(&self, k: &[usize]) -> (f64, f64) {
        match &self.family {
            Family::PowerDecay { q, scale } => {
                let r0 = k.iter().copied().max().unwrap_or(0);
                let (s, e) = radial_tail_unit(*q, k, r0);
                (scale * scale * s, scale * scale * e)
            }
            Family::Geometric { ratio } => {
                let r2 = ratio * ratio;
                let total: usize = k.iter().sum();
                let v = r2.powf(total as f64) / (1.0 - r2).powi(self.dimension as i32);
                (v, 4.0 * f64::EPSILON * v)
            }
            Family::FiniteSupport { .. } | Family::Tabulated { .. } => {
                let extents = self.support_extents().expect("finite family");
                if k.iter().zip(&extents).any(|(&c, &e)| c >= e) {
                    return (0.0, 0.0);
                }
                let rest: Vec<usize> = extents.iter().zip(k).map(|(&e, &c)| e - c).collect();
                let mut acc = 0.0;
                for_each_in_box(&rest, |off| {
                    let idx: Vec<usize> = off.iter().zip(k).map(|(&o, &c)| o + c).collect();
                    let a = self.coefficient(&idx);
                    acc += a * a;
                });
                (acc, 0.0)
            }
        }
    }

    /// `Σ_{|i|_∞ ≥ m} a_i²` with an absolute error bound.
    pub(crate) fn outer_sq(&self, m: usize) -> (f64, f64) {
        let d = self.dimension as i32;
        match &self.family {
            Family::PowerDecay { q, scale } => {
                let zero = vec![0usize; self.dimension];
                let (s, e) = radial_tail_unit(*q, &zero, m);
                (scale * scale * s, scale * scale * e)
            }
            Family::Geometric { ratio } => {
                let r2 = ratio * ratio;
                let total = (1.0 - r2).powi(-d);
                // 1 - (1 - r^{2m})^d without cancellation.
                let t = r2.powf(m as f64);
                let frac = -(d as f64 * (-t).ln_1p()).exp_m1();
                let v = total * frac;
                (v, 8.0 * f64::EPSILON * v)
            }
            Family::FiniteSupport { .. } | Family::Tabulated { .. } => {
                let extents = self.support_extents().expect("finite family");
                let mut acc = 0.0;
                for_each_in_box(&extents, |k| {
                    if k.iter().copied().max().unwrap_or(0) >= m {
                        let a = self.coefficient(k);
                        acc += a * a;
                    }
                });
                (acc, 0.0)
            }
        }
    }

    /// `Σ_{k ⪰ 0} a_k²`, the marginal variance of the field under unit
    /// variance innovations.
    pub fn sum_squares(&self) -> f64 {
        self.tail_sq(&vec![0; self.dimension]).0
    }

    /// `Σ_{k ∈ [0,m)^d} a_k²`.
    pub fn sum_squares_box(&self, m: usize) -> f64 {
        match &self.family {
            Family::PowerDecay { q, scale } => {
                let d = self.dimension as i32;
                let mut acc = 0.0;
                for r in (0..m).rev() {
                    let shell = (r as f64 + 1.0).powi(d) - (r as f64).powi(d);
                    acc += shell * (1.0 + r as f64).powf(-2.0 * q);
                }
                scale * scale * acc
            }
            Family::Geometric { ratio } => {
                let r2 = ratio * ratio;
                ((1.0 - r2.powf(m as f64)) / (1.0 - r2)).powi(self.dimension as i32)
            }
            _ => {
                let mut acc = 0.0;
                let extents: Vec<usize> = self
                    .support_extents()
                    .expect("finite family")
                    .iter()
                    .map(|&e| e.min(m))
                    .collect();
                for_each_in_box(&extents, |k| {
                    let a = self.coefficient(k);
                    acc += a * a;
                });
                acc
            }
        }
    }

    /// `B_m = (Σ_{|i|_∞ ≥ m} a_i²)^{1/2}`.
    pub fn outer_norm(&self, m: usize) -> f64 {
        self.outer_sq(m).0.max(0.0).sqrt()
    }

    /// Smallest `R ≥ 1` with `B_R ≤ tol`.
    pub fn tail_radius(&self, tol: f64) -> usize {
        if let Some(ext) = self.support_extents() {
            // B_R = 0 once R covers the support.
            let side = ext.iter().copied().max().unwrap_or(1);
            return (1..=side).find(|&r| self.outer_norm(r) <= tol).unwrap_or(side);
        }
        let mut hi = 1usize;
        while self.outer_norm(hi) > tol {
            if hi >= usize::MAX / 4 {
                return usize::MAX;
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        if lo == 0 {
            return 1;
        }
        // outer_norm(lo) > tol ≥ outer_norm(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.outer_norm(mid) <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Lag covariance `Σ_{k ⪰ 0, k + lag ⪰ 0} a_k a_{k+lag}` of the field
    /// under unit-variance innovations, with an absolute error bound.
    pub fn autocovariance(&self, lag: &[i64], tol: f64) -> (f64, f64) {
        assert_eq!(lag.len(), self.dimension);
        match &self.family {
            Family::Geometric { ratio } => {
                let r2 = ratio * ratio;
                let v = lag
                    .iter()
                    .map(|&l| ratio.powf(l.unsigned_abs() as f64) / (1.0 - r2))
                    .product::<f64>();
                (v, 4.0 * f64::EPSILON * v.abs())
            }
            Family::PowerDecay { .. } => {
                let reach = lag.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0);
                // Terms with |k|_∞ ≥ L pair with |k + lag|_∞ ≥ L - reach, so
                // Cauchy–Schwarz bounds the remainder by B_L · B_{L-reach}.
                let mut side = reach + 1;
                let cap = box_cap(self.dimension);
                loop {
                    let bound = self.outer_norm(side) * self.outer_norm(side.saturating_sub(reach));
                    if bound <= tol || side >= cap {
                        let value = self.lag_sum_box(lag, side);
                        return (value, bound);
                    }
                    side *= 2;
                }
            }
            _ => {
                let ext = self.support_extents().expect("finite family");
                let side = ext.iter().copied().max().unwrap_or(1);
                (self.lag_sum_box(lag, side), 0.0)
            }
        }
    }

    /// `Σ_{k ∈ [0,side)^d, k ⪰ max(0,-lag)} a_k a_{k+lag}`.
    pub(crate) fn lag_sum_box(&self, lag: &[i64], side: usize) -> f64 {
        let d = self.dimension;
        let start: Vec<usize> = lag.iter().map(|&l| if l < 0 { (-l) as usize } else { 0 }).collect();
        if start.iter().any(|&s| s >= side) {
            return 0.0;
        }
        let extents: Vec<usize> = start.iter().map(|&s| side - s).collect();
        let mut acc = 0.0;
        let mut k = vec![0usize; d];
        let mut j = vec![0usize; d];
        for_each_in_box(&extents, |off| {
            for t in 0..d {
                k[t] = off[t] + start[t];
                j[t] = (k[t] as i64 + lag[t]) as usize;
            }
            acc += self.coefficient(&k) * self.coefficient(&j);
        });
        acc
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel("coefficient values must be finite".into()));
    }
    Ok(())
}

/// Upper bound on box side for brute-force lag sums, keeping the box
/// below ~5e7 sites.
fn box_cap(dimension: usize) -> usize {
    (5.0e7f64).powf(1.0 / dimension as f64) as usize
}

/// For `a_i = (1 + |i|_∞)^{-q}`: `Σ_{i ⪰ k, |i|_∞ ≥ r0} a_i²` with
/// `r0 ≥ max k`.
///
/// The number of `i ⪰ k` on the shell `|i|_∞ = r` is
/// `Π(r - k_τ + 1) - Π(r - k_τ)`, a polynomial of degree `d - 1` in
/// `u = r + 1`, so the sum is a finite combination of Hurwitz zeta values
/// `ζ(2q - j, r0 + 1)`; `q > d/2` makes every one of them converge.
pub(crate) fn radial_tail_unit(q: f64, k: &[usize], r0: usize) -> (f64, f64) {
    let r0 = r0.max(k.iter().copied().max().unwrap_or(0));
    let weights = shell_count_polynomial(k);
    let a = r0 as f64 + 1.0;
    let mut value = 0.0;
    let mut magnitude = 0.0;
    let mut series_err = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (z, e) = hurwitz_zeta(2.0 * q - j as f64, a);
        value += w * z;
        magnitude += (w * z).abs();
        series_err += (w * e).abs();
    }
    let rounding = 16.0 * f64::EPSILON * magnitude;
    (value.max(0.0), series_err + rounding)
}

/// Coefficients (ascending powers of `u = r + 1`) of
/// `Π_τ (u - k_τ) - Π_τ (u - k_τ - 1)`.
fn shell_count_polynomial(k: &[usize]) -> Vec<f64> {
    let mut upper = vec![1.0];
    let mut lower = vec![1.0];
    for &c in k {
        upper = poly_mul_linear(&upper, -(c as f64));
        lower = poly_mul_linear(&lower, -(c as f64) - 1.0);
    }
    let mut diff: Vec<f64> = upper.iter().zip(&lower).map(|(a, b)| a - b).collect();
    // leading u^d terms cancel exactly
    diff.pop();
    diff
}

/// Multiply polynomial `p` (ascending coefficients) by `(u + c)`.
fn poly_mul_linear(p: &[f64], c: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &a) in p.iter().enumerate() {
        out[i] += a * c;
        out[i + 1] += a;
    }
    out
}
