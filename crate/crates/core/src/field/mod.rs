//! Causal linear random fields, their m-truncations and residuals,
//! generated on shared innovations.

mod conv;
mod diagnostics;
mod io;

pub use conv::{lattice_convolve, resolve_method, smooth_size, ConvMethod};
pub use diagnostics::{field_moment_diagnostics, FieldDiagnostics, LagDiagnostic};
pub use io::{read_field_binary, write_field_binary, write_field_csv, CSV_MAX_SIDE, FIELD_MAGIC};

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::innovations::{InnovationModel, SeedSpec};
use crate::lattice::Cube;

/// Default memory cap for one coupled generation call.
pub const DEFAULT_MAX_LATTICE_BYTES: u128 = 4 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldComponent {
    Full,
    Truncated,
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldProvenance {
    pub coefficient_model_id: String,
    pub truncation_radius: usize,
    pub m: usize,
    pub component: FieldComponent,
    pub innovation_model_id: String,
    pub seed: SeedSpec,
}

/// Values `X_i` on `[1,n]^d`, stored row-major (index `i - 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub dimension: usize,
    pub side: usize,
    pub values: Vec<f64>,
    pub provenance: FieldProvenance,
}

impl LatticeField {
    pub fn new(dimension: usize, side: usize, values: Vec<f64>, provenance: FieldProvenance) -> Result<Self> {
        let cube = Cube::new(dimension, side)?;
        if values.len() != cube.len() {
            return Err(Error::ShapeMismatch(format!(
                "{side}^{dimension} field needs {} values, got {}",
                cube.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at flat index {pos}")));
        }
        Ok(LatticeField {
            dimension,
            side,
            values,
            provenance,
        })
    }

    pub fn cube(&self) -> Cube {
        Cube {
            dim: self.dimension,
            side: self.side,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `X`, `X_m` and `X̃_m = X - X_m` built from one innovation lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledFields {
    pub full: LatticeField,
    pub truncated: LatticeField,
    pub residual: LatticeField,
}

impl CoupledFields {
    /// `max_i |X_i - (X_{i,m} + X̃_{i,m})|`.
    pub fn coupling_defect(&self) -> f64 {
        self.full
            .values
            .iter()
            .zip(&self.truncated.values)
            .zip(&self.residual.values)
            .map(|((x, t), r)| (x - (t + r)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TruncationPolicy {
    Fixed { radius: usize },
    /// Smallest `M` with `B_M ≤ η b_n`, and at least `m`.
    BandwidthRelative {
        #[serde(default = "default_eta")]
        eta: f64,
    },
}

fn default_eta() -> f64 {
    0.01
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::BandwidthRelative { eta: default_eta() }
    }
}

/// Global truncation radius of the generating sum and its certified
/// tail `B_M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPlan {
    pub radius: usize,
    pub tail_bound: f64,
    pub policy: TruncationPolicy,
}

impl TruncationPlan {
    pub fn fixed(model: &CoefficientModel, radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::arg("radius", "must be at least 1"));
        }
        Ok(TruncationPlan {
            radius,
            tail_bound: model.outer_norm(radius),
            policy: TruncationPolicy::Fixed { radius },
        })
    }

    pub fn bandwidth_relative(model: &CoefficientModel, b: f64, eta: f64, m: usize) -> Result<Self> {
        if !(eta > 0.0) || !(b > 0.0) {
            return Err(Error::arg("eta", "eta and the bandwidth must be positive"));
        }
        let radius = model.tail_radius(eta * b).max(m).max(1);
        Ok(TruncationPlan {
            radius,
            tail_bound: model.outer_norm(radius),
            policy: TruncationPolicy::BandwidthRelative { eta },
        })
    }

    pub fn resolve(policy: TruncationPolicy, model: &CoefficientModel, b: f64, m: usize) -> Result<Self> {
        match policy {
            TruncationPolicy::Fixed { radius } => Self::fixed(model, radius),
            TruncationPolicy::BandwidthRelative { eta } => Self::bandwidth_relative(model, b, eta, m),
        }
    }
}

/// Bytes held at peak by [`generate_coupled_fields`].
pub fn coupled_footprint_bytes(dim: usize, n: usize, radius: usize, method: ConvMethod) -> u128 {
    let big = (n + radius - 1) as u128;
    let d = dim as u32;
    let mut bytes = 8 * big.saturating_pow(d) + 8 * 3 * (n as u128).saturating_pow(d)
        + 8 * (radius as u128).saturating_pow(d);
    if method != ConvMethod::Direct {
        let p = smooth_size(n + radius - 1) as u128;
        bytes += 2 * 16 * p.saturating_pow(d);
    }
    bytes
}

/// Generates `X` with coefficients on `[0,M)^d` and `X_m` with
/// coefficients on `[0,m)^d` from one innovation lattice of side
/// `n + M - 1`, drawn row-major from `seed`.
pub fn generate_coupled_fields(
    model: &CoefficientModel,
    innovations: &InnovationModel,
    n: usize,
    m: usize,
    plan: &TruncationPlan,
    seed: SeedSpec,
    method: ConvMethod,
    max_bytes: u128,
) -> Result<CoupledFields> {
    innovations.validate()?;
    if n < 1 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if m < 1 {
        return Err(Error::arg("m", "must be at least 1"));
    }
    let radius = plan.radius;
    if m > radius {
        return Err(Error::TruncationExceedsRadius { m, radius });
    }
    let d = model.dimension();
    let needed = coupled_footprint_bytes(d, n, radius, method);
    if needed > max_bytes {
        return Err(Error::ResourceCap {
            what: format!("coupled field generation with n = {n}, M = {radius}, d = {d}"),
            needed_bytes: needed,
            cap_bytes: max_bytes,
        });
    }
    let big = n + radius - 1;
    let in_cube = Cube::new(d, big)?;
    let mut eps = vec![0.0; in_cube.len()];
    innovations.fill(&mut seed.rng(), &mut eps);

    let coeffs = model.coefficient_cube(radius);
    let full = lattice_convolve(d, &eps, big, &coeffs, radius, method)?;

    let small_coeffs = model.coefficient_cube(m);
    let truncated = if m == radius {
        full.clone()
    } else {
        let sub_side = n + m - 1;
        let offset = radius - m;
        let sub_cube = Cube { dim: d, side: sub_side };
        let mut sub = vec![0.0; sub_cube.len()];
        let mut j = vec![0usize; d];
        for (flat, k) in sub_cube.iter().enumerate() {
            for t in 0..d {
                j[t] = k[t] + offset;
            }
            sub[flat] = eps[in_cube.index(&j)];
        }
        drop(eps);
        lattice_convolve(d, &sub, sub_side, &small_coeffs, m, method)?
    };
    let residual: Vec<f64> = full.iter().zip(&truncated).map(|(x, t)| x - t).collect();

    let prov = |component| FieldProvenance {
        coefficient_model_id: model.id(),
        truncation_radius: radius,
        m,
        component,
        innovation_model_id: innovations.id(),
        seed,
    };
    Ok(CoupledFields {
        full: LatticeField::new(d, n, full, prov(FieldComponent::Full))?,
        truncated: LatticeField::new(d, n, truncated, prov(FieldComponent::Truncated))?,
        residual: LatticeField::new(d, n, residual, prov(FieldComponent::Residual))?,
    })
}

/// Only the full field `X` on `[1,n]^d`.
pub fn generate_field(
    model: &CoefficientModel,
    innovations: &InnovationModel,
    n: usize,
    plan: &TruncationPlan,
    seed: SeedSpec,
    method: ConvMethod,
    max_bytes: u128,
) -> Result<LatticeField> {
    generate_coupled_fields(model, innovations, n, plan.radius, plan, seed, method, max_bytes)
        .map(|c| c.full)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(model: &CoefficientModel, n: usize, m: usize, radius: usize, seed: u64) -> CoupledFields {
        let plan = TruncationPlan::fixed(model, radius).unwrap();
        generate_coupled_fields(
            model,
            &InnovationModel::Gaussian,
            n,
            m,
            &plan,
            SeedSpec::new(seed, 0, 0),
            ConvMethod::Auto,
            DEFAULT_MAX_LATTICE_BYTES,
        )
        .unwrap()
    }

    #[test]
    fn identity_field_is_the_innovation_window() {
        let model = CoefficientModel::identity(2).unwrap();
        let c = gen(&model, 5, 1, 1, 3);
        let mut eps = vec![0.0; 25];
        InnovationModel::Gaussian.fill(&mut SeedSpec::new(3, 0, 0).rng(), &mut eps);
        assert_eq!(c.full.values, eps);
        assert!(c.residual.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_field_uses_the_same_innovations() {
        let model = CoefficientModel::geometric(2, 0.6).unwrap();
        let c = gen(&model, 6, 2, 5, 11);
        // rebuild X_m by brute force from the shared innovation lattice
        let big = 6 + 5 - 1;
        let mut eps = vec![0.0; big * big];
        InnovationModel::Gaussian.fill(&mut SeedSpec::new(11, 0, 0).rng(), &mut eps);
        for i in 0..6 {
            for j in 0..6 {
                let mut full = 0.0;
                let mut trunc = 0.0;
                for k0 in 0..5 {
                    for k1 in 0..5 {
                        let v = model.coefficient(&[k0, k1]) * eps[(i + 4 - k0) * big + j + 4 - k1];
                        full += v;
                        if k0 < 2 && k1 < 2 {
                            trunc += v;
                        }
                    }
                }
                assert!((c.full.values[i * 6 + j] - full).abs() < 1e-12);
                assert!((c.truncated.values[i * 6 + j] - trunc).abs() < 1e-12);
            }
        }
        assert!(c.coupling_defect() <= 1e-12);
    }

    #[test]
    fn rejects_m_above_radius_and_memory_cap() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let plan = TruncationPlan::fixed(&model, 4).unwrap();
        let err = generate_coupled_fields(
            &model,
            &InnovationModel::Gaussian,
            10,
            5,
            &plan,
            SeedSpec::default(),
            ConvMethod::Auto,
            DEFAULT_MAX_LATTICE_BYTES,
        );
        assert!(matches!(err, Err(Error::TruncationExceedsRadius { .. })));
        let model = CoefficientModel::geometric(3, 0.5).unwrap();
        let plan = TruncationPlan::fixed(&model, 8).unwrap();
        let err = generate_coupled_fields(
            &model,
            &InnovationModel::Gaussian,
            4096,
            1,
            &plan,
            SeedSpec::default(),
            ConvMethod::Auto,
            DEFAULT_MAX_LATTICE_BYTES,
        );
        assert!(matches!(err, Err(Error::ResourceCap { .. })));
    }

    #[test]
    fn bandwidth_relative_plan() {
        let model = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
        let b = 2.0 / 64.0;
        let plan = TruncationPlan::bandwidth_relative(&model, b, 0.01, 5).unwrap();
        assert!(plan.tail_bound <= 0.01 * b);
        assert!(model.outer_norm(plan.radius - 1) > 0.01 * b);
        let plan = TruncationPlan::bandwidth_relative(&model, b, 0.01, 40).unwrap();
        assert_eq!(plan.radius, 40);
    }
}
