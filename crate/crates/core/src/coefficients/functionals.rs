use serde::{Deserialize, Serialize};

use super::{CoefficientModel, Family};
use crate::error::{Error, Result};
use crate::lattice::{for_each_in_box, suffix_sums, Cube};
use crate::special::NeumaierSum;

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Largest `[0,n)^d` table of `A_k` built in one call.
const MAX_TABLE_LEN: usize = 1 << 26;

/// Tail functionals of a coefficient array at one `(n, m)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFunctionals {
    pub dimension: usize,
    pub n: usize,
    pub m: usize,
    /// `A_k` for `k ∈ [0,n)^d`, row-major.
    pub a_tail: Vec<f64>,
    pub a_bracket_n: f64,
    pub b_m: f64,
    pub delta_n: f64,
    /// `Σ_{k⪰0} a_k²`.
    pub sum_squares: f64,
    /// Radius `R` with `B_R ≤ tol`, i.e. the cube a direct truncation
    /// would need. Tails are evaluated analytically, not by truncation.
    pub truncation_radius: usize,
    pub tail_error_bound: f64,
}

impl CoefficientFunctionals {
    /// `A_k` for `k ∈ [0,n)^d`.
    pub fn a_k(&self, k: &[usize]) -> f64 {
        let cube = Cube {
            dim: self.dimension,
            side: self.n,
        };
        self.a_tail[cube.index(k)]
    }
}

fn sqrt_with_error(v: f64, e: f64) -> (f64, f64) {
    let root = v.max(0.0).sqrt();
    if e == 0.0 {
        return (root, 0.0);
    }
    let err = if v > 4.0 * e { e / (v - e).sqrt() } else { e.sqrt() };
    (root, err)
}

/// `A_k` over `[0,n)^d`, `A_[n]`, `B_m` and `Δ_n` for `model`.
pub fn coefficient_functionals(
    model: &CoefficientModel,
    n: usize,
    m: usize,
    tol: f64,
) -> Result<CoefficientFunctionals> {
    if n < 1 {
        return Err(Error::arg("n", "must be at least 1"));
    }
    if m < 1 {
        return Err(Error::arg("m", "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg("tol", "must be positive"));
    }
    let d = model.dimension();
    let cube = Cube::new(d, n)?;
    let len = cube.checked_len().filter(|&l| l <= MAX_TABLE_LEN).ok_or_else(|| {
        Error::ResourceCap {
            what: format!("A_k table on [0,{n})^{d}"),
            needed_bytes: (n as u128).saturating_pow(d as u32) * 8,
            cap_bytes: MAX_TABLE_LEN as u128 * 8,
        }
    })?;

    let (a_tail, a_err) = tail_table(model, cube, len);

    let mut delta = NeumaierSum::new();
    let mut delta_err = 0.0;
    let mut flat = 0usize;
    for_each_in_box(&vec![n; d], |k| {
        let w: f64 = k.iter().map(|&c| ((c + 1) as f64).sqrt()).product();
        delta.add(a_tail[flat] / w);
        delta_err += a_err[flat] / w;
        flat += 1;
    });

    let mut a_bracket = 0.0f64;
    let mut bracket_err = 0.0f64;
    for tau in 0..d {
        let mut k = vec![1usize; d];
        k[tau] = n;
        let (v, e) = sqrt_with_error_pair(model.tail_sq(&k));
        if v > a_bracket {
            a_bracket = v;
        }
        bracket_err = bracket_err.max(e);
    }

    let (b_m, b_err) = sqrt_with_error_pair(model.outer_sq(m));
    let (total, total_err) = model.tail_sq(&vec![0; d]);
    let max_a_err = a_err.iter().copied().fold(0.0, f64::max);
    let bound = max_a_err.max(bracket_err).max(b_err).max(delta_err).max(total_err);
    if bound > tol {
        return Err(Error::OracleUnavailable(format!(
            "tail error bound {bound:e} exceeds tol {tol:e}"
        )));
    }

    Ok(CoefficientFunctionals {
        dimension: d,
        n,
        m,
        a_tail,
        a_bracket_n: a_bracket,
        b_m,
        delta_n: delta.value(),
        sum_squares: total,
        truncation_radius: model.tail_radius(tol),
        tail_error_bound: bound,
    })
}

fn sqrt_with_error_pair((v, e): (f64, f64)) -> (f64, f64) {
    sqrt_with_error(v, e)
}

/// `A_k` and error bounds on `[0,n)^d`.
fn tail_table(model: &CoefficientModel, cube: Cube, len: usize) -> (Vec<f64>, Vec<f64>) {
    let d = cube.dim;
    let n = cube.side;
    match model.family() {
        Family::FiniteSupport { .. } | Family::Tabulated { .. } => {
            // Suffix sums of a² over the support box, then read off.
            let ext = model.support_extents().expect("finite family");
            let side = ext.iter().copied().max().unwrap_or(1);
            let support = Cube { dim: d, side };
            let mut sq = vec![0.0; support.len()];
            for (flat, k) in support.iter().enumerate() {
                let a = model.coefficient(&k);
                sq[flat] = a * a;
            }
            suffix_sums(support, &mut sq);
            let mut out = vec![0.0; len];
            for (flat, k) in cube.iter().enumerate() {
                if k.iter().all(|&c| c < side) {
                    out[flat] = sq[support.index(&k)].max(0.0).sqrt();
                }
            }
            (out, vec![0.0; len])
        }
        _ => {
            let mut vals = vec![0.0; len];
            let mut errs = vec![0.0; len];
            let mut flat = 0usize;
            for_each_in_box(&vec![n; d], |k| {
                let (v, e) = sqrt_with_error_pair(model.tail_sq(k));
                vals[flat] = v;
                errs[flat] = e;
                flat += 1;
            });
            (vals, errs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_model() {
        let model = CoefficientModel::identity(1).unwrap();
        let f = coefficient_functionals(&model, 10, 1, 1e-10).unwrap();
        assert_eq!(f.a_k(&[0]), 1.0);
        assert!(f.a_tail[1..].iter().all(|&a| a == 0.0));
        assert_eq!(f.b_m, 0.0);
        assert_eq!(f.delta_n, 1.0);
        assert_eq!(f.tail_error_bound, 0.0);
    }

    #[test]
    fn geometric_half() {
        let model = CoefficientModel::geometric(1, 0.5).unwrap();
        let f = coefficient_functionals(&model, 4, 1, 1e-10).unwrap();
        assert_relative_eq!(f.a_k(&[0]), 2.0 / 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(f.b_m, 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(f.a_k(&[1]), f.b_m, max_relative = 1e-14);
        assert_relative_eq!(f.sum_squares, 4.0 / 3.0, max_relative = 1e-15);
        // direct summation oracle
        let direct: f64 = (0..200).map(|k| 0.25f64.powi(k)).sum();
        assert_relative_eq!(f.sum_squares, direct, max_relative = 1e-15);
    }

    #[test]
    fn bracket_uses_ones_off_axis() {
        let model = CoefficientModel::geometric(2, 0.5).unwrap();
        let f = coefficient_functionals(&model, 3, 1, 1e-10).unwrap();
        // Σ_{i ⪰ (3,1)} 4^{-|i|_1} = 4^{-4}·(4/3)²
        assert_relative_eq!(f.a_bracket_n, (4f64.powi(-4) * 16.0 / 9.0).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_zero_sizes() {
        let model = CoefficientModel::identity(1).unwrap();
        assert!(coefficient_functionals(&model, 0, 1, 1e-10).is_err());
        assert!(coefficient_functionals(&model, 1, 0, 1e-10).is_err());
    }
}
