use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Symmetric probability kernel `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelModel {
    /// `¾(1 - u²)` on `[-1, 1]`.
    #[default]
    Epanechnikov,
    Gaussian,
    /// `1 - |u|` on `[-1, 1]`.
    Triangular,
}

impl KernelModel {
    pub fn name(&self) -> &'static str {
        match self {
            KernelModel::Epanechnikov => "epanechnikov",
            KernelModel::Gaussian => "gaussian",
            KernelModel::Triangular => "triangular",
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            KernelModel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelModel::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KernelModel::Triangular => (1.0 - u.abs()).max(0.0),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            KernelModel::Epanechnikov => 1.5,
            // sup |φ'| = φ(1)
            KernelModel::Gaussian => (-0.5f64).exp() / (2.0 * PI).sqrt(),
            KernelModel::Triangular => 1.0,
        }
    }

    pub fn sup(&self) -> f64 {
        self.eval(0.0)
    }

    /// `∫K²`.
    pub fn roughness(&self) -> f64 {
        match self {
            KernelModel::Epanechnikov => 0.6,
            KernelModel::Gaussian => 0.5 / PI.sqrt(),
            KernelModel::Triangular => 2.0 / 3.0,
        }
    }

    /// `∫K³`.
    pub fn third_power_integral(&self) -> f64 {
        match self {
            KernelModel::Epanechnikov => 2.0 * 0.421_875 * 16.0 / 35.0,
            KernelModel::Gaussian => 1.0 / (2.0 * PI * 3f64.sqrt()),
            KernelModel::Triangular => 0.5,
        }
    }

    /// `∫|u| K(u) du`.
    pub fn abs_first_moment(&self) -> f64 {
        match self {
            KernelModel::Epanechnikov => 0.375,
            KernelModel::Gaussian => (2.0 / PI).sqrt(),
            KernelModel::Triangular => 1.0 / 3.0,
        }
    }

    /// Half-width of the support; infinite for the Gaussian kernel.
    pub fn support_radius(&self) -> f64 {
        match self {
            KernelModel::Gaussian => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Finite interval carrying all mass up to below `1e-20`, with the
    /// interior points where `K` is not smooth.
    pub(crate) fn integration_breaks(&self) -> &'static [f64] {
        match self {
            KernelModel::Gaussian => &[-10.0, 0.0, 10.0],
            _ => &[-1.0, 0.0, 1.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::quad::integrate_pieces;

    const ALL: [KernelModel; 3] = [
        KernelModel::Epanechnikov,
        KernelModel::Gaussian,
        KernelModel::Triangular,
    ];

    #[test]
    fn integrals_match_quadrature() {
        for k in ALL {
            let br = k.integration_breaks();
            let mass = integrate_pieces(|u| k.eval(u), br, 1e-13);
            assert!((mass - 1.0).abs() < 1e-10, "{k:?} mass {mass}");
            let r = integrate_pieces(|u| k.eval(u).powi(2), br, 1e-14);
            assert!((r - k.roughness()).abs() < 1e-12, "{k:?} roughness {r}");
            let r3 = integrate_pieces(|u| k.eval(u).powi(3), br, 1e-14);
            assert!((r3 - k.third_power_integral()).abs() < 1e-12);
            let a = integrate_pieces(|u| u.abs() * k.eval(u), br, 1e-14);
            assert!((a - k.abs_first_moment()).abs() < 1e-11);
        }
    }

    #[test]
    fn lipschitz_on_grid() {
        for k in ALL {
            let l = k.lipschitz();
            let h = 1e-3;
            let mut u = -3.0;
            while u < 3.0 {
                assert!((k.eval(u + h) - k.eval(u)).abs() <= l * h * (1.0 + 1e-9));
                assert!(k.eval(u) >= 0.0);
                u += h;
            }
        }
    }
}
