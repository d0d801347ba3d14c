use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `b_n = c2 · n^{-γ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct BandwidthSchedule {
    pub c2: f64,
    pub gamma: f64,
}

#[derive(Deserialize)]
struct RawSchedule {
    #[serde(default = "one")]
    c2: f64,
    gamma: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawSchedule> for BandwidthSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        BandwidthSchedule::new(raw.c2, raw.gamma)
    }
}

impl BandwidthSchedule {
    pub fn new(c2: f64, gamma: f64) -> Result<Self> {
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::arg("c2", format!("must be positive, got {c2}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::arg("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(BandwidthSchedule { c2, gamma })
    }

    /// Checks `γ < d`, which gives `n^d b_n → ∞`.
    pub fn check_dimension(&self, d: usize) -> Result<()> {
        if self.gamma >= d as f64 {
            return Err(Error::arg(
                "gamma",
                format!("must be below the dimension {d}, got {}", self.gamma),
            ));
        }
        Ok(())
    }

    pub fn bandwidth(&self, n: usize) -> f64 {
        self.c2 * (n as f64).powf(-self.gamma)
    }
}
