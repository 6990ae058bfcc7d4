use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear power in milliwatts.
///
/// Slots have unit duration, so the same quantity doubles as per-slot
/// energy in the battery recursion.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerQuantity(f64);

impl PowerQuantity {
    pub const ZERO: PowerQuantity = PowerQuantity(0.0);

    pub fn from_mw(mw: f64) -> Result<Self> {
        if !mw.is_finite() || mw < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "power must be finite and non-negative, got {mw} mW"
            )));
        }
        Ok(PowerQuantity(mw))
    }

    pub fn from_dbm(dbm: f64) -> Self {
        dbm_to_mw(dbm)
    }

    #[inline]
    pub fn mw(self) -> f64 {
        self.0
    }

    pub fn dbm(self) -> f64 {
        mw_to_dbm(self)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// Multiplies in the linear domain (`2 x H_e` doubles the milliwatts).
    pub fn scaled(self, factor: f64) -> Result<Self> {
        PowerQuantity::from_mw(self.0 * factor)
    }
}

impl TryFrom<f64> for PowerQuantity {
    type Error = Error;

    fn try_from(mw: f64) -> Result<Self> {
        PowerQuantity::from_mw(mw)
    }
}

impl From<PowerQuantity> for f64 {
    fn from(p: PowerQuantity) -> f64 {
        p.0
    }
}

impl fmt::Display for PowerQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mW", self.0)
    }
}

/// `10^(x/10)` milliwatts. Panics if the result is not finite.
pub fn dbm_to_mw(dbm: f64) -> PowerQuantity {
    let mw = 10f64.powf(dbm / 10.0);
    assert!(mw.is_finite(), "dBm value {dbm} does not map to a finite power");
    PowerQuantity(mw)
}

/// Inverse of [`dbm_to_mw`]; zero power maps to negative infinity.
pub fn mw_to_dbm(p: PowerQuantity) -> f64 {
    10.0 * p.0.log10()
}
