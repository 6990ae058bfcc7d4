//! Physical-layer and energy arithmetic for the uplink.
//!
//! Every power is linear milliwatts internally. Users sharing a channel
//! transmit on orthogonal codes, so each link's SNR is interference-free.
//!
//! Two gain models coexist: the allocation phase derives gains from
//! distance path loss ([`channel_gain`]), while the power-planning phase
//! draws gains from a small Markov chain of absolute values (see
//! [`crate::mdp`]).

mod power;

pub use power::{dbm_to_mw, mw_to_dbm, PowerQuantity};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal noise floor density, dBm/Hz.
pub const NOISE_DENSITY_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: usize,
    pub bandwidth_hz: f64,
    pub pathloss_coeff: f64,
    pub noise: PowerQuantity,
}

impl ChannelSpec {
    pub fn new(id: usize, bandwidth_hz: f64, pathloss_coeff: f64, noise: PowerQuantity) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth_hz}"
            )));
        }
        if !(pathloss_coeff > 0.0 && pathloss_coeff.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "path-loss coefficient must be positive, got {pathloss_coeff}"
            )));
        }
        if noise.mw() <= 0.0 {
            return Err(Error::InvalidArgument("noise power must be positive".into()));
        }
        Ok(ChannelSpec {
            id,
            bandwidth_hz,
            pathloss_coeff,
            noise,
        })
    }

    /// Channel whose noise is the thermal floor over its bandwidth.
    pub fn thermal(id: usize, bandwidth_hz: f64, pathloss_coeff: f64) -> Result<Self> {
        let noise = noise_power(bandwidth_hz)?;
        ChannelSpec::new(id, bandwidth_hz, pathloss_coeff, noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: usize,
    pub distance_m: f64,
    pub battery_cap: PowerQuantity,
    pub threshold: PowerQuantity,
    /// Harvest amounts per chain state; the first entry is always zero.
    pub harvest_levels: Vec<PowerQuantity>,
}

impl UserSpec {
    pub fn new(
        id: usize,
        distance_m: f64,
        radius_m: f64,
        battery_cap: PowerQuantity,
        threshold: PowerQuantity,
        harvest_levels: Vec<PowerQuantity>,
    ) -> Result<Self> {
        if !(distance_m > 0.0 && distance_m <= radius_m) {
            return Err(Error::InvalidArgument(format!(
                "user {id}: distance {distance_m} m outside (0, {radius_m}]"
            )));
        }
        if !(threshold.mw() > 0.0 && threshold <= battery_cap) {
            return Err(Error::InvalidArgument(format!(
                "user {id}: threshold {threshold} must lie in (0, {battery_cap}]"
            )));
        }
        validate_harvest_levels(&harvest_levels)?;
        Ok(UserSpec {
            id,
            distance_m,
            battery_cap,
            threshold,
            harvest_levels,
        })
    }
}

pub(crate) fn validate_harvest_levels(levels: &[PowerQuantity]) -> Result<()> {
    match levels.first() {
        None => return Err(Error::InvalidArgument("harvest levels must not be empty".into())),
        Some(first) if !first.is_zero() => {
            return Err(Error::InvalidArgument("first harvest level must be zero".into()))
        }
        _ => {}
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "harvest levels must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// `h = 1` on every link.
    #[default]
    Unit,
    /// Exponential(1) power gain, one draw per link.
    Rayleigh,
}

impl FadingModel {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            FadingModel::Unit => 1.0,
            FadingModel::Rayleigh => Exp1.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub pathloss_exp: f64,
    pub radius_m: f64,
    pub fading: FadingModel,
}

impl EnvParams {
    pub fn new(pathloss_exp: f64, radius_m: f64, fading: FadingModel) -> Result<Self> {
        if !(pathloss_exp > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "path-loss exponent must exceed 2, got {pathloss_exp}"
            )));
        }
        if !(radius_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {radius_m}"
            )));
        }
        Ok(EnvParams {
            pathloss_exp,
            radius_m,
            fading,
        })
    }
}

/// Thermal noise `-174 + 10 log10(B)` dBm, returned in mW.
pub fn noise_power(bandwidth_hz: f64) -> Result<PowerQuantity> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    Ok(dbm_to_mw(NOISE_DENSITY_DBM_PER_HZ + 10.0 * bandwidth_hz.log10()))
}

/// `h * eta * d^-a`.
pub fn channel_gain(fading: f64, pathloss_coeff: f64, distance_m: f64, exponent: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if fading < 0.0 || pathloss_coeff <= 0.0 {
        return Err(Error::InvalidArgument("fading must be >= 0 and coefficient > 0".into()));
    }
    Ok(fading * pathloss_coeff * distance_m.powf(-exponent))
}

pub fn snr(power: PowerQuantity, gain: f64, noise: PowerQuantity) -> Result<f64> {
    if noise.mw() <= 0.0 {
        return Err(Error::InvalidArgument("noise power must be positive".into()));
    }
    Ok(power.mw() * gain / noise.mw())
}

/// Shannon rate `B log2(1 + snr)` in bits/s.
pub fn rate(bandwidth_hz: f64, snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::InvalidArgument(format!("SNR must be non-negative, got {snr}")));
    }
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Rate of a link transmitting `power` over `channel` with gain `gain`.
pub fn link_rate(channel: &ChannelSpec, power: PowerQuantity, gain: f64) -> Result<f64> {
    rate(channel.bandwidth_hz, snr(power, gain, channel.noise)?)
}

/// Battery level at the start of the next slot: `min(avail - tx + harvest, cap)`.
///
/// A slot either transmits or harvests, never both.
pub fn battery_update(
    avail: PowerQuantity,
    tx: PowerQuantity,
    harvest: PowerQuantity,
    cap: PowerQuantity,
) -> Result<PowerQuantity> {
    if tx > avail {
        return Err(Error::InfeasibleAction {
            tx: tx.mw(),
            avail: avail.mw(),
        });
    }
    if !tx.is_zero() && !harvest.is_zero() {
        return Err(Error::InvalidArgument("a slot cannot both transmit and harvest".into()));
    }
    let next = (avail.mw() - tx.mw() + harvest.mw()).min(cap.mw());
    PowerQuantity::from_mw(next.max(0.0))
}
