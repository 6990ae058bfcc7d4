//! Finite-horizon power planning for one energy-harvesting user.
//!
//! The state at slot `k` is `(battery, previous harvest state, gain state)`.
//! A slot either transmits (`p >= threshold`, nothing harvested) or harvests
//! (`p = 0`). The harvest drawn in slot `k` only becomes known at `k + 1`,
//! which is why the state carries the previous harvest state.
//!
//! The battery lives on a uniform grid of `N_b` levels over `[0, cap]`.
//! Actions are restricted so the post-action battery stays on the grid and
//! harvest amounts are snapped down to whole grid steps, so transitions are
//! exact on the discretized model.

mod executor;
mod oracle;
mod planner;
mod policy_io;

pub(crate) use executor::model_channel;
pub use executor::{execute_policy, execute_policy_on_paths, ChainPaths, FrameTrace, InitialState, SlotRecord};
pub use oracle::{exhaustive_policy_oracle, ORACLE_BRANCH_LIMIT};
pub use planner::{bellman_backup, bellman_residual, bellman_terminal, plan, Plan, PolicyTable, Slice, ValueTable};
pub use policy_io::{policy_table, read_policy_csv, write_policy_csv, POLICY_CSV_HEADER};

pub use crate::chain::stationary_distribution;

use serde::Serialize;

use crate::chain::StochasticMatrix;
use crate::error::{Error, Result};
use crate::model::{link_rate, validate_harvest_levels, ChannelSpec, PowerQuantity, UserSpec};

pub const DEFAULT_BATTERY_LEVELS: usize = 64;

/// Relative slack used when deciding whether a power lies on the grid.
const GRID_TOLERANCE: f64 = 1e-9;

/// Raw ingredients of a model before validation.
#[derive(Debug, Clone)]
pub struct MdpSpec {
    pub horizon: usize,
    pub battery_levels: usize,
    pub battery_cap: PowerQuantity,
    pub threshold: PowerQuantity,
    pub harvest_levels: Vec<PowerQuantity>,
    pub harvest_chain: StochasticMatrix,
    pub gain_states: Vec<f64>,
    pub gain_chain: StochasticMatrix,
    pub bandwidth_hz: f64,
    pub noise: PowerQuantity,
}

/// A grid state; all fields are indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct MdpState {
    pub battery: usize,
    pub harvest: usize,
    pub gain: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MdpModel {
    horizon: usize,
    battery_levels: usize,
    battery_cap: PowerQuantity,
    threshold: PowerQuantity,
    min_tx_steps: usize,
    harvest_levels: Vec<PowerQuantity>,
    harvest_steps: Vec<usize>,
    harvest_chain: StochasticMatrix,
    gain_states: Vec<f64>,
    gain_chain: StochasticMatrix,
    bandwidth_hz: f64,
    noise: PowerQuantity,
    /// `rates[p * G + g]`: rate of spending `p` grid steps at gain state `g`.
    rates: Vec<f64>,
}

impl MdpModel {
    pub fn new(spec: MdpSpec) -> Result<Self> {
        let MdpSpec {
            horizon,
            battery_levels,
            battery_cap,
            threshold,
            harvest_levels,
            harvest_chain,
            gain_states,
            gain_chain,
            bandwidth_hz,
            noise,
        } = spec;
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least one slot".into()));
        }
        if battery_levels < 2 {
            return Err(Error::InvalidModel("battery grid needs at least two levels".into()));
        }
        if battery_cap.mw() <= 0.0 {
            return Err(Error::InvalidModel("battery capacity must be positive".into()));
        }
        if threshold > battery_cap {
            return Err(Error::InvalidModel(format!(
                "threshold {threshold} exceeds capacity {battery_cap}"
            )));
        }
        validate_harvest_levels(&harvest_levels).map_err(|e| Error::InvalidModel(e.to_string()))?;
        if harvest_levels.len() != harvest_chain.size() {
            return Err(Error::InvalidModel(format!(
                "{} harvest levels but a {0}x{0} harvest matrix is needed, got {1}x{1}",
                harvest_levels.len(),
                harvest_chain.size()
            )));
        }
        if gain_states.len() != gain_chain.size() {
            return Err(Error::InvalidModel(format!(
                "{} gain states but gain matrix is {1}x{1}",
                gain_states.len(),
                gain_chain.size()
            )));
        }
        if gain_states.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidModel("gain states must be positive".into()));
        }
        if !(bandwidth_hz > 0.0) || noise.mw() <= 0.0 {
            return Err(Error::InvalidModel("bandwidth and noise must be positive".into()));
        }

        let step = battery_cap.mw() / (battery_levels - 1) as f64;
        let min_tx_steps = ((threshold.mw() / step) - GRID_TOLERANCE).ceil().max(1.0) as usize;
        let harvest_steps = harvest_levels
            .iter()
            .map(|h| (h.mw() / step + GRID_TOLERANCE).floor() as usize)
            .collect();

        let mut model = MdpModel {
            horizon,
            battery_levels,
            battery_cap,
            threshold,
            min_tx_steps,
            harvest_levels,
            harvest_steps,
            harvest_chain,
            gain_states,
            gain_chain,
            bandwidth_hz,
            noise,
            rates: Vec::new(),
        };
        let channel = ChannelSpec::new(0, bandwidth_hz, 1.0, noise).map_err(|e| Error::InvalidModel(e.to_string()))?;
        let g_count = model.gain_states.len();
        let mut rates = Vec::with_capacity(battery_levels * g_count);
        for p in 0..battery_levels {
            let power = model.battery_value(p);
            for g in 0..g_count {
                rates.push(link_rate(&channel, power, model.gain_states[g])?);
            }
        }
        model.rates = rates;
        Ok(model)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn battery_levels(&self) -> usize {
        self.battery_levels
    }

    pub fn battery_cap(&self) -> PowerQuantity {
        self.battery_cap
    }

    pub fn threshold(&self) -> PowerQuantity {
        self.threshold
    }

    pub fn battery_step(&self) -> f64 {
        self.battery_cap.mw() / (self.battery_levels - 1) as f64
    }

    /// Smallest number of grid steps a transmission may spend.
    pub fn min_tx_steps(&self) -> usize {
        self.min_tx_steps
    }

    pub fn harvest_levels(&self) -> &[PowerQuantity] {
        &self.harvest_levels
    }

    /// Harvest per state, snapped down to whole grid steps.
    pub fn harvest_steps(&self) -> &[usize] {
        &self.harvest_steps
    }

    pub fn harvest_value(&self, state: usize) -> PowerQuantity {
        self.battery_value(self.harvest_steps[state])
    }

    pub fn harvest_chain(&self) -> &StochasticMatrix {
        &self.harvest_chain
    }

    pub fn gain_states(&self) -> &[f64] {
        &self.gain_states
    }

    pub fn gain_chain(&self) -> &StochasticMatrix {
        &self.gain_chain
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn noise(&self) -> PowerQuantity {
        self.noise
    }

    pub fn num_harvest_states(&self) -> usize {
        self.harvest_levels.len()
    }

    pub fn num_gain_states(&self) -> usize {
        self.gain_states.len()
    }

    /// States per slot: `N_b * Q * |gains|`.
    pub fn num_states(&self) -> usize {
        self.battery_levels * self.num_harvest_states() * self.num_gain_states()
    }

    /// Power of grid level `i`; the top level is exactly the capacity.
    pub fn battery_value(&self, i: usize) -> PowerQuantity {
        let top = (self.battery_levels - 1) as f64;
        PowerQuantity::from_mw(self.battery_cap.mw() * i as f64 / top).expect("grid values are valid powers")
    }

    /// Grid level at or below `power`, plus whether it was off-grid.
    pub fn snap_battery(&self, power: PowerQuantity) -> (usize, bool) {
        let step = self.battery_step();
        let exact = power.mw() / step;
        let idx = (exact + GRID_TOLERANCE * exact.abs().max(1.0)).floor();
        let idx = (idx.max(0.0) as usize).min(self.battery_levels - 1);
        let on_grid = (self.battery_value(idx).mw() - power.mw()).abs() <= GRID_TOLERANCE * self.battery_cap.mw();
        (idx, !on_grid)
    }

    /// Lexicographic `(battery, harvest, gain)` index.
    #[inline]
    pub fn state_index(&self, s: MdpState) -> usize {
        (s.battery * self.num_harvest_states() + s.harvest) * self.num_gain_states() + s.gain
    }

    pub fn state_at(&self, index: usize) -> MdpState {
        let g = self.num_gain_states();
        let q = self.num_harvest_states();
        MdpState {
            battery: index / (q * g),
            harvest: (index / g) % q,
            gain: index % g,
        }
    }

    /// Rate of spending `steps` grid steps in gain state `gain`.
    #[inline]
    pub fn rate_for(&self, steps: usize, gain: usize) -> f64 {
        self.rates[steps * self.num_gain_states() + gain]
    }

    /// Feasible transmit amounts, in grid steps, at battery level `battery`:
    /// always `0` (harvest), plus every `p` with `threshold <= p <= battery`.
    pub fn action_steps(&self, battery: usize) -> impl Iterator<Item = usize> {
        let first = self.min_tx_steps;
        std::iter::once(0).chain(first..=battery.max(first - 1))
    }

    /// Next battery level after spending `tx` steps, or harvesting from
    /// harvest state `harvest` when `tx == 0`.
    #[inline]
    pub fn next_battery(&self, battery: usize, tx: usize, harvest: usize) -> usize {
        if tx == 0 {
            (battery + self.harvest_steps[harvest]).min(self.battery_levels - 1)
        } else {
            battery - tx
        }
    }
}

/// Model for `user` transmitting on `channel`.
pub fn build_model(
    user: &UserSpec,
    channel: &ChannelSpec,
    horizon: usize,
    battery_levels: usize,
    harvest_chain: &StochasticMatrix,
    gain_chain: &StochasticMatrix,
    gain_states: &[f64],
) -> Result<MdpModel> {
    MdpModel::new(MdpSpec {
        horizon,
        battery_levels,
        battery_cap: user.battery_cap,
        threshold: user.threshold,
        harvest_levels: user.harvest_levels.clone(),
        harvest_chain: harvest_chain.clone(),
        gain_states: gain_states.to_vec(),
        gain_chain: gain_chain.clone(),
        bandwidth_hz: channel.bandwidth_hz,
        noise: channel.noise,
    })
}

/// Feasible transmit powers at an on-grid battery level.
pub fn action_set(model: &MdpModel, battery: PowerQuantity) -> Result<Vec<PowerQuantity>> {
    let (idx, off_grid) = model.snap_battery(battery);
    if off_grid {
        return Err(Error::InvalidArgument(format!(
            "battery level {battery} is not on the grid"
        )));
    }
    Ok(model.action_steps(idx).map(|p| model.battery_value(p)).collect())
}
