use serde::Serialize;

use super::{MdpModel, MdpState, PolicyTable};
use crate::chain::sample_chain;
use crate::error::{Error, Result};
use crate::model::{battery_update, link_rate, ChannelSpec, PowerQuantity};
use crate::sim::seeds::{derive_seed, Stream};

/// Where a frame starts: battery level plus the chain states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialState {
    pub battery: PowerQuantity,
    /// Harvest state of the slot before the frame.
    pub harvest: usize,
    pub gain: usize,
}

/// Pre-sampled chain trajectories for one frame.
///
/// `harvest[0]` is the state before slot 1 and `harvest[k]` the state
/// realized during slot `k`; `gain[k - 1]` is the gain state of slot `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainPaths {
    pub harvest: Vec<usize>,
    pub gain: Vec<usize>,
}

impl ChainPaths {
    /// Harvest and gain draws come from separate child streams of `seed`.
    pub fn sample(model: &MdpModel, initial: &InitialState, seed: u64) -> Self {
        let k = model.horizon();
        ChainPaths {
            harvest: sample_chain(
                model.harvest_chain(),
                initial.harvest,
                k + 1,
                derive_seed(seed, &[Stream::Harvest as u64]),
            ),
            gain: sample_chain(
                model.gain_chain(),
                initial.gain,
                k,
                derive_seed(seed, &[Stream::Gain as u64]),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotRecord {
    /// 1-based slot index.
    pub slot: usize,
    pub battery: PowerQuantity,
    pub prev_harvest_state: usize,
    pub gain_state: usize,
    pub gain: f64,
    pub action: PowerQuantity,
    pub harvest_state: usize,
    /// Energy actually collected this slot (zero when transmitting).
    pub harvest: PowerQuantity,
    pub rate: f64,
    pub next_battery: PowerQuantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameTrace {
    pub slots: Vec<SlotRecord>,
    /// Times the battery had to be snapped down onto the grid.
    pub off_grid_snaps: usize,
}

impl FrameTrace {
    /// Accumulated rate over the frame.
    pub fn throughput(&self) -> f64 {
        self.slots.iter().map(|s| s.rate).sum()
    }

    /// Number of slots used for data, the `t` of the frame.
    pub fn transmit_slots(&self) -> usize {
        self.slots.iter().filter(|s| !s.action.is_zero()).count()
    }

    pub fn harvest_slots(&self) -> usize {
        self.slots.len() - self.transmit_slots()
    }

    pub fn min_battery(&self) -> Option<PowerQuantity> {
        self.slots
            .iter()
            .map(|s| s.battery)
            .min_by(|a, b| a.mw().total_cmp(&b.mw()))
    }

    /// Checks every slot against the battery recursion and the
    /// transmit/harvest exclusivity; returns the first violation.
    pub fn check_energy(&self, cap: PowerQuantity) -> std::result::Result<(), String> {
        for (i, s) in self.slots.iter().enumerate() {
            if !s.action.is_zero() && !s.harvest.is_zero() {
                return Err(format!("slot {} both transmits and harvests", s.slot));
            }
            let expect =
                battery_update(s.battery, s.action, s.harvest, cap).map_err(|e| format!("slot {}: {e}", s.slot))?;
            if expect != s.next_battery {
                return Err(format!(
                    "slot {}: next battery {} but recursion gives {}",
                    s.slot, s.next_battery, expect
                ));
            }
            if s.battery.mw() < 0.0 || s.battery > cap || s.next_battery > cap {
                return Err(format!("slot {}: battery outside [0, cap]", s.slot));
            }
            if let Some(next) = self.slots.get(i + 1) {
                if next.battery != s.next_battery {
                    return Err(format!("slot {}: battery does not carry over", next.slot));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn model_channel(model: &MdpModel) -> ChannelSpec {
    ChannelSpec::new(0, model.bandwidth_hz(), 1.0, model.noise()).expect("model channel was validated")
}

/// Runs the transmission phase along fixed chain trajectories.
///
/// Each slot compares the battery with the threshold: at or above it the
/// planned action is taken, below it the slot harvests. A zero action also
/// harvests. The battery follows the recursion exactly in floating point and
/// is snapped onto the grid only to look up the policy.
pub fn execute_policy_on_paths(
    model: &MdpModel,
    policy: &PolicyTable,
    battery: PowerQuantity,
    paths: &ChainPaths,
) -> Result<FrameTrace> {
    let k_max = model.horizon();
    if policy.horizon() != k_max {
        return Err(Error::InvalidArgument(format!(
            "policy covers {} slots, model has {k_max}",
            policy.horizon()
        )));
    }
    if paths.harvest.len() != k_max + 1 || paths.gain.len() != k_max {
        return Err(Error::InvalidArgument("chain paths do not cover the frame".into()));
    }
    if battery > model.battery_cap() {
        return Err(Error::InvalidArgument(format!(
            "initial battery {battery} exceeds capacity"
        )));
    }
    let channel = model_channel(model);
    let cap = model.battery_cap();
    let mut trace = FrameTrace::default();
    let mut level = battery;

    for slot in 1..=k_max {
        let (b_idx, off_grid) = model.snap_battery(level);
        if off_grid {
            trace.off_grid_snaps += 1;
        }
        let state = MdpState {
            battery: b_idx,
            harvest: paths.harvest[slot - 1],
            gain: paths.gain[slot - 1],
        };
        let action = if level >= model.threshold() {
            // planned amounts are grid values; never spend more than is stored
            let planned = policy.action(model, slot, state);
            if planned.mw() > level.mw() {
                level
            } else {
                planned
            }
        } else {
            PowerQuantity::ZERO
        };
        let harvest_state = paths.harvest[slot];
        let harvest = if action.is_zero() {
            model.harvest_value(harvest_state)
        } else {
            PowerQuantity::ZERO
        };
        let gain = model.gain_states()[state.gain];
        let rate = link_rate(&channel, action, gain)?;
        let next = battery_update(level, action, harvest, cap)?;
        trace.slots.push(SlotRecord {
            slot,
            battery: level,
            prev_harvest_state: state.harvest,
            gain_state: state.gain,
            gain,
            action,
            harvest_state,
            harvest,
            rate,
            next_battery: next,
        });
        level = next;
    }
    Ok(trace)
}

/// Samples the chains from `seed` and runs the transmission phase.
pub fn execute_policy(model: &MdpModel, policy: &PolicyTable, initial: &InitialState, seed: u64) -> Result<FrameTrace> {
    if initial.harvest >= model.num_harvest_states() || initial.gain >= model.num_gain_states() {
        return Err(Error::InvalidArgument("initial chain state out of range".into()));
    }
    let paths = ChainPaths::sample(model, initial, seed);
    execute_policy_on_paths(model, policy, initial.battery, &paths)
}
