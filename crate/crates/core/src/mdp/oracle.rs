use super::{MdpModel, MdpState};
use crate::error::{Error, Result};

/// Upper bound on decision-times-chance branches the oracle will walk.
pub const ORACLE_BRANCH_LIMIT: u64 = 10_000_000;

struct Oracle<'a> {
    model: &'a MdpModel,
    grid: Vec<f64>,
    harvest: Vec<f64>,
    step: f64,
}

impl Oracle<'_> {
    fn level_of(&self, power: f64) -> usize {
        let idx = (power / self.step + 1e-9).floor().max(0.0) as usize;
        idx.min(self.grid.len() - 1)
    }

    fn rate(&self, power: f64, gain: usize) -> f64 {
        let g = self.model.gain_states()[gain];
        self.model.bandwidth_hz() * (1.0 + power * g / self.model.noise().mw()).log2()
    }

    /// Best expected reward from `slot` onward. No memoization: every
    /// history is expanded separately, so the maximization ranges over
    /// history-dependent policies.
    fn expand(&self, slot: usize, battery: usize, harvest: usize, gain: usize) -> f64 {
        if slot > self.model.horizon() {
            return 0.0;
        }
        let level = self.grid[battery];
        let threshold = self.model.threshold().mw();
        let mut best = f64::NEG_INFINITY;
        // remaining level after the action, highest first: remaining == level is the harvest action
        for remaining in (0..=battery).rev() {
            let spend = level - self.grid[remaining];
            let transmit = remaining != battery;
            if transmit && spend < threshold - 1e-9 * self.step {
                continue;
            }
            let mut value = if transmit { self.rate(spend, gain) } else { 0.0 };
            let ph = self.model.harvest_chain().row(harvest);
            let pg = self.model.gain_chain().row(gain);
            for (h2, &wh) in ph.iter().enumerate() {
                if wh == 0.0 {
                    continue;
                }
                let next = if transmit {
                    remaining
                } else {
                    self.level_of((level + self.harvest[h2]).min(self.model.battery_cap().mw()))
                };
                for (g2, &wg) in pg.iter().enumerate() {
                    if wg == 0.0 {
                        continue;
                    }
                    value += wh * wg * self.expand(slot + 1, next, h2, g2);
                }
            }
            best = best.max(value);
        }
        best
    }
}

/// Maximum expected throughput from `initial` at slot 1, found by walking
/// the full decision/chance tree.
pub fn exhaustive_policy_oracle(model: &MdpModel, initial: MdpState) -> Result<f64> {
    let per_slot = (model.battery_levels() * model.num_harvest_states() * model.num_gain_states()) as u64;
    let branches = (0..model.horizon()).try_fold(1u64, |acc, _| acc.checked_mul(per_slot));
    match branches {
        Some(b) if b <= ORACLE_BRANCH_LIMIT => {}
        _ => {
            return Err(Error::TooLarge(format!(
                "{per_slot}^{} branches exceed the oracle limit of {ORACLE_BRANCH_LIMIT}",
                model.horizon()
            )))
        }
    }
    if initial.battery >= model.battery_levels()
        || initial.harvest >= model.num_harvest_states()
        || initial.gain >= model.num_gain_states()
    {
        return Err(Error::InvalidArgument("initial state out of range".into()));
    }
    let step = model.battery_cap().mw() / (model.battery_levels() - 1) as f64;
    let grid: Vec<f64> = (0..model.battery_levels()).map(|i| i as f64 * step).collect();
    let harvest = model
        .harvest_levels()
        .iter()
        .map(|h| (h.mw() / step + 1e-9).floor() * step)
        .collect();
    let oracle = Oracle {
        model,
        grid,
        harvest,
        step,
    };
    Ok(oracle.expand(1, initial.battery, initial.harvest, initial.gain))
}
