//! Flat CSV layout for planning output.
//!
//! One row per `(slot, state)`, slot-major, states in lexicographic
//! `(battery, harvest, gain)` order:
//!
//! ```text
//! slot,battery_idx,harvest_idx,gain_idx,battery_mw,action_steps,action_mw,value
//! ```
//!
//! `action_steps` is authoritative on reload; the float columns are for
//! people and plotting.

use std::io::{Read, Write};

use super::{MdpModel, Plan, PolicyTable};
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

pub const POLICY_CSV_HEADER: [&str; 8] = [
    "slot",
    "battery_idx",
    "harvest_idx",
    "gain_idx",
    "battery_mw",
    "action_steps",
    "action_mw",
    "value",
];

pub fn policy_table(model: &MdpModel, plan: &Plan) -> Table {
    let mut t = Table::new(POLICY_CSV_HEADER);
    for slot in 1..=model.horizon() {
        for i in 0..model.num_states() {
            let s = model.state_at(i);
            let a = plan.policy.action_steps(slot, i);
            t.push(vec![
                Cell::from(slot),
                s.battery.into(),
                s.harvest.into(),
                s.gain.into(),
                model.battery_value(s.battery).mw().into(),
                a.into(),
                model.battery_value(a).mw().into(),
                plan.values.get(slot, i).into(),
            ]);
        }
    }
    t
}

pub fn write_policy_csv<W: Write>(model: &MdpModel, plan: &Plan, out: W) -> Result<()> {
    policy_table(model, plan).write_csv(out)
}

/// Reloads a cached policy, checking that its shape matches `model`.
pub fn read_policy_csv<R: Read>(model: &MdpModel, input: R) -> Result<PolicyTable> {
    let bad = |msg: String| Error::InvalidArgument(format!("policy cache: {msg}"));
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(POLICY_CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let states = model.num_states();
    let mut slices = vec![Vec::with_capacity(states); model.horizon()];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> Result<usize> {
            record[i]
                .parse::<usize>()
                .map_err(|e| bad(format!("row {}: column {}: {e}", rows + 2, POLICY_CSV_HEADER[i])))
        };
        let slot = field(0)?;
        let state = model.state_index(super::MdpState {
            battery: field(1)?,
            harvest: field(2)?,
            gain: field(3)?,
        });
        let expected_slot = rows / states + 1;
        if slot != expected_slot || state != rows % states {
            return Err(bad(format!("row {} out of order", rows + 2)));
        }
        let action = field(5)?;
        let battery = field(1)?;
        if !model.action_steps(battery).any(|a| a == action) {
            return Err(bad(format!("row {}: infeasible action {action}", rows + 2)));
        }
        slices[slot - 1].push(action);
        rows += 1;
    }
    if rows != states * model.horizon() {
        return Err(bad(format!("expected {} rows, found {rows}", states * model.horizon())));
    }
    Ok(PolicyTable::from_slices(slices))
}
