use rayon::prelude::*;
use serde::Serialize;

use super::{MdpModel, MdpState};
use crate::model::PowerQuantity;

/// Values and argmax actions (in grid steps) for every state of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slice {
    pub values: Vec<f64>,
    pub actions: Vec<usize>,
}

/// Expected throughput-to-go `V_k(s)` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTable {
    slices: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.slices.len()
    }

    /// `slot` is 1-based.
    pub fn get(&self, slot: usize, state: usize) -> f64 {
        self.slices[slot - 1][state]
    }

    pub fn slice(&self, slot: usize) -> &[f64] {
        &self.slices[slot - 1]
    }
}

/// Optimal transmit amount per `(slot, state)`, in battery grid steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyTable {
    slices: Vec<Vec<usize>>,
}

impl PolicyTable {
    pub(crate) fn from_slices(slices: Vec<Vec<usize>>) -> Self {
        PolicyTable { slices }
    }

    pub fn horizon(&self) -> usize {
        self.slices.len()
    }

    /// `slot` is 1-based.
    pub fn action_steps(&self, slot: usize, state: usize) -> usize {
        self.slices[slot - 1][state]
    }

    pub fn action(&self, model: &MdpModel, slot: usize, state: MdpState) -> PowerQuantity {
        model.battery_value(self.action_steps(slot, model.state_index(state)))
    }

    pub fn slice(&self, slot: usize) -> &[usize] {
        &self.slices[slot - 1]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub values: ValueTable,
    pub policy: PolicyTable,
}

/// Picks the best action; iterating `p` upward with `>=` breaks ties toward
/// the larger transmit power.
fn best_action(model: &MdpModel, battery: usize, mut score: impl FnMut(usize) -> f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for p in model.action_steps(battery) {
        let v = score(p);
        if v >= best.0 {
            best = (v, p);
        }
    }
    best
}

/// Last slot: nothing comes after, so the value is the best immediate rate,
/// which spends the whole battery whenever transmission is allowed.
pub fn bellman_terminal(model: &MdpModel) -> Slice {
    let (values, actions) = (0..model.num_states())
        .map(|i| {
            let s = model.state_at(i);
            best_action(model, s.battery, |p| model.rate_for(p, s.gain))
        })
        .unzip();
    Slice { values, actions }
}

/// `W[b'][h][g] = sum_{h', g'} P_h[h][h'] P_g[g][g'] V_next(b', h', g')`, the
/// continuation for a transmit slot ending at `b'` (no harvest collected).
fn transmit_continuation(model: &MdpModel, v_next: &[f64]) -> Vec<f64> {
    let q = model.num_harvest_states();
    let gn = model.num_gain_states();
    let (ph, pg) = (model.harvest_chain(), model.gain_chain());
    (0..model.num_states())
        .into_par_iter()
        .map(|i| {
            let s = model.state_at(i);
            let mut acc = 0.0;
            for h2 in 0..q {
                let wh = ph.get(s.harvest, h2);
                if wh == 0.0 {
                    continue;
                }
                for g2 in 0..gn {
                    let wg = pg.get(s.gain, g2);
                    if wg == 0.0 {
                        continue;
                    }
                    let next = model.state_index(MdpState {
                        battery: s.battery,
                        harvest: h2,
                        gain: g2,
                    });
                    acc += wh * wg * v_next[next];
                }
            }
            acc
        })
        .collect()
}

/// One backward step: values and argmax actions for slot `k` given the
/// slice for `k + 1`.
///
/// A transmit action of `p` steps earns its rate now and moves the battery to
/// `b - p`; the harvest action earns nothing and adds the harvest of the
/// next harvest state (capped at the top of the grid). Both then average the
/// next slice over the independent harvest and gain transitions.
pub fn bellman_backup(model: &MdpModel, v_next: &[f64], _slot: usize) -> Slice {
    let w = transmit_continuation(model, v_next);
    let q = model.num_harvest_states();
    let gn = model.num_gain_states();
    let (ph, pg) = (model.harvest_chain(), model.gain_chain());

    let (values, actions) = (0..model.num_states())
        .into_par_iter()
        .map(|i| {
            let s = model.state_at(i);
            let harvest_value = {
                let mut acc = 0.0;
                for h2 in 0..q {
                    let wh = ph.get(s.harvest, h2);
                    if wh == 0.0 {
                        continue;
                    }
                    let b2 = model.next_battery(s.battery, 0, h2);
                    for g2 in 0..gn {
                        let wg = pg.get(s.gain, g2);
                        if wg == 0.0 {
                            continue;
                        }
                        acc += wh
                            * wg
                            * v_next[model.state_index(MdpState {
                                battery: b2,
                                harvest: h2,
                                gain: g2,
                            })];
                    }
                }
                acc
            };
            best_action(model, s.battery, |p| {
                if p == 0 {
                    harvest_value
                } else {
                    let after = MdpState {
                        battery: s.battery - p,
                        ..s
                    };
                    model.rate_for(p, s.gain) + w[model.state_index(after)]
                }
            })
        })
        .unzip();
    Slice { values, actions }
}

/// Backward induction from slot `K` down to slot 1.
pub fn plan(model: &MdpModel) -> Plan {
    let k_max = model.horizon();
    let mut values = Vec::with_capacity(k_max);
    let mut actions = Vec::with_capacity(k_max);
    let mut current = bellman_terminal(model);
    for slot in (1..k_max).rev() {
        let prev = bellman_backup(model, &current.values, slot);
        values.push(std::mem::replace(&mut current.values, prev.values));
        actions.push(std::mem::replace(&mut current.actions, prev.actions));
    }
    values.push(current.values);
    actions.push(current.actions);
    values.reverse();
    actions.reverse();
    Plan {
        values: ValueTable { slices: values },
        policy: PolicyTable { slices: actions },
    }
}

/// Largest gap between a stored value and a brute recomputation of the
/// Bellman right-hand side from the next slice, over all slots and states;
/// also checks that each stored action attains the maximum. Gaps are
/// divided by `max(1, |value|)`.
///
/// Deliberately naive: it loops over every action and every successor
/// without the shared continuation table [`bellman_backup`] uses.
pub fn bellman_residual(model: &MdpModel, plan: &Plan) -> f64 {
    let k_max = model.horizon();
    let mut worst: f64 = 0.0;
    for slot in 1..=k_max {
        for i in 0..model.num_states() {
            let s = model.state_at(i);
            let q_value = |p: usize| -> f64 {
                let mut total = model.rate_for(p, s.gain);
                if slot < k_max {
                    for h2 in 0..model.num_harvest_states() {
                        for g2 in 0..model.num_gain_states() {
                            let prob = model.harvest_chain().get(s.harvest, h2) * model.gain_chain().get(s.gain, g2);
                            let next = MdpState {
                                battery: model.next_battery(s.battery, p, h2),
                                harvest: h2,
                                gain: g2,
                            };
                            total += prob * plan.values.get(slot + 1, model.state_index(next));
                        }
                    }
                }
                total
            };
            let best = model
                .action_steps(s.battery)
                .map(q_value)
                .fold(f64::NEG_INFINITY, f64::max);
            let stored = plan.values.get(slot, i);
            let chosen = q_value(plan.policy.action_steps(slot, i));
            let scale = best.abs().max(1.0);
            worst = worst
                .max((best - stored).abs() / scale)
                .max((best - chosen).abs() / scale);
        }
    }
    worst
}
