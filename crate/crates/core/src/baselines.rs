//! Comparison schemes: random and exhaustive channel assignment, and the
//! offline harvest-then-spend power schedule.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{min_user_rate, Matching, MatchingInstance};
use crate::mdp::{ChainPaths, FrameTrace, InitialState, MdpModel, SlotRecord};
use crate::model::{battery_update, link_rate, PowerQuantity};

/// Largest number of capacity-respecting assignments the exhaustive search
/// will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Users in index order pick uniformly among channels with room left.
pub fn random_assignment(instance: &MatchingInstance, seed: u64) -> Result<Matching> {
    instance.check_feasible()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = instance.num_channels();
    let mut load = vec![0usize; channels];
    let mut assign = Vec::with_capacity(instance.num_users());
    for _ in 0..instance.num_users() {
        let open: Vec<usize> = (0..channels).filter(|&m| load[m] < instance.capacity).collect();
        let &m = open.choose(&mut rng).expect("feasible instance always has room");
        load[m] += 1;
        assign.push(Some(m));
    }
    Matching::from_assignment(channels, instance.capacity, assign)
}

/// Number of ways to place `users` labelled users on `channels` channels
/// holding at most `capacity` each.
pub fn count_assignments(users: usize, channels: usize, capacity: usize) -> f64 {
    // ways[r]: placements of r users on the channels seen so far
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let mut ways = vec![0.0; users + 1];
    ways[0] = 1.0;
    for _ in 0..channels {
        let mut next = vec![0.0; users + 1];
        for placed in 0..=users {
            if ways[placed] == 0.0 {
                continue;
            }
            for j in 0..=capacity.min(users - placed) {
                next[placed + j] += ways[placed] * binom(users - placed, j);
            }
        }
        ways = next;
    }
    ways[users]
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    pub matching: Matching,
    pub min_rate: f64,
    /// Complete assignments whose objective was evaluated.
    pub evaluated: u64,
}

struct Search<'a> {
    instance: &'a MatchingInstance,
    load: Vec<usize>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    evaluated: u64,
}

impl Search<'_> {
    fn descend(&mut self, user: usize, running_min: f64) {
        if let Some((best, _)) = &self.best {
            // the minimum can only fall as users are added
            if running_min <= *best {
                return;
            }
        }
        if user == self.instance.num_users() {
            self.evaluated += 1;
            self.best = Some((running_min, self.current.clone()));
            return;
        }
        for m in 0..self.instance.num_channels() {
            if self.load[m] == self.instance.capacity {
                continue;
            }
            self.load[m] += 1;
            self.current.push(m);
            let r = self.instance.rates.get(m, user);
            self.descend(user + 1, running_min.min(r));
            self.current.pop();
            self.load[m] -= 1;
        }
    }
}

/// Max-min optimal assignment at fixed power, by exhaustive enumeration.
///
/// Assignments are visited in lexicographic order of the channel vector and
/// only strict improvements replace the incumbent, so ties resolve to the
/// lexicographically smallest optimum. Branches whose running minimum cannot
/// beat the incumbent are skipped; this never changes the result.
pub fn brute_force_search(instance: &MatchingInstance) -> Result<BruteForceResult> {
    instance.check_feasible()?;
    let space = count_assignments(instance.num_users(), instance.num_channels(), instance.capacity);
    if space > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{space:.3e} assignments exceed the exhaustive-search limit"
        )));
    }
    let mut search = Search {
        instance,
        load: vec![0; instance.num_channels()],
        current: Vec::with_capacity(instance.num_users()),
        best: None,
        evaluated: 0,
    };
    search.descend(0, f64::INFINITY);
    let (_, assign) = search.best.expect("a feasible instance has at least one assignment");
    let matching = Matching::from_assignment(
        instance.num_channels(),
        instance.capacity,
        assign.into_iter().map(Some).collect(),
    )?;
    let min_rate = if instance.num_users() == 0 {
        0.0
    } else {
        min_user_rate(&matching, &instance.rates)?
    };
    Ok(BruteForceResult {
        matching,
        min_rate,
        evaluated: search.evaluated,
    })
}

/// Harvests for `n_harvest` slots, then spreads the stored energy evenly
/// over the remaining slots.
///
/// When an even share would fall below the transmit threshold, fewer slots
/// are used, each at `E / floor(E / threshold)`; leftover slots stay idle
/// (no transmission, no harvesting).
pub fn offline_on_paths(
    model: &MdpModel,
    n_harvest: usize,
    battery: PowerQuantity,
    paths: &ChainPaths,
) -> Result<FrameTrace> {
    let k_max = model.horizon();
    if n_harvest >= k_max {
        return Err(Error::InvalidArgument(format!(
            "offline scheme needs n_harvest < K, got {n_harvest} >= {k_max}"
        )));
    }
    if paths.harvest.len() != k_max + 1 || paths.gain.len() != k_max {
        return Err(Error::InvalidArgument("chain paths do not cover the frame".into()));
    }
    let channel = crate::mdp::model_channel(model);
    let cap = model.battery_cap();
    let threshold = model.threshold().mw();
    let mut trace = FrameTrace::default();
    let mut level = battery;
    let mut share = 0.0;
    let mut tx_slots = 0usize;

    for slot in 1..=k_max {
        if slot == n_harvest + 1 {
            let stored = level.mw();
            let remaining = k_max - n_harvest;
            tx_slots = if stored / remaining as f64 >= threshold {
                remaining
            } else if threshold > 0.0 {
                ((stored / threshold) * (1.0 + 1e-12)).floor() as usize
            } else {
                remaining
            };
            share = if tx_slots > 0 { stored / tx_slots as f64 } else { 0.0 };
        }
        let gain_state = paths.gain[slot - 1];
        let harvest_state = paths.harvest[slot];
        let (action, harvest) = if slot <= n_harvest {
            (PowerQuantity::ZERO, model.harvest_value(harvest_state))
        } else if slot <= n_harvest + tx_slots {
            let last = slot == n_harvest + tx_slots;
            let amount = if last { level.mw() } else { share.min(level.mw()) };
            (PowerQuantity::from_mw(amount)?, PowerQuantity::ZERO)
        } else {
            (PowerQuantity::ZERO, PowerQuantity::ZERO)
        };
        let gain = model.gain_states()[gain_state];
        let next = battery_update(level, action, harvest, cap)?;
        trace.slots.push(SlotRecord {
            slot,
            battery: level,
            prev_harvest_state: paths.harvest[slot - 1],
            gain_state,
            gain,
            action,
            harvest_state,
            harvest,
            rate: link_rate(&channel, action, gain)?,
            next_battery: next,
        });
        level = next;
    }
    Ok(trace)
}

/// Offline schedule on chains sampled from `seed` (the same draws
/// [`crate::mdp::execute_policy`] would see for that seed).
pub fn offline_power_scheme(
    model: &MdpModel,
    n_harvest: usize,
    initial: &InitialState,
    seed: u64,
) -> Result<FrameTrace> {
    let paths = ChainPaths::sample(model, initial, seed);
    offline_on_paths(model, n_harvest, initial.battery, &paths)
}
