use serde::Serialize;

use super::{
    build_channel_preferences, build_user_preferences, channel_utility, initialize_matching, user_utility, LinkMatrix,
    Matching, MatchingInstance,
};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// `user_a` on `channel_a` exchanges with `user_b` on `channel_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwapPair {
    pub user_a: usize,
    pub user_b: usize,
    pub channel_a: usize,
    pub channel_b: usize,
}

/// Utilities of the four players touched by a swap, ordered
/// `[user_a, user_b, channel_a, channel_b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapRecord {
    pub pair: SwapPair,
    pub before: [f64; 4],
    pub after: [f64; 4],
}

impl SwapRecord {
    /// No involved player loses and at least one gains.
    pub fn is_improving(&self) -> bool {
        let none_worse = self.before.iter().zip(&self.after).all(|(b, a)| a >= b);
        let one_better = self.before.iter().zip(&self.after).any(|(b, a)| a > b);
        none_worse && one_better
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EcaaStats {
    pub init_proposals: usize,
    pub init_rounds: usize,
    pub vacant_channels: Vec<usize>,
    /// Blocking-pair scans; the last one finds nothing.
    pub iterations: usize,
    pub swaps: usize,
    pub swap_evaluations: usize,
    pub max_evaluations_per_iteration: usize,
    pub swap_log: Vec<SwapRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EcaaOutcome {
    pub initial: Matching,
    pub matching: Matching,
    pub stats: EcaaStats,
}

/// Upper bound `D N (M-1) / 2` on the candidate swaps one scan can examine.
pub fn swap_evaluation_bound(capacity: usize, users: usize, channels: usize) -> f64 {
    0.5 * capacity as f64 * users as f64 * channels.saturating_sub(1) as f64
}

fn channel_min_excluding(matching: &Matching, rates: &LinkMatrix, channel: usize, out: usize, incoming: usize) -> f64 {
    matching
        .users_on(channel)
        .filter(|&n| n != out)
        .map(|n| rates.get(channel, n))
        .fold(rates.get(channel, incoming), f64::min)
}

fn channel_min(matching: &Matching, rates: &LinkMatrix, channel: usize) -> f64 {
    matching
        .users_on(channel)
        .map(|n| rates.get(channel, n))
        .fold(f64::INFINITY, f64::min)
}

/// Utilities of the four involved players before and after the exchange.
fn evaluate(matching: &Matching, rates: &LinkMatrix, pair: SwapPair) -> SwapRecord {
    let SwapPair {
        user_a: a,
        user_b: b,
        channel_a: ma,
        channel_b: mb,
    } = pair;
    let before = [
        rates.get(ma, a),
        rates.get(mb, b),
        channel_min(matching, rates, ma),
        channel_min(matching, rates, mb),
    ];
    let after = [
        rates.get(mb, a),
        rates.get(ma, b),
        channel_min_excluding(matching, rates, ma, a, b),
        channel_min_excluding(matching, rates, mb, b, a),
    ];
    SwapRecord { pair, before, after }
}

/// Recomputes `[user_a, user_b, channel_a, channel_b]` utilities on a
/// matching in which the swap has already happened.
fn involved_utilities(swapped: &Matching, rates: &LinkMatrix, pair: SwapPair) -> Result<[f64; 4]> {
    Ok([
        user_utility(swapped, pair.user_a, rates)?,
        user_utility(swapped, pair.user_b, rates)?,
        channel_utility(swapped, pair.channel_a, rates)?,
        channel_utility(swapped, pair.channel_b, rates)?,
    ])
}

/// Like [`find_swap_blocking_pair`], also returning how many candidate swaps
/// (user pairs on different channels) were examined.
pub fn scan_swap_blocking_pair(matching: &Matching, rates: &LinkMatrix) -> (Option<SwapRecord>, usize) {
    let users = matching.num_users();
    let mut evaluations = 0;
    for a in 0..users {
        let Some(ma) = matching.channel_of(a) else { continue };
        for b in (a + 1)..users {
            let Some(mb) = matching.channel_of(b) else { continue };
            if ma == mb {
                continue;
            }
            evaluations += 1;
            let record = evaluate(
                matching,
                rates,
                SwapPair {
                    user_a: a,
                    user_b: b,
                    channel_a: ma,
                    channel_b: mb,
                },
            );
            if record.is_improving() {
                return (Some(record), evaluations);
            }
        }
    }
    (None, evaluations)
}

/// First swap-blocking pair in index order, or `None` when the matching is
/// two-sided exchange-stable.
pub fn find_swap_blocking_pair(matching: &Matching, rates: &LinkMatrix) -> Option<SwapPair> {
    scan_swap_blocking_pair(matching, rates).0.map(|r| r.pair)
}

/// Exchanges the channels of the two users; nothing else changes.
pub fn perform_swap(matching: &Matching, pair: SwapPair) -> Result<Matching> {
    let SwapPair {
        user_a,
        user_b,
        channel_a,
        channel_b,
    } = pair;
    if user_a >= matching.num_users() || user_b >= matching.num_users() {
        return Err(Error::InvalidSwap(format!("unknown user in {pair:?}")));
    }
    if channel_a == channel_b {
        return Err(Error::InvalidSwap("users already share a channel".into()));
    }
    if matching.channel_of(user_a) != Some(channel_a) || matching.channel_of(user_b) != Some(channel_b) {
        return Err(Error::InvalidSwap(format!(
            "{pair:?} does not match the current assignment"
        )));
    }
    let mut next = matching.clone();
    next.set(user_a, Some(channel_b));
    next.set(user_b, Some(channel_a));
    Ok(next)
}

/// Channel allocation: proposal-based initialization, then first-improvement
/// swaps in index order until no swap-blocking pair is left.
///
/// Each accepted swap raises the sum of all player utilities, so the loop
/// terminates; reaching `max_iterations` therefore signals a bug and is
/// reported as [`Error::NonConvergence`].
pub fn ecaa(instance: &MatchingInstance, max_iterations: usize) -> Result<EcaaOutcome> {
    if max_iterations == 0 {
        return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
    }
    instance.check_feasible()?;
    let init = initialize_matching(
        &build_user_preferences(&instance.gains),
        &build_channel_preferences(&instance.distances, instance.num_channels()),
        instance.capacity,
    )?;

    let rates = &instance.rates;
    let mut matching = init.matching.clone();
    let mut stats = EcaaStats {
        init_proposals: init.proposals,
        init_rounds: init.rounds,
        vacant_channels: init.vacant_channels,
        ..EcaaStats::default()
    };

    for _ in 0..max_iterations {
        let (found, evaluations) = scan_swap_blocking_pair(&matching, rates);
        stats.iterations += 1;
        stats.swap_evaluations += evaluations;
        stats.max_evaluations_per_iteration = stats.max_evaluations_per_iteration.max(evaluations);
        let Some(record) = found else {
            return Ok(EcaaOutcome {
                initial: init.matching,
                matching,
                stats,
            });
        };
        matching = perform_swap(&matching, record.pair)?;
        let realized = SwapRecord {
            after: involved_utilities(&matching, rates, record.pair)?,
            ..record
        };
        assert!(realized.is_improving(), "accepted a non-improving swap: {realized:?}");
        stats.swaps += 1;
        stats.swap_log.push(realized);
    }
    Err(Error::NonConvergence(max_iterations))
}
