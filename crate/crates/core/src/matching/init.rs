use serde::Serialize;

use super::{Matching, PreferenceList};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Initialization {
    pub matching: Matching,
    pub proposals: usize,
    pub rounds: usize,
    /// Channels left empty once every user is placed.
    pub vacant_channels: Vec<usize>,
}

/// Proposal rounds: each unplaced user proposes to its best channel not yet
/// tried; a channel keeps its `capacity` most preferred users among those it
/// holds and the new proposers, rejecting the rest.
///
/// Every user proposes to each channel at most once, so at most `M * N`
/// proposals are made. A channel still vacant at the end would need to take
/// a user away from another channel, which breaks the one-channel-per-user
/// rule; such channels are reported instead.
pub fn initialize_matching(
    user_prefs: &[PreferenceList],
    channel_prefs: &[PreferenceList],
    capacity: usize,
) -> Result<Initialization> {
    let users = user_prefs.len();
    let channels = channel_prefs.len();
    if channels == 0 || capacity == 0 {
        return Err(Error::InvalidArgument(
            "need at least one channel of positive capacity".into(),
        ));
    }
    if users > channels * capacity {
        return Err(Error::InfeasibleInstance {
            users,
            channels,
            capacity,
        });
    }

    // rank[m][n]: position of user n in channel m's list
    let rank: Vec<Vec<usize>> = channel_prefs
        .iter()
        .map(|p| {
            let mut r = vec![usize::MAX; users];
            for (pos, &n) in p.ranked.iter().enumerate() {
                r[n] = pos;
            }
            r
        })
        .collect();

    let mut held: Vec<Vec<usize>> = vec![Vec::new(); channels];
    let mut next_choice = vec![0usize; users];
    let mut unmatched: Vec<usize> = (0..users).collect();
    let mut proposals = 0;
    let mut rounds = 0;

    while !unmatched.is_empty() {
        rounds += 1;
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); channels];
        for &n in &unmatched {
            let list = &user_prefs[n].ranked;
            let m = *list.get(next_choice[n]).ok_or(Error::InfeasibleInstance {
                users,
                channels,
                capacity,
            })?;
            next_choice[n] += 1;
            proposals += 1;
            incoming[m].push(n);
        }

        let mut rejected = Vec::new();
        for (m, proposers) in incoming.into_iter().enumerate() {
            if proposers.is_empty() {
                continue;
            }
            let pool = &mut held[m];
            pool.extend(proposers);
            if pool.len() > capacity {
                pool.sort_by_key(|&n| (rank[m][n], n));
                rejected.extend(pool.drain(capacity..));
            }
        }
        rejected.sort_unstable();
        unmatched = rejected;
    }

    let mut matching = Matching::empty(channels, users, capacity);
    for (m, pool) in held.iter().enumerate() {
        for &n in pool {
            matching.set(n, Some(m));
        }
    }
    let vacant_channels = (0..channels).filter(|&m| held[m].is_empty()).collect();
    Ok(Initialization {
        matching,
        proposals,
        rounds,
        vacant_channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{build_channel_preferences, build_user_preferences, LinkMatrix};

    fn run(gains: &[Vec<f64>], distances: &[f64], capacity: usize) -> Result<Initialization> {
        let g = LinkMatrix::from_rows(gains).unwrap();
        initialize_matching(
            &build_user_preferences(&g),
            &build_channel_preferences(distances, g.channels()),
            capacity,
        )
    }

    #[test]
    fn single_pair() {
        let init = run(&[vec![1.0]], &[10.0], 1).unwrap();
        assert_eq!(init.matching.assignment(), &[Some(0)]);
        assert_eq!(init.proposals, 1);
    }

    #[test]
    fn closer_user_wins_contested_channel() {
        // Both prefer channel 0; user 1 is closer.
        // Round 1: both propose to 0, channel 0 keeps user 1.
        // Round 2: user 0 proposes to channel 1 and is accepted.
        let init = run(&[vec![0.9, 0.8], vec![0.1, 0.2]], &[200.0, 100.0], 1).unwrap();
        assert_eq!(init.matching.assignment(), &[Some(1), Some(0)]);
        assert_eq!(init.proposals, 3);
        assert_eq!(init.rounds, 2);
    }

    #[test]
    fn capacity_admits_all() {
        let init = run(&[vec![1.0, 2.0, 3.0]], &[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(init.matching.assignment(), &[Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn infeasible_rejected() {
        assert!(matches!(
            run(&[vec![1.0, 2.0, 3.0]], &[1.0, 2.0, 3.0], 2),
            Err(Error::InfeasibleInstance { .. })
        ));
    }

    #[test]
    fn vacant_channel_reported() {
        let init = run(&[vec![0.9], vec![0.1]], &[5.0], 1).unwrap();
        assert_eq!(init.matching.assignment(), &[Some(0)]);
        assert_eq!(init.vacant_channels, vec![1]);
    }

    #[test]
    fn held_user_displaced_by_closer_latecomer() {
        // Round 1: L0 takes U0; U1 and U2 both want L1, U1 is closer.
        // Round 2: U2 tries L0 and displaces U0 (200 m < 300 m).
        // Round 3: U0 falls back to L2.
        let gains = [vec![0.9, 0.5, 0.6], vec![0.1, 0.9, 0.9], vec![0.5, 0.1, 0.1]];
        let init = run(&gains, &[300.0, 100.0, 200.0], 1).unwrap();
        assert_eq!(init.matching.assignment(), &[Some(2), Some(1), Some(0)]);
        assert_eq!(init.proposals, 5);
        assert_eq!(init.rounds, 3);
        assert!(init.vacant_channels.is_empty());
    }
}
