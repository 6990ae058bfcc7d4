//! Many-to-one matching of users to channels.
//!
//! Each user occupies at most one channel and each channel admits at most
//! `capacity` users. Allocation runs in two stages: a proposal round
//! ([`initialize_matching`]) followed by pairwise swaps until no swap-blocking
//! pair remains ([`ecaa`]).

mod init;
mod preferences;
mod swap;

pub use init::{initialize_matching, Initialization};
pub use preferences::{build_channel_preferences, build_user_preferences, PreferenceList};
pub use swap::{
    ecaa, find_swap_blocking_pair, perform_swap, scan_swap_blocking_pair, swap_evaluation_bound, EcaaOutcome,
    EcaaStats, SwapPair, SwapRecord, DEFAULT_MAX_ITERATIONS,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{channel_gain, link_rate, ChannelSpec, EnvParams, PowerQuantity, UserSpec};

/// Dense channels x users matrix of link quantities (gains or rates).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMatrix {
    channels: usize,
    users: usize,
    data: Vec<f64>,
}

impl LinkMatrix {
    pub fn from_fn(channels: usize, users: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * users);
        for m in 0..channels {
            for n in 0..users {
                data.push(f(m, n));
            }
        }
        LinkMatrix { channels, users, data }
    }

    /// Builds from rows indexed by channel.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let users = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != users) {
            return Err(Error::InvalidArgument("ragged link matrix".into()));
        }
        Ok(LinkMatrix {
            channels: rows.len(),
            users,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn get(&self, channel: usize, user: usize) -> f64 {
        self.data[channel * self.users + user]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn users(&self) -> usize {
        self.users
    }
}

/// Everything the allocation phase needs about one network snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingInstance {
    pub capacity: usize,
    pub gains: LinkMatrix,
    pub distances: Vec<f64>,
    /// Rate of each user on each channel at the common fixed power.
    pub rates: LinkMatrix,
}

impl MatchingInstance {
    pub fn new(capacity: usize, gains: LinkMatrix, distances: Vec<f64>, rates: LinkMatrix) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("channel capacity must be at least 1".into()));
        }
        if gains.channels() == 0 {
            return Err(Error::InvalidArgument("at least one channel is required".into()));
        }
        if gains.users() != distances.len() || rates.users() != distances.len() || rates.channels() != gains.channels()
        {
            return Err(Error::InvalidArgument("gain, rate and distance shapes disagree".into()));
        }
        if rates.data.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument("rates must be finite and non-negative".into()));
        }
        Ok(MatchingInstance {
            capacity,
            gains,
            distances,
            rates,
        })
    }

    /// Derives gains from path loss and fading draws (`fading[m][n]`), then
    /// rates at a fixed transmit power shared by every user.
    pub fn from_links(
        channels: &[ChannelSpec],
        users: &[UserSpec],
        env: &EnvParams,
        fading: &LinkMatrix,
        power: PowerQuantity,
        capacity: usize,
    ) -> Result<Self> {
        let mut gains = Vec::with_capacity(channels.len());
        let mut rates = Vec::with_capacity(channels.len());
        for (m, ch) in channels.iter().enumerate() {
            let mut g_row = Vec::with_capacity(users.len());
            let mut r_row = Vec::with_capacity(users.len());
            for (n, u) in users.iter().enumerate() {
                let g = channel_gain(fading.get(m, n), ch.pathloss_coeff, u.distance_m, env.pathloss_exp)?;
                r_row.push(link_rate(ch, power, g)?);
                g_row.push(g);
            }
            gains.push(g_row);
            rates.push(r_row);
        }
        let distances = users.iter().map(|u| u.distance_m).collect();
        if channels.is_empty() {
            return Err(Error::InvalidArgument("at least one channel is required".into()));
        }
        MatchingInstance::new(
            capacity,
            LinkMatrix::from_rows(&gains)?,
            distances,
            LinkMatrix::from_rows(&rates)?,
        )
    }

    pub fn num_channels(&self) -> usize {
        self.gains.channels()
    }

    pub fn num_users(&self) -> usize {
        self.distances.len()
    }

    pub fn check_feasible(&self) -> Result<()> {
        if self.num_users() > self.num_channels() * self.capacity {
            return Err(Error::InfeasibleInstance {
                users: self.num_users(),
                channels: self.num_channels(),
                capacity: self.capacity,
            });
        }
        Ok(())
    }
}

/// Assignment of users to channels.
///
/// Stored per user, so a user can never hold two channels; the per-channel
/// capacity is checked on construction and preserved by swaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Matching {
    channels: usize,
    capacity: usize,
    assign: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(channels: usize, users: usize, capacity: usize) -> Self {
        Matching {
            channels,
            capacity,
            assign: vec![None; users],
        }
    }

    pub fn from_assignment(channels: usize, capacity: usize, assign: Vec<Option<usize>>) -> Result<Self> {
        let matching = Matching {
            channels,
            capacity,
            assign,
        };
        matching.validate()?;
        Ok(matching)
    }

    pub fn validate(&self) -> Result<()> {
        let mut load = vec![0usize; self.channels];
        for (n, a) in self.assign.iter().enumerate() {
            if let Some(m) = *a {
                if m >= self.channels {
                    return Err(Error::InvalidArgument(format!(
                        "user {n} assigned to unknown channel {m}"
                    )));
                }
                load[m] += 1;
            }
        }
        if let Some(m) = load.iter().position(|&l| l > self.capacity) {
            return Err(Error::InvalidArgument(format!(
                "channel {m} holds {} users, capacity {}",
                load[m], self.capacity
            )));
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_users(&self) -> usize {
        self.assign.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn channel_of(&self, user: usize) -> Option<usize> {
        self.assign[user]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assign
    }

    /// `alpha[m][n]` of the binary formulation.
    pub fn alpha(&self, channel: usize, user: usize) -> bool {
        self.assign[user] == Some(channel)
    }

    pub fn users_on(&self, channel: usize) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(channel))
            .map(|(n, _)| n)
    }

    pub fn load(&self, channel: usize) -> usize {
        self.users_on(channel).count()
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut load = vec![0; self.channels];
        for m in self.assign.iter().flatten() {
            load[*m] += 1;
        }
        load
    }

    pub fn is_complete(&self) -> bool {
        self.assign.iter().all(Option::is_some)
    }

    pub(crate) fn set(&mut self, user: usize, channel: Option<usize>) {
        self.assign[user] = channel;
    }
}

/// Per-player utilities of a matching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilitySnapshot {
    pub users: Vec<Option<f64>>,
    pub channels: Vec<Option<f64>>,
}

impl UtilitySnapshot {
    pub fn of(matching: &Matching, rates: &LinkMatrix) -> Self {
        UtilitySnapshot {
            users: (0..matching.num_users())
                .map(|n| user_utility(matching, n, rates).ok())
                .collect(),
            channels: (0..matching.num_channels())
                .map(|m| channel_utility(matching, m, rates).ok())
                .collect(),
        }
    }
}

/// The user's rate on its channel (the minimum over occupied channels, of
/// which there is exactly one).
pub fn user_utility(matching: &Matching, user: usize, rates: &LinkMatrix) -> Result<f64> {
    matching
        .channel_of(user)
        .map(|m| rates.get(m, user))
        .ok_or_else(|| Error::UndefinedUtility(format!("user {user} is unassigned")))
}

/// Minimum rate among the channel's users.
pub fn channel_utility(matching: &Matching, channel: usize, rates: &LinkMatrix) -> Result<f64> {
    matching
        .users_on(channel)
        .map(|n| rates.get(channel, n))
        .reduce(f64::min)
        .ok_or_else(|| Error::UndefinedUtility(format!("channel {channel} is empty")))
}

/// Smallest user rate across the network, the max-min objective.
pub fn min_user_rate(matching: &Matching, rates: &LinkMatrix) -> Result<f64> {
    (0..matching.num_users())
        .map(|n| user_utility(matching, n, rates))
        .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates() -> LinkMatrix {
        LinkMatrix::from_rows(&[vec![3e4, 9e4, 1e4], vec![7e4, 2e4, 5e4]]).unwrap()
    }

    #[test]
    fn utilities() {
        let m = Matching::from_assignment(2, 2, vec![Some(0), Some(0), None]).unwrap();
        let r = rates();
        assert_eq!(user_utility(&m, 0, &r).unwrap(), 3e4);
        assert!(matches!(user_utility(&m, 2, &r), Err(Error::UndefinedUtility(_))));
        assert_eq!(channel_utility(&m, 0, &r).unwrap(), 3e4);
        assert!(matches!(channel_utility(&m, 1, &r), Err(Error::UndefinedUtility(_))));

        let single = Matching::from_assignment(2, 2, vec![None, None, Some(1)]).unwrap();
        assert_eq!(channel_utility(&single, 1, &r).unwrap(), 5e4);
        assert!(min_user_rate(&single, &r).is_err());
    }

    #[test]
    fn capacity_enforced() {
        assert!(Matching::from_assignment(2, 1, vec![Some(0), Some(0)]).is_err());
        assert!(Matching::from_assignment(2, 1, vec![Some(2)]).is_err());
        let m = Matching::from_assignment(2, 1, vec![Some(1), Some(0)]).unwrap();
        assert!(m.alpha(1, 0) && m.alpha(0, 1) && !m.alpha(0, 0));
        assert_eq!(m.loads(), vec![1, 1]);
    }

    #[test]
    fn instance_shapes() {
        let g = LinkMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(MatchingInstance::new(1, g.clone(), vec![1.0], g.clone()).is_err());
        assert!(MatchingInstance::new(0, g.clone(), vec![1.0, 2.0], g.clone()).is_err());
        let inst = MatchingInstance::new(1, g.clone(), vec![1.0, 2.0], g).unwrap();
        assert!(matches!(inst.check_feasible(), Err(Error::InfeasibleInstance { .. })));
    }
}
