use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::seeds::{derive_seed, Stream};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matching::{LinkMatrix, MatchingInstance};
use crate::model::{ChannelSpec, EnvParams, PowerQuantity, UserSpec};

/// One network realization: user placement, channels and per-link fading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub users: Vec<UserSpec>,
    pub channels: Vec<ChannelSpec>,
    pub env: EnvParams,
    /// Small-scale fading `h`, one draw per (channel, user) link.
    pub fading: LinkMatrix,
    pub capacity: usize,
    /// Transmit power used to score links during allocation.
    pub tx_power: PowerQuantity,
    pub seed: u64,
}

impl Scenario {
    pub fn matching_instance(&self) -> Result<MatchingInstance> {
        MatchingInstance::from_links(
            &self.channels,
            &self.users,
            &self.env,
            &self.fading,
            self.tx_power,
            self.capacity,
        )
    }
}

/// Distance from the centre of a point uniform over a disc of radius
/// `radius`; never exactly zero.
pub fn sample_radius<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    radius * u.sqrt()
}

/// Scenario with the configured user and channel counts.
pub fn generate_scenario(config: &RunConfig, seed: u64) -> Result<Scenario> {
    let s = &config.scenario;
    generate_scenario_with(config, s.users, s.channels, s.capacity, seed)
}

/// Scenario with explicit counts; other parameters come from `config`.
pub fn generate_scenario_with(
    config: &RunConfig,
    users: usize,
    channels: usize,
    capacity: usize,
    seed: u64,
) -> Result<Scenario> {
    config.validate()?;
    if channels == 0 || users > channels * capacity {
        return Err(Error::InfeasibleInstance {
            users,
            channels,
            capacity,
        });
    }
    let env = config.env()?;
    let vectors = &config.scenario.user_harvest_multiples;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[Stream::Positions as u64]));
    let user_specs = (0..users)
        .map(|n| {
            let multiples = if vectors.is_empty() {
                &config.mdp.harvest_multiples
            } else {
                &vectors[n % vectors.len()]
            };
            UserSpec::new(
                n,
                sample_radius(env.radius_m, &mut rng),
                env.radius_m,
                config.battery_cap(),
                config.threshold(),
                config.harvest_levels(multiples)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[Stream::Fading as u64]));
    let fading = LinkMatrix::from_fn(channels, users, |_, _| env.fading.sample(&mut rng));
    Ok(Scenario {
        users: user_specs,
        channels: config.channels(channels)?,
        env,
        fading,
        capacity,
        tx_power: config.tx_power(),
        seed,
    })
}
