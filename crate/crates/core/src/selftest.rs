//! Quick built-in consistency checks: planner against the exhaustive
//! oracle, Bellman recheck, stationary distribution and matching stability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{reference_harvest_matrix, stationary_distribution, StochasticMatrix};
use crate::config::RunConfig;
use crate::error::Result;
use crate::matching::{ecaa, find_swap_blocking_pair, swap_evaluation_bound, DEFAULT_MAX_ITERATIONS};
use crate::mdp::{bellman_residual, exhaustive_policy_oracle, plan, MdpModel, MdpSpec};
use crate::model::PowerQuantity;
use crate::sim::generate_scenario_with;
use crate::sim::seeds::{derive_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Result<StochasticMatrix> {
    let rows = (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|x| x / sum).collect()
        })
        .collect();
    StochasticMatrix::new(rows)
}

fn tiny_model(rng: &mut ChaCha8Rng) -> Result<MdpModel> {
    let q = rng.random_range(1..=3usize);
    let g = rng.random_range(1..=3usize);
    let mut harvest = vec![PowerQuantity::ZERO];
    for i in 1..q {
        harvest.push(PowerQuantity::from_mw(i as f64 * rng.random_range(0.5..2.0))?);
    }
    MdpModel::new(MdpSpec {
        horizon: rng.random_range(1..=3),
        battery_levels: rng.random_range(2..=6),
        battery_cap: PowerQuantity::from_mw(4.0)?,
        threshold: PowerQuantity::from_mw(rng.random_range(0.2..2.0))?,
        harvest_levels: harvest,
        harvest_chain: random_matrix(rng, q)?,
        gain_states: (0..g).map(|_| rng.random_range(0.1..3.0)).collect(),
        gain_chain: random_matrix(rng, g)?,
        bandwidth_hz: 1.0,
        noise: PowerQuantity::from_mw(1.0)?,
    })
}

fn oracle_check(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut states = 0;
    for _ in 0..8 {
        let model = tiny_model(&mut rng)?;
        let p = plan(&model);
        for s in 0..model.num_states() {
            let oracle = exhaustive_policy_oracle(&model, model.state_at(s))?;
            worst = worst.max((p.values.get(1, s) - oracle).abs() / oracle.abs().max(1.0));
            states += 1;
        }
    }
    Ok(check(
        "planner_matches_oracle",
        worst <= 1e-9,
        format!("8 tiny models, {states} states, worst scaled gap {worst:.2e}"),
    ))
}

fn bellman_check(config: &RunConfig) -> Result<Check> {
    let model = config.model(5, &config.mdp.harvest_multiples, config.threshold())?;
    let residual = bellman_residual(&model, &plan(&model));
    Ok(check(
        "bellman_recheck",
        residual <= 1e-9,
        format!("reference model, K=5: worst scaled residual {residual:.2e}"),
    ))
}

fn stationary_check() -> Result<Check> {
    let pi = stationary_distribution(&reference_harvest_matrix())?;
    let expected = [0.13, 0.37, 0.37, 0.13];
    let dev = pi.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check(
        "harvest_chain_stationary",
        dev <= 0.005,
        format!("{pi:.4?}, max deviation {dev:.4}"),
    ))
}

fn matching_check(config: &RunConfig, seed: u64) -> Result<Check> {
    let mut problems = Vec::new();
    let runs = 20;
    for i in 0..runs {
        let users = 1 + i % 12;
        let scenario = generate_scenario_with(
            config,
            users,
            3,
            4,
            derive_seed(seed, &[Stream::Instance as u64, i as u64]),
        )?;
        let instance = scenario.matching_instance()?;
        let out = ecaa(&instance, DEFAULT_MAX_ITERATIONS)?;
        if find_swap_blocking_pair(&out.matching, &instance.rates).is_some() {
            problems.push(format!("instance {i} has a blocking pair"));
        }
        if out.stats.init_proposals > 3 * users
            || out.stats.max_evaluations_per_iteration as f64 > swap_evaluation_bound(4, users, 3)
        {
            problems.push(format!("instance {i} exceeds an operation bound"));
        }
    }
    Ok(check(
        "matching_stable_within_bounds",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{runs} instances stable, operation counts within bounds")
        } else {
            problems.join("; ")
        },
    ))
}

pub fn run_selftest(config: &RunConfig, seed: u64) -> Result<SelftestReport> {
    Ok(SelftestReport {
        checks: vec![
            oracle_check(seed)?,
            bellman_check(config)?,
            stationary_check()?,
            matching_check(config, seed)?,
        ],
    })
}
