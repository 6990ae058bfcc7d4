//! Run configuration: the user-facing parameter document.
//!
//! Powers are given in dBm and converted to mW here. Every field has a
//! default taken from the reference setup, so an empty document is a valid
//! configuration. [`RunConfig::validate`] reports the first offending field
//! by its dotted path.

use serde::{Deserialize, Serialize};

use crate::baselines::{count_assignments, BRUTE_FORCE_LIMIT};
use crate::chain::{reference_gain_matrix, reference_harvest_matrix, StochasticMatrix};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, MdpSpec};
use crate::model::{dbm_to_mw, noise_power, ChannelSpec, EnvParams, FadingModel, PowerQuantity};

pub const SCHEMA_VERSION: u32 = 1;

/// Grid sizes above this are rejected to keep planning tables in memory.
pub const MAX_BATTERY_LEVELS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub mdp: MdpConfig,
    pub experiment: ExperimentConfig,
    pub figures: FigureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: usize,
    pub channels: usize,
    /// Users per channel, `D`.
    pub capacity: usize,
    pub radius_m: f64,
    pub pathloss_exp: f64,
    pub pathloss_coeff: f64,
    pub bandwidth_hz: f64,
    pub fading: FadingModel,
    /// Fixed transmit power used to rank and score links during allocation.
    pub tx_power_dbm: f64,
    /// Harvest multiples handed to users in turn (user `n` gets entry
    /// `n % len`); empty means every user gets `mdp.harvest_multiples`.
    pub user_harvest_multiples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    pub horizon: usize,
    pub battery_levels: usize,
    pub battery_cap_dbm: f64,
    pub threshold_dbm: f64,
    /// Harvest unit `H_e`.
    pub harvest_unit_dbm: f64,
    /// Harvest per chain state as linear multiples of `H_e`.
    pub harvest_multiples: Vec<f64>,
    pub harvest_matrix: Vec<Vec<f64>>,
    pub gain_states: Vec<f64>,
    pub gain_matrix: Vec<Vec<f64>>,
    pub initial_battery_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monte Carlo episodes per experiment point.
    pub episodes: usize,
    /// Random instances per point for allocation experiments.
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureConfig {
    pub fig3_users: Vec<usize>,
    pub fig3_channels: usize,
    pub fig3_capacity: usize,
    pub horizons: Vec<usize>,
    pub rate_vectors: Vec<Vec<f64>>,
    pub user_vectors: Vec<Vec<f64>>,
    pub thresholds_dbm: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::default(),
            mdp: MdpConfig::default(),
            experiment: ExperimentConfig::default(),
            figures: FigureConfig::default(),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 24,
            channels: 8,
            capacity: 6,
            radius_m: 1000.0,
            pathloss_exp: 3.5,
            pathloss_coeff: 1.0,
            bandwidth_hz: 125e3,
            fading: FadingModel::Rayleigh,
            tx_power_dbm: 30.0,
            user_harvest_multiples: Vec::new(),
        }
    }
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            horizon: 25,
            battery_levels: crate::mdp::DEFAULT_BATTERY_LEVELS,
            battery_cap_dbm: 30.0,
            threshold_dbm: 12.0,
            harvest_unit_dbm: 15.0,
            harvest_multiples: vec![0.0, 2.0, 5.0, 8.0],
            harvest_matrix: reference_harvest_matrix().rows(),
            gain_states: vec![0.5e-4, 1e-4, 1.5e-4],
            gain_matrix: reference_gain_matrix().rows(),
            initial_battery_mw: 0.0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            episodes: 500,
            instances: 50,
        }
    }
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig {
            fig3_users: (4..=9).collect(),
            fig3_channels: 3,
            fig3_capacity: 3,
            horizons: (2..=8).map(|i| 5 * i).collect(),
            rate_vectors: vec![
                vec![0.0, 5.0, 8.0, 11.0],
                vec![0.0, 4.0, 7.0, 10.0],
                vec![0.0, 2.0, 5.0, 8.0],
            ],
            user_vectors: vec![
                vec![0.0, 1.0, 4.0, 7.0],
                vec![0.0, 2.0, 5.0, 8.0],
                vec![0.0, 3.0, 6.0, 9.0],
            ],
            thresholds_dbm: vec![12.0, 18.0, 24.0],
        }
    }
}

fn positive(path: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            path,
            format!("must be a positive finite number, got {x}"),
        ))
    }
}

fn finite(path: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {x}")))
    }
}

fn matrix(path: &str, rows: &[Vec<f64>], size: usize) -> Result<StochasticMatrix> {
    if rows.len() != size {
        return Err(Error::config(
            path,
            format!("needs {size} rows to match its state list, got {}", rows.len()),
        ));
    }
    StochasticMatrix::new(rows.to_vec()).map_err(|e| Error::config(path, e.to_string()))
}

fn multiples(path: &str, values: &[f64]) -> Result<()> {
    if values.first() != Some(&0.0) {
        return Err(Error::config(path, "must start with 0"));
    }
    for (i, w) in values.windows(2).enumerate() {
        if !(w[1].is_finite() && w[1] > w[0]) {
            return Err(Error::config(
                format!("{path}[{}]", i + 1),
                "must be finite and strictly increasing",
            ));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        StochasticMatrix::new(self.mdp.harvest_matrix.clone())
            .map_err(|e| Error::config("mdp.harvest_matrix", e.to_string()))?;
        self.validate_scenario()?;
        self.validate_mdp()?;
        self.validate_experiment()?;
        self.validate_figures()
    }

    fn validate_scenario(&self) -> Result<()> {
        let s = &self.scenario;
        if s.channels == 0 {
            return Err(Error::config("scenario.channels", "must be at least 1"));
        }
        if s.capacity == 0 {
            return Err(Error::config("scenario.capacity", "must be at least 1"));
        }
        if s.users > s.channels * s.capacity {
            return Err(Error::config(
                "scenario.users",
                format!(
                    "{} users exceed {} channels x capacity {}",
                    s.users, s.channels, s.capacity
                ),
            ));
        }
        positive("scenario.radius_m", s.radius_m)?;
        if !(s.pathloss_exp.is_finite() && s.pathloss_exp > 2.0) {
            return Err(Error::config("scenario.pathloss_exp", "must exceed 2"));
        }
        positive("scenario.pathloss_coeff", s.pathloss_coeff)?;
        positive("scenario.bandwidth_hz", s.bandwidth_hz)?;
        finite("scenario.tx_power_dbm", s.tx_power_dbm)?;
        for (i, v) in s.user_harvest_multiples.iter().enumerate() {
            self.harvest_vector(&format!("scenario.user_harvest_multiples[{i}]"), v)?;
        }
        Ok(())
    }

    fn validate_mdp(&self) -> Result<()> {
        let m = &self.mdp;
        if m.horizon == 0 {
            return Err(Error::config("mdp.horizon", "must be at least 1"));
        }
        if !(2..=MAX_BATTERY_LEVELS).contains(&m.battery_levels) {
            return Err(Error::config(
                "mdp.battery_levels",
                format!("must lie in 2..={MAX_BATTERY_LEVELS}"),
            ));
        }
        finite("mdp.battery_cap_dbm", m.battery_cap_dbm)?;
        self.threshold_ok("mdp.threshold_dbm", m.threshold_dbm)?;
        finite("mdp.harvest_unit_dbm", m.harvest_unit_dbm)?;
        self.harvest_vector("mdp.harvest_multiples", &m.harvest_multiples)?;
        if m.gain_states.is_empty() {
            return Err(Error::config("mdp.gain_states", "must not be empty"));
        }
        for (i, g) in m.gain_states.iter().enumerate() {
            positive(&format!("mdp.gain_states[{i}]"), *g)?;
        }
        matrix("mdp.gain_matrix", &m.gain_matrix, m.gain_states.len())?;
        let cap = self.battery_cap().mw();
        if !(m.initial_battery_mw.is_finite() && (0.0..=cap).contains(&m.initial_battery_mw)) {
            return Err(Error::config(
                "mdp.initial_battery_mw",
                format!("must lie in [0, {cap}]"),
            ));
        }
        self.model(1, &m.harvest_multiples, self.threshold()).map(|_| ())
    }

    fn validate_experiment(&self) -> Result<()> {
        if self.experiment.episodes == 0 {
            return Err(Error::config("experiment.episodes", "must be at least 1"));
        }
        if self.experiment.instances == 0 {
            return Err(Error::config("experiment.instances", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_figures(&self) -> Result<()> {
        let f = &self.figures;
        if f.fig3_channels == 0 || f.fig3_capacity == 0 {
            return Err(Error::config(
                "figures.fig3_channels",
                "channels and capacity must be at least 1",
            ));
        }
        for (i, &n) in f.fig3_users.iter().enumerate() {
            let path = format!("figures.fig3_users[{i}]");
            if n == 0 || n > f.fig3_channels * f.fig3_capacity {
                return Err(Error::config(path, format!("{n} users do not fit the fig3 channels")));
            }
            if count_assignments(n, f.fig3_channels, f.fig3_capacity) > BRUTE_FORCE_LIMIT {
                return Err(Error::config(path, "too many assignments for exhaustive search"));
            }
        }
        for (i, &k) in f.horizons.iter().enumerate() {
            if k == 0 {
                return Err(Error::config(format!("figures.horizons[{i}]"), "must be at least 1"));
            }
        }
        for (i, v) in f.rate_vectors.iter().enumerate() {
            self.harvest_vector(&format!("figures.rate_vectors[{i}]"), v)?;
        }
        for (i, v) in f.user_vectors.iter().enumerate() {
            self.harvest_vector(&format!("figures.user_vectors[{i}]"), v)?;
        }
        for (i, &t) in f.thresholds_dbm.iter().enumerate() {
            self.threshold_ok(&format!("figures.thresholds_dbm[{i}]"), t)?;
        }
        Ok(())
    }

    fn threshold_ok(&self, path: &str, dbm: f64) -> Result<()> {
        finite(path, dbm)?;
        if dbm > self.mdp.battery_cap_dbm {
            return Err(Error::config(path, "threshold exceeds the battery capacity"));
        }
        Ok(())
    }

    /// A harvest vector must be a valid multiple list with one state per
    /// row of the harvest matrix.
    fn harvest_vector(&self, path: &str, values: &[f64]) -> Result<()> {
        multiples(path, values)?;
        let states = self.mdp.harvest_matrix.len();
        if values.len() != states {
            return Err(Error::config(
                path,
                format!(
                    "has {} entries but mdp.harvest_matrix has {states} states",
                    values.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn env(&self) -> Result<EnvParams> {
        EnvParams::new(self.scenario.pathloss_exp, self.scenario.radius_m, self.scenario.fading)
    }

    /// Channel list for allocation experiments with `count` channels.
    pub fn channels(&self, count: usize) -> Result<Vec<ChannelSpec>> {
        let noise = noise_power(self.scenario.bandwidth_hz)?;
        (0..count)
            .map(|m| ChannelSpec::new(m, self.scenario.bandwidth_hz, self.scenario.pathloss_coeff, noise))
            .collect()
    }

    pub fn tx_power(&self) -> PowerQuantity {
        dbm_to_mw(self.scenario.tx_power_dbm)
    }

    pub fn battery_cap(&self) -> PowerQuantity {
        dbm_to_mw(self.mdp.battery_cap_dbm)
    }

    pub fn threshold(&self) -> PowerQuantity {
        dbm_to_mw(self.mdp.threshold_dbm)
    }

    pub fn initial_battery(&self) -> PowerQuantity {
        PowerQuantity::from_mw(self.mdp.initial_battery_mw).expect("validated initial battery")
    }

    /// Harvest amounts in mW for a vector of `H_e` multiples.
    pub fn harvest_levels(&self, multiples: &[f64]) -> Result<Vec<PowerQuantity>> {
        let unit = dbm_to_mw(self.mdp.harvest_unit_dbm);
        multiples.iter().map(|&k| unit.scaled(k)).collect()
    }

    pub fn harvest_chain(&self) -> Result<StochasticMatrix> {
        StochasticMatrix::new(self.mdp.harvest_matrix.clone())
    }

    pub fn gain_chain(&self) -> Result<StochasticMatrix> {
        StochasticMatrix::new(self.mdp.gain_matrix.clone())
    }

    /// Single-user planning model on one configured channel.
    pub fn model(&self, horizon: usize, multiples: &[f64], threshold: PowerQuantity) -> Result<MdpModel> {
        MdpModel::new(MdpSpec {
            horizon,
            battery_levels: self.mdp.battery_levels,
            battery_cap: self.battery_cap(),
            threshold,
            harvest_levels: self.harvest_levels(multiples)?,
            harvest_chain: self.harvest_chain()?,
            gain_states: self.mdp.gain_states.clone(),
            gain_chain: self.gain_chain()?,
            bandwidth_hz: self.scenario.bandwidth_hz,
            noise: noise_power(self.scenario.bandwidth_hz)?,
        })
    }

    /// Model with the configured horizon, harvest vector and threshold.
    pub fn reference_model(&self) -> Result<MdpModel> {
        self.model(self.mdp.horizon, &self.mdp.harvest_multiples, self.threshold())
    }
}
