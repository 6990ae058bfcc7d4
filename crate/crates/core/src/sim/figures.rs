//! Parameter sweeps behind each figure, and their CSV tables.
//!
//! | figure | columns |
//! |--------|---------|
//! | fig3 | `n_users, allocator, mean_min_rate_bps, instances` |
//! | fig4 | `slot, gain_state, policy_mw, battery_mw, harvest_mw, offline_mw, offline_battery_mw` |
//! | fig5 | `horizon, optimal_bits, offline_bits` |
//! | fig6 | `horizon, he1_bits, he2_bits, ...` |
//! | fig7 | `slot, user1_mw, user1_battery_mw, user2_mw, ...` |
//! | fig8 | `slot, thr<T>dbm_power_mw, thr<T>dbm_end_battery_mw, ...` |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{run_episode, EpisodeResult};
use super::scenario::generate_scenario_with;
use super::seeds::{derive_seed, Stream};
use crate::baselines::{brute_force_search, random_assignment};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matching::{ecaa, min_user_rate, DEFAULT_MAX_ITERATIONS};
use crate::mdp::{plan, FrameTrace, MdpModel};
use crate::model::{dbm_to_mw, PowerQuantity};
use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure `{s}`, expected one of fig3..fig8")))
    }
}

/// Min-rate of the three allocators on one random instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationSample {
    pub users: usize,
    pub index: usize,
    pub seed: u64,
    pub ecaa: f64,
    pub brute_force: f64,
    pub random: f64,
}

/// Allocation comparison over `experiment.instances` random instances for
/// every user count in `figures.fig3_users`. Instance `i` with `n` users
/// uses the child stream `[Instance, n, i]`.
pub fn allocation_sweep(config: &RunConfig) -> Result<Vec<AllocationSample>> {
    config.validate()?;
    let f = &config.figures;
    let cells: Vec<(usize, usize)> = f
        .fig3_users
        .iter()
        .flat_map(|&n| (0..config.experiment.instances).map(move |i| (n, i)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, i)| {
            let seed = derive_seed(config.experiment.seed, &[Stream::Instance as u64, n as u64, i as u64]);
            let scenario = generate_scenario_with(config, n, f.fig3_channels, f.fig3_capacity, seed)?;
            let instance = scenario.matching_instance()?;
            let ecaa_min = min_user_rate(&ecaa(&instance, DEFAULT_MAX_ITERATIONS)?.matching, &instance.rates)?;
            let brute = brute_force_search(&instance)?.min_rate;
            let random = random_assignment(&instance, derive_seed(seed, &[Stream::Allocation as u64]))?;
            Ok(AllocationSample {
                users: n,
                index: i,
                seed,
                ecaa: ecaa_min,
                brute_force: brute,
                random: min_user_rate(&random, &instance.rates)?,
            })
        })
        .collect()
}

/// Mean throughput of the planned policy and the offline scheme at one
/// horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonPoint {
    pub horizon: usize,
    pub optimal_mean: f64,
    pub offline_mean: f64,
    pub episodes: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn episode_seed(config: &RunConfig, episode: usize) -> u64 {
    derive_seed(config.experiment.seed, &[Stream::Episode as u64, episode as u64])
}

/// `experiment.episodes` frames of `model`, episode `e` on the child stream
/// `[Episode, e]` so every sweep point sees the same chain draws.
fn episodes(config: &RunConfig, model: &MdpModel) -> Result<Vec<EpisodeResult>> {
    let plan = plan(model);
    let battery = config.initial_battery();
    (0..config.experiment.episodes)
        .into_par_iter()
        .map(|e| run_episode(model, &plan, battery, episode_seed(config, e)))
        .collect()
}

/// Throughput against horizon for one harvest vector and threshold.
pub fn horizon_sweep(
    config: &RunConfig,
    multiples: &[f64],
    threshold: PowerQuantity,
    horizons: &[usize],
) -> Result<Vec<HorizonPoint>> {
    config.validate()?;
    horizons
        .iter()
        .map(|&k| {
            let model = config.model(k, multiples, threshold)?;
            let runs = episodes(config, &model)?;
            Ok(HorizonPoint {
                horizon: k,
                optimal_mean: mean(runs.iter().map(|r| r.optimal.throughput())),
                offline_mean: mean(runs.iter().map(|r| r.offline.throughput())),
                episodes: runs.len(),
            })
        })
        .collect()
}

/// Mean per-slot behaviour of the planned policy at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTrace {
    pub threshold_dbm: f64,
    pub mean_power_mw: Vec<f64>,
    /// Mean battery left after each slot's action and harvest.
    pub mean_end_battery_mw: Vec<f64>,
}

impl ThresholdTrace {
    pub fn min_end_battery(&self) -> f64 {
        self.mean_end_battery_mw.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn slot_means(traces: &[&FrameTrace], horizon: usize, f: impl Fn(&crate::mdp::SlotRecord) -> f64) -> Vec<f64> {
    (0..horizon)
        .map(|k| mean(traces.iter().map(|t| f(&t.slots[k]))))
        .collect()
}

/// Policy traces at each threshold in `figures.thresholds_dbm`, averaged
/// over episodes, with the configured horizon and harvest vector.
pub fn threshold_sweep(config: &RunConfig) -> Result<Vec<ThresholdTrace>> {
    config.validate()?;
    let k = config.mdp.horizon;
    config
        .figures
        .thresholds_dbm
        .iter()
        .map(|&t| {
            let model = config.model(k, &config.mdp.harvest_multiples, dbm_to_mw(t))?;
            let runs = episodes(config, &model)?;
            let traces: Vec<&FrameTrace> = runs.iter().map(|r| &r.optimal).collect();
            Ok(ThresholdTrace {
                threshold_dbm: t,
                mean_power_mw: slot_means(&traces, k, |s| s.action.mw()),
                mean_end_battery_mw: slot_means(&traces, k, |s| s.next_battery.mw()),
            })
        })
        .collect()
}

fn fig3(config: &RunConfig) -> Result<Table> {
    let samples = allocation_sweep(config)?;
    let mut t = Table::new(["n_users", "allocator", "mean_min_rate_bps", "instances"]);
    for &n in &config.figures.fig3_users {
        let cell: Vec<&AllocationSample> = samples.iter().filter(|s| s.users == n).collect();
        let series: [(&str, fn(&AllocationSample) -> f64); 3] = [
            ("brute_force", |s| s.brute_force),
            ("ecaa", |s| s.ecaa),
            ("random", |s| s.random),
        ];
        for (name, get) in series {
            t.push(vec![
                n.into(),
                name.into(),
                mean(cell.iter().map(|s| get(s))).into(),
                cell.len().into(),
            ]);
        }
    }
    Ok(t)
}

fn fig4(config: &RunConfig) -> Result<Table> {
    let model = config.reference_model()?;
    let run = run_episode(&model, &plan(&model), config.initial_battery(), episode_seed(config, 0))?;
    let mut t = Table::new([
        "slot",
        "gain_state",
        "policy_mw",
        "battery_mw",
        "harvest_mw",
        "offline_mw",
        "offline_battery_mw",
    ]);
    for (a, b) in run.optimal.slots.iter().zip(&run.offline.slots) {
        t.push(vec![
            a.slot.into(),
            a.gain_state.into(),
            a.action.mw().into(),
            a.battery.mw().into(),
            a.harvest.mw().into(),
            b.action.mw().into(),
            b.battery.mw().into(),
        ]);
    }
    Ok(t)
}

fn fig5(config: &RunConfig) -> Result<Table> {
    let points = horizon_sweep(
        config,
        &config.mdp.harvest_multiples,
        config.threshold(),
        &config.figures.horizons,
    )?;
    let mut t = Table::new(["horizon", "optimal_bits", "offline_bits"]);
    for p in points {
        t.push(vec![p.horizon.into(), p.optimal_mean.into(), p.offline_mean.into()]);
    }
    Ok(t)
}

fn fig6(config: &RunConfig) -> Result<Table> {
    let f = &config.figures;
    let curves = f
        .rate_vectors
        .iter()
        .map(|v| horizon_sweep(config, v, config.threshold(), &f.horizons))
        .collect::<Result<Vec<_>>>()?;
    let mut headers = vec!["horizon".to_string()];
    headers.extend((1..=curves.len()).map(|i| format!("he{i}_bits")));
    let mut t = Table::new(headers);
    for (row, &k) in f.horizons.iter().enumerate() {
        let mut cells = vec![Cell::from(k)];
        cells.extend(curves.iter().map(|c| Cell::from(c[row].optimal_mean)));
        t.push(cells);
    }
    Ok(t)
}

fn fig7(config: &RunConfig) -> Result<Table> {
    let k = config.mdp.horizon;
    let seed = episode_seed(config, 0);
    let runs = config
        .figures
        .user_vectors
        .iter()
        .map(|v| {
            let model = config.model(k, v, config.threshold())?;
            run_episode(&model, &plan(&model), config.initial_battery(), seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut headers = vec!["slot".to_string()];
    for i in 1..=runs.len() {
        headers.push(format!("user{i}_mw"));
        headers.push(format!("user{i}_battery_mw"));
    }
    let mut t = Table::new(headers);
    for slot in 0..k {
        let mut cells = vec![Cell::from(slot + 1)];
        for r in &runs {
            let s = &r.optimal.slots[slot];
            cells.push(s.action.mw().into());
            cells.push(s.battery.mw().into());
        }
        t.push(cells);
    }
    Ok(t)
}

fn fig8(config: &RunConfig) -> Result<Table> {
    let traces = threshold_sweep(config)?;
    let mut headers = vec!["slot".to_string()];
    for tr in &traces {
        headers.push(format!("thr{}dbm_power_mw", tr.threshold_dbm));
        headers.push(format!("thr{}dbm_end_battery_mw", tr.threshold_dbm));
    }
    let mut t = Table::new(headers);
    for slot in 0..config.mdp.horizon {
        let mut cells = vec![Cell::from(slot + 1)];
        for tr in &traces {
            cells.push(tr.mean_power_mw[slot].into());
            cells.push(tr.mean_end_battery_mw[slot].into());
        }
        t.push(cells);
    }
    Ok(t)
}

/// Runs the sweep behind `id` and returns its CSV table.
pub fn figure_experiments(id: FigureId, config: &RunConfig) -> Result<Table> {
    match id {
        FigureId::Fig3 => fig3(config),
        FigureId::Fig4 => fig4(config),
        FigureId::Fig5 => fig5(config),
        FigureId::Fig6 => fig6(config),
        FigureId::Fig7 => fig7(config),
        FigureId::Fig8 => fig8(config),
    }
}
