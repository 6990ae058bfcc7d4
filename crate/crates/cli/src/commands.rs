use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wpiot::config::RunConfig;
use wpiot::matching::{
    ecaa, find_swap_blocking_pair, min_user_rate, swap_evaluation_bound, UtilitySnapshot, DEFAULT_MAX_ITERATIONS,
};
use wpiot::mdp::{plan, policy_table, read_policy_csv};
use wpiot::selftest::run_selftest;
use wpiot::sim::seeds::{derive_seed, Stream};
use wpiot::sim::{figure_experiments, generate_scenario, run_full_pipeline, sample_initial, FigureId, MdpSettings};
use wpiot::table::{Cell, Table};

use crate::error::CliError;

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    pub summary: Value,
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn seed(&self) -> u64 {
        self.config.experiment.seed
    }

    fn prepare(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<String, CliError> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(name.to_string())
    }

    fn write_table(&self, name: &str, table: &Table) -> Result<String, CliError> {
        self.write(name, table.to_csv_string().as_bytes())
    }

    /// Writes `<stem>_manifest.json` and returns the summary.
    fn finish(&self, stem: &str, command: &str, mut outputs: Vec<String>, summary: Value) -> Result<Value, CliError> {
        let name = format!("{stem}_manifest.json");
        outputs.push(name.clone());
        let manifest = Manifest {
            tool: "wpiot".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: self.seed(),
            config: self.config.clone(),
            outputs,
            summary: summary.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        self.write(&name, format!("{text}\n").as_bytes())?;
        Ok(summary)
    }
}

pub fn allocate(ctx: &Context) -> Result<Value, CliError> {
    ctx.prepare()?;
    let scenario = generate_scenario(&ctx.config, derive_seed(ctx.seed(), &[Stream::Scenario as u64]))?;
    let instance = scenario.matching_instance()?;
    let outcome = ecaa(&instance, DEFAULT_MAX_ITERATIONS)?;
    let utilities = UtilitySnapshot::of(&outcome.matching, &instance.rates);

    let mut table = Table::new(["user", "channel", "distance_m", "rate_bps"]);
    for (n, user) in scenario.users.iter().enumerate() {
        let channel = outcome.matching.channel_of(n);
        table.push(vec![
            n.into(),
            channel.map_or(Cell::Text(String::new()), Cell::from),
            user.distance_m.into(),
            utilities.users[n].unwrap_or(0.0).into(),
        ]);
    }
    let csv = ctx.write_table("allocation.csv", &table)?;

    let (users, channels, capacity) = (instance.num_users(), instance.num_channels(), instance.capacity);
    let stats = &outcome.stats;
    let summary = json!({
        "matching": outcome.matching.assignment(),
        "user_utilities_bps": utilities.users,
        "channel_utilities_bps": utilities.channels,
        "min_rate_bps": if users == 0 { 0.0 } else { min_user_rate(&outcome.matching, &instance.rates)? },
        "stable": find_swap_blocking_pair(&outcome.matching, &instance.rates).is_none(),
        "stats": {
            "init_proposals": stats.init_proposals,
            "proposal_bound": channels * users,
            "init_rounds": stats.init_rounds,
            "vacant_channels": stats.vacant_channels,
            "iterations": stats.iterations,
            "swaps": stats.swaps,
            "swap_evaluations": stats.swap_evaluations,
            "max_evaluations_per_iteration": stats.max_evaluations_per_iteration,
            "evaluation_bound": swap_evaluation_bound(capacity, users, channels),
        },
    });
    ctx.finish("allocate", "allocate", vec![csv], summary)
}

pub fn plan_cmd(ctx: &Context) -> Result<Value, CliError> {
    ctx.prepare()?;
    let model = ctx.config.reference_model()?;
    let planned = plan(&model);
    let bytes = policy_table(&model, &planned).to_csv_string().into_bytes();
    let cache = ctx.out.join("policy.csv");
    let reused = match fs::read(&cache) {
        Ok(existing) => {
            read_policy_csv(&model, existing.as_slice()).is_ok_and(|p| p == planned.policy) && existing == bytes
        }
        Err(_) => false,
    };
    let csv = if reused {
        "policy.csv".to_string()
    } else {
        ctx.write("policy.csv", &bytes)?
    };

    let first = planned.values.slice(1);
    let initial = sample_initial(
        &model,
        ctx.config.initial_battery(),
        derive_seed(ctx.seed(), &[Stream::Episode as u64, 0]),
    );
    let (b0, _) = model.snap_battery(initial.battery);
    let summary = json!({
        "horizon": model.horizon(),
        "battery_levels": model.battery_levels(),
        "harvest_states": model.num_harvest_states(),
        "gain_states": model.num_gain_states(),
        "states_per_slot": model.num_states(),
        "state_space": model.num_states() * model.horizon(),
        "min_tx_steps": model.min_tx_steps(),
        "harvest_steps": model.harvest_steps(),
        "v1_max": first.iter().copied().fold(0.0, f64::max),
        "v1_mean": first.iter().sum::<f64>() / first.len() as f64,
        "v1_initial_battery": (0..model.num_harvest_states())
            .flat_map(|h| (0..model.num_gain_states()).map(move |g| (h, g)))
            .map(|(h, g)| first[model.state_index(wpiot::mdp::MdpState { battery: b0, harvest: h, gain: g })])
            .fold(0.0, f64::max),
        "cache": if reused { "unchanged" } else { "written" },
    });
    ctx.finish("plan", "plan", vec![csv], summary)
}

pub fn simulate(ctx: &Context) -> Result<Value, CliError> {
    ctx.prepare()?;
    let settings = MdpSettings::from_config(&ctx.config)?;
    let episodes = ctx.config.experiment.episodes;
    let results = (0..episodes)
        .map(|e| {
            let e = e as u64;
            let scenario = generate_scenario(&ctx.config, derive_seed(ctx.seed(), &[Stream::Scenario as u64, e]))?;
            run_full_pipeline(
                &scenario,
                &settings,
                derive_seed(ctx.seed(), &[Stream::Episode as u64, e]),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new([
        "episode",
        "users",
        "min_rate_bps",
        "network_throughput_bits",
        "transmit_slots",
        "iterations",
        "swaps",
    ]);
    for (e, r) in results.iter().enumerate() {
        table.push(vec![
            e.into(),
            r.users.len().into(),
            r.min_rate_bps.into(),
            r.network_throughput.into(),
            r.users.iter().map(|u| u.trace.transmit_slots()).sum::<usize>().into(),
            r.allocation.stats.iterations.into(),
            r.allocation.stats.swaps.into(),
        ]);
    }
    let mut traces = Table::new([
        "user",
        "channel",
        "slot",
        "battery_mw",
        "action_mw",
        "harvest_mw",
        "rate_bps",
        "next_battery_mw",
    ]);
    if let Some(first) = results.first() {
        for u in &first.users {
            for s in &u.trace.slots {
                traces.push(vec![
                    u.user.into(),
                    u.channel.into(),
                    s.slot.into(),
                    s.battery.mw().into(),
                    s.action.mw().into(),
                    s.harvest.mw().into(),
                    s.rate.into(),
                    s.next_battery.mw().into(),
                ]);
            }
        }
    }
    let outputs = vec![
        ctx.write_table("simulate.csv", &table)?,
        ctx.write_table("simulate_traces.csv", &traces)?,
    ];
    let n = results.len().max(1) as f64;
    let summary = json!({
        "episodes": results.len(),
        "mean_min_rate_bps": results.iter().map(|r| r.min_rate_bps).sum::<f64>() / n,
        "mean_network_throughput_bits": results.iter().map(|r| r.network_throughput).sum::<f64>() / n,
        "throughput_recomputes": results.iter().all(|r| {
            (r.network_throughput - r.recomputed_throughput()).abs() <= 1e-9 * r.network_throughput.abs().max(1.0)
        }),
    });
    ctx.finish("simulate", "simulate", outputs, summary)
}

pub fn figure(ctx: &Context, id: FigureId) -> Result<Value, CliError> {
    ctx.prepare()?;
    let table = figure_experiments(id, &ctx.config)?;
    let csv = ctx.write_table(&format!("{id}.csv"), &table)?;
    let summary = json!({ "figure": id.name(), "rows": table.rows.len(), "columns": table.headers });
    ctx.finish(id.name(), &format!("figure {id}"), vec![csv], summary)
}

pub fn selftest(ctx: &Context) -> Result<Value, CliError> {
    let report = run_selftest(&ctx.config, ctx.seed())?;
    let summary = serde_json::to_value(&report).expect("report serializes");
    if report.passed() {
        Ok(summary)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Selftest(failed.join(", ")))
    }
}
