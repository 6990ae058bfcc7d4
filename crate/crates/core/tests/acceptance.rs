//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p wpiot-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wpiot::baselines::offline_on_paths;
use wpiot::chain::{reference_harvest_matrix, sample_chain, stationary_distribution, StochasticMatrix};
use wpiot::config::RunConfig;
use wpiot::matching::{ecaa, swap_evaluation_bound, EcaaOutcome, LinkMatrix, Matching, DEFAULT_MAX_ITERATIONS};
use wpiot::mdp::{
    execute_policy_on_paths, exhaustive_policy_oracle, plan, ChainPaths, FrameTrace, InitialState, MdpModel, MdpSpec,
};
use wpiot::model::PowerQuantity;
use wpiot::sim::seeds::{derive_seed, Stream};
use wpiot::sim::{allocation_sweep, generate_scenario_with, horizon_sweep, threshold_sweep};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Minimum rate among the users a matching places on `channel`.
fn channel_min(assign: &[Option<usize>], rates: &LinkMatrix, channel: usize) -> Option<f64> {
    assign
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == Some(channel))
        .map(|(n, _)| rates.get(channel, n))
        .reduce(f64::min)
}

/// The four utilities (user a, user b, channel of a, channel of b) under
/// an assignment vector.
fn four_utilities(assign: &[Option<usize>], rates: &LinkMatrix, a: usize, b: usize, ca: usize, cb: usize) -> [f64; 4] {
    let ua = rates.get(assign[a].unwrap(), a);
    let ub = rates.get(assign[b].unwrap(), b);
    [
        ua,
        ub,
        channel_min(assign, rates, ca).unwrap(),
        channel_min(assign, rates, cb).unwrap(),
    ]
}

fn weakly_better_one_strict(before: &[f64; 4], after: &[f64; 4]) -> bool {
    before.iter().zip(after).all(|(b, a)| a >= b) && before.iter().zip(after).any(|(b, a)| a > b)
}

/// Exhaustive scan for a swap-blocking pair, written independently of the
/// library's scan.
fn blocking_pairs(matching: &Matching, rates: &LinkMatrix) -> usize {
    let assign = matching.assignment().to_vec();
    let mut found = 0;
    for a in 0..assign.len() {
        for b in a + 1..assign.len() {
            let (Some(ca), Some(cb)) = (assign[a], assign[b]) else {
                continue;
            };
            if ca == cb {
                continue;
            }
            let before = four_utilities(&assign, rates, a, b, ca, cb);
            let mut swapped = assign.clone();
            swapped.swap(a, b);
            let after = four_utilities(&swapped, rates, a, b, ca, cb);
            if weakly_better_one_strict(&before, &after) {
                found += 1;
            }
        }
    }
    found
}

/// Replays the swap log from the initial matching, checking each swap.
fn swaps_monotone(outcome: &EcaaOutcome, rates: &LinkMatrix) -> Result<(), String> {
    let mut assign = outcome.initial.assignment().to_vec();
    for (i, rec) in outcome.stats.swap_log.iter().enumerate() {
        let p = rec.pair;
        if assign[p.user_a] != Some(p.channel_a) || assign[p.user_b] != Some(p.channel_b) {
            return Err(format!("swap {i} does not match the current matching"));
        }
        let before = four_utilities(&assign, rates, p.user_a, p.user_b, p.channel_a, p.channel_b);
        assign.swap(p.user_a, p.user_b);
        let after = four_utilities(&assign, rates, p.user_a, p.user_b, p.channel_a, p.channel_b);
        if !weakly_better_one_strict(&before, &after) {
            return Err(format!("swap {i} is not improving: {before:?} -> {after:?}"));
        }
    }
    if assign != outcome.matching.assignment() {
        return Err("replayed swaps do not reach the final matching".into());
    }
    Ok(())
}

fn complexity_ok(outcome: &EcaaOutcome, users: usize, channels: usize, capacity: usize) -> Result<(), String> {
    if outcome.stats.init_proposals > channels * users {
        return Err(format!(
            "{} proposals > M N = {}",
            outcome.stats.init_proposals,
            channels * users
        ));
    }
    let bound = swap_evaluation_bound(capacity, users, channels);
    if outcome.stats.max_evaluations_per_iteration as f64 > bound {
        return Err(format!(
            "{} evaluations in one iteration > {bound}",
            outcome.stats.max_evaluations_per_iteration
        ));
    }
    Ok(())
}

/// Runs ECAA on the instance behind a seed and checks the per-run
/// properties shared by criteria 1, 3 and 4.
struct RunChecks {
    blocking: usize,
    complexity: Result<(), String>,
    monotone: Result<(), String>,
    elapsed: Duration,
}

fn check_instance(config: &RunConfig, users: usize, channels: usize, capacity: usize, seed: u64) -> RunChecks {
    let scenario = generate_scenario_with(config, users, channels, capacity, seed).unwrap();
    let instance = scenario.matching_instance().unwrap();
    let start = Instant::now();
    let outcome = ecaa(&instance, DEFAULT_MAX_ITERATIONS).unwrap();
    let elapsed = start.elapsed();
    RunChecks {
        blocking: blocking_pairs(&outcome.matching, &instance.rates),
        complexity: complexity_ok(&outcome, users, channels, capacity),
        monotone: swaps_monotone(&outcome, &instance.rates),
        elapsed,
    }
}

#[derive(Default)]
struct AllocationLedger {
    runs: usize,
    complexity_failures: Vec<String>,
    monotone_failures: Vec<String>,
}

impl AllocationLedger {
    fn record(&mut self, checks: &RunChecks) {
        self.runs += 1;
        if let Err(e) = &checks.complexity {
            self.complexity_failures.push(e.clone());
        }
        if let Err(e) = &checks.monotone {
            self.monotone_failures.push(e.clone());
        }
    }
}

fn criterion_1(config: &RunConfig, ledger: &mut AllocationLedger) -> Verdict {
    let mut with_blocking = 0;
    let mut slowest = Duration::ZERO;
    for i in 0..100u64 {
        let users = 1 + (i as usize % 12);
        let seed = derive_seed(0xACCE, &[1, i]);
        let checks = check_instance(config, users, 3, 4, seed);
        if checks.blocking > 0 {
            with_blocking += 1;
        }
        slowest = slowest.max(checks.elapsed);
        ledger.record(&checks);
    }
    verdict(
        with_blocking == 0 && slowest < Duration::from_secs(1),
        format!("100 instances (N 1..12, M=3, D=4): {with_blocking} with blocking pairs, slowest {slowest:?}"),
    )
}

fn criterion_2(config: &RunConfig, ledger: &mut AllocationLedger) -> Verdict {
    let mut c = config.clone();
    c.experiment.instances = 50;
    c.figures.fig3_users = (4..=9).collect();
    c.figures.fig3_channels = 3;
    let start = Instant::now();
    let samples = allocation_sweep(&c).unwrap();
    let elapsed = start.elapsed();
    let mut worst_ratio = f64::INFINITY;
    let mut ratios = Vec::new();
    for &n in &c.figures.fig3_users {
        let cell: Vec<_> = samples.iter().filter(|s| s.users == n).collect();
        let ecaa_mean = cell.iter().map(|s| s.ecaa).sum::<f64>() / cell.len() as f64;
        let bf_mean = cell.iter().map(|s| s.brute_force).sum::<f64>() / cell.len() as f64;
        let ratio = ecaa_mean / bf_mean;
        worst_ratio = worst_ratio.min(ratio);
        ratios.push(format!("N={n}:{ratio:.3}"));
    }
    let beats_random = samples.iter().filter(|s| s.ecaa >= s.random).count();
    let share = beats_random as f64 / samples.len() as f64;
    let dominated = samples.iter().all(|s| s.ecaa <= s.brute_force);
    for s in &samples {
        let checks = check_instance(&c, s.users, c.figures.fig3_channels, c.figures.fig3_capacity, s.seed);
        ledger.record(&checks);
    }
    verdict(
        worst_ratio >= 0.85 && share >= 0.9 && dominated && elapsed < Duration::from_secs(120),
        format!(
            "ECAA/optimum {} ; ECAA >= random in {:.1}% ; {} instances in {elapsed:?}",
            ratios.join(" "),
            100.0 * share,
            samples.len()
        ),
    )
}

fn criterion_3(ledger: &AllocationLedger) -> Verdict {
    verdict(
        ledger.complexity_failures.is_empty(),
        match ledger.complexity_failures.first() {
            None => format!(
                "proposals <= M N and per-iteration evaluations <= D N (M-1)/2 on {} runs",
                ledger.runs
            ),
            Some(e) => format!("{} violations, first: {e}", ledger.complexity_failures.len()),
        },
    )
}

fn criterion_4(ledger: &AllocationLedger) -> Verdict {
    verdict(
        ledger.monotone_failures.is_empty(),
        match ledger.monotone_failures.first() {
            None => format!(
                "every logged swap weakly improves all four players, one strictly ({} runs)",
                ledger.runs
            ),
            Some(e) => format!("{} violations, first: {e}", ledger.monotone_failures.len()),
        },
    )
}

fn criterion_5() -> Verdict {
    let expected = [0.13, 0.37, 0.37, 0.13];
    let p = reference_harvest_matrix();
    let pi = stationary_distribution(&p).unwrap();
    let exact_err = pi.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let steps = 1_000_000;
    let path = sample_chain(&p, 0, steps, 2024);
    let mut freq = [0.0; 4];
    for s in path {
        freq[s] += 1.0 / steps as f64;
    }
    let emp_err = freq
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    verdict(
        exact_err <= 0.005 && emp_err <= 0.01,
        format!(
            "stationary {pi:.4?} (max dev {exact_err:.4}), 10^6-step frequencies {freq:.4?} (max dev {emp_err:.4})"
        ),
    )
}

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> StochasticMatrix {
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.25) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if row.iter().all(|&x| x == 0.0) {
                row[rng.random_range(0..n)] = 1.0;
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            // pin the last entry so the row sums to one up to rounding
            let head: f64 = row[..n - 1].iter().sum();
            row[n - 1] = (1.0 - head).max(0.0);
            row
        })
        .collect();
    StochasticMatrix::new(rows).unwrap()
}

fn mw(x: f64) -> PowerQuantity {
    PowerQuantity::from_mw(x).unwrap()
}

fn random_tiny_model(rng: &mut ChaCha8Rng) -> MdpModel {
    let q = rng.random_range(1..=3usize);
    let g = rng.random_range(1..=3usize);
    let cap = rng.random_range(2.0..8.0);
    let mut harvest = vec![0.0];
    for _ in 1..q {
        let last = *harvest.last().unwrap();
        harvest.push(last + rng.random_range(0.3..3.0));
    }
    MdpModel::new(MdpSpec {
        horizon: rng.random_range(1..=4),
        battery_levels: rng.random_range(2..=6),
        battery_cap: mw(cap),
        threshold: mw(rng.random_range(0.05..0.6) * cap),
        harvest_levels: harvest.into_iter().map(mw).collect(),
        harvest_chain: random_stochastic(rng, q),
        gain_states: (0..g).map(|_| rng.random_range(0.1..4.0)).collect(),
        gain_chain: random_stochastic(rng, g),
        bandwidth_hz: 1.0,
        noise: mw(1.0),
    })
    .unwrap()
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut compared = 0;
    let models = 24;
    for _ in 0..models {
        let model = random_tiny_model(&mut rng);
        let p = plan(&model);
        let states: Vec<usize> = if model.horizon() <= 3 {
            (0..model.num_states()).collect()
        } else {
            (0..6).map(|_| rng.random_range(0..model.num_states())).collect()
        };
        for s in states {
            let oracle = exhaustive_policy_oracle(&model, model.state_at(s)).unwrap();
            let v = p.values.get(1, s);
            worst = worst.max((v - oracle).abs() / oracle.abs().max(1.0));
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("{models} random models, {compared} start states, worst scaled gap {worst:.2e}, {elapsed:?}"),
    )
}

fn criterion_7(config: &RunConfig) -> Verdict {
    let start = Instant::now();
    let horizons = [10, 15, 20, 25, 30, 35, 40];
    let points = horizon_sweep(config, &config.mdp.harvest_multiples, config.threshold(), &horizons).unwrap();
    let elapsed = start.elapsed();
    let ordered = points.iter().all(|p| p.optimal_mean >= p.offline_mean);
    let at = |k: usize| points.iter().find(|p| p.horizon == k).unwrap().offline_mean;
    let drift = (at(40) - at(20)).abs() / at(20);
    let table: Vec<String> = points
        .iter()
        .map(|p| format!("K={}: {:.4e}/{:.4e}", p.horizon, p.optimal_mean, p.offline_mean))
        .collect();
    verdict(
        ordered && drift <= 0.02 && elapsed < Duration::from_secs(300),
        format!(
            "optimal >= offline at every K: {ordered}; offline K=40 vs K=20 drift {:.2}% (limit 2%); {} episodes, {elapsed:?}; [{}]",
            100.0 * drift,
            config.experiment.episodes,
            table.join(", ")
        ),
    )
}

fn criterion_8(config: &RunConfig) -> Verdict {
    let horizons = [10, 15, 20, 25, 30, 35, 40];
    let curves: Vec<Vec<f64>> = config
        .figures
        .rate_vectors
        .iter()
        .map(|v| {
            horizon_sweep(config, v, config.threshold(), &horizons)
                .unwrap()
                .into_iter()
                .map(|p| p.optimal_mean)
                .collect()
        })
        .collect();
    let ordered = (0..horizons.len()).all(|i| curves.windows(2).all(|w| w[0][i] >= w[1][i]));
    let k40: Vec<String> = curves
        .iter()
        .map(|c| format!("{:.4e}", c[horizons.len() - 1]))
        .collect();
    verdict(
        ordered,
        format!(
            "H_e1 >= H_e2 >= H_e3 at every K: {ordered}; K=40 means [{}]",
            k40.join(", ")
        ),
    )
}

fn criterion_9(config: &RunConfig) -> Verdict {
    let traces = threshold_sweep(config).unwrap();
    let mins: Vec<f64> = traces.iter().map(|t| t.min_end_battery()).collect();
    let ordered = mins.windows(2).all(|w| w[1] >= w[0]);
    let desc: Vec<String> = traces
        .iter()
        .zip(&mins)
        .map(|(t, m)| format!("{} dBm: {m:.3} mW", t.threshold_dbm))
        .collect();
    verdict(
        ordered && traces.len() >= 2,
        format!("minimum of the mean end-of-slot battery trace: {}", desc.join(", ")),
    )
}

/// Independent restatement of the battery recursion and slot exclusivity.
fn trace_violation(trace: &FrameTrace, cap: f64, initial: f64) -> Option<String> {
    let mut level = initial;
    for s in &trace.slots {
        let (b, tx, h, next) = (s.battery.mw(), s.action.mw(), s.harvest.mw(), s.next_battery.mw());
        if b != level {
            return Some(format!("slot {}: battery {b} does not continue {level}", s.slot));
        }
        if tx > 0.0 && h > 0.0 {
            return Some(format!("slot {} transmits and harvests", s.slot));
        }
        if tx > b {
            return Some(format!("slot {} spends {tx} of {b}", s.slot));
        }
        if next != (b - tx + h).min(cap) {
            return Some(format!(
                "slot {}: next battery {next} != min({b} - {tx} + {h}, {cap})",
                s.slot
            ));
        }
        if !(0.0..=cap).contains(&b) || !(0.0..=cap).contains(&next) {
            return Some(format!("slot {}: battery outside [0, cap]", s.slot));
        }
        level = next;
    }
    None
}

fn criterion_10(config: &RunConfig) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut traces = 0;
    let mut violations = Vec::new();
    for m in 0..100 {
        let model = if m % 4 == 0 {
            let multiples = &config.figures.rate_vectors[m / 4 % 3];
            config
                .model(rng.random_range(1..=30), multiples, config.threshold())
                .unwrap()
        } else {
            random_tiny_model(&mut rng)
        };
        let p = plan(&model);
        let cap = model.battery_cap().mw();
        for e in 0..50 {
            let initial = InitialState {
                battery: mw(rng.random_range(0.0..=cap)),
                harvest: rng.random_range(0..model.num_harvest_states()),
                gain: rng.random_range(0..model.num_gain_states()),
            };
            let paths = ChainPaths::sample(
                &model,
                &initial,
                derive_seed(10, &[Stream::Episode as u64, m as u64, e]),
            );
            let optimal = execute_policy_on_paths(&model, &p.policy, initial.battery, &paths).unwrap();
            let n_harvest = rng.random_range(0..model.horizon());
            let offline = offline_on_paths(&model, n_harvest, initial.battery, &paths).unwrap();
            for t in [&optimal, &offline] {
                traces += 1;
                if let Some(v) = trace_violation(t, cap, initial.battery.mw()) {
                    violations.push(v);
                }
                if let Err(v) = t.check_energy(model.battery_cap()) {
                    violations.push(v);
                }
            }
        }
    }
    verdict(
        violations.is_empty() && traces >= 10_000,
        match violations.first() {
            None => format!("{traces} traces obey the battery recursion exactly"),
            Some(v) => format!("{} violations in {traces} traces, first: {v}", violations.len()),
        },
    )
}

fn main() -> ExitCode {
    let config = RunConfig::default();
    let mut ledger = AllocationLedger::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut AllocationLedger) -> Verdict + '_>)> = vec![
        ("stability", Box::new(|l| criterion_1(&config, l))),
        ("near-optimality", Box::new(|l| criterion_2(&config, l))),
        ("complexity bounds", Box::new(|l| criterion_3(l))),
        ("swap monotonicity", Box::new(|l| criterion_4(l))),
        ("stationarity", Box::new(|_| criterion_5())),
        ("dp correctness", Box::new(|_| criterion_6())),
        ("optimal vs offline", Box::new(|_| criterion_7(&config))),
        ("harvest-rate ordering", Box::new(|_| criterion_8(&config))),
        ("threshold effect", Box::new(|_| criterion_9(&config))),
        ("energy conservation", Box::new(|_| criterion_10(&config))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let v = run(&mut ledger);
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
