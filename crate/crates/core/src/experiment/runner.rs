//! The five experiments. Each returns its CSV text; Monte Carlo units run in
//! parallel on a pool of `workers` threads and are collected in order, so
//! the output does not depend on the worker count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{clamp_lower_bound, threshold, EstimateOptions, EstimateReport, REPORT_HEADER};
use crate::experiment::config::{EvalChoice, ExperimentConfig, ExperimentKind, Scenario};
use crate::metrics::{
    bound_violation_probability, offline_optimal, regret, EvalSource, MetricRow, ViolationSetup, METRIC_HEADER,
};
use crate::model::{simulate, simulate_with_demand, Instance};
use crate::policies::adaptive::{policy_from_model, BasePolicy};
use crate::policies::{adaptive, alg_mthb, alg_thb, linear_budget, AdaptiveConfig, PolicyFamily};
use crate::prices::{generate, ingest, PriceModel, PriceSeries, ResampleMode};
use crate::rng::{derive_seed, stream};

const HISTORY_STREAM: u64 = 0x41;
const EPISODE_STREAM: u64 = 0xa1;
const DEMAND_STREAM: u64 = 0xd1;
const WARMUP_STREAM: u64 = 0x77;

pub const VIOLATION_HEADER: &str = "n,p_hat,stderr,violations,valid_rounds,failed_rounds";
pub const SUMMARY_HEADER: &str = "policy_id,episodes,mean_cost,mean_opt_cost,regret,regret_se,cr_p50,cr_p95,cr_max";
pub const ADAPTIVE_HEADER: &str = "warmup,stride,episodes,mean_cost,mean_true_dp_cost,mean_opt_cost,\
regret_true_dp,regret_true_dp_se,regret_offline,regret_offline_se,failed_refreshes";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    /// Per-policy summary, written next to the main output.
    pub summary: Option<String>,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
}

impl RunOutput {
    fn csv(csv: String) -> Self {
        Self {
            csv,
            summary: None,
            notes: Vec::new(),
        }
    }
}

/// Validate `config` and run its experiment on a dedicated pool.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| match config.kind {
        ExperimentKind::Estimate => run_estimate(config),
        ExperimentKind::ViolationCurve => run_violation_curve(config),
        ExperimentKind::PolicyCompare => run_policy_compare(config),
        ExperimentKind::Adaptive => run_adaptive_convergence(config),
        ExperimentKind::Relax => run_relaxation(config),
    })
}

fn estimate_options(config: &ExperimentConfig) -> EstimateOptions {
    EstimateOptions {
        alpha: config.alpha,
        conservative: config.conservative,
        clamp: config.clamp,
    }
}

/// The history file, or a synthetic series from `model`.
pub fn load_history(config: &ExperimentConfig) -> Result<PriceSeries> {
    match &config.history {
        Some(path) => ingest(path, &config.csv),
        None => generate(&config.model, config.history_len, derive_seed(config.seed, &[HISTORY_STREAM])),
    }
}

fn lines(header: &str, records: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in records {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn run_estimate(config: &ExperimentConfig) -> Result<RunOutput> {
    let history = load_history(config)?;
    let report = EstimateReport::from_series(&history, &estimate_options(config))?;
    let mut out = RunOutput::csv(lines(REPORT_HEADER, [report.csv_record()]));
    out.notes.push(match (report.theta_hat, report.cr_bound()) {
        (Some(theta), Ok(bound)) => format!("theta_hat = {theta:.6}, competitive ratio bound = {bound:.6}"),
        _ => format!("m_hat = {} is not positive: no threshold or bound", report.lower),
    });
    if report.lower_clamped {
        out.notes.push("lower bound was clamped".to_string());
    }
    Ok(out)
}

pub fn run_violation_curve(config: &ExperimentConfig) -> Result<RunOutput> {
    let instance = config.instance()?;
    let full = load_history(config)?;
    let (history, eval) = match config.eval {
        EvalChoice::Model => (full, EvalSource::Model(config.model.clone())),
        EvalChoice::Holdout => {
            let h = config.holdout_len;
            if h < instance.horizon() || h + 2 > full.len() {
                return Err(Error::config(
                    "holdout_len",
                    format!(
                        "need horizon {} <= holdout_len {h} <= history length {} - 2",
                        instance.horizon(),
                        full.len()
                    ),
                ));
            }
            let split = full.len() - h;
            (full.slice(0, split)?, EvalSource::Windows(full.slice(split, h)?))
        }
    };
    let mut grid = config.n_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if config.resample != ResampleMode::WithReplacement {
        if let Some(&n) = grid.iter().find(|&&n| n > history.len()) {
            return Err(Error::config(
                "n_grid",
                format!("sample size {n} exceeds the {} available history prices", history.len()),
            ));
        }
    }
    let setup = ViolationSetup {
        history,
        instance,
        eval,
        rounds: config.rounds,
        eval_episodes: config.eval_episodes,
        mode: config.resample,
        estimate: estimate_options(config),
        verdict: config.verdict,
        clamp_prices: config.clamp_prices,
        grid: config.grid,
        seed: config.seed,
    };
    let mut records = Vec::with_capacity(grid.len());
    for n in grid {
        let est = bound_violation_probability(&setup, n)?;
        records.push(format!(
            "{},{:?},{:?},{},{},{}",
            est.n, est.p_hat, est.std_err, est.violations, est.valid_rounds, est.failed_rounds
        ));
    }
    Ok(RunOutput::csv(lines(VIOLATION_HEADER, records)))
}

#[derive(Debug, Clone)]
struct Contender {
    id: &'static str,
    policy: BasePolicy,
}

/// Policies built from an assumed model, with the `mean +- 3 sd` bounds.
struct Lineup {
    contenders: Vec<Contender>,
    theta: f64,
    cr_bound: f64,
}

fn lineup(config: &ExperimentConfig, instance: &Instance, assumed: &PriceModel) -> Result<Lineup> {
    let upper = assumed.mean() + 3.0 * assumed.std_dev();
    let mut lower = assumed.mean() - 3.0 * assumed.std_dev();
    if lower <= 0.0 && config.clamp {
        lower = clamp_lower_bound(upper, lower)?;
    }
    let theta = threshold(upper, lower)?;
    let capacity = instance.storage().capacity();
    let dp = policy_from_model(
        PolicyFamily::Dp {
            grid: config.grid,
            quadrature: config.quadrature,
        },
        instance,
        assumed,
    )?;
    Ok(Lineup {
        contenders: vec![
            Contender {
                id: "thb",
                policy: BasePolicy::Threshold(alg_thb(theta)?),
            },
            Contender {
                id: "mthb",
                policy: BasePolicy::Threshold(alg_mthb(theta, capacity, linear_budget(upper, lower, capacity))?),
            },
            Contender { id: "dp", policy: dp },
        ],
        theta,
        cr_bound: (upper / lower).sqrt(),
    })
}

fn episode_prices(config: &ExperimentConfig, model: &PriceModel, horizon: usize, episode: usize) -> Result<(PriceSeries, u64)> {
    let seed = derive_seed(config.seed, &[EPISODE_STREAM, episode as u64]);
    Ok((generate(model, horizon, seed)?, seed))
}

/// Nominal demand scaled by `1 + u`, `u ~ U[-noise, noise]`.
fn realized_demand(config: &ExperimentConfig, instance: &Instance, noise: f64, episode: usize) -> Vec<f64> {
    if noise == 0.0 {
        return instance.demand().to_vec();
    }
    let mut rng = stream(config.seed, &[DEMAND_STREAM, episode as u64]);
    instance
        .demand()
        .iter()
        .map(|d| d * (1.0 + rng.gen_range(-noise..=noise)))
        .collect()
}

fn compare_episodes(
    config: &ExperimentConfig,
    instance: &Instance,
    truth: &PriceModel,
    lineup: &Lineup,
    noise: f64,
) -> Result<Vec<MetricRow>> {
    let per_episode = (0..config.episodes)
        .into_par_iter()
        .map(|e| {
            let (prices, seed) = episode_prices(config, truth, instance.horizon(), e)?;
            let demand = realized_demand(config, instance, noise, e);
            let opt = offline_optimal(&instance.with_demand(demand.clone())?, &prices, config.grid)?.total_cost;
            lineup
                .contenders
                .iter()
                .map(|c| {
                    let mut policy = c.policy.clone();
                    let alg = simulate_with_demand(instance, &demand, &prices, &mut policy)?.total_cost;
                    MetricRow::new(e, 0, c.id, alg, opt, lineup.cr_bound, lineup.theta, seed)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_episode.into_iter().flatten().collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(rows: &[MetricRow], ids: &[&str]) -> Result<Vec<String>> {
    ids.iter()
        .map(|id| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.policy_id == *id).collect();
            let alg: Vec<f64> = mine.iter().map(|r| r.alg_cost).collect();
            let opt: Vec<f64> = mine.iter().map(|r| r.opt_cost).collect();
            let mut cr: Vec<f64> = mine.iter().map(|r| r.competitive_ratio).collect();
            cr.sort_by(f64::total_cmp);
            let reg = regret(&alg, &opt)?;
            let n = alg.len() as f64;
            Ok(format!(
                "{id},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                alg.len(),
                alg.iter().sum::<f64>() / n,
                opt.iter().sum::<f64>() / n,
                reg.mean,
                reg.std_err,
                quantile(&cr, 0.5),
                quantile(&cr, 0.95),
                cr[cr.len() - 1]
            ))
        })
        .collect()
}

/// Normal model with the mean and standard deviation of `model`.
fn assumed_normal(model: &PriceModel) -> Result<PriceModel> {
    PriceModel::normal(model.mean(), model.std_dev())
}

pub fn run_policy_compare(config: &ExperimentConfig) -> Result<RunOutput> {
    let instance = config.instance()?;
    let lineup = lineup(config, &instance, &assumed_normal(&config.model)?)?;
    let rows = compare_episodes(config, &instance, &config.model, &lineup, 0.0)?;
    let ids: Vec<&str> = lineup.contenders.iter().map(|c| c.id).collect();
    let summary = summarize(&rows, &ids)?;
    Ok(RunOutput {
        csv: lines(METRIC_HEADER, rows.iter().map(|r| r.record().join(","))),
        summary: Some(lines(SUMMARY_HEADER, summary)),
        notes: vec![format!(
            "theta = {:.6}, competitive ratio bound = {:.6}",
            lineup.theta, lineup.cr_bound
        )],
    })
}

/// True price model and demand noise of a scenario. Every scenario keeps
/// the mean and standard deviation of the configured model.
pub fn scenario_truth(config: &ExperimentConfig, scenario: Scenario) -> Result<(PriceModel, f64)> {
    let (mean, sd) = (config.model.mean(), config.model.std_dev());
    Ok(match scenario {
        Scenario::Baseline => (config.model.clone(), 0.0),
        Scenario::Ar1 => {
            let phi = config.ar1_phi;
            (PriceModel::ar1(mean, sd * (1.0 - phi * phi).sqrt(), phi)?, 0.0)
        }
        Scenario::LogNormal => (PriceModel::log_normal_matching(mean, sd)?, 0.0),
        Scenario::DemandNoise => (config.model.clone(), config.demand_noise),
    })
}

pub fn run_relaxation(config: &ExperimentConfig) -> Result<RunOutput> {
    let instance = config.instance()?;
    let lineup = lineup(config, &instance, &assumed_normal(&config.model)?)?;
    let ids: Vec<&str> = lineup.contenders.iter().map(|c| c.id).collect();
    let mut records = Vec::new();
    for &scenario in &config.scenarios {
        let (truth, noise) = scenario_truth(config, scenario)?;
        let rows = compare_episodes(config, &instance, &truth, &lineup, noise)?;
        for line in summarize(&rows, &ids)? {
            records.push(format!("{},{line}", scenario.as_str()));
        }
    }
    Ok(RunOutput::csv(lines(&format!("scenario,{SUMMARY_HEADER}"), records)))
}

pub fn run_adaptive_convergence(config: &ExperimentConfig) -> Result<RunOutput> {
    let instance = config.instance()?;
    let family = PolicyFamily::Dp {
        grid: config.grid,
        quadrature: config.quadrature,
    };
    let true_dp = policy_from_model(family, &instance, &config.model)?;
    let horizon = instance.horizon();

    // prices and offline costs are shared by every grid point
    let episodes = (0..config.episodes)
        .into_par_iter()
        .map(|e| {
            let (prices, _) = episode_prices(config, &config.model, horizon, e)?;
            let opt = offline_optimal(&instance, &prices, config.grid)?.total_cost;
            let dp = simulate(&instance, &prices, &mut true_dp.clone())?.total_cost;
            Ok((prices, opt, dp))
        })
        .collect::<Result<Vec<_>>>()?;
    let opt: Vec<f64> = episodes.iter().map(|e| e.1).collect();
    let dp: Vec<f64> = episodes.iter().map(|e| e.2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut records = Vec::new();
    for &warmup in &config.warmup_grid {
        for &stride in &config.stride_grid {
            let outcomes = episodes
                .par_iter()
                .enumerate()
                .map(|(e, (prices, _, _))| {
                    let seed = derive_seed(config.seed, &[WARMUP_STREAM, warmup as u64, e as u64]);
                    let history = generate(&config.model, warmup, seed)?;
                    let mut policy = adaptive(
                        &instance,
                        &history,
                        AdaptiveConfig {
                            family: config.adaptive_family,
                            refresh_stride: stride,
                            estimate: estimate_options(config),
                            prior: None,
                        },
                    )?;
                    let cost = simulate(&instance, prices, &mut policy)?.total_cost;
                    let failed = policy.refreshes().iter().filter(|r| r.error.is_some()).count();
                    Ok((cost, failed))
                })
                .collect::<Result<Vec<_>>>()?;
            let alg: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
            let failed: usize = outcomes.iter().map(|o| o.1).sum();
            let vs_dp = regret(&alg, &dp)?;
            let vs_opt = regret(&alg, &opt)?;
            records.push(format!(
                "{warmup},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{failed}",
                stride.map(|r| r.to_string()).unwrap_or_else(|| "inf".into()),
                alg.len(),
                mean(&alg),
                mean(&dp),
                mean(&opt),
                vs_dp.mean,
                vs_dp.std_err,
                vs_opt.mean,
                vs_opt.std_err,
            ));
        }
    }
    Ok(RunOutput::csv(lines(ADAPTIVE_HEADER, records)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            horizon: 6,
            capacity: 2.0,
            episodes: 20,
            rounds: 10,
            eval_episodes: 3,
            n_grid: vec![100, 10],
            warmup_grid: vec![10, 100],
            history_len: 500,
            grid: 40,
            quadrature: 11,
            adaptive_family: PolicyFamily::Dp { grid: 40, quadrature: 11 },
            seed: 11,
            ..ExperimentConfig::default()
        }
    }

    fn run_with(config: &ExperimentConfig, workers: usize) -> RunOutput {
        run(&ExperimentConfig {
            workers,
            ..config.clone()
        })
        .unwrap()
    }

    #[test]
    fn every_kind_is_independent_of_worker_count() {
        for kind in [
            ExperimentKind::Estimate,
            ExperimentKind::ViolationCurve,
            ExperimentKind::PolicyCompare,
            ExperimentKind::Adaptive,
            ExperimentKind::Relax,
        ] {
            let c = small(kind);
            assert_eq!(run_with(&c, 1), run_with(&c, 3), "{kind:?}");
        }
    }

    #[test]
    fn headers_and_shapes() {
        let out = run_with(&small(ExperimentKind::ViolationCurve), 2);
        let rows: Vec<&str> = out.csv.lines().collect();
        assert_eq!(rows[0], VIOLATION_HEADER);
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("10,") && rows[2].starts_with("100,"));

        let out = run_with(&small(ExperimentKind::PolicyCompare), 2);
        assert_eq!(out.csv.lines().next(), Some(METRIC_HEADER));
        assert_eq!(out.csv.lines().count(), 1 + 3 * 20);
        let summary = out.summary.unwrap();
        assert_eq!(summary.lines().count(), 4);
        for line in out.csv.lines().skip(1) {
            let cr: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
            assert!(cr >= 1.0 - 1e-9);
        }

        let out = run_with(&small(ExperimentKind::Relax), 2);
        assert_eq!(out.csv.lines().count(), 1 + 4 * 3);

        let out = run_with(&small(ExperimentKind::Adaptive), 2);
        assert_eq!(out.csv.lines().count(), 3);
    }

    #[test]
    fn baseline_scenario_matches_policy_compare() {
        let c = small(ExperimentKind::Relax);
        let relax = run_with(&ExperimentConfig { scenarios: vec![Scenario::Baseline], ..c.clone() }, 1);
        let compare = run_with(&ExperimentConfig { kind: ExperimentKind::PolicyCompare, ..c }, 1);
        let summary = compare.summary.unwrap();
        for (r, s) in relax.csv.lines().skip(1).zip(summary.lines().skip(1)) {
            assert_eq!(r.strip_prefix("baseline,").unwrap(), s);
        }
    }

    #[test]
    fn scenarios_keep_the_marginal_moments() {
        let c = ExperimentConfig::default();
        for s in [Scenario::Ar1, Scenario::LogNormal] {
            let (m, _) = scenario_truth(&c, s).unwrap();
            assert!((m.mean() - 10.0).abs() < 1e-9);
            assert!((m.std_dev() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn estimate_from_constant_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "3\n3\n3\n3").unwrap();
        let c = ExperimentConfig {
            kind: ExperimentKind::Estimate,
            history: Some(f.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        let out = run_with(&c, 1);
        let record: Vec<&str> = out.csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(record[0], "4");
        assert_eq!(record[8], "3.0");
        assert_eq!(record[9], "3.0");
        assert_eq!(record[10], "3.0");
    }

    #[test]
    fn estimate_from_large_synthetic_history() {
        let c = ExperimentConfig {
            kind: ExperimentKind::Estimate,
            history_len: 100_000,
            ..ExperimentConfig::default()
        };
        let out = run_with(&c, 1);
        let record: Vec<f64> = out.csv.lines().nth(1).unwrap().split(',').take(11).map(|v| v.parse().unwrap()).collect();
        assert!((15.9..=16.1).contains(&record[9]), "{}", record[9]);
        assert!((3.9..=4.1).contains(&record[8]), "{}", record[8]);
    }

    #[test]
    fn holdout_and_prefix_checks() {
        let mut c = small(ExperimentKind::ViolationCurve);
        c.eval = EvalChoice::Holdout;
        c.holdout_len = 3;
        assert!(run(&c).unwrap_err().is_config());
        c.holdout_len = 100;
        run(&c).unwrap();
        c.resample = ResampleMode::Prefix;
        c.n_grid = vec![1000];
        assert!(run(&c).unwrap_err().is_config());
    }
}
