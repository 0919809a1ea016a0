//! Hindsight oracles, competitive ratio, regret, and the probability that
//! the realized competitive ratio exceeds its estimated bound.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{EstimateOptions, EstimateReport};
use crate::model::{feasible_purchase_range, simulate, Instance, Trajectory, ENERGY_TOL};
use crate::policies::{alg_thb, dp_policy, ValueTable};
use crate::prices::{generate_with, resample_with, PriceModel, PriceSeries, ResampleMode};
use crate::rng;

/// Minimum-cost trajectory when all prices are known in advance, solved on
/// a storage grid of `grid` intervals.
pub fn offline_optimal(instance: &Instance, prices: &PriceSeries, grid: usize) -> Result<Trajectory> {
    let table = ValueTable::for_price_path(instance, prices, grid)?;
    simulate(instance, prices, &mut dp_policy(table))
}

pub const BRUTE_FORCE_MAX_SLOTS: usize = 6;
pub const BRUTE_FORCE_MAX_STEPS: f64 = 12.0;

/// Exact minimum over all purchase sequences on the `q_step` lattice.
/// Test oracle only; exponential in the horizon.
pub fn brute_force_optimal(instance: &Instance, prices: &PriceSeries, q_step: f64) -> Result<f64> {
    let horizon = instance.horizon();
    if horizon > BRUTE_FORCE_MAX_SLOTS {
        return Err(Error::EnumerationTooLarge(format!(
            "horizon {horizon} > {BRUTE_FORCE_MAX_SLOTS}"
        )));
    }
    if q_step.is_nan() || q_step <= 0.0 {
        return Err(Error::invalid("q_step", "must be > 0"));
    }
    let spec = instance.storage();
    let widest = instance.demand().iter().fold(0.0f64, |m, d| m.max(*d)) + spec.capacity().min(spec.max_charge());
    if widest / q_step > BRUTE_FORCE_MAX_STEPS + 1e-9 {
        return Err(Error::EnumerationTooLarge(format!(
            "{} lattice steps per slot > {BRUTE_FORCE_MAX_STEPS}",
            widest / q_step
        )));
    }
    if prices.len() < horizon {
        return Err(Error::TooFewPrices {
            needed: horizon,
            got: prices.len(),
        });
    }

    fn search(inst: &Instance, prices: &[f64], step: f64, t: usize, level: f64) -> Result<f64> {
        if t == inst.horizon() {
            return Ok(0.0);
        }
        let d = inst.demand()[t];
        let range = feasible_purchase_range(inst.storage(), level, d)?;
        let first = ((range.min - ENERGY_TOL) / step).ceil() as i64;
        let last = ((range.max + ENERGY_TOL) / step).floor() as i64;
        let mut lattice: Vec<f64> = (first..=last).map(|k| range.clamp(k as f64 * step)).collect();
        if lattice.is_empty() {
            lattice.push(range.min);
        }
        let mut best = f64::INFINITY;
        for q in lattice {
            let next = (level + q - d).clamp(0.0, inst.storage().capacity());
            best = best.min(prices[t] * q + search(inst, prices, step, t + 1, next)?);
        }
        Ok(best)
    }
    search(instance, prices.values(), q_step, 0, spec.initial_level())
}

pub fn competitive_ratio(alg_cost: f64, opt_cost: f64) -> Result<f64> {
    if opt_cost.is_nan() || opt_cost <= 0.0 {
        return Err(Error::NonPositiveOptimalCost(opt_cost));
    }
    Ok(alg_cost / opt_cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regret {
    /// `mean(alg) - mean(opt)`.
    pub mean: f64,
    /// Standard error of the paired differences.
    pub std_err: f64,
    pub diffs: Vec<f64>,
}

/// Paired regret of `alg_costs` over `opt_costs`.
pub fn regret(alg_costs: &[f64], opt_costs: &[f64]) -> Result<Regret> {
    if alg_costs.len() != opt_costs.len() {
        return Err(Error::LengthMismatch {
            left: alg_costs.len(),
            right: opt_costs.len(),
        });
    }
    if alg_costs.is_empty() {
        return Err(Error::invalid("alg_costs", "need at least one pair"));
    }
    let diffs: Vec<f64> = alg_costs.iter().zip(opt_costs).map(|(a, o)| a - o).collect();
    let n = diffs.len() as f64;
    let mean = alg_costs.iter().sum::<f64>() / n - opt_costs.iter().sum::<f64>() / n;
    let std_err = if diffs.len() > 1 {
        let dm = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - dm).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(Regret { mean, std_err, diffs })
}

pub const METRIC_HEADER: &str = "round,n,policy_id,alg_cost,opt_cost,cr,cr_bound,violated,regret,theta_hat,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub round: usize,
    pub n: usize,
    pub policy_id: String,
    pub alg_cost: f64,
    pub opt_cost: f64,
    pub competitive_ratio: f64,
    pub cr_bound: f64,
    pub violated: bool,
    pub regret: f64,
    pub theta_hat: f64,
    pub seed: u64,
}

impl MetricRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        round: usize,
        n: usize,
        policy_id: &str,
        alg_cost: f64,
        opt_cost: f64,
        cr_bound: f64,
        theta_hat: f64,
        seed: u64,
    ) -> Result<Self> {
        let cr = competitive_ratio(alg_cost, opt_cost)?;
        Ok(Self {
            round,
            n,
            policy_id: policy_id.to_string(),
            alg_cost,
            opt_cost,
            competitive_ratio: cr,
            cr_bound,
            violated: cr > cr_bound,
            regret: alg_cost - opt_cost,
            theta_hat,
            seed,
        })
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.round.to_string(),
            self.n.to_string(),
            self.policy_id.clone(),
            format!("{:?}", self.alg_cost),
            format!("{:?}", self.opt_cost),
            format!("{:?}", self.competitive_ratio),
            format!("{:?}", self.cr_bound),
            self.violated.to_string(),
            format!("{:?}", self.regret),
            format!("{:?}", self.theta_hat),
            self.seed.to_string(),
        ]
    }
}

/// Where the evaluation episodes of a round draw their prices from.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalSource {
    /// Fresh series from a model.
    Model(PriceModel),
    /// Random horizon-length windows of a held-out series.
    Windows(PriceSeries),
}

impl EvalSource {
    fn draw<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<PriceSeries> {
        match self {
            EvalSource::Model(model) => generate_with(model, horizon, rng),
            EvalSource::Windows(series) => resample_with(series, horizon, ResampleMode::Window, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The round violates when the mean episode ratio exceeds the bound.
    Mean,
    /// The round violates when any episode ratio exceeds the bound.
    Any,
}

#[derive(Debug, Clone)]
pub struct ViolationSetup {
    pub history: PriceSeries,
    pub instance: Instance,
    pub eval: EvalSource,
    pub rounds: usize,
    pub eval_episodes: usize,
    pub mode: ResampleMode,
    pub estimate: EstimateOptions,
    pub verdict: Verdict,
    /// Clamp evaluation prices into the round's `[m_hat, M_hat]`.
    pub clamp_prices: bool,
    pub grid: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationEstimate {
    pub n: usize,
    pub violations: usize,
    pub valid_rounds: usize,
    /// Rounds where estimation or the ratio itself was undefined.
    pub failed_rounds: usize,
    pub p_hat: f64,
    pub std_err: f64,
    pub violated_rounds: Vec<usize>,
}

const SAMPLE_STREAM: u64 = 0x5a;
const EVAL_STREAM: u64 = 0xe7;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RoundOutcome {
    Violated(bool),
    Failed,
}

fn run_round(setup: &ViolationSetup, n: usize, round: usize) -> Result<RoundOutcome> {
    let mut sample_rng = rng::stream(setup.seed, &[SAMPLE_STREAM, n as u64, round as u64]);
    let sample = resample_with(&setup.history, n, setup.mode, &mut sample_rng)?;
    let Ok(report) = EstimateReport::from_series(&sample, &setup.estimate) else {
        return Ok(RoundOutcome::Failed);
    };
    let (Ok(theta), Ok(bound)) = (report.theta(), report.cr_bound()) else {
        return Ok(RoundOutcome::Failed);
    };
    let mut policy = alg_thb(theta)?;
    let horizon = setup.instance.horizon();
    let mut ratios = Vec::with_capacity(setup.eval_episodes);
    for episode in 0..setup.eval_episodes {
        // evaluation prices are shared across sample sizes
        let mut eval_rng = rng::stream(setup.seed, &[EVAL_STREAM, round as u64, episode as u64]);
        let mut prices = setup.eval.draw(horizon, &mut eval_rng)?;
        if setup.clamp_prices {
            prices = prices.clamped(report.lower, report.upper);
        }
        let alg = simulate(&setup.instance, &prices, &mut policy)?.total_cost;
        let opt = offline_optimal(&setup.instance, &prices, setup.grid)?.total_cost;
        match competitive_ratio(alg, opt) {
            Ok(cr) => ratios.push(cr),
            Err(_) => return Ok(RoundOutcome::Failed),
        }
    }
    let tol = 1e-9 * bound;
    let violated = match setup.verdict {
        Verdict::Mean => ratios.iter().sum::<f64>() / ratios.len() as f64 > bound + tol,
        Verdict::Any => ratios.iter().any(|&cr| cr > bound + tol),
    };
    Ok(RoundOutcome::Violated(violated))
}

/// Frequency over rounds of a realized competitive ratio above the bound
/// estimated from a size-`n` sample. Rounds run in parallel on the current
/// rayon pool; the result does not depend on the pool size.
pub fn bound_violation_probability(setup: &ViolationSetup, n: usize) -> Result<ViolationEstimate> {
    if n < 2 {
        return Err(Error::invalid("n", "sample size must be at least 2"));
    }
    if setup.rounds == 0 || setup.eval_episodes == 0 {
        return Err(Error::invalid("rounds", "rounds and eval_episodes must be at least 1"));
    }
    let outcomes = (0..setup.rounds)
        .into_par_iter()
        .map(|round| run_round(setup, n, round))
        .collect::<Result<Vec<_>>>()?;

    let violated_rounds: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| (*o == RoundOutcome::Violated(true)).then_some(r))
        .collect();
    let failed_rounds = outcomes.iter().filter(|o| **o == RoundOutcome::Failed).count();
    let valid_rounds = outcomes.len() - failed_rounds;
    let violations = violated_rounds.len();
    let p_hat = if valid_rounds > 0 {
        violations as f64 / valid_rounds as f64
    } else {
        f64::NAN
    };
    let std_err = (p_hat * (1.0 - p_hat) / valid_rounds as f64).sqrt();
    Ok(ViolationEstimate {
        n,
        violations,
        valid_rounds,
        failed_rounds,
        p_hat,
        std_err,
        violated_rounds,
    })
}
