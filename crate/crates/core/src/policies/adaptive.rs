//! Re-estimating wrapper: keeps a growing price history and periodically
//! rebuilds its base policy from fresh estimates.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimation::{EstimateOptions, EstimateReport};
use crate::model::{Instance, Policy, SlotContext};
use crate::policies::dp::{build_value_table, dp_policy, DpPolicy};
use crate::policies::threshold::{alg_mthb, alg_thb, linear_budget, ThresholdPolicy};
use crate::prices::{PriceModel, PriceSeries};

/// Smallest sigma used when a zero-spread sample feeds the DP model.
const MIN_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyFamily {
    Threshold,
    /// Threshold with the linear fill budget between the estimated bounds.
    ModifiedThreshold,
    Dp { grid: usize, quadrature: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub family: PolicyFamily,
    /// Re-estimate after this many observed prices; `None` never refreshes.
    pub refresh_stride: Option<usize>,
    pub estimate: EstimateOptions,
    /// Model used while the history is too short to estimate from.
    pub prior: Option<PriceModel>,
}

#[derive(Debug, Clone)]
pub enum BasePolicy {
    Threshold(ThresholdPolicy),
    Dp(DpPolicy),
}

impl Policy for BasePolicy {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        match self {
            BasePolicy::Threshold(p) => p.decide(ctx),
            BasePolicy::Dp(p) => p.decide(ctx),
        }
    }
}

impl BasePolicy {
    pub fn theta(&self) -> Option<f64> {
        match self {
            BasePolicy::Threshold(p) => Some(p.theta()),
            BasePolicy::Dp(_) => None,
        }
    }
}

/// Base policy derived from an estimate of the price distribution.
pub fn policy_from_estimate(family: PolicyFamily, instance: &Instance, report: &EstimateReport) -> Result<BasePolicy> {
    let capacity = instance.storage().capacity();
    Ok(match family {
        PolicyFamily::Threshold => BasePolicy::Threshold(alg_thb(report.theta()?)?),
        PolicyFamily::ModifiedThreshold => {
            let budget = linear_budget(report.upper, report.lower, capacity);
            BasePolicy::Threshold(alg_mthb(report.theta()?, capacity, budget)?)
        }
        PolicyFamily::Dp { grid, quadrature } => {
            let model = PriceModel::normal(report.stats.mean, report.stats.sample_std.max(MIN_SIGMA))?;
            BasePolicy::Dp(dp_policy(Arc::new(build_value_table(instance, &model, grid, quadrature)?)))
        }
    })
}

/// Base policy derived from a known (or assumed) model: the threshold
/// families use `mean +- 3 sd` as price bounds.
pub fn policy_from_model(family: PolicyFamily, instance: &Instance, model: &PriceModel) -> Result<BasePolicy> {
    let capacity = instance.storage().capacity();
    let (upper, lower) = (model.mean() + 3.0 * model.std_dev(), model.mean() - 3.0 * model.std_dev());
    let theta = || crate::estimation::threshold(upper, lower);
    Ok(match family {
        PolicyFamily::Threshold => BasePolicy::Threshold(alg_thb(theta()?)?),
        PolicyFamily::ModifiedThreshold => {
            BasePolicy::Threshold(alg_mthb(theta()?, capacity, linear_budget(upper, lower, capacity))?)
        }
        PolicyFamily::Dp { grid, quadrature } => {
            BasePolicy::Dp(dp_policy(Arc::new(build_value_table(instance, model, grid, quadrature)?)))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshRecord {
    /// History length the refresh estimated from.
    pub history_len: usize,
    pub theta: Option<f64>,
    pub error: Option<String>,
}

/// One instance per episode; the history grows with every observed price.
#[derive(Debug, Clone)]
pub struct AdaptivePolicy {
    config: AdaptiveConfig,
    instance: Instance,
    history: Vec<f64>,
    since_refresh: usize,
    current: BasePolicy,
    refreshes: Vec<RefreshRecord>,
    pending_log: Vec<String>,
}

pub fn adaptive(instance: &Instance, warmup: &PriceSeries, config: AdaptiveConfig) -> Result<AdaptivePolicy> {
    if config.refresh_stride == Some(0) {
        return Err(Error::invalid("refresh_stride", "must be at least 1"));
    }
    let from_warmup = if warmup.len() >= 2 {
        Some(
            EstimateReport::from_series(warmup, &config.estimate)
                .and_then(|r| policy_from_estimate(config.family, instance, &r)),
        )
    } else {
        None
    };
    let current = match (from_warmup, &config.prior) {
        (Some(Ok(policy)), _) => policy,
        (Some(Err(_)), Some(prior)) | (None, Some(prior)) => policy_from_model(config.family, instance, prior)?,
        (Some(Err(e)), None) => return Err(e),
        (None, None) => {
            return Err(Error::invalid("warmup", "need at least 2 prices or a prior model"));
        }
    };
    let record = RefreshRecord {
        history_len: warmup.len(),
        theta: current.theta(),
        error: None,
    };
    Ok(AdaptivePolicy {
        config,
        instance: instance.clone(),
        history: warmup.values().to_vec(),
        since_refresh: 0,
        current,
        refreshes: vec![record],
        pending_log: Vec::new(),
    })
}

impl AdaptivePolicy {
    pub fn current(&self) -> &BasePolicy {
        &self.current
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Every (re)derivation attempt, starting with the initial one.
    pub fn refreshes(&self) -> &[RefreshRecord] {
        &self.refreshes
    }

    fn refresh(&mut self) {
        let derived = PriceSeries::new(self.history.clone())
            .and_then(|h| EstimateReport::from_series(&h, &self.config.estimate))
            .and_then(|r| policy_from_estimate(self.config.family, &self.instance, &r));
        let record = match derived {
            Ok(policy) => {
                self.current = policy;
                RefreshRecord {
                    history_len: self.history.len(),
                    theta: self.current.theta(),
                    error: None,
                }
            }
            Err(e) => {
                self.pending_log.push(format!(
                    "refresh at history {} failed, keeping previous policy: {e}",
                    self.history.len()
                ));
                RefreshRecord {
                    history_len: self.history.len(),
                    theta: self.current.theta(),
                    error: Some(e.to_string()),
                }
            }
        };
        self.refreshes.push(record);
    }
}

impl Policy for AdaptivePolicy {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        self.current.decide(ctx)
    }

    fn observe(&mut self, price: f64) {
        self.history.push(price);
        self.since_refresh += 1;
        if let Some(stride) = self.config.refresh_stride {
            if self.since_refresh >= stride {
                self.since_refresh = 0;
                self.refresh();
            }
        }
    }

    fn drain_log(&mut self) -> Vec<String> {
        std::mem::take(&mut self.pending_log)
    }
}
