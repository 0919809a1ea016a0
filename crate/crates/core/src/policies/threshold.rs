use crate::error::{Error, Result};
use crate::model::{Policy, SlotContext};

/// Single-threshold storage control.
///
/// At a price at or below `theta` the store is filled up to the fill target
/// while serving demand; above `theta` the store is drained first and only
/// the shortfall is bought. The fill target never exceeds the nominal demand
/// still to come after the current slot, since leftover energy is worthless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    theta: f64,
    /// `None` fills to capacity.
    fill_target: Option<f64>,
}

impl ThresholdPolicy {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn fill_target(&self) -> Option<f64> {
        self.fill_target
    }
}

/// Threshold policy filling to capacity.
pub fn alg_thb(theta: f64) -> Result<ThresholdPolicy> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::invalid("theta", format!("{theta} must be finite and > 0")));
    }
    Ok(ThresholdPolicy {
        theta,
        fill_target: None,
    })
}

/// Threshold policy whose fill target is `budget_map(theta)`.
pub fn alg_mthb(theta: f64, capacity: f64, budget_map: impl Fn(f64) -> f64) -> Result<ThresholdPolicy> {
    let mut policy = alg_thb(theta)?;
    let budget = budget_map(theta);
    if !(budget >= 0.0 && budget <= capacity) {
        return Err(Error::invalid("budget", format!("{budget} outside [0, {capacity}]")));
    }
    policy.fill_target = Some(budget);
    Ok(policy)
}

/// `B * clip((M - theta) / (M - m), 0, 1)`: full budget at the lower price
/// bound, none at the upper.
pub fn linear_budget(upper: f64, lower: f64, capacity: f64) -> impl Fn(f64) -> f64 {
    move |theta| {
        let spread = upper - lower;
        let frac = if spread > 0.0 {
            ((upper - theta) / spread).clamp(0.0, 1.0)
        } else if theta <= upper {
            1.0
        } else {
            0.0
        };
        capacity * frac
    }
}

impl Policy for ThresholdPolicy {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        let range = ctx.range()?;
        if ctx.price <= self.theta {
            let remaining: f64 = ctx.instance.demand().get(ctx.slot + 1..).unwrap_or(&[]).iter().sum();
            let target = self
                .fill_target
                .unwrap_or_else(|| ctx.instance.storage().capacity())
                .min(remaining);
            Ok(range.clamp(ctx.demand + target - ctx.level))
        } else {
            Ok(range.min)
        }
    }
}
