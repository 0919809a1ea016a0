//! One-shot load serving with a single lossless store.
//!
//! A demand vector `d` over `T` slots must be served exactly. In every slot
//! the controller buys `q(t) >= 0` units at the realized price; the store
//! absorbs the difference, `s(t+1) = s(t) + q(t) - d(t)`, and must stay in
//! `[0, capacity]`. Energy left in the store after the last slot is worth
//! nothing.

use crate::error::{Error, Result};
use crate::prices::PriceSeries;

/// Absolute tolerance applied to energy comparisons.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSpec {
    capacity: f64,
    initial_level: f64,
    max_charge: f64,
    max_discharge: f64,
}

impl StorageSpec {
    /// Store with rate limits equal to the capacity (no effective limit).
    pub fn new(capacity: f64, initial_level: f64) -> Result<Self> {
        Self::with_rates(capacity, initial_level, None, None)
    }

    pub fn with_rates(
        capacity: f64,
        initial_level: f64,
        max_charge: Option<f64>,
        max_discharge: Option<f64>,
    ) -> Result<Self> {
        if !capacity.is_finite() || capacity < 0.0 {
            return Err(Error::invalid("capacity", format!("{capacity} must be finite and >= 0")));
        }
        if !initial_level.is_finite() || initial_level < 0.0 || initial_level > capacity {
            return Err(Error::invalid(
                "initial_level",
                format!("{initial_level} must lie in [0, {capacity}]"),
            ));
        }
        let max_charge = max_charge.unwrap_or(capacity);
        let max_discharge = max_discharge.unwrap_or(capacity);
        for (name, rate) in [("max_charge", max_charge), ("max_discharge", max_discharge)] {
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::invalid(name, format!("{rate} must be finite and >= 0")));
            }
        }
        Ok(Self {
            capacity,
            initial_level,
            max_charge,
            max_discharge,
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn initial_level(&self) -> f64 {
        self.initial_level
    }

    pub fn max_charge(&self) -> f64 {
        self.max_charge
    }

    pub fn max_discharge(&self) -> f64 {
        self.max_discharge
    }

    /// Same store, different starting level.
    pub fn starting_at(&self, level: f64) -> Result<Self> {
        Self::with_rates(
            self.capacity,
            level,
            Some(self.max_charge),
            Some(self.max_discharge),
        )
    }
}

/// Closed interval of admissible purchases in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurchaseRange {
    pub min: f64,
    pub max: f64,
}

impl PurchaseRange {
    pub fn clamp(&self, q: f64) -> f64 {
        q.max(self.min).min(self.max)
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.min - ENERGY_TOL && q <= self.max + ENERGY_TOL
    }
}

/// Purchases that serve `demand` from `level` without leaving `[0, capacity]`
/// or exceeding the rate limits.
pub fn feasible_purchase_range(spec: &StorageSpec, level: f64, demand: f64) -> Result<PurchaseRange> {
    if !(level >= -ENERGY_TOL && level <= spec.capacity + ENERGY_TOL) {
        return Err(Error::invalid("level", format!("{level} outside [0, {}]", spec.capacity)));
    }
    if !demand.is_finite() || demand < 0.0 {
        return Err(Error::invalid("demand", format!("{demand} must be finite and >= 0")));
    }
    let level = level.clamp(0.0, spec.capacity);
    let min = (demand - level.min(spec.max_discharge)).max(0.0);
    let max = demand + (spec.capacity - level).min(spec.max_charge);
    if min > max + ENERGY_TOL {
        return Err(Error::InfeasibleSlot { q_min: min, q_max: max });
    }
    Ok(PurchaseRange { min, max: max.max(min) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    demand: Vec<f64>,
    storage: StorageSpec,
}

impl Instance {
    pub fn new(demand: Vec<f64>, storage: StorageSpec) -> Result<Self> {
        if demand.is_empty() {
            return Err(Error::invalid("demand", "horizon must be at least one slot"));
        }
        if let Some(bad) = demand.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::invalid("demand", format!("entry {bad} must be finite and >= 0")));
        }
        Ok(Self { demand, storage })
    }

    /// `horizon` slots of identical demand.
    pub fn constant(horizon: usize, demand: f64, storage: StorageSpec) -> Result<Self> {
        Self::new(vec![demand; horizon], storage)
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn storage(&self) -> &StorageSpec {
        &self.storage
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    /// Copy of this instance with a different demand vector of the same length.
    pub fn with_demand(&self, demand: Vec<f64>) -> Result<Self> {
        if demand.len() != self.demand.len() {
            return Err(Error::LengthMismatch {
                left: demand.len(),
                right: self.demand.len(),
            });
        }
        Self::new(demand, self.storage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDecision {
    pub purchase: f64,
    pub storage_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub decisions: Vec<SlotDecision>,
    pub prices: PriceSeries,
    pub total_cost: f64,
    /// Slots where the policy asked for an infeasible purchase.
    pub clamped: usize,
    /// Free-form events reported by the policy (refresh failures etc).
    pub log: Vec<String>,
}

impl Trajectory {
    pub fn purchases(&self) -> impl Iterator<Item = f64> + '_ {
        self.decisions.iter().map(|d| d.purchase)
    }

    pub fn final_level(&self) -> f64 {
        self.decisions.last().map(|d| d.storage_after).unwrap_or(0.0)
    }
}

/// What a policy sees when it acts in slot `slot`.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub slot: usize,
    pub level: f64,
    pub price: f64,
    /// Demand that must be served in this slot. Equals the nominal demand
    /// unless the simulation reveals a perturbed realization.
    pub demand: f64,
    pub instance: &'a Instance,
}

impl SlotContext<'_> {
    pub fn range(&self) -> Result<PurchaseRange> {
        feasible_purchase_range(self.instance.storage(), self.level, self.demand)
    }
}

/// An online controller. `decide` is called once per slot after the slot's
/// price is revealed, then `observe` receives that same price.
pub trait Policy {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64>;

    fn observe(&mut self, _price: f64) {}

    /// Events accumulated since the last call.
    fn drain_log(&mut self) -> Vec<String> {
        Vec::new()
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        (**self).decide(ctx)
    }

    fn observe(&mut self, price: f64) {
        (**self).observe(price)
    }

    fn drain_log(&mut self) -> Vec<String> {
        (**self).drain_log()
    }
}

/// Policy replaying a fixed purchase schedule, clamped by `simulate`.
#[derive(Debug, Clone)]
pub struct FixedSchedule(pub Vec<f64>);

impl Policy for FixedSchedule {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        Ok(self.0.get(ctx.slot).copied().unwrap_or(0.0))
    }
}

/// Drive `policy` over the first `horizon` prices of `prices`.
pub fn simulate<P: Policy + ?Sized>(
    instance: &Instance,
    prices: &PriceSeries,
    policy: &mut P,
) -> Result<Trajectory> {
    simulate_with_demand(instance, instance.demand(), prices, policy)
}

/// Like [`simulate`], but the demand actually served in each slot is
/// `realized[t]`; the policy still holds the nominal instance.
pub fn simulate_with_demand<P: Policy + ?Sized>(
    instance: &Instance,
    realized: &[f64],
    prices: &PriceSeries,
    policy: &mut P,
) -> Result<Trajectory> {
    let horizon = instance.horizon();
    if realized.len() != horizon {
        return Err(Error::LengthMismatch {
            left: realized.len(),
            right: horizon,
        });
    }
    if prices.len() < horizon {
        return Err(Error::TooFewPrices {
            needed: horizon,
            got: prices.len(),
        });
    }
    let used = &prices.values()[..horizon];
    if let Some((index, &value)) = used.iter().enumerate().find(|(_, p)| !p.is_finite()) {
        return Err(Error::NonFinitePrice { index, value });
    }

    let spec = instance.storage();
    let mut level = spec.initial_level();
    let mut decisions = Vec::with_capacity(horizon);
    let mut total_cost = 0.0;
    let mut clamped = 0;
    let mut log = Vec::new();
    for (slot, (&price, &demand)) in used.iter().zip(realized).enumerate() {
        let ctx = SlotContext {
            slot,
            level,
            price,
            demand,
            instance,
        };
        let range = ctx.range()?;
        let wanted = policy.decide(&ctx)?;
        let purchase = if wanted.is_finite() { range.clamp(wanted) } else { range.min };
        if !range.contains(wanted) {
            clamped += 1;
            log.push(format!("slot {slot}: purchase {wanted} clamped to {purchase}"));
        }
        policy.observe(price);
        log.extend(policy.drain_log());

        level = snap_level(level + purchase - demand, spec.capacity());
        total_cost += price * purchase;
        decisions.push(SlotDecision {
            purchase,
            storage_after: level,
        });
    }
    Ok(Trajectory {
        decisions,
        prices: PriceSeries::new(used.to_vec())?,
        total_cost,
        clamped,
        log,
    })
}

fn snap_level(level: f64, capacity: f64) -> f64 {
    if level.abs() <= ENERGY_TOL {
        0.0
    } else if (level - capacity).abs() <= ENERGY_TOL {
        capacity
    } else {
        level.clamp(0.0, capacity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(capacity: f64, level: f64) -> StorageSpec {
        StorageSpec::new(capacity, level).unwrap()
    }

    #[test]
    fn purchase_range_examples() {
        let r = feasible_purchase_range(&store(1.0, 0.0), 0.0, 1.0).unwrap();
        assert_eq!((r.min, r.max), (1.0, 2.0));
        let r = feasible_purchase_range(&store(1.0, 0.0), 1.0, 1.0).unwrap();
        assert_eq!((r.min, r.max), (0.0, 1.0));
        let r = feasible_purchase_range(&store(2.0, 0.0), 0.5, 1.0).unwrap();
        assert_eq!((r.min, r.max), (0.5, 2.5));
    }

    #[test]
    fn purchase_range_respects_rates() {
        let spec = StorageSpec::with_rates(4.0, 2.0, Some(0.5), Some(0.25)).unwrap();
        let r = feasible_purchase_range(&spec, 2.0, 1.0).unwrap();
        assert_eq!((r.min, r.max), (0.75, 1.5));
    }

    #[test]
    fn purchase_range_rejects_bad_inputs() {
        assert!(feasible_purchase_range(&store(1.0, 0.0), 1.5, 1.0).is_err());
        assert!(feasible_purchase_range(&store(1.0, 0.0), 0.5, -1.0).is_err());
    }

    #[test]
    fn storage_spec_validation() {
        assert!(StorageSpec::new(1.0, 2.0).is_err());
        assert!(StorageSpec::new(-1.0, 0.0).is_err());
        assert!(StorageSpec::with_rates(1.0, 0.0, Some(-0.1), None).is_err());
        assert!(Instance::new(vec![], store(1.0, 0.0)).is_err());
        assert!(Instance::new(vec![1.0, f64::NAN], store(1.0, 0.0)).is_err());
    }

    #[test]
    fn buy_early_two_slots() {
        let inst = Instance::new(vec![1.0, 1.0], store(1.0, 0.0)).unwrap();
        let prices = PriceSeries::new(vec![1.0, 3.0]).unwrap();
        let traj = simulate(&inst, &prices, &mut FixedSchedule(vec![2.0, 0.0])).unwrap();
        assert_eq!(traj.total_cost, 2.0);
        assert_eq!(traj.clamped, 0);
        assert_eq!(traj.final_level(), 0.0);
    }

    #[test]
    fn zero_demand_never_buying_costs_nothing() {
        let inst = Instance::constant(5, 0.0, store(3.0, 1.0)).unwrap();
        let prices = PriceSeries::new(vec![4.0; 5]).unwrap();
        let traj = simulate(&inst, &prices, &mut FixedSchedule(vec![0.0; 5])).unwrap();
        assert_eq!(traj.total_cost, 0.0);
    }

    #[test]
    fn infeasible_requests_are_clamped_and_logged() {
        let inst = Instance::constant(2, 1.0, store(1.0, 0.0)).unwrap();
        let prices = PriceSeries::new(vec![1.0, 1.0]).unwrap();
        let traj = simulate(&inst, &prices, &mut FixedSchedule(vec![0.0, 9.0])).unwrap();
        assert_eq!(traj.clamped, 2);
        assert_eq!(traj.log.len(), 2);
        assert_eq!(traj.decisions[0].purchase, 1.0);
        assert_eq!(traj.decisions[1].purchase, 2.0);
    }

    #[test]
    fn rejects_short_or_non_finite_prices() {
        let inst = Instance::constant(3, 1.0, store(1.0, 0.0)).unwrap();
        let short = PriceSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            simulate(&inst, &short, &mut FixedSchedule(vec![])),
            Err(Error::TooFewPrices { .. })
        ));
    }

    prop_compose! {
        fn arb_case()(
            horizon in 1usize..8,
            capacity in 0.0f64..4.0,
            frac in 0.0f64..=1.0,
        )(
            demand in proptest::collection::vec(0.0f64..2.0, horizon),
            prices in proptest::collection::vec(0.1f64..20.0, horizon),
            wanted in proptest::collection::vec(-1.0f64..6.0, horizon),
            capacity in Just(capacity),
            level in Just(capacity * frac),
        ) -> (Instance, PriceSeries, Vec<f64>) {
            let inst = Instance::new(demand, StorageSpec::new(capacity, level).unwrap()).unwrap();
            (inst, PriceSeries::new(prices).unwrap(), wanted)
        }
    }

    proptest! {
        #[test]
        fn trajectories_stay_in_bounds_and_conserve_energy((inst, prices, wanted) in arb_case()) {
            let traj = simulate(&inst, &prices, &mut FixedSchedule(wanted.clone())).unwrap();
            let cap = inst.storage().capacity();
            let mut level = inst.storage().initial_level();
            for (d, dec) in inst.demand().iter().zip(&traj.decisions) {
                prop_assert!(dec.storage_after >= 0.0 && dec.storage_after <= cap);
                prop_assert!(dec.purchase >= 0.0);
                prop_assert!((level + dec.purchase - d - dec.storage_after).abs() <= 1e-9);
                level = dec.storage_after;
            }
            let bought: f64 = traj.purchases().sum();
            let expected = inst.total_demand() - inst.storage().initial_level() + traj.final_level();
            prop_assert!((bought - expected).abs() <= 1e-9 * (1.0 + expected.abs()));

            let dot: f64 = traj.purchases().zip(prices.values()).map(|(q, p)| q * p).sum();
            prop_assert!((dot - traj.total_cost).abs() <= 1e-9 * (1.0 + dot.abs()));

            let again = simulate(&inst, &prices, &mut FixedSchedule(wanted)).unwrap();
            prop_assert_eq!(traj, again);
        }

        #[test]
        fn constant_price_cost_identity((inst, _p, wanted) in arb_case(), c in 0.5f64..30.0) {
            let prices = PriceSeries::new(vec![c; inst.horizon()]).unwrap();
            let traj = simulate(&inst, &prices, &mut FixedSchedule(wanted)).unwrap();
            let expected = c * (inst.total_demand() - inst.storage().initial_level() + traj.final_level());
            prop_assert!((traj.total_cost - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }

        #[test]
        fn price_scaling_scales_fixed_schedule_cost((inst, prices, wanted) in arb_case(), lambda in 0.01f64..100.0) {
            let scaled = PriceSeries::new(prices.values().iter().map(|p| p * lambda).collect()).unwrap();
            let base = simulate(&inst, &prices, &mut FixedSchedule(wanted.clone())).unwrap();
            let other = simulate(&inst, &scaled, &mut FixedSchedule(wanted)).unwrap();
            prop_assert_eq!(base.decisions, other.decisions);
            prop_assert!((other.total_cost - lambda * base.total_cost).abs() <= 1e-9 * (1.0 + other.total_cost.abs()));
        }
    }
}
