//! Expected-cost dynamic programming on a storage-level grid.
//!
//! The price of each slot is observed before acting, so the recursion is
//!
//! ```text
//! V_T(s) = 0
//! V_t(s) = E_p[ min_{q feasible} p q + V_{t+1}(s + q - d_t) ]
//! ```
//!
//! with the expectation replaced by equal-weight quantile atoms and
//! `V_{t+1}` linearly interpolated between grid levels. The inner minimum
//! runs over the grid levels reachable from `s` plus the two exact
//! feasibility endpoints.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{feasible_purchase_range, Instance, Policy, SlotContext, StorageSpec};
use crate::prices::{PriceModel, PriceSeries};

pub const DEFAULT_GRID: usize = 100;
pub const DEFAULT_QUADRATURE: usize = 51;

const INDEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceAtom {
    pub price: f64,
    pub weight: f64,
}

/// `k` atoms at the quantile midpoints `(j - 0.5) / k`, each of weight `1/k`.
pub fn quantile_atoms(model: &PriceModel, k: usize) -> Result<Vec<PriceAtom>> {
    if k == 0 {
        return Err(Error::invalid("K", "quadrature needs at least one atom"));
    }
    let weight = 1.0 / k as f64;
    Ok((1..=k)
        .map(|j| PriceAtom {
            price: model.quantile((j as f64 - 0.5) / k as f64),
            weight,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    storage: StorageSpec,
    demand: Vec<f64>,
    grid: usize,
    step: f64,
    /// Row `t` holds `V_t` at the `grid + 1` levels.
    values: Vec<f64>,
    /// Price atoms used for slot `t`.
    atoms: Vec<Vec<PriceAtom>>,
}

/// Expected cost-to-go for `instance` under i.i.d. prices from `model`.
pub fn build_value_table(instance: &Instance, model: &PriceModel, grid: usize, quadrature: usize) -> Result<ValueTable> {
    let atoms = quantile_atoms(model, quadrature)?;
    ValueTable::build(instance, grid, vec![atoms; instance.horizon()])
}

impl ValueTable {
    /// Table for a known price path: one atom of weight one per slot.
    pub fn for_price_path(instance: &Instance, prices: &PriceSeries, grid: usize) -> Result<Self> {
        let horizon = instance.horizon();
        if prices.len() < horizon {
            return Err(Error::TooFewPrices {
                needed: horizon,
                got: prices.len(),
            });
        }
        let atoms = prices.values()[..horizon]
            .iter()
            .map(|&price| vec![PriceAtom { price, weight: 1.0 }])
            .collect();
        Self::build(instance, grid, atoms)
    }

    fn build(instance: &Instance, grid: usize, atoms: Vec<Vec<PriceAtom>>) -> Result<Self> {
        if grid < 2 {
            return Err(Error::invalid("G", format!("grid size {grid} must be at least 2")));
        }
        let horizon = instance.horizon();
        let storage = *instance.storage();
        let step = storage.capacity() / grid as f64;
        let width = grid + 1;
        let mut table = Self {
            storage,
            demand: instance.demand().to_vec(),
            grid,
            step,
            values: vec![0.0; (horizon + 1) * width],
            atoms,
        };

        let mut bounds = Vec::with_capacity(width);
        let mut f = vec![0.0; width];
        for t in (0..horizon).rev() {
            let demand = table.demand[t];
            bounds.clear();
            for j in 0..width {
                let level = table.level(j);
                let range = feasible_purchase_range(&storage, level, demand)?;
                let lo = level + range.min - demand;
                let hi = level + range.max - demand;
                let (a, b) = table.index_span(lo, hi);
                bounds.push((lo, hi, a, b));
            }
            let monotone = bounds.windows(2).all(|w| w[0].2 <= w[1].2 && w[0].3 <= w[1].3);

            let mut row = vec![0.0; width];
            for atom in &table.atoms[t] {
                let p = atom.price;
                let next = table.row(t + 1);
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi = p * table.level(i) + next[i];
                }
                let window = if monotone {
                    sliding_min(&f, &bounds)
                } else {
                    bounds.iter().map(|&(_, _, a, b)| scan_min(&f, a, b)).collect()
                };
                for (j, &(lo, hi, _, _)) in bounds.iter().enumerate() {
                    let at_lo = p * lo + table.interp_row(next, lo);
                    let at_hi = p * hi + table.interp_row(next, hi);
                    let best = window[j].unwrap_or(f64::INFINITY).min(at_lo).min(at_hi);
                    row[j] += atom.weight * (best + p * (demand - table.level(j)));
                }
            }
            table.values[t * width..(t + 1) * width].copy_from_slice(&row);
        }
        Ok(table)
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn storage(&self) -> &StorageSpec {
        &self.storage
    }

    pub fn atoms(&self, t: usize) -> &[PriceAtom] {
        &self.atoms[t]
    }

    pub fn level(&self, i: usize) -> f64 {
        if i == self.grid {
            self.storage.capacity()
        } else {
            i as f64 * self.step
        }
    }

    /// `V_t` at the grid levels, `t` in `0..=horizon`.
    pub fn row(&self, t: usize) -> &[f64] {
        let width = self.grid + 1;
        &self.values[t * width..(t + 1) * width]
    }

    /// `V_t(level)` by linear interpolation.
    pub fn value(&self, t: usize, level: f64) -> f64 {
        self.interp_row(self.row(t), level)
    }

    fn interp_row(&self, row: &[f64], level: f64) -> f64 {
        if self.step <= 0.0 {
            return row[0];
        }
        let x = (level / self.step).clamp(0.0, self.grid as f64);
        let i = (x.floor() as usize).min(self.grid - 1);
        let frac = x - i as f64;
        if frac <= 0.0 {
            row[i]
        } else {
            row[i] * (1.0 - frac) + row[i + 1] * frac
        }
    }

    /// Grid indices inside `[lo, hi]`, as an inclusive span that may be empty.
    fn index_span(&self, lo: f64, hi: f64) -> (usize, usize) {
        if self.step <= 0.0 {
            return (0, 0);
        }
        let a = (lo / self.step - INDEX_TOL).ceil().max(0.0) as usize;
        let b = ((hi / self.step + INDEX_TOL).floor().max(-1.0) as isize).min(self.grid as isize);
        if b < 0 {
            (1, 0)
        } else {
            (a, b as usize)
        }
    }

    /// Cheapest purchase at slot `t` from `level` at the observed `price`.
    /// Ties go to the smaller purchase.
    pub fn best_purchase(&self, t: usize, level: f64, price: f64, demand: f64) -> Result<f64> {
        if t >= self.horizon() {
            return Err(Error::SlotOutOfRange {
                slot: t,
                horizon: self.horizon(),
            });
        }
        let range = feasible_purchase_range(&self.storage, level, demand)?;
        let next = self.row(t + 1);
        let cost = |q: f64| price * q + self.interp_row(next, level + q - demand);

        let (a, b) = self.index_span(level + range.min - demand, level + range.max - demand);
        let grid_q = (a..=b).map(|i| (self.level(i) - level + demand).clamp(range.min, range.max));
        let mut best_q = range.min;
        let mut best = cost(range.min);
        for q in grid_q.chain(std::iter::once(range.max)) {
            let v = cost(q);
            if v < best - 1e-12 * (1.0 + best.abs()) {
                best = v;
                best_q = q;
            }
        }
        Ok(best_q)
    }

    /// Dump as CSV rows `t,grid_index,s,V`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "grid_index", "s", "V"])?;
        for t in 0..=self.horizon() {
            for (i, v) in self.row(t).iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    format!("{:?}", self.level(i)),
                    format!("{v:?}"),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn scan_min(f: &[f64], a: usize, b: usize) -> Option<f64> {
    (a <= b).then(|| f[a..=b].iter().copied().fold(f64::INFINITY, f64::min))
}

/// Minimum of `f` over each inclusive index window; windows must move
/// monotonically to the right.
fn sliding_min(f: &[f64], bounds: &[(f64, f64, usize, usize)]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(bounds.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next_in = 0;
    for &(_, _, a, b) in bounds {
        while next_in <= b && next_in < f.len() {
            while deque.back().is_some_and(|&i| f[i] > f[next_in]) {
                deque.pop_back();
            }
            deque.push_back(next_in);
            next_in += 1;
        }
        while deque.front().is_some_and(|&i| i < a) {
            deque.pop_front();
        }
        out.push(if a <= b { deque.front().map(|&i| f[i]) } else { None });
    }
    out
}

/// Acts greedily with respect to a [`ValueTable`].
#[derive(Debug, Clone)]
pub struct DpPolicy {
    table: Arc<ValueTable>,
}

pub fn dp_policy(table: impl Into<Arc<ValueTable>>) -> DpPolicy {
    DpPolicy { table: table.into() }
}

impl DpPolicy {
    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl Policy for DpPolicy {
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Result<f64> {
        self.table.best_purchase(ctx.slot, ctx.level, ctx.price, ctx.demand)
    }
}
