//! Confidence intervals for the price mean and standard deviation, the
//! three-sigma price bounds derived from them, and the threshold
//! `sqrt(M m)`.
//!
//! Critical points are upper-tail: the mean interval uses the
//! `1 - alpha/2` quantile of `t(n-1)`, and the standard deviation interval
//! divides by the `1 - alpha/2` and `alpha/2` quantiles of `chi2(n-1)` for
//! its lower and upper endpoints respectively.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::prices::PriceSeries;
use crate::special::{chi2_quantile, t_quantile};

/// Fraction of `M` that a nonpositive lower bound is lifted to when
/// clamping is enabled.
pub const LOWER_BOUND_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Standard deviation with the `n - 1` denominator.
    pub sample_std: f64,
}

/// Two-pass mean and sample standard deviation.
pub fn sample_stats(data: &PriceSeries) -> Result<SampleStats> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewPrices { needed: 2, got: n });
    }
    let values = data.values();
    let mean = values.iter().sum::<f64>() / n as f64;
    // compensated second pass
    let (ss, comp) = values.iter().fold((0.0, 0.0), |(ss, comp), x| {
        let dev = x - mean;
        (ss + dev * dev, comp + dev)
    });
    let var = (ss - comp * comp / n as f64) / (n - 1) as f64;
    Ok(SampleStats {
        n,
        mean,
        sample_std: var.max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("{alpha} must lie in (0, 1)")))
    }
}

fn df(stats: &SampleStats) -> Result<f64> {
    if stats.n < 2 {
        return Err(Error::TooFewPrices { needed: 2, got: stats.n });
    }
    Ok((stats.n - 1) as f64)
}

/// `mean +- S / sqrt(n) * t_{1-alpha/2}(n-1)`.
pub fn mu_interval(stats: &SampleStats, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let t = t_quantile(1.0 - 0.5 * alpha, df(stats)?)?;
    let half = stats.sample_std / (stats.n as f64).sqrt() * t;
    Ok(Interval {
        lo: stats.mean - half,
        hi: stats.mean + half,
    })
}

/// Interval for sigma from `(n-1) S^2 / sigma^2 ~ chi2(n-1)`.
pub fn sigma_interval(stats: &SampleStats, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let df = df(stats)?;
    if stats.sample_std <= 0.0 {
        return Err(Error::DegenerateInterval);
    }
    let upper_crit = chi2_quantile(1.0 - 0.5 * alpha, df)?;
    let lower_crit = chi2_quantile(0.5 * alpha, df)?;
    Ok(Interval {
        lo: stats.sample_std * (df / upper_crit).sqrt(),
        hi: stats.sample_std * (df / lower_crit).sqrt(),
    })
}

/// Price bounds `(M, m)` by the three-sigma rule.
///
/// Point mode uses the sample mean and `S`; conservative mode takes the
/// widest combination of interval endpoints.
pub fn estimate_bounds(
    stats: &SampleStats,
    mu: &Interval,
    sigma: &Interval,
    conservative: bool,
) -> (f64, f64) {
    if conservative {
        (mu.hi + 3.0 * sigma.hi, mu.lo - 3.0 * sigma.hi)
    } else {
        (
            stats.mean + 3.0 * stats.sample_std,
            stats.mean - 3.0 * stats.sample_std,
        )
    }
}

/// `sqrt(M m)`; fails when `m <= 0`.
pub fn threshold(upper: f64, lower: f64) -> Result<f64> {
    if upper < lower {
        return Err(Error::invalid("M_hat", format!("{upper} is below m_hat {lower}")));
    }
    if lower <= 0.0 {
        return Err(Error::NonPositiveLowerBound { m_hat: lower });
    }
    Ok((upper * lower).sqrt())
}

/// Lift a nonpositive lower bound to `LOWER_BOUND_FLOOR * M`.
pub fn clamp_lower_bound(upper: f64, lower: f64) -> Result<f64> {
    if lower > 0.0 {
        return Ok(lower);
    }
    if upper <= 0.0 {
        return Err(Error::NonPositiveLowerBound { m_hat: lower });
    }
    Ok(lower.max(LOWER_BOUND_FLOOR * upper))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub alpha: f64,
    pub conservative: bool,
    /// Clamp a nonpositive lower bound instead of failing, and treat a
    /// zero-spread sample as a degenerate `[0, 0]` sigma interval.
    pub clamp: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            conservative: false,
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub alpha: f64,
    pub stats: SampleStats,
    pub mu_interval: Interval,
    pub sigma_interval: Interval,
    /// Upper price bound `M_hat`.
    pub upper: f64,
    /// Lower price bound `m_hat`, after clamping if enabled.
    pub lower: f64,
    /// `None` when `lower <= 0` and clamping is off.
    pub theta_hat: Option<f64>,
    pub conservative: bool,
    pub lower_clamped: bool,
}

pub const REPORT_HEADER: &str =
    "n,alpha,mean,s,mu_lo,mu_hi,sigma_lo,sigma_hi,m_hat,M_hat,theta_hat,conservative";

impl EstimateReport {
    pub fn from_series(data: &PriceSeries, opts: &EstimateOptions) -> Result<Self> {
        Self::from_stats(sample_stats(data)?, opts)
    }

    pub fn from_stats(stats: SampleStats, opts: &EstimateOptions) -> Result<Self> {
        let mu = mu_interval(&stats, opts.alpha)?;
        let sigma = match sigma_interval(&stats, opts.alpha) {
            Err(Error::DegenerateInterval) if opts.clamp => Interval { lo: 0.0, hi: 0.0 },
            other => other?,
        };
        let (upper, raw_lower) = estimate_bounds(&stats, &mu, &sigma, opts.conservative);
        let lower = if opts.clamp {
            clamp_lower_bound(upper, raw_lower)?
        } else {
            raw_lower
        };
        Ok(Self {
            alpha: opts.alpha,
            stats,
            mu_interval: mu,
            sigma_interval: sigma,
            upper,
            lower,
            theta_hat: threshold(upper, lower).ok(),
            conservative: opts.conservative,
            lower_clamped: lower != raw_lower,
        })
    }

    pub fn theta(&self) -> Result<f64> {
        self.theta_hat
            .ok_or(Error::NonPositiveLowerBound { m_hat: self.lower })
    }

    /// Competitive-ratio bound `sqrt(M / m)`.
    pub fn cr_bound(&self) -> Result<f64> {
        if self.lower <= 0.0 {
            return Err(Error::NonPositiveLowerBound { m_hat: self.lower });
        }
        Ok((self.upper / self.lower).sqrt())
    }

    /// One CSV record matching [`REPORT_HEADER`].
    pub fn csv_record(&self) -> String {
        let mut s = String::new();
        let theta = self.theta_hat.map(|t| format!("{t:?}")).unwrap_or_default();
        write!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            self.stats.n,
            self.alpha,
            self.stats.mean,
            self.stats.sample_std,
            self.mu_interval.lo,
            self.mu_interval.hi,
            self.sigma_interval.lo,
            self.sigma_interval.hi,
            self.lower,
            self.upper,
            theta,
            self.conservative
        )
        .unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prices::{generate, PriceModel};
    use proptest::prelude::*;

    fn series(v: &[f64]) -> PriceSeries {
        PriceSeries::new(v.to_vec()).unwrap()
    }

    fn stats(n: usize, mean: f64, s: f64) -> SampleStats {
        SampleStats {
            n,
            mean,
            sample_std: s,
        }
    }

    #[test]
    fn sample_stats_examples() {
        let s = sample_stats(&series(&[3.0, 3.0, 3.0, 3.0])).unwrap();
        assert_eq!((s.mean, s.sample_std), (3.0, 0.0));
        let s = sample_stats(&series(&[0.0, 2.0])).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.sample_std - 2f64.sqrt()).abs() < 1e-15);
        assert!(sample_stats(&series(&[1.0])).is_err());
    }

    #[test]
    fn sample_stats_large_normal() {
        let data = generate(&PriceModel::normal(5.0, 2.0).unwrap(), 10_000, 3).unwrap();
        let s = sample_stats(&data).unwrap();
        assert!((4.94..=5.06).contains(&s.mean), "{}", s.mean);
        assert!((1.96..=2.04).contains(&s.sample_std), "{}", s.sample_std);
    }

    #[test]
    fn mu_interval_examples() {
        let i = mu_interval(&stats(9, 4.0, 0.0), 0.05).unwrap();
        assert_eq!((i.lo, i.hi), (4.0, 4.0));
        let i = mu_interval(&stats(16, 10.0, 2.0), 0.05).unwrap();
        assert!((i.lo - 8.934).abs() < 1e-3 && (i.hi - 11.066).abs() < 1e-3, "{i:?}");
        assert!(mu_interval(&stats(16, 10.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn mu_interval_width_shrinks_as_alpha_grows() {
        let st = stats(20, 0.0, 1.0);
        let widths: Vec<f64> = [0.01, 0.05, 0.2, 0.5, 0.9, 0.999]
            .iter()
            .map(|&a| mu_interval(&st, a).unwrap().width())
            .collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
        assert!(widths.last().unwrap() < &0.01);
    }

    #[test]
    fn mu_interval_width_scales_inverse_sqrt_n() {
        let w1 = mu_interval(&stats(100, 0.0, 1.0), 0.05).unwrap().width();
        let w4 = mu_interval(&stats(400, 0.0, 1.0), 0.05).unwrap().width();
        assert!((w4 / w1 / 0.5 - 1.0).abs() < 0.05);
    }

    #[test]
    fn sigma_interval_examples() {
        let i = sigma_interval(&stats(11, 0.0, 1.0), 0.05).unwrap();
        assert!((i.lo - 0.699).abs() < 1e-3, "{i:?}");
        assert!((i.hi - 1.755).abs() < 1e-3, "{i:?}");
        assert!(matches!(
            sigma_interval(&stats(11, 0.0, 0.0), 0.05),
            Err(Error::DegenerateInterval)
        ));
        let narrow = sigma_interval(&stats(11, 0.0, 1.0), 0.999).unwrap();
        let center = (10.0 / chi2_quantile(0.5, 10.0).unwrap()).sqrt();
        assert!((narrow.lo - center).abs() < 1e-2 && (narrow.hi - center).abs() < 1e-2);
    }

    #[test]
    fn bounds_and_threshold_examples() {
        let st = stats(10, 10.0, 1.0);
        let dummy = Interval { lo: 0.0, hi: 0.0 };
        assert_eq!(estimate_bounds(&st, &dummy, &dummy, false), (13.0, 7.0));
        let st = stats(10, 1.0, 1.0);
        let (up, lo) = estimate_bounds(&st, &dummy, &dummy, false);
        assert_eq!((up, lo), (4.0, -2.0));
        assert!(matches!(threshold(up, lo), Err(Error::NonPositiveLowerBound { .. })));
        assert!((clamp_lower_bound(up, lo).unwrap() - 0.004).abs() < 1e-15);

        assert_eq!(threshold(4.0, 1.0).unwrap(), 2.0);
        assert_eq!(threshold(7.5, 7.5).unwrap(), 7.5);
        assert!((threshold(13.0, 7.0).unwrap() - 91f64.sqrt()).abs() < 1e-15);
        assert!((threshold(13.0, 7.0).unwrap() - 9.539).abs() < 1e-3);
    }

    #[test]
    fn report_without_clamp_keeps_raw_lower_bound() {
        let opts = EstimateOptions {
            clamp: false,
            ..EstimateOptions::default()
        };
        let r = EstimateReport::from_series(&series(&[0.0, 2.0, 1.0, 0.5]), &opts).unwrap();
        assert!(r.lower < 0.0);
        assert!(r.theta_hat.is_none());
        assert!(r.theta().is_err());
        assert!(r.csv_record().contains(",,"));
    }

    #[test]
    fn report_degenerate_sample() {
        let r = EstimateReport::from_series(&series(&[3.0; 4]), &EstimateOptions::default()).unwrap();
        assert_eq!((r.upper, r.lower, r.theta_hat), (3.0, 3.0, Some(3.0)));
        assert_eq!(r.cr_bound().unwrap(), 1.0);
        let strict = EstimateOptions {
            clamp: false,
            ..EstimateOptions::default()
        };
        assert!(matches!(
            EstimateReport::from_series(&series(&[3.0; 4]), &strict),
            Err(Error::DegenerateInterval)
        ));
    }

    #[test]
    fn report_record_has_header_arity() {
        let r = EstimateReport::from_series(&series(&[9.0, 10.0, 11.0, 12.0]), &EstimateOptions::default())
            .unwrap();
        assert_eq!(r.csv_record().split(',').count(), REPORT_HEADER.split(',').count());
    }

    proptest! {
        #[test]
        fn report_invariants(values in proptest::collection::vec(-5.0f64..50.0, 2..40), conservative in any::<bool>()) {
            let opts = EstimateOptions { conservative, ..EstimateOptions::default() };
            let data = series(&values);
            let r = EstimateReport::from_series(&data, &opts).unwrap();
            prop_assert!(r.mu_interval.lo <= r.stats.mean && r.stats.mean <= r.mu_interval.hi);
            prop_assert!(0.0 <= r.sigma_interval.lo && r.sigma_interval.lo <= r.sigma_interval.hi);
            prop_assert!(r.lower <= r.upper);
            if let Some(t) = r.theta_hat {
                prop_assert!((t * t - r.upper * r.lower).abs() <= 1e-12 * (r.upper * r.lower).abs());
            }
        }

        #[test]
        fn conservative_bounds_are_wider(values in proptest::collection::vec(0.0f64..50.0, 3..40)) {
            let data = series(&values);
            let st = sample_stats(&data).unwrap();
            prop_assume!(st.sample_std > 1e-9);
            let mu = mu_interval(&st, 0.05).unwrap();
            let sigma = sigma_interval(&st, 0.05).unwrap();
            let (pu, pl) = estimate_bounds(&st, &mu, &sigma, false);
            let (cu, cl) = estimate_bounds(&st, &mu, &sigma, true);
            prop_assert!(cu > pu && cl < pl);
        }

        #[test]
        fn stats_are_reproducible(values in proptest::collection::vec(-1e3f64..1e3, 2..100)) {
            let data = series(&values);
            let a = sample_stats(&data).unwrap();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((a.mean - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
            prop_assert!((a.sample_std - var.sqrt()).abs() <= 1e-12 * (1.0 + var.sqrt()));
        }
    }
}
