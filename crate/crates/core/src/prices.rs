//! Price series: synthetic generators, resampling of histories, and CSV I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::special::normal_quantile;

/// Ordered per-slot prices, all finite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceSeries(Vec<f64>);

impl PriceSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinitePrice { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Every price clamped into `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self(self.0.iter().map(|p| p.clamp(lo, hi)).collect())
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.0.len() {
            return Err(Error::SampleSizeOutOfRange {
                n: start + len,
                len: self.0.len(),
            });
        }
        Ok(Self(self.0[start..start + len].to_vec()))
    }
}

impl From<PriceSeries> for Vec<f64> {
    fn from(s: PriceSeries) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriceModel {
    Normal { mu: f64, sigma: f64 },
    LogNormal { log_mu: f64, log_sigma: f64 },
    /// `p(t) = mu + phi (p(t-1) - mu) + eps(t)`, `eps ~ N(0, sigma^2)`.
    Ar1 { mu: f64, sigma: f64, phi: f64 },
    Empirical { series: PriceSeries },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be finite and > 0")))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be finite")))
    }
}

impl PriceModel {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(Self::Normal { mu, sigma })
    }

    pub fn log_normal(log_mu: f64, log_sigma: f64) -> Result<Self> {
        finite("log_mu", log_mu)?;
        positive("log_sigma", log_sigma)?;
        Ok(Self::LogNormal { log_mu, log_sigma })
    }

    /// Log-normal whose mean and standard deviation equal `mean` and `sd`.
    pub fn log_normal_matching(mean: f64, sd: f64) -> Result<Self> {
        positive("mean", mean)?;
        positive("sd", sd)?;
        let log_var = (1.0 + (sd / mean).powi(2)).ln();
        Self::log_normal(mean.ln() - 0.5 * log_var, log_var.sqrt())
    }

    pub fn ar1(mu: f64, sigma: f64, phi: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        if !(phi > -1.0 && phi < 1.0) {
            return Err(Error::invalid("phi", format!("{phi} must lie in (-1, 1)")));
        }
        Ok(Self::Ar1 { mu, sigma, phi })
    }

    pub fn empirical(series: PriceSeries) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::invalid("series", "empirical model needs at least one price"));
        }
        Ok(Self::Empirical { series })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::LogNormal { .. } => "lognormal",
            Self::Ar1 { .. } => "ar1",
            Self::Empirical { .. } => "empirical",
        }
    }

    /// Mean of the (stationary) marginal distribution.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Normal { mu, .. } | Self::Ar1 { mu, .. } => *mu,
            Self::LogNormal { log_mu, log_sigma } => (log_mu + 0.5 * log_sigma * log_sigma).exp(),
            Self::Empirical { series } => {
                series.values().iter().sum::<f64>() / series.len() as f64
            }
        }
    }

    /// Standard deviation of the (stationary) marginal distribution.
    pub fn std_dev(&self) -> f64 {
        match self {
            Self::Normal { sigma, .. } => *sigma,
            Self::Ar1 { sigma, phi, .. } => sigma / (1.0 - phi * phi).sqrt(),
            Self::LogNormal { log_mu, log_sigma } => {
                let s2 = log_sigma * log_sigma;
                ((s2.exp() - 1.0) * (2.0 * log_mu + s2).exp()).sqrt()
            }
            Self::Empirical { series } => {
                let mean = self.mean();
                let ss: f64 = series.values().iter().map(|x| (x - mean).powi(2)).sum();
                (ss / series.len() as f64).sqrt()
            }
        }
    }

    /// Quantile of the (stationary) marginal distribution, `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Normal { mu, sigma } => mu + sigma * normal_quantile(p),
            Self::Ar1 { mu, .. } => mu + self.std_dev() * normal_quantile(p),
            Self::LogNormal { log_mu, log_sigma } => (log_mu + log_sigma * normal_quantile(p)).exp(),
            Self::Empirical { series } => {
                // inverse of the empirical CDF
                let mut sorted = series.values().to_vec();
                sorted.sort_by(f64::total_cmp);
                let k = (p * sorted.len() as f64).ceil() as usize;
                sorted[k.clamp(1, sorted.len()) - 1]
            }
        }
    }
}

/// Draw `length` prices from `model`, reproducibly for a fixed `seed`.
pub fn generate(model: &PriceModel, length: usize, seed: u64) -> Result<PriceSeries> {
    let mut rng = rng::stream(seed, &[]);
    generate_with(model, length, &mut rng)
}

/// [`generate`] drawing from a caller-supplied generator.
pub fn generate_with<R: Rng + ?Sized>(model: &PriceModel, length: usize, rng: &mut R) -> Result<PriceSeries> {
    if length == 0 {
        return Err(Error::invalid("length", "must be at least 1"));
    }
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let values: Vec<f64> = match model {
        PriceModel::Normal { mu, sigma } => (0..length).map(|_| mu + sigma * z()).collect(),
        PriceModel::LogNormal { log_mu, log_sigma } => {
            (0..length).map(|_| (log_mu + log_sigma * z()).exp()).collect()
        }
        PriceModel::Ar1 { mu, sigma, phi } => {
            let stationary = sigma / (1.0 - phi * phi).sqrt();
            let mut out = Vec::with_capacity(length);
            let mut prev = mu + stationary * z();
            out.push(prev);
            for _ in 1..length {
                prev = mu + phi * (prev - mu) + sigma * z();
                out.push(prev);
            }
            out
        }
        PriceModel::Empirical { .. } => return Err(Error::UnsupportedModel("empirical")),
    };
    PriceSeries::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    WithReplacement,
    Prefix,
    Window,
}

impl ResampleMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::WithReplacement => "with-replacement",
            Self::Prefix => "prefix",
            Self::Window => "window",
        }
    }
}

impl std::str::FromStr for ResampleMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "with-replacement" | "bootstrap" => Ok(Self::WithReplacement),
            "prefix" => Ok(Self::Prefix),
            "window" | "random-window" => Ok(Self::Window),
            other => Err(format!("unknown resample mode `{other}`")),
        }
    }
}

/// A size-`n` sample of `history`.
pub fn resample(history: &PriceSeries, n: usize, seed: u64, mode: ResampleMode) -> Result<PriceSeries> {
    let mut rng = rng::stream(seed, &[]);
    resample_with(history, n, mode, &mut rng)
}

pub fn resample_with<R: Rng + ?Sized>(
    history: &PriceSeries,
    n: usize,
    mode: ResampleMode,
    rng: &mut R,
) -> Result<PriceSeries> {
    let len = history.len();
    let out_of_range = Error::SampleSizeOutOfRange { n, len };
    if n == 0 || len == 0 {
        return Err(out_of_range);
    }
    let values = history.values();
    match mode {
        ResampleMode::WithReplacement => {
            Ok(PriceSeries((0..n).map(|_| values[rng.gen_range(0..len)]).collect()))
        }
        ResampleMode::Prefix if n <= len => history.slice(0, n),
        ResampleMode::Window if n <= len => {
            let start = rng.gen_range(0..=len - n);
            history.slice(start, n)
        }
        _ => Err(out_of_range),
    }
}

/// Layout of a price CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvFormat {
    pub column: usize,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            column: 0,
            delimiter: b',',
            has_header: false,
        }
    }
}

/// Read one price per record from column `format.column`.
pub fn ingest(path: &Path, format: &CsvFormat) -> Result<PriceSeries> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let field = record
            .get(format.column)
            .ok_or_else(|| parse_err(line, format!("no column {}", format.column)))?;
        let value: f64 = field
            .parse()
            .map_err(|_| parse_err(line, format!("`{field}` is not a number")))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("`{field}` is not finite")));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::EmptySeries {
            path: path.to_path_buf(),
        });
    }
    PriceSeries::new(values)
}

/// One price per line, shortest decimal form that parses back exactly.
pub fn write_series(path: &Path, series: &PriceSeries) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for v in series.values() {
        writeln!(out, "{v:?}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
