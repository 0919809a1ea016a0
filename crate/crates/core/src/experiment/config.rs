//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default (the reference setup: 24 slots of unit demand, a 5-unit store,
//! N(10, 2^2) prices), so a config file only lists what it changes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::Verdict;
use crate::model::{Instance, StorageSpec};
use crate::policies::PolicyFamily;
use crate::prices::{CsvFormat, PriceModel, ResampleMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Estimate,
    ViolationCurve,
    PolicyCompare,
    Adaptive,
    Relax,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::ViolationCurve => "violation-curve",
            Self::PolicyCompare => "policy-compare",
            Self::Adaptive => "adaptive",
            Self::Relax => "relax",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "estimate" => Self::Estimate,
            "violation-curve" => Self::ViolationCurve,
            "policy-compare" => Self::PolicyCompare,
            "adaptive" | "adaptive-convergence" => Self::Adaptive,
            "relax" | "relaxation" => Self::Relax,
            other => return Err(format!("unknown experiment `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    Constant(f64),
    Vector(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalChoice {
    /// Fresh series from `model`.
    Model,
    /// Windows of the last `holdout_len` history prices.
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Baseline,
    Ar1,
    LogNormal,
    DemandNoise,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Ar1 => "ar1",
            Self::LogNormal => "lognormal",
            Self::DemandNoise => "demand-noise",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "baseline" => Self::Baseline,
            "ar1" => Self::Ar1,
            "lognormal" => Self::LogNormal,
            "demand-noise" => Self::DemandNoise,
            other => return Err(format!("unknown scenario `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: PriceModel,
    pub history: Option<PathBuf>,
    /// Length of the synthetic history when no file is given.
    pub history_len: usize,
    pub csv: CsvFormat,
    pub eval: EvalChoice,
    pub holdout_len: usize,

    pub horizon: usize,
    pub capacity: f64,
    pub initial_level: f64,
    pub max_charge: Option<f64>,
    pub max_discharge: Option<f64>,
    pub demand: DemandSpec,

    pub n_grid: Vec<usize>,
    pub warmup_grid: Vec<usize>,
    /// Refresh strides for the adaptive policy; `None` never refreshes.
    pub stride_grid: Vec<Option<usize>>,

    pub alpha: f64,
    pub rounds: usize,
    pub eval_episodes: usize,
    pub episodes: usize,
    pub resample: ResampleMode,
    pub verdict: Verdict,
    pub clamp: bool,
    pub clamp_prices: bool,
    pub conservative: bool,
    pub adaptive_family: PolicyFamily,
    pub grid: usize,
    pub quadrature: usize,

    pub scenarios: Vec<Scenario>,
    pub ar1_phi: f64,
    pub demand_noise: f64,

    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::PolicyCompare,
            model: PriceModel::Normal { mu: 10.0, sigma: 2.0 },
            history: None,
            history_len: 10_000,
            csv: CsvFormat::default(),
            eval: EvalChoice::Model,
            holdout_len: 1000,
            horizon: 24,
            capacity: 5.0,
            initial_level: 0.0,
            max_charge: None,
            max_discharge: None,
            demand: DemandSpec::Constant(1.0),
            n_grid: vec![10, 100, 1000],
            warmup_grid: vec![10, 100, 1000, 10_000],
            stride_grid: vec![None],
            alpha: 0.05,
            rounds: 200,
            eval_episodes: 10,
            episodes: 1000,
            resample: ResampleMode::WithReplacement,
            verdict: Verdict::Mean,
            clamp: true,
            clamp_prices: false,
            conservative: false,
            adaptive_family: PolicyFamily::Dp {
                grid: crate::policies::dp::DEFAULT_GRID,
                quadrature: crate::policies::dp::DEFAULT_QUADRATURE,
            },
            grid: crate::policies::dp::DEFAULT_GRID,
            quadrature: crate::policies::dp::DEFAULT_QUADRATURE,
            scenarios: vec![
                Scenario::Baseline,
                Scenario::Ar1,
                Scenario::LogNormal,
                Scenario::DemandNoise,
            ],
            ar1_phi: 0.8,
            demand_noise: 0.2,
            seed: 0,
            workers: 1,
            out: None,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{}`", v.trim())))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::config(key, format!("`{other}` is not a boolean"))),
    }
}

fn parse_optional_f64(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse_one(key, v).map(Some),
    }
}

fn parse_stride(key: &str, value: &str) -> Result<Option<usize>> {
    match value.trim() {
        "inf" | "never" => Ok(None),
        v => parse_one(key, v).map(Some),
    }
}

fn parse_model(key: &str, value: &str) -> Result<PriceModel> {
    let (name, params) = value
        .trim()
        .split_once(':')
        .ok_or_else(|| Error::config(key, "expected `name:param,...`"))?;
    let p: Vec<f64> = parse_list(key, params)?;
    let arity = |n: usize| {
        if p.len() == n {
            Ok(())
        } else {
            Err(Error::config(key, format!("{name} takes {n} parameters")))
        }
    };
    let model = match name.trim() {
        "normal" => {
            arity(2)?;
            PriceModel::normal(p[0], p[1])
        }
        "lognormal" => {
            arity(2)?;
            PriceModel::log_normal(p[0], p[1])
        }
        "ar1" => {
            arity(3)?;
            PriceModel::ar1(p[0], p[1], p[2])
        }
        other => return Err(Error::config(key, format!("unknown model `{other}`"))),
    };
    model.map_err(|e| Error::config(key, e.to_string()))
}

fn render_model(model: &PriceModel) -> String {
    match model {
        PriceModel::Normal { mu, sigma } => format!("normal:{mu:?},{sigma:?}"),
        PriceModel::LogNormal { log_mu, log_sigma } => format!("lognormal:{log_mu:?},{log_sigma:?}"),
        PriceModel::Ar1 { mu, sigma, phi } => format!("ar1:{mu:?},{sigma:?},{phi:?}"),
        PriceModel::Empirical { .. } => "empirical".to_string(),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn parse_family(key: &str, value: &str, grid: usize, quadrature: usize) -> Result<PolicyFamily> {
    Ok(match value.trim() {
        "thb" | "threshold" => PolicyFamily::Threshold,
        "mthb" => PolicyFamily::ModifiedThreshold,
        "dp" => PolicyFamily::Dp { grid, quadrature },
        other => return Err(Error::config(key, format!("unknown policy family `{other}`"))),
    })
}

fn family_name(family: PolicyFamily) -> &'static str {
    match family {
        PolicyFamily::Threshold => "thb",
        PolicyFamily::ModifiedThreshold => "mthb",
        PolicyFamily::Dp { .. } => "dp",
    }
}

impl ExperimentConfig {
    /// Parse a config file's text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `key = value`"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => self.kind = value.parse().map_err(|e: String| Error::config(key, e))?,
            "model" => self.model = parse_model(key, value)?,
            "history" => {
                self.history = (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
            }
            "history_len" => self.history_len = parse_one(key, value)?,
            "csv_column" => self.csv.column = parse_one(key, value)?,
            "csv_delimiter" => {
                self.csv.delimiter = match value {
                    "," | "comma" => b',',
                    ";" | "semicolon" => b';',
                    other => return Err(Error::config(key, format!("unsupported delimiter `{other}`"))),
                }
            }
            "csv_header" => self.csv.has_header = parse_bool(key, value)?,
            "eval" => {
                self.eval = match value {
                    "model" => EvalChoice::Model,
                    "holdout" => EvalChoice::Holdout,
                    other => return Err(Error::config(key, format!("unknown eval source `{other}`"))),
                }
            }
            "holdout_len" => self.holdout_len = parse_one(key, value)?,
            "horizon" => self.horizon = parse_one(key, value)?,
            "capacity" => self.capacity = parse_one(key, value)?,
            "initial_level" => self.initial_level = parse_one(key, value)?,
            "max_charge" => self.max_charge = parse_optional_f64(key, value)?,
            "max_discharge" => self.max_discharge = parse_optional_f64(key, value)?,
            "demand" => {
                let (kind, rest) = value
                    .split_once(':')
                    .ok_or_else(|| Error::config(key, "expected constant:X, vector:a,b,.. or file:PATH"))?;
                self.demand = match kind {
                    "constant" => DemandSpec::Constant(parse_one(key, rest)?),
                    "vector" => DemandSpec::Vector(parse_list(key, rest)?),
                    "file" => DemandSpec::File(PathBuf::from(rest)),
                    other => return Err(Error::config(key, format!("unknown demand kind `{other}`"))),
                }
            }
            "n_grid" => self.n_grid = parse_list(key, value)?,
            "warmup_grid" => self.warmup_grid = parse_list(key, value)?,
            "stride_grid" => {
                self.stride_grid = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_stride(key, v))
                    .collect::<Result<_>>()?
            }
            "alpha" => self.alpha = parse_one(key, value)?,
            "rounds" => self.rounds = parse_one(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_one(key, value)?,
            "episodes" => self.episodes = parse_one(key, value)?,
            "resample" => self.resample = value.parse().map_err(|e: String| Error::config(key, e))?,
            "verdict" => {
                self.verdict = match value {
                    "mean" => Verdict::Mean,
                    "any" => Verdict::Any,
                    other => return Err(Error::config(key, format!("unknown verdict `{other}`"))),
                }
            }
            "clamp" => self.clamp = parse_bool(key, value)?,
            "clamp_prices" => self.clamp_prices = parse_bool(key, value)?,
            "conservative" => self.conservative = parse_bool(key, value)?,
            "adaptive_family" => {
                self.adaptive_family = parse_family(key, value, self.grid, self.quadrature)?
            }
            "grid" => {
                self.grid = parse_one(key, value)?;
                self.sync_family();
            }
            "quadrature" => {
                self.quadrature = parse_one(key, value)?;
                self.sync_family();
            }
            "scenarios" => self.scenarios = parse_list(key, value)?,
            "ar1_phi" => self.ar1_phi = parse_one(key, value)?,
            "demand_noise" => self.demand_noise = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "workers" => self.workers = parse_one(key, value)?,
            "out" => self.out = (!value.is_empty() && value != "none").then(|| PathBuf::from(value)),
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    fn sync_family(&mut self) {
        if let PolicyFamily::Dp { .. } = self.adaptive_family {
            self.adaptive_family = PolicyFamily::Dp {
                grid: self.grid,
                quadrature: self.quadrature,
            };
        }
    }

    /// Every key, one per line, in a form [`ExperimentConfig::parse`] reads back.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into());
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_else(|| "none".into());
        let demand = match &self.demand {
            DemandSpec::Constant(d) => format!("constant:{d:?}"),
            DemandSpec::Vector(v) => format!("vector:{}", join(v, |d| format!("{d:?}"))),
            DemandSpec::File(p) => format!("file:{}", p.display()),
        };
        let lines: Vec<(&str, String)> = vec![
            ("kind", self.kind.as_str().into()),
            ("model", render_model(&self.model)),
            ("history", path(&self.history)),
            ("history_len", self.history_len.to_string()),
            ("csv_column", self.csv.column.to_string()),
            ("csv_delimiter", (self.csv.delimiter as char).to_string()),
            ("csv_header", self.csv.has_header.to_string()),
            (
                "eval",
                match self.eval {
                    EvalChoice::Model => "model".into(),
                    EvalChoice::Holdout => "holdout".into(),
                },
            ),
            ("holdout_len", self.holdout_len.to_string()),
            ("horizon", self.horizon.to_string()),
            ("capacity", format!("{:?}", self.capacity)),
            ("initial_level", format!("{:?}", self.initial_level)),
            ("max_charge", opt(self.max_charge)),
            ("max_discharge", opt(self.max_discharge)),
            ("demand", demand),
            ("n_grid", join(&self.n_grid, |n| n.to_string())),
            ("warmup_grid", join(&self.warmup_grid, |n| n.to_string())),
            (
                "stride_grid",
                join(&self.stride_grid, |r| r.map(|r| r.to_string()).unwrap_or_else(|| "inf".into())),
            ),
            ("alpha", format!("{:?}", self.alpha)),
            ("rounds", self.rounds.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("episodes", self.episodes.to_string()),
            ("resample", self.resample.as_str().into()),
            (
                "verdict",
                match self.verdict {
                    Verdict::Mean => "mean".into(),
                    Verdict::Any => "any".into(),
                },
            ),
            ("clamp", self.clamp.to_string()),
            ("clamp_prices", self.clamp_prices.to_string()),
            ("conservative", self.conservative.to_string()),
            ("grid", self.grid.to_string()),
            ("quadrature", self.quadrature.to_string()),
            ("adaptive_family", family_name(self.adaptive_family).into()),
            ("scenarios", join(&self.scenarios, |s| s.as_str().to_string())),
            ("ar1_phi", format!("{:?}", self.ar1_phi)),
            ("demand_noise", format!("{:?}", self.demand_noise)),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("out", path(&self.out)),
        ];
        for (k, v) in lines {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Field-level checks that do not require running anything.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(key, "must be at least 1"))
            }
        };
        positive("rounds", self.rounds)?;
        positive("eval_episodes", self.eval_episodes)?;
        positive("episodes", self.episodes)?;
        positive("workers", self.workers)?;
        positive("history_len", self.history_len)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        if self.grid < 2 {
            return Err(Error::config("grid", "must be at least 2"));
        }
        positive("quadrature", self.quadrature)?;
        match self.kind {
            ExperimentKind::ViolationCurve => {
                if self.n_grid.is_empty() {
                    return Err(Error::config("n_grid", "must not be empty"));
                }
                if self.n_grid.iter().any(|&n| n < 2) {
                    return Err(Error::config("n_grid", "sample sizes must be at least 2"));
                }
            }
            ExperimentKind::Adaptive => {
                if self.warmup_grid.is_empty() {
                    return Err(Error::config("warmup_grid", "must not be empty"));
                }
                if self.warmup_grid.iter().any(|&n| n < 2) {
                    return Err(Error::config("warmup_grid", "warmup sizes must be at least 2"));
                }
                if self.stride_grid.is_empty() {
                    return Err(Error::config("stride_grid", "must not be empty"));
                }
                if self.stride_grid.contains(&Some(0)) {
                    return Err(Error::config("stride_grid", "strides must be at least 1"));
                }
            }
            ExperimentKind::Relax => {
                if self.scenarios.is_empty() {
                    return Err(Error::config("scenarios", "must not be empty"));
                }
                if !(0.0..1.0).contains(&self.demand_noise) {
                    return Err(Error::config("demand_noise", "must lie in [0, 1)"));
                }
                if !(self.ar1_phi > -1.0 && self.ar1_phi < 1.0) {
                    return Err(Error::config("ar1_phi", "must lie in (-1, 1)"));
                }
            }
            _ => {}
        }
        if let Some(path) = &self.history {
            if !path.exists() {
                return Err(Error::config("history", format!("{} does not exist", path.display())));
            }
        }
        if let DemandSpec::File(path) = &self.demand {
            if !path.exists() {
                return Err(Error::config("demand", format!("{} does not exist", path.display())));
            }
        }
        self.instance().map(|_| ())
    }

    pub fn instance(&self) -> Result<Instance> {
        let demand = match &self.demand {
            DemandSpec::Constant(d) => {
                if self.horizon == 0 {
                    return Err(Error::config("horizon", "must be at least 1"));
                }
                vec![*d; self.horizon]
            }
            DemandSpec::Vector(v) => v.clone(),
            DemandSpec::File(path) => crate::prices::ingest(path, &CsvFormat::default())
                .map_err(|e| Error::config("demand", e.to_string()))?
                .into_inner(),
        };
        let storage = StorageSpec::with_rates(self.capacity, self.initial_level, self.max_charge, self.max_discharge)
            .map_err(|e| Error::config("capacity", e.to_string()))?;
        Instance::new(demand, storage).map_err(|e| Error::config("demand", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let c = ExperimentConfig::default();
        let inst = c.instance().unwrap();
        assert_eq!(inst.horizon(), 24);
        assert_eq!(inst.storage().capacity(), 5.0);
        assert_eq!(c.model, PriceModel::normal(10.0, 2.0).unwrap());
        assert_eq!((c.alpha, c.grid, c.quadrature), (0.05, 100, 51));
        assert_eq!(c.resample, ResampleMode::WithReplacement);
        c.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = ExperimentConfig::parse(
            "# comment\nkind = violation-curve\nmodel = ar1:5,1,0.5\nn_grid = 10, 20\nstride_grid = 1,inf\n\ndemand = vector:1,2,3\n",
        )
        .unwrap();
        assert_eq!(c.kind, ExperimentKind::ViolationCurve);
        assert_eq!(c.model, PriceModel::ar1(5.0, 1.0, 0.5).unwrap());
        assert_eq!(c.n_grid, vec![10, 20]);
        assert_eq!(c.stride_grid, vec![Some(1), None]);
        assert_eq!(c.instance().unwrap().horizon(), 3);
    }

    #[test]
    fn field_level_errors() {
        let err = ExperimentConfig::parse("alpha = abc").unwrap_err();
        assert!(err.to_string().contains("alpha"));
        let err = ExperimentConfig::parse("bogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = ExperimentConfig::parse("model = normal:1,-1").unwrap_err();
        assert!(err.to_string().contains("model"));
        assert!(ExperimentConfig::parse("just text").is_err());

        let c = ExperimentConfig {
            history: Some(PathBuf::from("/no/such/history.csv")),
            ..ExperimentConfig::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("/no/such/history.csv"));

        let mut c = ExperimentConfig {
            kind: ExperimentKind::ViolationCurve,
            n_grid: Vec::new(),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        c.n_grid = vec![1];
        assert!(c.validate().is_err());

        let c = ExperimentConfig {
            rounds: 0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            initial_level: 9.0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }

    fn arb_model() -> impl Strategy<Value = PriceModel> {
        prop_oneof![
            (-50.0f64..50.0, 0.01f64..10.0).prop_map(|(m, s)| PriceModel::normal(m, s).unwrap()),
            (-2.0f64..4.0, 0.01f64..2.0).prop_map(|(m, s)| PriceModel::log_normal(m, s).unwrap()),
            (-50.0f64..50.0, 0.01f64..10.0, -0.99f64..0.99).prop_map(|(m, s, p)| PriceModel::ar1(m, s, p).unwrap()),
        ]
    }

    prop_compose! {
        fn arb_config()(
            kind in prop_oneof![
                Just(ExperimentKind::Estimate),
                Just(ExperimentKind::ViolationCurve),
                Just(ExperimentKind::PolicyCompare),
                Just(ExperimentKind::Adaptive),
                Just(ExperimentKind::Relax),
            ],
            model in arb_model(),
            demand in prop_oneof![
                (0.0f64..5.0).prop_map(DemandSpec::Constant),
                proptest::collection::vec(0.0f64..5.0, 1..6).prop_map(DemandSpec::Vector),
            ],
            n_grid in proptest::collection::vec(2usize..5000, 1..5),
            stride_grid in proptest::collection::vec(proptest::option::of(1usize..50), 1..4),
            alpha in 0.001f64..0.5,
            capacity in 0.0f64..20.0,
            max_charge in proptest::option::of(0.0f64..5.0),
            seed in any::<u64>(),
            flags in any::<(bool, bool, bool)>(),
            family in 0usize..3,
            grid in 2usize..300,
            scenarios in proptest::sample::subsequence(vec![Scenario::Baseline, Scenario::Ar1, Scenario::LogNormal, Scenario::DemandNoise], 1..=4),
            noise in 0.0f64..0.99,
            out in proptest::option::of("[a-z]{1,8}\\.csv"),
        ) -> ExperimentConfig {
            let mut c = ExperimentConfig {
                kind, model, demand, n_grid, stride_grid, alpha, capacity, max_charge, seed,
                clamp: flags.0, clamp_prices: flags.1, conservative: flags.2, grid,
                scenarios, demand_noise: noise, out: out.map(PathBuf::from),
                ..ExperimentConfig::default()
            };
            c.adaptive_family = [PolicyFamily::Threshold, PolicyFamily::ModifiedThreshold, PolicyFamily::Dp { grid, quadrature: c.quadrature }][family];
            c
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(config in arb_config()) {
            let text = config.render();
            prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), config);
        }
    }
}
