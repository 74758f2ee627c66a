//! Resolved run configuration: defaults < preset < config file < flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use maisense_core::oracle::DIMENSION_CAP;
use maisense_core::{Preparation, Strategy};
use serde::Serialize;

use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SpinGain,
    SpinScaling,
    CvGain,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SpinGain => "spin-gain",
            Command::SpinScaling => "spin-scaling",
            Command::CvGain => "cv-gain",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PrepArg {
    Ms,
    Me,
}

impl From<PrepArg> for Preparation {
    fn from(p: PrepArg) -> Self {
        match p {
            PrepArg::Ms => Preparation::ModeSeparable,
            PrepArg::Me => Preparation::ModeEntangled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Linear,
    LocalMai,
    NonlocalMai,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Sigma,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig2b,
    Fig2c,
    Fig3,
}

impl Preset {
    pub fn command(self) -> Command {
        match self {
            Preset::Fig2b => Command::SpinGain,
            Preset::Fig2c => Command::SpinScaling,
            Preset::Fig3 => Command::CvGain,
        }
    }
}

/// Inclusive, evenly spaced grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub const fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 })
            .collect()
    }

    /// `points()`, or just `min` for a single-step grid.
    pub fn points_or_single(&self) -> Vec<f64> {
        if self.steps <= 1 {
            vec![self.min]
        } else {
            self.points()
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.steps < 2 {
            return Err(config_err(format!("{name}: need at least 2 steps, got {}", self.steps)));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return Err(config_err(format!("{name}: need min < max, got [{}, {}]", self.min, self.max)));
        }
        if self.min < 0.0 {
            return Err(config_err(format!("{name}: values must be non-negative")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub command: Command,
    pub preset: Option<Preset>,
    #[serde(rename = "N")]
    pub atoms: usize,
    pub n_list: Vec<usize>,
    #[serde(rename = "M")]
    pub modes: Vec<usize>,
    pub prep: PrepArg,
    pub strategy: StrategyArg,
    pub mu: Grid,
    pub mai_range: Option<(f64, f64)>,
    pub sweep_axis: SweepAxis,
    pub r: f64,
    /// `None` tracks `r`.
    pub r_mai: Option<f64>,
    pub r_grid: Grid,
    /// Fixed detection noise when sweeping `r`.
    pub sigma: f64,
    pub sigma_grid: Grid,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

pub const FIG2B_MODES: [usize; 5] = [2, 4, 10, 20, 100];

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl SweepConfig {
    pub fn defaults(command: Command) -> Self {
        let base = Self {
            command,
            preset: None,
            atoms: 100,
            n_list: powers_of_two(6, 12),
            modes: vec![2],
            prep: PrepArg::Me,
            strategy: StrategyArg::All,
            mu: Grid::new(0.0, 0.5, 64),
            mai_range: None,
            sweep_axis: SweepAxis::Sigma,
            r: 0.5,
            r_mai: None,
            r_grid: Grid::new(0.0, 1.0, 51),
            sigma: 0.5,
            sigma_grid: Grid::new(0.0, 1.0, 51),
            format: Format::Csv,
            out: None,
            threads: None,
        };
        match command {
            Command::Validate => Self { n_list: vec![4, 6, 8, 12], mu: Grid::new(0.0, 3.1, 32), ..base },
            _ => base,
        }
    }

    pub fn apply_preset(&mut self, p: Preset) -> Result<()> {
        if p.command() != self.command {
            return Err(config_err(format!(
                "preset {:?} belongs to `{}`, not `{}`",
                p,
                p.command().name(),
                self.command.name()
            )));
        }
        self.preset = Some(p);
        match p {
            Preset::Fig2b => {
                self.atoms = 100;
                self.modes = FIG2B_MODES.to_vec();
                self.prep = PrepArg::Me;
                self.strategy = StrategyArg::All;
                self.mu = Grid::new(0.0, 0.5, 64);
            }
            Preset::Fig2c => {
                self.n_list = powers_of_two(6, 12);
                self.modes = vec![2];
                self.prep = PrepArg::Me;
                self.strategy = StrategyArg::All;
            }
            Preset::Fig3 => {
                self.r = 0.5;
                self.r_mai = None;
                self.sweep_axis = SweepAxis::Sigma;
                self.sigma_grid = Grid::new(0.0, 1.0, 51);
                self.strategy = StrategyArg::All;
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting; keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| config_err(format!("{key}: cannot parse {value:?} as {what}"));
        let num = || value.parse::<f64>().map_err(|_| bad("a number"));
        let count = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
        let list = || -> Result<Vec<usize>> {
            value
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| bad("a comma-separated integer list")))
                .collect()
        };
        fn choice<E: ValueEnum>(key: &str, value: &str) -> Result<E> {
            E::from_str(value, true).map_err(|_| config_err(format!("{key}: unknown value {value:?}")))
        }
        match key.as_str() {
            "n" => self.atoms = count()?,
            "n-list" => self.n_list = list()?,
            "m" => self.modes = list()?,
            "prep" => self.prep = choice(&key, value)?,
            "strategy" => self.strategy = choice(&key, value)?,
            "mu-min" => self.mu.min = num()?,
            "mu-max" => self.mu.max = num()?,
            "mu-steps" => self.mu.steps = count()?,
            "mai-range" => self.mai_range = Some(parse_range(value)?),
            "sweep-axis" => self.sweep_axis = choice(&key, value)?,
            "r" => self.r = num()?,
            "r-mai" => self.r_mai = Some(num()?),
            "r-min" => self.r_grid.min = num()?,
            "r-max" => self.r_grid.max = num()?,
            "r-steps" => self.r_grid.steps = count()?,
            "sigma" => self.sigma = num()?,
            "sigma-min" => self.sigma_grid.min = num()?,
            "sigma-max" => self.sigma_grid.max = num()?,
            "sigma-steps" => self.sigma_grid.steps = count()?,
            "format" => self.format = choice(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(count()?),
            "preset" => return Err(config_err("preset must be given before other settings")),
            _ => return Err(config_err(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let all = match self.strategy {
            StrategyArg::Linear => vec![Strategy::Linear],
            StrategyArg::LocalMai => vec![Strategy::LocalMai],
            StrategyArg::NonlocalMai => vec![Strategy::NonlocalMai],
            StrategyArg::All => vec![Strategy::Linear, Strategy::NonlocalMai, Strategy::LocalMai],
        };
        let prep: Preparation = self.prep.into();
        if self.strategy == StrategyArg::All && prep == Preparation::ModeSeparable {
            all.into_iter().filter(|s| *s != Strategy::NonlocalMai).collect()
        } else {
            all
        }
    }

    pub fn preparation(&self) -> Preparation {
        self.prep.into()
    }

    pub fn r_mai_for(&self, r: f64) -> f64 {
        self.r_mai.unwrap_or(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.modes.contains(&0) {
            return Err(config_err("M must list positive mode counts"));
        }
        if let Some((lo, hi)) = self.mai_range {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(config_err(format!("mai-range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")));
            }
        }
        let prep = self.preparation();
        if prep == Preparation::ModeSeparable && self.strategy == StrategyArg::NonlocalMai {
            return Err(config_err("nonlocal-mai readout has no closed form for mode-separable preparation"));
        }
        let divisible = |n: usize| -> Result<()> {
            for &m in &self.modes {
                if n < 2 || !n.is_multiple_of(m) {
                    return Err(config_err(format!("N={n} is not divisible by M={m} (or N < 2)")));
                }
            }
            Ok(())
        };
        match self.command {
            Command::SpinGain => {
                self.mu.check("mu")?;
                divisible(self.atoms)?;
            }
            Command::SpinScaling => {
                if self.n_list.len() < 3 {
                    return Err(config_err("n-list needs at least 3 atom numbers for the slope fit"));
                }
                for &n in &self.n_list {
                    divisible(n)?;
                }
            }
            Command::CvGain => {
                for (name, v) in [("r", self.r), ("sigma", self.sigma)] {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(config_err(format!("{name} must be finite and non-negative")));
                    }
                }
                if let Some(v) = self.r_mai {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(config_err("r-mai must be finite and non-negative"));
                    }
                }
                match self.sweep_axis {
                    SweepAxis::Sigma => self.sigma_grid.check("sigma")?,
                    SweepAxis::R => self.r_grid.check("r")?,
                }
            }
            Command::Validate => {
                if self.mu.steps < 1 || self.mu.min < 0.0 || self.mu.max < self.mu.min {
                    return Err(config_err("mu grid must be non-negative and ordered"));
                }
                for &n in &self.n_list {
                    if n < 2 {
                        return Err(config_err("validation atom numbers must be at least 2"));
                    }
                    for m in divisors(n) {
                        let dim = (n / m + 1).checked_pow(m as u32);
                        if dim.is_none_or(|d| d > DIMENSION_CAP) {
                            return Err(config_err(format!("N={n}, M={m} exceeds the oracle dimension cap")));
                        }
                    }
                }
            }
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }
        Ok(())
    }
}

pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|m| n.is_multiple_of(*m)).collect()
}

fn parse_range(value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let bad = || config_err(format!("mai-range: expected \"lo,hi\", got {value:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo = parts[0].parse::<f64>().map_err(|_| bad())?;
    let hi = parts[1].parse::<f64>().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Settings from a config file: a flat JSON object or `key = value` lines
/// (`#` starts a comment).
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON config: {e}")))?;
        let obj = v.as_object().ok_or_else(|| config_err("JSON config must be an object"))?;
        return obj
            .iter()
            .map(|(k, v)| Ok((k.clone(), json_scalar(k, v)?)))
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("config line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => {
            let parts: Result<Vec<String>> = items.iter().map(|x| json_scalar(key, x)).collect();
            Ok(parts?.join(","))
        }
        _ => Err(config_err(format!("{key}: unsupported JSON value"))),
    }
}
