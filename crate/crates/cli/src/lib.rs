//! Command-line front end: configuration, sweeps, validation and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser};

use crate::config::{
    read_config_file, Command, Format, PrepArg, Preset, StrategyArg, SweepAxis, SweepConfig,
};
use crate::error::{config_err, CliError, Result};
use crate::output::{render, Report};

pub const THREADS_ENV: &str = "MAISENSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "maisense", version, about = "Optimized multiparameter squeezing sweeps")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Command-line overrides; anything left unset falls back to the config
/// file, the preset and then the defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Total atom number
    #[arg(long = "N")]
    pub atoms: Option<usize>,
    /// Atom numbers for scaling sweeps and validation (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Mode counts (comma-separated)
    #[arg(long = "M", value_delimiter = ',')]
    pub modes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub prep: Option<PrepArg>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub mu_min: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub mu_steps: Option<usize>,
    /// MAI search window "lo,hi"
    #[arg(long)]
    pub mai_range: Option<String>,
    #[arg(long, value_enum)]
    pub sweep_axis: Option<SweepAxis>,
    /// Two-mode squeezing
    #[arg(long)]
    pub r: Option<f64>,
    /// MAI squeezing (defaults to r)
    #[arg(long)]
    pub r_mai: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_steps: Option<usize>,
    /// Detection noise used when sweeping r
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub sigma_steps: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Worker threads (falls back to MAISENSE_THREADS)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Config file: flat JSON object or key = value lines
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        fn name<E: clap::ValueEnum>(e: &E) -> String {
            e.to_possible_value().expect("no skipped variants").get_name().to_string()
        }
        let mut out: Vec<(&'static str, Option<String>)> = vec![
            ("n", self.atoms.map(|x| x.to_string())),
            ("n-list", self.n_list.as_deref().map(join)),
            ("m", self.modes.as_deref().map(join)),
            ("prep", self.prep.as_ref().map(name)),
            ("strategy", self.strategy.as_ref().map(name)),
            ("mu-min", self.mu_min.map(|x| x.to_string())),
            ("mu-max", self.mu_max.map(|x| x.to_string())),
            ("mu-steps", self.mu_steps.map(|x| x.to_string())),
            ("mai-range", self.mai_range.clone()),
            ("sweep-axis", self.sweep_axis.as_ref().map(name)),
            ("r", self.r.map(|x| x.to_string())),
            ("r-mai", self.r_mai.map(|x| x.to_string())),
            ("r-min", self.r_min.map(|x| x.to_string())),
            ("r-max", self.r_max.map(|x| x.to_string())),
            ("r-steps", self.r_steps.map(|x| x.to_string())),
            ("sigma", self.sigma.map(|x| x.to_string())),
            ("sigma-min", self.sigma_min.map(|x| x.to_string())),
            ("sigma-max", self.sigma_max.map(|x| x.to_string())),
            ("sigma-steps", self.sigma_steps.map(|x| x.to_string())),
            ("format", self.format.as_ref().map(name)),
            ("threads", self.threads.map(|x| x.to_string())),
        ];
        if let Some(p) = &self.out {
            out.push(("out", Some(p.to_string_lossy().into_owned())));
        }
        out.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

/// Builds the effective configuration; `env_threads` is the value of
/// `MAISENSE_THREADS`, if any.
pub fn resolve(cli: &Cli, env_threads: Option<&str>) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::defaults(cli.command);
    let mut file_pairs = match &cli.flags.config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    let file_preset = match file_pairs.iter().position(|(k, _)| k.trim().eq_ignore_ascii_case("preset")) {
        Some(i) => {
            let (_, v) = file_pairs.remove(i);
            Some(<Preset as clap::ValueEnum>::from_str(v.trim(), true).map_err(|_| config_err(format!("unknown preset {v:?}")))?)
        }
        None => None,
    };
    if let Some(p) = cli.flags.preset.or(file_preset) {
        cfg.apply_preset(p)?;
    }
    for (k, v) in &file_pairs {
        cfg.set(k, v)?;
    }
    for (k, v) in cli.flags.pairs() {
        cfg.set(k, &v)?;
    }
    if cfg.threads.is_none() {
        if let Some(v) = env_threads {
            let n = v.trim().parse::<usize>().map_err(|_| config_err(format!("{THREADS_ENV}={v:?} is not a count")))?;
            cfg.threads = Some(n);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the selected command on a pool sized by the configuration.
pub fn execute(cfg: &SweepConfig) -> Result<Report> {
    let run = || match cfg.command {
        Command::SpinGain => commands::cmd_spin_gain(cfg),
        Command::SpinScaling => commands::cmd_spin_scaling(cfg),
        Command::CvGain => commands::cmd_cv_gain(cfg),
        Command::Validate => validate::cmd_validate(cfg),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(format!("cannot start {n} threads: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Resolves, runs and writes the result. Validation failures are reported
/// after the report has been written.
pub fn run(cli: &Cli, env_threads: Option<&str>) -> Result<()> {
    let cfg = resolve(cli, env_threads)?;
    let report = execute(&cfg)?;
    let text = render(&cfg, &report);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    if cfg.command == Command::Validate && report.extra.get("passed") != Some(&serde_json::Value::Bool(true)) {
        return Err(CliError::Validation("one or more checks exceeded their threshold".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("maisense").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_preset() {
        let cli = parse(&["spin-gain", "--preset", "fig2b", "--M", "2,4", "--mu-steps", "8"]);
        let cfg = resolve(&cli, None).unwrap();
        assert_eq!(cfg.modes, vec![2, 4]);
        assert_eq!(cfg.mu.steps, 8);
        assert_eq!(cfg.atoms, 100);
    }

    #[test]
    fn config_file_sits_between_preset_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "preset = fig3\nr = 0.8\nsigma_steps = 5\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = resolve(&parse(&["cv-gain", "--config", p]), None).unwrap();
        assert_eq!(cfg.preset, Some(Preset::Fig3));
        assert_eq!((cfg.r, cfg.sigma_grid.steps), (0.8, 5));
        let cfg = resolve(&parse(&["cv-gain", "--config", p, "--r", "0.3"]), None).unwrap();
        assert_eq!(cfg.r, 0.3);
    }

    #[test]
    fn threads_fall_back_to_environment() {
        let cli = parse(&["cv-gain"]);
        assert_eq!(resolve(&cli, Some("3")).unwrap().threads, Some(3));
        assert!(resolve(&cli, Some("many")).is_err());
        let cli = parse(&["cv-gain", "--threads", "2"]);
        assert_eq!(resolve(&cli, Some("3")).unwrap().threads, Some(2));
    }

    #[test]
    fn invalid_configuration_maps_to_exit_code_two() {
        let err = resolve(&parse(&["spin-gain", "--N", "101", "--M", "2"]), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = resolve(&parse(&["spin-gain", "--preset", "fig3"]), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
