use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NHFIELD_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    Fixed,
}

/// The configuration file: flat keys plus a `[param]` table of model
/// parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    #[serde(default)]
    pub param: BTreeMap<String, f64>,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub project: Option<bool>,
    pub record_every: Option<usize>,
    #[serde(alias = "Nb")]
    pub nb: Option<usize>,
    pub lb: Option<f64>,
    pub boundary: Option<BoundaryKind>,
    pub left: Option<Vec<f64>>,
    pub right: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub levels: Option<usize>,
    pub eq20_residual: Option<bool>,
    pub energy: Option<bool>,
    pub multipliers: Option<bool>,
    pub plot: Option<bool>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("parameter {k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Flags shared by every subcommand. Anything given here overrides the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in model: tire, wave, scalar-constrained, particle, oscillator.
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param, allow_hyphen_values = true)]
    pub params: Vec<(String, f64)>,
    /// Time step.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// End time; must be a whole number of steps.
    #[arg(long = "t-end", allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    /// Project onto the constraints after every step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub project: Option<bool>,
    /// Keep every n-th step.
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// Number of grid nodes for field models.
    #[arg(long = "Nb", alias = "nb")]
    pub nb: Option<usize>,
    /// Extent of the spatial interval.
    #[arg(long, allow_hyphen_values = true)]
    pub lb: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryKind>,
    /// Output directory (default: $NHFIELD_OUT_DIR, then the working directory).
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Seed for randomized probes and test variations.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of resolutions in a convergence study.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Evaluate the field-theory residual at mid-run (field models).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub eq20: Option<bool>,
    /// Energy column in the trajectory CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub energy: Option<bool>,
    /// Multiplier columns in the trajectory CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub multipliers: Option<bool>,
    /// Write SVG plots next to the CSV files.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plot: Option<bool>,
}

/// A validated run configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: String,
    pub params: Vec<(String, f64)>,
    pub h: f64,
    pub t_end: f64,
    pub project: bool,
    pub record_every: usize,
    pub nb: usize,
    pub lb: f64,
    pub boundary: BoundaryKind,
    pub left: Option<Vec<f64>>,
    pub right: Option<Vec<f64>>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub levels: usize,
    pub eq20_residual: bool,
    pub energy: bool,
    pub multipliers: bool,
    pub plot: bool,
}

/// Defaults that differ between subcommands.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub h: f64,
    pub t_end: f64,
    pub nb: usize,
}

impl Defaults {
    pub const RUN: Defaults = Defaults {
        h: 1e-3,
        t_end: 1.0,
        nb: 64,
    };
    pub const STUDY: Defaults = Defaults {
        h: 1e-2,
        t_end: 1.0,
        nb: 16,
    };
}

impl Settings {
    /// Merges the config file (if any), the flags and `env_out_dir`.
    pub fn resolve(args: &RunArgs, defaults: Defaults, env_out_dir: Option<PathBuf>) -> Result<Self, String> {
        let file = match &args.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let model = args
            .model
            .clone()
            .or(file.model)
            .ok_or("no model given (use --model or `model = ...`)")?;
        let mut params = file.param;
        for (k, v) in &args.params {
            params.insert(k.clone(), *v);
        }
        let s = Settings {
            model,
            params: params.into_iter().collect(),
            h: args.h.or(file.h).unwrap_or(defaults.h),
            t_end: args.t_end.or(file.t_end).unwrap_or(defaults.t_end),
            project: args.project.or(file.project).unwrap_or(false),
            record_every: args.record_every.or(file.record_every).unwrap_or(1),
            nb: args.nb.or(file.nb).unwrap_or(defaults.nb),
            lb: args.lb.or(file.lb).unwrap_or(1.0),
            boundary: args.boundary.or(file.boundary).unwrap_or(BoundaryKind::Periodic),
            left: file.left,
            right: file.right,
            out_dir: args
                .out_dir
                .clone()
                .or(file.out_dir)
                .or(env_out_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            seed: args.seed.or(file.seed).unwrap_or(0),
            levels: args.levels.or(file.levels).unwrap_or(3),
            eq20_residual: args.eq20.or(file.eq20_residual).unwrap_or(false),
            energy: args.energy.or(file.energy).unwrap_or(true),
            multipliers: args.multipliers.or(file.multipliers).unwrap_or(true),
            plot: args.plot.or(file.plot).unwrap_or(false),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(format!("h must be positive, got {}", self.h));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return Err("record_every must be at least 1".into());
        }
        if !(self.lb > 0.0 && self.lb.is_finite()) {
            return Err(format!("lb must be positive, got {}", self.lb));
        }
        if self.boundary == BoundaryKind::Periodic && (self.left.is_some() || self.right.is_some()) {
            return Err("left/right boundary values need boundary = \"fixed\"".into());
        }
        Ok(())
    }
}
