use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use silo_design::sensitivity::{DEFAULT_C_HALFWIDTH, DEFAULT_STEPS};
use silo_design::{
    t0_from_probability, Allocation, DesignSpace, GridSpec, ModelParams, SimConfig, TimeThreshold,
};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "elfving",
    version,
    about = "c-optimal designs for the minimum silo outlet size"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal design, crossing point, thresholds, g and criterion value.
    Design(DesignArgs),
    /// Elfving locus geometry for plotting.
    Locus(LocusArgs),
    /// Lower bound on T0 and the thresholds T02, T03.
    Thresholds(DesignArgs),
    /// Efficiency of the nominal design over a grid of true parameters.
    Sensitivity(SensitivityArgs),
    /// Monte Carlo check of the estimator of g.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationArg {
    Deterministic,
    Binomial,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Smallest outlet diameter of the design space.
    #[arg(long)]
    pub a: Option<f64>,
    /// Largest outlet diameter of the design space.
    #[arg(long)]
    pub b: Option<f64>,
    /// Target mean time between jams.
    #[arg(long = "T0", conflicts_with = "t1")]
    pub t0: Option<f64>,
    /// Time horizon for the jam-probability form of the target.
    #[arg(long = "T1")]
    pub t1: Option<f64>,
    /// Tolerated probability of a jam before T1.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub grain_diameter: Option<f64>,
    #[arg(long)]
    pub critical_diameter: Option<f64>,
    /// JSON file with default values for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct LocusArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Curve samples on [a, b], at least 2 (default 200).
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub c_halfwidth: Option<f64>,
    #[arg(long)]
    pub l_halfwidth: Option<f64>,
    #[arg(long)]
    pub c_steps: Option<usize>,
    #[arg(long)]
    pub l_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Observations per replicate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of replicates.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub allocation: Option<AllocationArg>,
    /// Largest tolerated fraction of degenerate replicates (default 0.01).
    #[arg(long)]
    pub max_failure_rate: Option<f64>,
    /// Also write per-replicate estimates as CSV.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
}

/// Contents of `--config`; every field mirrors a flag of the same name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "T0")]
    pub t0: Option<f64>,
    #[serde(rename = "T1")]
    pub t1: Option<f64>,
    pub alpha: Option<f64>,
    pub grain_diameter: Option<f64>,
    pub critical_diameter: Option<f64>,
    pub format: Option<Format>,
    pub samples: Option<usize>,
    pub c_halfwidth: Option<f64>,
    pub l_halfwidth: Option<f64>,
    pub c_steps: Option<usize>,
    pub l_steps: Option<usize>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub allocation: Option<AllocationArg>,
    pub max_failure_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))
    }
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, UsageError> {
    flag.or(file)
        .ok_or_else(|| UsageError(format!("missing required --{name}")))
}

/// Model inputs after merging flags over the config file.
pub struct Resolved {
    pub theta: ModelParams,
    pub space: DesignSpace,
    pub t0: Option<TimeThreshold>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl ModelArgs {
    pub fn resolve(&self, file: &FileConfig) -> anyhow::Result<Resolved> {
        let c = required(self.c, file.c, "C")?;
        let l = required(self.l, file.l, "L")?;
        let a = required(self.a, file.a, "a")?;
        let b = required(self.b, file.b, "b")?;
        let space = DesignSpace::with_bounds(
            a,
            b,
            self.grain_diameter.or(file.grain_diameter),
            self.critical_diameter.or(file.critical_diameter),
        )?;
        let theta = ModelParams::new(c, l)?;
        theta.validate_on(&space)?;

        let alpha = self.alpha.or(file.alpha);
        let from_t1 = |t1: f64| -> anyhow::Result<TimeThreshold> {
            let alpha = alpha.ok_or_else(|| UsageError("--T1 needs --alpha".into()))?;
            Ok(t0_from_probability(t1, alpha)?)
        };
        let t0 = match (self.t0, self.t1, file.t0, file.t1) {
            (Some(t0), ..) => Some(TimeThreshold::new(t0)?),
            (None, Some(t1), ..) => Some(from_t1(t1)?),
            (None, None, Some(t0), _) => Some(TimeThreshold::new(t0)?),
            (None, None, None, Some(t1)) => Some(from_t1(t1)?),
            _ => None,
        };
        if let Some(t0) = t0 {
            t0.check(&theta)?;
        }
        Ok(Resolved {
            theta,
            space,
            t0,
            format: self.format.or(file.format).unwrap_or(Format::Human),
            out: self.out.clone(),
        })
    }
}

impl Resolved {
    pub fn require_t0(&self) -> Result<TimeThreshold, UsageError> {
        self.t0
            .ok_or_else(|| UsageError("missing --T0 (or --T1 with --alpha)".into()))
    }
}

pub const DEFAULT_SAMPLES: usize = 200;

impl LocusArgs {
    pub fn samples(&self, file: &FileConfig) -> Result<usize, UsageError> {
        let n = self.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
        if n < 2 {
            return Err(UsageError(format!("--samples must be at least 2, got {n}")));
        }
        Ok(n)
    }
}

impl SensitivityArgs {
    pub fn grid(
        &self,
        file: &FileConfig,
        r: &Resolved,
        t0: TimeThreshold,
    ) -> anyhow::Result<GridSpec> {
        let defaults = GridSpec::default_for(&r.theta, &r.space, t0)?;
        let grid = GridSpec {
            c_halfwidth: self
                .c_halfwidth
                .or(file.c_halfwidth)
                .unwrap_or(DEFAULT_C_HALFWIDTH),
            l_halfwidth: self
                .l_halfwidth
                .or(file.l_halfwidth)
                .unwrap_or(defaults.l_halfwidth),
            c_steps: self.c_steps.or(file.c_steps).unwrap_or(DEFAULT_STEPS),
            l_steps: self.l_steps.or(file.l_steps).unwrap_or(DEFAULT_STEPS),
            ..defaults
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl SimulateArgs {
    pub fn config(&self, file: &FileConfig) -> anyhow::Result<SimConfig> {
        let mut cfg = SimConfig::new(
            self.n.or(file.n).unwrap_or(1000),
            self.m.or(file.m).unwrap_or(1000),
            self.seed.or(file.seed).unwrap_or(0),
        );
        cfg.allocation = match self.allocation.or(file.allocation) {
            Some(AllocationArg::Binomial) => Allocation::Binomial,
            _ => Allocation::DeterministicRounding,
        };
        if let Some(rate) = self.max_failure_rate.or(file.max_failure_rate) {
            cfg.max_failure_rate = rate;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
