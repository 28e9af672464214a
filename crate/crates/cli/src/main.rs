mod args;
mod render;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use silo_design::sensitivity_grid;
use silo_design::simulation::{run_replicates, summarize};

use args::{Cli, Command, FileConfig, ModelArgs, Resolved};
use render::{DesignReport, LocusReport, ThresholdReport};

/// Bad flags, config or environment; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<silo_design::Error>() {
            return match e {
                silo_design::Error::ExcessiveFailures { .. } => EXIT_DEGENERATE,
                _ => EXIT_USAGE,
            };
        }
    }
    1
}

fn init_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var("ELFVING_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("ELFVING_THREADS must be a count, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(format!("cannot configure thread pool: {e}")))
}

fn with_output(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn load(model: &ModelArgs) -> anyhow::Result<(FileConfig, Resolved)> {
    let file = FileConfig::load(model.config.as_deref())?;
    let resolved = model.resolve(&file)?;
    Ok((file, resolved))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Design(args) => {
            let (_, r) = load(&args.model)?;
            let report = DesignReport::compute(&r.theta, &r.space, r.require_t0()?)?;
            with_output(r.out.as_deref(), |w| report.write(w, r.format))
        }
        Command::Thresholds(args) => {
            let (_, r) = load(&args.model)?;
            let report = ThresholdReport::compute(&r.theta, &r.space, r.t0)?;
            with_output(r.out.as_deref(), |w| report.write(w, r.format))
        }
        Command::Locus(args) => {
            let (file, r) = load(&args.model)?;
            let report = LocusReport::compute(&r.theta, &r.space, r.t0, args.samples(&file)?)?;
            with_output(r.out.as_deref(), |w| report.write(w, r.format))
        }
        Command::Sensitivity(args) => {
            let (file, r) = load(&args.model)?;
            let t0 = r.require_t0()?;
            let grid = args.grid(&file, &r, t0)?;
            let map = sensitivity_grid(&r.theta, &r.space, t0, &grid)?;
            with_output(r.out.as_deref(), |w| {
                render::write_sensitivity(&map, w, r.format)
            })?;
            if r.out.is_some() {
                println!("{}", render::sensitivity_summary(&map));
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let (file, r) = load(&args.model)?;
            let t0 = r.require_t0()?;
            let cfg = args.config(&file)?;
            let reps = run_replicates(&r.theta, &r.space, t0, &cfg)?;
            if let Some(path) = &args.replicates {
                with_output(Some(path), |w| render::write_replicates(&reps, w))?;
            }
            let report = summarize(&r.theta, &r.space, t0, &cfg, &reps)?;
            with_output(r.out.as_deref(), |w| {
                render::write_simulation(&report, w, r.format)
            })?;
            if r.out.is_some() {
                println!("{}", render::simulation_summary(&report));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use args::Format;

    #[test]
    fn exit_codes() {
        let usage = anyhow::Error::new(UsageError("x".into()));
        assert_eq!(exit_code(&usage), EXIT_USAGE);
        let bad = anyhow::Error::new(silo_design::Error::Inestimable).context("while running");
        assert_eq!(exit_code(&bad), EXIT_USAGE);
        let degen = anyhow::Error::new(silo_design::Error::ExcessiveFailures {
            failed: 5,
            total: 10,
            limit: 0.01,
        });
        assert_eq!(exit_code(&degen), EXIT_DEGENERATE);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 1);
    }

    #[test]
    fn machine_numbers_keep_17_digits() {
        let x = 0.1 + 0.2;
        let s = render::num(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn format_flag_parses() {
        let cli = Cli::parse_from([
            "elfving", "design", "--C", "1", "--L", "0.3", "--a", "1", "--b", "2", "--format",
            "csv",
        ]);
        let Command::Design(args) = cli.command else {
            panic!()
        };
        assert_eq!(args.model.format, Some(Format::Csv));
    }
}
