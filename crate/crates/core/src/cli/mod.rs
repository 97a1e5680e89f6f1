//! Command-line front end.
//!
//! Every setting resolves as: command-line flag, then the `--config` JSON
//! file, then the built-in default. The seed additionally falls back to the
//! `HARDYLAB_SEED` environment variable before the default.
//!
//! Exit codes: 0 when every graded row passes, 2 when any fails, 1 for usage,
//! input or I/O errors.

mod emit;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

pub use emit::{emit_report, render_svg, svg_path, write_csv, write_json, Format, CSV_HEADER};

use crate::error::{Error, Result};
use crate::funcs::{check_p, BumpConfig};
use crate::hgroup::ProductSpec;
use crate::lab::{self, ExperimentReport, GeometryConfig};
use crate::measure::{Budget, Method};
use crate::operators::Weight;

pub const SEED_ENV: &str = "HARDYLAB_SEED";
const MIN_MC_SAMPLES: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "hardylab", version, about = "Hardy-type operators on products of Heisenberg groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group axioms, triangle inequality, ball volumes and the polar identity.
    GeometryCheck(Options),
    /// Extremal-family quotients of P_m along an ε grid, extrapolated to ε = 0.
    Sharpness(Options),
    /// Random bump mixtures against the sharp constant.
    Fuzz(Options),
    /// Radialization: P(g_f) = P(f) and ‖g_f‖ ≤ ‖f‖ on random bumps.
    RadializeCheck(Options),
    /// Weighted Hardy operator against its weight characteristic.
    Weighted(Options),
    /// Pairing identity between the weighted Hardy and Cesàro operators.
    CesaroDuality(Options),
    /// Monte Carlo volume of the unit Korányi ball.
    Volume(Options),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Closed,
    Radial,
    Mc,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Closed => vec![Method::Closed],
            MethodArg::Radial => vec![Method::Radial],
            MethodArg::Mc => vec![Method::Mc],
            MethodArg::All => vec![Method::Closed, Method::Radial, Method::Mc],
        }
    }
}

/// Flags shared by all subcommands; each subcommand reads the ones it needs.
#[derive(Args, Debug, Clone, Default)]
struct Options {
    /// Lebesgue exponent, p > 1.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated group indices n_i of the factors ℍ^{n_i}.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<usize>>,
    /// Group index for the volume command; restricts geometry-check to one n.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated ε grid.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// one | zero | monomial:a1,a2,... | table:<csv file>
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write an SVG convergence chart next to the report (sharpness only).
    #[arg(long)]
    plot: bool,
    /// JSON file with any of the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Record the wall time in the report.
    #[arg(long)]
    timing: bool,
}

/// Contents of a `--config` file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    p: Option<f64>,
    factors: Option<Vec<usize>>,
    n: Option<usize>,
    eps: Option<Vec<f64>>,
    method: Option<MethodArg>,
    weight: Option<String>,
    samples: Option<usize>,
    seed: Option<u64>,
    trials: Option<usize>,
    tol: Option<f64>,
    format: Option<Format>,
    output: Option<PathBuf>,
    plot: Option<bool>,
    threads: Option<usize>,
    timing: Option<bool>,
}

impl Options {
    /// Fills every unset flag from the config file.
    fn merge(self, file: FileConfig) -> Options {
        Options {
            p: self.p.or(file.p),
            factors: self.factors.or(file.factors),
            n: self.n.or(file.n),
            eps: self.eps.or(file.eps),
            method: self.method.or(file.method),
            weight: self.weight.or(file.weight),
            samples: self.samples.or(file.samples),
            seed: self.seed.or(file.seed),
            trials: self.trials.or(file.trials),
            tol: self.tol.or(file.tol),
            format: self.format.or(file.format),
            output: self.output.or(file.output),
            plot: self.plot || file.plot.unwrap_or(false),
            config: self.config,
            threads: self.threads.or(file.threads),
            timing: self.timing || file.timing.unwrap_or(false),
        }
    }

    fn seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    fn spec(&self) -> Result<ProductSpec> {
        let factors = self.factors.clone().unwrap_or_else(|| vec![1]);
        if factors.is_empty() {
            return Err(Error::invalid("--factors must list at least one group"));
        }
        ProductSpec::new(&factors)
    }

    fn p(&self) -> Result<f64> {
        let p = self.p.unwrap_or(2.0);
        check_p(p)?;
        Ok(p)
    }

    fn budget(&self, default_samples: usize, uses_mc: bool) -> Result<Budget> {
        let samples = self.samples.unwrap_or(default_samples);
        if uses_mc && samples < MIN_MC_SAMPLES {
            return Err(Error::invalid(format!(
                "--samples must be at least {MIN_MC_SAMPLES} when Monte Carlo is used (got {samples})"
            )));
        }
        let mut b = Budget::with_samples(samples, self.seed()?);
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Error::invalid("--tol must be positive"));
            }
            b.tol = tol;
        }
        Ok(b)
    }

    fn weight(&self, default: &str, m: usize) -> Result<Weight> {
        Weight::parse(self.weight.as_deref().unwrap_or(default), m)
    }
}

fn execute(command: &Command, o: &Options) -> Result<ExperimentReport> {
    match command {
        Command::GeometryCheck(_) => {
            let samples = o.samples.unwrap_or(1_000_000);
            let budget = o.budget(samples, true)?;
            let config = GeometryConfig {
                volume_ns: o.n.map(|n| vec![n]).unwrap_or_else(|| vec![1, 2, 3]),
                volume_samples: samples,
                axiom_trials: o.trials.unwrap_or(100_000),
                polar_samples: samples,
            };
            lab::geometry_selftest(&config, &budget)
        }
        Command::Sharpness(_) => {
            let methods = o.method.unwrap_or(MethodArg::Closed).methods();
            let budget = o.budget(100_000, methods.contains(&Method::Mc))?;
            let eps = o.eps.clone().unwrap_or_else(|| lab::DEFAULT_EPS_GRID.to_vec());
            lab::sharpness_sweep(o.p()?, &o.spec()?, &eps, &methods, &budget)
        }
        Command::Fuzz(_) => {
            let budget = o.budget(20_000, true)?;
            lab::bound_fuzz(o.trials.unwrap_or(200), &BumpConfig::default(), o.p()?, &o.spec()?, &budget)
        }
        Command::RadializeCheck(_) => {
            let budget = o.budget(20_000, true)?;
            lab::radialization_check(o.trials.unwrap_or(50), &BumpConfig::default(), o.p()?, &o.spec()?, &budget)
        }
        Command::Weighted(_) => {
            let spec = o.spec()?;
            let budget = o.budget(100_000, true)?;
            let eps = o.eps.clone().unwrap_or_else(|| lab::WEIGHTED_EPS_GRID.to_vec());
            lab::weighted_sharpness(&o.weight("monomial:3", spec.m())?, o.p()?, &spec, &eps, &budget)
        }
        Command::CesaroDuality(_) => {
            let spec = o.spec()?;
            let budget = o.budget(100_000, true)?;
            let phi = o.weight("monomial:4", spec.m())?;
            lab::duality_check(&phi, o.p()?, &spec, o.trials.unwrap_or(20), &BumpConfig::default(), &budget)
        }
        Command::Volume(_) => lab::volume_check(o.n.unwrap_or(1), &o.budget(1_000_000, true)?),
    }
}

fn options_of(command: &Command) -> &Options {
    match command {
        Command::GeometryCheck(o)
        | Command::Sharpness(o)
        | Command::Fuzz(o)
        | Command::RadializeCheck(o)
        | Command::Weighted(o)
        | Command::CesaroDuality(o)
        | Command::Volume(o) => o,
    }
}

fn resolve(command: &Command) -> Result<Options> {
    let flags = options_of(command).clone();
    let file = match &flags.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };
    Ok(flags.merge(file))
}

fn run_report(command: &Command, options: &Options) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match options.threads {
        Some(0) => return Err(Error::invalid("--threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| execute(command, options))?,
        None => execute(command, options)?,
    };
    if options.timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

/// Parses `argv` (program name first), runs the experiment, writes the
/// report and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = resolve(&cli.command).and_then(|options| {
        let report = run_report(&cli.command, &options)?;
        emit_report(
            &report,
            options.format.unwrap_or(Format::Csv),
            options.output.as_deref(),
            options.plot,
        )?;
        Ok(report)
    });
    match outcome {
        Ok(report) if report.any_fail() => 2,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
