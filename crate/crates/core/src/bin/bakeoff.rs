use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bakeoff::harness::{self, BandwidthSource, BpSelection, DegreeRange, MeshPreset, OutputFormat, RunConfig};
use bakeoff::operators::Variant;
use bakeoff::perf_model;
use bakeoff::Error;

#[derive(Parser)]
#[command(
    name = "bakeoff",
    version,
    about = "Matrix-free high-order operator benchmarks and roofline model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the operators against the dense oracle and their invariants.
    Verify(Common),
    /// Time operator applications and report counters and rooflines.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bandwidth: Bandwidth,
    },
    /// Emit roofline series, one per benchmark.
    Roofline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bandwidth: Bandwidth,
        /// Leave the achieved column empty instead of timing each degree.
        #[arg(long)]
        model_only: bool,
    },
    /// Measure host copy bandwidth.
    Calibrate {
        /// Bytes per copy, in MiB.
        #[arg(long, default_value_t = 64)]
        mib: usize,
        #[arg(long, default_value_t = perf_model::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// 1.0, 3.5, 3.0 or all.
    #[arg(long, default_value = "all")]
    bp: BpSelection,
    /// Inclusive degree range A..B.
    #[arg(long, default_value = "1..4")]
    degrees: DegreeRange,
    /// Elements per side of the cube mesh.
    #[arg(long, conflicts_with = "mesh")]
    elements: Option<usize>,
    /// small (8³) or large (16³).
    #[arg(long)]
    mesh: Option<MeshPreset>,
    /// baseline, fused or symfused; every supported variant if omitted.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for roofline); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct Bandwidth {
    /// Global bandwidth in GB/s.
    #[arg(long, conflicts_with = "measure")]
    bandwidth: Option<f64>,
    /// Calibrate the bandwidth on this machine (the default).
    #[arg(long)]
    measure: bool,
}

impl Bandwidth {
    fn source(&self) -> BandwidthSource {
        match self.bandwidth {
            Some(gbps) => BandwidthSource::Supplied(gbps * 1e9),
            None => BandwidthSource::Measured,
        }
    }
}

impl Common {
    fn config(&self, default_elements: usize) -> RunConfig {
        RunConfig {
            bp: self.bp,
            degrees: self.degrees,
            elements_per_side: self
                .elements
                .or(self.mesh.map(MeshPreset::per_side))
                .unwrap_or(default_elements),
            variant: self.variant,
            lambda: self.lambda,
            repeats: self.repeats,
            threads: self.threads,
            seed: self.seed,
        }
    }
}

enum Failure {
    Verification,
    Lib(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}

fn emit(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify(common) => {
            let report = harness::run_verify(&common.config(2))?;
            let text = match common.format {
                OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
                OutputFormat::Csv => harness::verify_csv(&report)?,
            };
            emit(common.out.as_deref(), &text)?;
            for f in report.failures() {
                eprintln!(
                    "FAIL bp={} N={} variant={} check={} max_error={:e} tolerance={:e}",
                    f.bp, f.degree, f.variant, f.check, f.max_error, f.tolerance
                );
            }
            if !report.passed {
                return Err(Failure::Verification);
            }
        }
        Command::Bench { common, bandwidth } => {
            let config = common.config(MeshPreset::Small.per_side());
            let report = harness::run_bench(&config, bandwidth.source())?;
            let text = match common.format {
                OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
                OutputFormat::Csv => harness::bench_csv(&report)?,
            };
            emit(common.out.as_deref(), &text)?;
        }
        Command::Roofline {
            common,
            bandwidth,
            model_only,
        } => {
            let config = common.config(MeshPreset::Small.per_side());
            let reports = harness::run_roofline(&config, bandwidth.source(), !model_only)?;
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir)?;
            }
            for r in &reports {
                let text = match common.format {
                    OutputFormat::Json => serde_json::to_string_pretty(r)? + "\n",
                    OutputFormat::Csv => harness::roofline_csv(r)?,
                };
                match &common.out {
                    Some(dir) => fs::write(dir.join(harness::roofline_file_name(r, common.format)), text)?,
                    None => emit(None, &text)?,
                }
            }
        }
        Command::Calibrate {
            mib,
            trials,
            threads,
            out,
        } => {
            let bytes = mib << 20;
            let cal = match threads {
                Some(t) => perf_model::measure_stream_bandwidth_parallel(bytes, trials, t)?,
                None => perf_model::measure_stream_bandwidth(bytes, trials)?,
            };
            emit(out.as_deref(), &(serde_json::to_string_pretty(&cal)? + "\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Resource(_) => ExitCode::from(3),
                Error::InvalidArgument(_) | Error::UnsupportedVariant { .. } | Error::Shape { .. } => ExitCode::from(2),
                Error::DegenerateGeometry { .. } | Error::NonFinite => ExitCode::from(1),
            }
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
