//! Command-line front end for the front-propagation engine.

use clap::{Parser, Subcommand};
use frontweave::cli::{self, ConvergeRegion, Overrides};
use frontweave::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frontweave", version, about = "Space-time front propagation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct OverrideArgs {
    /// Flat `key = value` config file; CLI flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Local-grid half-width fraction (s = floor(s_fraction * N)).
    #[arg(long)]
    s_fraction: Option<f64>,
    /// Pre-switch time-step multiplier for the axis representations.
    #[arg(long)]
    r1: Option<f64>,
    /// Post-switch time-step multiplier for the axis representations.
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    r1_skew: Option<f64>,
    #[arg(long)]
    r2_skew: Option<f64>,
    /// Sign-test samples per cell-length of segment.
    #[arg(long)]
    sign_test_samples: Option<usize>,
    /// Also record interior sideways patch samples.
    #[arg(long)]
    record_sideways: bool,
    /// Assign exact normals at acceptance (overrides the example default).
    #[arg(long)]
    exact_normals: Option<bool>,
    /// Final time override.
    #[arg(long = "T")]
    t_final: Option<f64>,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<Overrides, Error> {
        let from_file = match &self.config {
            Some(path) => Overrides::from_config_file(path)?,
            None => Overrides::default(),
        };
        let from_flags = Overrides {
            s_fraction: self.s_fraction,
            r1: self.r1,
            r2: self.r2,
            r1_skew: self.r1_skew,
            r2_skew: self.r2_skew,
            sign_test_samples: self.sign_test_samples,
            record_sideways: self.record_sideways.then_some(true),
            exact_normals: self.exact_normals,
            t_final: self.t_final,
        };
        Ok(from_file.merged_with(&from_flags))
    }
}

#[derive(Subcommand)]
enum Command {
    /// March one example and write the accepted cloud as CSV.
    Run {
        #[arg(long)]
        example: String,
        /// Cells per axis (the grid has n+1 points per axis).
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Use the classical fast-marching reference loop instead.
        #[arg(long)]
        classical: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Convergence sweep over several grid sizes.
    Converge {
        #[arg(long)]
        example: String,
        /// Comma-separated grid sizes, e.g. 40,80,160.
        #[arg(long, value_delimiter = ',')]
        grids: Vec<usize>,
        /// 1 = closed-form solution, 2 = oracle cloud.
        #[arg(long, default_value_t = 1)]
        method: u8,
        /// bottom | top | sideways | global | patch
        #[arg(long, default_value = "global")]
        region: String,
        #[arg(long)]
        out: PathBuf,
        /// Oracle cloud CSV for method 2 (generated there if missing).
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Generate an oracle cloud from the level-set reference solver.
    Oracle {
        #[arg(long)]
        example: String,
        /// Fine-grid cells per axis.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in sanity checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { example, n, out, classical, overrides } => overrides
            .resolve()
            .and_then(|o| cli::cmd_run(&example, n, &out, &o, classical)),
        Command::Converge { example, grids, method, region, out, oracle, overrides } => {
            let parsed = ConvergeRegion::parse(&region)
                .ok_or_else(|| Error::Config(format!("unknown region `{region}`")));
            parsed.and_then(|r| {
                overrides.resolve().and_then(|o| {
                    cli::cmd_converge(&example, &grids, method, r, &out, &o, oracle.as_deref())
                })
            })
        }
        Command::Oracle { example, n, out } => cli::cmd_oracle(&example, n, &out),
        Command::Selftest => {
            let failures = cli::cmd_selftest();
            return if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::UnknownExample(name)) => {
            eprintln!("error: unknown example `{name}`");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
