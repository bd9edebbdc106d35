use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qif_cli::{
    cmd_analyze, cmd_channel, cmd_compare, cmd_witness, write_report, CliError, Format, ProgramSpec, RunConfig,
    WitnessRequest,
};
use qif_core::programs::enum_cap_from_env;
use qif_core::{EstimatorConfig, RenyiOrder, SizeSchedule};

/// Renyi-entropy leakage of deterministic programs.
#[derive(Parser)]
#[command(name = "qif", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leakage series, leakage level and finite-order check of one program.
    Analyze {
        #[command(flatten)]
        program: ProgramArgs,
        /// Orders to report, comma separated.
        #[arg(long, default_value = "0,1,inf")]
        orders: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Asymptotic comparison of two programs.
    Compare {
        /// First program, as `corpus:ID[,L=V]` or `file:PATH[,NAME=V]`.
        #[arg(long)]
        a: String,
        /// Second program, same syntax.
        #[arg(long)]
        b: String,
        /// Orders to compare at, comma separated; the first decides the verdict.
        #[arg(long, default_value = "inf")]
        orders: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build and verify a witness distribution pair.
    Witness {
        #[command(subcommand)]
        mode: WitnessMode,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Dump the output counts of a program at one input-space size.
    Channel {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        size: u64,
        /// Largest input space enumerated for DSL programs (default: $QIF_ENUM_CAP or 2^24).
        #[arg(long)]
        enum_cap: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum WitnessMode {
    /// Two distributions ranked oppositely by two orders.
    Conflict {
        #[arg(long)]
        alpha: RenyiOrder,
        #[arg(long)]
        beta: RenyiOrder,
    },
    /// Ratio above D at order alpha, min-entropy ratio below 1/D.
    Gap {
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        alpha: RenyiOrder,
    },
}

#[derive(Args)]
struct ProgramArgs {
    /// Built-in program P1..P7.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    corpus: Option<String>,
    /// Program source file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Parameter binding, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

impl ProgramArgs {
    fn spec(&self) -> Result<ProgramSpec, CliError> {
        let base = match (&self.corpus, &self.file) {
            (Some(id), _) => ProgramSpec::Corpus { id: id.parse()?, params: Vec::new() },
            (None, Some(path)) => ProgramSpec::file(path),
            (None, None) => return Err(CliError::Usage("one of --corpus or --file is required".into())),
        };
        base.with_params(self.params.iter().map(String::as_str))
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// `2^a..2^b` or a comma-separated list of sizes.
    #[arg(long, default_value = "2^4..2^20")]
    sizes: String,
    /// Tail window of the estimator (default: half the points, at least 4).
    #[arg(long)]
    window: Option<usize>,
    /// Slope threshold against log |A|.
    #[arg(long, default_value_t = EstimatorConfig::default().slope_delta)]
    delta: f64,
    /// Slope threshold against log log |A|.
    #[arg(long, default_value_t = EstimatorConfig::default().log_delta)]
    log_delta: f64,
    /// Tail spread above which a non-monotone ratio counts as oscillating.
    #[arg(long, default_value_t = EstimatorConfig::default().osc_factor)]
    osc_factor: f64,
    /// Largest input space enumerated for DSL programs (default: $QIF_ENUM_CAP or 2^24).
    #[arg(long)]
    enum_cap: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_orders(text: &str) -> Result<Vec<RenyiOrder>, CliError> {
    text.split(',').map(|o| o.parse().map_err(|e| CliError::Usage(format!("bad order `{o}`: {e}")))).collect()
}

impl RunArgs {
    fn config(&self, orders: &str) -> Result<RunConfig, CliError> {
        let schedule: SizeSchedule = self.sizes.parse()?;
        let mut config = RunConfig::new(schedule);
        config.orders = parse_orders(orders)?;
        config.estimator = EstimatorConfig {
            window: self.window,
            slope_delta: self.delta,
            log_delta: self.log_delta,
            osc_factor: self.osc_factor,
            ..EstimatorConfig::default()
        };
        config.cap = self.enum_cap.unwrap_or_else(enum_cap_from_env);
        config.format = self.output.format;
        config.out = self.output.out.clone();
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (report, output) = match &cli.command {
        Command::Analyze { program, orders, run } => {
            let config = run.config(orders)?;
            (cmd_analyze(&program.spec()?, &config)?, &run.output)
        }
        Command::Compare { a, b, orders, run } => {
            let config = run.config(orders)?;
            (cmd_compare(&a.parse()?, &b.parse()?, &config)?, &run.output)
        }
        Command::Witness { mode, output } => {
            let request = match *mode {
                WitnessMode::Conflict { alpha, beta } => WitnessRequest::Conflict { alpha, beta },
                WitnessMode::Gap { d, alpha } => WitnessRequest::Gap { d, alpha },
            };
            (cmd_witness(&request)?, output)
        }
        Command::Channel { program, size, enum_cap, output } => {
            let cap = enum_cap.unwrap_or_else(enum_cap_from_env);
            (cmd_channel(&program.spec()?, *size, cap)?, output)
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_report(&report, output.format, output.out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
