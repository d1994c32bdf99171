use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drift_attrib::pipeline::{self, Overrides, RunConfig};
use drift_attrib::transport::AdvectMetric;

#[derive(Parser, Debug)]
#[command(
    name = "drift-attrib",
    version,
    about = "Ocean-current transport matrices, exposure panels and regressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "drift-attrib.toml")]
    config: PathBuf,

    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for `synth`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Verify invariants of every output; exit nonzero if any fails.
    #[arg(long, global = true)]
    check: bool,

    /// Validate the configuration and print the plan without writing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// faithful or spherical
    #[arg(long, global = true, value_parser = parse_metric)]
    advect_metric: Option<AdvectMetric>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write streamlines and score heatmaps for single traces.
    Trace,
    /// Build the monthly sender-receiver score matrix.
    Score,
    /// Assemble the birth, passthrough and grid-month panels.
    Exposure,
    /// Run the configured regressions.
    Regress,
    /// Generate a synthetic dataset with known truth.
    Synth,
    /// Check the configuration and inputs.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::Score => "score",
            Command::Exposure => "exposure",
            Command::Regress => "regress",
            Command::Synth => "synth",
            Command::Validate => "validate",
        }
    }
}

fn parse_metric(s: &str) -> Result<AdvectMetric, String> {
    s.parse()
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DRIFT_ATTRIB_LOG", "warn");
    env_logger::Builder::from_env(env)
        .format(|buf, rec| writeln!(buf, "{} {}: {}", rec.level(), rec.target(), rec.args()))
        .init();
}

fn run(cli: &Cli) -> drift_attrib::Result<Vec<String>> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.apply(&Overrides {
        out: cli.out.clone(),
        workers: cli.workers,
        seed: cli.seed,
        advect_metric: cli.advect_metric,
    });
    cfg.validate()?;
    if cli.dry_run {
        return pipeline::plan(&cfg, cli.command.name());
    }
    match cli.command {
        Command::Trace => pipeline::cmd_trace(&cfg, cli.check),
        Command::Score => pipeline::cmd_score(&cfg, cli.check),
        Command::Exposure => pipeline::cmd_exposure(&cfg, cli.check),
        Command::Regress => pipeline::cmd_regress(&cfg, cli.check),
        Command::Synth => pipeline::cmd_synth(&cfg, cli.check),
        Command::Validate => pipeline::cmd_validate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(&cli) {
        Ok(lines) => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                // a closed pipe (e.g. `| head`) is not an error
                if writeln!(out, "{l}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
