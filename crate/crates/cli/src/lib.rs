//! Command-line front end: configuration, subcommands and report output.

pub mod commands;
pub mod config;
pub mod failure;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use failure::Failure;
use report::Outcome;

#[derive(Debug, Parser)]
#[command(name = "ioncascade", version, about = "Compile and simulate circuits on a pairwise-addressed ion chain")]
pub struct Cli {
    /// TOML configuration; the shipped defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the shot count of the selected command.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Overrides the chain length.
    #[arg(long, global = true)]
    pub ions: Option<usize>,
    /// Directory for the JSON report and CSV traces; standard output otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a circuit and report the pulse program.
    Compile { circuit: PathBuf },
    /// Simulate circuits and report measured populations.
    Run {
        #[arg(required = true)]
        circuits: Vec<PathBuf>,
        /// Run every {I, H, X} product preparation in front of each circuit.
        #[arg(long)]
        all_preparations: bool,
        /// Gate-beam scan instead of a single run (one circuit only).
        #[arg(long, conflicts_with = "all_preparations")]
        scan: bool,
    },
    /// Gate-beam scan: populations after each gate op.
    Scan { circuit: PathBuf },
    /// Randomized benchmarking.
    Rb,
    /// Bell-state fidelity from populations and parity.
    Bell,
    /// Process tomography of a two-ion circuit (the configured one by default).
    Qpt { circuit: Option<PathBuf> },
}

impl Cli {
    /// Loads the configuration and applies the command-line overrides.
    pub fn resolve_config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::input)?,
            None => RunConfig::paper(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(n) = self.ions {
            cfg.chain.trap.n_ions = n;
            cfg.characterization.rb.n_ions = n;
        }
        if let Some(shots) = self.shots {
            match self.command {
                Command::Rb => cfg.characterization.rb.shots = shots,
                Command::Bell => cfg.characterization.bell.shots = shots,
                Command::Qpt { .. } => cfg.characterization.qpt.shots = shots,
                _ => cfg.sim.shots = shots,
            }
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.display().to_string();
        }
        cfg.validate().map_err(Failure::input)?;
        Ok(cfg)
    }
}

pub fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Compile { circuit } => commands::compile_cmd(cfg, circuit),
        Command::Run { circuits, scan: true, .. } => match circuits.as_slice() {
            [one] => commands::scan_cmd(cfg, one),
            _ => Err(Failure::input(anyhow::anyhow!("--scan takes exactly one circuit"))),
        },
        Command::Run { circuits, all_preparations, .. } => commands::run_cmd(cfg, circuits, *all_preparations),
        Command::Scan { circuit } => commands::scan_cmd(cfg, circuit),
        Command::Rb => commands::rb_cmd(cfg),
        Command::Bell => commands::bell_cmd(cfg),
        Command::Qpt { circuit } => commands::qpt_cmd(cfg, circuit.as_deref()),
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Runs the command and emits the report; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = cli.resolve_config().and_then(|cfg| {
        let outcome = execute(&cli, &cfg)?;
        if cfg.output.dir.is_empty() {
            let json = serde_json::to_string_pretty(&outcome.report(&cfg)).map_err(Failure::input)?;
            emit(&json);
        } else {
            outcome.write(&cfg, std::path::Path::new(&cfg.output.dir)).map_err(Failure::input)?;
            emit(&outcome.summary);
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ioncascade: {e}");
            e.exit_code()
        }
    }
}
