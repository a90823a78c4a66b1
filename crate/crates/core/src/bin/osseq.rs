use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osseq_core::calibration::DEFAULT_BINS;
use osseq_core::scenario::{
    cmd_calibrate, cmd_simulate, cmd_solve, cmd_sweep, cmd_synth, CalibrateOptions, RunError, RunOutput,
    ScenarioConfig, SynthOptions,
};

/// Open-source software equilibrium with AI-mediated usage.
///
/// Exit codes: 0 success, 2 config or input error, 3 model-domain error,
/// 4 numerical non-convergence.
#[derive(Parser)]
#[command(name = "osseq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON scenario config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides mc.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form equilibrium at every v in v_grid.
    Solve(Common),
    /// Equilibria along sweep_axis with monetization bounds.
    Sweep(Common),
    /// Agent-level Monte Carlo market against the closed form.
    Simulate(Common),
    /// Binned log-rank tail regression of a CSV column.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value_t = 1.0)]
        tail_cut: f64,
        /// Report the implied quality tail gamma = sigma * slope.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Synthetic Pareto(gamma/sigma) user counts for testing `calibrate`.
    Synth {
        #[arg(long, default_value_t = 3.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.5)]
        sigma: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "users")]
        column: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(ScenarioConfig, PathBuf), RunError> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let (Some(seed), Some(mc)) = (common.seed, cfg.mc.as_mut()) {
        mc.seed = seed;
    }
    let out = cfg.resolve_output_dir(common.out.as_deref());
    Ok((cfg, out))
}

fn with_config(
    common: &Common,
    run: fn(&ScenarioConfig, &Path) -> Result<RunOutput, RunError>,
) -> Result<RunOutput, RunError> {
    let (cfg, out) = load(common)?;
    run(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(c) => with_config(&c, cmd_solve),
        Command::Sweep(c) => with_config(&c, cmd_sweep),
        Command::Simulate(c) => with_config(&c, cmd_simulate),
        Command::Calibrate {
            input,
            column,
            bins,
            tail_cut,
            sigma,
            out,
        } => cmd_calibrate(
            &CalibrateOptions {
                input,
                column,
                bins,
                tail_cut,
                sigma,
            },
            &out,
        ),
        Command::Synth {
            gamma,
            sigma,
            n,
            seed,
            column,
            out,
        } => cmd_synth(
            &SynthOptions {
                gamma,
                sigma,
                n,
                seed,
                column,
            },
            &out,
        ),
    };
    match result {
        Ok(output) => {
            for note in &output.notes {
                eprintln!("note: {note}");
            }
            for file in &output.files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
