use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kerdock_radar::waveforms::FamilyTag;
use kerdock_radar_cli::{
    cmd_bench, cmd_roc, cmd_simulate, cmd_verify, cmd_waveforms, BernsteinArgs, Bound, Common,
    Outcome, WaveformArgs,
};

/// Compressive MIMO radar with Kerdock waveforms: waveform generation,
/// Monte-Carlo recovery campaigns, ROC curves and bound checks.
#[derive(Parser)]
#[command(name = "kradar", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Overrides the config seed. All randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Defaults to the config's `out_dir`, then
    /// `$KERDOCK_RADAR_OUT/<command>`, then `results/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Cross-check the fast operator against the dense matrix, or use the
    /// dense Gram matrix for coherence.
    #[arg(long, global = true)]
    dense_oracle: bool,
    /// Run bound checks even when their sample-size hypotheses fail.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Kerdock,
    Alltop,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    OperatorNorm,
    Coherence,
    ColumnNorms,
    Bernstein,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a waveform set and check its properties.
    Waveforms {
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value = "kerdock")]
        family: Family,
        #[arg(long, default_value_t = 1)]
        n_tx: usize,
        /// Vector index within each Kerdock basis.
        #[arg(long, default_value_t = 0)]
        j_select: usize,
        /// Also check incoherence at this gamma.
        #[arg(long)]
        check_gamma: Option<f64>,
    },
    /// Run a seeded recovery campaign.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// ROC curve from a campaign's records.csv.
    Roc {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to magnitudes.csv next to the records.
        #[arg(long)]
        magnitudes: Option<PathBuf>,
    },
    /// Statistical check of one bound.
    Verify {
        #[arg(value_enum)]
        bound: BoundArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        target: f64,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
    },
    /// Time the fast forward apply against the dense matvec.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        reps: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let common = Common {
        seed: cli.global.seed,
        out: cli.global.out,
        dense_oracle: cli.global.dense_oracle,
        force: cli.global.force,
    };
    match cli.command {
        Command::Waveforms {
            p,
            family,
            n_tx,
            j_select,
            check_gamma,
        } => {
            let family = match family {
                Family::Kerdock => FamilyTag::Kerdock,
                Family::Alltop => FamilyTag::Alltop,
            };
            cmd_waveforms(
                &WaveformArgs {
                    p,
                    family,
                    n_tx,
                    j_select,
                    check_gamma,
                },
                &common,
            )
        }
        Command::Simulate { config } => cmd_simulate(&config, &common),
        Command::Roc { input, magnitudes } => cmd_roc(&input, magnitudes.as_deref(), &common),
        Command::Verify {
            bound,
            config,
            m,
            n,
            target,
            draws,
        } => {
            let bound = match bound {
                BoundArg::OperatorNorm => Bound::OperatorNorm,
                BoundArg::Coherence => Bound::Coherence,
                BoundArg::ColumnNorms => Bound::ColumnNorms,
                BoundArg::Bernstein => Bound::Bernstein,
            };
            cmd_verify(
                bound,
                config.as_deref(),
                &BernsteinArgs {
                    m,
                    n,
                    target,
                    draws,
                },
                &common,
            )
        }
        Command::Bench { config, reps } => cmd_bench(&config, reps, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            let status = if outcome.passed { "pass" } else { "fail" };
            let line =
                json!({ "status": status, "out_dir": outcome.out_dir, "summary": outcome.summary });
            println!("{}", serde_json::to_string(&line).unwrap_or_default());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            println!(
                "{}",
                json!({ "status": "error", "message": format!("{e:#}") })
            );
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
