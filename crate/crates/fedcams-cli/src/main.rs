//! Command-line front end for the simulator. Four subcommands: `run` one
//! experiment, `sweep` a knob across values, `verify-tables` for the
//! built-in communication-cost tables, and `selftest` for the invariant
//! battery. Exit codes: 0 success, 1 configuration/usage error,
//! 2 numerical divergence or failed checks, 3 I/O failure.

use clap::{Args, Parser, Subcommand};
use fedcams::accounting;
use fedcams::config::ExperimentConfig;
use fedcams::harness::{self, SweepAxis};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fedcams",
    version,
    about = "Deterministic simulator for communication-compressed adaptive federated optimization"
)]
struct Cli {
    /// Worker threads for the per-round client fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config file.
    Run(RunArgs),
    /// Run the same experiment at several values of one knob.
    Sweep(SweepArgs),
    /// Recompute the communication-cost tables and verify the reference cells.
    VerifyTables(VerifyArgs),
    /// Run the built-in invariant battery.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment JSON.
    config: PathBuf,
    /// Override the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the round CSV here (JSON digest goes next to it). Overrides
    /// the config's output_path. Without either, the digest prints to
    /// stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the base experiment JSON.
    config: PathBuf,
    /// Knob to vary: n, r, K, or optimizer.
    #[arg(long)]
    axis: String,
    /// Comma-separated values, e.g. "5,10,20" or "1/4,1/16".
    #[arg(long)]
    values: String,
    /// Loss threshold for rounds-to-threshold reporting.
    #[arg(long)]
    threshold: Option<f64>,
    /// Override the config's master_seed (shared by every point).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the sweep digest JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model dimension for the numeric table.
    #[arg(long, default_value_t = accounting::REFERENCE_TABLE_DIM)]
    dim: usize,
    /// Round count for the numeric table.
    #[arg(long, default_value_t = accounting::REFERENCE_TABLE_ROUNDS)]
    rounds: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real usage
            // errors take the config-error exit code.
            let is_usage_error = e.use_stderr();
            let _ = e.print();
            return if is_usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, fedcams::Error> {
    match command {
        Command::Run(args) => cmd_run(args).map(|()| ExitCode::SUCCESS),
        Command::Sweep(args) => cmd_sweep(args).map(|()| ExitCode::SUCCESS),
        Command::VerifyTables(args) => cmd_verify_tables(args),
        Command::Selftest => Ok(cmd_selftest()),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), fedcams::Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.display().to_string());
    }
    let result = harness::run(&cfg)?;
    match &cfg.output_path {
        Some(path) => {
            let csv = PathBuf::from(path);
            harness::emit(&result.records, &result.summary, &csv)?;
            println!(
                "wrote {} and {}",
                csv.display(),
                harness::summary_path(&csv).display()
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&result.summary)?),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), fedcams::Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let axis: SweepAxis = args.axis.parse()?;
    let values: Vec<String> = args
        .values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let points = harness::sweep(&cfg, axis, &values, args.threshold)?;
    let mut text = serde_json::to_string_pretty(&points)?;
    text.push('\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| fedcams::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_verify_tables(args: VerifyArgs) -> Result<ExitCode, fedcams::Error> {
    println!("closed-form totals per scheme (no participant multiplier):");
    println!("  {:<14} {:<22} two_way", "scheme", "one_way");
    println!("  {:<14} {:<22} 32d*2T", "uncompressed", "32d*2T");
    println!(
        "  {:<14} {:<22} (32+d)*2T",
        "scaled_sign", "(32+d)*T + 32d*T"
    );
    println!("  {:<14} {:<22} 32*2k*2T", "topk", "32(2k+d)*T");
    println!();
    println!(
        "numeric totals at d = {}, T = {} (reference cells within 1%):",
        args.dim, args.rounds
    );
    println!(
        "  {:<12} {:<13} {:>16} {:>11} {:>9}  status",
        "scheme", "column", "computed", "reference", "rel_err"
    );
    let checks = accounting::reference_table_checks(args.dim, args.rounds)?;
    let mut all_passed = true;
    for c in &checks {
        all_passed &= c.passed;
        println!(
            "  {:<12} {:<13} {:>16} {:>11.3e} {:>9.5} {}",
            c.scheme,
            c.column,
            c.computed,
            c.reference,
            c.relative_error,
            if c.passed { "ok" } else { "MISMATCH" }
        );
    }
    if all_passed {
        println!("all {} cells verified", checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("table verification FAILED");
        Ok(ExitCode::from(2))
    }
}

fn cmd_selftest() -> ExitCode {
    let checks = fedcams::selftest::run_all();
    let mut all_passed = true;
    for c in &checks {
        all_passed &= c.passed;
        println!(
            "[{}] {}: {}",
            if c.passed { " ok " } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if all_passed {
        println!("selftest passed ({} checks)", checks.len());
        ExitCode::SUCCESS
    } else {
        println!("selftest FAILED");
        ExitCode::from(2)
    }
}
