use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use irs_mimo::asymptotics::Regime;
use irs_mimo::exec::Execution;
use irs_mimo::harness::{
    convergence_study, sweep, write_aggregates_csv, write_aggregates_json, write_convergence_csv,
    write_plot_data_csv, write_records_csv, write_records_json, ExperimentConfig,
};
use irs_mimo::{Error, Result};

/// Monte Carlo sum-rate sweeps and large-M convergence studies for an
/// IRS-assisted massive MIMO uplink.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,

    /// Override the N sweep with an inclusive range `lo:hi:step`.
    #[arg(long, value_name = "LO:HI:STEP")]
    sweep_n: Option<String>,

    /// Run the convergence study over the M sweep instead of the N sweep.
    #[arg(long)]
    convergence: bool,

    /// Also write a wide per-point table of mean sum rates.
    #[arg(long)]
    emit_plot_data: bool,

    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

fn parse_range(range: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = range.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(format!("bad --sweep-n {range:?}: {e}")))?;
    match nums.as_slice() {
        &[lo, hi, step] if step > 0 && lo <= hi => Ok((lo..=hi).step_by(step).collect()),
        _ => Err(Error::Config(format!("--sweep-n expects lo:hi:step with lo <= hi and step > 0, got {range:?}"))),
    }
}

fn load(args: &Args) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(range) = &args.sweep_n {
        config.n_sweep = parse_range(range)?;
        config.params = config.params.with_n(config.n_sweep[0])?;
    }
    config.validate()?;
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(args: &Args, config: &ExperimentConfig) -> Result<()> {
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    fs::create_dir_all(&args.out)?;
    if args.convergence {
        let table = convergence_study(config, &[Regime::MrcIrs, Regime::ZfSuboptIrs], exec)?;
        write_convergence_csv(create(&args.out, "convergence.csv")?, &table)?;
        for regime in [Regime::MrcIrs, Regime::ZfSuboptIrs] {
            let curve = table.mean_curve(regime);
            eprintln!("{regime:?}: mean relative error by M {:?} = {curve:?}", table.m_values);
        }
        return Ok(());
    }
    let table = sweep(config, exec)?;
    write_records_csv(create(&args.out, "records.csv")?, &table)?;
    write_aggregates_csv(create(&args.out, "aggregates.csv")?, &table)?;
    write_records_json(create(&args.out, "records.json")?, &table)?;
    write_aggregates_json(create(&args.out, "aggregates.json")?, &table)?;
    if args.emit_plot_data {
        write_plot_data_csv(create(&args.out, "plot_data.csv")?, &table)?;
    }
    for a in &table.aggregates {
        eprintln!(
            "{:<11} N={:<4} M={:<5} sum-rate {:.4} ± {:.4} ({} trials)",
            a.scheme, a.n, a.m, a.mean_sum_rate, a.stderr, a.trials_used
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&args, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
