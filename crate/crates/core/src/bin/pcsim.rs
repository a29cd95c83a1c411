use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pcsim::estimation::{allocate_pilots, estimate_variance};
use pcsim::experiments::{emit_csv, run_sweep, run_sweep_with_workers, RateMode, SweepSpec, SweptParameter};
use pcsim::rate::{asymptotic_ceiling, group_users, report::format_gain};
use pcsim::{Precoder, Scenario, SystemConfig};

#[derive(Parser)]
#[command(name = "pcsim", version, about = "Multi-cell massive MIMO pilot contamination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one parameter and write a CSV of rates.
    Sweep(SweepArgs),
    /// Check a config and summarize its estimate variances.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write every (l, j, k, beta, q) entry as CSV.
        #[arg(long)]
        dump_q: Option<PathBuf>,
    },
    /// Print each user's pilot-contamination SINR ceiling.
    Ceiling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Antennas,
    PilotReuse,
    Cells,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecoderArg {
    Mrt,
    Zf,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mc,
    Cf,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    param: ParamArg,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    /// JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 10)]
    drops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    precoder: PrecoderArg,
    #[arg(long, value_enum, default_value = "cf")]
    mode: ModeArg,
    /// Overrides the config's grouping switch.
    #[arg(long, value_enum)]
    grouping: Option<Switch>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: Option<&PathBuf>) -> pcsim::Result<SystemConfig> {
    match path {
        Some(p) => SystemConfig::from_file(p),
        None => Ok(SystemConfig::default()),
    }
}

fn sweep(args: SweepArgs) -> pcsim::Result<()> {
    let mut config = load(args.config.as_ref())?;
    if let Some(g) = args.grouping {
        config.grouping_enabled = matches!(g, Switch::On);
    }
    let param = match args.param {
        ParamArg::Antennas => SweptParameter::Antennas,
        ParamArg::PilotReuse => SweptParameter::PilotReuse,
        ParamArg::Cells => SweptParameter::Cells,
    };
    let mut spec = SweepSpec::new(param, args.values, config);
    spec.n_trials = args.trials;
    spec.n_drops = args.drops;
    spec.seed = args.seed;
    spec.precoders = match args.precoder {
        PrecoderArg::Mrt => vec![Precoder::Mrt],
        PrecoderArg::Zf => vec![Precoder::Zf],
        PrecoderArg::Both => vec![Precoder::Mrt, Precoder::Zf],
    };
    spec.modes = match args.mode {
        ModeArg::Mc => vec![RateMode::Mc],
        ModeArg::Cf => vec![RateMode::CfConsistent, RateMode::CfPaper],
        ModeArg::Both => RateMode::ALL.to_vec(),
    };
    let result = match args.workers {
        Some(n) => run_sweep_with_workers(&spec, n)?,
        None => run_sweep(&spec)?,
    };
    emit_csv(&result, &args.out)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("wrote {} rows to {} ({failed} with errors)", result.rows.len(), args.out.display());
    Ok(())
}

fn validate(config: PathBuf, seed: u64, dump_q: Option<PathBuf>) -> pcsim::Result<()> {
    let config = SystemConfig::from_file(&config)?;
    let scenario = Scenario::generate(&config, seed)?;
    let grouping = group_users(&scenario.beta, &config);
    let pa = allocate_pilots(&config, config.grouping_enabled.then_some(&grouping))?;
    let q = estimate_variance(&scenario.beta, &pa, &config);
    let ratios: Vec<f64> = (0..config.num_cells)
        .flat_map(|j| (0..config.users_per_cell).map(move |k| (j, k)))
        .map(|(j, k)| q.get(j, j, k) / scenario.beta.get(j, j, k))
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    println!("config ok: L={} K={} M={}", config.num_cells, config.users_per_cell, config.num_antennas);
    println!("pilot_length={} prelog={}", pa.pilot_length(), pa.prelog(config.coherence_block));
    println!(
        "k_center={} k_edge={}",
        grouping.total_center(),
        grouping.total_edge()
    );
    println!("own-cell q/beta: min={min:.4} mean={mean:.4} max={max:.4}");
    if let Some(path) = dump_q {
        q.write_csv(&scenario.beta, std::fs::File::create(path)?)?;
    }
    Ok(())
}

fn ceiling(config: PathBuf, seed: u64) -> pcsim::Result<()> {
    let config = SystemConfig::from_file(&config)?;
    let scenario = Scenario::generate(&config, seed)?;
    let grouping = group_users(&scenario.beta, &config);
    let pa = allocate_pilots(&config, config.grouping_enabled.then_some(&grouping))?;
    let q = estimate_variance(&scenario.beta, &pa, &config);
    let prelog = pa.prelog(config.coherence_block);
    println!("cell,user,gamma_inf,rate_ceiling");
    for (j, row) in asymptotic_ceiling(&q, &pa).iter().enumerate() {
        for (k, &g) in row.iter().enumerate() {
            println!("{j},{k},{},{}", format_gain(g), format_gain(prelog * (1.0 + g).log2()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Validate { config, seed, dump_q } => validate(config, seed, dump_q),
        Command::Ceiling { config, seed } => ceiling(config, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
