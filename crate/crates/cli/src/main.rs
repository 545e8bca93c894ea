//! Command-line front end: single-channel solves, the Monte-Carlo
//! SSR-versus-SNR benchmark, channel-file generation, and a quick
//! self-check of the numerical invariants.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crs_core::channel::{
    fingerprint_bytes, generate_channel_set, load_channel_set, save_channel_set, ChannelStats,
    PowerBudget,
};
use crs_core::mc::{run_montecarlo, summary_csv, to_csv, MonteCarloConfig};
use crs_core::sca::ScaConfig;
use crs_core::schemes::{solve_scheme_warm, SchemeId};

#[derive(Parser)]
#[command(
    name = "crs",
    about = "Secrecy sum-rate optimization for cooperative rate-splitting broadcast channels",
    version
)]
struct Cli {
    /// Verbose progress output (also via the CRS_VERBOSE environment variable).
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Crs,
    Nrs,
    Mulp,
    Cnoma,
}

impl From<SchemeArg> for SchemeId {
    fn from(s: SchemeArg) -> SchemeId {
        match s {
            SchemeArg::Crs => SchemeId::Crs,
            SchemeArg::Nrs => SchemeId::Nrs,
            SchemeArg::Mulp => SchemeId::Mulp,
            SchemeArg::Cnoma => SchemeId::Cnoma,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one scheme on a channel file and write the solution JSON.
    Solve(SolveArgs),
    /// Run the SSR-versus-SNR Monte-Carlo benchmark and write a CSV report.
    Montecarlo(McArgs),
    /// Draw a random channel realization and write it as JSON.
    GenChannels(GenArgs),
    /// Run the built-in invariant suites (surrogate bounds, gradients,
    /// one SCA monotonicity probe).
    Check,
}

#[derive(Args)]
struct SolveArgs {
    /// Channel JSON file.
    #[arg(long)]
    channels: PathBuf,
    /// Transmit power at the base station (linear).
    #[arg(long)]
    pt: f64,
    /// Relay power at user 1 (linear).
    #[arg(long)]
    pr: f64,
    /// SCA convergence tolerance.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Scheme to solve.
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Output solution JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// Monte-Carlo trials per SNR point.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// SNR grid in dB as "start:step:stop" (inclusive).
    #[arg(long, default_value = "0:5:30")]
    snr: String,
    /// Transmit antennas.
    #[arg(long, default_value_t = 2)]
    nt: usize,
    /// Variance of the user-1 link entries.
    #[arg(long, default_value_t = 1.0)]
    sigma_h1: f64,
    /// Variance of the user-2 link entries.
    #[arg(long, default_value_t = 0.3)]
    sigma_h2: f64,
    /// Comma-separated scheme list.
    #[arg(long, default_value = "crs,nrs,mulp,cnoma", value_delimiter = ',', value_enum)]
    schemes: Vec<SchemeArg>,
    /// Master seed of the channel ensemble.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// SCA convergence tolerance.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Output CSV path (a "<out>.summary.csv" companion is written too).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    nt: usize,
    /// Variance of the user-1 link entries.
    #[arg(long, default_value_t = 1.0)]
    sigma_h1: f64,
    /// Variance of the user-2 link entries.
    #[arg(long, default_value_t = 1.0)]
    sigma_h2: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_snr_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        anyhow::bail!("snr grid must be start:step:stop, got `{spec}`");
    }
    let start: f64 = parts[0].parse()?;
    let step: f64 = parts[1].parse()?;
    let stop: f64 = parts[2].parse()?;
    if !(step > 0.0) {
        anyhow::bail!("snr step must be positive");
    }
    let mut grid = Vec::new();
    let mut v = start;
    while v <= stop + 1e-9 {
        grid.push(v);
        v += step;
    }
    if grid.is_empty() {
        anyhow::bail!("snr grid is empty");
    }
    Ok(grid)
}

fn cmd_solve(a: &SolveArgs, verbose: bool) -> anyhow::Result<()> {
    let bytes = std::fs::read(&a.channels)?;
    let cs = load_channel_set(&a.channels)?;
    let pb = PowerBudget::new(a.pt, a.pr)?;
    let cfg = ScaConfig { epsilon: a.eps, ..ScaConfig::default() };
    cfg.validate()?;

    let scheme: SchemeId = a.scheme.into();
    // CRS inherits the baselines as warm starts, making the scheme
    // ordering hold on every channel rather than only on average.
    let mut baselines = Vec::new();
    if scheme == SchemeId::Crs {
        for b in [SchemeId::Nrs, SchemeId::Mulp, SchemeId::Cnoma] {
            baselines.push(solve_scheme_warm(b, &cs, &pb, &cfg, &[]));
        }
    }
    let warm: Vec<&_> = baselines.iter().collect();
    let mut sol = solve_scheme_warm(scheme, &cs, &pb, &cfg, &warm);
    sol.channel_fingerprint = fingerprint_bytes(&bytes);

    if verbose {
        for c in &sol.cases {
            eprintln!(
                "  {}: {:?}, {} iters, ssr {:.6}",
                c.case, c.status, c.iters, c.true_ssr
            );
        }
    }
    let json = serde_json::to_string_pretty(&sol.to_json())?;
    std::fs::write(&a.out, json + "\n")?;
    println!(
        "{}: ssr {:.6} bits (case {}, theta {:.4}) -> {}",
        scheme,
        sol.ssr,
        sol.best_case().case,
        sol.design().theta,
        a.out.display()
    );
    Ok(())
}

fn cmd_montecarlo(a: &McArgs, verbose: bool) -> anyhow::Result<()> {
    let cfg = MonteCarloConfig {
        trials: a.trials,
        snr_grid_db: parse_snr_grid(&a.snr)?,
        n_t: a.nt,
        stats: ChannelStats::with_user_variances(a.sigma_h1, a.sigma_h2),
        schemes: a.schemes.iter().map(|&s| s.into()).collect(),
        master_seed: a.seed,
        epsilon: a.eps,
    };
    if verbose {
        eprintln!(
            "montecarlo: {} trials x {} snr points x {} schemes",
            cfg.trials,
            cfg.snr_grid_db.len(),
            cfg.schemes.len()
        );
    }
    let report = run_montecarlo(&cfg)?;
    std::fs::write(&a.out, to_csv(&report.records))?;
    let summary_path = a.out.with_extension("summary.csv");
    std::fs::write(&summary_path, summary_csv(&report.summary))?;
    println!(
        "wrote {} records -> {} (summary -> {})",
        report.records.len(),
        a.out.display(),
        summary_path.display()
    );
    for s in &report.summary {
        println!(
            "  snr {:>5.1} dB  {:<5}  mean ssr {:.4} +- {:.4}",
            s.snr_db,
            s.scheme.label(),
            s.mean_ssr,
            s.std_err
        );
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> anyhow::Result<()> {
    let stats = ChannelStats::with_user_variances(a.sigma_h1, a.sigma_h2);
    let cs = generate_channel_set(a.seed, a.nt, &stats)?;
    save_channel_set(&cs, &a.out)?;
    println!("wrote channel (n_t = {}, fingerprint {}) -> {}", a.nt, cs.fingerprint(), a.out.display());
    Ok(())
}

mod check;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose || std::env::var("CRS_VERBOSE").is_ok_and(|v| v != "0" && !v.is_empty());
    let result = match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a, verbose),
        Cmd::Montecarlo(a) => cmd_montecarlo(a, verbose),
        Cmd::GenChannels(a) => cmd_gen(a),
        Cmd::Check => check::run(verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
