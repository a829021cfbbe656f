use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use starsic::cpan::{fit_awgn_noise, fit_params};
use starsic::dataset::Dataset;
use starsic::experiment::{run_awgn_sweep, run_campaign, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "expcli", version, about = "Star-QAM SIC rate campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the SIC campaign described by a config.
    Run(RunArgs),
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit channel parameters from a dataset file.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for `fit.toml`; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Memoryless AWGN rate sweep from the config's [awgn] block.
    Awgn(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(p) = args.preset {
        cfg.apply_preset(p.into());
    }
    if let Some(dir) = &args.out {
        cfg.output.directory = dir.clone();
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let report = run_campaign(&cfg)?;
    log::info!(
        "{} points computed, {} resumed",
        report.computed_points,
        report.resumed_points
    );
    for r in &report.sic {
        println!(
            "ptx={} dBm n_p={} S={} air={:.4} bpcu (stderr {:.4})",
            r.ptx_dbm, r.n_phases, r.stages, r.air_bpcu, r.stderr
        );
    }
    for r in &report.memoryless {
        println!(
            "ptx={} dBm n_p={} memoryless air={:.4} bpcu (stderr {:.4})",
            r.ptx_dbm, r.n_phases, r.air_bpcu, r.stderr
        );
    }
    for f in &report.files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn awgn(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    for r in run_awgn_sweep(&cfg)? {
        println!(
            "snr={} dB n_p={} air={:.4} bits (stderr {:.4}) gaussian={:.4}",
            r.snr_db, r.n_phases, r.air_bits, r.stderr, r.gaussian_bits
        );
    }
    Ok(())
}

fn fit(dataset: &Path, out: Option<&Path>) -> Result<()> {
    let data = Dataset::read_file(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    let pairs = data.pairs();
    let report = fit_params(&pairs)?;
    let sn2_memoryless = fit_awgn_noise(&pairs)?;
    let p = report.params;
    let mut text = String::new();
    writeln!(text, "# fitted from {} symbols", report.n_symbols)?;
    writeln!(text, "mu_delta = {}", p.mu_delta())?;
    writeln!(text, "sigma_delta_sq = {}", p.sigma_delta_sq())?;
    writeln!(text, "sigma_theta_sq = {}", p.sigma_theta_sq())?;
    writeln!(text, "sigma_n_sq = {}", p.sigma_n_sq())?;
    writeln!(text, "mean_phase = {}", report.mean_phase)?;
    writeln!(text, "degenerate = {}", report.degenerate)?;
    writeln!(text, "sigma_n_sq_memoryless = {sn2_memoryless}")?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("fit.toml");
            std::fs::write(&path, text)?;
            log::info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Awgn(args) => awgn(args),
        Command::Validate { config } => ExperimentConfig::from_file(config)
            .map(|_| println!("{}: ok", config.display()))
            .map_err(Into::into),
        Command::Fit { dataset, out } => fit(dataset, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
