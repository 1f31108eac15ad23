use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irs_core::harness::{
    load_checkpoints, load_config, run_training, run_utilization, sweep_m, write_gamma_map, write_sweep,
    write_utilization, Experiment, ExperimentConfig, Scheme,
};
use irs_core::metaatom::{CapacitanceBounds, CircuitProfile, FREE_SPACE_IMPEDANCE};
use irs_core::{Error, Result};

#[derive(Parser)]
#[command(name = "irs-sim", version, about = "IRS-assisted uplink link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the codeword-update agents and write checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Utilization campaign for one scheme and codebook size.
    Eval {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long = "M")]
        m: usize,
    },
    /// Utilization campaigns over several codebook sizes.
    SweepM {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long = "M", value_delimiter = ',', num_args = 1..)]
        m: Vec<usize>,
    },
    /// Reflection coefficient over the capacitance/angle grid.
    GammaMap {
        /// Circuit profile CSV; the built-in placeholder when omitted.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5.195e9)]
        carrier_hz: f64,
        #[arg(long, default_value_t = 0.4)]
        c_min_pf: f64,
        #[arg(long, default_value_t = 2.7)]
        c_max_pf: f64,
        #[arg(long, default_value_t = 231)]
        n_c: usize,
        #[arg(long, default_value_t = 91)]
        n_theta: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn experiment(path: &Path, seed: Option<u64>) -> Result<Experiment> {
    let mut cfg: ExperimentConfig = load_config(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Experiment::new(cfg)
}

fn actors(common: &EvalArgs, exp: &Experiment) -> Result<Option<Vec<irs_core::neural::Mlp>>> {
    match (&common.checkpoints, common.scheme.needs_checkpoints()) {
        (Some(dir), true) => load_checkpoints(dir, exp).map(Some),
        (None, true) => Err(Error::config(format!("--checkpoints is required for {}", common.scheme))),
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let exp = experiment(&config, seed)?;
            let report = run_training(&exp, &out)?;
            if let Some(last) = report.moving_average.last() {
                println!("trained {} agents; final moving average {last:.6e} bit/s", report.agents.len());
            }
            println!("checkpoints: {}", report.checkpoint_dir.display());
        }
        Command::Eval { common, m } => {
            let exp = experiment(&common.config, common.seed)?;
            let actors = actors(&common, &exp)?;
            let report = run_utilization(&exp, common.scheme, m, actors.as_deref())?;
            let (per_step, summary) = write_utilization(&report, &common.out)?;
            println!(
                "{} M = {m}: mean rate {:.6e} bit/s, effective {:.6e} bit/s",
                common.scheme,
                report.mean_rate(),
                report.mean_effective_rate()
            );
            println!("{}\n{}", per_step.display(), summary.display());
        }
        Command::SweepM { common, m } => {
            let exp = experiment(&common.config, common.seed)?;
            let actors = actors(&common, &exp)?;
            let reports = sweep_m(&exp, common.scheme, &m, actors.as_deref())?;
            for r in &reports {
                write_utilization(r, &common.out)?;
                println!("{} M = {}: effective {:.6e} bit/s", r.scheme, r.m, r.mean_effective_rate());
            }
            println!("{}", write_sweep(&reports, &common.out)?.display());
        }
        Command::GammaMap {
            profile,
            out,
            carrier_hz,
            c_min_pf,
            c_max_pf,
            n_c,
            n_theta,
        } => {
            let profile = match profile {
                Some(p) => CircuitProfile::load_csv(&p, FREE_SPACE_IMPEDANCE, carrier_hz)?,
                None => CircuitProfile::placeholder(carrier_hz),
            };
            let bounds = CapacitanceBounds::new(c_min_pf * 1e-12, c_max_pf * 1e-12)?;
            let file = std::fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
            write_gamma_map(&profile, &bounds, n_c, n_theta, std::io::BufWriter::new(file))?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
