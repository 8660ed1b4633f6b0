use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gastridge::config::RunConfig;
use gastridge::cycle::Segment;
use gastridge::workflow;

/// Reduced-order cell model with a GA-STRidge learned error correction.
#[derive(Parser, Debug)]
#[command(name = "gastridge", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `paths.out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a drive cycle from segments, e.g. `cc:c_rate=1,duration=600`,
    /// `pulse:c_rate=2,on=10,off=20,duration=600`,
    /// `walk:duration=1800,max_c_rate=2,seed=3`, `file:udds.csv`.
    BuildCycle {
        #[arg(long)]
        name: String,
        #[arg(required = true)]
        segments: Vec<String>,
    },
    /// Simulate the low-fidelity model on a cycle (path or name under cycles_dir).
    Simulate { cycle: String },
    /// Produce trace, reference and error series for each cycle.
    GenData {
        #[arg(required = true)]
        cycles: Vec<String>,
    },
    /// Run GA-STRidge on generated data.
    Train {
        /// Training cycle names (repeatable).
        #[arg(long = "train", required = true)]
        train: Vec<String>,
        #[arg(long)]
        valid: String,
        /// Directory holding gen-data output (default: the output directory).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Hybrid-model metrics on test cycles.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        cycles: Vec<String>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// SVD ranking of the model's active features.
    Rank {
        #[arg(long)]
        model: PathBuf,
        cycle: String,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> gastridge::Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.paths.out_dir.clone());
    let data_dir = |d: &Option<PathBuf>| d.clone().unwrap_or_else(|| out.clone());
    let show = |p: &Path| println!("{}", p.display());

    match &cli.command {
        Command::BuildCycle { name, segments } => {
            let segs = segments
                .iter()
                .map(|s| s.parse::<Segment>())
                .collect::<gastridge::Result<Vec<_>>>()?;
            show(&workflow::cmd_build_cycle(&cfg, name, &segs, &out)?);
        }
        Command::Simulate { cycle } => {
            show(&workflow::cmd_simulate(&cfg, &workflow::resolve_cycle(&cfg, cycle), &out)?);
        }
        Command::GenData { cycles } => {
            let paths: Vec<PathBuf> = cycles.iter().map(|c| workflow::resolve_cycle(&cfg, c)).collect();
            for name in workflow::cmd_gen_data(&cfg, &paths, &out)? {
                show(&workflow::error_path(&out, &name));
            }
        }
        Command::Train { train, valid, data } => {
            let outcome = workflow::cmd_train(&cfg, &data_dir(data), train, valid, &out)?;
            let best = &outcome.result.best;
            println!(
                "best: {} active terms, mse_train {:e}, mse_valid {:e}, fitness {}",
                best.n_active, best.mse_train, best.mse_valid, best.fitness
            );
            show(&outcome.model_path);
            show(&outcome.history_path);
            if !outcome.feasible() {
                log::warn!("best candidate violates the training-error constraint");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Evaluate { model, cycles, data } => {
            for r in workflow::cmd_evaluate(model, &data_dir(data), cycles, &out)? {
                println!("{}", r.csv_row().join(","));
            }
        }
        Command::Rank { model, cycle, data } => {
            let report = workflow::cmd_rank(model, &data_dir(data), cycle, &out)?;
            for f in &report.features {
                println!("{} {} {:e} {:.4}", f.rank, f.descriptor_id, f.xbar, f.cumulative_info);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
