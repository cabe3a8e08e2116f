use clap::{Parser, Subcommand};
use std::path::PathBuf;
use uwdg::config::RunConfig;
use uwdg::driver::RateMode;
use uwdg::pipeline;

#[derive(Parser)]
#[command(name = "uwdg", about = "Multiresolution UWDG solver for KdV and ZK equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the [sweep] values of a configuration and tabulate errors.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute the order column of OUT/errors.csv.
    Rates {
        /// Takes the rate mode from the [sweep] section when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Mesh,
    Epsilon,
    Dof,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn real_main() -> uwdg::Result<()> {
    match Cli::parse().cmd {
        Command::Run { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let s = pipeline::run(&cfg, Some(&out))?;
            println!("t = {:.6}  DoF = {}", s.t, s.dof);
            if let Some(e) = s.errors {
                println!("L1 = {:.4e}  L2 = {:.4e}  Linf = {:.4e}", e.l1, e.l2, e.linf);
            }
        }
        Command::Sweep { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            pipeline::sweep(&cfg, Some(&out))?;
            print!("{}", std::fs::read_to_string(out.join("errors.csv"))?);
        }
        Command::Rates { config, out, mode } => {
            let mode = match mode {
                Some(Mode::Mesh) => RateMode::Mesh,
                Some(Mode::Epsilon) => RateMode::Epsilon,
                Some(Mode::Dof) => RateMode::Dof,
                None => match config {
                    Some(c) => RunConfig::from_file(&c)?.sweep.map(|s| s.rate).unwrap_or_default(),
                    None => RateMode::Mesh,
                },
            };
            let path = out.join("errors.csv");
            let table = pipeline::rates_from_csv(&std::fs::read_to_string(&path)?, mode)?;
            std::fs::write(&path, &table)?;
            print!("{table}");
        }
    }
    Ok(())
}
