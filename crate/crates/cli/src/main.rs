use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serfsim::config::BUILTIN;
use serfsim::run::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "serfsim", version, about = "Spin-exchange magnetometer models: figure data and sensitivity")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Γ and γ_eff versus field for I = 1/2 and 3/2 (mean field).
    Fig2ab(RunArgs),
    /// Single-collision transfer ε_+ versus scattering phase.
    Fig2c(RunArgs),
    /// Slowing-down factor q(P) from the pair-collision Monte Carlo.
    Fig2d(RunArgs),
    /// Driven potassium response: closed form and time-domain lock-in.
    Fig3b(RunArgs),
    /// Optimized sensitivity map over (n_K, n_H).
    Fig4(RunArgs),
    /// Sensitivity at one operating point, as JSON.
    Sensitivity(RunArgs),
    /// Print a built-in configuration, or list them.
    Defaults { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file, or the name of a built-in configuration.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Output directory (default out/<subcommand>).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.cmd {
        Cmd::Fig2ab(a) => (Command::Fig2ab, a),
        Cmd::Fig2c(a) => (Command::Fig2c, a),
        Cmd::Fig2d(a) => (Command::Fig2d, a),
        Cmd::Fig3b(a) => (Command::Fig3b, a),
        Cmd::Fig4(a) => (Command::Fig4, a),
        Cmd::Sensitivity(a) => (Command::Sensitivity, a),
        Cmd::Defaults { name: None } => {
            for (name, _) in BUILTIN {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Defaults { name: Some(n) } => match BUILTIN.iter().find(|b| b.0 == n) {
            Some((_, text)) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            None => {
                eprintln!("error: no built-in configuration `{n}`");
                return ExitCode::from(2);
            }
        },
    };
    let opts = RunOptions { config: args.config, seed: args.seed, threads: args.threads, plot: args.plot, out: args.out };
    match run(cmd, &opts) {
        Ok(report) => {
            println!("{}", report.summary);
            println!("wrote {} files and manifest.json to {}", report.manifest.outputs.len(), report.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
