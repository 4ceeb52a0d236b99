//! Config loading, flag overrides, thread pool and emission around a command.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::commands::{self, CommandOutput};
use crate::config::{builtin, RunConfig};
use crate::error::CliError;
use crate::output::{emit, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fig2ab,
    Fig2c,
    Fig2d,
    Fig3b,
    Fig4,
    Sensitivity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fig2ab => "fig2ab",
            Command::Fig2c => "fig2c",
            Command::Fig2d => "fig2d",
            Command::Fig3b => "fig3b",
            Command::Fig4 => "fig4",
            Command::Sensitivity => "sensitivity",
        }
    }
}

/// Command-line overrides; each takes precedence over the `[run]` table.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Path to a TOML file, or the name of a built-in configuration.
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub plot: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: String,
}

fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    RunConfig::parse(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Reads `--config`, or the built-in default of the command. The default for
/// fig3b overlays the cross and star parameter sets.
pub fn load_config(cmd: Command, config: Option<&str>) -> Result<RunConfig, CliError> {
    match config {
        Some(c) if Path::new(c).is_file() => parse(&std::fs::read_to_string(c)?, c),
        Some(c) => match builtin(c) {
            Some(text) => parse(text, c),
            None => Err(CliError::Config(format!("`{c}` is neither a file nor a built-in configuration"))),
        },
        None if cmd == Command::Fig3b => {
            let mut cross = parse(builtin("fig3b-cross").unwrap_or_default(), "fig3b-cross")?;
            let star = parse(builtin("fig3b-star").unwrap_or_default(), "fig3b-star")?;
            if let (Some(a), Some(b)) = (cross.fig3b.as_mut(), star.fig3b) {
                a.sets.extend(b.sets);
            }
            Ok(cross)
        }
        None => parse(builtin(cmd.name()).unwrap_or_default(), cmd.name()),
    }
}

fn missing(cmd: Command) -> CliError {
    CliError::Config(format!("configuration has no [{}] table", cmd.name()))
}

pub fn run(cmd: Command, opts: &RunOptions) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut cfg = load_config(cmd, opts.config.as_deref())?;
    let seed = opts.seed.or(cfg.run.seed).unwrap_or(0);
    let threads = opts.threads.or(cfg.run.threads).unwrap_or(0);
    let plot = opts.plot || cfg.run.plot.unwrap_or(false);
    let out_dir = opts.out.clone().or(cfg.run.out.clone()).unwrap_or_else(|| Path::new("out").join(cmd.name()));
    cfg.run.seed = Some(seed);
    cfg.run.threads = Some(threads);
    cfg.run.plot = Some(plot);
    cfg.run.out = Some(out_dir.clone());

    // Every section is resolved before any computation starts.
    let conf = |e: String| CliError::Config(format!("[{}] {e}", cmd.name()));
    let job: Box<dyn FnOnce() -> Result<CommandOutput, CliError> + Send> = match cmd {
        Command::Fig2ab => {
            let c = cfg.fig2ab.as_ref().ok_or_else(|| missing(cmd))?.resolve().map_err(conf)?;
            Box::new(move || commands::fig2ab(&c, plot))
        }
        Command::Fig2c => {
            let c = cfg.fig2c.as_ref().ok_or_else(|| missing(cmd))?.resolve().map_err(conf)?;
            Box::new(move || commands::fig2c(&c, plot))
        }
        Command::Fig2d => {
            let c = cfg.fig2d.as_ref().ok_or_else(|| missing(cmd))?.resolve(seed).map_err(conf)?;
            Box::new(move || commands::fig2d(&c, plot))
        }
        Command::Fig3b => {
            let c = cfg.fig3b.as_ref().ok_or_else(|| missing(cmd))?.resolve().map_err(conf)?;
            Box::new(move || commands::fig3b(&c, plot))
        }
        Command::Fig4 => {
            let c = cfg.fig4.as_ref().ok_or_else(|| missing(cmd))?.resolve().map_err(conf)?;
            Box::new(move || commands::fig4(&c, plot))
        }
        Command::Sensitivity => {
            let c = cfg.sensitivity.as_ref().ok_or_else(|| missing(cmd))?.resolve().map_err(conf)?;
            Box::new(move || commands::sensitivity_point(&c))
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    let output = pool.install(job)?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cmd.name().into(),
        seed,
        threads: pool.current_num_threads(),
        config: serde_json::to_value(&cfg).unwrap_or_default(),
        resolved: output.resolved,
        rates: output.rates,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    };
    emit(&out_dir, &output.artifacts, manifest.clone())?;
    let manifest = read_manifest(&out_dir)?;
    Ok(RunReport { out_dir, manifest, summary: output.summary })
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read(dir.join(crate::output::MANIFEST))?;
    serde_json::from_slice(&text).map_err(|e| CliError::Output(e.to_string()))
}
